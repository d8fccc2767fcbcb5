//! Rao score detector for one-bit snapshots.
//!
//! Snapshot i contributes through its sign pattern j(i) only, so the test
//! statistic reduces to table lookups:
//! w₁ = (1/υ) Σ_i a_iᵀ d_{j(i)} / O_{j(i)}, w₂ likewise with b_i, T = w₁² + w₂².

mod io;
mod patterns;
mod tables;

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, RealMatrix, RealVector};
use crate::orthant::OrthantOptions;
use crate::radar::{QuantizedData, Scenario};
use crate::rng::RngStream;

pub use io::{coherence_hash, load_noise_tables, save_noise_tables, TABLE_FORMAT_VERSION};
pub use patterns::{
    enumerate_patterns, orbit_partition, orbits, rotate_index, tau_of, Orbit, SignPattern, MAX_M,
};
pub(crate) use tables::{check_coherence, orbit_orthant, reflect};
pub use tables::{build_noise_tables, identity_noise_tables, NoiseTables};

/// Tolerance used for detector tables unless the caller overrides it.
pub const BUILD_TOL: f64 = 1e-7;

/// Noise tables combined with one scenario's signal directions.
#[derive(Clone, Debug)]
pub struct DetectorTables {
    pub noise: Arc<NoiseTables>,
    /// Diagonal D of the composite noise covariance assumed by the detector.
    pub d_diag: RealVector,
    /// a_i = D^{-1/2}[u_i; v_i].
    pub a_cols: Vec<Vec<f64>>,
    /// b_i = D^{-1/2}[−v_i; u_i] = −T₁ a_i.
    pub b_cols: Vec<Vec<f64>>,
    /// Δ₁(i,j) = a_iᵀ d_j, n×κ.
    pub delta1: RealMatrix,
    /// Δ₂(i,j) = b_iᵀ d_j, n×κ.
    pub delta2: RealMatrix,
    pub upsilon_sq: f64,
    /// Number of distinct columns a_i.
    pub n_distinct: usize,
    // Δ_l / O, row-major n×κ, for scoring
    e1: Vec<f64>,
    e2: Vec<f64>,
}

/// Signal directions a_i, b_i of each column of W.
pub(crate) fn signal_directions(w: &ComplexMatrix, d_diag: &RealVector) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = w.nrows();
    let s: Vec<f64> = d_diag.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut a_cols = Vec::with_capacity(w.ncols());
    let mut b_cols = Vec::with_capacity(w.ncols());
    for i in 0..w.ncols() {
        let mut a = vec![0.0; 2 * m];
        let mut b = vec![0.0; 2 * m];
        for k in 0..m {
            let z = w[(k, i)];
            a[k] = s[k] * z.re;
            a[k + m] = s[k + m] * z.im;
            b[k] = -s[k] * z.im;
            b[k + m] = s[k + m] * z.re;
        }
        a_cols.push(a);
        b_cols.push(b);
    }
    (a_cols, b_cols)
}

/// Δ(i,j) = x_iᵀ d_j, evaluated once per distinct column.
pub(crate) fn delta_matrix(cols: &[Vec<f64>], d: &[Vec<f64>]) -> (RealMatrix, usize) {
    let n = cols.len();
    let kappa = d.len();
    let mut out = RealMatrix::zeros(n, kappa);
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (i, x) in cols.iter().enumerate() {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(&row) = seen.get(&key) {
            let copy = out.row(row).clone_owned();
            out.set_row(i, &copy);
            continue;
        }
        seen.insert(key, i);
        for (j, dj) in d.iter().enumerate() {
            out[(i, j)] = x.iter().zip(dj).map(|(a, b)| a * b).sum();
        }
    }
    (out, seen.len())
}

/// Σ_ij Δ(i,j)² g_j.
pub(crate) fn weighted_trace(delta: &RealMatrix, g: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..delta.nrows() {
        for (j, gj) in g.iter().enumerate() {
            let v = delta[(i, j)];
            acc += v * v * gj;
        }
    }
    acc
}

pub(crate) fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

impl DetectorTables {
    /// Combines noise tables with signature `w` and composite variances `d_diag`.
    pub fn build(w: &ComplexMatrix, d_diag: &RealVector, noise: Arc<NoiseTables>) -> Result<Self> {
        let m = noise.m;
        if w.nrows() != m || d_diag.len() != 2 * m {
            return Err(Error::DimensionMismatch(format!(
                "tables are for m = {m}, W has {} rows and D has {} entries",
                w.nrows(),
                d_diag.len()
            )));
        }
        let (a_cols, b_cols) = signal_directions(w, d_diag);
        let (delta1, n_distinct) = delta_matrix(&a_cols, &noise.d);
        let (delta2, _) = delta_matrix(&b_cols, &noise.d);
        let inv_o: Vec<f64> = noise.o.iter().map(|o| 1.0 / o).collect();
        let t1 = weighted_trace(&delta1, &inv_o);
        let t2 = weighted_trace(&delta2, &inv_o);
        if relative_gap(t1, t2) > 1e-6 {
            return Err(Error::TraceMismatch {
                what: "Fisher information",
                first: t1,
                second: t2,
            });
        }
        if !(t1 > 0.0) {
            return Err(Error::InvalidArgument("target signature has zero Fisher information".into()));
        }
        let n = w.ncols();
        let kappa = noise.kappa();
        let mut e1 = vec![0.0; n * kappa];
        let mut e2 = vec![0.0; n * kappa];
        for i in 0..n {
            for j in 0..kappa {
                e1[i * kappa + j] = delta1[(i, j)] * inv_o[j];
                e2[i * kappa + j] = delta2[(i, j)] * inv_o[j];
            }
        }
        Ok(Self {
            noise,
            d_diag: d_diag.clone(),
            a_cols,
            b_cols,
            delta1,
            delta2,
            upsilon_sq: t1,
            n_distinct,
            e1,
            e2,
        })
    }

    pub fn m(&self) -> usize {
        self.noise.m
    }

    pub fn n(&self) -> usize {
        self.a_cols.len()
    }

    pub fn kappa(&self) -> usize {
        self.noise.kappa()
    }

    pub fn upsilon(&self) -> f64 {
        self.upsilon_sq.sqrt()
    }

    /// E_l(i,j) = Δ_l(i,j)/O_j.
    #[inline]
    pub fn e1(&self, i: usize, j: usize) -> f64 {
        self.e1[i * self.kappa() + j]
    }

    #[inline]
    pub fn e2(&self, i: usize, j: usize) -> f64 {
        self.e2[i * self.kappa() + j]
    }

    /// (w₁, w₂) for snapshot pattern indices; `patterns.len()` must equal n.
    pub fn scores(&self, patterns: &[u32]) -> Result<(f64, f64)> {
        if patterns.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} snapshots for tables built on {}",
                patterns.len(),
                self.n()
            )));
        }
        let kappa = self.kappa();
        let (mut s1, mut s2) = (0.0, 0.0);
        for (i, &p) in patterns.iter().enumerate() {
            let j = p as usize;
            if j >= kappa {
                return Err(Error::UnknownPattern);
            }
            s1 += self.e1[i * kappa + j];
            s2 += self.e2[i * kappa + j];
        }
        let u = self.upsilon();
        Ok((s1 / u, s2 / u))
    }

    /// T = w₁² + w₂² from pattern indices.
    pub fn statistic(&self, patterns: &[u32]) -> Result<f64> {
        let (w1, w2) = self.scores(patterns)?;
        Ok(w1 * w1 + w2 * w2)
    }
}

/// Noise tables on the scenario's own coherence matrix.
pub fn build_detector(scenario: &Scenario, opts: &OrthantOptions, rng: &RngStream) -> Result<DetectorTables> {
    let noise = build_noise_tables(&scenario.composite.c, opts, rng)?;
    build_signal_tables(scenario, Arc::new(noise))
}

/// Signal tables using the scenario's W and composite variances.
pub fn build_signal_tables(scenario: &Scenario, noise: Arc<NoiseTables>) -> Result<DetectorTables> {
    DetectorTables::build(&scenario.w, &scenario.composite.d, noise)
}

/// Baseline that treats the noise as white: coherence forced to I, variances
/// kept from the scenario.
pub fn white_noise_tables(scenario: &Scenario) -> Result<DetectorTables> {
    let noise = identity_noise_tables(scenario.m)?;
    build_signal_tables(scenario, Arc::new(noise))
}

/// Rao statistic T_R of a quantized data block.
pub fn rao_statistic(tables: &DetectorTables, data: &QuantizedData) -> Result<f64> {
    if data.m() != tables.m() {
        return Err(Error::DimensionMismatch(format!(
            "data has m = {}, tables have m = {}",
            data.m(),
            tables.m()
        )));
    }
    tables.statistic(data.patterns())
}

/// γ = −2 ln(pfa) for the asymptotic χ²₂ null law.
pub fn threshold_for_pfa(pfa: f64) -> Result<f64> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::InvalidArgument(format!("pfa must lie in (0, 1), got {pfa}")));
    }
    Ok(-2.0 * pfa.ln())
}

/// exp(−γ/2), capped at 1 for γ ≤ 0.
pub fn pfa_for_threshold(gamma: f64) -> f64 {
    (-gamma / 2.0).exp().min(1.0)
}
