//! Null law of the detector when the true noise coherence differs from the
//! one the tables were built on.

use rayon::prelude::*;

use crate::detector::{build_noise_tables, check_coherence, delta_matrix, orbit_orthant, orbits, DetectorTables};
use crate::detector::relative_gap;
use crate::error::{Error, Result};
use crate::linalg::{CompositeCovariance, RealMatrix};
use crate::orthant::OrthantOptions;
use crate::rng::RngStream;

#[derive(Clone, Debug)]
pub struct MismatchAnalysis {
    /// G = diag(O′_j / O_j²).
    pub g: Vec<f64>,
    /// O′_j under the true coherence.
    pub o_prime: Vec<f64>,
    pub upsilon_sq: f64,
    pub upsilon1_sq: f64,
    pub varsigma1_sq: f64,
    pub varsigma2_sq: f64,
}

impl MismatchAnalysis {
    /// Variance of each score component under the mismatched null, υ₁²/υ².
    pub fn variance_ratio(&self) -> f64 {
        self.upsilon1_sq / self.upsilon_sq
    }
}

/// O′_j = P(0, Γ_j C′ Γ_j) for all patterns, one evaluation per T₁ orbit.
pub fn mismatched_orthants(c_prime: &RealMatrix, opts: &OrthantOptions, rng: &RngStream) -> Result<Vec<f64>> {
    let m = check_coherence(c_prime)?;
    let orbs = orbits(m)?;
    let vals: Vec<f64> = orbs
        .par_iter()
        .enumerate()
        .map(|(id, orbit)| orbit_orthant(c_prime, orbit, opts, &mut rng.derive(id as u64)))
        .collect::<Result<_>>()?;
    let mut o = vec![0.0; 1 << (2 * m)];
    for (orbit, v) in orbs.iter().zip(vals) {
        for &j in &orbit.members {
            o[j] = v;
        }
    }
    Ok(o)
}

/// Σ_j s_j g_j with s_j = Σ_i Δ(i,j)².
pub(crate) fn column_energy(delta: &RealMatrix) -> Vec<f64> {
    (0..delta.ncols())
        .map(|j| delta.column(j).iter().map(|v| v * v).sum())
        .collect()
}

/// υ₁² = tr(Δ₁ᵀΔ₁G) for a vector of mismatched orthant probabilities.
pub fn upsilon1_from_orthants(tables: &DetectorTables, o_prime: &[f64]) -> Result<(f64, Vec<f64>)> {
    let o = &tables.noise.o;
    if o_prime.len() != o.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} orthant values for {} patterns",
            o_prime.len(),
            o.len()
        )));
    }
    let g: Vec<f64> = o_prime.iter().zip(o).map(|(op, o)| op / (o * o)).collect();
    let t1: f64 = column_energy(&tables.delta1).iter().zip(&g).map(|(s, g)| s * g).sum();
    let t2: f64 = column_energy(&tables.delta2).iter().zip(&g).map(|(s, g)| s * g).sum();
    if relative_gap(t1, t2) > 1e-5 {
        return Err(Error::TraceMismatch {
            what: "mismatched score variance",
            first: t1,
            second: t2,
        });
    }
    Ok((t1, g))
}

/// υ₁², G and ς₁², ς₂² when the data follow `truth` but the detector uses `tables`.
pub fn upsilon1_sq(
    tables: &DetectorTables,
    truth: &CompositeCovariance,
    opts: &OrthantOptions,
    rng: &RngStream,
) -> Result<MismatchAnalysis> {
    if truth.m() != tables.m() {
        return Err(Error::DimensionMismatch(format!(
            "true covariance has m = {}, tables have m = {}",
            truth.m(),
            tables.m()
        )));
    }
    let noise_prime = build_noise_tables(&truth.c, opts, rng)?;
    let (upsilon1_sq, g) = upsilon1_from_orthants(tables, &noise_prime.o)?;

    // a′_i = D′^{-1/2} D^{1/2} a_i, same for b
    let scale: Vec<f64> = tables.d_diag.iter().zip(truth.d.iter()).map(|(d, dp)| (d / dp).sqrt()).collect();
    let rescale = |cols: &[Vec<f64>]| -> Vec<Vec<f64>> {
        cols.iter().map(|a| a.iter().zip(&scale).map(|(x, s)| x * s).collect()).collect()
    };
    let (dp1, _) = delta_matrix(&rescale(&tables.a_cols), &noise_prime.d);
    let (dp2, _) = delta_matrix(&rescale(&tables.b_cols), &noise_prime.d);
    let inv_o: Vec<f64> = tables.noise.o.iter().map(|o| 1.0 / o).collect();
    let cross = |a: &RealMatrix, b: &RealMatrix| -> f64 {
        let mut acc = 0.0;
        for i in 0..a.nrows() {
            for (j, w) in inv_o.iter().enumerate() {
                acc += a[(i, j)] * b[(i, j)] * w;
            }
        }
        acc
    };
    Ok(MismatchAnalysis {
        g,
        o_prime: noise_prime.o,
        upsilon_sq: tables.upsilon_sq,
        upsilon1_sq,
        varsigma1_sq: cross(&tables.delta1, &dp1),
        varsigma2_sq: cross(&tables.delta2, &dp2),
    })
}

/// exp(−υ²γ / (2υ₁²)).
pub fn pfa_mismatched(gamma: f64, upsilon_sq: f64, upsilon1_sq: f64) -> Result<f64> {
    check_variances(upsilon_sq, upsilon1_sq)?;
    Ok((-upsilon_sq * gamma / (2.0 * upsilon1_sq)).exp().min(1.0))
}

/// γ = −(2υ₁²/υ²) ln pfa.
pub fn threshold_mismatched(pfa: f64, upsilon_sq: f64, upsilon1_sq: f64) -> Result<f64> {
    check_variances(upsilon_sq, upsilon1_sq)?;
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::InvalidArgument(format!("pfa must lie in (0, 1), got {pfa}")));
    }
    Ok(-2.0 * upsilon1_sq / upsilon_sq * pfa.ln())
}

fn check_variances(upsilon_sq: f64, upsilon1_sq: f64) -> Result<()> {
    if !(upsilon_sq > 0.0 && upsilon1_sq > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variances must be positive, got υ² = {upsilon_sq}, υ₁² = {upsilon1_sq}"
        )));
    }
    Ok(())
}
