//! Noise coherence estimated from noise-only one-bit snapshots through the
//! arcsine law E[sign x sign y] = (2/π) asin ρ.

use std::f64::consts::FRAC_PI_2;

use nalgebra::SymmetricEigen;

use crate::detector::tau_of;
use crate::error::{Error, Result};
use crate::linalg::{CompositeCovariance, RealMatrix, RealVector};
use crate::radar::QuantizedData;

const EIGEN_FLOOR: f64 = 1e-8;

/// Averages a 2m×2m matrix onto the circular structure [A −B; B A],
/// A symmetric, B antisymmetric.
fn circularize(r: &RealMatrix) -> RealMatrix {
    let m = r.nrows() / 2;
    let mut out = RealMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let a = 0.25 * (r[(i, j)] + r[(j, i)] + r[(i + m, j + m)] + r[(j + m, i + m)]);
            let b = 0.25 * (r[(i + m, j)] - r[(j + m, i)] - r[(i, j + m)] + r[(j, i + m)]);
            out[(i, j)] = a;
            out[(i + m, j + m)] = a;
            out[(i + m, j)] = b;
            out[(i, j + m)] = -b;
        }
    }
    out
}

fn unit_diagonal(c: &RealMatrix) -> RealMatrix {
    let s: Vec<f64> = (0..c.nrows()).map(|i| 1.0 / c[(i, i)].sqrt()).collect();
    RealMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * s[i] * s[j])
}

/// Sample sign correlations mapped through sin(π r / 2), made circular,
/// projected onto the PSD cone and rescaled to a unit diagonal. Scale is
/// not identifiable from signs, so the variances come from `d_assumed`.
pub fn estimate_cov_one_bit(noise_only: &QuantizedData, d_assumed: &RealVector) -> Result<CompositeCovariance> {
    let m = noise_only.m();
    let k = 2 * m;
    if d_assumed.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} variances for m = {m}",
            d_assumed.len()
        )));
    }
    let n = noise_only.n();
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "need at least {k} noise-only snapshots, got {n}"
        )));
    }
    let mut counts = vec![0u64; 1 << k];
    for &p in noise_only.patterns() {
        counts[p as usize] += 1;
    }
    let mut r = RealMatrix::zeros(k, k);
    for (j, &cnt) in counts.iter().enumerate() {
        if cnt == 0 {
            continue;
        }
        let tau = tau_of(j, k);
        for a in 0..k {
            for b in 0..k {
                r[(a, b)] += cnt as f64 * tau[a] * tau[b];
            }
        }
    }
    r /= n as f64;
    let r = circularize(&r);
    let mut c = r.map(|v| (FRAC_PI_2 * v).sin());
    for i in 0..k {
        c[(i, i)] = 1.0;
    }
    let eig = SymmetricEigen::new(c.clone());
    if eig.eigenvalues.iter().any(|&l| l < EIGEN_FLOOR) {
        let lam = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
        let v = &eig.eigenvectors;
        c = v * RealMatrix::from_diagonal(&lam) * v.transpose();
        c = circularize(&unit_diagonal(&c));
    }
    CompositeCovariance::from_coherence(c, d_assumed.clone())
}
