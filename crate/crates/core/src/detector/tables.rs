//! Orthant probabilities O_j and derivative vectors d_j over all sign patterns.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{circular_defect, rotate_t1, RealMatrix, RealVector};
use crate::orthant::{orthant_grad_mean, orthant_prob_with, OrthantOptions};
use crate::rng::RngStream;

use super::patterns::{check_m, orbits, tau_of, Orbit};

/// Noise-only part of the detector: depends on the coherence matrix alone.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseTables {
    pub m: usize,
    pub c: RealMatrix,
    /// O_j = P(0, Γ_j C Γ_j).
    pub o: Vec<f64>,
    /// d_j = Γ_j ∂P(μ, Γ_j C Γ_j)/∂μ at μ = 0.
    pub d: Vec<Vec<f64>>,
    /// QMC tolerance the tables were built with.
    pub tol: f64,
}

impl NoiseTables {
    pub fn kappa(&self) -> usize {
        self.o.len()
    }
}

/// Γ_j C Γ_j.
pub(crate) fn reflect(c: &RealMatrix, tau: &[f64]) -> RealMatrix {
    RealMatrix::from_fn(c.nrows(), c.ncols(), |a, b| tau[a] * tau[b] * c[(a, b)])
}

pub(crate) fn check_coherence(c: &RealMatrix) -> Result<usize> {
    let k = c.nrows();
    if c.ncols() != k || k % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "coherence must be 2m×2m, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    let m = k / 2;
    check_m(m)?;
    if (0..k).any(|i| (c[(i, i)] - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidArgument("coherence matrix needs a unit diagonal".into()));
    }
    if circular_defect(c) > 1e-9 {
        return Err(Error::NotCircular);
    }
    Ok(m)
}

/// O_j for the orbit representative; shared by all four members.
pub(crate) fn orbit_orthant(
    c: &RealMatrix,
    orbit: &Orbit,
    opts: &OrthantOptions,
    rng: &mut RngStream,
) -> Result<f64> {
    let k = c.nrows();
    let tau = tau_of(orbit.representative(), k);
    let cj = reflect(c, &tau);
    Ok(orthant_prob_with(&RealVector::zeros(k), &cj, opts, rng)?.value)
}

/// Builds O and d with one 2m-dimensional orthant evaluation and 2m
/// (2m−1)-dimensional ones per T₁ orbit, replicating the rest by symmetry:
/// O_{T₁j} = O_j and d_{T₁j} = T₁ d_j.
pub fn build_noise_tables(c: &RealMatrix, opts: &OrthantOptions, rng: &RngStream) -> Result<NoiseTables> {
    let m = check_coherence(c)?;
    let k = 2 * m;
    let kappa = 1usize << k;
    let orbs = orbits(m)?;
    let per_orbit: Vec<(f64, Vec<f64>)> = orbs
        .par_iter()
        .enumerate()
        .map(|(id, orbit)| {
            let mut r = rng.derive(id as u64);
            let tau = tau_of(orbit.representative(), k);
            let cj = reflect(c, &tau);
            let o = orthant_prob_with(&RealVector::zeros(k), &cj, opts, &mut r)?.value;
            let zero = RealVector::zeros(k);
            let mut d = Vec::with_capacity(k);
            for l in 0..k {
                let g = orthant_grad_mean(&zero, &cj, l, opts, &mut r)?;
                d.push(tau[l] * g);
            }
            Ok((o, d))
        })
        .collect::<Result<_>>()?;
    let mut o = vec![0.0; kappa];
    let mut d = vec![Vec::new(); kappa];
    for (orbit, (ov, dv)) in orbs.iter().zip(per_orbit) {
        let mut cur = dv;
        for &j in &orbit.members {
            o[j] = ov;
            let next = rotate_t1(&cur);
            d[j] = cur;
            cur = next;
        }
    }
    Ok(NoiseTables {
        m,
        c: c.clone(),
        o,
        d,
        tol: opts.tol,
    })
}

/// Closed form for independent components: O_j = 4^{-m} and
/// d_j = τ_j 2^{-(2m−1)} / √(2π).
pub fn identity_noise_tables(m: usize) -> Result<NoiseTables> {
    check_m(m)?;
    let k = 2 * m;
    let kappa = 1usize << k;
    let o = 1.0 / kappa as f64;
    let g = 2f64.powi(-(k as i32 - 1)) / (2.0 * PI).sqrt();
    Ok(NoiseTables {
        m,
        c: RealMatrix::identity(k, k),
        o: vec![o; kappa],
        d: (0..kappa).map(|j| tau_of(j, k).into_iter().map(|t| t * g).collect()).collect(),
        tol: 0.0,
    })
}
