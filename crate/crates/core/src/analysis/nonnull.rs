//! Detection probability: exact moments of the score vector under H₁ and
//! the low-SNR noncentral χ² approximations.

use std::collections::HashMap;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::detector::{reflect, tau_of, DetectorTables};
use crate::error::{Error, Result};
use crate::linalg::{CompositeCovariance, RealVector};
use crate::orthant::{orthant_prob_with, OrthantOptions};
use crate::rng::RngStream;

use super::imhof::{imhof_cdf, noncentral_chi2_2_sf};
use super::mismatch::MismatchAnalysis;

/// Mean and covariance of w = (w₁, w₂) under H₁, with the weighted
/// noncentral χ² representation T = Σ λ_l (ν_l + m_l)².
#[derive(Clone, Debug, PartialEq)]
pub struct NonNullMoments {
    pub u_w: [f64; 2],
    /// [[σ₁², σ₁₂], [σ₁₂, σ₂²]].
    pub sigma_w: [[f64; 2]; 2],
    pub lambda: [f64; 2],
    pub m_noncentral: [f64; 2],
}

impl NonNullMoments {
    pub fn from_mean_cov(u_w: [f64; 2], sigma_w: [[f64; 2]; 2]) -> Result<Self> {
        let s = Matrix2::new(sigma_w[0][0], sigma_w[0][1], sigma_w[1][0], sigma_w[1][1]);
        let eig = SymmetricEigen::new(s);
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        // Σ = V Λ Vᵀ, P = Vᵀ: m = Λ^{-1/2} Vᵀ u
        let proj = eig.eigenvectors.transpose() * Vector2::new(u_w[0], u_w[1]);
        let lambda = [eig.eigenvalues[0], eig.eigenvalues[1]];
        Ok(Self {
            u_w,
            sigma_w,
            lambda,
            m_noncentral: [proj[0] / lambda[0].sqrt(), proj[1] / lambda[1].sqrt()],
        })
    }

    pub fn noncentrality(&self) -> [f64; 2] {
        [self.m_noncentral[0].powi(2), self.m_noncentral[1].powi(2)]
    }
}

/// Q(i,j) = P(Γ_j ν, Γ_j C Γ_j): the law of the sign pattern of one snapshot
/// with composite standardized mean ν.
pub fn pattern_probabilities(
    nu: &[f64],
    c: &crate::linalg::RealMatrix,
    opts: &OrthantOptions,
    rng: &mut RngStream,
) -> Result<Vec<f64>> {
    let k = c.nrows();
    (0..1usize << k)
        .map(|j| {
            let tau = tau_of(j, k);
            let mu = RealVector::from_iterator(k, nu.iter().zip(&tau).map(|(v, t)| v * t));
            Ok(orthant_prob_with(&mu, &reflect(c, &tau), opts, rng)?.value)
        })
        .collect()
}

/// Exact H₁ moments of the score vector when the data follow `truth` with
/// amplitude β and the detector uses `tables`. Pass the scenario's own
/// composite covariance for the matched case.
pub fn nonnull_moments(
    tables: &DetectorTables,
    beta: Complex64,
    truth: &CompositeCovariance,
    opts: &OrthantOptions,
    rng: &RngStream,
) -> Result<NonNullMoments> {
    if truth.m() != tables.m() {
        return Err(Error::DimensionMismatch(format!(
            "true covariance has m = {}, tables have m = {}",
            truth.m(),
            tables.m()
        )));
    }
    let n = tables.n();
    let kappa = tables.kappa();
    // ν_i = D′^{-1/2} D^{1/2} (a a_i + b b_i)
    let scale: Vec<f64> = tables.d_diag.iter().zip(truth.d.iter()).map(|(d, dp)| (d / dp).sqrt()).collect();
    let mut row_of = Vec::with_capacity(n);
    let mut distinct: Vec<Vec<f64>> = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (a, b) in tables.a_cols.iter().zip(&tables.b_cols) {
        let nu: Vec<f64> = (0..a.len()).map(|l| scale[l] * (beta.re * a[l] + beta.im * b[l])).collect();
        let key: Vec<u64> = nu.iter().map(|v| v.to_bits()).collect();
        let r = *seen.entry(key).or_insert_with(|| {
            distinct.push(nu);
            distinct.len() - 1
        });
        row_of.push(r);
    }
    let q_rows: Vec<Vec<f64>> = distinct
        .par_iter()
        .enumerate()
        .map(|(r, nu)| pattern_probabilities(nu, &truth.c, opts, &mut rng.derive(r as u64)))
        .collect::<Result<_>>()?;

    let (mut u1, mut u2) = (0.0, 0.0);
    let (mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let q = &q_rows[row_of[i]];
        let (mut m1, mut m2, mut e11, mut e22, mut e12) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for j in 0..kappa {
            let (x1, x2) = (tables.e1(i, j), tables.e2(i, j));
            let p = q[j];
            m1 += p * x1;
            m2 += p * x2;
            e11 += p * x1 * x1;
            e22 += p * x2 * x2;
            e12 += p * x1 * x2;
        }
        u1 += m1;
        u2 += m2;
        s11 += e11 - m1 * m1;
        s22 += e22 - m2 * m2;
        s12 += e12 - m1 * m2;
    }
    let v = tables.upsilon_sq;
    let u = tables.upsilon();
    NonNullMoments::from_mean_cov([u1 / u, u2 / u], [[s11 / v, s12 / v], [s12 / v, s22 / v]])
}

/// 1 − Pr{Σ λ_l χ²₁(m_l²) ≤ γ}.
pub fn pd_exact(gamma: f64, moments: &NonNullMoments) -> Result<f64> {
    Ok(1.0 - imhof_cdf(&moments.lambda, &moments.noncentrality(), gamma)?)
}

/// Matched low-SNR law: T ~ χ²₂(υ²|β|²).
pub fn pd_low_snr(gamma: f64, upsilon_sq: f64, beta: Complex64) -> Result<f64> {
    if !(upsilon_sq > 0.0) {
        return Err(Error::InvalidArgument(format!("υ² must be positive, got {upsilon_sq}")));
    }
    noncentral_chi2_2_sf(gamma, upsilon_sq * beta.norm_sqr())
}

/// Mismatched low-SNR law: (υ²/υ₁²) T ~ χ²₂((a²ς₁⁴ + b²ς₂⁴)/υ₁²).
pub fn pd_low_snr_mismatched(gamma: f64, analysis: &MismatchAnalysis, beta: Complex64) -> Result<f64> {
    let (v, v1) = (analysis.upsilon_sq, analysis.upsilon1_sq);
    if !(v > 0.0 && v1 > 0.0) {
        return Err(Error::InvalidArgument("variances must be positive".into()));
    }
    let delta_sq =
        (beta.re.powi(2) * analysis.varsigma1_sq.powi(2) + beta.im.powi(2) * analysis.varsigma2_sq.powi(2)) / v1;
    noncentral_chi2_2_sf(v / v1 * gamma, delta_sq)
}
