//! Multivariate normal orthant probabilities P(μ, Σ) = Pr{x ≻ 0}, x ~ N(μ, Σ),
//! and their derivatives with respect to the mean and the correlations.
//!
//! Dimensions up to two (and zero-mean three) use closed forms. Larger
//! problems are mapped to the unit cube by Genz's separation of variables
//! with greedy variable reordering, then integrated with randomly shifted
//! Kronecker lattices until the standard error across shifts reaches `tol`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, RealMatrix, RealVector};
use crate::normal::{bvn_lower, quantile_approx, std_normal_cdf, std_normal_pdf};
use crate::qmc::{baker, random_shift, Kronecker};
use crate::rng::RngStream;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrthantOptions {
    /// Target standard error of the QMC estimate.
    pub tol: f64,
    /// Budget of integrand evaluations summed over all shifts.
    pub max_points: usize,
    /// Evaluations of the first pass, summed over all shifts.
    pub min_points: usize,
    /// Number of independent random shifts.
    pub shifts: usize,
    /// Greedy variable reordering before the Cholesky factorization.
    pub reorder: bool,
    /// Exactly this many points per shift, ignoring `tol`. Together with
    /// `reorder = false` this makes the estimate a smooth function of the
    /// inputs for a fixed stream, which finite-difference checks rely on.
    pub fixed_points: Option<usize>,
}

impl Default for OrthantOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_points: 1 << 20,
            min_points: 1 << 11,
            shifts: 10,
            reorder: true,
            fixed_points: None,
        }
    }
}

impl OrthantOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthantResult {
    pub value: f64,
    pub err_estimate: f64,
    pub n_points: usize,
}

impl OrthantResult {
    fn exact(value: f64) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            err_estimate: 0.0,
            n_points: 0,
        }
    }
}

fn validate(mu: &RealVector, sigma: &RealMatrix, tol: f64) -> Result<()> {
    let k = mu.len();
    if sigma.nrows() != k || sigma.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "mean has {k} entries, covariance is {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    for i in 0..k {
        if !(sigma[(i, i)] > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "covariance diagonal entry {i} is {}",
                sigma[(i, i)]
            )));
        }
        for j in i + 1..k {
            let asym = (sigma[(i, j)] - sigma[(j, i)]).abs();
            if asym > 1e-10 {
                return Err(Error::NotHermitian { asymmetry: asym });
            }
        }
    }
    if k > 1 {
        let scale = sigma.diagonal().max();
        let lo = min_eigenvalue(sigma);
        if lo < -1e-10 * scale.max(1.0) {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lo });
        }
    }
    Ok(())
}

/// Pr{x ≻ 0} for x ~ N(μ, Σ) with default options apart from `tol`.
pub fn orthant_prob(
    mu: &RealVector,
    sigma: &RealMatrix,
    tol: f64,
    rng: &mut RngStream,
) -> Result<OrthantResult> {
    orthant_prob_with(mu, sigma, &OrthantOptions::with_tol(tol), rng)
}

pub fn orthant_prob_with(
    mu: &RealVector,
    sigma: &RealMatrix,
    opts: &OrthantOptions,
    rng: &mut RngStream,
) -> Result<OrthantResult> {
    validate(mu, sigma, opts.tol)?;
    let k = mu.len();
    // standardize: Pr{z < b} with z ~ N(0, R)
    let sd: Vec<f64> = (0..k).map(|i| sigma[(i, i)].sqrt()).collect();
    let b: Vec<f64> = (0..k).map(|i| mu[i] / sd[i]).collect();
    let r = RealMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            (sigma[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
        }
    });
    Ok(standardized(&b, &r, opts, rng))
}

/// Pr{z < b}, z ~ N(0, R) with unit-diagonal R.
fn standardized(b: &[f64], r: &RealMatrix, opts: &OrthantOptions, rng: &mut RngStream) -> OrthantResult {
    let k = b.len();
    let independent = (0..k).all(|i| (i + 1..k).all(|j| r[(i, j)] == 0.0));
    if independent {
        return OrthantResult::exact(b.iter().map(|&x| std_normal_cdf(x)).product());
    }
    let zero_mean = b.iter().all(|&x| x == 0.0);
    match k {
        2 if zero_mean => OrthantResult::exact(0.25 + r[(0, 1)].asin() / (2.0 * PI)),
        2 => OrthantResult::exact(bvn_lower(b[0], b[1], r[(0, 1)])),
        3 if zero_mean => OrthantResult::exact(
            0.125 + (r[(0, 1)].asin() + r[(0, 2)].asin() + r[(1, 2)].asin()) / (4.0 * PI),
        ),
        _ => genz(b, r, opts, rng),
    }
}

/// Cholesky factor of R with rows permuted along with `b`, optionally in
/// the greedy order that integrates the most restrictive variable first.
struct Factor {
    l: RealMatrix,
    b: Vec<f64>,
}

const PIVOT_TINY: f64 = 1e-12;

fn factorize(b: &[f64], r: &RealMatrix, reorder: bool) -> Factor {
    let k = b.len();
    let mut a = r.clone();
    let mut b = b.to_vec();
    let mut l = RealMatrix::zeros(k, k);
    let mut y = vec![0.0; k];
    for i in 0..k {
        if reorder {
            let mut best = i;
            let mut best_p = f64::INFINITY;
            for v in i..k {
                let mut var = a[(v, v)];
                let mut shift = 0.0;
                for p in 0..i {
                    var -= l[(v, p)] * l[(v, p)];
                    shift += l[(v, p)] * y[p];
                }
                let num = b[v] - shift;
                let p = if var > PIVOT_TINY {
                    std_normal_cdf(num / var.sqrt())
                } else if num >= 0.0 {
                    1.0
                } else {
                    0.0
                };
                if p < best_p {
                    best_p = p;
                    best = v;
                }
            }
            if best != i {
                a.swap_rows(i, best);
                a.swap_columns(i, best);
                b.swap(i, best);
                for p in 0..i {
                    let t = l[(i, p)];
                    l[(i, p)] = l[(best, p)];
                    l[(best, p)] = t;
                }
            }
        }
        let mut var = a[(i, i)];
        for p in 0..i {
            var -= l[(i, p)] * l[(i, p)];
        }
        let mut shift = 0.0;
        for p in 0..i {
            shift += l[(i, p)] * y[p];
        }
        if var > PIVOT_TINY {
            let lii = var.sqrt();
            l[(i, i)] = lii;
            for v in i + 1..k {
                let mut t = a[(v, i)];
                for p in 0..i {
                    t -= l[(v, p)] * l[(i, p)];
                }
                l[(v, i)] = t / lii;
            }
            // expected value of the truncated variable, steering later choices
            let bt = (b[i] - shift) / lii;
            let cdf = std_normal_cdf(bt);
            y[i] = if cdf > 1e-300 { -std_normal_pdf(bt) / cdf } else { bt };
        } else {
            y[i] = 0.0;
        }
    }
    Factor { l, b }
}

/// Separation-of-variables integrand at a point of the (k−1)-cube.
#[inline]
fn integrand(f: &Factor, w: &[f64], y: &mut [f64]) -> f64 {
    let k = f.b.len();
    let mut prod = 1.0;
    for i in 0..k {
        let mut shift = 0.0;
        for p in 0..i {
            shift += f.l[(i, p)] * y[p];
        }
        let lii = f.l[(i, i)];
        let e = if lii > 0.0 {
            std_normal_cdf((f.b[i] - shift) / lii)
        } else if f.b[i] - shift >= 0.0 {
            1.0
        } else {
            0.0
        };
        prod *= e;
        if prod == 0.0 {
            return 0.0;
        }
        if i + 1 < k {
            let u = (w[i] * e).clamp(1e-300, 1.0 - 1e-16);
            y[i] = quantile_approx(u);
        }
    }
    prod
}

fn genz(b: &[f64], r: &RealMatrix, opts: &OrthantOptions, rng: &mut RngStream) -> OrthantResult {
    let k = b.len();
    let f = factorize(b, r, opts.reorder);
    let dim = k - 1;
    let seq = Kronecker::new(dim);
    let n_shifts = opts.shifts.max(2);
    let shifts: Vec<Vec<f64>> = (0..n_shifts).map(|_| random_shift(dim, rng)).collect();
    let mut sums = vec![0.0; n_shifts];
    let mut n: usize = 0;
    let mut target = match opts.fixed_points {
        Some(p) => p.max(1),
        None => opts.min_points.div_ceil(n_shifts).max(16),
    };
    let mut point = vec![0.0; dim];
    let mut y = vec![0.0; k];
    loop {
        for (shift, sum) in shifts.iter().zip(sums.iter_mut()) {
            for i in n..target {
                seq.point_into(i as u64 + 1, shift, &mut point);
                for u in point.iter_mut() {
                    *u = baker(*u);
                }
                *sum += integrand(&f, &point, &mut y);
            }
        }
        n = target;
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let value = means.iter().sum::<f64>() / n_shifts as f64;
        let var = means.iter().map(|m| (m - value) * (m - value)).sum::<f64>()
            / ((n_shifts - 1) * n_shifts) as f64;
        let err = var.sqrt();
        let done = opts.fixed_points.is_some()
            || err <= opts.tol
            || 2 * n * n_shifts > opts.max_points;
        if done {
            return OrthantResult {
                value: value.clamp(0.0, 1.0),
                err_estimate: err,
                n_points: n * n_shifts,
            };
        }
        target = 2 * n;
    }
}

/// Removes row and column `j`.
fn remove_index(a: &RealMatrix, j: usize) -> RealMatrix {
    a.clone().remove_row(j).remove_column(j)
}

/// ∂P(μ, Σ)/∂μ(j) = P(ω(μ, j), R(Σ, j)) / √(2π Σ(j,j)), with ω dropping
/// entry `j` and R(Σ, j) = Θ(Σ, j) − r_j r_jᵀ / Σ(j,j).
///
/// The reduced mean carries no regression adjustment, so the formula is the
/// exact derivative only at μ = 0; elsewhere it is evaluated as written.
/// `j` is 0-based.
pub fn orthant_grad_mean(
    mu: &RealVector,
    sigma: &RealMatrix,
    j: usize,
    opts: &OrthantOptions,
    rng: &mut RngStream,
) -> Result<f64> {
    let k = mu.len();
    validate(mu, sigma, opts.tol)?;
    if j >= k {
        return Err(Error::IndexOutOfRange { index: j, dim: k });
    }
    let sjj = sigma[(j, j)];
    let scale = 1.0 / (2.0 * PI * sjj).sqrt();
    if k == 1 {
        return Ok(scale);
    }
    let r_col: Vec<f64> = (0..k).filter(|&i| i != j).map(|i| sigma[(i, j)]).collect();
    let mut red = remove_index(sigma, j);
    for a in 0..k - 1 {
        for b in 0..k - 1 {
            red[(a, b)] -= r_col[a] * r_col[b] / sjj;
        }
    }
    let omega = mu.clone().remove_row(j);
    let p = orthant_prob_with(&omega, &red, opts, rng)?;
    Ok(scale * p.value)
}

/// Position of the pair (r, s), r < s, in vech order (1,2),(1,3),…,(k−1,k).
/// All indices 0-based.
pub fn vech_index(r: usize, s: usize, k: usize) -> usize {
    debug_assert!(r < s && s < k);
    r * k - r * (r + 1) / 2 + (s - r - 1)
}

const NEAR_UNIT: f64 = 1.0 - 1e-10;

/// ∂P(0, C)/∂C(r,s) = P(0, C̄) / (2π √(1 − C(r,s)²)), where C̄ is the
/// covariance of the remaining coordinates given x_r = x_s = 0.
/// `r < s`, 0-based.
pub fn orthant_grad_corr(
    c: &RealMatrix,
    r: usize,
    s: usize,
    opts: &OrthantOptions,
    rng: &mut RngStream,
) -> Result<f64> {
    let k = c.nrows();
    if c.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "coherence must be square, got {}x{}",
            k,
            c.ncols()
        )));
    }
    if s >= k {
        return Err(Error::IndexOutOfRange { index: s, dim: k });
    }
    if r >= s {
        return Err(Error::InvalidArgument(format!(
            "correlation derivative needs r < s, got ({r}, {s})"
        )));
    }
    let rho = c[(r, s)];
    if rho.abs() >= NEAR_UNIT {
        return Err(Error::NearSingularCorrelation { value: rho });
    }
    let density = 1.0 / (2.0 * PI * (1.0 - rho * rho).sqrt());
    if k == 2 {
        return Ok(density);
    }
    // Schur complement: Θ(Θ(C⁻¹, r), s−1)⁻¹ without forming C⁻¹
    let rest: Vec<usize> = (0..k).filter(|&i| i != r && i != s).collect();
    let det = 1.0 - rho * rho;
    let inv = [[1.0 / det, -rho / det], [-rho / det, 1.0 / det]];
    let cond = RealMatrix::from_fn(k - 2, k - 2, |a, b| {
        let (ia, ib) = (rest[a], rest[b]);
        let xa = [c[(ia, r)], c[(ia, s)]];
        let xb = [c[(r, ib)], c[(s, ib)]];
        let mut q = 0.0;
        for u in 0..2 {
            for v in 0..2 {
                q += xa[u] * inv[u][v] * xb[v];
            }
        }
        c[(ia, ib)] - q
    });
    let cond = (&cond + cond.transpose()) * 0.5;
    let p = orthant_prob_with(&RealVector::zeros(k - 2), &cond, opts, rng)?;
    Ok(density * p.value)
}

/// All correlation derivatives stacked in vech order.
pub fn orthant_grad_corr_all(c: &RealMatrix, opts: &OrthantOptions, rng: &mut RngStream) -> Result<Vec<f64>> {
    let k = c.nrows();
    let mut out = Vec::with_capacity(k * (k.saturating_sub(1)) / 2);
    for r in 0..k {
        for s in r + 1..k {
            out.push(orthant_grad_corr(c, r, s, opts, rng)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn random_corr(k: usize, rng: &mut RngStream) -> RealMatrix {
        let a = RealMatrix::from_fn(k, k, |_, _| rng.standard_normal());
        let s = &a * a.transpose() + RealMatrix::identity(k, k) * 0.5;
        crate::linalg::coherence(&s).unwrap()
    }

    /// Plain Monte Carlo estimate (value, standard error).
    fn mc_orthant(mu: &RealVector, sigma: &RealMatrix, n: usize, seed: u64) -> (f64, f64) {
        let l = sigma.clone().cholesky().unwrap().unpack();
        let k = mu.len();
        let mut rng = RngStream::new(seed, 77);
        let mut z = RealVector::zeros(k);
        let mut hits = 0usize;
        for _ in 0..n {
            for v in z.iter_mut() {
                *v = rng.standard_normal();
            }
            let x = mu + &l * &z;
            if x.iter().all(|&v| v > 0.0) {
                hits += 1;
            }
        }
        let p = hits as f64 / n as f64;
        (p, (p * (1.0 - p) / n as f64).sqrt())
    }

    #[test]
    fn closed_form_examples() {
        let mut rng = RngStream::new(0, 0);
        let p = orthant_prob(&RealVector::zeros(4), &RealMatrix::identity(4, 4), 1e-6, &mut rng).unwrap();
        assert_abs_diff_eq!(p.value, 0.0625, epsilon = 1e-15);
        let s = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let p = orthant_prob(&RealVector::zeros(2), &s, 1e-6, &mut rng).unwrap();
        assert_abs_diff_eq!(p.value, 1.0 / 3.0, epsilon = 1e-15);
        let p = orthant_prob(&RealVector::from_vec(vec![1.0]), &RealMatrix::identity(1, 1), 1e-6, &mut rng).unwrap();
        assert_abs_diff_eq!(p.value, 0.841_344_746_068_543, epsilon = 1e-12);
        let p = orthant_prob(&RealVector::zeros(0), &RealMatrix::zeros(0, 0), 1e-6, &mut rng).unwrap();
        assert_eq!(p.value, 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = RngStream::new(0, 0);
        let z = RealVector::zeros(2);
        let bad_diag = RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(orthant_prob(&z, &bad_diag, 1e-6, &mut rng).is_err());
        let indef = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(orthant_prob(&z, &indef, 1e-6, &mut rng).is_err());
        assert!(orthant_prob(&z, &RealMatrix::identity(2, 2), 0.0, &mut rng).is_err());
    }

    #[test]
    fn genz_reproduces_trivariate_closed_form() {
        let mut rng = RngStream::new(3, 0);
        for _ in 0..5 {
            let c = random_corr(3, &mut rng);
            let b = [0.0; 3];
            let exact = 0.125 + (c[(0, 1)].asin() + c[(0, 2)].asin() + c[(1, 2)].asin()) / (4.0 * PI);
            let est = genz(&b, &c, &OrthantOptions::with_tol(1e-7), &mut rng);
            let gap = (est.value - exact).abs();
            assert!(gap < 4.0 * est.err_estimate + 1e-9 && gap < 5e-7, "{} vs {exact}", est.value);
        }
    }

    #[test]
    fn genz_matches_bivariate_with_mean() {
        let mut rng = RngStream::new(4, 0);
        let c = RealMatrix::from_row_slice(3, 3, &[1.0, 0.6, 0.0, 0.6, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let b = [0.3, -0.7, 0.4];
        let exact = bvn_lower(0.3, -0.7, 0.6) * std_normal_cdf(0.4);
        let est = genz(&b, &c, &OrthantOptions::with_tol(1e-8), &mut rng);
        assert!((est.value - exact).abs() < 5e-8);
    }

    #[test]
    fn matches_plain_monte_carlo_in_four_dimensions() {
        let mut rng = RngStream::new(5, 0);
        for t in 0..3 {
            let c = random_corr(4, &mut rng);
            let mu = RealVector::from_fn(4, |_, _| 0.5 * rng.standard_normal());
            let p = orthant_prob(&mu, &c, 1e-6, &mut rng).unwrap();
            let (mc, se) = mc_orthant(&mu, &c, 400_000, t);
            assert!((p.value - mc).abs() < 4.0 * se + 1e-6, "{} vs {mc}±{se}", p.value);
        }
    }

    #[test]
    fn sign_reflections_partition_space() {
        let mut rng = RngStream::new(6, 0);
        for k in 2..=4 {
            let c = random_corr(k, &mut rng);
            let tol = 1e-7;
            let mut total = 0.0;
            for bits in 0..(1usize << k) {
                let g: Vec<f64> = (0..k).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect();
                let cj = RealMatrix::from_fn(k, k, |i, j| g[i] * g[j] * c[(i, j)]);
                total += orthant_prob(&RealVector::zeros(k), &cj, tol, &mut rng).unwrap().value;
            }
            assert!((total - 1.0).abs() < 5.0 * tol * (1 << k) as f64, "k={k}: {total}");
        }
    }

    #[test]
    fn sheppard_derivative() {
        let mut rng = RngStream::new(0, 0);
        for rho in [-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9] {
            let c = RealMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
            let g = orthant_grad_corr(&c, 0, 1, &OrthantOptions::default(), &mut rng).unwrap();
            assert_abs_diff_eq!(g, 1.0 / (2.0 * PI * (1.0 - rho * rho).sqrt()), epsilon = 1e-12);
        }
        let c = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let g = orthant_grad_corr(&c, 0, 1, &OrthantOptions::default(), &mut rng).unwrap();
        assert_abs_diff_eq!(g, 0.183_776, epsilon = 1e-6);
    }

    #[test]
    fn grad_corr_rejects_poles_and_order() {
        let mut rng = RngStream::new(0, 0);
        let c = RealMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            orthant_grad_corr(&c, 0, 1, &OrthantOptions::default(), &mut rng),
            Err(Error::NearSingularCorrelation { .. })
        ));
        let c = RealMatrix::identity(3, 3);
        assert!(orthant_grad_corr(&c, 1, 1, &OrthantOptions::default(), &mut rng).is_err());
        assert!(orthant_grad_corr(&c, 2, 1, &OrthantOptions::default(), &mut rng).is_err());
    }

    #[test]
    fn grad_corr_all_on_identity_and_ordering() {
        let mut rng = RngStream::new(0, 0);
        let g = orthant_grad_corr_all(&RealMatrix::identity(3, 3), &OrthantOptions::default(), &mut rng).unwrap();
        assert_eq!(g.len(), 3);
        for v in g {
            assert_abs_diff_eq!(v, 0.079_577_471_545_947_67, epsilon = 1e-12);
        }
        assert_eq!(vech_index(0, 2, 4), 1);
        assert_eq!(vech_index(0, 1, 4), 0);
        assert_eq!(vech_index(2, 3, 4), 5);
        let c = RealMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]);
        let all = orthant_grad_corr_all(&c, &OrthantOptions::default(), &mut rng).unwrap();
        let one = orthant_grad_corr(&c, 0, 1, &OrthantOptions::default(), &mut rng).unwrap();
        assert_eq!(all, vec![one]);
    }

    #[test]
    fn grad_mean_closed_forms() {
        let mut rng = RngStream::new(0, 0);
        let opts = OrthantOptions::default();
        let g = orthant_grad_mean(&RealVector::zeros(1), &RealMatrix::identity(1, 1), 0, &opts, &mut rng).unwrap();
        assert_abs_diff_eq!(g, 0.398_942_280_401_432_7, epsilon = 1e-15);
        for rho in [-0.7, 0.0, 0.4] {
            let s = RealMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
            let g = orthant_grad_mean(&RealVector::zeros(2), &s, 1, &opts, &mut rng).unwrap();
            assert_abs_diff_eq!(g, 0.199_471_140_200_716_35, epsilon = 1e-12);
        }
        assert!(matches!(
            orthant_grad_mean(&RealVector::zeros(2), &RealMatrix::identity(2, 2), 2, &opts, &mut rng),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    fn fd_opts() -> OrthantOptions {
        OrthantOptions {
            reorder: false,
            fixed_points: Some(1 << 14),
            ..OrthantOptions::default()
        }
    }

    #[test]
    fn grad_mean_matches_finite_difference() {
        let mut gen = RngStream::new(8, 0);
        for k in 3..=5 {
            let sigma = {
                let c = random_corr(k, &mut gen);
                let d: Vec<f64> = (0..k).map(|_| 0.5 + gen.uniform()).collect();
                RealMatrix::from_fn(k, k, |i, j| c[(i, j)] * (d[i] * d[j]).sqrt())
            };
            let j = k - 2;
            let h = 1e-4;
            let eval = |mu: &RealVector| {
                orthant_prob_with(mu, &sigma, &fd_opts(), &mut RngStream::new(99, 1)).unwrap().value
            };
            let mut plus = RealVector::zeros(k);
            plus[j] = h;
            let fd = (eval(&plus) - eval(&(-plus.clone()))) / (2.0 * h);
            let g = orthant_grad_mean(&RealVector::zeros(k), &sigma, j, &OrthantOptions::with_tol(1e-7), &mut gen).unwrap();
            assert!((g - fd).abs() < 1e-4, "k={k}: {g} vs {fd}");
        }
    }

    #[test]
    fn grad_corr_matches_finite_difference() {
        let mut gen = RngStream::new(9, 0);
        for k in [3, 4, 5] {
            let c = random_corr(k, &mut gen);
            let (r, s) = (0, k - 1);
            let h = 1e-4;
            let eval = |delta: f64| {
                let mut cc = c.clone();
                cc[(r, s)] += delta;
                cc[(s, r)] += delta;
                orthant_prob_with(&RealVector::zeros(k), &cc, &fd_opts(), &mut RngStream::new(5, 5)).unwrap().value
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let g = orthant_grad_corr(&c, r, s, &OrthantOptions::with_tol(1e-7), &mut gen).unwrap();
            assert!((g - fd).abs() < 1e-4, "k={k}: {g} vs {fd}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn monotone_in_each_mean(seed in 0u64..1000, j in 0usize..4, bump in 0.05f64..1.0) {
            let mut rng = RngStream::new(seed, 3);
            let c = random_corr(4, &mut rng);
            let mu = RealVector::from_fn(4, |_, _| 0.3 * rng.standard_normal());
            let mut hi = mu.clone();
            hi[j] += bump;
            let a = orthant_prob(&mu, &c, 1e-6, &mut rng).unwrap();
            let b = orthant_prob(&hi, &c, 1e-6, &mut rng).unwrap();
            prop_assert!(b.value >= a.value - 5e-6);
        }

        #[test]
        fn invariant_to_diagonal_scaling(seed in 0u64..1000) {
            let mut rng = RngStream::new(seed, 4);
            let c = random_corr(4, &mut rng);
            let d: Vec<f64> = (0..4).map(|_| 0.2 + 3.0 * rng.uniform()).collect();
            let scaled = RealMatrix::from_fn(4, 4, |i, j| d[i] * d[j] * c[(i, j)]);
            let a = orthant_prob(&RealVector::zeros(4), &c, 1e-7, &mut RngStream::new(seed, 5)).unwrap();
            let b = orthant_prob(&RealVector::zeros(4), &scaled, 1e-7, &mut RngStream::new(seed, 5)).unwrap();
            prop_assert!((a.value - b.value).abs() < 1e-6);
        }
    }
}
