//! Small dense linear algebra: the complex → real composite embedding,
//! coherence normalization, PSD Cholesky and Gaussian sampling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;
pub type RealMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;

const HERMITIAN_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Real 2m×2m covariance of `[Re x; Im x]` together with its diagonal and
/// coherence matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeCovariance {
    pub sigma: RealMatrix,
    pub d: RealVector,
    pub c: RealMatrix,
}

impl CompositeCovariance {
    /// Wraps a real symmetric PSD covariance with positive diagonal.
    pub fn from_real(sigma: RealMatrix) -> Result<Self> {
        check_symmetric(&sigma)?;
        check_psd(&sigma)?;
        let d = sigma.diagonal();
        if d.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidArgument(
                "covariance diagonal must be strictly positive".into(),
            ));
        }
        let c = coherence(&sigma)?;
        Ok(Self { sigma, d, c })
    }

    /// Rebuilds `sigma = D^{1/2} C D^{1/2}` from a coherence matrix and variances.
    pub fn from_coherence(c: RealMatrix, d: RealVector) -> Result<Self> {
        if c.nrows() != c.ncols() || c.nrows() != d.len() {
            return Err(Error::DimensionMismatch(format!(
                "coherence is {}x{}, diagonal has {} entries",
                c.nrows(),
                c.ncols(),
                d.len()
            )));
        }
        if d.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidArgument(
                "variances must be strictly positive".into(),
            ));
        }
        let s = d.map(f64::sqrt);
        let sigma = RealMatrix::from_fn(c.nrows(), c.ncols(), |i, j| c[(i, j)] * s[i] * s[j]);
        Self::from_real(sigma)
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Number of complex channels m (half the composite dimension).
    pub fn m(&self) -> usize {
        self.d.len() / 2
    }
}

/// Largest |A(i,j) − conj A(j,i)|.
pub fn hermitian_asymmetry(a: &ComplexMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_symmetric(a: &RealMatrix) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i + 1..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if worst > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry: worst });
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix (symmetrized first).
pub fn min_eigenvalue(a: &RealMatrix) -> f64 {
    if a.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

fn check_psd(a: &RealMatrix) -> Result<()> {
    let lo = min_eigenvalue(a);
    if lo < -PSD_TOL {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lo });
    }
    Ok(())
}

/// Σ_x = ½ [[Re Σ, −Im Σ], [Im Σ, Re Σ]] for a circular complex covariance.
pub fn complex_to_composite(sigma_n: &ComplexMatrix) -> Result<CompositeCovariance> {
    let m = sigma_n.nrows();
    if sigma_n.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "noise covariance must be square, got {}x{}",
            m,
            sigma_n.ncols()
        )));
    }
    let asym = hermitian_asymmetry(sigma_n);
    if asym > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    let mut sigma = RealMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in 0..m {
            let z = sigma_n[(i, j)];
            sigma[(i, j)] = 0.5 * z.re;
            sigma[(i + m, j + m)] = 0.5 * z.re;
            sigma[(i, j + m)] = -0.5 * z.im;
            sigma[(i + m, j)] = 0.5 * z.im;
        }
    }
    // exact symmetrization removes rounding-level asymmetry from the input
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    CompositeCovariance::from_real(sigma)
}

/// Mean of the composite snapshot: [a u − b v; a v + b u] for β = a + ib, w = u + iv.
pub fn composite_mean(w: &[Complex64], beta: Complex64) -> RealVector {
    let m = w.len();
    let mut out = RealVector::zeros(2 * m);
    for (k, z) in w.iter().enumerate() {
        let prod = beta * z;
        out[k] = prod.re;
        out[k + m] = prod.im;
    }
    out
}

/// C = D^{-1/2} Σ D^{-1/2}.
pub fn coherence(sigma: &RealMatrix) -> Result<RealMatrix> {
    let k = sigma.nrows();
    let d = sigma.diagonal();
    if d.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument(
            "coherence needs a strictly positive diagonal".into(),
        ));
    }
    let s = d.map(|v| 1.0 / v.sqrt());
    let mut c = RealMatrix::from_fn(k, k, |i, j| sigma[(i, j)] * s[i] * s[j]);
    for i in 0..k {
        c[(i, i)] = 1.0;
    }
    Ok(c)
}

/// Applies T₁[x; y] = [y; −x] to a composite vector.
pub fn rotate_t1(v: &[f64]) -> Vec<f64> {
    let m = v.len() / 2;
    let mut out = vec![0.0; v.len()];
    for k in 0..m {
        out[k] = v[k + m];
        out[k + m] = -v[k];
    }
    out
}

/// Largest deviation from T₁ᵀ C T₁ = C, the structure every circular
/// complex covariance has in composite form.
pub fn circular_defect(c: &RealMatrix) -> f64 {
    let k = c.nrows();
    let m = k / 2;
    // (T₁ᵀ C T₁)(i,j) = s_i s_j C(π(i), π(j)) with π swapping halves, s = −1 on the upper half
    let perm = |i: usize| if i < m { i + m } else { i - m };
    let sgn = |i: usize| if i < m { -1.0 } else { 1.0 };
    let mut worst = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            let t = sgn(i) * sgn(j) * c[(perm(i), perm(j))];
            worst = worst.max((t - c[(i, j)]).abs());
        }
    }
    worst
}

/// Positive definiteness of a Hermitian matrix, tested on its real embedding
/// [Re −Im; Im Re] (complex Cholesky in nalgebra does not reject negative pivots).
pub fn is_hermitian_pd(a: &ComplexMatrix) -> bool {
    let m = a.nrows();
    let r = RealMatrix::from_fn(2 * m, 2 * m, |i, j| {
        let z = a[(i % m, j % m)];
        match (i < m, j < m) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    r.cholesky().is_some()
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &RealMatrix) -> Result<RealMatrix> {
    a.clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .ok_or(Error::NotPositiveDefinite)
}

fn plain_cholesky(a: &RealMatrix) -> Option<RealMatrix> {
    let k = a.nrows();
    let mut l = RealMatrix::zeros(k, k);
    for j in 0..k {
        let mut s = a[(j, j)];
        for p in 0..j {
            s -= l[(j, p)] * l[(j, p)];
        }
        if !(s > 0.0) {
            return None;
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..k {
            let mut t = a[(i, j)];
            for p in 0..j {
                t -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = t / ljj;
        }
    }
    Some(l)
}

/// Cholesky with zeroed columns for vanishing pivots; fails only on a
/// clearly negative pivot.
fn semidefinite_cholesky(a: &RealMatrix) -> Result<RealMatrix> {
    let k = a.nrows();
    let scale = a.diagonal().iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let tiny = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut l = RealMatrix::zeros(k, k);
    for j in 0..k {
        let mut s = a[(j, j)];
        for p in 0..j {
            s -= l[(j, p)] * l[(j, p)];
        }
        if s <= tiny {
            if s < -PSD_TOL.max(1e-8 * scale) {
                return Err(Error::NotPositiveSemidefinite { min_eigenvalue: s });
            }
            continue;
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..k {
            let mut t = a[(i, j)];
            for p in 0..j {
                t -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = t / ljj;
        }
    }
    Ok(l)
}

/// Lower Cholesky factor of a PSD matrix.
///
/// Tries a plain factorization, then one with 1e-12·trace/k added to the
/// diagonal, then a pivot-dropping semidefinite factorization.
pub fn cholesky_psd(a: &RealMatrix) -> Result<RealMatrix> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if let Some(l) = plain_cholesky(a) {
        return Ok(l);
    }
    let k = a.nrows();
    let jitter = 1e-12 * a.trace() / k as f64;
    if jitter > 0.0 {
        let mut b = a.clone();
        for i in 0..k {
            b[(i, i)] += jitter;
        }
        if let Some(l) = plain_cholesky(&b) {
            return Ok(l);
        }
    }
    semidefinite_cholesky(a)
}

/// Repeated draws from one N(μ, Σ).
#[derive(Clone, Debug)]
pub struct MvnSampler {
    mu: RealVector,
    chol: RealMatrix,
}

impl MvnSampler {
    pub fn new(mu: RealVector, sigma: &RealMatrix) -> Result<Self> {
        if mu.len() != sigma.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "mean has {} entries, covariance is {}x{}",
                mu.len(),
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let chol = cholesky_psd(sigma)?;
        Ok(Self { mu, chol })
    }

    pub fn chol(&self) -> &RealMatrix {
        &self.chol
    }

    pub fn sample_into(&self, rng: &mut RngStream, z: &mut [f64], out: &mut [f64]) {
        let k = self.mu.len();
        for zi in z.iter_mut().take(k) {
            *zi = rng.standard_normal();
        }
        for i in 0..k {
            let mut acc = self.mu[i];
            for p in 0..=i {
                acc += self.chol[(i, p)] * z[p];
            }
            out[i] = acc;
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> RealVector {
        let k = self.mu.len();
        let mut z = vec![0.0; k];
        let mut out = vec![0.0; k];
        self.sample_into(rng, &mut z, &mut out);
        RealVector::from_vec(out)
    }
}

/// One draw from N(μ, Σ).
pub fn mvn_sample(mu: &RealVector, sigma: &RealMatrix, rng: &mut RngStream) -> Result<RealVector> {
    Ok(MvnSampler::new(mu.clone(), sigma)?.sample(rng))
}
