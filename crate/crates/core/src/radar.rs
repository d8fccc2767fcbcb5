//! Colocated MIMO radar scenario: steering vectors, LFM waveform, noise
//! covariance models and the one-bit snapshot simulator.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky_psd, complex_to_composite, composite_mean, hermitian_asymmetry, is_hermitian_pd, ComplexMatrix,
    ComplexVector, CompositeCovariance, RealMatrix,
};
use crate::rng::RngStream;

/// Half-wavelength ULA steering vector, entry k = exp(iπ k sin φ) (0-based k).
pub fn ula_steering(phi: f64, count: usize) -> ComplexVector {
    let s = phi.sin();
    ComplexVector::from_fn(count, |k, _| Complex64::from_polar(1.0, PI * k as f64 * s))
}

/// Orthogonal LFM waveform S(k,l) = exp{(i/n)[2πl + πl² + k sin θ]}/√p, 0-based.
pub fn lfm_waveform(p: usize, n: usize, theta: f64) -> ComplexMatrix {
    let scale = 1.0 / (p as f64).sqrt();
    let nf = n as f64;
    let s = theta.sin();
    ComplexMatrix::from_fn(p, n, |k, l| {
        let l = l as f64;
        let phase = (2.0 * PI * l + PI * l * l + k as f64 * s) / nf;
        Complex64::from_polar(scale, phase)
    })
}

/// Everything the detector and the simulator need about one radar setup.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub phi: f64,
    pub theta: f64,
    pub s: ComplexMatrix,
    /// Target signature a_r(φ) a_t(φ)ᵀ S, m×n.
    pub w: ComplexMatrix,
    pub sigma_n: ComplexMatrix,
    pub composite: CompositeCovariance,
}

/// Builds the LFM scenario with target at angle `phi`.
pub fn make_scenario(
    m: usize,
    p: usize,
    n: usize,
    phi: f64,
    theta: f64,
    sigma_n: ComplexMatrix,
) -> Result<Scenario> {
    if p == 0 || n == 0 {
        return Err(Error::InvalidArgument("p and n must be at least 1".into()));
    }
    let s = lfm_waveform(p, n, theta);
    Scenario::from_waveform(m, phi, theta, s, sigma_n)
}

impl Scenario {
    /// Scenario with an arbitrary p×n waveform.
    pub fn from_waveform(
        m: usize,
        phi: f64,
        theta: f64,
        s: ComplexMatrix,
        sigma_n: ComplexMatrix,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("m must be at least 1".into()));
        }
        if sigma_n.nrows() != m || sigma_n.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "noise covariance is {}x{}, expected {m}x{m}",
                sigma_n.nrows(),
                sigma_n.ncols()
            )));
        }
        let (p, n) = s.shape();
        let a_r = ula_steering(phi, m);
        let a_t = ula_steering(phi, p);
        let w = &a_r * (a_t.transpose() * &s);
        let composite = complex_to_composite(&sigma_n)?;
        Ok(Self {
            m,
            p,
            n,
            phi,
            theta,
            s,
            w,
            sigma_n,
            composite,
        })
    }

    /// Same geometry and waveform with a different noise covariance.
    pub fn with_noise(&self, sigma_n: ComplexMatrix) -> Result<Self> {
        Self::from_waveform(self.m, self.phi, self.theta, self.s.clone(), sigma_n)
    }

    /// Column `i` of W as a slice-friendly vector.
    pub fn w_column(&self, i: usize) -> Vec<Complex64> {
        self.w.column(i).iter().copied().collect()
    }
}

/// α H Hᴴ + I with H entries i.i.d. CN(0, 1).
pub fn random_noise_cov(m: usize, alpha: f64, rng: &mut RngStream) -> ComplexMatrix {
    let h = ComplexMatrix::from_fn(m, m, |_, _| {
        Complex64::new(rng.standard_normal(), rng.standard_normal()) * std::f64::consts::FRAC_1_SQRT_2
    });
    let mut out = (&h * h.adjoint()) * Complex64::new(alpha, 0.0) + ComplexMatrix::identity(m, m);
    // exact Hermitian symmetry
    for i in 0..m {
        out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
        for j in i + 1..m {
            out[(j, i)] = out[(i, j)].conj();
        }
    }
    out
}

const MAX_REJECTIONS: usize = 100;

/// Σ_N + ΔΣ_N where the real and imaginary parts of every upper-triangle
/// entry of ΔΣ_N are i.i.d. N(0, ρ²), the lower triangle mirrors them and
/// the diagonal is untouched. Redrawn until the result is positive definite.
pub fn perturb_cov(sigma_n: &ComplexMatrix, rho: f64, rng: &mut RngStream) -> Result<ComplexMatrix> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be nonnegative, got {rho}")));
    }
    let asym = hermitian_asymmetry(sigma_n);
    if asym > 1e-10 {
        return Err(Error::NotHermitian { asymmetry: asym });
    }
    if rho == 0.0 {
        return Ok(sigma_n.clone());
    }
    let m = sigma_n.nrows();
    for _ in 0..MAX_REJECTIONS {
        let mut out = sigma_n.clone();
        for i in 0..m {
            for j in i + 1..m {
                let d = Complex64::new(rho * rng.standard_normal(), rho * rng.standard_normal());
                out[(i, j)] += d;
                out[(j, i)] = out[(i, j)].conj();
            }
        }
        if is_hermitian_pd(&out) {
            return Ok(out);
        }
    }
    Err(Error::PerturbationRejected {
        attempts: MAX_REJECTIONS,
    })
}

/// 10 log₁₀(p|β|² / tr Σ_N).
pub fn snr_db(beta: Complex64, p: usize, sigma_n: &ComplexMatrix) -> f64 {
    10.0 * (p as f64 * beta.norm_sqr() / sigma_n.trace().re).log10()
}

/// Amplitude with the requested SNR and unit-modulus phase `exp(i·phase)`.
pub fn beta_for_snr(snr_db: f64, p: usize, sigma_n: &ComplexMatrix, phase: f64) -> Complex64 {
    let mag = (10f64.powf(snr_db / 10.0) * sigma_n.trace().re / p as f64).sqrt();
    Complex64::from_polar(mag, phase)
}

/// Complex one-bit quantizer sign(Re z) + i sign(Im z), with sign(0) = +1.
#[inline]
pub fn quantize(z: Complex64) -> Complex64 {
    let s = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    Complex64::new(s(z.re), s(z.im))
}

/// One-bit snapshots, stored as sign-pattern indices.
///
/// Snapshot i's composite sign vector is `[sign Re y_i; sign Im y_i]`; its
/// index reads that vector as a binary number with +1 ↦ 1, −1 ↦ 0 and the
/// first element most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedData {
    m: usize,
    patterns: Vec<u32>,
}

impl QuantizedData {
    pub fn from_patterns(m: usize, patterns: Vec<u32>) -> Result<Self> {
        let kappa = 1u64 << (2 * m);
        if patterns.iter().any(|&p| p as u64 >= kappa) {
            return Err(Error::UnknownPattern);
        }
        Ok(Self { m, patterns })
    }

    /// From an m×n matrix with entries in {±1 ± i}.
    pub fn from_complex(y: &ComplexMatrix) -> Result<Self> {
        let (m, n) = y.shape();
        let mut patterns = Vec::with_capacity(n);
        for i in 0..n {
            let mut idx = 0u32;
            for part in 0..2 {
                for k in 0..m {
                    let z = y[(k, i)];
                    let v = if part == 0 { z.re } else { z.im };
                    let bit = if v == 1.0 {
                        1
                    } else if v == -1.0 {
                        0
                    } else {
                        return Err(Error::InvalidArgument(format!(
                            "quantized entry ({k}, {i}) = {z} is not ±1 ± i"
                        )));
                    };
                    idx = (idx << 1) | bit;
                }
            }
            patterns.push(idx);
        }
        Ok(Self { m, patterns })
    }

    /// Composite sign vectors given directly (each of length 2m, entries ±1).
    pub fn from_sign_vectors(m: usize, signs: &[Vec<f64>]) -> Result<Self> {
        let mut patterns = Vec::with_capacity(signs.len());
        for s in signs {
            if s.len() != 2 * m {
                return Err(Error::DimensionMismatch(format!(
                    "sign vector has {} entries, expected {}",
                    s.len(),
                    2 * m
                )));
            }
            patterns.push(sign_vector_index(s)?);
        }
        Ok(Self { m, patterns })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.patterns.len()
    }

    pub fn patterns(&self) -> &[u32] {
        &self.patterns
    }

    /// Composite sign vector of snapshot `i`.
    pub fn signs(&self, i: usize) -> Vec<f64> {
        let k = 2 * self.m;
        let idx = self.patterns[i];
        (0..k)
            .map(|e| if idx >> (k - 1 - e) & 1 == 1 { 1.0 } else { -1.0 })
            .collect()
    }

    /// The complex m×n matrix Y.
    pub fn y(&self) -> ComplexMatrix {
        let m = self.m;
        ComplexMatrix::from_fn(m, self.n(), |k, i| {
            let s = self.signs(i);
            Complex64::new(s[k], s[k + m])
        })
    }
}

/// Index of a ±1 sign vector (first element most significant).
pub fn sign_vector_index(s: &[f64]) -> Result<u32> {
    let mut idx = 0u32;
    for &v in s {
        let bit = if v == 1.0 {
            1
        } else if v == -1.0 {
            0
        } else {
            return Err(Error::InvalidArgument(format!("sign entry {v} is not ±1")));
        };
        idx = (idx << 1) | bit;
    }
    Ok(idx)
}

/// Draws one-bit snapshots for a fixed (W, β, Σ_N) quickly: the composite
/// Cholesky factor and the per-column means are computed once.
#[derive(Clone, Debug)]
pub struct SnapshotSampler {
    m: usize,
    chol: RealMatrix,
    means: Vec<Vec<f64>>,
}

impl SnapshotSampler {
    /// Snapshots whose column i has mean β·W(:, i mod n) and noise CN(0, Σ_N).
    pub fn new(w: &ComplexMatrix, beta: Complex64, sigma_n: &ComplexMatrix) -> Result<Self> {
        let cov = complex_to_composite(sigma_n)?;
        if cov.m() != w.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "W has {} rows, noise covariance is {}x{}",
                w.nrows(),
                cov.m(),
                cov.m()
            )));
        }
        let chol = cholesky_psd(&cov.sigma)?;
        let means = (0..w.ncols())
            .map(|i| {
                let col: Vec<Complex64> = w.column(i).iter().copied().collect();
                composite_mean(&col, beta).iter().copied().collect()
            })
            .collect();
        Ok(Self {
            m: w.nrows(),
            chol,
            means,
        })
    }

    pub fn for_scenario(scenario: &Scenario, beta: Complex64) -> Result<Self> {
        Self::new(&scenario.w, beta, &scenario.sigma_n)
    }

    /// Pattern indices of `n_snapshots` snapshots, reusing W's columns
    /// cyclically when `n_snapshots` exceeds n.
    pub fn sample_patterns(&self, rng: &mut RngStream, n_snapshots: usize, out: &mut Vec<u32>) {
        out.clear();
        let k = 2 * self.m;
        let mut z = [0.0f64; 12];
        for i in 0..n_snapshots {
            let mean = &self.means[i % self.means.len()];
            for zj in z.iter_mut().take(k) {
                *zj = rng.standard_normal();
            }
            let mut idx = 0u32;
            for r in 0..k {
                let mut x = mean[r];
                for c in 0..=r {
                    x += self.chol[(r, c)] * z[c];
                }
                idx = (idx << 1) | (x >= 0.0) as u32;
            }
            out.push(idx);
        }
    }

    pub fn sample(&self, rng: &mut RngStream, n_snapshots: usize) -> QuantizedData {
        let mut patterns = Vec::with_capacity(n_snapshots);
        self.sample_patterns(rng, n_snapshots, &mut patterns);
        QuantizedData {
            m: self.m,
            patterns,
        }
    }
}

/// Y = Q(βW + N), N columns i.i.d. CN(0, Σ_N).
pub fn simulate_quantized(
    scenario: &Scenario,
    beta: Complex64,
    rng: &mut RngStream,
    n_snapshots: usize,
) -> Result<QuantizedData> {
    Ok(SnapshotSampler::for_scenario(scenario, beta)?.sample(rng, n_snapshots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn steering_examples() {
        assert!(ula_steering(0.0, 4).iter().all(|&z| z == c(1.0, 0.0)));
        let v = ula_steering(PI / 2.0, 2);
        assert_abs_diff_eq!(v[0].re, 1.0);
        assert_abs_diff_eq!(v[1].re, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1].im, 0.0, epsilon = 1e-15);
        assert!(ula_steering(0.37, 7).iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn waveform_examples() {
        let s = lfm_waveform(2, 4, PI / 4.0);
        assert_abs_diff_eq!(s[(0, 0)].re, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert!(s.iter().all(|z| (z.norm() - 1.0 / 2f64.sqrt()).abs() < 1e-15));
        let angle = (4.0 * PI + 4.0 * PI + (PI / 4.0).sin()) / 4.0;
        let expect = c(angle.cos(), angle.sin()) / 2f64.sqrt();
        assert_abs_diff_eq!((s[(1, 2)] - expect).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn target_matrix_is_rank_one_outer_product() {
        let sc = make_scenario(2, 2, 4, PI / 4.0, PI / 4.0, ComplexMatrix::identity(2, 2)).unwrap();
        let a_r = ula_steering(PI / 4.0, 2);
        let a_t = ula_steering(PI / 4.0, 2);
        let w11 = (a_t.transpose() * sc.s.column(0))[(0, 0)] * a_r[0];
        assert_abs_diff_eq!((sc.w[(0, 0)] - w11).norm(), 0.0, epsilon = 1e-14);
        let sv = sc.w.clone().svd(false, false).singular_values;
        assert!(sv[1] < 1e-12 * sv[0]);
        let flat = make_scenario(3, 4, 4, 0.0, 0.3, ComplexMatrix::identity(3, 3)).unwrap();
        let id = Scenario::from_waveform(3, 0.0, 0.3, ComplexMatrix::identity(4, 4), ComplexMatrix::identity(3, 3)).unwrap();
        for i in 0..4 {
            assert_eq!(id.w[(0, i)], id.w[(2, i)]);
        }
        assert_eq!(flat.w.shape(), (3, 4));
        assert!(make_scenario(2, 2, 4, 0.0, 0.0, ComplexMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn noise_cov_examples() {
        let mut rng = RngStream::new(1, 0);
        assert_eq!(random_noise_cov(3, 0.0, &mut rng), ComplexMatrix::identity(3, 3));
        let s = random_noise_cov(3, 2.0, &mut rng);
        let ev = s.clone().symmetric_eigenvalues();
        assert!(ev.iter().all(|&e| e >= 1.0 - 1e-12));
        // E tr = m(1 + αm)
        let (m, alpha, n) = (3usize, 1.0, 10_000);
        let traces: Vec<f64> = (0..n).map(|_| random_noise_cov(m, alpha, &mut rng).trace().re).collect();
        let mean = traces.iter().sum::<f64>() / n as f64;
        let var = traces.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expect = m as f64 * (1.0 + alpha * m as f64);
        assert!((mean - expect).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {expect}");
    }

    #[test]
    fn perturbation_law() {
        let mut rng = RngStream::new(2, 0);
        let base = random_noise_cov(3, 1.0, &mut rng);
        assert_eq!(perturb_cov(&base, 0.0, &mut rng).unwrap(), base);
        let rho = 0.1;
        let n = 10_000;
        let free = 3 * 3 - 3;
        let mut sq = Vec::with_capacity(n);
        for _ in 0..n {
            let p = perturb_cov(&base, rho, &mut rng).unwrap();
            assert!(hermitian_asymmetry(&p) == 0.0);
            assert!(is_hermitian_pd(&p));
            for i in 0..3 {
                assert_eq!(p[(i, i)], base[(i, i)]);
            }
            // squared norm of the free real parameters
            sq.push((&p - &base).norm_squared() / 2.0);
        }
        let mean = sq.iter().sum::<f64>() / n as f64;
        let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expect = rho * rho * free as f64;
        assert!((mean - expect).abs() < 3.0 * (var / n as f64).sqrt(), "{mean} vs {expect}");
    }

    #[test]
    fn perturbation_gives_up_when_rho_is_huge() {
        let mut rng = RngStream::new(3, 0);
        let err = perturb_cov(&ComplexMatrix::identity(4, 4), 1e6, &mut rng).unwrap_err();
        assert!(matches!(err, Error::PerturbationRejected { attempts: 100 }));
    }

    #[test]
    fn snr_examples() {
        assert_abs_diff_eq!(snr_db(c(1.0, 0.0), 4, &ComplexMatrix::identity(4, 4)), 0.0, epsilon = 1e-12);
        let s = ComplexMatrix::identity(4, 4) * c(2.0, 0.0);
        let b = beta_for_snr(-10.0, 4, &s, 0.7);
        assert_abs_diff_eq!(b.norm_sqr(), 0.2, epsilon = 1e-12);
        let beta = c(0.3, -1.1);
        let back = beta_for_snr(snr_db(beta, 4, &s), 4, &s, beta.arg());
        assert_abs_diff_eq!(back.norm(), beta.norm(), epsilon = 1e-12);
    }

    #[test]
    fn quantizer_examples() {
        assert_eq!(quantize(c(1.2, -0.3)), c(1.0, -1.0));
        assert_eq!(quantize(c(-0.5, 2.0)), c(-1.0, 1.0));
        assert_eq!(quantize(c(0.0, 0.0)), c(1.0, 1.0));
        // invariance to positive scaling
        for z in [c(0.3, -2.0), c(-1e-8, 5.0)] {
            assert_eq!(quantize(z), quantize(z * 7.5));
        }
    }

    #[test]
    fn pattern_round_trip() {
        let y = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, -1.0), c(-1.0, -1.0), c(-1.0, 1.0), c(1.0, 1.0)]);
        let q = QuantizedData::from_complex(&y).unwrap();
        // snapshot 0: [Re; Im] = [1, -1, -1, 1] -> 1001b
        assert_eq!(q.patterns()[0], 0b1001);
        assert_eq!(q.signs(0), vec![1.0, -1.0, -1.0, 1.0]);
        assert_eq!(q.y(), y);
        assert!(QuantizedData::from_complex(&ComplexMatrix::from_element(1, 1, c(0.5, 1.0))).is_err());
    }

    #[test]
    fn white_noise_signs_are_fair_and_independent() {
        let sc = make_scenario(2, 2, 50, 0.3, 0.3, ComplexMatrix::identity(2, 2)).unwrap();
        let mut rng = RngStream::new(4, 0);
        let n = 100_000;
        let q = simulate_quantized(&sc, c(0.0, 0.0), &mut rng, n).unwrap();
        let signs: Vec<Vec<f64>> = (0..n).map(|i| q.signs(i)).collect();
        let bound = 3.0 / (n as f64).sqrt();
        for a in 0..4 {
            let pos = signs.iter().filter(|s| s[a] > 0.0).count() as f64 / n as f64;
            assert!((pos - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
            for b in a + 1..4 {
                let r = signs.iter().map(|s| s[a] * s[b]).sum::<f64>() / n as f64;
                assert!(r.abs() <= bound, "({a},{b}) {r}");
            }
        }
    }

    #[test]
    fn colored_noise_follows_arcsine_law() {
        let mut rng = RngStream::new(5, 0);
        let sigma = random_noise_cov(2, 1.0, &mut rng);
        let sc = make_scenario(2, 2, 10, 0.3, 0.3, sigma).unwrap();
        let n = 100_000;
        let q = simulate_quantized(&sc, c(0.0, 0.0), &mut rng, n).unwrap();
        let bound = 3.0 / (n as f64).sqrt();
        for a in 0..4 {
            for b in a + 1..4 {
                let r = (0..n).map(|i| {
                    let s = q.signs(i);
                    s[a] * s[b]
                }).sum::<f64>() / n as f64;
                let expect = 2.0 / PI * sc.composite.c[(a, b)].asin();
                assert!((r - expect).abs() <= bound, "({a},{b}) {r} vs {expect}");
            }
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let sc = make_scenario(2, 2, 20, 0.3, 0.3, ComplexMatrix::identity(2, 2)).unwrap();
        let a = simulate_quantized(&sc, c(0.2, 0.1), &mut RngStream::new(9, 1), 20).unwrap();
        let b = simulate_quantized(&sc, c(0.2, 0.1), &mut RngStream::new(9, 1), 20).unwrap();
        assert_eq!(a, b);
    }
}
