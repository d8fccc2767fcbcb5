//! Distribution of Σ λ_l χ²₁(δ_l²) by characteristic-function inversion.
//!
//! Pr{Q > x} = ½ + (1/π) ∫₀^∞ sin θ(u) / (u ρ(u)) du with
//! θ(u) = ½ Σ [atan(λu) + δ²λu/(1+λ²u²)] − xu/2 and
//! ρ(u) = Π (1+λ²u²)^{1/4} exp(½ Σ δ²λ²u²/(1+λ²u²)).

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// 64-point Gauss–Legendre nodes on [0,1] (positive half) and weights.
fn gl64() -> &'static ([f64; 32], [f64; 32]) {
    use std::sync::OnceLock;
    static RULE: OnceLock<([f64; 32], [f64; 32])> = OnceLock::new();
    RULE.get_or_init(|| {
        // Newton iteration on P₆₄ from Chebyshev-like starting points.
        let n = 64;
        let mut x = [0.0; 32];
        let mut w = [0.0; 32];
        for i in 0..32 {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = z;
            w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        }
        (x, w)
    })
}

struct Integrand<'a> {
    lambda: &'a [f64],
    nc: &'a [f64],
    x: f64,
}

impl Integrand<'_> {
    fn theta(&self, u: f64) -> f64 {
        let mut t = 0.0;
        for (&l, &d) in self.lambda.iter().zip(self.nc) {
            let lu = l * u;
            t += (lu).atan() + d * lu / (1.0 + lu * lu);
        }
        0.5 * t - 0.5 * self.x * u
    }

    fn dtheta(&self, u: f64) -> f64 {
        let mut t = 0.0;
        for (&l, &d) in self.lambda.iter().zip(self.nc) {
            let q = 1.0 + l * l * u * u;
            t += l / q + d * l * (1.0 - l * l * u * u) / (q * q);
        }
        0.5 * t - 0.5 * self.x
    }

    /// 1 / (u ρ(u)), without the u for the amplitude at u = 0.
    fn inv_rho(&self, u: f64) -> f64 {
        let mut log_rho = 0.0;
        for (&l, &d) in self.lambda.iter().zip(self.nc) {
            let q = l * l * u * u;
            log_rho += 0.25 * q.ln_1p() + 0.5 * d * q / (1.0 + q);
        }
        (-log_rho).exp()
    }

    fn eval(&self, u: f64) -> f64 {
        if u == 0.0 {
            return self.dtheta(0.0);
        }
        self.theta(u).sin() * self.inv_rho(u) / u
    }

    fn amplitude(&self, u: f64) -> f64 {
        self.inv_rho(u) / u
    }

    /// Leading term of ∫_U^∞ by parts: cos θ(U) · amplitude(U) / θ′(U).
    fn tail(&self, u: f64) -> f64 {
        let dt = self.dtheta(u);
        if dt == 0.0 {
            return 0.0;
        }
        self.theta(u).cos() * self.amplitude(u) / dt
    }

    fn panel(&self, a: f64, b: f64) -> f64 {
        let (xs, ws) = gl64();
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (&x, &w) in xs.iter().zip(ws) {
            s += w * (self.eval(mid - half * x) + self.eval(mid + half * x));
        }
        s * half
    }
}

const MAX_UPPER: f64 = 1e9;

/// Pr{Σ λ_l χ²₁(nc_l) ≤ x} for positive weights and nonnegative noncentralities.
pub fn imhof_cdf(lambda: &[f64], noncentrality: &[f64], x: f64) -> Result<f64> {
    if lambda.len() != noncentrality.len() || lambda.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights and {} noncentralities",
            lambda.len(),
            noncentrality.len()
        )));
    }
    if lambda.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument("weights must be positive and finite".into()));
    }
    if noncentrality.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
        return Err(Error::InvalidArgument("noncentralities must be nonnegative and finite".into()));
    }
    if x.is_nan() {
        return Err(Error::InvalidArgument("x is NaN".into()));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(1.0);
    }
    let f = Integrand {
        lambda,
        nc: noncentrality,
        x,
    };
    let lmax = lambda.iter().cloned().fold(0.0, f64::max);
    let rate: f64 = 0.5 * lambda.iter().zip(noncentrality).map(|(l, d)| l * (1.0 + d)).sum::<f64>() + 0.5 * x + lmax;
    // each panel spans about four oscillations
    let width = 8.0 * PI / rate;

    // first upper limit: where the amplitude bound falls below 1e-4
    let mut upper = width;
    while f.amplitude(upper) > 1e-4 && upper < MAX_UPPER {
        upper *= 2.0;
    }
    let mut acc = 0.0;
    let mut lo = 0.0;
    let integrate_to = |lo: &mut f64, hi: f64, acc: &mut f64| {
        let panels = ((hi - *lo) / width).ceil().max(1.0) as usize;
        let h = (hi - *lo) / panels as f64;
        for p in 0..panels {
            let a = *lo + p as f64 * h;
            *acc += f.panel(a, a + h);
        }
        *lo = hi;
    };
    integrate_to(&mut lo, upper, &mut acc);
    let mut prev = acc + f.tail(upper);
    loop {
        let next_upper = 2.0 * upper;
        if next_upper > MAX_UPPER {
            return Err(Error::QuadratureNotConverged(format!(
                "Imhof integral at x = {x} did not settle before u = {MAX_UPPER:e}"
            )));
        }
        integrate_to(&mut lo, next_upper, &mut acc);
        let cur = acc + f.tail(next_upper);
        upper = next_upper;
        if (cur - prev).abs() / PI < 1e-9 && f.amplitude(upper) < 1e-4 {
            let sf = 0.5 + cur / PI;
            return Ok((1.0 - sf).clamp(0.0, 1.0));
        }
        prev = cur;
    }
}

/// Upper tail of the noncentral χ²₂(δ²) law at x.
pub fn noncentral_chi2_2_sf(x: f64, delta_sq: f64) -> Result<f64> {
    Ok(1.0 - imhof_cdf(&[1.0, 1.0], &[delta_sq, 0.0], x)?)
}
