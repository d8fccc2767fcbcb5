//! False-alarm probability averaged over a prior on the true noise covariance.

use rayon::prelude::*;

use crate::detector::{orbits, reflect, tau_of, DetectorTables};
use crate::error::{Error, Result};
use crate::linalg::{complex_to_composite, ComplexMatrix, RealMatrix};
use crate::orthant::{orthant_grad_corr_all, OrthantOptions};
use crate::radar::perturb_cov;
use crate::rng::RngStream;

use super::mismatch::{column_energy, mismatched_orthants};

/// Source of true noise covariances Σ′_N.
pub trait CovariancePrior: Sync {
    fn draw(&self, rng: &mut RngStream) -> Result<ComplexMatrix>;
}

/// Σ′_N = Σ_N + ΔΣ_N with i.i.d. N(0, ρ²) off-diagonal real and imaginary parts.
#[derive(Clone, Debug)]
pub struct PerturbationPrior {
    pub sigma_n: ComplexMatrix,
    pub rho: f64,
}

impl CovariancePrior for PerturbationPrior {
    fn draw(&self, rng: &mut RngStream) -> Result<ComplexMatrix> {
        perturb_cov(&self.sigma_n, self.rho, rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AvgPfaMode {
    /// O′_j evaluated for every draw.
    Direct,
    /// O′_j from a first-order expansion in the correlation coefficients.
    Taylor,
}

/// υ₁,ᵢ² for K prior draws.
#[derive(Clone, Debug)]
pub struct PriorNullDraws {
    pub upsilon_sq: f64,
    pub upsilon1_sq: Vec<f64>,
}

impl PriorNullDraws {
    /// (1/K) Σ_i exp(−υ²γ / (2υ₁,ᵢ²)).
    pub fn pfa(&self, gamma: f64) -> f64 {
        let k = self.upsilon1_sq.len() as f64;
        self.upsilon1_sq
            .iter()
            .map(|&v| (-self.upsilon_sq * gamma / (2.0 * v)).exp().min(1.0))
            .sum::<f64>()
            / k
    }
}

/// Per orbit: Σ_{j∈orbit} s_j / O_j² and, for the Taylor mode, the
/// correlation gradient at the representative with Γ_j signs folded in.
struct OrbitWeights {
    weight: Vec<f64>,
    reps: Vec<usize>,
}

fn orbit_weights(tables: &DetectorTables) -> Result<OrbitWeights> {
    let s = column_energy(&tables.delta1);
    let o = &tables.noise.o;
    let orbs = orbits(tables.m())?;
    let weight = orbs
        .iter()
        .map(|orb| orb.members.iter().map(|&j| s[j] / (o[j] * o[j])).sum())
        .collect();
    Ok(OrbitWeights {
        weight,
        reps: orbs.iter().map(|orb| orb.representative()).collect(),
    })
}

/// h_j(r,s) = τ_r τ_s ∂P(0, C_j)/∂C(r,s), so ΔO_j ≈ h_j · vech(C′ − C).
fn taylor_gradients(c: &RealMatrix, reps: &[usize], opts: &OrthantOptions, rng: &RngStream) -> Result<Vec<Vec<f64>>> {
    let k = c.nrows();
    reps.par_iter()
        .enumerate()
        .map(|(id, &j)| {
            let tau = tau_of(j, k);
            let cj = reflect(c, &tau);
            let g = orthant_grad_corr_all(&cj, opts, &mut rng.derive(id as u64))?;
            let mut idx = 0;
            let mut h = g;
            for r in 0..k {
                for s in r + 1..k {
                    h[idx] *= tau[r] * tau[s];
                    idx += 1;
                }
            }
            Ok(h)
        })
        .collect()
}

fn vech_diff(a: &RealMatrix, b: &RealMatrix) -> Vec<f64> {
    let k = a.nrows();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for r in 0..k {
        for s in r + 1..k {
            out.push(a[(r, s)] - b[(r, s)]);
        }
    }
    out
}

/// Draws K covariances from the prior and evaluates υ₁,ᵢ² for each.
/// Draw i uses stream `rng.derive(i)`, so both modes see the same Σ′ sequence.
pub fn prior_null_draws(
    tables: &DetectorTables,
    prior: &dyn CovariancePrior,
    k_draws: usize,
    mode: AvgPfaMode,
    opts: &OrthantOptions,
    rng: &RngStream,
) -> Result<PriorNullDraws> {
    if k_draws == 0 {
        return Err(Error::InvalidArgument("need at least one prior draw".into()));
    }
    let w = orbit_weights(tables)?;
    let c = &tables.noise.c;
    let o_rep: Vec<f64> = w.reps.iter().map(|&j| tables.noise.o[j]).collect();
    let grads = match mode {
        AvgPfaMode::Taylor => Some(taylor_gradients(c, &w.reps, opts, &rng.derive(u64::MAX))?),
        AvgPfaMode::Direct => None,
    };
    let upsilon1_sq: Vec<f64> = (0..k_draws)
        .into_par_iter()
        .map(|i| {
            let base = rng.derive(i as u64);
            let sigma = prior.draw(&mut base.derive(0))?;
            let cp = complex_to_composite(&sigma)?.c;
            if cp.nrows() != c.nrows() {
                return Err(Error::DimensionMismatch("prior draw has the wrong size".into()));
            }
            let v = match &grads {
                None => {
                    let o = mismatched_orthants(&cp, opts, &base.derive(1))?;
                    w.reps.iter().zip(&w.weight).map(|(&j, wt)| wt * o[j]).sum::<f64>()
                }
                Some(h) => {
                    let dc = vech_diff(&cp, c);
                    let delta: f64 = h
                        .iter()
                        .zip(&w.weight)
                        .map(|(hj, wt)| wt * hj.iter().zip(&dc).map(|(a, b)| a * b).sum::<f64>())
                        .sum();
                    let base_v: f64 = w.weight.iter().zip(&o_rep).map(|(wt, o)| wt * o).sum();
                    base_v + delta
                }
            };
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "prior draw {i} gives a nonpositive score variance {v}"
                )));
            }
            Ok(v)
        })
        .collect::<Result<_>>()?;
    Ok(PriorNullDraws {
        upsilon_sq: tables.upsilon_sq,
        upsilon1_sq,
    })
}

/// Prior-averaged false-alarm probability at threshold γ.
pub fn avg_pfa(
    gamma: f64,
    tables: &DetectorTables,
    prior: &dyn CovariancePrior,
    k_draws: usize,
    mode: AvgPfaMode,
    opts: &OrthantOptions,
    rng: &RngStream,
) -> Result<f64> {
    Ok(prior_null_draws(tables, prior, k_draws, mode, opts, rng)?.pfa(gamma))
}
