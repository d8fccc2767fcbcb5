//! Parallel trial loops and empirical probability bookkeeping.
//!
//! Trial t always draws from `rng.derive(t)`, so results do not depend on
//! the number of worker threads or on scheduling.

use onebit_core::detector::DetectorTables;
use onebit_core::{RngStream, SnapshotSampler};
use rayon::prelude::*;

use crate::CliResult;

/// Runs `trial` for t = 0..n_trials and returns one vector per output slot.
pub fn run_trials<F>(n_trials: usize, rng: &RngStream, slots: usize, trial: F) -> CliResult<Vec<Vec<f64>>>
where
    F: Fn(&mut RngStream, &mut Vec<u32>) -> CliResult<Vec<f64>> + Sync,
{
    let per_trial: Vec<Vec<f64>> = (0..n_trials)
        .into_par_iter()
        .map_init(Vec::new, |buf, t| trial(&mut rng.derive(t as u64), buf))
        .collect::<CliResult<_>>()?;
    let mut out = vec![Vec::with_capacity(n_trials); slots];
    for row in per_trial {
        for (slot, v) in out.iter_mut().zip(row) {
            slot.push(v);
        }
    }
    Ok(out)
}

/// T_R of each detector on the same simulated blocks of `n_snapshots`.
pub fn simulate_statistics(
    detectors: &[&DetectorTables],
    sampler: &SnapshotSampler,
    n_snapshots: usize,
    n_trials: usize,
    rng: &RngStream,
) -> CliResult<Vec<Vec<f64>>> {
    run_trials(n_trials, rng, detectors.len(), |r, pats| {
        sampler.sample_patterns(r, n_snapshots, pats);
        detectors
            .iter()
            .map(|d| Ok(d.statistic(pats)?))
            .collect()
    })
}

/// Sorted copy with NaN rejected upstream by construction.
pub fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Fraction of `sorted_stats` strictly above `gamma`.
pub fn exceedance(sorted_stats: &[f64], gamma: f64) -> f64 {
    let below = sorted_stats.partition_point(|&s| s <= gamma);
    (sorted_stats.len() - below) as f64 / sorted_stats.len() as f64
}

/// Threshold whose empirical exceedance on `sorted_h0` is at most `pfa`
/// and as close to it as the sample allows.
pub fn empirical_threshold(sorted_h0: &[f64], pfa: f64) -> f64 {
    let n = sorted_h0.len();
    let keep = (pfa * n as f64).floor() as usize;
    if keep >= n {
        return f64::NEG_INFINITY;
    }
    sorted_h0[n - keep - 1]
}

/// 3σ binomial half-width √(p(1−p)/n)·3.
pub fn binomial_halfwidth(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// (p̂ − 3σ̂, p̂ + 3σ̂) clipped to [0, 1].
pub fn binomial_ci(p_hat: f64, n: usize) -> (f64, f64) {
    let h = binomial_halfwidth(p_hat, n);
    ((p_hat - h).max(0.0), (p_hat + h).min(1.0))
}

/// `points` equally spaced values from 0 to `max` inclusive.
pub fn linear_grid(max: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| max * i as f64 / (points - 1) as f64).collect()
}

/// One-sample Kolmogorov–Smirnov distance between `sorted_stats` and `cdf`.
pub fn ks_statistic(sorted_stats: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted_stats.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted_stats.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exceedance_counts_strictly_above() {
        let s = sorted(vec![3.0, 1.0, 2.0, 2.0]);
        assert_eq!(exceedance(&s, 2.0), 0.25);
        assert_eq!(exceedance(&s, 0.0), 1.0);
        assert_eq!(exceedance(&s, 3.0), 0.0);
    }

    #[test]
    fn empirical_threshold_hits_target() {
        let s: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        for p in [0.001, 0.01, 0.5] {
            let t = empirical_threshold(&s, p);
            assert!((exceedance(&s, t) - p).abs() < 1e-12);
        }
        assert_eq!(empirical_threshold(&s, 1.0), f64::NEG_INFINITY);
        assert_eq!(exceedance(&s, f64::NEG_INFINITY), 1.0);
    }

    #[test]
    fn trials_independent_of_thread_count() {
        let rng = RngStream::new(4, 4);
        let f = |r: &mut RngStream, _: &mut Vec<u32>| Ok(vec![r.uniform(), r.standard_normal()]);
        let a = run_trials(257, &rng, 2, f).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_trials(257, &rng, 2, f)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        let n = 1000;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        assert!(ks_statistic(&s, |x| x) <= 0.5 / n as f64 + 1e-12);
    }

    #[test]
    fn grid_and_ci() {
        assert_eq!(linear_grid(2.0, 3), vec![0.0, 1.0, 2.0]);
        let (lo, hi) = binomial_ci(0.01, 100_000);
        assert!((hi - lo - 6.0 * (0.01f64 * 0.99 / 1e5).sqrt()).abs() < 1e-15);
    }
}
