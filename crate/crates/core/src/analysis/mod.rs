//! Null and non-null distributions of the Rao statistic, covariance
//! mismatch, prior-averaged false alarm and one-bit covariance estimation.

mod estimate;
mod imhof;
mod mismatch;
mod nonnull;
mod prior;

pub use estimate::estimate_cov_one_bit;
pub use imhof::{imhof_cdf, noncentral_chi2_2_sf};
pub use mismatch::{
    mismatched_orthants, pfa_mismatched, threshold_mismatched, upsilon1_from_orthants, upsilon1_sq,
    MismatchAnalysis,
};
pub use nonnull::{
    nonnull_moments, pattern_probabilities, pd_exact, pd_low_snr, pd_low_snr_mismatched, NonNullMoments,
};
pub use prior::{avg_pfa, prior_null_draws, AvgPfaMode, CovariancePrior, PerturbationPrior, PriorNullDraws};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{build_detector, orbits, reflect, tau_of, threshold_for_pfa, DetectorTables, BUILD_TOL};
    use crate::linalg::{complex_to_composite, ComplexMatrix};
    use crate::orthant::{orthant_grad_corr_all, OrthantOptions};
    use crate::radar::{beta_for_snr, make_scenario, perturb_cov, random_noise_cov, Scenario, SnapshotSampler};
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use std::f64::consts::FRAC_PI_4;

    fn opts() -> OrthantOptions {
        OrthantOptions::with_tol(BUILD_TOL)
    }

    // per-draw and per-snapshot orthants
    fn coarse() -> OrthantOptions {
        OrthantOptions::with_tol(1e-5)
    }

    fn setup(m: usize, n: usize, seed: u64) -> (Scenario, DetectorTables) {
        let mut rng = RngStream::new(seed, 0);
        let s = random_noise_cov(m, 1.0, &mut rng);
        let sc = make_scenario(m, m, n, FRAC_PI_4, FRAC_PI_4, s).unwrap();
        let t = build_detector(&sc, &opts(), &RngStream::new(seed, 1)).unwrap();
        (sc, t)
    }

    /// (mean w₁, mean w₂, var w₁, var w₂, cov) over `trials` simulated blocks.
    fn score_moments(t: &DetectorTables, sampler: &SnapshotSampler, trials: u64, seed: u64) -> [f64; 5] {
        let mut pats = Vec::new();
        let mut acc = [0.0; 5];
        for k in 0..trials {
            sampler.sample_patterns(&mut RngStream::new(seed, k), t.n(), &mut pats);
            let (w1, w2) = t.scores(&pats).unwrap();
            acc[0] += w1;
            acc[1] += w2;
            acc[2] += w1 * w1;
            acc[3] += w2 * w2;
            acc[4] += w1 * w2;
        }
        let n = trials as f64;
        let (m1, m2) = (acc[0] / n, acc[1] / n);
        [m1, m2, acc[2] / n - m1 * m1, acc[3] / n - m2 * m2, acc[4] / n - m1 * m2]
    }

    #[test]
    fn matched_truth_reduces_mismatch_quantities() {
        let (sc, t) = setup(2, 40, 1);
        let a = upsilon1_sq(&t, &sc.composite, &opts(), &RngStream::new(1, 1)).unwrap();
        assert_abs_diff_eq!(a.upsilon1_sq, t.upsilon_sq, epsilon = 1e-9 * t.upsilon_sq);
        assert_abs_diff_eq!(a.varsigma1_sq, t.upsilon_sq, epsilon = 1e-9 * t.upsilon_sq);
        assert_abs_diff_eq!(a.varsigma2_sq, t.upsilon_sq, epsilon = 1e-9 * t.upsilon_sq);
        for (g, o) in a.g.iter().zip(&t.noise.o) {
            assert_abs_diff_eq!(*g, 1.0 / o, epsilon = 1e-9 / o);
        }
        assert!(a.g.iter().all(|&g| g > 0.0));
    }

    #[test]
    fn mismatched_pfa_examples() {
        assert_abs_diff_eq!(pfa_mismatched(9.21034, 3.0, 3.0).unwrap(), (-9.21034f64 / 2.0).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(pfa_mismatched(9.21034, 1.0, 2.0).unwrap(), (-9.21034f64 / 4.0).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(pfa_mismatched(9.210_340_371_976_184, 1.0, 2.0).unwrap(), 0.1, epsilon = 1e-12);
        for p in [0.3, 1e-2, 1e-5] {
            let g = threshold_mismatched(p, 2.0, 2.7).unwrap();
            assert_abs_diff_eq!(pfa_mismatched(g, 2.0, 2.7).unwrap(), p, epsilon = 1e-12 * p.max(1e-3));
        }
        assert!(threshold_mismatched(1.0, 1.0, 1.0).is_err());
        assert!(pfa_mismatched(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn mismatched_null_covariance_matches_simulation() {
        let (sc, t) = setup(2, 30, 2);
        let sigma_p = perturb_cov(&sc.sigma_n, 0.1, &mut RngStream::new(2, 7)).unwrap();
        let truth = complex_to_composite(&sigma_p).unwrap();
        let a = upsilon1_sq(&t, &truth, &opts(), &RngStream::new(2, 2)).unwrap();
        let sampler = SnapshotSampler::new(&sc.w, Complex64::new(0.0, 0.0), &sigma_p).unwrap();
        let trials = 100_000;
        let mm = score_moments(&t, &sampler, trials, 22);
        let r = a.variance_ratio();
        let se_var = r * (2.0 / trials as f64).sqrt();
        assert!((mm[2] - r).abs() < 3.0 * se_var, "var w1 {} vs {r}", mm[2]);
        assert!((mm[3] - r).abs() < 3.0 * se_var, "var w2 {} vs {r}", mm[3]);
        assert!(mm[4].abs() < 3.0 * r / (trials as f64).sqrt());
        assert!((r - 1.0).abs() > 1e-4);
    }

    #[test]
    fn mismatch_quantities_are_continuous() {
        let (sc, t) = setup(2, 20, 3);
        let base = upsilon1_sq(&t, &sc.composite, &opts(), &RngStream::new(3, 3)).unwrap();
        let mut s = sc.sigma_n.clone();
        s[(0, 1)] += Complex64::new(1e-6, 0.0);
        s[(1, 0)] = s[(0, 1)].conj();
        let moved = upsilon1_sq(&t, &complex_to_composite(&s).unwrap(), &opts(), &RngStream::new(3, 3)).unwrap();
        for (x, y) in [
            (base.upsilon1_sq, moved.upsilon1_sq),
            (base.varsigma1_sq, moved.varsigma1_sq),
            (base.varsigma2_sq, moved.varsigma2_sq),
        ] {
            assert!(((x - y) / x).abs() <= 1e-3);
        }
    }

    fn taylor_delta(c: &crate::linalg::RealMatrix, cp: &crate::linalg::RealMatrix, j: usize) -> f64 {
        let k = c.nrows();
        let tau = tau_of(j, k);
        let cj = reflect(c, &tau);
        let cpj = reflect(cp, &tau);
        let g = orthant_grad_corr_all(&cj, &opts(), &mut RngStream::new(0, j as u64)).unwrap();
        let mut idx = 0;
        let mut acc = 0.0;
        for r in 0..k {
            for s in r + 1..k {
                acc += g[idx] * (cpj[(r, s)] - cj[(r, s)]);
                idx += 1;
            }
        }
        acc
    }

    #[test]
    fn first_order_change_is_shared_within_orbits() {
        let (sc, _) = setup(2, 4, 4);
        let sp = perturb_cov(&sc.sigma_n, 0.05, &mut RngStream::new(4, 4)).unwrap();
        let cp = complex_to_composite(&sp).unwrap().c;
        for orb in orbits(2).unwrap() {
            let first = taylor_delta(&sc.composite.c, &cp, orb.members[0]);
            for &j in &orb.members[1..] {
                assert_abs_diff_eq!(taylor_delta(&sc.composite.c, &cp, j), first, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn zero_perturbation_prior_gives_chi2_tail() {
        let (sc, t) = setup(2, 20, 5);
        let prior = PerturbationPrior {
            sigma_n: sc.sigma_n.clone(),
            rho: 0.0,
        };
        let gamma = threshold_for_pfa(0.01).unwrap();
        let rng = RngStream::new(5, 5);
        let taylor = avg_pfa(gamma, &t, &prior, 20, AvgPfaMode::Taylor, &opts(), &rng).unwrap();
        assert_abs_diff_eq!(taylor, 0.01, epsilon = 1e-12);
        let direct = avg_pfa(gamma, &t, &prior, 20, AvgPfaMode::Direct, &coarse(), &rng).unwrap();
        assert_abs_diff_eq!(direct, 0.01, epsilon = 1e-5);
    }

    #[test]
    fn taylor_tracks_direct_and_gap_shrinks_with_rho() {
        let (sc, t) = setup(2, 50, 6);
        let gamma = threshold_for_pfa(0.01).unwrap();
        let rng = RngStream::new(6, 6);
        let mut gaps = Vec::new();
        for rho in [0.005, 0.01, 0.02] {
            let prior = PerturbationPrior {
                sigma_n: sc.sigma_n.clone(),
                rho,
            };
            let d = prior_null_draws(&t, &prior, 100, AvgPfaMode::Direct, &coarse(), &rng).unwrap();
            let ty = prior_null_draws(&t, &prior, 100, AvgPfaMode::Taylor, &opts(), &rng).unwrap();
            let (pd, pt) = (d.pfa(gamma), ty.pfa(gamma));
            let gap = ((pt - pd) / pd).abs();
            assert!(gap < 0.05, "rho {rho}: taylor {pt} direct {pd}");
            // mean variance inflation, compared on the scale of the perturbation
            let infl = |v: &[f64]| v.iter().map(|x| x / t.upsilon_sq - 1.0).sum::<f64>() / v.len() as f64;
            gaps.push((infl(&ty.upsilon1_sq) - infl(&d.upsilon1_sq)).abs());
        }
        assert!(gaps[0] < gaps[2], "{gaps:?}");
    }

    #[test]
    fn null_moments_reduce_to_identity() {
        let (sc, t) = setup(2, 30, 7);
        let mm = nonnull_moments(&t, Complex64::new(0.0, 0.0), &sc.composite, &coarse(), &RngStream::new(7, 7)).unwrap();
        for l in 0..2 {
            assert!(mm.u_w[l].abs() < 5e-4);
            assert!((mm.sigma_w[l][l] - 1.0).abs() < 5e-4);
        }
        assert!(mm.sigma_w[0][1].abs() < 5e-4);

        let sp = perturb_cov(&sc.sigma_n, 0.1, &mut RngStream::new(7, 8)).unwrap();
        let truth = complex_to_composite(&sp).unwrap();
        let a = upsilon1_sq(&t, &truth, &opts(), &RngStream::new(7, 9)).unwrap();
        let mm = nonnull_moments(&t, Complex64::new(0.0, 0.0), &truth, &coarse(), &RngStream::new(7, 10)).unwrap();
        for l in 0..2 {
            assert!(mm.u_w[l].abs() < 5e-4);
            assert!((mm.sigma_w[l][l] - a.variance_ratio()).abs() < 5e-4);
        }
    }

    #[test]
    fn closed_form_null_pd_is_exact() {
        // m = 1 uses closed-form bivariate orthants throughout
        let sc = make_scenario(1, 1, 10, 0.3, 0.3, ComplexMatrix::from_element(1, 1, Complex64::new(2.0, 0.0)))
            .unwrap();
        let t = build_detector(&sc, &opts(), &RngStream::new(0, 0)).unwrap();
        let mm = nonnull_moments(&t, Complex64::new(0.0, 0.0), &sc.composite, &opts(), &RngStream::new(0, 1)).unwrap();
        for gamma in [0.5, 4.0, 9.21] {
            assert_abs_diff_eq!(pd_exact(gamma, &mm).unwrap(), (-gamma / 2.0f64).exp(), epsilon = 1e-9);
            assert_abs_diff_eq!(pd_low_snr(gamma, t.upsilon_sq, Complex64::new(0.0, 0.0)).unwrap(), (-gamma / 2.0f64).exp(), epsilon = 1e-9);
        }
    }

    #[test]
    fn nonnull_mean_matches_simulation_single_channel() {
        let mut rng = RngStream::new(8, 0);
        let s = random_noise_cov(1, 1.0, &mut rng);
        let sc = make_scenario(1, 1, 2, 0.3, 0.3, s).unwrap();
        let t = build_detector(&sc, &opts(), &RngStream::new(8, 1)).unwrap();
        let beta = beta_for_snr(-10.0, 1, &sc.sigma_n, 0.7);
        let mm = nonnull_moments(&t, beta, &sc.composite, &opts(), &RngStream::new(8, 2)).unwrap();
        let sampler = SnapshotSampler::for_scenario(&sc, beta).unwrap();
        let trials = 1_000_000;
        let emp = score_moments(&t, &sampler, trials, 80);
        let n = trials as f64;
        for l in 0..2 {
            let se = (mm.sigma_w[l][l] / n).sqrt();
            assert!((emp[l] - mm.u_w[l]).abs() < 3.0 * se, "u_w[{l}] {} vs {}", emp[l], mm.u_w[l]);
            let se_v = mm.sigma_w[l][l] * (2.5 / n).sqrt();
            assert!((emp[2 + l] - mm.sigma_w[l][l]).abs() < 4.0 * se_v);
        }
    }

    #[test]
    fn pd_exact_matches_simulation_small_scenario() {
        let (sc, t) = setup(1, 40, 9);
        let beta = beta_for_snr(-8.0, sc.p, &sc.sigma_n, 0.2);
        let mm = nonnull_moments(&t, beta, &sc.composite, &opts(), &RngStream::new(9, 2)).unwrap();
        let sampler = SnapshotSampler::for_scenario(&sc, beta).unwrap();
        let trials = 40_000u64;
        let mut stats = Vec::with_capacity(trials as usize);
        let mut pats = Vec::new();
        for k in 0..trials {
            sampler.sample_patterns(&mut RngStream::new(90, k), t.n(), &mut pats);
            stats.push(t.statistic(&pats).unwrap());
        }
        for gamma in [1.0, 4.0, 8.0, 12.0] {
            let p = pd_exact(gamma, &mm).unwrap();
            let emp = stats.iter().filter(|&&s| s > gamma).count() as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((emp - p).abs() < 3.0 * se + 2e-3, "γ={gamma}: {emp} vs {p}");
        }
        let mut last = 1.0;
        for g in 0..30 {
            let p = pd_exact(g as f64, &mm).unwrap();
            assert!(p <= last + 1e-9);
            last = p;
        }
    }

    #[test]
    fn low_snr_mismatched_reduces_to_matched() {
        let (sc, t) = setup(2, 20, 10);
        let a = upsilon1_sq(&t, &sc.composite, &opts(), &RngStream::new(10, 1)).unwrap();
        let beta = Complex64::new(0.05, -0.03);
        for gamma in [1.0, 5.0, 10.0] {
            let x = pd_low_snr(gamma, t.upsilon_sq, beta).unwrap();
            let y = pd_low_snr_mismatched(gamma, &a, beta).unwrap();
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }
}
