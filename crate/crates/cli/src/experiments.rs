//! The five studies. Each has an in-memory form (used by the acceptance
//! suite) and a `run_*` wrapper that writes CSV and SVG files.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use onebit_core::analysis::{
    nonnull_moments, pd_exact, pd_low_snr, pd_low_snr_mismatched, pfa_mismatched, prior_null_draws, upsilon1_sq,
    AvgPfaMode, NonNullMoments, PerturbationPrior,
};
use onebit_core::analysis::estimate_cov_one_bit;
use onebit_core::detector::{
    build_detector, build_noise_tables, pfa_for_threshold, white_noise_tables, DetectorTables,
};
use onebit_core::linalg::complex_to_composite;
use onebit_core::radar::{beta_for_snr, make_scenario, perturb_cov, random_noise_cov};
use onebit_core::{Complex64, ComplexMatrix, OrthantOptions, RngStream, Scenario, SnapshotSampler};

use crate::config::ExperimentConfig;
use crate::harness::{
    binomial_ci, binomial_halfwidth, empirical_threshold, exceedance, linear_grid, run_trials, simulate_statistics,
    sorted,
};
use crate::plot::{svg_string, PlotSpec, Table};
use crate::{CliResult, Written};

// RNG stream ids; every random quantity has its own stream.
const S_NOISE: u64 = 1;
const S_TABLES: u64 = 2;
const S_PERTURB: u64 = 3;
const S_NULL: u64 = 4;
const S_ALT: u64 = 5;
const S_PRIOR: u64 = 6;
const S_PRIOR_TRIALS: u64 = 7;
const S_MOMENTS: u64 = 8;
const S_MISMATCH: u64 = 9;
const S_TRAIN: u64 = 10;
const S_TRAIN_TABLES: u64 = 11;
const S_ROC_H0: u64 = 12;
const S_ROC_H1: u64 = 13;

/// Largest threshold plotted for false-alarm studies: pfa theory reaches 10⁻³.
const PFA_FLOOR: f64 = 1e-3;

/// Scenario and detector tables shared by all studies of one config.
pub struct Setup {
    pub scenario: Scenario,
    pub tables: DetectorTables,
}

impl ExperimentConfig {
    pub fn table_opts(&self) -> OrthantOptions {
        OrthantOptions::with_tol(self.table_tol)
    }

    pub fn coarse_opts(&self) -> OrthantOptions {
        OrthantOptions::with_tol(self.coarse_tol)
    }

    pub fn stream(&self, id: u64) -> RngStream {
        RngStream::new(self.seed, id)
    }
}

pub fn setup(cfg: &ExperimentConfig) -> CliResult<Setup> {
    cfg.validate()?;
    let sigma = random_noise_cov(cfg.m, cfg.alpha, &mut cfg.stream(S_NOISE));
    let scenario = make_scenario(cfg.m, cfg.p, cfg.n, cfg.phi, cfg.theta, sigma)?;
    let tables = build_detector(&scenario, &cfg.table_opts(), &cfg.stream(S_TABLES))?;
    Ok(Setup { scenario, tables })
}

/// Σ′_N for mismatch level ρ: one fixed perturbation per ρ, Σ_N itself at ρ = 0.
pub fn true_covariance(cfg: &ExperimentConfig, scenario: &Scenario, rho: f64) -> CliResult<ComplexMatrix> {
    if rho == 0.0 {
        return Ok(scenario.sigma_n.clone());
    }
    Ok(perturb_cov(&scenario.sigma_n, rho, &mut cfg.stream(S_PERTURB).derive(rho.to_bits()))?)
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn write_csv(path: &Path, headers: &[&str], rows: &[Vec<f64>]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(headers)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn write_table(dir: &Path, stem: &str, headers: &[&str], rows: Vec<Vec<f64>>, plot: PlotSpec, out: &mut Written) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{stem}.csv"));
    write_csv(&csv, headers, &rows)?;
    out.csv.push(csv);
    let table = Table {
        headers: headers.iter().map(|h| h.to_string()).collect(),
        rows,
    };
    let svg = dir.join(format!("{stem}.svg"));
    fs::write(&svg, svg_string(&table, &plot)?)?;
    out.svg.push(svg);
    Ok(())
}

// ---------------------------------------------------------------- pfa

pub struct PfaCurve {
    pub rho: f64,
    pub upsilon_sq: f64,
    pub upsilon1_sq: f64,
    pub gamma: Vec<f64>,
    pub theory: Vec<f64>,
    pub empirical: Vec<f64>,
    pub n_trials: usize,
    /// Sorted H₀ statistics.
    pub null_stats: Vec<f64>,
}

impl PfaCurve {
    /// Theory at any threshold.
    pub fn theory_at(&self, gamma: f64) -> CliResult<f64> {
        if self.rho == 0.0 {
            Ok(pfa_for_threshold(gamma))
        } else {
            Ok(pfa_mismatched(gamma, self.upsilon_sq, self.upsilon1_sq)?)
        }
    }
}

/// Detector built on Σ_N, H₀ data drawn from Σ′_N.
pub fn pfa_curves(cfg: &ExperimentConfig, s: &Setup) -> CliResult<Vec<PfaCurve>> {
    let t = &s.tables;
    cfg.rho
        .iter()
        .map(|&rho| {
            let sigma_true = true_covariance(cfg, &s.scenario, rho)?;
            let upsilon1 = if rho == 0.0 {
                t.upsilon_sq
            } else {
                let truth = complex_to_composite(&sigma_true)?;
                upsilon1_sq(t, &truth, &cfg.table_opts(), &cfg.stream(S_MISMATCH).derive(rho.to_bits()))?.upsilon1_sq
            };
            let sampler = SnapshotSampler::new(&s.scenario.w, zero(), &sigma_true)?;
            let stats = simulate_statistics(&[t], &sampler, t.n(), cfg.n_trials, &cfg.stream(S_NULL).derive(rho.to_bits()))?;
            let null_stats = sorted(stats.into_iter().next().unwrap_or_default());
            let ratio = (upsilon1 / t.upsilon_sq).max(1.0);
            let gamma = linear_grid(-2.0 * PFA_FLOOR.ln() * ratio, cfg.gamma_points);
            let mut curve = PfaCurve {
                rho,
                upsilon_sq: t.upsilon_sq,
                upsilon1_sq: upsilon1,
                theory: Vec::new(),
                empirical: gamma.iter().map(|&g| exceedance(&null_stats, g)).collect(),
                gamma,
                n_trials: cfg.n_trials,
                null_stats,
            };
            curve.theory = curve.gamma.iter().map(|&g| curve.theory_at(g)).collect::<CliResult<_>>()?;
            Ok(curve)
        })
        .collect()
}

pub fn run_pfa(cfg: &ExperimentConfig, dir: &Path) -> CliResult<Written> {
    let s = setup(cfg)?;
    let mut out = Written::default();
    for c in pfa_curves(cfg, &s)? {
        let rows = (0..c.gamma.len())
            .map(|i| {
                let (lo, hi) = binomial_ci(c.empirical[i], c.n_trials);
                vec![c.gamma[i], c.theory[i], c.empirical[i], lo, hi]
            })
            .collect();
        let plot = PlotSpec {
            x: "gamma".into(),
            ys: vec!["pfa_theory".into(), "pfa_empirical".into()],
            log_y: true,
            title: format!("False alarm vs threshold, rho = {}", c.rho),
            ..Default::default()
        };
        write_table(dir, &format!("pfa_rho{}", c.rho), &["gamma", "pfa_theory", "pfa_empirical", "ci_low", "ci_high"], rows, plot, &mut out)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------- avg-pfa

pub struct AvgPfaCurve {
    pub rho: f64,
    pub gamma: Vec<f64>,
    pub taylor: Vec<f64>,
    pub direct: Vec<f64>,
    pub empirical: Vec<f64>,
    pub n_trials: usize,
}

/// Theory from K prior draws in both modes; each empirical trial draws a
/// fresh Σ′_N from the same prior.
pub fn avg_pfa_curves(cfg: &ExperimentConfig, s: &Setup) -> CliResult<Vec<AvgPfaCurve>> {
    let t = &s.tables;
    cfg.rho
        .iter()
        .map(|&rho| {
            let prior = PerturbationPrior {
                sigma_n: s.scenario.sigma_n.clone(),
                rho,
            };
            let draws_rng = cfg.stream(S_PRIOR).derive(rho.to_bits());
            let taylor = prior_null_draws(t, &prior, cfg.k_draws, AvgPfaMode::Taylor, &cfg.table_opts(), &draws_rng)?;
            let direct = prior_null_draws(t, &prior, cfg.k_draws, AvgPfaMode::Direct, &cfg.coarse_opts(), &draws_rng)?;
            let w = &s.scenario.w;
            let stats = run_trials(cfg.n_trials, &cfg.stream(S_PRIOR_TRIALS).derive(rho.to_bits()), 1, |r, pats| {
                let sigma = perturb_cov(&s.scenario.sigma_n, rho, &mut r.derive(0))?;
                let sampler = SnapshotSampler::new(w, zero(), &sigma)?;
                sampler.sample_patterns(&mut r.derive(1), t.n(), pats);
                Ok(vec![t.statistic(pats)?])
            })?;
            let null_stats = sorted(stats.into_iter().next().unwrap_or_default());
            let ratio = taylor
                .upsilon1_sq
                .iter()
                .chain(&direct.upsilon1_sq)
                .fold(1.0f64, |a, v| a.max(v / t.upsilon_sq));
            let gamma = linear_grid(-2.0 * PFA_FLOOR.ln() * ratio, cfg.gamma_points);
            Ok(AvgPfaCurve {
                rho,
                taylor: gamma.iter().map(|&g| taylor.pfa(g)).collect(),
                direct: gamma.iter().map(|&g| direct.pfa(g)).collect(),
                empirical: gamma.iter().map(|&g| exceedance(&null_stats, g)).collect(),
                gamma,
                n_trials: cfg.n_trials,
            })
        })
        .collect()
}

pub fn run_avg_pfa(cfg: &ExperimentConfig, dir: &Path) -> CliResult<Written> {
    let s = setup(cfg)?;
    let mut out = Written::default();
    for c in avg_pfa_curves(cfg, &s)? {
        let rows = (0..c.gamma.len())
            .map(|i| {
                let (lo, hi) = binomial_ci(c.empirical[i], c.n_trials);
                vec![c.gamma[i], c.taylor[i], c.direct[i], c.empirical[i], lo, hi]
            })
            .collect();
        let plot = PlotSpec {
            x: "gamma".into(),
            ys: vec!["pfa_taylor".into(), "pfa_direct".into(), "pfa_empirical".into()],
            log_y: true,
            title: format!("Averaged false alarm, rho = {}", c.rho),
            ..Default::default()
        };
        write_table(
            dir,
            &format!("avg_pfa_rho{}", c.rho),
            &["gamma", "pfa_taylor", "pfa_direct", "pfa_empirical", "ci_low", "ci_high"],
            rows,
            plot,
            &mut out,
        )?;
    }
    Ok(out)
}

// ---------------------------------------------------------------- pd

pub struct PdCurve {
    pub snr_db: f64,
    /// 0 for the matched case.
    pub rho: f64,
    pub beta: Complex64,
    pub moments: NonNullMoments,
    pub gamma: Vec<f64>,
    pub exact: Vec<f64>,
    pub low_snr: Vec<f64>,
    pub empirical: Vec<f64>,
    pub n_trials: usize,
}

/// Threshold grid spanning the null tail down to 10⁻³ and the bulk of the H₁ law.
fn pd_grid(m: &NonNullMoments, ratio: f64, points: usize) -> Vec<f64> {
    let mean: f64 = (0..2).map(|l| m.lambda[l] * (1.0 + m.m_noncentral[l].powi(2))).sum();
    let var: f64 = (0..2).map(|l| 2.0 * m.lambda[l].powi(2) * (1.0 + 2.0 * m.m_noncentral[l].powi(2))).sum();
    let top = (-2.0 * PFA_FLOOR.ln() * ratio.max(1.0)).max(mean + 4.0 * var.sqrt());
    linear_grid(top, points)
}

/// H₁ study at one SNR; data follow Σ′_N(ρ), the detector uses Σ_N.
pub fn pd_curve(cfg: &ExperimentConfig, s: &Setup, snr_db: f64, rho: f64) -> CliResult<PdCurve> {
    let t = &s.tables;
    let beta = beta_for_snr(snr_db, cfg.p, &s.scenario.sigma_n, cfg.beta_phase);
    let sigma_true = true_covariance(cfg, &s.scenario, rho)?;
    let truth = complex_to_composite(&sigma_true)?;
    let key = snr_db.to_bits() ^ rho.to_bits().rotate_left(29);
    let moments = nonnull_moments(t, beta, &truth, &cfg.coarse_opts(), &cfg.stream(S_MOMENTS).derive(key))?;
    let (analysis, ratio) = if rho == 0.0 {
        (None, 1.0)
    } else {
        let a = upsilon1_sq(t, &truth, &cfg.table_opts(), &cfg.stream(S_MISMATCH).derive(rho.to_bits()))?;
        let r = a.variance_ratio();
        (Some(a), r)
    };
    let gamma = pd_grid(&moments, ratio, cfg.gamma_points);
    let sampler = SnapshotSampler::new(&s.scenario.w, beta, &sigma_true)?;
    let stats = simulate_statistics(&[t], &sampler, t.n(), cfg.n_trials, &cfg.stream(S_ALT).derive(key))?;
    let alt = sorted(stats.into_iter().next().unwrap_or_default());
    let exact = gamma.iter().map(|&g| pd_exact(g, &moments)).collect::<Result<_, _>>()?;
    let low_snr = gamma
        .iter()
        .map(|&g| match &analysis {
            None => pd_low_snr(g, t.upsilon_sq, beta),
            Some(a) => pd_low_snr_mismatched(g, a, beta),
        })
        .collect::<Result<_, _>>()?;
    Ok(PdCurve {
        snr_db,
        rho,
        beta,
        moments,
        exact,
        low_snr,
        empirical: gamma.iter().map(|&g| exceedance(&alt, g)).collect(),
        gamma,
        n_trials: cfg.n_trials,
    })
}

pub fn run_pd(cfg: &ExperimentConfig, dir: &Path) -> CliResult<Written> {
    let s = setup(cfg)?;
    let mut out = Written::default();
    let mut cases = vec![0.0];
    cases.extend(cfg.rho.iter().copied().filter(|&r| r > 0.0));
    for &snr in &cfg.snr_db {
        for &rho in &cases {
            let c = pd_curve(cfg, &s, snr, rho)?;
            let rows = (0..c.gamma.len())
                .map(|i| {
                    let (lo, hi) = binomial_ci(c.empirical[i], c.n_trials);
                    vec![c.gamma[i], c.exact[i], c.low_snr[i], c.empirical[i], lo, hi]
                })
                .collect();
            let plot = PlotSpec {
                x: "gamma".into(),
                ys: vec!["pd_exact".into(), "pd_low_snr".into(), "pd_empirical".into()],
                title: format!("Detection vs threshold, SNR = {snr} dB, rho = {rho}"),
                ..Default::default()
            };
            write_table(
                dir,
                &format!("pd_snr{snr}_rho{rho}"),
                &["gamma", "pd_exact", "pd_low_snr", "pd_empirical", "ci_low", "ci_high"],
                rows,
                plot,
                &mut out,
            )?;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- roc

pub struct RocCurve {
    pub rho: f64,
    pub pfa: Vec<f64>,
    pub pd_proposed: Vec<f64>,
    pub pd_white: Vec<f64>,
    pub n_trials: usize,
}

/// Pd at each target pfa, thresholds set on each detector's own H₀ sample.
fn pd_at_pfa(h0: &[f64], h1: &[f64], pfa: &[f64]) -> Vec<f64> {
    pfa.iter().map(|&p| exceedance(h1, empirical_threshold(h0, p))).collect()
}

pub fn roc_curves(cfg: &ExperimentConfig, s: &Setup) -> CliResult<Vec<RocCurve>> {
    let white = white_noise_tables(&s.scenario)?;
    let beta = beta_for_snr(cfg.roc_snr_db, cfg.p, &s.scenario.sigma_n, cfg.beta_phase);
    let dets = [&s.tables, &white];
    cfg.rho
        .iter()
        .map(|&rho| {
            let sigma_true = true_covariance(cfg, &s.scenario, rho)?;
            let h0s = SnapshotSampler::new(&s.scenario.w, zero(), &sigma_true)?;
            let h1s = SnapshotSampler::new(&s.scenario.w, beta, &sigma_true)?;
            let n = s.tables.n();
            let h0 = simulate_statistics(&dets, &h0s, n, cfg.n_trials, &cfg.stream(S_ROC_H0).derive(rho.to_bits()))?;
            let h1 = simulate_statistics(&dets, &h1s, n, cfg.n_trials, &cfg.stream(S_ROC_H1).derive(rho.to_bits()))?;
            let h0: Vec<Vec<f64>> = h0.into_iter().map(sorted).collect();
            let h1: Vec<Vec<f64>> = h1.into_iter().map(sorted).collect();
            Ok(RocCurve {
                rho,
                pd_proposed: pd_at_pfa(&h0[0], &h1[0], &cfg.pfa_grid),
                pd_white: pd_at_pfa(&h0[1], &h1[1], &cfg.pfa_grid),
                pfa: cfg.pfa_grid.clone(),
                n_trials: cfg.n_trials,
            })
        })
        .collect()
}

pub fn run_roc(cfg: &ExperimentConfig, dir: &Path) -> CliResult<Written> {
    let s = setup(cfg)?;
    let mut out = Written::default();
    for c in roc_curves(cfg, &s)? {
        let rows = (0..c.pfa.len())
            .map(|i| {
                vec![
                    c.pfa[i],
                    c.pd_proposed[i],
                    c.pd_white[i],
                    binomial_halfwidth(c.pd_proposed[i], c.n_trials),
                    binomial_halfwidth(c.pd_white[i], c.n_trials),
                ]
            })
            .collect();
        let plot = PlotSpec {
            x: "pfa".into(),
            ys: vec!["pd_proposed".into(), "pd_white".into()],
            log_x: true,
            title: format!("ROC, SNR = {} dB, rho = {}", cfg.roc_snr_db, c.rho),
            ..Default::default()
        };
        write_table(
            dir,
            &format!("roc_rho{}", c.rho),
            &["pfa", "pd_proposed", "pd_white", "ci_proposed", "ci_white"],
            rows,
            plot,
            &mut out,
        )?;
    }
    Ok(out)
}

// ---------------------------------------------------------------- training

pub struct TrainingCurve {
    pub n1: usize,
    pub n2: usize,
    pub pfa: Vec<f64>,
    pub pd_proposed: Vec<f64>,
    pub pd_white: Vec<f64>,
    pub pd_known: Vec<f64>,
    pub n_trials: usize,
}

/// First n₁ snapshots are noise-only training data; detection runs on the
/// remaining n₂. `roc_snr_db` refers to the full block of n snapshots: the
/// amplitude is raised by √(n/n₂) so the transmitted energy is the same for
/// every split.
pub fn training_curves(cfg: &ExperimentConfig, s: &Setup) -> CliResult<Vec<TrainingCurve>> {
    let base_beta = beta_for_snr(cfg.roc_snr_db, cfg.p, &s.scenario.sigma_n, cfg.beta_phase);
    let sc = &s.scenario;
    cfg.n1
        .iter()
        .map(|&n1| {
            let n2 = cfg.n - n1;
            let window = sc.s.columns(n1, n2).into_owned();
            let win = Scenario::from_waveform(sc.m, sc.phi, sc.theta, window, sc.sigma_n.clone())?;
            let beta = base_beta * (cfg.n as f64 / n2 as f64).sqrt();

            let train = SnapshotSampler::new(&sc.w, zero(), &sc.sigma_n)?.sample(&mut cfg.stream(S_TRAIN).derive(n1 as u64), n1);
            let est = estimate_cov_one_bit(&train, &sc.composite.d)?;
            let noise = build_noise_tables(&est.c, &cfg.table_opts(), &cfg.stream(S_TRAIN_TABLES).derive(n1 as u64))?;
            let proposed = DetectorTables::build(&win.w, &est.d, Arc::new(noise))?;
            let known = DetectorTables::build(&win.w, &win.composite.d, s.tables.noise.clone())?;
            let white = white_noise_tables(&win)?;
            let dets = [&proposed, &white, &known];

            let h0s = SnapshotSampler::new(&win.w, zero(), &sc.sigma_n)?;
            let h1s = SnapshotSampler::new(&win.w, beta, &sc.sigma_n)?;
            let key = n1 as u64 ^ (1 << 40);
            let h0 = simulate_statistics(&dets, &h0s, n2, cfg.n_trials, &cfg.stream(S_ROC_H0).derive(key))?;
            let h1 = simulate_statistics(&dets, &h1s, n2, cfg.n_trials, &cfg.stream(S_ROC_H1).derive(key))?;
            let h0: Vec<Vec<f64>> = h0.into_iter().map(sorted).collect();
            let h1: Vec<Vec<f64>> = h1.into_iter().map(sorted).collect();
            Ok(TrainingCurve {
                n1,
                n2,
                pd_proposed: pd_at_pfa(&h0[0], &h1[0], &cfg.pfa_grid),
                pd_white: pd_at_pfa(&h0[1], &h1[1], &cfg.pfa_grid),
                pd_known: pd_at_pfa(&h0[2], &h1[2], &cfg.pfa_grid),
                pfa: cfg.pfa_grid.clone(),
                n_trials: cfg.n_trials,
            })
        })
        .collect()
}

pub fn run_training(cfg: &ExperimentConfig, dir: &Path) -> CliResult<Written> {
    let s = setup(cfg)?;
    let curves = training_curves(cfg, &s)?;
    let headers = ["n1", "n2", "pfa", "pd_proposed", "pd_white", "pd_known_cov"];
    let mut all = Vec::new();
    let mut out = Written::default();
    fs::create_dir_all(dir)?;
    for c in &curves {
        let rows: Vec<Vec<f64>> = (0..c.pfa.len())
            .map(|i| vec![c.n1 as f64, c.n2 as f64, c.pfa[i], c.pd_proposed[i], c.pd_white[i], c.pd_known[i]])
            .collect();
        let plot = PlotSpec {
            x: "pfa".into(),
            ys: vec!["pd_proposed".into(), "pd_white".into(), "pd_known_cov".into()],
            log_x: true,
            title: format!("Training split n1 = {}, n2 = {}", c.n1, c.n2),
            ..Default::default()
        };
        let table = Table {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: rows.clone(),
        };
        let svg = dir.join(format!("training_n1{}.svg", c.n1));
        fs::write(&svg, svg_string(&table, &plot)?)?;
        out.svg.push(svg);
        all.extend(rows);
    }
    let csv = dir.join("training.csv");
    write_csv(&csv, &headers, &all)?;
    out.csv.push(csv);
    Ok(out)
}
