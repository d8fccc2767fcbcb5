use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use onebit_sim::experiments::{run_avg_pfa, run_pd, run_pfa, run_roc, run_training};
use onebit_sim::plot::{render_svg, PlotSpec};
use onebit_sim::{CliError, CliResult, ConfigOverrides, ExperimentConfig, Written};

#[derive(Parser)]
#[command(name = "onebit-sim", version, about = "Monte Carlo studies of the one-bit Rao detector")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// False alarm vs threshold under covariance mismatch.
    Pfa(Common),
    /// False alarm averaged over a perturbation prior.
    AvgPfa(Common),
    /// Detection probability vs threshold.
    Pd(Common),
    /// ROC against the white-noise detector.
    Roc(Common),
    /// ROC with an estimated covariance from training snapshots.
    Training(Common),
    /// Render an SVG plot from a CSV file.
    Plot(PlotArgs),
}

#[derive(Args)]
struct Common {
    /// JSON config; command-line values take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_trials: Option<usize>,
    #[arg(long)]
    k_draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated perturbation levels.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    rho: Option<Vec<f64>>,
    /// Comma-separated SNR levels in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    roc_snr: Option<f64>,
    /// Comma-separated training lengths.
    #[arg(long, value_delimiter = ',')]
    n1: Option<Vec<usize>>,
    #[arg(long)]
    gamma_points: Option<usize>,
    /// Output directory.
    #[arg(long, env = "ONEBIT_SIM_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Column for the x axis.
    #[arg(long)]
    x: String,
    /// Comma-separated columns to draw.
    #[arg(long, value_delimiter = ',', required = true)]
    y: Vec<String>,
    #[arg(long)]
    log_x: bool,
    #[arg(long)]
    log_y: bool,
    #[arg(long, default_value = "")]
    title: String,
    /// SVG file to write.
    #[arg(long)]
    out: PathBuf,
}

impl Common {
    fn resolve(self) -> CliResult<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply(ConfigOverrides {
            m: self.m,
            p: self.p,
            n: self.n,
            alpha: self.alpha,
            rho: self.rho,
            snr_db: self.snr,
            roc_snr_db: self.roc_snr,
            n_trials: self.n_trials,
            k_draws: self.k_draws,
            seed: self.seed,
            n1: self.n1,
            gamma_points: self.gamma_points,
            output_dir: self.out,
        });
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run_experiment(common: Common, run: fn(&ExperimentConfig, &std::path::Path) -> CliResult<Written>) -> CliResult<()> {
    let cfg = common.resolve()?;
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir)?;
    cfg.write_resolved(&dir)?;
    let written = run(&cfg, &dir)?;
    for path in written.csv.iter().chain(&written.svg) {
        println!("{}", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Pfa(c) => run_experiment(c, run_pfa),
        Command::AvgPfa(c) => run_experiment(c, run_avg_pfa),
        Command::Pd(c) => run_experiment(c, run_pd),
        Command::Roc(c) => run_experiment(c, run_roc),
        Command::Training(c) => run_experiment(c, run_training),
        Command::Plot(a) => {
            let spec = PlotSpec {
                x: a.x,
                ys: a.y,
                log_x: a.log_x,
                log_y: a.log_y,
                title: a.title,
            };
            render_svg(&a.csv, &spec, &a.out)?;
            println!("{}", a.out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
