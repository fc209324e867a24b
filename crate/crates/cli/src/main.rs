use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tvmfm::experiment::EstimationSettings;
use tvmfm::simulate::{ExperimentConfig, Scenario};
use tvmfm::smoothing::{DetectOptions, ThresholdRule};
use tvmfm::{KmaxRule, LoadingSide};
use tvmfm_cli::commands;
use tvmfm_cli::pipeline::EstimateOptions;
use tvmfm_cli::{CliError, CliResult};

/// Time-varying matrix factor models: simulation, estimation and diagnostics.
#[derive(Parser)]
#[command(name = "tvmfm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo cells of a TOML config.
    Simulate {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Estimate loadings, factors and switch diagnostics from a t,i,j,value CSV.
    Estimate {
        input: PathBuf,
        #[arg(short, long, default_value = "estimate")]
        out: PathBuf,
        #[command(flatten)]
        est: EstimateArgs,
        /// First and last time point of the varimax window.
        #[arg(long, num_args = 2, value_names = ["START", "END"])]
        varimax_window: Option<Vec<usize>>,
        /// Skip the global varimax rotation.
        #[arg(long)]
        no_rotation: bool,
        /// Skip switch detection and repair.
        #[arg(long)]
        no_smooth: bool,
    },
    /// Eigenvalue paths and switch statistics for plotting.
    Diagnose {
        input: PathBuf,
        #[arg(short, long, default_value = "diagnose")]
        out: PathBuf,
        #[command(flatten)]
        est: EstimateArgs,
    },
    /// Write one simulated series as a t,i,j,value CSV.
    Generate {
        #[arg(long, value_enum)]
        dgp: DgpArg,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        q: usize,
        #[arg(long = "len", short = 'T')]
        len: usize,
        #[arg(long, default_value_t = 0.1)]
        psi: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        rep: u64,
        /// Coalescing design only.
        #[arg(long, default_value_t = 0)]
        scenario: u8,
        /// Coalescing design only.
        #[arg(long, default_value_t = 0.05)]
        noise_share: f64,
        /// Coalescing design only: which loading carries the eigenvalue curves.
        #[arg(long, value_enum, default_value = "row")]
        side: SideArg,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the true loadings and factors here.
        #[arg(long)]
        truth_dir: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct EstimateArgs {
    /// Number of row factors; estimated when omitted.
    #[arg(short, long)]
    k: Option<usize>,
    /// Number of column factors; estimated when omitted.
    #[arg(short, long)]
    r: Option<usize>,
    /// Trailing moving-average window applied first (3 gives quarterly averages of monthly data).
    #[arg(long)]
    average: Option<usize>,
    /// Fixed two-sided bandwidth instead of the rule of thumb.
    #[arg(long)]
    h: Option<f64>,
    /// Fixed one-sided bandwidth for switch detection.
    #[arg(long)]
    h_star: Option<f64>,
    /// Rule-of-thumb constant.
    #[arg(long)]
    c: Option<f64>,
    /// Rank search bound: half, third, or an integer.
    #[arg(long, default_value = "third")]
    kmax: String,
    /// Switch threshold rule.
    #[arg(long, value_enum, default_value = "iqr")]
    threshold: ThresholdArg,
    /// Number of eigenvalues written per time point.
    #[arg(long, default_value_t = 6)]
    top: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum DgpArg {
    Dgp1,
    Dgp2,
    Coalescing,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Row,
    Column,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    Iqr,
    Tukey,
}

impl EstimateArgs {
    fn options(&self) -> CliResult<EstimateOptions> {
        let kmax = match self.kmax.as_str() {
            "half" => KmaxRule::Half,
            "third" => KmaxRule::Third,
            s => KmaxRule::Fixed(
                s.parse()
                    .map_err(|_| CliError::input(format!("--kmax must be half, third or an integer, got {s}")))?,
            ),
        };
        let mut settings = EstimationSettings { kmax, bandwidth: self.h, onesided_bandwidth: self.h_star, ..Default::default() };
        if let Some(c) = self.c {
            settings.scale = c;
        }
        for v in [self.h, self.h_star, self.c].into_iter().flatten() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::input(format!("bandwidth value {v} must be positive")));
            }
        }
        let rule = match self.threshold {
            ThresholdArg::Iqr => ThresholdRule::IqrMultiple,
            ThresholdArg::Tukey => ThresholdRule::TukeyFence,
        };
        Ok(EstimateOptions {
            k: self.k,
            r: self.r,
            average: self.average,
            settings,
            detect: DetectOptions { rule, ..Default::default() },
            ..Default::default()
        })
    }
}

fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var("TVMFM_THREADS") {
        let n: usize = v.parse().map_err(|_| CliError::input(format!("TVMFM_THREADS={v} is not a number")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads()?;
    match cli.command {
        Command::Simulate { config, out } => {
            let failed = commands::simulate(&config, out.as_deref())?;
            if failed > 0 {
                eprintln!("warning: {failed} replication(s) failed and were excluded from the summaries");
            }
        }
        Command::Estimate { input, out, est, varimax_window, no_rotation, no_smooth } => {
            let mut opts = est.options()?;
            opts.varimax_window = varimax_window.map(|w| (w[0], w[1]));
            opts.no_rotation = no_rotation;
            opts.smooth = !no_smooth;
            let res = commands::estimate(&input, &out, &opts, est.top)?;
            print_warnings(&res.warnings);
            println!("k = {}, r = {}, written to {}", res.k, res.r, out.display());
        }
        Command::Diagnose { input, out, est } => {
            let res = commands::diagnose(&input, &out, &est.options()?, est.top)?;
            print_warnings(&res.warnings);
            let regions = res.rows.diagnostics.regions.len() + res.cols.diagnostics.regions.len();
            println!("k = {}, r = {}, {regions} region(s), written to {}", res.k, res.r, out.display());
        }
        Command::Generate { dgp, p, q, len, psi, seed, rep, scenario, noise_share, side, output, truth_dir } => {
            let cfg = match dgp {
                DgpArg::Dgp1 => ExperimentConfig::standard(tvmfm::simulate::Dgp::Dgp1, p, q, len, psi),
                DgpArg::Dgp2 => ExperimentConfig::standard(tvmfm::simulate::Dgp::Dgp2, p, q, len, psi),
                DgpArg::Coalescing => {
                    if !(noise_share > 0.0 && noise_share < 1.0) {
                        return Err(CliError::input("--noise-share must lie in (0, 1)"));
                    }
                    let scenario = match scenario {
                        0 => Scenario::S0,
                        1 => Scenario::S1,
                        2 => Scenario::S2,
                        s => return Err(CliError::input(format!("--scenario {s} must be 0, 1 or 2"))),
                    };
                    ExperimentConfig::coalescing(p, q, len, psi, noise_share, scenario)
                }
            }
            .with_seed(seed);
            let side = match side {
                SideArg::Row => LoadingSide::Row,
                SideArg::Column => LoadingSide::Column,
            };
            commands::generate_series(&cfg, side, rep, &output, truth_dir.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
