use brwepi::brw::OffspringLaw;
use brwepi::moments::Convention;
use brwepi_experiments::config::Mode;
use brwepi_experiments::tools::{self, Quantity};
use brwepi_experiments::{run, verdict_exit_code, ExperimentError, Overrides};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "brwepi", version, about = "Branching random walk and lattice SIR experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (flat TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (or file, for `kernel` and `exact`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores. Never changes results.
    #[arg(long)]
    workers: Option<usize>,
    /// Binary kernel table to load, or to create when missing.
    #[arg(long)]
    kernel_cache: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Law {
    Poisson,
    Envelope,
}

#[derive(Clone, Copy, ValueEnum)]
enum Conv {
    Gen0ToNMinus1,
    Gen1ToN,
}

#[derive(Subcommand)]
enum Command {
    /// Build the transition-kernel table P_0..P_n and write the binary cache.
    Kernel {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        n_max: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Branching random walk runs from a point mass.
    Brw {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        mass: u64,
        #[arg(long, value_enum, default_value = "poisson")]
        law: Law,
        /// Village size for the envelope law.
        #[arg(long, default_value_t = 100)]
        village: u64,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        replicates: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Coupled SIR runs (standard and modified colourings of one envelope).
    Sir {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        mass: u64,
        #[arg(long)]
        village: u64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        replicates: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Exact moments and cumulants as JSON.
    Exact {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        quantity: Quantity,
        #[arg(long, default_value_t = 1)]
        mass: u64,
        /// Weight of the point test function at the origin.
        #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
        psi: f64,
        #[arg(long, default_value_t = 2)]
        h_max: usize,
        #[arg(long, value_enum, default_value = "gen0-to-n-minus1")]
        convention: Conv,
        #[command(flatten)]
        common: Common,
    },
    /// Importance-sampling battery for the likelihood ratio (mode importance_battery).
    Lr {
        #[command(flatten)]
        common: Common,
    },
    /// Local-time convergence diagnostic (mode local_time).
    Converge {
        #[command(flatten)]
        common: Common,
    },
    /// Threshold sweep over village sizes (mode threshold_sweep).
    Threshold {
        #[command(flatten)]
        common: Common,
    },
    /// Origin occupation-time statistic (mode occupation_time).
    Occupation {
        #[command(flatten)]
        common: Common,
    },
    /// Kernel inequality suite (mode bounds_suite).
    Bounds {
        #[command(flatten)]
        common: Common,
    },
}

fn overrides(c: &Common) -> Overrides {
    Overrides { seed: c.seed, out: c.out.clone(), workers: c.workers, kernel_cache: c.kernel_cache.clone() }
}

fn set_workers(c: &Common) {
    if let Some(w) = c.workers {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
}

fn config_mode(common: &Common, mode: Mode) -> Result<i32, ExperimentError> {
    let path = common.config.as_ref().ok_or_else(|| ExperimentError::Io(format!("--config is required for {}", mode.name())))?;
    let report = run(path, Some(mode), &overrides(common))?;
    println!("{}", report.summary_line());
    Ok(verdict_exit_code(report.verdict))
}

fn out_or(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn dispatch(cmd: Command) -> Result<i32, ExperimentError> {
    match cmd {
        Command::Kernel { d, n_max, common } => {
            let out = common.kernel_cache.clone().unwrap_or_else(|| out_or(&common, "kernel.bin"));
            let t = tools::kernel_table(d, n_max, &out)?;
            println!("kernel d={} n_max={} -> {}", t.d(), t.n_max(), out.display());
            Ok(0)
        }
        Command::Brw { d, mass, law, village, horizon, replicates, common } => {
            set_workers(&common);
            let law = match law {
                Law::Poisson => OffspringLaw::PoissonUnit,
                Law::Envelope => OffspringLaw::EnvelopeN(village),
            };
            let out = out_or(&common, "out");
            tools::brw_runs(d, mass, &law, horizon, replicates, common.seed.unwrap_or(1), &out)?;
            println!("brw {replicates} replicates -> {}", out.display());
            Ok(0)
        }
        Command::Sir { d, mass, village, alpha, horizon, replicates, common } => {
            set_workers(&common);
            let out = out_or(&common, "out");
            tools::sir_runs(d, mass, village, alpha, horizon, replicates, common.seed.unwrap_or(1), &out)?;
            println!("sir {replicates} replicates -> {}", out.display());
            Ok(0)
        }
        Command::Exact { d, n, quantity, mass, psi, h_max, convention, common } => {
            let convention = match convention {
                Conv::Gen0ToNMinus1 => Convention::Gen0ToNMinus1,
                Conv::Gen1ToN => Convention::Gen1ToN,
            };
            let table = match &common.kernel_cache {
                Some(p) => Some(tools::kernel_table(d, n, p)?),
                None => None,
            };
            let r = tools::exact_moment(d, n, quantity, mass, psi, h_max, convention, &OffspringLaw::PoissonUnit, table.as_ref())?;
            let out = out_or(&common, "moments.json");
            tools::write_json(&out, &r)?;
            println!("exact {} d={d} n={n} -> {}", r.quantity, out.display());
            Ok(0)
        }
        Command::Lr { common } => config_mode(&common, Mode::ImportanceBattery),
        Command::Converge { common } => config_mode(&common, Mode::LocalTime),
        Command::Threshold { common } => config_mode(&common, Mode::ThresholdSweep),
        Command::Occupation { common } => config_mode(&common, Mode::OccupationTime),
        Command::Bounds { common } => config_mode(&common, Mode::BoundsSuite),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
