use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cloudprice_cli::commands::{self, OfflineOptions};
use cloudprice_cli::suite::{self, SuiteOptions};
use cloudprice_cli::{CliError, InstanceConfig, PriceChoice, Scheme};
use cloudprice_core::SearchConfig;

#[derive(Parser)]
#[command(name = "cloudprice", version, about = "Posted prices for servers that run jobs of several lengths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Instance file (TOML).
    config: PathBuf,
    /// Emit CSV instead of a table.
    #[arg(long)]
    csv: bool,
    /// Objective weight on welfare; 0 is pure revenue.
    #[arg(long)]
    lambda: Option<f64>,
    /// Seed for every random choice.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the effective config (after flag overrides) and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state welfare, revenue and occupancy of the configured schedule.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Search for optimal prices.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "multi")]
        scheme: Scheme,
        /// Grid points for continuous value laws.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Approximation guarantees for the configured model.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo run with a closed-form comparison.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// `config` (the [schedule] table), `half-opt`, or a flat price.
        #[arg(long, default_value = "config")]
        price: PriceChoice,
    },
    /// Offline optimum, half-Opt pricing and a trace-based benchmark.
    Offline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<u64>,
        /// Read the arrival trace from this CSV file instead of sampling it.
        #[arg(long)]
        trace_in: Option<PathBuf>,
        /// Write the sampled trace to this CSV file.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Check every reference value and exit 1 if any fails.
    PaperSuite {
        /// Only run this group of checks (`h`, `rho`, ...) or names with this `group/` prefix.
        #[arg(long)]
        filter: Option<String>,
        /// Tolerance for irrational closed forms.
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
        #[arg(long)]
        csv: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        horizon: u64,
        #[arg(long, default_value_t = 30)]
        reps: usize,
    },
}

fn load(
    common: &Common,
    horizon: Option<u64>,
    reps: Option<usize>,
) -> Result<(InstanceConfig, cloudprice_cli::Instance), CliError> {
    if let Some(l) = common.lambda {
        if !(0.0..=1.0).contains(&l) {
            return Err(CliError::Usage(format!("--lambda: {l} must lie in [0, 1]")));
        }
    }
    if horizon == Some(0) {
        return Err(CliError::Usage("--horizon: must be positive".into()));
    }
    if reps == Some(0) {
        return Err(CliError::Usage("--reps: must be positive".into()));
    }
    let (mut cfg, _) = InstanceConfig::load(&common.config)?;
    if let Some(l) = common.lambda {
        cfg.set_lambda(l);
    }
    if let Some(s) = common.seed {
        cfg.set_seed(s);
    }
    if let Some(h) = horizon {
        cfg.set_horizon(h);
    }
    if let Some(k) = reps {
        cfg.set_replications(k);
    }
    // validate again so overrides go through the same checks
    let src = std::fs::read_to_string(&common.config)?;
    let inst = cfg.validate(&src, &common.config)?;
    Ok((cfg, inst))
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<bool, CliError> {
    let common = match &cli.command {
        Command::Evaluate { common }
        | Command::Optimize { common, .. }
        | Command::Bounds { common }
        | Command::Simulate { common, .. }
        | Command::Offline { common, .. } => Some(common),
        Command::PaperSuite { .. } => None,
    };
    let (horizon, reps) = match &cli.command {
        Command::Simulate { horizon, reps, .. } => (*horizon, *reps),
        Command::Offline { horizon, .. } => (*horizon, None),
        _ => (None, None),
    };
    let loaded = common.map(|c| load(c, horizon, reps)).transpose()?;
    if let (Some(c), Some((cfg, _))) = (common, &loaded) {
        if c.dump_config {
            write!(out, "{}", cfg.to_toml())?;
            return Ok(true);
        }
    }

    match cli.command {
        Command::Evaluate { common } => {
            let (_, inst) = loaded.expect("loaded");
            let r = commands::evaluate(&inst)?;
            r.write(out, common.csv)?;
            Ok(r.passed)
        }
        Command::Optimize { common, scheme, grid } => {
            let (_, inst) = loaded.expect("loaded");
            let mut search = SearchConfig {
                seed: inst.sim.seed,
                ..SearchConfig::default()
            };
            if let Some(g) = grid {
                if g < 2 {
                    return Err(CliError::Usage("--grid: need at least 2 points".into()));
                }
                search.grid_points = g;
            }
            let r = commands::optimize(&inst, scheme, &search)?;
            r.write(out, common.csv)?;
            Ok(r.passed)
        }
        Command::Bounds { common } => {
            let (_, inst) = loaded.expect("loaded");
            let r = commands::bounds(&inst)?;
            r.write(out, common.csv)?;
            Ok(r.passed)
        }
        Command::Simulate { common, price, .. } => {
            let (_, inst) = loaded.expect("loaded");
            let r = commands::simulate_cmd(&inst, price)?;
            let line = format!(
                "horizon {} (warmup {}), {} replications, seed {}",
                inst.sim.horizon, inst.sim.warmup, inst.sim.replications, inst.sim.seed
            );
            r.write(out, common.csv, &line)?;
            Ok(r.passed)
        }
        Command::Offline {
            common,
            trace_in,
            trace_out,
            ..
        } => {
            let (_, inst) = loaded.expect("loaded");
            let opts = OfflineOptions {
                horizon: inst.sim.horizon,
                seed: inst.sim.seed,
                trace_in,
                trace_out,
            };
            let r = commands::offline(&inst, &opts)?;
            r.write(out, common.csv)?;
            Ok(r.passed)
        }
        Command::PaperSuite {
            filter,
            tolerance,
            csv,
            seed,
            horizon,
            reps,
        } => {
            let opts = SuiteOptions {
                filter,
                tolerance,
                seed,
                horizon,
                replications: reps,
            };
            let results = suite::run_suite(&opts)?;
            suite::write_results(out, &results, csv)?;
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
