use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ridepool_core::graphs::dump_rtvz;
use ridepool_core::harness::{
    generate_synthetic, run_matrix, run_one, HarnessError, RunConfig, RunMatrix, SyntheticSpec,
};
use ridepool_core::sim::{Simulation, Variant};
use ridepool_core::{target_supply, Seconds, SimConfig};

#[derive(Parser)]
#[command(name = "ridepool", version, about = "Ride-pooling dispatch simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the `[sim]` section of a config file.
#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    fleet: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Rebalancing horizon in seconds.
    #[arg(long = "h-seconds")]
    h_seconds: Option<Seconds>,
}

impl Overrides {
    fn apply(&self, c: &mut SimConfig) {
        if let Some(v) = self.variant {
            c.variant = v;
        }
        if let Some(f) = self.fleet {
            c.fleet = f;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(g) = self.gamma {
            c.gamma = g;
        }
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        if let Some(h) = self.h_seconds {
            c.horizon_s = h;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its report and journal.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every configuration listed in a matrix file.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate a synthetic grid scenario.
    Generate {
        /// Generator spec (TOML); defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "scenario")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a scenario config and its input files without simulating.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the RTVZ graph solved at the first epoch at or after `--at`.
    DumpGraph {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        at: Seconds,
        #[command(flatten)]
        overrides: Overrides,
    },
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(path)?;
    overrides.apply(&mut cfg.sim);
    cfg.sim.validate().map_err(Failure::Validation)?;
    Ok(cfg)
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, out, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            let scenario = cfg.scenario.load()?;
            let report = run_one("run", &cfg.sim, &scenario, &out)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Matrix { config, out } => {
            let (matrix, files) = RunMatrix::load(&config, out.clone())?;
            let scenario = files.load()?;
            let outcomes = run_matrix(&matrix, &scenario)?;
            let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
            println!(
                "{} runs, {} failed; summary in {}",
                outcomes.len(),
                failed,
                out.join("summary.csv").display()
            );
        }
        Command::Generate { config, out, overrides } => {
            let mut spec = match &config {
                Some(p) => {
                    let text =
                        fs::read_to_string(p).map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?;
                    toml::from_str::<SyntheticSpec>(&text)
                        .map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(s) = overrides.seed {
                spec.seed = s;
            }
            // warm-up, measurement and cool-off cover the generated demand in thirds
            let third = spec.duration_s / 3;
            let mut sim = SimConfig {
                start_s: spec.start_s,
                warmup_s: third,
                measure_s: third,
                cooloff_s: spec.duration_s - 2 * third,
                ..SimConfig::default()
            };
            overrides.apply(&mut sim);
            sim.validate().map_err(Failure::Validation)?;
            let g = generate_synthetic(&spec)?;
            g.write_to(&out, &sim)?;
            println!(
                "{} requests, {} nodes, {} zones written to {}",
                g.scenario.requests.len(),
                g.scenario.net.num_nodes(),
                g.scenario.zones.len(),
                out.display()
            );
        }
        Command::Validate { config, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            let scenario = cfg.scenario.load()?;
            scenario
                .check_connectivity()
                .map_err(|e| Failure::Validation(e.to_string()))?;
            target_supply(&scenario.rates, &scenario.zones, cfg.sim.start_s, cfg.sim.horizon_s)
                .map_err(|e| Failure::Validation(e.to_string()))?;
            println!(
                "ok: {} nodes, {} edges, {} zones, {} requests",
                scenario.net.num_nodes(),
                scenario.net.num_edges(),
                scenario.zones.len(),
                scenario.requests.len()
            );
        }
        Command::DumpGraph { config, at, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            let scenario = cfg.scenario.load()?;
            let mut sim = Simulation::new(&scenario, &cfg.sim).map_err(|e| Failure::Validation(e.to_string()))?;
            while sim.state.clock < at && !sim.finished() {
                sim.step().map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            print!("{}", dump_rtvz(&sim.peek_graph()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("fault: {m}");
            ExitCode::from(2)
        }
    }
}
