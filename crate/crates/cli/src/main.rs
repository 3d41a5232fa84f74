use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use backhaul_core::experiment::{run_experiment, write_results, ExperimentSpec};
use backhaul_core::formulations::{
    solve_objective, FormulationError, Objective, RadioRegime, SettingLabel, SolutionRecord,
};
use backhaul_core::generator::{generate, GeneratorConfig};
use backhaul_core::model::NetworkTopology;
use backhaul_core::scheduler::{schedule, Schedule};
use backhaul_core::validator::validate_schedule;

const SEED_ENV: &str = "BACKHAUL_OPT_SEED";

const EXIT_VIOLATIONS: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_USAGE: u8 = 3;

/// Maximum supportable traffic demand, schedules and schedule validation for
/// tree-style mmWave backhaul networks.
#[derive(Debug, Parser)]
#[command(name = "backhaul-opt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random topology.
    Generate(GenerateArgs),
    /// Solve one formulation on a topology.
    Solve(SolveArgs),
    /// Build a schedule that realizes a solution.
    Schedule(ScheduleArgs),
    /// Check a schedule; exits with 1 when anything is violated.
    Validate(ValidateArgs),
    /// Run a batch of trials and write CSV results.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct GeneratorFlags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_small_bs: Option<usize>,
    #[arg(long)]
    macro_degree: Option<usize>,
    #[arg(long)]
    max_small_children: Option<usize>,
    #[arg(long)]
    pair_budget: Option<usize>,
}

impl GeneratorFlags {
    fn apply(&self, config: &mut GeneratorConfig) -> Result<()> {
        if let Some(seed) = env_seed()? {
            config.seed = seed;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.num_small_bs {
            config.num_small_bs = v;
        }
        if let Some(v) = self.macro_degree {
            config.macro_degree = v;
        }
        if let Some(v) = self.max_small_children {
            config.max_small_children = v;
        }
        if let Some(v) = self.pair_budget {
            config.interference_pair_budget = v;
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Generator configuration (JSON); missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: GeneratorFlags,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long, default_value = "equal_demand")]
    objective: Objective,
    /// One of MI-ER, MI-LR, LI-ER, LI-LR; LR takes an optional macro chain
    /// count such as LI-LR(2).
    #[arg(long, default_value = "MI-ER")]
    setting: SettingLabel,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    schedule: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Experiment spec (JSON); missing fields take defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    flags: GeneratorFlags,
    #[arg(long)]
    out_dir: PathBuf,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("{SEED_ENV}={v} is not a seed"))?)),
        Err(_) => Ok(None),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_topology(path: &Path) -> Result<NetworkTopology> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    NetworkTopology::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// A limited-radio-chain label with a macro chain count overrides the file:
/// small cells get one chain, the macro the label's count.
fn apply_label(mut topology: NetworkTopology, label: SettingLabel) -> NetworkTopology {
    if let (RadioRegime::Limited, Some(k)) = (label.setting.radio_chains, label.macro_chains) {
        for s in &mut topology.stations {
            s.radio_chains = if s.is_macro() { k } else { 1 };
        }
    }
    topology
}

fn cmd_generate(args: &GenerateArgs) -> Result<u8> {
    let mut config = match &args.config {
        Some(path) => read_json(path)?,
        None => GeneratorConfig::default(),
    };
    args.flags.apply(&mut config)?;
    let topology = generate(&config)?;
    emit(&topology.to_json(), args.out.as_deref())?;
    Ok(0)
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let topology = apply_label(read_topology(&args.topology)?, args.setting);
    let solution = solve_objective(&topology, args.setting.setting, args.objective)?;
    let record = SolutionRecord::new(&solution, args.setting, &topology)?;
    emit(&serde_json::to_string_pretty(&record)?, args.out.as_deref())?;
    Ok(0)
}

fn cmd_schedule(args: &ScheduleArgs) -> Result<u8> {
    let record: SolutionRecord = read_json(&args.solution)?;
    let topology = apply_label(read_topology(&args.topology)?, record.setting);
    let sched = schedule(&topology, &record.p_first)?;
    emit(&serde_json::to_string_pretty(&sched)?, args.out.as_deref())?;
    Ok(0)
}

fn cmd_validate(args: &ValidateArgs) -> Result<u8> {
    let record: SolutionRecord = read_json(&args.solution)?;
    let topology = apply_label(read_topology(&args.topology)?, record.setting);
    let sched: Schedule = read_json(&args.schedule)?;
    let report = validate_schedule(&topology, &record.p_first, &record.demand(), &sched);
    emit(&report.to_json(), args.out.as_deref())?;
    Ok(if report.is_valid() { 0 } else { EXIT_VIOLATIONS })
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<u8> {
    let mut spec = match &args.spec {
        Some(path) => read_json(path)?,
        None => ExperimentSpec::default(),
    };
    args.flags.apply(&mut spec.generator)?;
    if let Some(n) = args.trials {
        spec.num_trials = n;
    }
    let trials = run_experiment(&spec)?;
    write_results(&spec, &trials, &args.out_dir)?;
    let cases: Vec<_> = trials.iter().flat_map(|t| &t.cases).collect();
    let realizable = cases.iter().filter(|c| c.realizable()).count();
    eprintln!(
        "{} trials, {realizable}/{} solved cases scheduled without violations; results in {}",
        trials.len(),
        cases.len(),
        args.out_dir.display()
    );
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<FormulationError>() {
        Some(FormulationError::Infeasible | FormulationError::Unbounded | FormulationError::InfeasibleFloor(_)) => {
            EXIT_INFEASIBLE
        }
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Schedule(a) => cmd_schedule(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
