use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use softcbf::filter::FilterMode;
use softcbf::sim::{self, Outcome, Scenario, PRESET_NAMES};

const EXIT_ERROR: u8 = 1;
const EXIT_UNSAFE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(author, version, about = "Soft-maximum composite barrier safety filter simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write logs
    Run(RunArgs),
    /// Check a scenario without running it
    Validate(SourceArgs),
    /// Built-in scenarios
    #[command(subcommand)]
    Presets(PresetCommand),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Scenario JSON file
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Built-in scenario name (see `presets list`)
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct SourceArgs {
    #[command(flatten)]
    source: Source,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Abort on an infeasible QP
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Pass the desired control through on an infeasible QP
    #[arg(long)]
    lenient: bool,
    /// Also write epochs.jsonl with per-scan barrier primitives
    #[arg(long)]
    epochs: bool,
}

#[derive(Subcommand)]
enum PresetCommand {
    /// List preset names
    List,
    /// Print a preset as scenario JSON
    Show { name: String },
}

fn load(source: &Source) -> Result<Scenario, String> {
    match (&source.scenario, &source.preset) {
        (Some(path), _) => Scenario::load(path).map_err(|e| e.to_string()),
        (None, Some(name)) => sim::preset(name).ok_or_else(|| format!("unknown preset '{name}'")),
        (None, None) => Err("either --scenario or --preset is required".into()),
    }
}

fn run(args: RunArgs) -> u8 {
    let mut scenario = match load(&args.source) {
        Ok(s) => s,
        Err(e) => {
            error!("{e}");
            return EXIT_ERROR;
        }
    };
    if let Some(seed) = args.seed {
        scenario.run.seed = seed;
    }
    if args.strict {
        scenario.filter_mode = FilterMode::Strict;
    } else if args.lenient {
        scenario.filter_mode = FilterMode::Lenient;
    }
    let diagnostics = sim::validate(&scenario);
    for d in &diagnostics {
        warn!("{d}");
    }
    info!("running '{}' ({})", scenario.name, scenario.plant.as_str());
    let log = match sim::run(&scenario) {
        Ok(l) => l,
        Err(e) => {
            error!("{e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = log.write(&args.out, args.epochs) {
        error!("{e}");
        return EXIT_ERROR;
    }
    let s = &log.summary;
    println!(
        "{}: {:?} after {:.3} s, min h = {:.3e}, min psi1 = {:.3e}, goal distance = {:.3} m, active = {}, infeasible = {}, penetrating steps = {}",
        s.name,
        s.outcome,
        s.final_time,
        s.min_h,
        s.min_psi1,
        s.final_goal_distance,
        s.active_steps,
        s.infeasible_steps,
        s.penetrating_steps
    );
    if !s.message.is_empty() {
        println!("{}", s.message);
    }
    match s.outcome {
        Outcome::InfeasibleAbort => EXIT_INFEASIBLE,
        Outcome::IntegrationFailure => EXIT_ERROR,
        Outcome::Completed if s.safe => 0,
        Outcome::Completed => EXIT_UNSAFE,
    }
}

fn validate(args: SourceArgs) -> u8 {
    let scenario = match load(&args.source) {
        Ok(s) => s,
        Err(e) => {
            error!("{e}");
            return EXIT_ERROR;
        }
    };
    let diagnostics = sim::validate(&scenario);
    if diagnostics.is_empty() {
        println!("{}: ok", scenario.name);
        0
    } else {
        for d in &diagnostics {
            println!("{}: {d}", scenario.name);
        }
        EXIT_ERROR
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
        Command::Presets(PresetCommand::List) => {
            for name in PRESET_NAMES {
                let s = sim::preset(name).expect("listed preset exists");
                println!("{name:<14} {}", s.description);
            }
            0
        }
        Command::Presets(PresetCommand::Show { name }) => match sim::preset(&name) {
            Some(s) => {
                println!("{}", s.to_json());
                0
            }
            None => {
                error!("unknown preset '{name}'");
                EXIT_ERROR
            }
        },
    };
    ExitCode::from(code)
}
