use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smlab::config::{Command, ExperimentConfig};
use smlab::experiments::REGISTRY;
use smlab::report::{self, RunError};

#[derive(Parser)]
#[command(name = "smlab", version, about = "Stein-Malliavin numerics experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Reference-law catalog: g* quadrature, density round trip, A/B signs, growth checker
    #[command(after_help = columns(Command::Catalog))]
    Catalog(RunArgs),
    /// Stein equation residuals and derivative-bound constants
    #[command(after_help = columns(Command::Stein))]
    Stein(RunArgs),
    /// Wiener chaos product formula and fourth-moment ladder
    #[command(after_help = columns(Command::Chaos))]
    Chaos(RunArgs),
    /// NP bound on exact constructions
    #[command(after_help = columns(Command::Npbound))]
    Npbound(RunArgs),
    /// Wiener-Poisson product formula and fourth-moment theorem
    #[command(after_help = columns(Command::Wp))]
    Wp(RunArgs),
    /// fGn bilinear functional moment ladder and scaling probe
    #[command(after_help = columns(Command::Fbm))]
    Fbm(RunArgs),
    /// Print the experiment registry
    List {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; defaults apply to anything left out
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.json, CSV tables and manifest.json
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Print the report as JSON instead of a verdict table
    #[arg(long)]
    json: bool,
}

fn columns(command: Command) -> String {
    let e = REGISTRY.iter().find(|e| e.command == command).expect("registered");
    let mut s = String::from("CSV outputs:\n");
    for (file, cols) in e.outputs {
        s.push_str(&format!("  {file}: {cols}\n"));
    }
    s
}

fn list(json: bool) {
    if json {
        let rows: Vec<_> = REGISTRY
            .iter()
            .map(|e| {
                serde_json::json!({
                    "name": e.command.name(),
                    "description": e.description,
                    "outputs": e.outputs.iter().map(|(f, c)| serde_json::json!({"file": f, "columns": c.split(',').collect::<Vec<_>>()})).collect::<Vec<_>>(),
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows).expect("registry serializes"));
    } else {
        for e in &REGISTRY {
            println!("{:<8} {}", e.command.name(), e.description);
        }
    }
}

fn run(command: Command, args: RunArgs) -> Result<bool, RunError> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::load(p).map_err(RunError::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Config(e.into()))?;
    let rep = pool.install(|| report::run(command, &config, &args.out))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
    } else {
        for v in &rep.verdicts {
            println!("{} {:<40} {}", if v.passed { "PASS" } else { "FAIL" }, v.name, v.detail);
        }
        println!(
            "{}: {} of {} checks passed in {:.1} s; config {} seed {}; artifacts in {}",
            command.name(),
            rep.verdicts.iter().filter(|v| v.passed).count(),
            rep.verdicts.len(),
            rep.wall_time_s,
            &rep.config_hash[..12],
            rep.seed,
            args.out.display()
        );
    }
    Ok(rep.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::List { json } => {
            list(json);
            return ExitCode::SUCCESS;
        }
        Cmd::Catalog(a) => (Command::Catalog, a),
        Cmd::Stein(a) => (Command::Stein, a),
        Cmd::Chaos(a) => (Command::Chaos, a),
        Cmd::Npbound(a) => (Command::Npbound, a),
        Cmd::Wp(a) => (Command::Wp, a),
        Cmd::Fbm(a) => (Command::Fbm, a),
    };
    match run(command, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("smlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
