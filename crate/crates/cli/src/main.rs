use clap::{Parser, Subcommand};
use polywall_cli::summary::{EXIT_CONFIG, EXIT_RUNTIME};
use polywall_cli::{execute, parse_config, restart, PlanKind, RunSummary};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "polywall", version, about = "Polymer-wall channel flow experiments")]
struct Cli {
    /// `key = value` plan file; missing keys take the experiment's defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for records.csv, summary.json and checkpoints/.
    #[arg(long, global = true, default_value = "polywall-out")]
    out: PathBuf,
    /// Seed for the micro-kinetic ensembles (overrides the plan file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweep points and ensembles.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single channel-flow run.
    Run,
    /// Reynolds-number sweep at fixed friction ratio.
    SweepRe,
    /// Wall-slip sweep over alpha at fixed tau.
    SweepAlpha,
    /// Micro-kinetic closure and equilibrium checks.
    MicroVerify,
    /// Energy-budget residual order and energy monotonicity.
    EnergyAudit,
    /// Navier-Stokes against Euler error over a Reynolds sweep.
    InviscidLimit,
    /// Continue a run from a checkpoint file.
    Restart { checkpoint: PathBuf },
}

fn print_summary(summary: &RunSummary) {
    for note in &summary.notes {
        println!("note: {note}");
    }
    for c in &summary.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        println!("[{verdict}] criterion {} {}: {}", c.criterion, c.name, c.detail);
    }
    println!(
        "{} steps in {:.1} s",
        summary.total_steps, summary.wall_clock_seconds
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let kind = match cli.command {
        Command::Run | Command::Restart { .. } => PlanKind::SingleRun,
        Command::SweepRe => PlanKind::SweepRe,
        Command::SweepAlpha => PlanKind::SweepAlpha,
        Command::MicroVerify => PlanKind::MicroVerify,
        Command::EnergyAudit => PlanKind::EnergyAudit,
        Command::InviscidLimit => PlanKind::InviscidLimit,
    };
    let text = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG as u8);
            }
        },
        None => String::new(),
    };
    let mut plan = match parse_config(&text, Some(kind)) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Some(seed) = cli.seed {
        plan.seed = seed;
    }
    plan.output_dir = Some(cli.out.clone());
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_RUNTIME as u8);
        }
    }
    eprint!("{}", plan.echo_text());
    let result = match &cli.command {
        Command::Restart { checkpoint } => restart(&plan, checkpoint),
        _ => execute(&plan),
    };
    match result {
        Ok(summary) => {
            print_summary(&summary);
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("runtime error: {e}");
            ExitCode::from(EXIT_RUNTIME as u8)
        }
    }
}
