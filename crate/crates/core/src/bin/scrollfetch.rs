use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scrollfetch::experiment::{run_matrix, write_outputs, Experiment};
use scrollfetch::metrics::ReportFormat;
use scrollfetch::traces::generate_user_trace;

/// Simulate short-video prefetch policies over throughput and swipe traces.
#[derive(Debug, Parser)]
#[command(name = "scrollfetch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every policy x throughput trace x user trace cell of a config.
    Run(RunArgs),
    /// Check a config and every file it references.
    Validate {
        config: PathBuf,
    },
    /// Generate a trace file.
    #[command(subcommand)]
    GenTrace(GenTrace),
}

#[derive(Debug, Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, env = "SCROLLFETCH_OUT")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<ReportFormat>,
    /// Base RNG seed; overrides the config's `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip the per-session JSONL event logs.
    #[arg(long)]
    no_event_logs: bool,
}

#[derive(Debug, Subcommand)]
enum GenTrace {
    /// Gaussian watch durations, redrawing non-positive samples, until the
    /// total reaches `--total`.
    User {
        #[arg(long)]
        mean: f64,
        #[arg(long)]
        std: f64,
        #[arg(long)]
        total: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { config } => validate(config),
        Command::GenTrace(GenTrace::User {
            mean,
            std,
            total,
            seed,
            out,
        }) => gen_user(mean, std, total, seed, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: RunArgs) -> Result<(), String> {
    let mut exp = Experiment::load(&args.config).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        exp.config.rng_seed = seed;
    }
    let format = args.format.unwrap_or(exp.config.format);
    // --out is relative to the working directory; output_dir to the config.
    let out = match (args.out, &exp.config.output_dir) {
        (Some(p), _) => p,
        (None, Some(p)) => args
            .config
            .parent()
            .map_or_else(|| p.clone(), |base| base.join(p)),
        (None, None) => PathBuf::from("scrollfetch-out"),
    };
    let output = run_matrix(&exp).map_err(|e| e.to_string())?;
    let written = write_outputs(&exp, &output, &out, format, !args.no_event_logs)
        .map_err(|e| e.to_string())?;
    println!(
        "{} sessions, {} files written to {}",
        output.sessions.len(),
        written.len(),
        out.display()
    );
    for r in output.report.reductions() {
        let pct = r
            .percent
            .map_or_else(|| "undefined".to_owned(), |p| format!("{p:.1}%"));
        println!(
            "{}/{} {} vs {}: {} -> {}",
            r.thru_trace,
            r.user_trace,
            r.metric.column(),
            r.baseline,
            format_args!("{:.3}", r.baseline_value),
            format_args!("{:.3} ({pct})", r.proposed),
        );
    }
    Ok(())
}

fn validate(config: PathBuf) -> Result<(), String> {
    match Experiment::load_collecting(&config) {
        Ok(exp) => {
            let s = exp.summary();
            println!("{}: ok", config.display());
            println!(
                "playlist: {} videos, {} segments each",
                s.videos, s.segments_per_video
            );
            for (name, dur, mean) in &s.throughput {
                println!("throughput {name}: {dur:.1}s, mean {mean:.1} kbps");
            }
            for (name, desc) in &s.users {
                println!("user {name}: {desc}");
            }
            println!("sessions: {}", exp.cells().len());
            Ok(())
        }
        Err(errors) => {
            for e in &errors {
                eprintln!("{}: {e}", config.display());
            }
            Err(format!("{} problem(s) found", errors.len()))
        }
    }
}

fn gen_user(mean: f64, std: f64, total: f64, seed: u64, out: Option<PathBuf>) -> Result<(), String> {
    let ok = mean.is_finite() && mean > 0.0 && std.is_finite() && std >= 0.0 && total.is_finite() && total > 0.0;
    if !ok {
        return Err("need --mean > 0, --std >= 0, --total > 0".into());
    }
    let text = generate_user_trace(mean, std, total, seed).to_text();
    match out {
        Some(p) => std::fs::write(&p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
