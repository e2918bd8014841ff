//! `morse`: run scenes, list fixtures, sweep Fredholm families, continue between scenes,
//! and export flow lines as CSV.
//!
//! Exit codes: 0 success, 2 Morse or genericity violation, 1 any other error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use morse_core::fredholm::{sweep, SweepSpec};
use morse_core::scene::{export_flows, load_scene, run_continuation, run_pipeline, FIXTURES};
use morse_core::MorseError;

#[derive(Parser)]
#[command(name = "morse", version, about = "Numerical Morse homology over GF(2)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on a scene file or fixture name and print the JSON report.
    Run {
        scene: String,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in fixtures.
    Fixtures,
    /// Fredholm index checks.
    Fredholm {
        #[command(subcommand)]
        action: FredholmCommand,
    },
    /// Continuation map along the convex homotopy from scene A to scene B.
    Continue { scene_a: String, scene_b: String },
    /// Write critical points and resolved flow lines as CSV tables into a directory.
    ExportFlows { scene: String, dir: PathBuf },
}

#[derive(Subcommand)]
enum FredholmCommand {
    /// Random tanh-profile families per domain kind, from a TOML spec file.
    Sweep { spec: PathBuf },
}

fn violation(e: &MorseError) -> bool {
    matches!(e, MorseError::DegenerateCritical { .. } | MorseError::NonGeneric(_) | MorseError::NotAComplex { .. })
}

fn fail(e: MorseError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if violation(&e) { 2 } else { 1 })
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), MorseError> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(MorseError::from),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = std::time::Instant::now();
    let code = match cli.command {
        Command::Run { scene, out } => {
            let r = load_scene(&scene).and_then(|cfg| run_pipeline(&cfg));
            match r {
                Ok(rep) => match emit(&rep.to_json(), out.as_ref()) {
                    Ok(()) => {
                        for w in &rep.warnings {
                            eprintln!("warning: {w}");
                        }
                        ExitCode::from(rep.status.exit_code() as u8)
                    }
                    Err(e) => fail(e),
                },
                Err(e) => fail(e),
            }
        }
        Command::Fixtures => {
            for (name, what) in FIXTURES {
                println!("{name:<28} {what}");
            }
            ExitCode::SUCCESS
        }
        Command::Fredholm { action: FredholmCommand::Sweep { spec } } => {
            let spec = std::fs::read_to_string(&spec).map_err(MorseError::from).and_then(|t| {
                toml::from_str::<SweepSpec>(&t).map_err(|e| MorseError::Parse { context: spec.display().to_string(), message: e.to_string() })
            });
            match spec.and_then(|s| sweep(&s)) {
                Ok(rep) => {
                    println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
                    if rep.matched == rep.total {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("index formula mismatch in {} of {} families", rep.total - rep.matched, rep.total);
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Continue { scene_a, scene_b } => {
            match load_scene(&scene_a).and_then(|a| load_scene(&scene_b).and_then(|b| run_continuation(&a, &b))) {
                Ok(rep) => {
                    println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::ExportFlows { scene, dir } => match load_scene(&scene).and_then(|cfg| export_flows(&cfg, &dir)) {
            Ok(names) => {
                for n in names {
                    println!("{}", dir.join(n).display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    };
    eprintln!("elapsed: {:.3} s", started.elapsed().as_secs_f64());
    code
}
