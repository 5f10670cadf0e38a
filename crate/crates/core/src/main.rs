use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use invariant_kit::cli::{check_mu, run, RunOptions, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "invariant-kit", about = "Set-invariance verification with minimal barrier functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every job of a problem config and write report.json plus CSVs.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for randomly drawn initial states.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads for per-point parallelism.
        #[arg(long, env = "INVARIANT_KIT_THREADS")]
        threads: Option<usize>,
    },
    /// Classify a comparison function mu(w) given as an expression in w.
    CheckMu {
        #[arg(allow_hyphen_values = true)]
        expr: String,
        /// Declare mu locally Lipschitz near 0.
        #[arg(long)]
        lipschitz: bool,
        /// Declare the integral of 1/mu divergent near 0.
        #[arg(long)]
        divergent: bool,
    },
    /// Print the version.
    Version,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors must not collide with the "inconclusive" exit code
            return if e.use_stderr() { code(EXIT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run { config, out, seed, threads } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: cannot configure {n} threads: {e}");
                    return code(EXIT_ERROR);
                }
            }
            match run(&config, &RunOptions { out_dir: out, seed }) {
                Ok(o) => {
                    for j in &o.report.jobs {
                        println!("[{:02}] {:<18} {}", j.index, j.job, serde_json::to_value(j.status).unwrap().as_str().unwrap_or("?"));
                        if let Some(err) = j.result.get("error") {
                            eprintln!("error: {}", err.as_str().unwrap_or_default());
                        }
                    }
                    println!("report: {}", o.report_path.display());
                    code(o.exit_code)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    code(EXIT_ERROR)
                }
            }
        }
        Command::CheckMu { expr, lipschitz, divergent } => match check_mu(&expr, lipschitz, divergent) {
            Ok((c, text)) => {
                println!("{text}");
                code(c)
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(EXIT_ERROR)
            }
        },
        Command::Version => {
            println!("invariant-kit {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
    }
}
