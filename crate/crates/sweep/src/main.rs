use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qam_mppm::{complexity::complexity_report, config::Mode, parse_config, run, RunError, RunOptions};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(name = "qam-mppm", version, about = "QAM-MPPM error-rate sweeps and detector cost tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an analytic + Monte-Carlo sweep described by a config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = ["ebn0", "popt"])]
        mode: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Frame budget per point and detector.
        #[arg(long)]
        trials: Option<u64>,
        /// CSV output path (overrides out.csv).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: QAM_MPPM_WORKERS or all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print per-frame operation counts of CMD and IMD.
    Complexity {
        #[arg(long = "N")]
        n: u32,
        #[arg(long = "w")]
        w: u32,
        #[arg(long = "MQ")]
        m_q: u32,
        #[arg(long = "Ns")]
        ns: u32,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Sweep {
            config,
            mode,
            seed,
            trials,
            out,
            workers,
        } => {
            let mut overrides = Vec::new();
            if let Some(m) = mode {
                overrides.push(("mode", m));
            }
            if let Some(s) = seed {
                overrides.push(("sim.seed", s.to_string()));
            }
            if let Some(t) = trials {
                overrides.push(("sim.trials", t.to_string()));
            }
            if let Some(o) = out {
                overrides.push(("out.csv", o.to_string_lossy().into_owned()));
            }
            let spec = match parse_config(&config, &overrides) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let opts = RunOptions {
                workers,
                ..Default::default()
            };
            match run(&spec, &opts) {
                Ok(runs) => {
                    for r in &runs {
                        println!("wrote {} ({} points)", r.csv.display(), r.rows.len());
                    }
                    if let Some(p) = &spec.out_plot {
                        println!("wrote {}", p.display());
                    }
                    if spec.mode == Mode::Popt {
                        log::info!("sweep_db column holds P_opt in dBm");
                    }
                    ExitCode::SUCCESS
                }
                Err(e @ RunError::Io { .. }) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
                Err(e @ RunError::Numeric { .. }) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_NUMERIC)
                }
            }
        }
        Command::Complexity { n, w, m_q, ns } => match complexity_report(n, w, m_q, ns) {
            Ok((_, text)) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
