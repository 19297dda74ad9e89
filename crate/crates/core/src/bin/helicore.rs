use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use helicore::cli_io::{parse_config, parse_eps_list, run, Command, RunOptions};

#[derive(Parser)]
#[command(name = "helicore", version, about = "Concentrated helical vortices with swirl")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Maximize the energy and write the rotating state.
    Solve(Common),
    /// Integrate a state in time.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Output directory of an earlier `solve`.
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// End time (default: a quarter turn of the pattern).
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Lift a state to a 3D sample cloud and audit its structure.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Sweep eps and fit the concentration slopes.
    Scaling {
        #[command(flatten)]
        common: Common,
        /// Comma separated, e.g. 0.08,0.05,0.03.
        #[arg(long)]
        eps_list: Option<String>,
        /// Also write each row's vorticity field.
        #[arg(long)]
        snapshot_fields: bool,
    },
    /// Split the discrete Green function into singular and regular parts.
    GreenProbe(Common),
    /// Run the acceptance criteria.
    Selftest(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(n) = std::env::var("HELICORE_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("helicore: cannot size the thread pool: {e}");
                }
            }
            _ => {
                eprintln!("helicore: HELICORE_THREADS must be a positive integer, got '{n}'");
                return ExitCode::from(2);
            }
        }
    }
    let mut opts = RunOptions::default();
    let (cmd, common) = match cli.command {
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Evolve {
            common,
            snapshot,
            t_end,
            checkpoint_every,
        } => {
            opts.snapshot = snapshot;
            opts.t_end = t_end;
            opts.checkpoint_every = checkpoint_every;
            (Command::Evolve, common)
        }
        Cmd::Reconstruct {
            common,
            snapshot,
            samples,
        } => {
            opts.snapshot = snapshot;
            opts.samples = samples;
            (Command::Reconstruct, common)
        }
        Cmd::Scaling {
            common,
            eps_list,
            snapshot_fields,
        } => {
            if let Some(s) = eps_list {
                match parse_eps_list(&s) {
                    Ok(v) => opts.eps_list = Some(v),
                    Err(e) => {
                        eprintln!("helicore: {e}");
                        return ExitCode::from(2);
                    }
                }
            }
            opts.row_fields = snapshot_fields;
            (Command::Scaling, common)
        }
        Cmd::GreenProbe(c) => (Command::GreenProbe, c),
        Cmd::Selftest(c) => (Command::Selftest, c),
    };
    opts.out_dir = common.out;
    if let Some(p) = &common.config {
        match parse_config(p) {
            Ok(c) => opts.config = Some(c),
            Err(e) => {
                eprintln!("helicore {}: config stage failed: {e}", cmd.name());
                return ExitCode::from(2);
            }
        }
    }
    match run(cmd, &opts) {
        Ok(out) => {
            for l in &out.lines {
                println!("{l}");
            }
            if out.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("helicore {}: {e}", cmd.name());
            ExitCode::from(1)
        }
    }
}
