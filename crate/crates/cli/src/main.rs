//! `pascal`: find completion-latency classes of a clocked design, check
//! timing noninterference, and emit a fixed-latency hardened variant.

mod verbs;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pascal_core::enumerate::EngineMode;

/// Process exit codes.
pub mod exit {
    pub const SECURE: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const CHANNEL: u8 = 2;
    pub const INCONCLUSIVE: u8 = 3;
    pub const SAT: u8 = 10;
    pub const UNSAT: u8 = 20;
}

#[derive(Parser, Debug)]
#[command(name = "pascal", version, about = "Timing-class enumeration and compensator hardening")]
struct Cli {
    /// Log progress to standard error (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Static taint check: can a secret reach an observable?
    Check {
        file: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
    },
    /// Enumerate completion-latency classes and check noninterference.
    Enumerate {
        file: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Write a cycle/signal/value dump per class witness.
        #[arg(long)]
        trace: bool,
    },
    /// Enumerate, then emit the design with a fixed-latency output stage.
    Harden {
        file: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Take t_max from an earlier report instead of enumerating.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Random stimuli for the functional co-simulation check.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Re-enumerate a hardened design, expecting exactly one class.
    Verify {
        file: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        engine: EngineArgs,
        /// Report whose compensator t_max the single class must equal.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory for a verification report (none written if omitted).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Generate benchmark designs.
    Bench {
        #[command(subcommand)]
        which: BenchCommand,
    },
    /// Solve a DIMACS CNF file with the built-in solver.
    #[command(hide = true)]
    Sat { file: PathBuf },
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Square-and-multiply schedule with an n-bit secret key.
    Rsa {
        #[arg(long)]
        bits: u32,
        /// Cycles per squaring step.
        #[arg(long, default_value_t = 1)]
        cs: u32,
        /// Cycles per multiply step.
        #[arg(long, default_value_t = 1)]
        cm: u32,
        #[arg(long, default_value_t = 1)]
        setup: u32,
        #[arg(long, default_value = "corpus")]
        out_dir: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct DesignArgs {
    /// Pragma sidecar overriding the in-source pragmas.
    #[arg(long)]
    pragmas: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum EngineArg {
    Property,
    Instrumented,
}

#[derive(Args, Debug, Clone)]
struct EngineArgs {
    /// Exploration bound in cycles (defaults to the `@bound` pragma).
    #[arg(long)]
    bound: Option<u32>,
    #[arg(long, value_enum, default_value = "property")]
    engine: EngineArg,
    /// External DIMACS solver command (`{}` is replaced by the CNF path).
    #[arg(long, env = "PASCAL_SOLVER_CMD")]
    solver_cmd: Option<String>,
    /// Per-query solver time limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Fix a public input, as NAME=VALUE (decimal or 0x-hex).
    #[arg(long = "pin", value_name = "NAME=VALUE")]
    pins: Vec<String>,
}

impl EngineArgs {
    fn mode(&self) -> EngineMode {
        match self.engine {
            EngineArg::Property => EngineMode::Property,
            EngineArg::Instrumented => EngineMode::Instrumented,
        }
    }

    fn timeout(&self) -> Option<Duration> {
        self.timeout.map(Duration::from_secs_f64)
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match verbs::dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::ERROR)
        }
    }
}
