//! `dcset`: batch front end for scenes, certificates and figures.
//!
//! Exit codes: 0 consistent or valid, 1 falsified or invalid, 2
//! inconclusive, 3 usage error or malformed scene, 4 internal error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "dcset", version, about = "Certificates and counterexamples for planar sets with DC distance functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Flags {
    /// Grid counts for the certification sweep.
    #[arg(long, global = true, value_delimiter = ',', default_values_t = [8usize, 16, 32])]
    pub n_sweep: Vec<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Mode::Clamped)]
    pub mode: Mode,
    /// Midpoint-defect tolerance relative to the ball radius.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Directory for artifacts; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Cone half-slope for the witness search.
    #[arg(long, global = true, default_value = "1")]
    pub u: String,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Check a scene: (s)-set clauses and fill assembly.
    Validate { scene: PathBuf },
    /// Build Ψ_n over the n-sweep and test local concavity.
    Certify { scene: PathBuf },
    /// Search for cone-emptiness witnesses and the convexity blow-up.
    Falsify { scene: PathBuf },
    /// Components, isolated points, singular tangent points and decomposition.
    Analyze { scene: PathBuf },
    /// SVG of the set with cone and witness overlays.
    Render { scene: PathBuf },
    /// Write a built-in scene (cantor-d<k>, tent-sset, three-envelope-sset, staircase-isolated, corner, square).
    GenExample { name: String },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Global,
    Clamped,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_INCONCLUSIVE: u8 = 2;
pub const EXIT_USAGE: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = std::panic::catch_unwind(|| commands::run(&cli));
    match outcome {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(e)) => {
            eprintln!("dcset: {}", e.message);
            ExitCode::from(e.code)
        }
        Err(_) => {
            eprintln!("dcset: internal error");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
