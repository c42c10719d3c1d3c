//! `ri`: file-driven symbolic and numeric runs with a manifest per run.

mod commands;
mod manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "ri", version, about = "Decorated-tree algebra and grid models")]
pub struct Cli {
    /// Overrides the root seed of the configured noise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Sector construction.
    Sector {
        #[command(subcommand)]
        cmd: SectorCmd,
    },
    /// Δ_{ε,p} (or Δ⁺) of a tree.
    Coproduct {
        tree: String,
        /// Rule or params file providing the degree data.
        #[arg(long)]
        rule: PathBuf,
        #[arg(long, default_value = "0")]
        eps: String,
        #[arg(long, default_value = "inf")]
        p: String,
        /// Use Δ⁺ on forests instead of Δ.
        #[arg(long)]
        plus: bool,
        /// Use the graphical formula.
        #[arg(long)]
        graphical: bool,
    },
    /// Phase-transition sets I_ε, J_p and ε₀.
    Phase {
        rule: PathBuf,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long, default_value = "2")]
        p: String,
    },
    /// Preparation maps.
    Prep {
        #[command(subcommand)]
        cmd: PrepCmd,
    },
    /// Grid models.
    Model {
        #[command(subcommand)]
        cmd: ModelCmd,
    },
    /// Algebraic and numeric identity checks.
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
    /// BPHZ constants.
    Bphz {
        #[command(subcommand)]
        cmd: BphzCmd,
    },
    /// Scaling exponents.
    Scaling {
        #[command(subcommand)]
        cmd: ScalingCmd,
    },
}

#[derive(Subcommand, Debug)]
pub enum SectorCmd {
    /// Ordered basis with degrees and the filtration.
    Gen {
        rule: PathBuf,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long, default_value = "2")]
        p: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum PrepCmd {
    /// Checks properties (a)-(e) for R_c.
    Verify {
        counterterms: PathBuf,
        #[arg(long)]
        rule: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum ModelCmd {
    Build { config: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum VerifyCmd {
    Comparison {
        config: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    Dpidd {
        config: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 3)]
        max_omega: usize,
    },
    Route {
        config: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    Hopf { rule: PathBuf },
    Triangularity { rule: PathBuf },
}

#[derive(Subcommand, Debug)]
pub enum BphzCmd {
    Solve {
        config: PathBuf,
        #[arg(long)]
        mode: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ScalingCmd {
    Fit { config: PathBuf, tree: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
