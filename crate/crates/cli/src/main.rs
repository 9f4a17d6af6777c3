use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{List, Number};

#[derive(Parser, Debug)]
#[command(name = "normground", version, about = "Normalized ground states and their stability")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SolverArgs {
    #[arg(long)]
    pub p: Option<Number>,
    #[arg(long = "n")]
    pub n: Option<usize>,
    #[arg(long = "L")]
    pub l: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Imaginary-time step.
    #[arg(long = "dt-imag")]
    pub dt_imag: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Width of the Gaussian seed.
    #[arg(long = "seed-width")]
    pub seed_width: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Minimize the Schrodinger-Poisson energy at one charge.
    Groundstate {
        #[arg(long)]
        rho: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        /// Fail when the state reaches the box boundary.
        #[arg(long)]
        strict: Option<bool>,
    },
    /// Scan charges, emit the energy curve and locate its sign change.
    ScanRho {
        /// `a,b,c`, `start:stop:step` or `log:start:stop:count`.
        #[arg(long)]
        rhos: Option<List>,
        #[command(flatten)]
        solver: SolverArgs,
        /// `fixed` or `dilated` (box edge scales as `(rho / rho_ref)^beta`).
        #[arg(long)]
        geometry: Option<String>,
        #[arg(long = "rho-ref")]
        rho_ref: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        #[arg(long)]
        warm: Option<bool>,
        #[arg(long)]
        bisections: Option<usize>,
    },
    /// Check subadditivity on a curve written by scan-rho.
    Subadd {
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(long = "n-rho")]
        n_rho: Option<usize>,
        #[arg(long = "n-mu")]
        n_mu: Option<usize>,
        #[arg(long = "tol-rel")]
        tol_rel: Option<f64>,
    },
    /// Non-additivity of the Hartree and power terms for two separated bumps.
    SplitTest {
        #[arg(long)]
        p: Option<Number>,
        #[arg(long = "n")]
        n: Option<usize>,
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        amp: Option<f64>,
        #[arg(long)]
        separations: Option<List>,
    },
    /// Evolve a Schrodinger-Poisson snapshot.
    Evolve {
        #[command(flatten)]
        evo: EvolveArgs,
        #[arg(long)]
        p: Option<Number>,
    },
    /// Perturb a ground state and track its distance to the orbit.
    Stability {
        #[arg(long)]
        rho: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        deltas: Option<List>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Perturbation correlation length in grid cells.
        #[arg(long)]
        smoothing: Option<f64>,
        /// Start from this snapshot instead of minimizing.
        #[arg(long = "in")]
        input: Option<PathBuf>,
    },
    /// Biharmonic energy of plateau profiles against their radius.
    BiharmNeg {
        #[arg(long = "N")]
        n_dim: Option<usize>,
        #[arg(long)]
        s0: Option<f64>,
        #[arg(long = "F", allow_hyphen_values = true)]
        f: Option<String>,
        #[arg(long = "Rn")]
        rn: Option<List>,
    },
    /// Biharmonic ground state on a grid of dimension 1 to 3.
    BiharmGround {
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long = "F", allow_hyphen_values = true)]
        f: Option<String>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Evolve a biharmonic snapshot.
    BiharmEvolve {
        #[command(flatten)]
        evo: EvolveArgs,
        #[arg(long = "F", allow_hyphen_values = true)]
        f: Option<String>,
    },
    /// Quick internal consistency checks.
    Selftest,
}

#[derive(Args, Debug, Clone, Default)]
pub struct EvolveArgs {
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Orbit reference snapshot; defaults to the input.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub strict: Option<bool>,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("NORMGROUND_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|e| anyhow::anyhow!("NORMGROUND_THREADS='{v}': {e}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| commands::run(cli.command, &cli.common));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
