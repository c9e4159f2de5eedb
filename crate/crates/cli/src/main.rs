//! `tvgroup`: estimate grouped time-varying panel models and run simulation
//! studies.

mod estimate;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tvgroup::selection::LambdaGrid;
use tvgroup::simulation::{Dgp, DgpSpec, ErrorModel};
use tvgroup::FitConfig;

#[derive(Parser, Debug)]
#[command(
    name = "tvgroup",
    version,
    about = "Latent groups in time-varying panel regressions"
)]
struct Cli {
    /// Worker threads for grids and replications (default: all cores).
    #[arg(long, global = true, env = "FUSE_TIME_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the model to a long-format CSV panel.
    Estimate(estimate::EstimateArgs),
    /// Run a Monte Carlo study on one of the built-in designs.
    Simulate(simulate::SimulateArgs),
    /// Tabulate the B-spline basis on an even grid.
    Basis(output::BasisArgs),
    /// Write one simulated panel as CSV.
    Generate(output::GenerateArgs),
}

/// Estimator settings shared by `estimate` and `simulate`.
#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    /// Spline degree.
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Interior knots (default: max(floor((N T)^(1/7) - ln p), 1)).
    #[arg(long)]
    pub knots: Option<usize>,
    /// Tuning grid as lo:hi:n or lo:hi:n:log.
    #[arg(long)]
    pub lambda_grid: Option<LambdaGrid>,
    /// Exponent of the adaptive weights.
    #[arg(long, default_value_t = 2.0)]
    pub kappa: f64,
    /// ADMM augmented-Lagrangian penalty.
    #[arg(long, default_value_t = 1.0)]
    pub admm_penalty: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_iter: usize,
    /// ADMM primal-residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Distance below which two units share a group.
    #[arg(long, default_value_t = 1e-3)]
    pub tol_group: f64,
    /// Minimum group size as a share of N.
    #[arg(long, default_value_t = 0.05)]
    pub min_share: f64,
    /// Complexity weight of the information criterion (default 0.04 ln(n)/sqrt(n)).
    #[arg(long)]
    pub rho: Option<f64>,
}

impl FitArgs {
    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            lambda: 0.0,
            kappa: self.kappa,
            admm_penalty: self.admm_penalty,
            max_iter: self.max_iter,
            tol_admm: self.tol,
            tol_group: self.tol_group,
            min_group_share: self.min_share,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Iid,
    Ar1,
}

/// Simulation design flags shared by `simulate` and `generate`.
#[derive(Args, Debug, Clone)]
pub struct DesignArgs {
    /// Design: 1 trend, 2 trend plus exogenous regressor, 3 dynamic.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub dgp: u8,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub t: usize,
    #[arg(long, value_enum, default_value_t = ErrorKind::Iid)]
    pub errors: ErrorKind,
    /// Autoregressive coefficient for `--errors ar1`.
    #[arg(long, default_value_t = 0.3)]
    pub ar_coef: f64,
    /// Share of each series discarded at random.
    #[arg(long, default_value_t = 0.0)]
    pub missing: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl DesignArgs {
    pub fn spec(&self) -> anyhow::Result<DgpSpec> {
        let mut spec = DgpSpec::new(Dgp::from_id(self.dgp)?, self.n, self.t);
        spec.errors = match self.errors {
            ErrorKind::Iid => ErrorModel::Iid,
            ErrorKind::Ar1 => ErrorModel::Ar1(self.ar_coef),
        };
        spec.missing_share = self.missing;
        spec.validate()?;
        Ok(spec)
    }
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or malformed input, unwritable output.
    Input(anyhow::Error),
    /// Every candidate fit failed numerically.
    Numerical(anyhow::Error),
}

impl From<tvgroup::Error> for Failure {
    fn from(e: tvgroup::Error) -> Self {
        use tvgroup::Error as E;
        match e {
            E::AllLambdasFailed(_) | E::DegenerateFit | E::SingularGroupGram(_) => {
                Failure::Numerical(e.into())
            }
            other => Failure::Input(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<tvgroup::Error>() {
            Ok(core) => core.into(),
            Err(e) => Failure::Input(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

pub fn ensure_dir(dir: &PathBuf) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Estimate(a) => estimate::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Basis(a) => output::run_basis(a),
        Command::Generate(a) => output::run_generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
    }
}
