use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use graphsplit::projection::ProjectionMode;
use graphsplit::SolverSettings;

#[derive(Debug, Parser)]
#[command(name = "graphsplit", version, about = "Graph-form convex solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem file and print a JSON report.
    Solve(SolveArgs),
    /// Write a random instance of one of the benchmark families.
    Generate(GenerateArgs),
    /// Run a sweep over families and sizes and write CSV timings.
    Bench(BenchArgs),
    /// Equilibrate a matrix and report the scaling quality.
    Equilibrate(EquilibrateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SettingsArgs {
    /// Initial penalty parameter.
    #[arg(long, env = "GRAPHSPLIT_RHO", default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, env = "GRAPHSPLIT_ABS_TOL", default_value_t = 1e-4)]
    pub abs_tol: f64,
    #[arg(long, env = "GRAPHSPLIT_REL_TOL", default_value_t = 1e-3)]
    pub rel_tol: f64,
    #[arg(long, env = "GRAPHSPLIT_MAX_ITER", default_value_t = 10_000)]
    pub max_iter: usize,
    /// Over-relaxation parameter in (0, 2).
    #[arg(long, env = "GRAPHSPLIT_ALPHA", default_value_t = 1.7)]
    pub alpha: f64,
    #[arg(long, env = "GRAPHSPLIT_NO_ADAPTIVE_RHO")]
    pub no_adaptive_rho: bool,
    #[arg(long, env = "GRAPHSPLIT_NO_EQUIL")]
    pub no_equil: bool,
    /// Use the iterative (CGLS) projection instead of a cached factorization.
    #[arg(long, env = "GRAPHSPLIT_INDIRECT")]
    pub indirect: bool,
    /// Also stop when the duality gap is small.
    #[arg(long, env = "GRAPHSPLIT_GAP_STOP")]
    pub gap_stop: bool,
    /// Print per-iteration progress to stderr.
    #[arg(long, short, env = "GRAPHSPLIT_VERBOSE")]
    pub verbose: bool,
}

impl SettingsArgs {
    pub fn to_settings(&self) -> SolverSettings {
        SolverSettings {
            rho0: self.rho,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            alpha: self.alpha,
            adaptive_rho: !self.no_adaptive_rho,
            equilibrate: !self.no_equil,
            gap_stop: self.gap_stop,
            projection: if self.indirect {
                ProjectionMode::Indirect
            } else {
                ProjectionMode::Direct
            },
            verbose: self.verbose,
            ..SolverSettings::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem file (JSON).
    pub problem: PathBuf,
    #[command(flatten)]
    pub settings: SettingsArgs,
    /// Leave x, y, mu, nu out of the report.
    #[arg(long)]
    pub summary_only: bool,
    /// Write the report here instead of stdout.
    #[arg(long, short, env = "GRAPHSPLIT_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub family: String,
    /// Rows (risk factors for portfolio).
    #[arg(long)]
    pub m: usize,
    /// Columns (assets for portfolio).
    #[arg(long)]
    pub n: usize,
    #[arg(long, env = "GRAPHSPLIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Problem file to write; metadata goes to `<stem>.meta.json`.
    #[arg(long, short, env = "GRAPHSPLIT_OUT")]
    pub out: PathBuf,
    /// Store the matrix in a raw binary file next to the problem file.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated family names, or `all`.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub families: Vec<String>,
    /// Target nonzero counts, e.g. `1e2,1e4`.
    #[arg(long, value_delimiter = ',', default_value = "1e2,1e4")]
    pub nnz: Vec<String>,
    /// Ratios of the long to the short side.
    #[arg(long, value_delimiter = ',', default_value = "2,10")]
    pub aspects: Vec<usize>,
    /// First seed; instances use `seed..seed + seeds`.
    #[arg(long, env = "GRAPHSPLIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Seeds per (family, size, aspect).
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, env = "GRAPHSPLIT_JOBS", default_value_t = 1)]
    pub jobs: usize,
    /// Per-instance CSV; the summary goes to `<stem>_summary.csv`.
    #[arg(long, short, env = "GRAPHSPLIT_OUT", default_value = "bench.csv")]
    pub out: PathBuf,
    /// Refuse instances whose matrix has more entries than this.
    #[arg(long, env = "GRAPHSPLIT_MAX_ELEMENTS", default_value_t = 20_000_000)]
    pub max_elements: usize,
    #[command(flatten)]
    pub settings: SettingsArgs,
}

#[derive(Debug, Args)]
pub struct EquilibrateArgs {
    /// Matrix Market or raw binary matrix.
    pub matrix: PathBuf,
    /// Regularization; defaults to (m + n) sqrt(machine epsilon).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Stopping tolerance; defaults to 1e-4 sqrt(max(m, n)).
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    /// Deviation tolerance used for `within_tol` in the report.
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
    /// Rescale D and E so that ||DAE||_F / sqrt(min(m, n)) = 1.
    #[arg(long)]
    pub rescale: bool,
    /// Directory for d.txt, e.txt and report.json.
    #[arg(long, short, env = "GRAPHSPLIT_OUT", default_value = ".")]
    pub out: PathBuf,
}
