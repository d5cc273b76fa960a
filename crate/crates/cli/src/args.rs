use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Pathwise Young and rough integrals via fractional derivatives, with
/// variability diagnostics and exact Gaussian path samplers.
///
/// Every subcommand also reads `--config FILE`, a plain-text file of
/// `key=value` lines naming long flags (`alpha=0.6`, `out=result.json`,
/// `no-base-correction=true`). Flags on the command line override the file.
/// `ROUGHINT_THREADS` caps the worker pool.
#[derive(Parser, Debug)]
#[command(name = "roughint", version, about, args_override_self = true)]
pub struct Cli {
    /// key=value configuration file; command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Zähle integral of X (or φ(X)) against Y
    IntegrateYoung(YoungArgs),
    /// Compensated rough integral of φ(X) against Y
    IntegrateRough(RoughArgs),
    /// Build a multiplicative functional and write its node table
    Lift(LiftArgs),
    /// L^p norm of the Riesz potential of a measure along a path
    Variability(VariabilityArgs),
    /// Weighted segment functional with its occupation bound
    SegmentCheck(SegmentArgs),
    /// Sample a fractional Brownian motion (or another Gaussian family)
    FbmSample(SampleArgs),
    /// Gaussian sufficient conditions: C_μ and Monte Carlo expectations
    GaussCheck(GaussArgs),
    /// Evaluate one integral at several orders α
    AlphaSweep(SweepArgs),
    /// Run a built-in verification suite
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutArg {
    /// Output file (standard output when omitted)
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PairArgs {
    /// Integrand path, CSV with header t,x1,...,xm
    #[arg(long, value_name = "CSV")]
    pub x: PathBuf,
    /// Integrator path on the same grid (defaults to X)
    #[arg(long, value_name = "CSV")]
    pub y: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct YoungArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Coefficient NAME[:p1,p2,...] or a coefficient spec file
    #[arg(long)]
    pub phi: Option<String>,
    /// Order α; chosen from estimated Hölder exponents when omitted
    #[arg(long, conflicts_with = "alpha_sweep")]
    pub alpha: Option<f64>,
    /// Comma-separated orders to evaluate
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub alpha_sweep: Option<Vec<f64>>,
    /// Drop the X(a) correction and the boundary term
    #[arg(long)]
    pub no_base_correction: bool,
    /// Quadrature points per grid cell
    #[arg(long, default_value_t = 6)]
    pub points_per_cell: usize,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone)]
pub struct LiftSource {
    /// Node table with rows i,j,s_index,t_index,value
    #[arg(long, value_name = "CSV")]
    pub tensor: Option<PathBuf>,
    /// Lift built when no tensor is given: auto, smooth, geometric1d or dyadic:K
    #[arg(long, default_value = "auto")]
    pub lift: String,
    /// Declared Hölder exponent β of the lift (estimated when omitted)
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct RoughArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub source: LiftSource,
    /// Coefficient NAME[:p1,p2,...] or a coefficient spec file
    #[arg(long, default_value = "identity")]
    pub phi: String,
    /// Order α; must lie in the admissible window
    #[arg(long, conflicts_with = "auto")]
    pub alpha: Option<f64>,
    /// Pick α from the admissibility window (the default without --alpha)
    #[arg(long)]
    pub auto: bool,
    /// Variability exponent s for BV coefficients
    #[arg(long)]
    pub s: Option<f64>,
    /// Segment exponent ε for BV coefficients (sets α = β(1+s) - ε)
    #[arg(long)]
    pub eps: Option<f64>,
    /// A-priori bound to evaluate: smooth:λ or bv:s,ε
    #[arg(long)]
    pub bound: Option<String>,
    /// Also evaluate at these orders
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub sweep: Option<Vec<f64>>,
    /// Quadrature points per grid cell
    #[arg(long, default_value_t = 6)]
    pub points_per_cell: usize,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftMethod {
    Smooth,
    #[value(name = "geometric1d")]
    Geometric1d,
    Dyadic,
}

#[derive(Args, Debug, Clone)]
pub struct LiftArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long, value_enum)]
    pub method: LiftMethod,
    /// Dyadic level (method dyadic)
    #[arg(long)]
    pub level: Option<u32>,
    /// Exponent β for the 2β-constant in the validation report
    #[arg(long)]
    pub beta: Option<f64>,
    /// Random node triples for the Chen check
    #[arg(long, default_value_t = 1000)]
    pub triples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Node table output
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
    /// Also write the X path the table lifts (the level-K interpolant for
    /// the dyadic method)
    #[arg(long, value_name = "CSV")]
    pub path_out: Option<PathBuf>,
    /// Validation report (standard output when omitted)
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct VariabilityArgs {
    #[arg(long, value_name = "CSV")]
    pub x: PathBuf,
    /// Measure spec file (atoms=..., density=...)
    #[arg(long, value_name = "FILE")]
    pub measure: PathBuf,
    #[arg(long)]
    pub s: f64,
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone)]
pub struct SegmentArgs {
    #[arg(long, value_name = "CSV")]
    pub x: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub measure: PathBuf,
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub eps: f64,
    /// Thin the path to at most this many cells (0 keeps every cell)
    #[arg(long, default_value_t = 512)]
    pub max_cells: usize,
    #[arg(long, default_value_t = 2)]
    pub points_per_cell: usize,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    /// Hurst index
    #[arg(long = "H", value_name = "H", default_value_t = 0.4)]
    pub hurst: f64,
    /// Covariance family (fbm:H, bm, ou:λ, const:c); overrides --H
    #[arg(long)]
    pub family: Option<String>,
    /// Number of independent components
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Number of grid cells
    #[arg(long, default_value_t = 4096)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Replica index within the seeded stream
    #[arg(long, default_value_t = 0)]
    pub replica: u64,
    /// Path output
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
    /// Sampler metadata (standard output when omitted)
    #[arg(long, value_name = "FILE")]
    pub meta: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GaussArgs {
    /// Covariance family (fbm:H, bm, ou:λ, const:c)
    #[arg(long)]
    pub family: String,
    /// Measure spec file for μ
    #[arg(long, value_name = "FILE")]
    pub mu: PathBuf,
    #[arg(long)]
    pub s: f64,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 200)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1)]
    pub m: usize,
    /// Grid cells per sampled path
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Integrability exponent of the variability norm
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[arg(long, default_value_t = 128)]
    pub max_cells: usize,
    /// Also run the empirical covariance check with this many replicas
    #[arg(long)]
    pub covariance_replicas: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Young,
    Rough,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[arg(long, value_enum, default_value = "young")]
    pub kind: SweepKind,
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub source: LiftSource,
    #[arg(long)]
    pub phi: Option<String>,
    /// Orders to evaluate; when omitted, --count interior points of the window
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub alphas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    pub count: usize,
    #[arg(long)]
    pub s: Option<f64>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Smooth,
    Lift,
    Rough,
    Potentials,
    Gaussian,
    All,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArg,
}
