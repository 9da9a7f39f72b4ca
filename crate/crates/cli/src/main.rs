mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ptycho_core::PtychoError;

#[derive(Parser)]
#[command(name = "ptycho", version, about = "Blind ptychography: simulate data, certify scan schemes, build and check ambiguities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset (scheme, mask, object, diffraction patterns).
    Gen(GenArgs),
    /// Connectivity, mixing certificate and anchor scan of a scheme.
    CheckScheme(CheckArgs),
    /// Build an ambiguous (object, mask) pair from a dataset and verify it.
    Ambiguity(AmbiguityArgs),
    /// Compare a candidate pair with the ground truth of a dataset.
    Analyze(AnalyzeArgs),
    /// Mask phase constraint for a mask estimate.
    Mpc(MpcArgs),
    /// Object support constraint for an object block estimate.
    Osc(OscArgs),
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BoundaryArg {
    Torus,
    Dirichlet,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Fixture {
    Ex0,
    Ex31,
}

#[derive(Args, Clone)]
pub struct SchemeArgs {
    /// Object side length in pixels.
    #[arg(long)]
    pub n: Option<usize>,
    /// Mask side length in pixels.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum, default_value = "torus")]
    pub boundary: BoundaryArg,
    /// Raster scan with this step.
    #[arg(long, conflicts_with_all = ["perturbed_tau", "scheme", "shifts"])]
    pub raster_tau: Option<usize>,
    /// Perturbed raster scan with this step (needs --delta1 and --delta2).
    #[arg(long, requires_all = ["delta1", "delta2"], conflicts_with_all = ["scheme", "shifts"])]
    pub perturbed_tau: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub delta1: Option<Vec<i64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub delta2: Option<Vec<i64>>,
    /// Explicit shifts in pixels, "k1,k2;k1,k2;...", first one (0,0).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "scheme")]
    pub shifts: Option<String>,
    /// Scheme file (scheme.json).
    #[arg(long)]
    pub scheme: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Two-block example geometry instead of a scheme (uses --m).
    #[arg(long, value_enum, conflicts_with_all = ["raster_tau", "perturbed_tau", "shifts", "scheme"])]
    pub fixture: Option<Fixture>,
    /// With --fixture ex0: the torus variant with n = m.
    #[arg(long, requires = "fixture")]
    pub periodic: bool,
    /// Mask phase range parameter in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Mask seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Object seed (default: mask seed + 1).
    #[arg(long, conflicts_with = "object")]
    pub object_seed: Option<u64>,
    /// Object from a cf64 file instead of a random draw.
    #[arg(long)]
    pub object: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Dataset directory; its scheme and object are used.
    #[arg(long, conflicts_with_all = ["raster_tau", "perturbed_tau", "shifts", "scheme"])]
    pub dataset: Option<PathBuf>,
    /// Object used for the support and the anchor scan.
    #[arg(long)]
    pub object: Option<PathBuf>,
    /// Exit with status 1 unless the scheme is certified mixing.
    #[arg(long)]
    pub require_mixing: bool,
    /// Bound on |p1|, |p2| in the certificate search.
    #[arg(long, default_value_t = 2)]
    pub max_p: i64,
    /// Neighbourhood radius for schemes with more than 64 shifts.
    #[arg(long)]
    pub radius: Option<i64>,
    /// Write the report here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq, Debug)]
pub enum AmbiguityKind {
    Scaling,
    Affine,
    Ex0,
    Ex31,
    Ex31Twin,
}

#[derive(Args)]
pub struct AmbiguityArgs {
    /// Dataset directory with the ground truth.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub kind: AmbiguityKind,
    /// Scaling constant (> 0).
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub c: f64,
    /// Mask phase offset in radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a: f64,
    /// Object phase offset in radians.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub b: f64,
    /// Phase slope in radians per pixel, "w1,w2".
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    pub w: String,
    /// Tighten the admissible support translations by this many rows.
    #[arg(long = "t0-tighten")]
    pub t0_tighten: Option<i64>,
    /// Data tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Output directory for the pair and report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Dataset directory with the ground truth.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory with object.cf64 and mask.cf64 of the candidate.
    #[arg(long)]
    pub candidate: PathBuf,
    /// Mask phase constraint delta (default 0.8 min(gamma, 1/2)).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Overrides the gamma recorded in the dataset.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// Write analysis.json here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct MpcArgs {
    /// True mask (cf64).
    #[arg(long)]
    pub mask: PathBuf,
    /// Mask estimate (cf64).
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

#[derive(Args)]
pub struct OscArgs {
    /// Object block estimate g0 (cf64, m x m).
    #[arg(long)]
    pub estimate: PathBuf,
    /// True object block f0 whose support box is the prior.
    #[arg(long, conflicts_with = "fbox")]
    pub block: Option<PathBuf>,
    /// Prior box "r0,c0,height,width" in block coordinates.
    #[arg(long)]
    pub fbox: Option<String>,
    /// Admissible translations "k1,k2;k1,k2;...".
    #[arg(long, allow_hyphen_values = true, conflicts_with = "t0_rows")]
    pub t0: Option<String>,
    /// Admissible translations {(a,0): a = 0..=HI}.
    #[arg(long)]
    pub t0_rows: Option<i64>,
}

/// Exit codes: 0 success, 1 property failed, 2 usage or validation, 3 I/O.
pub enum Failure {
    Property(String),
    Usage(String),
    Io(String),
}

impl From<PtychoError> for Failure {
    fn from(e: PtychoError) -> Self {
        match e {
            PtychoError::Io(_) | PtychoError::Json(_) | PtychoError::Format(_) => Failure::Io(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn init_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("PTYCHO_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Failure::Usage(format!("PTYCHO_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Failure::Usage("PTYCHO_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = init_threads().and_then(|_| match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::CheckScheme(a) => commands::check_scheme(&a),
        Command::Ambiguity(a) => commands::ambiguity(&a),
        Command::Analyze(a) => commands::analyze(&a),
        Command::Mpc(a) => commands::mpc(&a),
        Command::Osc(a) => commands::osc(&a),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Property(msg)) => {
            eprintln!("ptycho: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("ptycho: error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("ptycho: I/O error: {msg}");
            ExitCode::from(3)
        }
    }
}
