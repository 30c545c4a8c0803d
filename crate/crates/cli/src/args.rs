use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fmcw_recon::experiments::BundledScene;
use fmcw_recon::forward::ForwardKind;
use fmcw_recon::recon::Method;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "FMCW_RECON_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "fmcw-recon",
    version,
    about = "Simulate FMCW radar scans and reconstruct volumetric scenes",
    after_help = "Set FMCW_RECON_THREADS to bound the number of worker threads."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Seed overriding the seeds in the configuration files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Request reproducible output. Reductions always run in a fixed order,
    /// so this only records the intent.
    #[arg(long, global = true)]
    pub reproducible: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a measurement dataset of a scene.
    Simulate(SimulateArgs),
    /// Fit a voxel or network field to a dataset.
    Reconstruct(ReconstructArgs),
    /// Coherent backprojection image of a dataset.
    Backproject(BackprojectArgs),
    /// Compare a reconstructed volume with a scene's ground truth.
    Evaluate(EvaluateArgs),
    /// Time the forward models.
    Bench(BenchArgs),
    /// Run one of the ablation sweeps.
    Ablate(AblateArgs),
    /// Check gradients against the adjoint identity and finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ForwardArg {
    Spectral,
    Time,
}

impl ForwardArg {
    pub fn kind(self) -> ForwardKind {
        match self {
            ForwardArg::Spectral => ForwardKind::SpectralClosedForm,
            ForwardArg::Time => ForwardKind::TimeDomain,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scene file ([bounds] and [scene]).
    #[arg(long)]
    pub scene: PathBuf,
    /// Chirp file ([chirp]); reference chirp when omitted.
    #[arg(long)]
    pub chirp: Option<PathBuf>,
    /// Aperture file ([aperture]); 90 x 4 reference cylinder when omitted.
    #[arg(long)]
    pub aperture: Option<PathBuf>,
    /// Output dataset.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "spectral")]
    pub forward: ForwardArg,
}

/// Field representation: `voxel:R` (R^3 voxels) or `inr[:R]` (network,
/// exported on an R^3 grid).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldArg {
    Voxel(usize),
    Inr(usize),
}

impl FieldArg {
    pub fn resolution(self) -> usize {
        match self {
            FieldArg::Voxel(r) | FieldArg::Inr(r) => r,
        }
    }
}

impl FromStr for FieldArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, res) = match s.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (s, None),
        };
        let res = match res {
            None => 64,
            Some(r) => match r.parse::<usize>() {
                Ok(r) if r > 0 => r,
                _ => return Err(format!("invalid resolution '{r}'")),
            },
        };
        match kind {
            "voxel" => Ok(FieldArg::Voxel(res)),
            "inr" => Ok(FieldArg::Inr(res)),
            _ => Err(format!("unknown field '{s}' (voxel:R or inr[:R])")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineArg {
    Tfts,
    Tfss,
    Rq,
}

impl BaselineArg {
    pub fn method(self) -> Method {
        match self {
            BaselineArg::Tfts => Method::TfTs,
            BaselineArg::Tfss => Method::TfSs,
            BaselineArg::Rq => Method::Rq,
        }
    }
}

/// Cube given as `x,y,z,side`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsArg {
    pub center: [f64; 3],
    pub side: f64,
}

impl FromStr for BoundsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("cannot parse '{p}'")))
            .collect::<Result<_, _>>()?;
        match v.as_slice() {
            [x, y, z, side] if *side > 0.0 => Ok(BoundsArg { center: [*x, *y, *z], side: *side }),
            _ => Err("bounds need x,y,z,side with side > 0".into()),
        }
    }
}

pub const DEFAULT_BOUNDS: &str = "0,0,0,0.36";

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// voxel:R or inr[:R].
    #[arg(long, default_value = "voxel:64")]
    pub field: FieldArg,
    /// Training file ([train]); defaults when omitted.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Loss-weight file ([weights]); defaults when omitted.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Train a baseline instead of the spectral method.
    #[arg(long, value_enum)]
    pub baseline: Option<BaselineArg>,
    /// Reconstruction cube as x,y,z,side.
    #[arg(long, default_value = DEFAULT_BOUNDS)]
    pub bounds: BoundsArg,
    /// Point-cloud threshold relative to the field maximum.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct BackprojectArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub resolution: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = DEFAULT_BOUNDS)]
    pub bounds: BoundsArg,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Raw volume written by reconstruct or backproject.
    #[arg(long)]
    pub pred: PathBuf,
    /// Scene file of the ground truth.
    #[arg(long)]
    pub gt: PathBuf,
    /// CSV file the metric row is appended to.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelList(pub Vec<ForwardKind>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SizeList(pub Vec<usize>);

fn model_list(s: &str) -> Result<ModelList, String> {
    s.split(',')
        .map(|m| m.trim().parse::<ForwardKind>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()
        .map(ModelList)
}

fn size_list(s: &str) -> Result<SizeList, String> {
    s.split(',')
        .map(|v| match v.trim().parse::<f64>() {
            Ok(x) if x >= 1.0 && x.fract() == 0.0 => Ok(x as usize),
            _ => Err(format!("invalid scene size '{v}'")),
        })
        .collect::<Result<_, _>>()
        .map(SizeList)
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Query counts, e.g. 1000,1e4,1e5.
    #[arg(long, default_value = "1000,10000,100000", value_parser = size_list)]
    pub scene_sizes: SizeList,
    #[arg(long, default_value = "spectral,time,rq", value_parser = model_list)]
    pub models: ModelList,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AblateWhat {
    Regularization,
    Bandwidth,
    Startfreq,
    Sheet,
    LossSensitivity,
}

fn bundled(s: &str) -> Result<BundledScene, String> {
    s.parse().map_err(|e: fmcw_recon::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_enum)]
    pub what: AblateWhat,
    #[arg(long)]
    pub out: PathBuf,
    /// Voxel resolution of the trained fields.
    #[arg(long, default_value_t = 32)]
    pub resolution: usize,
    /// Training steps per configuration.
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    /// Bundled scene of the bandwidth and start-frequency sweeps.
    #[arg(long, default_value = "sphere", value_parser = bundled)]
    pub scene: BundledScene,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GradcheckFieldArg {
    Voxel,
    Inr,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "voxel")]
    pub field: GradcheckFieldArg,
    /// Scales the analytic gradient by 1 + this value (negative control).
    #[arg(long, default_value_t = 0.0, hide = true)]
    pub break_gradient: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn field_and_bounds_values() {
        assert_eq!("voxel:32".parse::<FieldArg>(), Ok(FieldArg::Voxel(32)));
        assert_eq!("inr".parse::<FieldArg>(), Ok(FieldArg::Inr(64)));
        assert!("voxel:0".parse::<FieldArg>().is_err());
        assert!("mesh".parse::<FieldArg>().is_err());
        let b: BoundsArg = "0,0.1,0,0.2".parse().unwrap();
        assert_eq!(b.center, [0.0, 0.1, 0.0]);
        assert!("0,0,0".parse::<BoundsArg>().is_err());
        assert_eq!(size_list("1,1e5").unwrap(), SizeList(vec![1, 100_000]));
        assert!(size_list("0").is_err());
    }

    #[test]
    fn missing_out_is_rejected() {
        let r = Cli::try_parse_from(["fmcw-recon", "simulate", "--scene", "s.cfg"]);
        assert!(r.is_err());
    }
}
