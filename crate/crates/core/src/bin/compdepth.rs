//! Command-line front end.
//!
//! Exit status: 0 on success, 2 on input errors, 3 when the run completed
//! but hit numerical degeneracies (singular estimates, plane fallbacks,
//! undefined scores).

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use compdepth::camera::Eps;
use compdepth::ground_plane::DEFAULT_HEATMAP_RADIUS;
use compdepth::kitti_io::{
    read_predictions, write_curves, write_multi_flip, write_plane_report, write_predictions, write_report,
    DepthEnsemble, Frame, ReportFormat,
};
use compdepth::lab::{ErrorModelConfig, SigmaModel, DEFAULT_COUPLING_RATE};
use compdepth::metrics::EvalOptions;
use compdepth::pipeline::{
    run_eval, run_lab, run_oracle, run_plane, LabConfig, LabMode, LabOutput, NoiseConfig, OracleConfig, PlaneConfig,
    RunConfig, DEFAULT_IMAGE_SIZE,
};

const EXIT_INPUT: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;

#[derive(Parser)]
#[command(name = "compdepth", version, about = "Complementary depth geometry and complementarity analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against ground truth
    Eval(EvalArgs),
    /// Generate geometric depth predictions from labels with injected noise
    Oracle(OracleArgs),
    /// Run flip, disturbance or multi-branch flip sweeps
    Lab(LabArgs),
    /// Ground plane, horizon and heatmap diagnostics
    Plane(PlaneArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    calib_dir: Option<PathBuf>,
    #[arg(long)]
    label_dir: Option<PathBuf>,
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value_t = 1.65)]
    cam_height: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    eps_den: f64,
    /// Truth-depth bin edges, meters ("inf" allowed)
    #[arg(long, value_delimiter = ',', default_value = "0,20,40,inf")]
    depth_edges: Vec<f64>,
    /// Ground-elevation error bin edges, meters
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,inf")]
    y_error_edges: Vec<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Keep predictions whose label row is DontCare
    #[arg(long)]
    include_dont_care: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SigmaArg {
    Constant,
    Proportional,
}

impl From<SigmaArg> for SigmaModel {
    fn from(s: SigmaArg) -> Self {
        match s {
            SigmaArg::Constant => SigmaModel::Constant,
            SigmaArg::Proportional => SigmaModel::Proportional,
        }
    }
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Relative noise half-width on the 3D height
    #[arg(long, default_value_t = 0.0)]
    noise_h_rel: f64,
    /// Keypoint row noise half-width, pixels
    #[arg(long, default_value_t = 0.0)]
    noise_px: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_horizon_slope: f64,
    /// Horizon intercept noise half-width, pixels
    #[arg(long, default_value_t = 0.0)]
    noise_horizon_intercept: f64,
    #[arg(long, value_enum, default_value = "constant")]
    sigma_model: SigmaArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Flip,
    Disturb,
    Multiflip,
}

#[derive(Args)]
struct LabArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "flip")]
    mode: ModeArg,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    proportions: Vec<f64>,
    /// Disturbance amplitudes, meters; defaults scale with --error-scale
    #[arg(long, value_delimiter = ',')]
    amplitudes: Option<Vec<f64>>,
    /// Flip counts for multiflip; defaults to 0..=n
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_COUPLING_RATE)]
    coupling_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    error_scale: f64,
    /// Branches to sweep; defaults to all
    #[arg(long, value_delimiter = ',')]
    branches: Option<Vec<String>>,
    /// Branch count of the generated ensemble
    #[arg(long, default_value_t = 4)]
    n_branches: usize,
    /// Object count of the generated ensemble
    #[arg(long, default_value_t = 10_000)]
    n_objects: usize,
    #[arg(long, value_enum, default_value = "constant")]
    sigma_model: SigmaArg,
}

#[derive(Args)]
struct PlaneArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE.0)]
    width: usize,
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE.1)]
    height: usize,
    #[arg(long, default_value_t = DEFAULT_HEATMAP_RADIUS)]
    radius: usize,
    /// Write one PGM horizon heatmap per frame here
    #[arg(long)]
    heatmap_dir: Option<PathBuf>,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Run = Result<usize, Failure>;

fn resolve(p: &Option<PathBuf>) -> Option<PathBuf> {
    p.as_ref().map(|p| fs::canonicalize(p).or_else(|_| std::path::absolute(p)).unwrap_or_else(|_| p.clone()))
}

fn run_config(command: &str, c: &Common, extra: BTreeMap<String, String>) -> Result<RunConfig, Failure> {
    if !(c.eps_den > 0.0) {
        return Err(Failure(format!("--eps-den must be positive, got {}", c.eps_den)));
    }
    if !(c.cam_height > 0.0) || !c.cam_height.is_finite() {
        return Err(Failure(format!("--cam-height must be positive, got {}", c.cam_height)));
    }
    Ok(RunConfig {
        command: command.into(),
        calib_dir: resolve(&c.calib_dir),
        label_dir: resolve(&c.label_dir),
        predictions: resolve(&c.predictions),
        out: resolve(&c.out),
        format: match c.format {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        },
        cam_height: c.cam_height,
        eps: Eps(c.eps_den),
        seed: c.seed,
        depth_edges: c.depth_edges.clone(),
        y_error_edges: c.y_error_edges.clone(),
        extra,
    })
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure(format!("{}: {e}", p.display()))),
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(Failure::from),
    }
}

fn load_frames(cfg: &RunConfig) -> Result<Vec<Frame>, Failure> {
    match (&cfg.calib_dir, &cfg.label_dir) {
        (Some(c), Some(l)) => Ok(compdepth::kitti_io::load_frames(c, l)?),
        _ => Err(Failure("--calib-dir and --label-dir are both required".into())),
    }
}

fn load_predictions(path: &Path) -> Result<Vec<DepthEnsemble>, Failure> {
    let f = fs::File::open(path).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    read_predictions(BufReader::new(f)).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn cmd_eval(a: &EvalArgs) -> Run {
    let mut extra = BTreeMap::new();
    extra.insert("include_dont_care".into(), a.include_dont_care.to_string());
    let cfg = run_config("eval", &a.common, extra)?;
    let path = cfg.predictions.clone().ok_or_else(|| Failure("--predictions is required".into()))?;
    let preds = load_predictions(&path)?;
    let frames = if cfg.label_dir.is_some() || cfg.calib_dir.is_some() { Some(load_frames(&cfg)?) } else { None };
    let opts = EvalOptions {
        depth_edges: cfg.depth_edges.clone(),
        y_error_edges: cfg.y_error_edges.clone(),
        header: cfg.header(),
    };
    let out = run_eval(&preds, frames.as_deref(), &opts, a.include_dont_care)?;
    emit(&cfg.out, &write_report(&out.report, cfg.format))?;
    Ok(out.warnings())
}

fn cmd_oracle(a: &OracleArgs) -> Run {
    let noise = NoiseConfig {
        h_rel: a.noise_h_rel,
        px: a.noise_px,
        horizon_slope: a.noise_horizon_slope,
        horizon_intercept: a.noise_horizon_intercept,
    };
    let sigma_model: SigmaModel = a.sigma_model.into();
    let mut extra = BTreeMap::new();
    extra.insert("noise_h_rel".into(), noise.h_rel.to_string());
    extra.insert("noise_px".into(), noise.px.to_string());
    extra.insert("noise_horizon_slope".into(), noise.horizon_slope.to_string());
    extra.insert("noise_horizon_intercept".into(), noise.horizon_intercept.to_string());
    extra.insert("sigma_model".into(), sigma_model.as_str().into());
    let cfg = run_config("oracle", &a.common, extra)?;
    let frames = load_frames(&cfg)?;
    let out = run_oracle(
        &frames,
        &OracleConfig { cam_height: cfg.cam_height, eps: cfg.eps, noise, sigma_model, seed: cfg.seed },
    );
    let mut text = String::new();
    for (k, v) in cfg.header() {
        text.push_str(&format!("# {k}={v}\n"));
    }
    text.push_str(&format!("# skipped={}\n", out.skipped));
    for (name, n) in &out.failures {
        text.push_str(&format!("# invalid[{name}]={n}\n"));
    }
    text.push_str(&write_predictions(&out.ensembles));
    emit(&cfg.out, &text)?;
    Ok(out.warnings())
}

fn cmd_lab(a: &LabArgs) -> Run {
    let mode = match a.mode {
        ModeArg::Flip => LabMode::Flip,
        ModeArg::Disturb => LabMode::Disturb,
        ModeArg::Multiflip => LabMode::MultiFlip,
    };
    let sigma_model: SigmaModel = a.sigma_model.into();
    let list = |xs: &[f64]| xs.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
    let mut extra = BTreeMap::new();
    extra.insert(
        "mode".into(),
        match mode {
            LabMode::Flip => "flip",
            LabMode::Disturb => "disturb",
            LabMode::MultiFlip => "multiflip",
        }
        .into(),
    );
    extra.insert("proportions".into(), list(&a.proportions));
    extra.insert("amplitudes".into(), a.amplitudes.as_deref().map_or_else(|| "default".into(), list));
    extra.insert(
        "k".into(),
        a.k.as_ref().map_or_else(|| "all".into(), |k| k.iter().map(usize::to_string).collect::<Vec<_>>().join(";")),
    );
    extra.insert("coupling_rate".into(), a.coupling_rate.to_string());
    extra.insert("error_scale".into(), a.error_scale.to_string());
    extra.insert("branches".into(), a.branches.as_ref().map_or_else(|| "all".into(), |b| b.join(";")));
    extra.insert("n_branches".into(), a.n_branches.to_string());
    extra.insert("n_objects".into(), a.n_objects.to_string());
    extra.insert("sigma_model".into(), sigma_model.as_str().into());
    extra.insert("metric".into(), "fused depth MAE (m)".into());
    let cfg = run_config("lab", &a.common, extra)?;
    let preds = cfg.predictions.as_deref().map(load_predictions).transpose()?;
    let lab = LabConfig {
        mode,
        proportions: a.proportions.clone(),
        amplitudes: a.amplitudes.clone(),
        ks: a.k.clone(),
        branches: a.branches.clone(),
        model: ErrorModelConfig {
            n_branches: a.n_branches,
            coupling_rate: a.coupling_rate,
            error_scale: a.error_scale,
            sigma_model,
            seed: cfg.seed,
            branch_names: Vec::new(),
        },
        n_objects: a.n_objects,
    };
    let text = match run_lab(preds.as_deref(), &lab)? {
        LabOutput::Curves(c) => write_curves(&cfg.header(), &c, cfg.format),
        LabOutput::MultiFlip(r) => write_multi_flip(&cfg.header(), &r, cfg.format),
    };
    emit(&cfg.out, &text)?;
    Ok(0)
}

fn cmd_plane(a: &PlaneArgs) -> Run {
    let mut extra = BTreeMap::new();
    extra.insert("width".into(), a.width.to_string());
    extra.insert("height".into(), a.height.to_string());
    extra.insert("radius".into(), a.radius.to_string());
    let cfg = run_config("plane", &a.common, extra)?;
    let frames = load_frames(&cfg)?;
    let (report, maps) = run_plane(
        &frames,
        &PlaneConfig {
            cam_height: cfg.cam_height,
            eps: cfg.eps,
            width: a.width,
            height: a.height,
            radius: a.radius,
            keep_heatmaps: a.heatmap_dir.is_some(),
            header: cfg.header(),
        },
    );
    if let Some(dir) = &a.heatmap_dir {
        fs::create_dir_all(dir).map_err(|e| Failure(format!("{}: {e}", dir.display())))?;
        for (id, m) in &maps {
            let p = dir.join(format!("{id}.pgm"));
            fs::write(&p, m.to_pgm()).map_err(|e| Failure(format!("{}: {e}", p.display())))?;
        }
    }
    emit(&cfg.out, &write_plane_report(&report, cfg.format))?;
    Ok(report.warnings())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Lab(a) => cmd_lab(a),
        Command::Plane(a) => cmd_plane(a),
    };
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("warning: {n} numerical degeneracies (see report)");
            ExitCode::from(EXIT_DEGENERATE)
        }
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
