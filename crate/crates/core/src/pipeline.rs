//! Batch runs behind the command-line tool: the ground-truth oracle, dataset
//! evaluation, lab sweeps and plane diagnostics.
//!
//! Per-object geometry failures never abort a run. They become `invalid`
//! branch entries or per-frame flags and are counted as warnings.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{Eps, GeometryError};
use crate::depth::{box_keypoints, geometric_depths};
use crate::ground_plane::{
    fit_horizon, fit_plane, horizon_to_plane, plane_to_horizon, rasterize_horizon, y_global, GroundPlane,
    HorizonHeatmap, HorizonLine, DEFAULT_HEATMAP_RADIUS, KITTI_CAM_HEIGHT,
};
use crate::kitti_io::{fmt_sig, BranchDepth, DepthEnsemble, Frame, Object3D, ParseError, ReportFormat};
use crate::lab::{
    disturb_sweep, flip_sweep, generate_ensembles, multi_flip, object_stream, synthetic_truths, ErrorModelConfig,
    LabError, MultiFlipResult, NamedCurve, SigmaModel, DEFAULT_AMPLITUDES, DEFAULT_PROPORTIONS,
};
use crate::metrics::{binned_mae, evaluate, BinnedMae, ComplementarityReport, EvalOptions, EvalSample, MetricsError};
use crate::metrics::{DEFAULT_DEPTH_EDGES, DEFAULT_Y_ERROR_EDGES};

/// KITTI image size used for heatmaps when none is given.
pub const DEFAULT_IMAGE_SIZE: (usize, usize) = (1242, 375);

const DOMAIN_FRAME: u64 = 0x6672616d65;
const DOMAIN_OBJECT: u64 = 0x6f626a;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{} prediction(s) have no ground truth: {}", unmatched.len(), preview(unmatched))]
    Join { unmatched: Vec<String> },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Lab(#[from] LabError),
}

fn preview(items: &[String]) -> String {
    const SHOWN: usize = 10;
    let mut s = items.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if items.len() > SHOWN {
        s.push_str(", ...");
    }
    s
}

/// Settings shared by every subcommand, echoed into output headers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub calib_dir: Option<PathBuf>,
    pub label_dir: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
    pub cam_height: f64,
    pub eps: Eps,
    pub seed: u64,
    pub depth_edges: Vec<f64>,
    pub y_error_edges: Vec<f64>,
    /// Subcommand-specific settings.
    pub extra: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            calib_dir: None,
            label_dir: None,
            predictions: None,
            out: None,
            format: ReportFormat::Json,
            cam_height: KITTI_CAM_HEIGHT,
            eps: Eps::default(),
            seed: 0,
            depth_edges: DEFAULT_DEPTH_EDGES.to_vec(),
            y_error_edges: DEFAULT_Y_ERROR_EDGES.to_vec(),
            extra: BTreeMap::new(),
        }
    }
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|&x| if x.is_infinite() { "inf".to_string() } else { fmt_sig(x) }).collect::<Vec<_>>().join(";")
}

impl RunConfig {
    pub fn header(&self) -> BTreeMap<String, String> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or_else(|| "-".to_string(), |p| p.display().to_string());
        let mut h = BTreeMap::new();
        h.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        h.insert("command".into(), self.command.clone());
        h.insert("calib_dir".into(), path(&self.calib_dir));
        h.insert("label_dir".into(), path(&self.label_dir));
        h.insert("predictions".into(), path(&self.predictions));
        h.insert("out".into(), path(&self.out));
        h.insert("format".into(), if self.format == ReportFormat::Json { "json" } else { "csv" }.into());
        h.insert("cam_height".into(), fmt_sig(self.cam_height));
        h.insert("eps_den".into(), format!("{:e}", self.eps.0));
        h.insert("seed".into(), self.seed.to_string());
        h.insert("depth_edges".into(), join_f64(&self.depth_edges));
        h.insert("y_error_edges".into(), join_f64(&self.y_error_edges));
        for (k, v) in &self.extra {
            h.insert(k.clone(), v.clone());
        }
        h
    }
}

// ---------------------------------------------------------------- oracle

/// Perturbations applied by [`run_oracle`]. Each is the half-width of a
/// uniform draw.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Relative noise on the 3D height.
    pub h_rel: f64,
    /// Pixel noise on every keypoint row.
    pub px: f64,
    pub horizon_slope: f64,
    /// Horizon intercept noise, pixels.
    pub horizon_intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub cam_height: f64,
    pub eps: Eps,
    pub noise: NoiseConfig,
    pub sigma_model: SigmaModel,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            cam_height: KITTI_CAM_HEIGHT,
            eps: Eps::default(),
            noise: NoiseConfig::default(),
            sigma_model: SigmaModel::Constant,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleOutput {
    pub ensembles: Vec<DepthEnsemble>,
    /// Per-branch count of singular or non-positive estimates.
    pub failures: BTreeMap<String, usize>,
    /// Label rows skipped: DontCare, degenerate dimensions, behind the camera.
    pub skipped: usize,
    /// Frames whose plane fit fell back to level ground.
    pub fallback_frames: usize,
}

impl OracleOutput {
    pub fn warnings(&self) -> usize {
        self.failures.values().sum()
    }
}

/// Geometric depths computed from perturbed label geometry.
///
/// Each frame's ground normal comes from a plane fit over its object
/// bottoms. The plane offset is anchored per object at the labeled bottom,
/// so with zero noise every branch recovers the labeled depth. Horizon noise
/// tilts the normal and moves only the ground-based branches.
pub fn run_oracle(frames: &[Frame], cfg: &OracleConfig) -> OracleOutput {
    let mut out = OracleOutput::default();
    let nz = cfg.noise;
    for frame in frames {
        let k = &frame.calib.intrinsics;
        let valid: Vec<(usize, &Object3D)> = frame.labels.iter().enumerate().filter(|(_, o)| o.is_valid()).collect();
        out.skipped += frame.labels.len() - valid.len();
        if valid.is_empty() {
            continue;
        }
        let bottoms: Vec<_> = valid.iter().map(|(_, o)| o.location()).collect();
        let fit = fit_plane(&bottoms, cfg.cam_height).expect("non-empty bottoms");
        out.fallback_frames += usize::from(fit.fallback);

        let mut frng = object_stream(cfg.seed, DOMAIN_FRAME, &frame.id, 0);
        let (ds, di) = (frng.random_range(-1.0..1.0), frng.random_range(-1.0..1.0));
        let tilted: Result<GroundPlane, GeometryError> = plane_to_horizon(&fit.plane, k, cfg.eps).and_then(|h| {
            let noisy = HorizonLine::new(h.k_h + nz.horizon_slope * ds, h.b_h + nz.horizon_intercept * di);
            horizon_to_plane(noisy, k, 1.0)
        });
        let g0 = fit.plane;

        for (index, o) in valid {
            let mut rng = object_stream(cfg.seed, DOMAIN_OBJECT, &frame.id, index);
            let mut unit = || rng.random_range(-1.0..1.0);
            let h = o.h * (1.0 + nz.h_rel * unit());
            let Ok(mut kp) = box_keypoints(o, k) else {
                out.skipped += 1;
                continue;
            };
            kp.bottom_center.v += nz.px * unit();
            kp.top_center.v += nz.px * unit();
            for d in &mut kp.diagonals {
                let draws = [unit(), unit(), unit(), unit()];
                if let Some(edges) = d {
                    for (e, pair) in edges.iter_mut().zip(draws.chunks(2)) {
                        e.bottom.v += nz.px * pair[0];
                        e.top.v += nz.px * pair[1];
                    }
                }
            }

            let y_glo = tilted.and_then(|g| {
                let offset = -(g0.a * o.x + g0.b * o.y + g0.c * o.z);
                let plane = GroundPlane { cam_height: offset, ..g };
                y_global(kp.bottom_center.u, kp.bottom_center.v, &plane, k, cfg.eps)
            });
            let depths = geometric_depths(&kp, h, *y_glo.as_ref().unwrap_or(&f64::NAN), k, cfg.eps);

            let mut branches = Vec::new();
            let mut invalid = Vec::new();
            for (name, est) in depths.named() {
                let ground_based = !name.starts_with("key");
                let est = if ground_based { y_glo.and(est) } else { est };
                match est {
                    Ok(z) if z.is_finite() => {
                        branches.push(BranchDepth::new(name, z, cfg.sigma_model.sigma(z - o.z)));
                    }
                    _ => {
                        invalid.push(name.to_string());
                        *out.failures.entry(name.to_string()).or_default() += 1;
                    }
                }
            }
            out.ensembles.push(DepthEnsemble {
                frame: frame.id.clone(),
                index,
                z_star: Some(o.z),
                y_glo: y_glo.ok(),
                branches,
                invalid,
            });
        }
    }
    out
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    pub report: ComplementarityReport,
    /// Predictions dropped because their label row is DontCare.
    pub excluded: usize,
}

impl EvalOutput {
    /// CS entries that could not be computed.
    pub fn warnings(&self) -> usize {
        self.report.cs.iter().filter(|c| c.flag.is_some()).count()
    }
}

/// Joins predictions to ground truth and builds the report.
///
/// With `frames`, truth is the label row `(frame, index)`; otherwise each
/// record's own `z_star` is used. Every prediction must find its truth.
pub fn run_eval(
    preds: &[DepthEnsemble],
    frames: Option<&[Frame]>,
    opts: &EvalOptions,
    include_dont_care: bool,
) -> Result<EvalOutput, PipelineError> {
    let labels: Option<HashMap<(&str, usize), &Object3D>> = frames.map(|fs| {
        fs.iter()
            .flat_map(|f| f.labels.iter().enumerate().map(move |(i, o)| ((f.id.as_str(), i), o)))
            .collect()
    });
    let mut samples = Vec::with_capacity(preds.len());
    let mut unmatched = Vec::new();
    let mut excluded = 0;
    for p in preds {
        match &labels {
            Some(map) => match map.get(&(p.frame.as_str(), p.index)) {
                Some(o) if o.is_dont_care() && !include_dont_care => excluded += 1,
                Some(o) => samples.push(EvalSample { ensemble: p, z_star: o.z, y_star: Some(o.y) }),
                None => unmatched.push(format!("{}:{}", p.frame, p.index)),
            },
            None => match p.z_star {
                Some(z) => samples.push(EvalSample { ensemble: p, z_star: z, y_star: None }),
                None => unmatched.push(format!("{}:{}", p.frame, p.index)),
            },
        }
    }
    if !unmatched.is_empty() {
        return Err(PipelineError::Join { unmatched });
    }
    let mut opts = opts.clone();
    opts.header.insert("excluded_dont_care".into(), excluded.to_string());
    Ok(EvalOutput { report: evaluate(&samples, &opts)?, excluded })
}

// ---------------------------------------------------------------- lab

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabMode {
    Flip,
    Disturb,
    MultiFlip,
}

impl FromStr for LabMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flip" => Ok(Self::Flip),
            "disturb" => Ok(Self::Disturb),
            "multiflip" => Ok(Self::MultiFlip),
            _ => Err(format!("unknown lab mode {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabConfig {
    pub mode: LabMode,
    pub proportions: Vec<f64>,
    /// Disturbance amplitudes in meters; defaults scale with the error scale.
    pub amplitudes: Option<Vec<f64>>,
    /// Flip counts for multi-flip; defaults to `0..=n`.
    pub ks: Option<Vec<usize>>,
    /// Branches to sweep; defaults to every branch.
    pub branches: Option<Vec<String>>,
    /// Generator settings; `seed` also seeds the sweeps.
    pub model: ErrorModelConfig,
    /// Synthetic object count when no predictions are given.
    pub n_objects: usize,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            mode: LabMode::Flip,
            proportions: DEFAULT_PROPORTIONS.to_vec(),
            amplitudes: None,
            ks: None,
            branches: None,
            model: ErrorModelConfig::default(),
            n_objects: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabOutput {
    Curves(Vec<NamedCurve>),
    MultiFlip(Vec<MultiFlipResult>),
}

/// Runs the configured sweep over `ensembles`, or over a generated ensemble
/// set when none are given.
pub fn run_lab(ensembles: Option<&[DepthEnsemble]>, cfg: &LabConfig) -> Result<LabOutput, LabError> {
    let generated;
    let es = match ensembles {
        Some(es) => es,
        None => {
            generated = generate_ensembles(&synthetic_truths(cfg.n_objects, cfg.model.seed), &cfg.model)?;
            &generated[..]
        }
    };
    let first = es.first().ok_or(LabError::Empty)?;
    let names: Vec<String> =
        cfg.branches.clone().unwrap_or_else(|| first.branches.iter().map(|b| b.name.clone()).collect());
    let seed = cfg.model.seed;
    match cfg.mode {
        LabMode::Flip => names
            .iter()
            .map(|b| Ok(NamedCurve::flip(b, flip_sweep(es, b, &cfg.proportions, seed)?)))
            .collect::<Result<_, _>>()
            .map(LabOutput::Curves),
        LabMode::Disturb => {
            let amps = cfg
                .amplitudes
                .clone()
                .unwrap_or_else(|| DEFAULT_AMPLITUDES.iter().map(|a| a * cfg.model.error_scale).collect());
            names
                .iter()
                .map(|b| Ok(NamedCurve::disturb(b, disturb_sweep(es, b, &amps, seed)?)))
                .collect::<Result<_, _>>()
                .map(LabOutput::Curves)
        }
        LabMode::MultiFlip => {
            let ks = cfg.ks.clone().unwrap_or_else(|| (0..=first.branches.len()).collect());
            ks.iter().map(|&k| multi_flip(es, k, seed)).collect::<Result<_, _>>().map(LabOutput::MultiFlip)
        }
    }
}

// ---------------------------------------------------------------- plane

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneConfig {
    pub cam_height: f64,
    pub eps: Eps,
    pub width: usize,
    pub height: usize,
    pub radius: usize,
    /// Keep the rasterized heatmaps in the output.
    pub keep_heatmaps: bool,
    pub header: BTreeMap<String, String>,
}

impl Default for PlaneConfig {
    fn default() -> Self {
        Self {
            cam_height: KITTI_CAM_HEIGHT,
            eps: Eps::default(),
            width: DEFAULT_IMAGE_SIZE.0,
            height: DEFAULT_IMAGE_SIZE.1,
            radius: DEFAULT_HEATMAP_RADIUS,
            keep_heatmaps: false,
            header: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneFrameRow {
    pub frame: String,
    pub n_points: usize,
    pub fallback: bool,
    pub plane: GroundPlane,
    pub fitted_height: f64,
    pub horizon: Option<HorizonLine>,
    /// Mean |y_glo - y| over the frame's objects.
    pub y_mae: Option<f64>,
    pub y_count: usize,
    /// Objects whose ray missed the plane or grazed the horizon.
    pub y_failures: usize,
    /// Heatmap round trip: fitted minus true slope and intercept.
    pub heatmap_dk: Option<f64>,
    pub heatmap_db: Option<f64>,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneReport {
    pub header: BTreeMap<String, String>,
    pub frames: Vec<PlaneFrameRow>,
    pub fallback_count: usize,
    /// Mean |y_glo - y| over all objects.
    pub y_mae: Option<f64>,
    /// Frames binned by their y MAE; the bin MAE is the mean frame y MAE.
    pub y_levels: BinnedMae,
}

impl PlaneReport {
    pub fn warnings(&self) -> usize {
        self.fallback_count + self.frames.iter().map(|f| f.y_failures + usize::from(f.degraded)).sum::<usize>()
    }
}

/// Plane fit, horizon, y_glo accuracy and heatmap round trip per frame.
pub fn run_plane(frames: &[Frame], cfg: &PlaneConfig) -> (PlaneReport, Vec<(String, HorizonHeatmap)>) {
    let mut rows = Vec::with_capacity(frames.len());
    let mut heatmaps = Vec::new();
    let (mut y_sum, mut y_n) = (0.0, 0usize);
    for frame in frames {
        let k = &frame.calib.intrinsics;
        let objs: Vec<&Object3D> = frame.labels.iter().filter(|o| o.is_valid()).collect();
        let bottoms: Vec<_> = objs.iter().map(|o| o.location()).collect();
        let (plane, fitted_height, fallback) = match fit_plane(&bottoms, cfg.cam_height) {
            Ok(f) => (f.plane, f.fitted_height, f.fallback),
            Err(_) => (GroundPlane::flat(cfg.cam_height), cfg.cam_height, true),
        };
        let horizon = plane_to_horizon(&plane, k, cfg.eps).ok();

        let (mut sum, mut count, mut failures) = (0.0, 0usize, 0usize);
        for o in &objs {
            let y = crate::camera::project(o.location(), k).and_then(|px| y_global(px.u, px.v, &plane, k, cfg.eps));
            match y {
                Ok(y) => {
                    sum += (y - o.y).abs();
                    count += 1;
                }
                Err(_) => failures += 1,
            }
        }
        y_sum += sum;
        y_n += count;

        let (mut dk, mut db, mut degraded) = (None, None, true);
        if let Some(h) = horizon {
            let map = rasterize_horizon(h, cfg.width, cfg.height, cfg.radius);
            if let Ok(fit) = fit_horizon(&map) {
                dk = Some(fit.line.k_h - h.k_h);
                db = Some(fit.line.b_h - h.b_h);
                degraded = fit.degraded;
            }
            if cfg.keep_heatmaps {
                heatmaps.push((frame.id.clone(), map));
            }
        }
        rows.push(PlaneFrameRow {
            frame: frame.id.clone(),
            n_points: bottoms.len(),
            fallback,
            plane,
            fitted_height,
            horizon,
            y_mae: (count > 0).then(|| sum / count as f64),
            y_count: count,
            y_failures: failures,
            heatmap_dk: dk,
            heatmap_db: db,
            degraded,
        });
    }
    let frame_maes: Vec<f64> = rows.iter().filter_map(|r| r.y_mae).collect();
    let pairs: Vec<(f64, f64)> = frame_maes.iter().map(|&m| (m, 0.0)).collect();
    let y_levels = binned_mae(&pairs, &frame_maes, &DEFAULT_Y_ERROR_EDGES).expect("default edges are increasing");
    let report = PlaneReport {
        header: cfg.header.clone(),
        fallback_count: rows.iter().filter(|r| r.fallback).count(),
        frames: rows,
        y_mae: (y_n > 0).then(|| y_sum / y_n as f64),
        y_levels,
    };
    (report, heatmaps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kitti_io::{parse_calib, parse_labels};

    fn frame(id: &str, labels: &str) -> Frame {
        Frame {
            id: id.into(),
            calib: parse_calib("P2: 700 0 600 45 0 700 200 -0.3 0 0 1 0.003").unwrap(),
            labels: parse_labels(labels).unwrap(),
        }
    }

    const FLAT: &str = "Car 0 0 0 0 0 0 0 1.5 1.6 3.9 -3.0 1.65 12.0 0.3\n\
                        Car 0 0 0 0 0 0 0 1.4 1.7 4.1 2.5 1.65 25.0 -1.2\n\
                        DontCare -1 -1 -10 0 0 1 1 -1 -1 -1 -1000 -1000 -1000 -10\n\
                        Pedestrian 0 0 0 0 0 0 0 1.8 0.6 0.8 4.0 1.65 33.0 1.0\n\
                        Car 0 0 0 0 0 0 0 1.6 1.6 3.7 -6.0 1.65 48.0 2.9\n";

    #[test]
    fn oracle_without_noise_recovers_labels() {
        let out = run_oracle(&[frame("000001", FLAT)], &OracleConfig::default());
        assert_eq!(out.ensembles.len(), 4);
        assert_eq!(out.skipped, 1);
        assert_eq!(out.warnings(), 0);
        for e in &out.ensembles {
            assert_eq!(e.branches.len(), 8);
            let z = e.z_star.unwrap();
            for b in &e.branches {
                assert!((b.z - z).abs() <= 1e-9 * z, "{} {} vs {z}", b.name, b.z);
            }
        }
        // the DontCare row keeps its label index slot
        assert_eq!(out.ensembles.iter().map(|e| e.index).collect::<Vec<_>>(), vec![0, 1, 3, 4]);
    }

    #[test]
    fn horizon_noise_leaves_key_branches_alone() {
        let clean = run_oracle(&[frame("000001", FLAT)], &OracleConfig::default());
        let cfg = OracleConfig {
            noise: NoiseConfig { horizon_slope: 0.01, horizon_intercept: 5.0, ..Default::default() },
            seed: 3,
            ..Default::default()
        };
        let noisy = run_oracle(&[frame("000001", FLAT)], &cfg);
        for (a, b) in clean.ensembles.iter().zip(&noisy.ensembles) {
            for name in ["key0", "key1", "key2"] {
                assert_eq!(a.branch(name).unwrap().z, b.branch(name).unwrap().z);
            }
            assert_ne!(a.branch("glo").unwrap().z, b.branch("glo").unwrap().z);
            assert_ne!(a.branch("comp0").unwrap().z, b.branch("comp0").unwrap().z);
        }
    }

    #[test]
    fn eval_joins_on_labels() {
        let frames = [frame("000001", FLAT)];
        let out = run_oracle(&frames, &OracleConfig::default());
        let mut preds = out.ensembles.clone();
        for p in &mut preds {
            p.z_star = None;
        }
        let r = run_eval(&preds, Some(&frames), &EvalOptions::default(), false).unwrap();
        assert_eq!(r.report.sample_count, 4);
        assert!(r.report.mae.iter().all(|m| m.mae.unwrap() < 1e-9));

        preds[0].index = 9;
        match run_eval(&preds, Some(&frames), &EvalOptions::default(), false) {
            Err(PipelineError::Join { unmatched }) => assert_eq!(unmatched, vec!["000001:9".to_string()]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(run_eval(&preds, None, &EvalOptions::default(), false), Err(PipelineError::Join { .. })));
    }

    #[test]
    fn dont_care_predictions_are_filtered() {
        let frames = [frame("000001", FLAT)];
        let p = DepthEnsemble {
            frame: "000001".into(),
            index: 2,
            z_star: None,
            y_glo: None,
            branches: vec![BranchDepth::new("dir", 10.0, 1.0)],
            invalid: vec![],
        };
        let r = run_eval(&[p.clone()], Some(&frames), &EvalOptions::default(), false).unwrap();
        assert_eq!((r.excluded, r.report.sample_count), (1, 0));
        let r = run_eval(&[p], Some(&frames), &EvalOptions::default(), true).unwrap();
        assert_eq!((r.excluded, r.report.sample_count), (0, 1));
    }

    #[test]
    fn plane_on_flat_ground() {
        let (r, maps) = run_plane(
            &[frame("000001", FLAT), frame("000002", "Car 0 0 0 0 0 0 0 1.5 1.6 3.9 1.0 1.65 15.0 0.0\n")],
            &PlaneConfig { keep_heatmaps: true, ..Default::default() },
        );
        assert_eq!(maps.len(), 2);
        let f = &r.frames[0];
        assert!(!f.fallback);
        assert!(f.y_mae.unwrap() < 1e-9);
        let h = f.horizon.unwrap();
        assert!(h.k_h.abs() < 1e-12 && (h.b_h - 200.0).abs() < 1e-9);
        assert!(f.heatmap_db.unwrap().abs() < 0.5 && !f.degraded);
        assert!(r.frames[1].fallback);
        assert_eq!(r.fallback_count, 1);
        assert_eq!(r.y_levels.rows[0].count, 2);
    }

    #[test]
    fn lab_defaults() {
        let cfg = LabConfig { n_objects: 500, ..Default::default() };
        match run_lab(None, &cfg).unwrap() {
            LabOutput::Curves(c) => {
                assert_eq!(c.len(), 4);
                assert_eq!(c[0].curve.x, DEFAULT_PROPORTIONS.to_vec());
            }
            other => panic!("{other:?}"),
        }
        let mf = LabConfig { mode: LabMode::MultiFlip, n_objects: 500, ..Default::default() };
        match run_lab(None, &mf).unwrap() {
            LabOutput::MultiFlip(r) => assert_eq!(r.iter().map(|r| r.k).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]),
            other => panic!("{other:?}"),
        }
    }
}
