//! Complementarity experiments on depth ensembles: the flip transform, the
//! two-branch coupling/complementary error formulas, a synthetic generator
//! with a controllable error-sign coupling rate, and the flip, disturbance
//! and multi-branch flip sweeps.
//!
//! Randomness is keyed by object identity: every `(frame, index)` gets its
//! own ChaCha stream derived from the root seed, so results do not depend on
//! input order or on how work is scheduled. Reductions run in a canonical
//! order (the seeded object ranking), which makes every number reproducible
//! bit for bit.

use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::{soft_fuse, FusionError};
use crate::kitti_io::{BranchDepth, DepthEnsemble};

/// Share of same-sign branch pairs reported for existing multi-depth
/// detectors on KITTI.
pub const DEFAULT_COUPLING_RATE: f64 = 0.95;

/// Flip proportions swept by default.
pub const DEFAULT_PROPORTIONS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Disturbance amplitudes swept by default, as multiples of the error scale.
pub const DEFAULT_AMPLITUDES: [f64; 12] = [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0];

const DOMAIN_GENERATE: u64 = 0x67656e;
const DOMAIN_RANK: u64 = 0x72616e6b;
const DOMAIN_NOISE: u64 = 0x6e6f6973;
const DOMAIN_TRUTH: u64 = 0x7472757468;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid error model: {0}")]
    InvalidConfig(String),
    #[error("branch {0:?} missing from at least one ensemble")]
    UnknownBranch(String),
    #[error("ensemble ({frame}, {index}) has no ground-truth depth")]
    MissingTruth { frame: String, index: usize },
    #[error("k = {k} outside 0..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("invalid sweep values: {0}")]
    InvalidControl(String),
    #[error("no ensembles")]
    Empty,
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

/// Reflects a prediction about the ground truth; keeps `|error|`, flips its sign.
#[inline]
pub fn flip(z_hat: f64, z_star: f64) -> f64 {
    2.0 * z_star - z_hat
}

/// `|w1 e1 + (1 - w1) e2|`: fused error of two branches.
pub fn coupling_error(e1: f64, e2: f64, w1: f64) -> f64 {
    (w1 * e1 + (1.0 - w1) * e2).abs()
}

/// `|w1 e1 - (1 - w1) e2|`: fused error after flipping the first branch.
pub fn complementary_error(e1: f64, e2: f64, w1: f64) -> f64 {
    (w1 * e1 - (1.0 - w1) * e2).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaModel {
    /// Every branch reports sigma = 1 (equal weights).
    Constant,
    /// Sigma equals the branch's absolute error.
    Proportional,
}

impl FromStr for SigmaModel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(Self::Constant),
            "proportional" => Ok(Self::Proportional),
            _ => Err(format!("unknown sigma model {s:?}")),
        }
    }
}

impl SigmaModel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Proportional => "proportional",
        }
    }

    /// Sigma for a branch with the given error; never below `1e-3` m.
    pub fn sigma(self, error: f64) -> f64 {
        match self {
            Self::Constant => 1.0,
            Self::Proportional => error.abs().max(1e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModelConfig {
    pub n_branches: usize,
    /// Expected share of branch pairs whose errors have the same sign.
    pub coupling_rate: f64,
    /// Scale of the half-normal error magnitude, meters.
    pub error_scale: f64,
    pub sigma_model: SigmaModel,
    pub seed: u64,
    /// Branch names; generated as `b0, b1, ...` when empty.
    pub branch_names: Vec<String>,
}

impl Default for ErrorModelConfig {
    fn default() -> Self {
        Self {
            n_branches: 4,
            coupling_rate: DEFAULT_COUPLING_RATE,
            error_scale: 1.0,
            sigma_model: SigmaModel::Constant,
            seed: 0,
            branch_names: Vec::new(),
        }
    }
}

impl ErrorModelConfig {
    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::InvalidConfig(m));
        if self.n_branches < 2 {
            return bad(format!("need at least 2 branches, got {}", self.n_branches));
        }
        if !(0.5..=1.0).contains(&self.coupling_rate) {
            return bad(format!(
                "coupling_rate {} outside [0.5, 1]; independent sign draws cannot couple fewer than half the pairs",
                self.coupling_rate
            ));
        }
        if !(self.error_scale > 0.0) || !self.error_scale.is_finite() {
            return bad(format!("error_scale must be positive, got {}", self.error_scale));
        }
        if !self.branch_names.is_empty() {
            if self.branch_names.len() != self.n_branches {
                return bad(format!("{} names for {} branches", self.branch_names.len(), self.n_branches));
            }
            let mut sorted = self.branch_names.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != self.n_branches {
                return bad("branch names must be unique".into());
            }
        }
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        if self.branch_names.is_empty() {
            (0..self.n_branches).map(|i| format!("b{i}")).collect()
        } else {
            self.branch_names.clone()
        }
    }

    /// Probability that a branch error takes the object's reference sign,
    /// chosen so that `q^2 + (1-q)^2 = coupling_rate`.
    pub fn agreement_probability(&self) -> f64 {
        0.5 * (1.0 + (2.0 * self.coupling_rate - 1.0).max(0.0).sqrt())
    }
}

fn object_key(frame: &str, index: usize) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in frame.as_bytes().iter().chain(&[0xff]).chain(&(index as u64).to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn object_stream(seed: u64, domain: u64, frame: &str, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(object_key(frame, index));
    rng
}

/// Synthetic frame id used by [`generate_ensembles`].
pub const SYNTHETIC_FRAME: &str = "synthetic";

/// One ensemble per truth depth. Each object draws a reference sign; each
/// branch keeps it with [`ErrorModelConfig::agreement_probability`], and its
/// error magnitude is half-normal with scale `error_scale`.
pub fn generate_ensembles(truths: &[f64], cfg: &ErrorModelConfig) -> Result<Vec<DepthEnsemble>, LabError> {
    cfg.validate()?;
    let names = cfg.names();
    let q = cfg.agreement_probability();
    let normal = Normal::new(0.0, cfg.error_scale).map_err(|e| LabError::InvalidConfig(e.to_string()))?;
    Ok(truths
        .iter()
        .enumerate()
        .map(|(i, &z_star)| {
            let mut rng = object_stream(cfg.seed, DOMAIN_GENERATE, SYNTHETIC_FRAME, i);
            let reference = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let branches = names
                .iter()
                .map(|name| {
                    let sign = if rng.random_bool(q) { reference } else { -reference };
                    let e = sign * normal.sample(&mut rng).abs();
                    BranchDepth::new(name.clone(), z_star + e, cfg.sigma_model.sigma(e))
                })
                .collect();
            DepthEnsemble {
                frame: SYNTHETIC_FRAME.into(),
                index: i,
                z_star: Some(z_star),
                y_glo: None,
                branches,
                invalid: Vec::new(),
            }
        })
        .collect())
}

/// `n` truth depths drawn uniformly from `[5, 60)` m.
pub fn synthetic_truths(n: usize, seed: u64) -> Vec<f64> {
    (0..n)
        .map(|i| object_stream(seed, DOMAIN_TRUTH, SYNTHETIC_FRAME, i).random_range(5.0..60.0))
        .collect()
}

/// Measured share of same-sign branch pairs, over pairs where both errors
/// are non-zero.
pub fn same_sign_proportion(ensembles: &[DepthEnsemble]) -> Option<f64> {
    let (mut same, mut total) = (0u64, 0u64);
    for e in ensembles {
        let z = e.z_star?;
        let errs: Vec<f64> = e.branches.iter().map(|b| b.z - z).collect();
        for i in 0..errs.len() {
            for j in i + 1..errs.len() {
                let p = errs[i] * errs[j];
                if p != 0.0 {
                    total += 1;
                    same += u64::from(p > 0.0);
                }
            }
        }
    }
    (total > 0).then(|| same as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    /// Control values: flip proportion in [0, 1] or disturbance amplitude in meters.
    pub x: Vec<f64>,
    /// Fused-depth MAE at each control value, meters.
    pub mae: Vec<f64>,
    pub count: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbCurve {
    pub curve: SweepCurve,
    /// Fused MAE with nothing flipped and no noise.
    pub baseline_mae: f64,
}

impl DisturbCurve {
    /// First amplitude where the disturbed curve rises above the baseline,
    /// linearly interpolated between sweep points.
    pub fn crossover(&self) -> Option<f64> {
        let (x, y, b) = (&self.curve.x, &self.curve.mae, self.baseline_mae);
        for i in 0..x.len() {
            if y[i] > b {
                if i == 0 {
                    return Some(x[0]);
                }
                let t = (b - y[i - 1]) / (y[i] - y[i - 1]);
                return Some(x[i - 1] + t * (x[i] - x[i - 1]));
            }
        }
        None
    }
}

/// A sweep curve tagged with the branch it perturbs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCurve {
    pub branch: String,
    #[serde(flatten)]
    pub curve: SweepCurve,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_mae: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crossover: Option<f64>,
}

impl NamedCurve {
    pub fn flip(branch: &str, curve: SweepCurve) -> Self {
        Self { branch: branch.to_string(), curve, baseline_mae: None, crossover: None }
    }

    pub fn disturb(branch: &str, d: DisturbCurve) -> Self {
        let crossover = d.crossover();
        Self { branch: branch.to_string(), curve: d.curve, baseline_mae: Some(d.baseline_mae), crossover }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiFlipResult {
    pub k: usize,
    pub flipped: Vec<String>,
    pub mae: f64,
    pub count: usize,
    /// Per-branch MAE; flipping leaves these unchanged.
    pub branch_mae: Vec<(String, f64)>,
}

/// Ensembles with truths, in the seeded canonical order.
struct Prepared<'a> {
    order: Vec<(&'a DepthEnsemble, f64)>,
}

impl<'a> Prepared<'a> {
    fn new(ensembles: &'a [DepthEnsemble], seed: u64) -> Result<Self, LabError> {
        if ensembles.is_empty() {
            return Err(LabError::Empty);
        }
        let mut keyed = Vec::with_capacity(ensembles.len());
        for e in ensembles {
            let z = e.z_star.ok_or_else(|| LabError::MissingTruth { frame: e.frame.clone(), index: e.index })?;
            let rank = object_stream(seed, DOMAIN_RANK, &e.frame, e.index).next_u64();
            keyed.push((rank, e, z));
        }
        keyed.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.frame.cmp(&b.1.frame)).then(a.1.index.cmp(&b.1.index)));
        Ok(Self { order: keyed.into_iter().map(|(_, e, z)| (e, z)).collect() })
    }

    fn require(&self, branch: &str) -> Result<(), LabError> {
        if self.order.iter().all(|(e, _)| e.branch(branch).is_some()) {
            Ok(())
        } else {
            Err(LabError::UnknownBranch(branch.to_string()))
        }
    }

    fn flip_count(&self, p: f64) -> usize {
        (p * self.order.len() as f64).round() as usize
    }

    /// Fused MAE where the first `n_flip` objects get `edit` applied to the
    /// named branches. `edit` receives the branch depth, the truth and a sign;
    /// with `antithetic`, each edited object is evaluated with sign `+1` and
    /// `-1` and the two absolute errors are averaged.
    fn mae_with<F>(&self, branches: &[&str], n_flip: usize, antithetic: bool, mut edit: F) -> Result<f64, LabError>
    where
        F: FnMut(&DepthEnsemble, f64, f64, f64) -> f64,
    {
        let mut sum = 0.0;
        let mut pairs = Vec::new();
        let mut fused_error = |e: &DepthEnsemble, z_star: f64, edited: bool, sign: f64| {
            pairs.clear();
            for b in &e.branches {
                let z = if edited && branches.contains(&b.name.as_str()) { edit(e, b.z, z_star, sign) } else { b.z };
                pairs.push((z, b.sigma));
            }
            soft_fuse(&pairs).map(|f| (f.z_soft - z_star).abs())
        };
        for (pos, &(e, z_star)) in self.order.iter().enumerate() {
            let edited = pos < n_flip;
            sum += if edited && antithetic {
                0.5 * (fused_error(e, z_star, true, 1.0)? + fused_error(e, z_star, true, -1.0)?)
            } else {
                fused_error(e, z_star, edited, 1.0)?
            };
        }
        Ok(sum / self.order.len() as f64)
    }
}

fn check_increasing(xs: &[f64], lo: f64, hi: f64, what: &str) -> Result<(), LabError> {
    if xs.is_empty() {
        return Err(LabError::InvalidControl(format!("no {what}")));
    }
    if xs.iter().any(|&x| !(lo..=hi).contains(&x)) {
        return Err(LabError::InvalidControl(format!("{what} must lie in [{lo}, {hi}]")));
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(LabError::InvalidControl(format!("{what} must be strictly increasing")));
    }
    Ok(())
}

/// Fused MAE after flipping `branch` on a growing share of objects. The
/// flipped sets are nested: a larger proportion flips a superset.
pub fn flip_sweep(
    ensembles: &[DepthEnsemble],
    branch: &str,
    proportions: &[f64],
    seed: u64,
) -> Result<SweepCurve, LabError> {
    check_increasing(proportions, 0.0, 1.0, "proportions")?;
    let prep = Prepared::new(ensembles, seed)?;
    prep.require(branch)?;
    let mae = proportions
        .iter()
        .map(|&p| prep.mae_with(&[branch], prep.flip_count(p), false, |_, z, zs, _| flip(z, zs)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepCurve { x: proportions.to_vec(), mae, count: vec![prep.order.len(); proportions.len()] })
}

/// Flips `branch` on half of the objects and adds `U(-a, a)` noise to the
/// flipped value for each amplitude `a`.
///
/// An object's unit noise draw `u` is shared across amplitudes and paired
/// with its negation: the object contributes the mean error under `+a u` and
/// `-a u`. Each term is then even and convex in `a`, so the curve cannot dip
/// below its zero-amplitude value through sampling noise.
pub fn disturb_sweep(
    ensembles: &[DepthEnsemble],
    branch: &str,
    amplitudes: &[f64],
    seed: u64,
) -> Result<DisturbCurve, LabError> {
    check_increasing(amplitudes, 0.0, f64::MAX, "amplitudes")?;
    let prep = Prepared::new(ensembles, seed)?;
    prep.require(branch)?;
    let baseline_mae = prep.mae_with(&[], 0, false, |_, z, _, _| z)?;
    let n_flip = prep.flip_count(0.5);
    let unit: std::collections::HashMap<(&str, usize), f64> = prep
        .order
        .iter()
        .take(n_flip)
        .map(|(e, _)| {
            let u = object_stream(seed, DOMAIN_NOISE, &e.frame, e.index).random_range(-1.0..1.0);
            ((e.frame.as_str(), e.index), u)
        })
        .collect();
    let mae = amplitudes
        .iter()
        .map(|&a| {
            prep.mae_with(&[branch], n_flip, true, |e, z, zs, s| flip(z, zs) + s * a * unit[&(e.frame.as_str(), e.index)])
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DisturbCurve {
        curve: SweepCurve { x: amplitudes.to_vec(), mae, count: vec![prep.order.len(); amplitudes.len()] },
        baseline_mae,
    })
}

/// Flips the first `k` branches (in the first ensemble's branch order) on
/// half of the objects.
pub fn multi_flip(ensembles: &[DepthEnsemble], k: usize, seed: u64) -> Result<MultiFlipResult, LabError> {
    let prep = Prepared::new(ensembles, seed)?;
    let names: Vec<String> = ensembles[0].branches.iter().map(|b| b.name.clone()).collect();
    if k > names.len() {
        return Err(LabError::KOutOfRange { k, n: names.len() });
    }
    for n in &names {
        prep.require(n)?;
    }
    let flipped: Vec<&str> = names[..k].iter().map(String::as_str).collect();
    let mae = prep.mae_with(&flipped, prep.flip_count(0.5), false, |_, z, zs, _| flip(z, zs))?;
    let branch_mae = names
        .iter()
        .map(|n| {
            let s: f64 = prep.order.iter().map(|(e, zs)| (e.branch(n).expect("checked").z - zs).abs()).sum();
            (n.clone(), s / prep.order.len() as f64)
        })
        .collect();
    Ok(MultiFlipResult {
        k,
        flipped: flipped.iter().map(|s| s.to_string()).collect(),
        mae,
        count: prep.order.len(),
        branch_mae,
    })
}
