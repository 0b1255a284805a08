//! Depth error statistics: MAE, error-sign opposition (ESOP), the
//! complementarity score, and binned MAE tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::soft_fuse;
use crate::kitti_io::DepthEnsemble;

/// Truth-depth bins, meters: [0,20), [20,40), [40,inf).
pub const DEFAULT_DEPTH_EDGES: [f64; 4] = [0.0, 20.0, 40.0, f64::INFINITY];

/// Ground-elevation error levels, meters.
pub const DEFAULT_Y_ERROR_EDGES: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, f64::INFINITY];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("MAE is zero; complementarity score undefined")]
    ZeroMae,
    #[error("bin edges must be strictly increasing and at least two")]
    NonMonotoneEdges,
}

fn check_lengths(a: usize, b: usize) -> Result<(), MetricsError> {
    if a != b {
        return Err(MetricsError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(pred.len(), truth.len())?;
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// Percentage of samples whose two errors have strictly opposite signs.
/// A zero error is never counted as opposite.
pub fn esop(errors_a: &[f64], errors_b: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(errors_a.len(), errors_b.len())?;
    let opposite = errors_a.iter().zip(errors_b).filter(|(a, b)| **a * **b < 0.0).count();
    Ok(100.0 * opposite as f64 / errors_a.len() as f64)
}

/// ESOP in percent divided by MAE in meters.
pub fn complementarity_score(esop_pct: f64, mae_z: f64) -> Result<f64, MetricsError> {
    if !(mae_z > 0.0) {
        return Err(MetricsError::ZeroMae);
    }
    Ok(esop_pct / mae_z)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lower: f64,
    /// `None` stands for +infinity.
    pub upper: Option<f64>,
    /// `None` when the bin is empty.
    pub mae: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedMae {
    pub rows: Vec<BinRow>,
    /// Samples whose key fell outside every bin.
    pub unbinned: usize,
}

impl BinnedMae {
    pub fn total_count(&self) -> usize {
        self.rows.iter().map(|r| r.count).sum()
    }
}

/// MAE of `(pred, truth)` pairs grouped by `keys` into `[edges[i], edges[i+1])`.
pub fn binned_mae(pairs: &[(f64, f64)], keys: &[f64], edges: &[f64]) -> Result<BinnedMae, MetricsError> {
    if pairs.len() != keys.len() {
        return Err(MetricsError::LengthMismatch(pairs.len(), keys.len()));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| e.is_nan()) {
        return Err(MetricsError::NonMonotoneEdges);
    }
    let nbins = edges.len() - 1;
    let mut sums = vec![0.0; nbins];
    let mut counts = vec![0usize; nbins];
    let mut unbinned = 0;
    for (&(p, t), &key) in pairs.iter().zip(keys) {
        // first edge strictly above the key, minus one
        let idx = edges.partition_point(|&e| e <= key);
        if idx == 0 || idx > nbins || key.is_nan() {
            unbinned += 1;
            continue;
        }
        sums[idx - 1] += (p - t).abs();
        counts[idx - 1] += 1;
    }
    let rows = (0..nbins)
        .map(|i| BinRow {
            lower: edges[i],
            upper: edges[i + 1].is_finite().then_some(edges[i + 1]),
            mae: (counts[i] > 0).then(|| sums[i] / counts[i] as f64),
            count: counts[i],
        })
        .collect();
    Ok(BinnedMae { rows, unbinned })
}

/// Bins by the ground-truth depth of each pair.
pub fn binned_mae_by_depth(pairs: &[(f64, f64)], edges: &[f64]) -> Result<BinnedMae, MetricsError> {
    let keys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    binned_mae(pairs, &keys, edges)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchMae {
    pub branch: String,
    pub mae: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsopEntry {
    pub a: String,
    pub b: String,
    pub esop: Option<f64>,
    pub count: usize,
    /// Names the pair when it is one the complementarity analysis singles
    /// out: `global-local` or `key-dir`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsEntry {
    pub branch: String,
    pub partner: String,
    pub esop: Option<f64>,
    pub mae: Option<f64>,
    pub cs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSeries {
    /// Branch name or `fused`.
    pub series: String,
    /// `truth_depth` or `y_error`.
    pub key: String,
    pub table: BinnedMae,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplementarityReport {
    /// Run configuration echoed for reproducibility.
    pub header: BTreeMap<String, String>,
    pub sample_count: usize,
    pub branches: Vec<String>,
    pub mae: Vec<BranchMae>,
    pub esop: Vec<EsopEntry>,
    pub cs: Vec<CsEntry>,
    pub fused: Option<BranchMae>,
    pub binned: Vec<BinnedSeries>,
    /// Per-branch count of objects whose branch was reported invalid.
    pub invalid: BTreeMap<String, usize>,
}

impl ComplementarityReport {
    /// Symmetric ESOP matrix in `branches` order; the diagonal is `None`.
    pub fn esop_matrix(&self) -> Vec<Vec<Option<f64>>> {
        let n = self.branches.len();
        let pos = |name: &str| self.branches.iter().position(|b| b == name);
        let mut m = vec![vec![None; n]; n];
        for e in &self.esop {
            if let (Some(i), Some(j)) = (pos(&e.a), pos(&e.b)) {
                m[i][j] = e.esop;
                m[j][i] = e.esop;
            }
        }
        m
    }
}

fn is_global(name: &str) -> bool {
    name.starts_with("comp") || name.starts_with("glo") || name.starts_with("alt")
}

fn is_local(name: &str) -> bool {
    name.starts_with("key") || name.starts_with("dir")
}

fn pair_label(a: &str, b: &str) -> Option<String> {
    if (is_global(a) && is_local(b)) || (is_global(b) && is_local(a)) {
        Some("global-local".into())
    } else if (a.starts_with("key") && b.starts_with("dir")) || (b.starts_with("key") && a.starts_with("dir")) {
        Some("key-dir".into())
    } else {
        None
    }
}

/// Options for [`evaluate`].
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub depth_edges: Vec<f64>,
    pub y_error_edges: Vec<f64>,
    pub header: BTreeMap<String, String>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            depth_edges: DEFAULT_DEPTH_EDGES.to_vec(),
            y_error_edges: DEFAULT_Y_ERROR_EDGES.to_vec(),
            header: BTreeMap::new(),
        }
    }
}

/// One ensemble joined to its ground truth.
#[derive(Debug, Clone)]
pub struct EvalSample<'a> {
    pub ensemble: &'a DepthEnsemble,
    pub z_star: f64,
    /// Ground-truth elevation of the object's bottom, when known.
    pub y_star: Option<f64>,
}

/// Builds the full complementarity report. Branch statistics use every sample
/// where that branch (or both branches of a pair) is present.
pub fn evaluate(samples: &[EvalSample<'_>], opts: &EvalOptions) -> Result<ComplementarityReport, MetricsError> {
    let mut branches: Vec<String> = Vec::new();
    let mut invalid: BTreeMap<String, usize> = BTreeMap::new();
    for s in samples {
        for b in &s.ensemble.branches {
            if !branches.contains(&b.name) {
                branches.push(b.name.clone());
            }
        }
        for name in &s.ensemble.invalid {
            *invalid.entry(name.clone()).or_default() += 1;
        }
    }

    // errors[branch][sample] = Some(z - z*)
    let errors: Vec<Vec<Option<f64>>> = branches
        .iter()
        .map(|name| samples.iter().map(|s| s.ensemble.branch(name).map(|b| b.z - s.z_star)).collect())
        .collect();

    let mut mae_rows = Vec::with_capacity(branches.len());
    for (name, errs) in branches.iter().zip(&errors) {
        let present: Vec<f64> = errs.iter().flatten().copied().collect();
        let m = if present.is_empty() { None } else { Some(present.iter().map(|e| e.abs()).sum::<f64>() / present.len() as f64) };
        mae_rows.push(BranchMae { branch: name.clone(), mae: m, count: present.len() });
    }

    let mut esop_rows = Vec::new();
    let mut cs_rows = Vec::new();
    for i in 0..branches.len() {
        for j in 0..branches.len() {
            if i == j {
                continue;
            }
            let (ea, eb): (Vec<f64>, Vec<f64>) =
                errors[i].iter().zip(&errors[j]).filter_map(|(a, b)| Some(((*a)?, (*b)?))).unzip();
            let e = esop(&ea, &eb).ok();
            if i < j {
                esop_rows.push(EsopEntry {
                    a: branches[i].clone(),
                    b: branches[j].clone(),
                    esop: e,
                    count: ea.len(),
                    label: pair_label(&branches[i], &branches[j]),
                });
            }
            let m = mae_rows[i].mae;
            let (cs, flag) = match (e, m) {
                (Some(e), Some(m)) => match complementarity_score(e, m) {
                    Ok(cs) => (Some(cs), None),
                    Err(_) => (None, Some("ZeroMAE".to_string())),
                },
                _ => (None, Some("NoSamples".to_string())),
            };
            cs_rows.push(CsEntry { branch: branches[i].clone(), partner: branches[j].clone(), esop: e, mae: m, cs, flag });
        }
    }

    // fused depth over each sample's present branches
    let mut fused_pairs = Vec::new();
    let mut fused_y_keys = Vec::new();
    for s in samples {
        if let Ok(f) = soft_fuse(&s.ensemble.pairs()) {
            fused_pairs.push((f.z_soft, s.z_star));
            fused_y_keys.push(match (s.ensemble.y_glo, s.y_star) {
                (Some(y), Some(ys)) => (y - ys).abs(),
                _ => f64::NAN,
            });
        }
    }
    let fused = (!samples.is_empty()).then(|| BranchMae {
        branch: "fused".into(),
        mae: (!fused_pairs.is_empty())
            .then(|| fused_pairs.iter().map(|(p, t)| (p - t).abs()).sum::<f64>() / fused_pairs.len() as f64),
        count: fused_pairs.len(),
    });

    let mut binned = Vec::new();
    binned.push(BinnedSeries {
        series: "fused".into(),
        key: "truth_depth".into(),
        table: binned_mae_by_depth(&fused_pairs, &opts.depth_edges)?,
    });
    if fused_y_keys.iter().any(|k| !k.is_nan()) {
        binned.push(BinnedSeries {
            series: "fused".into(),
            key: "y_error".into(),
            table: binned_mae(&fused_pairs, &fused_y_keys, &opts.y_error_edges)?,
        });
    }
    for (name, errs) in branches.iter().zip(&errors) {
        let pairs: Vec<(f64, f64)> =
            errs.iter().zip(samples).filter_map(|(e, s)| e.map(|e| (s.z_star + e, s.z_star))).collect();
        binned.push(BinnedSeries {
            series: name.clone(),
            key: "truth_depth".into(),
            table: binned_mae_by_depth(&pairs, &opts.depth_edges)?,
        });
    }

    Ok(ComplementarityReport {
        header: opts.header.clone(),
        sample_count: samples.len(),
        branches,
        mae: mae_rows,
        esop: esop_rows,
        cs: cs_rows,
        fused,
        binned,
        invalid,
    })
}
