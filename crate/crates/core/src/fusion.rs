//! Inverse-uncertainty weighted fusion of branch depths.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("no branches to fuse")]
    EmptyEnsemble,
    #[error("branch {index}: sigma must be positive and finite, got {sigma}")]
    NonPositiveSigma { index: usize, sigma: f64 },
    #[error("branch {index}: depth is not finite")]
    NonFiniteDepth { index: usize },
    #[error("every branch is masked out")]
    AllBranchesInvalid,
    #[error("mask has {mask} entries for {branches} branches")]
    MaskLength { mask: usize, branches: usize },
}

/// Fused depth and the normalized weight of every input branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedDepth {
    pub z_soft: f64,
    pub weights: Vec<f64>,
}

/// Weights `w_i = (1/sigma_i) / sum_j (1/sigma_j)` and `z_soft = sum w_i z_i`.
pub fn soft_fuse(branches: &[(f64, f64)]) -> Result<FusedDepth, FusionError> {
    fuse_impl(branches, None)
}

/// Like [`soft_fuse`] over the branches with `mask[i] == true`. Masked-out
/// branches get weight zero.
pub fn fuse_with_mask(branches: &[(f64, f64)], mask: &[bool]) -> Result<FusedDepth, FusionError> {
    if mask.len() != branches.len() {
        return Err(FusionError::MaskLength { mask: mask.len(), branches: branches.len() });
    }
    fuse_impl(branches, Some(mask))
}

fn fuse_impl(branches: &[(f64, f64)], mask: Option<&[bool]>) -> Result<FusedDepth, FusionError> {
    if branches.is_empty() {
        return Err(FusionError::EmptyEnsemble);
    }
    let active = |i: usize| mask.is_none_or(|m| m[i]);
    let mut total = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &(z, sigma)) in branches.iter().enumerate() {
        if !active(i) {
            continue;
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(FusionError::NonPositiveSigma { index: i, sigma });
        }
        if !z.is_finite() {
            return Err(FusionError::NonFiniteDepth { index: i });
        }
        total += 1.0 / sigma;
        lo = lo.min(z);
        hi = hi.max(z);
    }
    if total == 0.0 {
        return Err(FusionError::AllBranchesInvalid);
    }
    let weights: Vec<f64> = branches
        .iter()
        .enumerate()
        .map(|(i, &(_, s))| if active(i) { (1.0 / s) / total } else { 0.0 })
        .collect();
    let z: f64 = branches.iter().zip(&weights).map(|(&(z, _), &w)| if w > 0.0 { w * z } else { 0.0 }).sum();
    // rounding can push a convex combination just outside its hull
    Ok(FusedDepth { z_soft: z.clamp(lo, hi), weights })
}
