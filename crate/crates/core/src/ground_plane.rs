//! Ground plane, its image horizon, and the horizon heatmap.
//!
//! The plane is stored as a unit normal `(a, b, c)` with `b < 0` together with
//! the camera height `h`, so that ground points satisfy
//! `a*x + b*y + c*z + h = 0` in the camera frame. The height is carried
//! explicitly instead of folding it into the normalization, which lets the
//! same normal be used with a different mounting height.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, Eps, GeometryError, Point3D};

/// Camera mounting height of the KITTI recording car, meters.
pub const KITTI_CAM_HEIGHT: f64 = 1.65;

/// Default splat radius for horizon heatmaps, pixels.
pub const DEFAULT_HEATMAP_RADIUS: usize = 2;

/// Columns whose peak falls below this are treated as off-image tails.
const IN_IMAGE_PEAK: f64 = 0.5;

/// Relative determinant threshold below which bottom points are treated as
/// collinear in the x-z plane.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("no points to fit")]
    EmptyInput,
    #[error("heatmap has {0} usable columns, need at least 2")]
    InsufficientSupport(usize),
    #[error("trim fraction {0} outside [0, 1)")]
    InvalidTrim(f64),
}

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a binary PGM (P5) image")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    Header(String),
    #[error("only 8-bit PGM is supported (maxval {0})")]
    UnsupportedDepth(u32),
    #[error("PGM payload has {got} bytes, expected {expected}")]
    Truncated { got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub cam_height: f64,
}

impl GroundPlane {
    /// Level ground `y = cam_height`.
    pub fn flat(cam_height: f64) -> Self {
        Self { a: 0.0, b: -1.0, c: 0.0, cam_height }
    }

    /// Builds a plane from an arbitrary-scale normal. The normal is rescaled to
    /// unit length and its sign chosen so that `b < 0`.
    pub fn from_normal(a: f64, b: f64, c: f64, cam_height: f64) -> Result<Self, GeometryError> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && cam_height.is_finite()) {
            return Err(GeometryError::NonFinite("plane"));
        }
        let norm = (a * a + b * b + c * c).sqrt();
        if b == 0.0 || norm == 0.0 {
            return Err(GeometryError::DegeneratePlane(b.abs()));
        }
        let s = if b < 0.0 { 1.0 / norm } else { -1.0 / norm };
        Ok(Self { a: a * s, b: b * s, c: c * s, cam_height })
    }

    pub fn normal(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    /// Camera-frame elevation of the plane below the point `(x, z)`.
    pub fn height_at(&self, x: f64, z: f64) -> f64 {
        -(self.a * x + self.c * z + self.cam_height) / self.b
    }

    pub fn is_normalized(&self) -> bool {
        (self.a * self.a + self.b * self.b + self.c * self.c - 1.0).abs() < 1e-9 && self.b < 0.0
    }
}

/// Image line `v = k_h * u + b_h` where the ground plane meets infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonLine {
    pub k_h: f64,
    pub b_h: f64,
}

impl HorizonLine {
    pub const fn new(k_h: f64, b_h: f64) -> Self {
        Self { k_h, b_h }
    }

    #[inline]
    pub fn row_at(&self, u: f64) -> f64 {
        self.k_h * u + self.b_h
    }
}

/// Least-squares fit of `y = slope_x * x + slope_z * z + offset` over object
/// bottoms, plus the ground plane built from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneFit {
    pub plane: GroundPlane,
    pub slope_x: f64,
    pub slope_z: f64,
    pub offset: f64,
    /// Perpendicular camera-to-plane distance implied by the fitted offset.
    pub fitted_height: f64,
    pub n_points: usize,
    /// True when the fit was under-determined and the flat plane was used.
    pub fallback: bool,
}

/// Fits the ground through object bottom centers.
///
/// The fitted normal is kept and the plane constant is replaced by
/// `cam_height`. Fewer than three points, or points collinear in x-z, fall
/// back to the flat plane.
pub fn fit_plane(bottoms: &[Point3D], cam_height: f64) -> Result<PlaneFit, FitError> {
    if bottoms.is_empty() {
        return Err(FitError::EmptyInput);
    }
    let n = bottoms.len() as f64;
    let fallback = |n_points| PlaneFit {
        plane: GroundPlane::flat(cam_height),
        slope_x: 0.0,
        slope_z: 0.0,
        offset: cam_height,
        fitted_height: cam_height,
        n_points,
        fallback: true,
    };
    if bottoms.len() < 3 {
        return Ok(fallback(bottoms.len()));
    }

    let (mx, my, mz) = bottoms
        .iter()
        .fold((0.0, 0.0, 0.0), |(sx, sy, sz), p| (sx + p.x, sy + p.y, sz + p.z));
    let (mx, my, mz) = (mx / n, my / n, mz / n);
    let (mut sxx, mut sxz, mut szz, mut sxy, mut szy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in bottoms {
        let (dx, dy, dz) = (p.x - mx, p.y - my, p.z - mz);
        sxx += dx * dx;
        sxz += dx * dz;
        szz += dz * dz;
        sxy += dx * dy;
        szy += dz * dy;
    }
    let det = sxx * szz - sxz * sxz;
    let scale = (sxx + szz) * (sxx + szz);
    if !(scale > 0.0) || det <= RANK_TOL * scale {
        return Ok(fallback(bottoms.len()));
    }
    let p = (sxy * szz - szy * sxz) / det;
    let q = (szy * sxx - sxy * sxz) / det;
    let r = my - p * mx - q * mz;

    let plane = GroundPlane::from_normal(p, -1.0, q, cam_height).expect("b = -1 is never degenerate");
    let norm = (p * p + 1.0 + q * q).sqrt();
    Ok(PlaneFit {
        plane,
        slope_x: p,
        slope_z: q,
        offset: r,
        fitted_height: r / norm,
        n_points: bottoms.len(),
        fallback: false,
    })
}

/// Converts a horizon line into the ground plane whose vanishing line it is.
pub fn horizon_to_plane(h: HorizonLine, k: &CameraIntrinsics, cam_height: f64) -> Result<GroundPlane, GeometryError> {
    let a = h.k_h * k.fx / k.fy;
    let c = (h.k_h * k.cu + h.b_h - k.cv) / k.fy;
    GroundPlane::from_normal(a, -1.0, c, cam_height)
}

pub fn plane_to_horizon(g: &GroundPlane, k: &CameraIntrinsics, eps: Eps) -> Result<HorizonLine, GeometryError> {
    if !eps.guard(g.b) {
        return Err(GeometryError::DegeneratePlane(g.b.abs()));
    }
    let k_h = -g.a * k.fy / (g.b * k.fx);
    let b_h = -g.c * k.fy / g.b - k_h * k.cu + k.cv;
    Ok(HorizonLine { k_h, b_h })
}

/// Elevation at which the viewing ray through the bottom pixel `(u_b, v_b)`
/// meets the ground plane.
pub fn y_global(u_b: f64, v_b: f64, g: &GroundPlane, k: &CameraIntrinsics, eps: Eps) -> Result<f64, GeometryError> {
    let dv = v_b - k.cv;
    if !eps.guard(dv) {
        return Err(GeometryError::HorizonSingularity(dv.abs()));
    }
    let n = k.fy * (u_b - k.cu) / (k.fx * dv);
    let m = k.fy / dv;
    let den = g.a * n + g.c * m + g.b;
    if !eps.guard(den) {
        return Err(GeometryError::RayParallelToPlane(den));
    }
    Ok(-g.cam_height / den)
}

/// Row-major grid of values in `[0, 1]`; row index is the image row.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonHeatmap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl HorizonHeatmap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    /// Wraps row-major data; values are clamped into `[0, 1]`, NaN becomes 0.
    pub fn from_data(width: usize, height: usize, mut data: Vec<f64>) -> Option<Self> {
        if data.len() != width * height {
            return None;
        }
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Some(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    /// Adds `f(row, col)` to every cell and clamps back into `[0, 1]`.
    pub fn perturb(&mut self, mut f: impl FnMut(usize, usize) -> f64) {
        for row in 0..self.height {
            for col in 0..self.width {
                let v = self.get(row, col) + f(row, col);
                self.set(row, col, if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
    }

    /// Binary 8-bit PGM: `P5\n<w> <h>\n255\n` then `w*h` bytes, row-major,
    /// each byte `round(255 * value)`.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut header = String::new();
        let _ = write!(header, "P5\n{} {}\n255\n", self.width, self.height);
        let mut out = header.into_bytes();
        out.extend(self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        out
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self, PgmError> {
        let mut pos = 0usize;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
                pos += 1;
            }
            if start == pos {
                return Err(PgmError::Header("unexpected end of header".into()));
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if tokens[0] != "P5" {
            return Err(PgmError::BadMagic);
        }
        let num = |s: &str| s.parse::<u32>().map_err(|_| PgmError::Header(format!("bad number {s:?}")));
        let (width, height, maxval) = (num(&tokens[1])? as usize, num(&tokens[2])? as usize, num(&tokens[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(PgmError::UnsupportedDepth(maxval));
        }
        // exactly one whitespace byte separates the header from the raster
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(PgmError::Header("missing raster separator".into()));
        }
        let raster = &bytes[pos + 1..];
        let expected = width * height;
        if raster.len() < expected {
            return Err(PgmError::Truncated { got: raster.len(), expected });
        }
        let data = raster[..expected].iter().map(|&b| f64::from(b) / f64::from(maxval)).collect();
        Ok(Self { width, height, data })
    }
}

/// Draws `h` into a `width x height` heatmap with a vertical Gaussian per
/// column (sigma = radius / 3, truncated at +-radius, unit peak).
pub fn rasterize_horizon(h: HorizonLine, width: usize, height: usize, radius: usize) -> HorizonHeatmap {
    let mut map = HorizonHeatmap::zeros(width, height);
    if radius == 0 {
        for col in 0..width {
            let r = h.row_at(col as f64).round();
            if r >= 0.0 && (r as usize) < height {
                map.set(r as usize, col, 1.0);
            }
        }
        return map;
    }
    let rad = radius as f64;
    let sigma = rad / 3.0;
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    for col in 0..width {
        let center = h.row_at(col as f64);
        if !center.is_finite() {
            continue;
        }
        let lo = (center - rad).ceil().max(0.0);
        let hi = (center + rad).floor().min(height as f64 - 1.0);
        if lo > hi {
            continue;
        }
        for row in lo as usize..=hi as usize {
            let d = row as f64 - center;
            map.set(row, col, (-d * d * inv_two_var).exp());
        }
    }
    map
}

/// Line recovered from a heatmap, with support diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonFit {
    pub line: HorizonLine,
    /// Columns with a non-zero maximum (used in the fit).
    pub support: usize,
    /// Supporting columns whose peak indicates the line row lies inside the image.
    pub in_image: usize,
    /// Set when fewer than half of the supporting columns are in-image.
    pub degraded: bool,
}

fn column_peaks(m: &HorizonHeatmap) -> Vec<(f64, f64, f64)> {
    let mut peaks = Vec::with_capacity(m.width);
    for col in 0..m.width {
        let mut best_row = 0usize;
        let mut best = 0.0f64;
        for row in 0..m.height {
            let v = m.get(row, col);
            // strict comparison keeps the smallest row on ties
            if v > best {
                best = v;
                best_row = row;
            }
        }
        if best > 0.0 {
            peaks.push((col as f64, best_row as f64, best));
        }
    }
    peaks
}

fn least_squares_line(pts: &[(f64, f64)]) -> Option<HorizonLine> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mu = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut suu, mut suv) = (0.0, 0.0);
    for &(u, v) in pts {
        suu += (u - mu) * (u - mu);
        suv += (u - mu) * (v - mv);
    }
    if suu == 0.0 {
        return None;
    }
    let k_h = suv / suu;
    Some(HorizonLine { k_h, b_h: mv - k_h * mu })
}

/// Ordinary least-squares line through the per-column argmax rows.
pub fn fit_horizon(m: &HorizonHeatmap) -> Result<HorizonFit, FitError> {
    let peaks = column_peaks(m);
    let pts: Vec<(f64, f64)> = peaks.iter().map(|&(u, v, _)| (u, v)).collect();
    let line = least_squares_line(&pts).ok_or(FitError::InsufficientSupport(pts.len()))?;
    let in_image = peaks.iter().filter(|p| p.2 >= IN_IMAGE_PEAK).count();
    Ok(HorizonFit { line, support: pts.len(), in_image, degraded: 2 * in_image < pts.len() })
}

/// Least-squares fit followed by one refit on the `1 - trim` fraction of
/// columns with the smallest absolute residuals.
pub fn fit_horizon_trimmed(m: &HorizonHeatmap, trim: f64) -> Result<HorizonFit, FitError> {
    if !(0.0..1.0).contains(&trim) {
        return Err(FitError::InvalidTrim(trim));
    }
    let first = fit_horizon(m)?;
    let peaks = column_peaks(m);
    let mut ranked: Vec<(f64, usize)> = peaks
        .iter()
        .enumerate()
        .map(|(i, &(u, v, _))| ((v - first.line.row_at(u)).abs(), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let keep = ((peaks.len() as f64) * (1.0 - trim)).ceil().max(2.0) as usize;
    let mut kept: Vec<usize> = ranked.into_iter().take(keep).map(|(_, i)| i).collect();
    kept.sort_unstable();
    let pts: Vec<(f64, f64)> = kept.iter().map(|&i| (peaks[i].0, peaks[i].1)).collect();
    let line = least_squares_line(&pts).ok_or(FitError::InsufficientSupport(pts.len()))?;
    Ok(HorizonFit { line, ..first })
}
