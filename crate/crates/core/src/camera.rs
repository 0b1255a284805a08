//! Ideal pinhole camera in the KITTI rectified camera frame (x right, y down,
//! z forward). Lens distortion and skew are not modelled.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default guard for divisions whose denominator is a pixel offset.
pub const DEFAULT_EPS_DEN: f64 = 1e-6;

/// Errors raised by the single-value geometry API.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-positive depth {0}")]
    NonPositiveDepth(f64),
    #[error("pixel row lies on the horizon row (|v - c_v| = {0})")]
    HorizonSingularity(f64),
    #[error("projected box height too small ({0} px)")]
    DegenerateHeight(f64),
    #[error("box vertical midpoint projects onto the horizon row (|offset| = {0})")]
    MidpointSingularity(f64),
    #[error("box top projects onto the horizon row (|offset| = {0})")]
    TopSingularity(f64),
    #[error("viewing ray is parallel to the ground plane (denominator {0})")]
    RayParallelToPlane(f64),
    #[error("ground plane has no horizon (|B| = {0})")]
    DegeneratePlane(f64),
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Minimum magnitude accepted for horizon-adjacent denominators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eps(pub f64);

impl Default for Eps {
    fn default() -> Self {
        Eps(DEFAULT_EPS_DEN)
    }
}

impl Eps {
    #[inline]
    pub(crate) fn guard(self, den: f64) -> bool {
        den.abs() >= self.0 && den.is_finite()
    }
}

/// Pinhole intrinsics taken from the left color camera projection matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cu: f64,
    pub cv: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cu: f64, cv: f64) -> Result<Self, GeometryError> {
        if !(fx.is_finite() && fy.is_finite() && cu.is_finite() && cv.is_finite()) {
            return Err(GeometryError::NonFinite("intrinsics"));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        Ok(Self { fx, fy, cu, cv })
    }
}

/// Camera-frame point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Image position in pixels; `u` is the column and `v` the row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

pub fn project(p: Point3D, k: &CameraIntrinsics) -> Result<Pixel, GeometryError> {
    if !(p.z > 0.0) {
        return Err(GeometryError::NonPositiveDepth(p.z));
    }
    Ok(Pixel {
        u: k.fx * p.x / p.z + k.cu,
        v: k.fy * p.y / p.z + k.cv,
    })
}

/// Recovers the lateral and vertical camera coordinates of a pixel seen at depth `z`.
pub fn backproject_xy(u: f64, v: f64, z: f64, k: &CameraIntrinsics) -> Result<(f64, f64), GeometryError> {
    if !(z > 0.0) {
        return Err(GeometryError::NonPositiveDepth(z));
    }
    Ok(((u - k.cu) * z / k.fx, (v - k.cv) * z / k.fy))
}

/// Depth of a point at elevation `y` (meters below the camera center) whose
/// image row is `v_b`.
///
/// A positive elevation must appear below the principal row and vice versa;
/// otherwise the ray cannot reach that elevation in front of the camera.
pub fn depth_from_elevation(y: f64, v_b: f64, k: &CameraIntrinsics, eps: Eps) -> Result<f64, GeometryError> {
    let den = v_b - k.cv;
    if !eps.guard(den) {
        return Err(GeometryError::HorizonSingularity(den.abs()));
    }
    let z = k.fy * y / den;
    if !(z > 0.0) || !z.is_finite() {
        return Err(GeometryError::NonPositiveDepth(z));
    }
    Ok(z)
}
