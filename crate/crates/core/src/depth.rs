//! Per-object geometric depth estimators.
//!
//! Every estimator divides by a pixel offset, so each has its own singularity
//! error; all share the [`Eps`] guard with the camera module.

use serde::{Deserialize, Serialize};

use crate::camera::{project, CameraIntrinsics, Eps, GeometryError, Pixel, Point3D};
use crate::kitti_io::Object3D;

/// Projected bottom and top of one vertical box edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalEdge {
    pub bottom: Pixel,
    pub top: Pixel,
}

/// Keypoints used by the height-based estimators.
///
/// `diagonals[0]` pairs footprint corners 0 and 2, `diagonals[1]` pairs 1
/// and 3 (KITTI devkit corner order). A diagonal is `None` when one of its
/// corners is not in front of the camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxKeypoints {
    pub bottom_center: Pixel,
    pub top_center: Pixel,
    pub diagonals: [Option<[VerticalEdge; 2]>; 2],
}

/// Footprint corners (x, z) of a box with bottom center `loc`, yaw `ry`.
fn footprint(loc: Point3D, w: f64, l: f64, ry: f64) -> [(f64, f64); 4] {
    let (s, c) = ry.sin_cos();
    let xs = [l / 2.0, l / 2.0, -l / 2.0, -l / 2.0];
    let zs = [w / 2.0, -w / 2.0, -w / 2.0, w / 2.0];
    let mut out = [(0.0, 0.0); 4];
    for i in 0..4 {
        out[i] = (loc.x + c * xs[i] + s * zs[i], loc.z - s * xs[i] + c * zs[i]);
    }
    out
}

/// Keypoints of a box given its bottom center, dimensions and yaw.
pub fn box_keypoints_at(
    loc: Point3D,
    h: f64,
    w: f64,
    l: f64,
    ry: f64,
    k: &CameraIntrinsics,
) -> Result<BoxKeypoints, GeometryError> {
    let bottom_center = project(loc, k)?;
    let top_center = project(Point3D::new(loc.x, loc.y - h, loc.z), k)?;
    let edge = |(x, z): (f64, f64)| -> Option<VerticalEdge> {
        Some(VerticalEdge {
            bottom: project(Point3D::new(x, loc.y, z), k).ok()?,
            top: project(Point3D::new(x, loc.y - h, z), k).ok()?,
        })
    };
    let fp = footprint(loc, w, l, ry);
    let pair = |i: usize, j: usize| Some([edge(fp[i])?, edge(fp[j])?]);
    Ok(BoxKeypoints { bottom_center, top_center, diagonals: [pair(0, 2), pair(1, 3)] })
}

pub fn box_keypoints(o: &Object3D, k: &CameraIntrinsics) -> Result<BoxKeypoints, GeometryError> {
    box_keypoints_at(o.location(), o.h, o.w, o.l, o.ry, k)
}

/// Depth from the 3D height and its projected vertical extent.
pub fn z_key(h: f64, v_b: f64, v_t: f64, k: &CameraIntrinsics, eps: Eps) -> Result<f64, GeometryError> {
    let den = v_b - v_t;
    if !(den >= eps.0) || !den.is_finite() {
        return Err(GeometryError::DegenerateHeight(den));
    }
    positive(k.fy * h / den)
}

/// Depth from the ground-plane elevation of the bottom keypoint.
pub fn z_global(y_glo: f64, v_b: f64, k: &CameraIntrinsics, eps: Eps) -> Result<f64, GeometryError> {
    crate::camera::depth_from_elevation(y_glo, v_b, k, eps)
}

/// Depth from the elevation of the box's vertical midpoint and the row of its
/// projection. Errors in `h` and `v_t` move this estimate opposite to
/// [`z_key`].
pub fn z_comp(y_glo: f64, h: f64, v_b: f64, v_t: f64, k: &CameraIntrinsics, eps: Eps) -> Result<f64, GeometryError> {
    let den = 0.5 * (v_b + v_t) - k.cv;
    if !eps.guard(den) {
        return Err(GeometryError::MidpointSingularity(den.abs()));
    }
    positive(k.fy * (y_glo - 0.5 * h) / den)
}

/// Depth from the elevation of the box top. Ill-conditioned when the top
/// projects near the principal row, which is the usual case for cars seen
/// from a camera mounted at roughly their height.
pub fn z_alt(y_glo: f64, h: f64, v_t: f64, k: &CameraIntrinsics, eps: Eps) -> Result<f64, GeometryError> {
    let den = v_t - k.cv;
    if !eps.guard(den) {
        return Err(GeometryError::TopSingularity(den.abs()));
    }
    positive(k.fy * (y_glo - h) / den)
}

/// Mean of the per-edge [`z_key`] depths of a diagonal pair.
pub fn z_key_diagonal(h: f64, pair: &[VerticalEdge; 2], k: &CameraIntrinsics, eps: Eps) -> Result<f64, GeometryError> {
    let a = z_key(h, pair[0].bottom.v, pair[0].top.v, k, eps)?;
    let b = z_key(h, pair[1].bottom.v, pair[1].top.v, k, eps)?;
    Ok(0.5 * (a + b))
}

/// Mean of the per-edge [`z_comp`] depths of a diagonal pair. All edges share
/// the object's ground elevation `y_glo`.
pub fn z_comp_diagonal(
    y_glo: f64,
    h: f64,
    pair: &[VerticalEdge; 2],
    k: &CameraIntrinsics,
    eps: Eps,
) -> Result<f64, GeometryError> {
    let a = z_comp(y_glo, h, pair[0].bottom.v, pair[0].top.v, k, eps)?;
    let b = z_comp(y_glo, h, pair[1].bottom.v, pair[1].top.v, k, eps)?;
    Ok(0.5 * (a + b))
}

/// Rescales a depth regressed under focal length `f_train` for a camera with
/// focal length `f_test`.
pub fn focal_rescale(z: f64, f_train: f64, f_test: f64) -> Result<f64, GeometryError> {
    if !(f_train > 0.0 && f_test > 0.0) {
        return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
    }
    Ok(z * (f_test / f_train))
}

fn positive(z: f64) -> Result<f64, GeometryError> {
    if z > 0.0 && z.is_finite() {
        Ok(z)
    } else {
        Err(GeometryError::NonPositiveDepth(z))
    }
}

/// Branch names emitted by [`geometric_depths`], in output order.
pub const GEOMETRIC_BRANCHES: [&str; 8] = ["key0", "key1", "key2", "glo", "comp0", "comp1", "comp2", "alt"];

/// All geometric estimates for one object. Index 0 of `key`/`comp` uses the
/// center keypoints; 1 and 2 use the diagonal pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricDepths {
    pub key: [Result<f64, GeometryError>; 3],
    pub glo: Result<f64, GeometryError>,
    pub comp: [Result<f64, GeometryError>; 3],
    pub alt: Result<f64, GeometryError>,
}

impl GeometricDepths {
    /// `(name, estimate)` pairs in [`GEOMETRIC_BRANCHES`] order.
    pub fn named(&self) -> [(&'static str, Result<f64, GeometryError>); 8] {
        let n = GEOMETRIC_BRANCHES;
        [
            (n[0], self.key[0]),
            (n[1], self.key[1]),
            (n[2], self.key[2]),
            (n[3], self.glo),
            (n[4], self.comp[0]),
            (n[5], self.comp[1]),
            (n[6], self.comp[2]),
            (n[7], self.alt),
        ]
    }
}

const MISSING_CORNER: GeometryError = GeometryError::NonPositiveDepth(0.0);

pub fn geometric_depths(kp: &BoxKeypoints, h: f64, y_glo: f64, k: &CameraIntrinsics, eps: Eps) -> GeometricDepths {
    let (vb, vt) = (kp.bottom_center.v, kp.top_center.v);
    let diag_key = |d: &Option<[VerticalEdge; 2]>| d.as_ref().map_or(Err(MISSING_CORNER), |p| z_key_diagonal(h, p, k, eps));
    let diag_comp =
        |d: &Option<[VerticalEdge; 2]>| d.as_ref().map_or(Err(MISSING_CORNER), |p| z_comp_diagonal(y_glo, h, p, k, eps));
    GeometricDepths {
        key: [z_key(h, vb, vt, k, eps), diag_key(&kp.diagonals[0]), diag_key(&kp.diagonals[1])],
        glo: z_global(y_glo, vb, k, eps),
        comp: [z_comp(y_glo, h, vb, vt, k, eps), diag_comp(&kp.diagonals[0]), diag_comp(&kp.diagonals[1])],
        alt: z_alt(y_glo, h, vt, k, eps),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_plane::{y_global, GroundPlane};

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(700.0, 700.0, 600.0, 200.0).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn keypoints_of_centered_object() {
        let kp = box_keypoints_at(Point3D::new(0.0, 1.65, 20.0), 1.5, 1.6, 3.9, 0.0, &k()).unwrap();
        assert_eq!(kp.bottom_center.u, 600.0);
        assert_eq!(kp.top_center.u, 600.0);
        assert!(close(kp.bottom_center.v, 257.75, 1e-12));
        assert!(close(kp.top_center.v, 205.25, 1e-12));
    }

    #[test]
    fn diagonal_columns_are_symmetric_about_center_for_zero_yaw() {
        let kk = k();
        let kp = box_keypoints_at(Point3D::new(0.0, 1.65, 15.0), 1.5, 1.6, 3.9, 0.0, &kk).unwrap();
        let [d0, d1] = kp.diagonals.map(|d| d.unwrap());
        // independent oracle: project the corners directly
        let col = |x: f64, z: f64| kk.fx * x / z + kk.cu;
        assert!(close(d0[0].bottom.u, col(1.95, 15.8), 1e-12));
        assert!(close(d0[1].bottom.u, col(-1.95, 14.2), 1e-12));
        let mean = (d0[0].bottom.u + d0[1].bottom.u + d1[0].bottom.u + d1[1].bottom.u) / 4.0;
        assert!(close(mean, kp.bottom_center.u, 1e-12));
        for e in d0.iter().chain(d1.iter()) {
            assert_eq!(e.bottom.u, e.top.u);
        }
    }

    #[test]
    fn corners_behind_camera_drop_diagonals() {
        let kp = box_keypoints_at(Point3D::new(0.0, 1.65, 1.0), 1.5, 4.0, 4.0, 0.3, &k()).unwrap();
        assert!(kp.diagonals.iter().any(|d| d.is_none()));
        assert!(box_keypoints_at(Point3D::new(0.0, 1.65, -1.0), 1.5, 1.6, 3.9, 0.0, &k()).is_err());
    }

    #[test]
    fn key_depth_examples() {
        let kk = k();
        assert!(close(z_key(1.5, 257.75, 205.25, &kk, Eps::default()).unwrap(), 20.0, 1e-12));
        assert!(matches!(z_key(1.5, 230.0, 230.0, &kk, Eps::default()), Err(GeometryError::DegenerateHeight(_))));
        assert!(matches!(z_key(1.5, 200.0, 230.0, &kk, Eps::default()), Err(GeometryError::DegenerateHeight(_))));
        let a = z_key(1.5, 257.75, 205.25, &kk, Eps::default()).unwrap();
        let b = z_key(3.0, 257.75, 205.25, &kk, Eps::default()).unwrap();
        assert!(close(b, 2.0 * a, 1e-15));
    }

    #[test]
    fn global_depth_examples() {
        let kk = k();
        assert!(close(z_global(1.65, 257.75, &kk, Eps::default()).unwrap(), 20.0, 1e-12));
        assert!(matches!(z_global(1.65, 190.0, &kk, Eps::default()), Err(GeometryError::NonPositiveDepth(_))));
        assert!(matches!(z_global(1.65, 200.0, &kk, Eps::default()), Err(GeometryError::HorizonSingularity(_))));
    }

    #[test]
    fn complementary_depth_examples() {
        let kk = k();
        // 700 * 0.9 / 31.5
        assert!(close(z_comp(1.65, 1.5, 257.75, 205.25, &kk, Eps::default()).unwrap(), 20.0, 1e-12));
        assert!(matches!(
            z_comp(1.65, 1.5, 210.0, 190.0, &kk, Eps::default()),
            Err(GeometryError::MidpointSingularity(_))
        ));
        // object taller than twice its ground elevation
        assert!(matches!(
            z_comp(1.0, 2.5, 240.0, 210.0, &kk, Eps::default()),
            Err(GeometryError::NonPositiveDepth(_))
        ));
    }

    #[test]
    fn alternative_depth_examples() {
        let kk = k();
        // 700 * 0.15 / 5.25
        assert!(close(z_alt(1.65, 1.5, 205.25, &kk, Eps::default()).unwrap(), 20.0, 1e-12));
        assert!(matches!(z_alt(1.65, 1.5, 200.0, &kk, Eps::default()), Err(GeometryError::TopSingularity(_))));
    }

    #[test]
    fn height_sensitivities_are_opposite() {
        let kk = k();
        let (vb, vt, y) = (257.75, 205.25, 1.65);
        let step = 1e-6;
        let dk = (z_key(1.5 + step, vb, vt, &kk, Eps::default()).unwrap() - z_key(1.5, vb, vt, &kk, Eps::default()).unwrap()) / step;
        let dc = (z_comp(y, 1.5 + step, vb, vt, &kk, Eps::default()).unwrap()
            - z_comp(y, 1.5, vb, vt, &kk, Eps::default()).unwrap())
            / step;
        assert!(dk > 0.0 && dc < 0.0);
        // analytic: dz_key/dH = fy/(vb-vt), dz_comp/dH = -fy/2/(mid-cv)
        assert!(close(dk, 700.0 / 52.5, 1e-5));
        assert!(close(dc, -350.0 / 31.5, 1e-5));
    }

    #[test]
    fn focal_rescaling() {
        assert_eq!(focal_rescale(30.0, 721.5, 721.5).unwrap(), 30.0);
        let f_test = 721.5377;
        let f_train = 1.361 * f_test;
        assert!(close(focal_rescale(30.0, f_train, f_test).unwrap(), 30.0 / 1.361, 1e-12));
        let there = focal_rescale(42.0, 700.0, 1266.4).unwrap();
        assert!(close(focal_rescale(there, 1266.4, 700.0).unwrap(), 42.0, 1e-14));
        assert!(focal_rescale(1.0, 0.0, 700.0).is_err());
    }

    #[test]
    fn all_branches_recover_depth_on_sloped_ground() {
        let kk = k();
        let g = GroundPlane::from_normal(0.02, -1.0, -0.03, 1.65).unwrap();
        let (x, z) = (-3.0, 27.0);
        let loc = Point3D::new(x, g.height_at(x, z), z);
        let kp = box_keypoints_at(loc, 1.52, 1.7, 4.1, 0.7, &kk).unwrap();
        let y = y_global(kp.bottom_center.u, kp.bottom_center.v, &g, &kk, Eps::default()).unwrap();
        assert!(close(y, loc.y, 1e-12));
        let d = geometric_depths(&kp, 1.52, y, &kk, Eps::default());
        for (name, est) in d.named() {
            let est = est.unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(close(est, z, 1e-9), "{name}: {est}");
        }
    }
}
