//! C ABI for `compdepth`.
//!
//! Every fallible call returns a [`CdStatus`] and writes results through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`cd_last_error_message`]. Heatmaps and prediction sets are opaque
//! handles owned by the caller and released with their `_free` function.
//! Strings returned by the library are released with [`cd_string_free`].
//!
//! No call unwinds into C: panics are caught and reported as
//! `CdStatus_Panic`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use compdepth::camera::{self, CameraIntrinsics, Eps, GeometryError, Point3D};
use compdepth::depth;
use compdepth::fusion::{soft_fuse, FusionError};
use compdepth::ground_plane::{self, GroundPlane, HorizonHeatmap, HorizonLine};
use compdepth::kitti_io::{read_predictions_str, write_report, DepthEnsemble, ReportFormat};
use compdepth::lab;
use compdepth::metrics::{self, EvalOptions, EvalSample, MetricsError};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Singular or non-positive geometric quantity.
    Geometry = 3,
    Parse = 4,
    Fusion = 5,
    Metrics = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CdIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cu: f64,
    pub cv: f64,
}

/// Unit-normal ground plane `a x + b y + c z + cam_height = 0`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CdPlane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub cam_height: f64,
}

/// Image line `v = k_h u + b_h`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CdHorizon {
    pub k_h: f64,
    pub b_h: f64,
}

/// Output format selector for reports.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdFormat {
    Json = 0,
    Csv = 1,
}

/// Opaque horizon heatmap.
pub struct CdHeatmap(HorizonHeatmap);

/// Opaque set of parsed prediction records.
pub struct CdPredictions(Vec<DepthEnsemble>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

struct Fail(CdStatus, String);

impl From<GeometryError> for Fail {
    fn from(e: GeometryError) -> Self {
        Fail(CdStatus::Geometry, e.to_string())
    }
}

impl From<FusionError> for Fail {
    fn from(e: FusionError) -> Self {
        Fail(CdStatus::Fusion, e.to_string())
    }
}

impl From<MetricsError> for Fail {
    fn from(e: MetricsError) -> Self {
        Fail(CdStatus::Metrics, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CdStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CdStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn input<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn array<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

fn intrinsics(k: &CdIntrinsics) -> Result<CameraIntrinsics, Fail> {
    Ok(CameraIntrinsics::new(k.fx, k.fy, k.cu, k.cv)?)
}

fn eps(e: f64) -> Result<Eps, Fail> {
    if e > 0.0 && e.is_finite() {
        Ok(Eps(e))
    } else {
        Err(Fail(CdStatus::InvalidArgument, format!("eps must be positive, got {e}")))
    }
}

fn plane(p: &CdPlane) -> GroundPlane {
    GroundPlane { a: p.a, b: p.b, c: p.c, cam_height: p.cam_height }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Byte length of the calling thread's last error message, excluding the
/// terminating NUL; 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn cd_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |m| m.as_bytes().len()))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn cd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |m| m.as_bytes());
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ------------------------------------------------------------ geometry

/// # Safety
/// Pointers must be valid for reads/writes of their types.
#[no_mangle]
pub unsafe extern "C" fn cd_project(
    k: *const CdIntrinsics,
    x: f64,
    y: f64,
    z: f64,
    u_out: *mut f64,
    v_out: *mut f64,
) -> CdStatus {
    guard(|| {
        let k = intrinsics(input(k, "k")?)?;
        let px = camera::project(Point3D::new(x, y, z), &k)?;
        *out(u_out, "u_out")? = px.u;
        *out(v_out, "v_out")? = px.v;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid for reads/writes of their types.
#[no_mangle]
pub unsafe extern "C" fn cd_depth_from_elevation(
    k: *const CdIntrinsics,
    y: f64,
    v_b: f64,
    eps_den: f64,
    z_out: *mut f64,
) -> CdStatus {
    guard(|| {
        let k = intrinsics(input(k, "k")?)?;
        *out(z_out, "z_out")? = camera::depth_from_elevation(y, v_b, &k, eps(eps_den)?)?;
        Ok(())
    })
}

/// Depth from 3D height `h` and the projected bottom/top rows.
///
/// # Safety
/// Pointers must be valid for reads/writes of their types.
#[no_mangle]
pub unsafe extern "C" fn cd_z_key(
    k: *const CdIntrinsics,
    h: f64,
    v_b: f64,
    v_t: f64,
    eps_den: f64,
    z_out: *mut f64,
) -> CdStatus {
    guard(|| {
        let k = intrinsics(input(k, "k")?)?;
        *out(z_out, "z_out")? = depth::z_key(h, v_b, v_t, &k, eps(eps_den)?)?;
        Ok(())
    })
}

/// Depth from the ground elevation and the box's vertical midpoint row.
///
/// # Safety
/// Pointers must be valid for reads/writes of their types.
#[no_mangle]
pub unsafe extern "C" fn cd_z_comp(
    k: *const CdIntrinsics,
    y_glo: f64,
    h: f64,
    v_b: f64,
    v_t: f64,
    eps_den: f64,
    z_out: *mut f64,
) -> CdStatus {
    guard(|| {
        let k = intrinsics(input(k, "k")?)?;
        *out(z_out, "z_out")? = depth::z_comp(y_glo, h, v_b, v_t, &k, eps(eps_den)?)?;
        Ok(())
    })
}

/// Depth from the ground elevation and the top row.
///
/// # Safety
/// Pointers must be valid for reads/writes of their types.
#[no_mangle]
pub unsafe extern "C" fn cd_z_alt(
    k: *const CdIntrinsics,
    y_glo: f64,
    h: f64,
    v_t: f64,
    eps_den: f64,
    z_out: *mut f64,
) -> CdStatus {
    guard(|| {
        let k = intrinsics(input(k, "k")?)?;
        *out(z_out, "z_out")? = depth::z_alt(y_glo, h, v_t, &k, eps(eps_den)?)?;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid for reads/writes of their types.
#[no_mangle]
pub unsafe extern "C" fn cd_horizon_to_plane(
    k: *const CdIntrinsics,
    horizon: CdHorizon,
    cam_height: f64,
    plane_out: *mut CdPlane,
) -> CdStatus {
    guard(|| {
        let k = intrinsics(input(k, "k")?)?;
        let g = ground_plane::horizon_to_plane(HorizonLine::new(horizon.k_h, horizon.b_h), &k, cam_height)?;
        *out(plane_out, "plane_out")? = CdPlane { a: g.a, b: g.b, c: g.c, cam_height: g.cam_height };
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid for reads/writes of their types.
#[no_mangle]
pub unsafe extern "C" fn cd_plane_to_horizon(
    k: *const CdIntrinsics,
    plane: CdPlane,
    eps_den: f64,
    horizon_out: *mut CdHorizon,
) -> CdStatus {
    guard(|| {
        let k = intrinsics(input(k, "k")?)?;
        let h = ground_plane::plane_to_horizon(&self::plane(&plane), &k, eps(eps_den)?)?;
        *out(horizon_out, "horizon_out")? = CdHorizon { k_h: h.k_h, b_h: h.b_h };
        Ok(())
    })
}

/// Elevation where the ray through `(u_b, v_b)` meets `plane`.
///
/// # Safety
/// Pointers must be valid for reads/writes of their types.
#[no_mangle]
pub unsafe extern "C" fn cd_y_global(
    k: *const CdIntrinsics,
    plane: CdPlane,
    u_b: f64,
    v_b: f64,
    eps_den: f64,
    y_out: *mut f64,
) -> CdStatus {
    guard(|| {
        let k = intrinsics(input(k, "k")?)?;
        *out(y_out, "y_out")? = ground_plane::y_global(u_b, v_b, &self::plane(&plane), &k, eps(eps_den)?)?;
        Ok(())
    })
}

// ------------------------------------------------------------ fusion and metrics

/// Inverse-sigma weighted fusion of `n` branches. `weights_out` may be null;
/// otherwise it receives `n` weights.
///
/// # Safety
/// `z` and `sigma` must hold `n` values; `weights_out` must be null or hold `n`.
#[no_mangle]
pub unsafe extern "C" fn cd_soft_fuse(
    z: *const f64,
    sigma: *const f64,
    n: usize,
    z_out: *mut f64,
    weights_out: *mut f64,
) -> CdStatus {
    guard(|| {
        let zs = array(z, n, "z")?;
        let ss = array(sigma, n, "sigma")?;
        let pairs: Vec<(f64, f64)> = zs.iter().copied().zip(ss.iter().copied()).collect();
        let f = soft_fuse(&pairs)?;
        *out(z_out, "z_out")? = f.z_soft;
        if !weights_out.is_null() {
            slice::from_raw_parts_mut(weights_out, n).copy_from_slice(&f.weights);
        }
        Ok(())
    })
}

/// # Safety
/// `pred` and `truth` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn cd_mae(pred: *const f64, truth: *const f64, n: usize, out_mae: *mut f64) -> CdStatus {
    guard(|| {
        *out(out_mae, "out_mae")? = metrics::mae(array(pred, n, "pred")?, array(truth, n, "truth")?)?;
        Ok(())
    })
}

/// Percentage of samples whose errors have strictly opposite signs.
///
/// # Safety
/// `errors_a` and `errors_b` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn cd_esop(errors_a: *const f64, errors_b: *const f64, n: usize, out_pct: *mut f64) -> CdStatus {
    guard(|| {
        *out(out_pct, "out_pct")? = metrics::esop(array(errors_a, n, "errors_a")?, array(errors_b, n, "errors_b")?)?;
        Ok(())
    })
}

/// # Safety
/// `cs_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cd_complementarity_score(esop_pct: f64, mae: f64, cs_out: *mut f64) -> CdStatus {
    guard(|| {
        *out(cs_out, "cs_out")? = metrics::complementarity_score(esop_pct, mae)?;
        Ok(())
    })
}

/// Reflection of `z_hat` about `z_star`.
#[no_mangle]
pub extern "C" fn cd_flip(z_hat: f64, z_star: f64) -> f64 {
    lab::flip(z_hat, z_star)
}

// ------------------------------------------------------------ heatmap handle

/// Rasterizes `horizon` into a new heatmap. Returns null for a zero-sized
/// image.
#[no_mangle]
pub extern "C" fn cd_heatmap_rasterize(horizon: CdHorizon, width: usize, height: usize, radius: usize) -> *mut CdHeatmap {
    if width == 0 || height == 0 {
        set_error("heatmap dimensions must be positive");
        return ptr::null_mut();
    }
    catch_unwind(|| {
        let m = ground_plane::rasterize_horizon(HorizonLine::new(horizon.k_h, horizon.b_h), width, height, radius);
        Box::into_raw(Box::new(CdHeatmap(m)))
    })
    .unwrap_or_else(|_| {
        set_error("internal panic");
        ptr::null_mut()
    })
}

/// Wraps `width * height` row-major values (clamped into [0, 1]).
///
/// # Safety
/// `data` must hold `width * height` values; `heatmap_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cd_heatmap_from_data(
    data: *const f64,
    width: usize,
    height: usize,
    heatmap_out: *mut *mut CdHeatmap,
) -> CdStatus {
    guard(|| {
        let slot = out(heatmap_out, "heatmap_out")?;
        let n = width.checked_mul(height).ok_or_else(|| Fail(CdStatus::InvalidArgument, "size overflow".into()))?;
        let values = array(data, n, "data")?.to_vec();
        let m = HorizonHeatmap::from_data(width, height, values)
            .ok_or_else(|| Fail(CdStatus::InvalidArgument, "data length does not match dimensions".into()))?;
        *slot = Box::into_raw(Box::new(CdHeatmap(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cd_heatmap_free(m: *mut CdHeatmap) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live handle; out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cd_heatmap_dims(m: *const CdHeatmap, width_out: *mut usize, height_out: *mut usize) -> CdStatus {
    guard(|| {
        let m = &input(m, "heatmap")?.0;
        *out(width_out, "width_out")? = m.width();
        *out(height_out, "height_out")? = m.height();
        Ok(())
    })
}

/// Value at `(row, col)`; NaN when out of range or `m` is null.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_heatmap_get(m: *const CdHeatmap, row: usize, col: usize) -> f64 {
    match m.as_ref() {
        Some(CdHeatmap(m)) if row < m.height() && col < m.width() => m.get(row, col),
        _ => f64::NAN,
    }
}

/// Column-argmax line fit. `degraded_out` (nullable) is set to 1 when most
/// supporting columns lie outside the image.
///
/// # Safety
/// `m` must be a live handle; out pointers must be valid or null where allowed.
#[no_mangle]
pub unsafe extern "C" fn cd_heatmap_fit(
    m: *const CdHeatmap,
    horizon_out: *mut CdHorizon,
    degraded_out: *mut i32,
) -> CdStatus {
    guard(|| {
        let m = &input(m, "heatmap")?.0;
        let fit = ground_plane::fit_horizon(m).map_err(|e| Fail(CdStatus::InvalidArgument, e.to_string()))?;
        *out(horizon_out, "horizon_out")? = CdHorizon { k_h: fit.line.k_h, b_h: fit.line.b_h };
        if let Some(d) = degraded_out.as_mut() {
            *d = i32::from(fit.degraded);
        }
        Ok(())
    })
}

// ------------------------------------------------------------ predictions handle

/// Parses JSON-lines prediction records.
///
/// # Safety
/// `jsonl` must be a NUL-terminated UTF-8 string; `out_handle` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cd_predictions_parse(jsonl: *const c_char, out_handle: *mut *mut CdPredictions) -> CdStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        if jsonl.is_null() {
            return Err(null("jsonl"));
        }
        let text = CStr::from_ptr(jsonl)
            .to_str()
            .map_err(|e| Fail(CdStatus::Parse, format!("input is not UTF-8: {e}")))?;
        let recs = read_predictions_str(text).map_err(|e| Fail(CdStatus::Parse, e.to_string()))?;
        *slot = Box::into_raw(Box::new(CdPredictions(recs)));
        Ok(())
    })
}

/// Number of records; 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cd_predictions_len(p: *const CdPredictions) -> usize {
    p.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `p` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn cd_predictions_free(p: *mut CdPredictions) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Complementarity report over records that carry `z_star`. The report text
/// is returned in `*report_out` and must be released with [`cd_string_free`].
///
/// # Safety
/// `p` must be a live handle; `report_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cd_predictions_evaluate(
    p: *const CdPredictions,
    format: CdFormat,
    report_out: *mut *mut c_char,
) -> CdStatus {
    guard(|| {
        let recs = &input(p, "predictions")?.0;
        let slot = out(report_out, "report_out")?;
        let mut samples = Vec::with_capacity(recs.len());
        for r in recs {
            let z = r.z_star.ok_or_else(|| {
                Fail(CdStatus::InvalidArgument, format!("record {}:{} has no z_star", r.frame, r.index))
            })?;
            samples.push(EvalSample { ensemble: r, z_star: z, y_star: None });
        }
        let report = metrics::evaluate(&samples, &EvalOptions::default())?;
        let fmt = match format {
            CdFormat::Json => ReportFormat::Json,
            CdFormat::Csv => ReportFormat::Csv,
        };
        *slot = CString::new(write_report(&report, fmt)).expect("report has no NUL").into_raw();
        Ok(())
    })
}
