//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use compdepth::camera::{project, CameraIntrinsics, Eps, Point3D};
use compdepth::depth::{box_keypoints_at, geometric_depths, z_comp, z_key};
use compdepth::fusion::soft_fuse;
use compdepth::ground_plane::{
    fit_horizon, horizon_to_plane, plane_to_horizon, rasterize_horizon, y_global, GroundPlane, HorizonLine,
};
use compdepth::kitti_io::{parse_calib, parse_labels, read_predictions_str, write_curves, write_report, Frame};
use compdepth::kitti_io::{ParseError, ReportFormat};
use compdepth::lab::{
    complementary_error, coupling_error, disturb_sweep, flip_sweep, generate_ensembles, multi_flip, synthetic_truths,
    ErrorModelConfig, NamedCurve, DEFAULT_AMPLITUDES, DEFAULT_PROPORTIONS,
};
use compdepth::metrics::{complementarity_score, esop, mae, EvalOptions};
use compdepth::pipeline::{run_eval, run_oracle, NoiseConfig, OracleConfig};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn kitti_k() -> CameraIntrinsics {
    CameraIntrinsics::new(721.5377, 721.5377, 609.5593, 172.854).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Ground plane tilted by at most `max_deg` in pitch and roll.
fn random_plane(rng: &mut ChaCha8Rng, max_deg: f64, h: f64) -> GroundPlane {
    let t = max_deg.to_radians();
    let (pitch, roll) = (rng.random_range(-t..t), rng.random_range(-t..t));
    GroundPlane::from_normal(roll.tan(), -1.0, pitch.tan(), h).unwrap()
}

// ------------------------------------------------------------------ 1

/// (MAE, ESOP, printed CS) for every row of the two ablation tables that
/// lists all three.
const CS_ROWS: [(f64, f64, f64); 9] = [
    (4.03, 18.63, 4.62),
    (8.47, 45.72, 5.40),
    (3.29, 36.91, 11.22),
    (3.23, 59.08, 18.29),
    (6.72, 42.51, 6.33),
    (3.09, 38.19, 12.36),
    (2.27, 25.69, 11.32),
    (8.65, 45.40, 5.25),
    (3.09, 38.19, 12.36),
];

fn cs_table() -> Outcome {
    let mut worst: f64 = 0.0;
    for (m, e, printed) in CS_ROWS {
        let cs = complementarity_score(e, m).map_err(|x| x.to_string())?;
        ensure!((cs - printed).abs() <= 0.01, "ESOP {e} / MAE {m} = {cs:.4}, printed {printed}");
        worst = worst.max((cs - printed).abs());
    }
    Ok(format!("{} rows, max |diff| {worst:.4}", CS_ROWS.len()))
}

// ------------------------------------------------------------------ 2

fn exact_recovery() -> Outcome {
    let k = kitti_k();
    let eps = Eps::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for i in 0..1000 {
        let cam_h = rng.random_range(1.4..1.9);
        let g = random_plane(&mut rng, 5.0, cam_h);
        let z = rng.random_range(5.0..60.0);
        let x = rng.random_range(-0.4..0.4) * z;
        let y = g.height_at(x, z);
        let (h, w, l) = (rng.random_range(1.2..2.0), rng.random_range(0.5..2.0), rng.random_range(0.5..4.5));
        let ry = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let kp = box_keypoints_at(Point3D::new(x, y, z), h, w, l, ry, &k).map_err(|e| format!("object {i}: {e}"))?;
        let y_glo = y_global(kp.bottom_center.u, kp.bottom_center.v, &g, &k, eps).map_err(|e| format!("object {i}: {e}"))?;
        for (name, est) in geometric_depths(&kp, h, y_glo, &k, eps).named() {
            let zz = est.map_err(|e| format!("object {i} branch {name}: {e}"))?;
            let r = rel(zz, z);
            ensure!(r <= 1e-9, "object {i} branch {name}: {zz} vs {z} (rel {r:e})");
            worst = worst.max(r);
            checked += 1;
        }
    }
    Ok(format!("{checked} estimates, 0 singularities, max rel error {worst:.2e}"))
}

// ------------------------------------------------------------------ 3

fn lemma() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 100_000;
    for i in 0..n {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let e1 = sign * rng.random_range(1e-3..50.0);
        let e2 = sign * rng.random_range(1e-3..50.0);
        let w1 = rng.random_range(1e-3..1.0 - 1e-3);
        let (big, small) = (coupling_error(e1, e2, w1), complementary_error(e1, e2, w1));
        ensure!(small < big, "triple {i}: e1={e1} e2={e2} w1={w1}: E2={small} E1={big}");
    }
    Ok(format!("{n} triples, E2 < E1 in all"))
}

// ------------------------------------------------------------------ 4

fn opposite_sensitivity() -> Outcome {
    let k = kitti_k();
    let eps = Eps::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, dh) = (10_000, 1e-4);
    for i in 0..n {
        let y = rng.random_range(1.4..2.0);
        let h = rng.random_range(0.5..y - 0.05);
        let z = rng.random_range(5.0..60.0);
        let x = rng.random_range(-0.4..0.4) * z;
        let vb = project(Point3D::new(x, y, z), &k).unwrap().v;
        let vt = project(Point3D::new(x, y - h, z), &k).unwrap().v;
        ensure!(vt > k.cv, "object {i}: top above the principal row");
        let key = |h| z_key(h, vb, vt, &k, eps).unwrap();
        let comp = |h| z_comp(y, h, vb, vt, &k, eps).unwrap();
        let (d_key, d_comp) = (key(h + dh) - key(h - dh), comp(h + dh) - comp(h - dh));
        ensure!(d_key > 0.0 && d_comp < 0.0, "object {i}: dz_key {d_key}, dz_comp {d_comp}");
    }
    Ok(format!("{n} objects, dz_key/dH > 0 and dz_comp/dH < 0 in 100%"))
}

// ------------------------------------------------------------------ 5

fn coupled_ensemble(n: usize, seed: u64) -> Vec<compdepth::DepthEnsemble> {
    let cfg = ErrorModelConfig { coupling_rate: 0.95, n_branches: 4, seed, ..Default::default() };
    generate_ensembles(&synthetic_truths(n, seed), &cfg).unwrap()
}

fn flip_monotone() -> Outcome {
    let es = coupled_ensemble(10_000, 5);
    let mut curves = Vec::new();
    for b in ["b0", "b1", "b2", "b3"] {
        let c = flip_sweep(&es, b, &DEFAULT_PROPORTIONS, 5).map_err(|e| e.to_string())?;
        ensure!(c.mae.windows(2).all(|w| w[1] < w[0]), "branch {b}: not strictly decreasing {:?}", c.mae);
        curves.push(c.mae);
    }
    let mut spread: f64 = 0.0;
    for j in 0..DEFAULT_PROPORTIONS.len() {
        let col: Vec<f64> = curves.iter().map(|c| c[j]).collect();
        let (lo, hi) = col.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        spread = spread.max((hi - lo) / lo);
    }
    ensure!(spread <= 0.10, "branch curves differ by {:.1}% relative", 100.0 * spread);
    Ok(format!(
        "MAE {:.4} -> {:.4} (b0), max branch spread {:.2}%",
        curves[0][0],
        curves[0][DEFAULT_PROPORTIONS.len() - 1],
        100.0 * spread
    ))
}

// ------------------------------------------------------------------ 6

fn disturbance_crossover() -> Outcome {
    let es = coupled_ensemble(10_000, 6);
    let d = disturb_sweep(&es, "b0", &DEFAULT_AMPLITUDES, 6).map_err(|e| e.to_string())?;
    let m = &d.curve.mae;
    for (i, w) in m.windows(2).enumerate() {
        ensure!(
            w[1] >= w[0] * (1.0 - 1e-12),
            "decreases between a={} and a={}: {} -> {}",
            d.curve.x[i],
            d.curve.x[i + 1],
            w[0],
            w[1]
        );
    }
    ensure!(m[0] < d.baseline_mae, "50% flip does not improve on the baseline");
    let x = d.crossover().ok_or_else(|| format!("no crossover up to a={}", d.curve.x.last().unwrap()))?;
    Ok(format!("baseline {:.4}, a=0 {:.4}, crossover at a={x:.3} m", d.baseline_mae, m[0]))
}

// ------------------------------------------------------------------ 7

fn multi_flip_symmetry() -> Outcome {
    let es = coupled_ensemble(100_000, 7);
    let r: Vec<f64> = (0..=4).map(|k| multi_flip(&es, k, 7).map(|r| r.mae)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let argmin = (0..=4).min_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap();
    ensure!(argmin == 2, "minimum at k={argmin}: {r:?}");
    ensure!((r[4] - r[0]).abs() <= 1e-9, "MAE(4)={} MAE(0)={}", r[4], r[0]);
    // k and n-k agree in distribution only; 1e5 objects put the Monte Carlo
    // error well under 1%
    let d13 = rel(r[1], r[3]);
    ensure!(d13 <= 0.01, "MAE(1)={} MAE(3)={} differ by {:.2}%", r[1], r[3], 100.0 * d13);
    Ok(format!(
        "MAE(k) = {:.4} {:.4} {:.4} {:.4} {:.4}; |MAE(4)-MAE(0)| = {:.1e}; MAE(1)/MAE(3) - 1 = {:.2}%",
        r[0],
        r[1],
        r[2],
        r[3],
        r[4],
        (r[4] - r[0]).abs(),
        100.0 * (r[1] / r[3] - 1.0)
    ))
}

// ------------------------------------------------------------------ 8

fn plane_round_trips() -> Outcome {
    let k = kitti_k();
    let eps = Eps::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..10_000 {
        let g = random_plane(&mut rng, 15.0, 1.65);
        let h = plane_to_horizon(&g, &k, eps).map_err(|e| e.to_string())?;
        let g2 = horizon_to_plane(h, &k, g.cam_height).map_err(|e| e.to_string())?;
        let d = (g.a - g2.a).abs().max((g.b - g2.b).abs()).max((g.c - g2.c).abs());
        let h2 = plane_to_horizon(&g2, &k, eps).map_err(|e| e.to_string())?;
        let dh = (h.k_h - h2.k_h).abs().max(rel(h2.b_h, h.b_h));
        ensure!(d <= 1e-9 && dh <= 1e-9, "plane {i}: coefficient error {d:e}, horizon error {dh:e}");
        worst = worst.max(d).max(dh);
    }

    let (width, height, radius) = (1242usize, 375usize, 2usize);
    let mut fits = 0;
    while fits < 100 {
        let line = HorizonLine::new(rng.random_range(-0.05..0.05), rng.random_range(0.0..height as f64));
        let (r0, r1) = (line.row_at(0.0), line.row_at((width - 1) as f64));
        let inside = |r: f64| r >= radius as f64 && r <= (height - 1 - radius) as f64;
        if !(inside(r0) && inside(r1)) {
            continue;
        }
        let fit = fit_horizon(&rasterize_horizon(line, width, height, radius)).map_err(|e| e.to_string())?;
        let (dk, db) = ((fit.line.k_h - line.k_h).abs(), (fit.line.b_h - line.b_h).abs());
        ensure!(
            db <= 0.5 && dk <= 0.5 / width as f64 && !fit.degraded,
            "line {line:?}: fitted {:?} (dk {dk:e}, db {db})",
            fit.line
        );
        fits += 1;
    }

    let mut worst_y: f64 = 0.0;
    for i in 0..1000 {
        let cam_h = rng.random_range(1.0..2.5);
        let g = random_plane(&mut rng, 10.0, cam_h);
        let (u, v) = (rng.random_range(0.0..1242.0), rng.random_range(k.cv + 2.0..375.0));
        let y = y_global(u, v, &g, &k, eps).map_err(|e| format!("case {i}: {e}"))?;
        // ray-plane intersection in world terms
        let d = [(u - k.cu) / k.fx, (v - k.cv) / k.fy, 1.0];
        let t = -g.cam_height / (g.a * d[0] + g.b * d[1] + g.c * d[2]);
        let r = rel(y, t * d[1]);
        ensure!(r <= 1e-9, "case {i}: y_global {y} vs ray {}", t * d[1]);
        worst_y = worst_y.max(r);
    }
    Ok(format!("max plane/horizon error {worst:.1e}; 100 heatmap fits in tolerance; max y_global rel error {worst_y:.1e}"))
}

// ------------------------------------------------------------------ 9

/// Frames of cars on gently sloped ground, KITTI intrinsics.
fn synthetic_frames(seed: u64, n_frames: usize, h_range: (f64, f64)) -> Vec<Frame> {
    let calib = parse_calib(
        "P2: 7.215377e+02 0 6.095593e+02 4.485728e+01 0 7.215377e+02 1.72854e+02 2.163791e-01 0 0 1 2.745884e-03",
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_frames)
        .map(|f| {
            let g = random_plane(&mut rng, 2.0, 1.65);
            let mut text = String::new();
            for _ in 0..8 {
                let z = rng.random_range(5.0..60.0);
                let x = rng.random_range(-0.35..0.35) * z;
                let y = g.height_at(x, z);
                let h = rng.random_range(h_range.0..h_range.1);
                let ry = rng.random_range(-3.1..3.1);
                text.push_str(&format!("Car 0 0 0 0 0 0 0 {h} 1.6 3.9 {x} {y} {z} {ry}\n"));
            }
            Frame { id: format!("{f:06}"), calib, labels: parse_labels(&text).unwrap() }
        })
        .collect()
}

fn errors(out: &[compdepth::DepthEnsemble], branch: &str) -> Vec<Option<f64>> {
    out.iter().map(|e| e.branch(branch).map(|b| b.z - e.z_star.unwrap())).collect()
}

fn h_noise_complementarity() -> Outcome {
    let frames = synthetic_frames(9, 500, (1.2, 1.6));
    let cfg = OracleConfig { noise: NoiseConfig { h_rel: 0.1, ..Default::default() }, seed: 9, ..Default::default() };
    let out = run_oracle(&frames, &cfg).ensembles;
    let k = kitti_k();
    let below: Vec<bool> = out
        .iter()
        .map(|e| {
            let o = &frames.iter().find(|f| f.id == e.frame).unwrap().labels[e.index];
            project(o.top_center(), &k).unwrap().v > k.cv
        })
        .collect();
    let (ek, ec) = (errors(&out, "key0"), errors(&out, "comp0"));
    let (a, b): (Vec<f64>, Vec<f64>) =
        (0..out.len()).filter(|&i| below[i]).filter_map(|i| Some((ek[i]?, ec[i]?))).unzip();
    ensure!(a.len() > 1000, "only {} usable objects", a.len());
    let pct = esop(&a, &b).map_err(|e| e.to_string())?;
    ensure!(pct > 90.0, "ESOP(key0, comp0) = {pct:.2}% on {} objects", a.len());

    let frames = synthetic_frames(10, 200, (1.5, 1.65));
    let cfg = OracleConfig { noise: NoiseConfig { px: 1.0, ..Default::default() }, seed: 10, ..Default::default() };
    let out = run_oracle(&frames, &cfg).ensembles;
    let branch_mae = |name: &str| {
        let (p, t): (Vec<f64>, Vec<f64>) =
            out.iter().filter_map(|e| Some((e.branch(name)?.z, e.z_star.unwrap()))).unzip();
        (mae(&p, &t).unwrap(), p.len())
    };
    let ((m_alt, n_alt), (m_comp, n_comp)) = (branch_mae("alt"), branch_mae("comp0"));
    ensure!(m_alt > m_comp, "MAE alt {m_alt:.3} ({n_alt}) <= comp {m_comp:.3} ({n_comp})");
    Ok(format!(
        "ESOP(key0, comp0) = {pct:.2}% over {} objects; +-1 px: MAE alt {m_alt:.3} m ({n_alt}) > comp {m_comp:.3} m ({n_comp})",
        a.len()
    ))
}

// ------------------------------------------------------------------ 10

fn fusion_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..10_000 {
        let n = rng.random_range(1..10);
        let b: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.5..90.0), rng.random_range(0.01..10.0))).collect();
        let f = soft_fuse(&b).map_err(|e| e.to_string())?;
        let lo = b.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = b.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        ensure!(lo <= f.z_soft && f.z_soft <= hi, "ensemble {i}: {} outside [{lo}, {hi}]", f.z_soft);
        ensure!((f.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12, "ensemble {i}: weights do not sum to 1");
        let c = rng.random_range(0.01..100.0);
        let scaled: Vec<(f64, f64)> = b.iter().map(|&(z, s)| (z, s * c)).collect();
        let g = soft_fuse(&scaled).unwrap();
        ensure!(rel(g.z_soft, f.z_soft) <= 1e-12, "ensemble {i}: sigma scaling moved z_soft");
        let mut p = b.clone();
        p.reverse();
        p.rotate_left(i % n);
        let h = soft_fuse(&p).unwrap();
        ensure!(rel(h.z_soft, f.z_soft) <= 1e-12, "ensemble {i}: permutation moved z_soft");
    }

    let run = || {
        let frames = synthetic_frames(12, 20, (1.2, 1.8));
        let noise = NoiseConfig { h_rel: 0.05, px: 1.0, horizon_slope: 0.002, horizon_intercept: 2.0 };
        let preds = run_oracle(&frames, &OracleConfig { noise, seed: 12, ..Default::default() }).ensembles;
        let text = compdepth::kitti_io::write_predictions(&preds);
        let back = read_predictions_str(&text).unwrap();
        let report = run_eval(&back, Some(&frames), &EvalOptions::default(), false).unwrap().report;
        let es = coupled_ensemble(2000, 12);
        let curves: Vec<NamedCurve> = ["b0", "b2"]
            .iter()
            .map(|b| NamedCurve::flip(b, flip_sweep(&es, b, &DEFAULT_PROPORTIONS, 12).unwrap()))
            .collect();
        [
            text,
            write_report(&report, ReportFormat::Json),
            write_report(&report, ReportFormat::Csv),
            write_curves(&Default::default(), &curves, ReportFormat::Csv),
        ]
    };
    let (first, second) = (run(), run());
    for (i, (a, b)) in first.iter().zip(&second).enumerate() {
        ensure!(a == b, "output {i} differs between reruns");
    }
    Ok(format!("10000 ensembles; {} outputs byte-identical across reruns", first.len()))
}

// ------------------------------------------------------------------ 11

const CALIB_000000: &str = "\
P0: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 0.000000000000e+00 0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 0.000000000000e+00 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 0.000000000000e+00
P1: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 -3.875744000000e+02 0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 0.000000000000e+00 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 0.000000000000e+00
P2: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 4.485728000000e+01 0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 2.163791000000e-01 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 2.745884000000e-03
P3: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 -3.395242000000e+02 0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 2.199936000000e+00 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 2.729905000000e-03
R0_rect: 9.999239000000e-01 9.837760000000e-03 -7.445048000000e-03 -9.869795000000e-03 9.999421000000e-01 -4.278459000000e-03 7.402527000000e-03 4.351614000000e-03 9.999631000000e-01
Tr_velo_to_cam: 7.533745000000e-03 -9.999714000000e-01 -6.166020000000e-04 -4.069766000000e-03 1.480249000000e-02 7.280733000000e-04 -9.998902000000e-01 -7.631618000000e-02 9.998621000000e-01 7.523790000000e-03 1.480755000000e-02 -2.717806000000e-01
Tr_imu_to_velo: 9.999976000000e-01 7.553071000000e-04 -2.035826000000e-03 -8.086759000000e-01 -7.854027000000e-04 9.998898000000e-01 -1.482298000000e-02 3.195559000000e-01 2.024406000000e-03 1.482454000000e-02 9.998881000000e-01 -7.997231000000e-01
";

const LABEL_FIXTURE: &str = "Pedestrian 0.00 0 -0.20 712.40 143.00 810.73 307.92 1.89 0.48 1.20 1.84 1.47 8.41 0.01\r\n\
Car 0.88 3 -0.69 0.00 192.37 402.31 374.00 1.60 1.57 3.23 -2.70 1.74 3.68 -1.29\r\n\
\r\n\
DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10\r\n";

fn parser_golden() -> Outcome {
    let c = parse_calib(CALIB_000000).map_err(|e| e.to_string())?;
    ensure!(
        (c.intrinsics.fx, c.intrinsics.fy, c.intrinsics.cu, c.intrinsics.cv) == (721.5377, 721.5377, 609.5593, 172.854),
        "intrinsics {:?}",
        c.intrinsics
    );
    ensure!(c.p2_translation() == [44.85728, 0.2163791, 0.002745884], "translation {:?}", c.p2_translation());

    let objs = parse_labels(LABEL_FIXTURE).map_err(|e| e.to_string())?;
    ensure!(objs.len() == 3, "{} objects", objs.len());
    let p = &objs[0];
    ensure!(
        p.class_name == "Pedestrian"
            && p.truncation == 0.0
            && p.occlusion == 0
            && p.alpha == -0.20
            && p.bbox == [712.40, 143.00, 810.73, 307.92]
            && (p.h, p.w, p.l) == (1.89, 0.48, 1.20)
            && (p.x, p.y, p.z) == (1.84, 1.47, 8.41)
            && p.ry == 0.01
            && p.score.is_none(),
        "pedestrian row {p:?}"
    );
    ensure!(objs[1].occlusion == 3 && objs[1].truncation == 0.88 && objs[1].ry == -1.29, "car row {:?}", objs[1]);
    ensure!(objs[2].is_dont_care() && !objs[2].is_valid(), "DontCare row {:?}", objs[2]);

    let calib_cases: [(&str, &dyn Fn(&ParseError) -> bool); 3] = [
        ("P0: 1 0 0 0 0 1 0 0 0 0 1 0\n", &|e| matches!(e, ParseError::MissingKey("P2"))),
        ("P2: 700 0 600\n", &|e| matches!(e, ParseError::MalformedMatrix(_))),
        ("P2: 700 0 600 0 0 700 200 0 0 0 1 nan\n", &|e| matches!(e, ParseError::MalformedMatrix(_))),
    ];
    for (text, ok) in calib_cases {
        let e = parse_calib(text).err().ok_or_else(|| format!("{text:?} parsed"))?;
        ensure!(ok(&e), "{text:?}: unexpected error {e}");
    }
    let label_cases = [
        ("Car 0 0 0 1 2 3 4 1.5 1.6 3.9 0 1.65 20 0.1\nCar 0 0 0 1 2 3 4 1.5 1.6 3.9 0 1.65 20\n", 2),
        ("\n\nTruck 0 0 0 1 2 3 4 1.5 1.6 3.9 0 1.65 20 0.1 0.9 7\n", 3),
        ("Car 0 0 0 1 2 3 4 1.5 1.6 3.9 0 1,65 20 0.1\n", 1),
    ];
    for (text, line) in label_cases {
        match parse_labels(text) {
            Err(ParseError::MalformedLine { line: l, .. }) if l == line => {}
            other => return Err(format!("{text:?}: expected MalformedLine at {line}, got {other:?}")),
        }
    }
    let bad_pred = "{\"frame\":\"000123\",\"index\":0,\"branches\":[{\"name\":\"dir\",\"z\":19.2}]}\n\
                    {\"frame\":\"000123\",\"index\":1,\"branches\":[{\"name\":\"dir\",\"z\":19.2,\"sigma\":0}]}\n";
    match read_predictions_str(bad_pred) {
        Err(ParseError::Schema { line: 2, path, .. }) if path == "branches[0].sigma" => {}
        other => return Err(format!("prediction schema: {other:?}")),
    }
    Ok("calib, labels and predictions fixtures match; 7 malformed fixtures rejected with line numbers".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("CS table reproduction", cs_table),
        ("exact recovery on sloped ground", exact_recovery),
        ("coupling vs complementary error lemma", lemma),
        ("opposite H sensitivity of z_key and z_comp", opposite_sensitivity),
        ("flip sweep monotonicity", flip_monotone),
        ("disturbance crossover", disturbance_crossover),
        ("multi-branch flip symmetry", multi_flip_symmetry),
        ("plane/horizon round trips", plane_round_trips),
        ("H-noise complementarity in the oracle", h_noise_complementarity),
        ("fusion contracts and reproducible reports", fusion_contracts),
        ("parser golden fixtures", parser_golden),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let ms = t.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({ms} ms): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({ms} ms): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
