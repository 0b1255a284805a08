//! KITTI calibration and label parsing, plus the prediction and report
//! formats used by the command-line tools.
//!
//! All parsers are all-or-nothing: the first malformed line aborts the file
//! with its 1-based line number.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraIntrinsics, Point3D};

mod predictions;
mod report;

pub use predictions::{read_predictions, read_predictions_str, write_predictions, BranchDepth, DepthEnsemble};
pub use report::{
    fmt_sig, read_report_json, round_sig, write_curves, write_multi_flip, write_plane_report, write_report, ReportFormat,
};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("missing key {0:?}")]
    MissingKey(&'static str),
    #[error("malformed projection matrix: {0}")]
    MalformedMatrix(String),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: field {path}: {reason}")]
    Schema { line: usize, path: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<ParseError>,
    },
}

impl ParseError {
    fn in_file(self, path: &Path) -> Self {
        ParseError::InFile { path: path.to_path_buf(), source: Box::new(self) }
    }
}

/// Parsed camera calibration. Only `P2` is interpreted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calib {
    /// Row-major 3x4 projection matrix of the left color camera.
    pub p2: [f64; 12],
    pub intrinsics: CameraIntrinsics,
}

impl Calib {
    /// Translation column of `P2`; unused by the ideal pinhole model.
    pub fn p2_translation(&self) -> [f64; 3] {
        [self.p2[3], self.p2[7], self.p2[11]]
    }
}

pub fn parse_calib(text: &str) -> Result<Calib, ParseError> {
    let line = text
        .lines()
        .map(str::trim)
        .find_map(|l| l.strip_prefix("P2:"))
        .ok_or(ParseError::MissingKey("P2"))?;
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| ParseError::MalformedMatrix(format!("not a number: {t:?}"))))
        .collect::<Result<_, _>>()?;
    if vals.len() != 12 {
        return Err(ParseError::MalformedMatrix(format!("expected 12 values, found {}", vals.len())));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(ParseError::MalformedMatrix("non-finite entry".into()));
    }
    let mut p2 = [0.0; 12];
    p2.copy_from_slice(&vals);
    let intrinsics = CameraIntrinsics::new(p2[0], p2[5], p2[2], p2[6])
        .map_err(|e| ParseError::MalformedMatrix(e.to_string()))?;
    Ok(Calib { p2, intrinsics })
}

/// One row of a KITTI label file. `x, y, z` is the bottom center of the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Object3D {
    pub class_name: String,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    /// left, top, right, bottom
    pub bbox: [f64; 4],
    pub h: f64,
    pub w: f64,
    pub l: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub ry: f64,
    pub score: Option<f64>,
}

impl Object3D {
    pub fn is_dont_care(&self) -> bool {
        self.class_name == "DontCare"
    }

    pub fn location(&self) -> Point3D {
        Point3D::new(self.x, self.y, self.z)
    }

    pub fn top_center(&self) -> Point3D {
        Point3D::new(self.x, self.y - self.h, self.z)
    }

    /// Usable for geometry: not DontCare, positive dimensions, in front of the camera.
    pub fn is_valid(&self) -> bool {
        !self.is_dont_care() && self.h > 0.0 && self.w > 0.0 && self.l > 0.0 && self.z > 0.0
    }
}

pub fn parse_labels(text: &str) -> Result<Vec<Object3D>, ParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let bad = |reason: String| ParseError::MalformedLine { line: line_no, reason };
        if toks.len() < 15 {
            return Err(bad(format!("expected at least 15 fields, found {}", toks.len())));
        }
        if toks.len() > 16 {
            return Err(bad(format!("expected at most 16 fields, found {}", toks.len())));
        }
        let num = |j: usize| -> Result<f64, ParseError> {
            toks[j]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("field {}: not a finite number: {:?}", j + 1, toks[j])))
        };
        let occlusion = toks[2]
            .parse::<i32>()
            .or_else(|_| toks[2].parse::<f64>().map(|v| v as i32))
            .map_err(|_| bad(format!("field 3: bad occlusion code {:?}", toks[2])))?;
        out.push(Object3D {
            class_name: toks[0].to_string(),
            truncation: num(1)?,
            occlusion,
            alpha: num(3)?,
            bbox: [num(4)?, num(5)?, num(6)?, num(7)?],
            h: num(8)?,
            w: num(9)?,
            l: num(10)?,
            x: num(11)?,
            y: num(12)?,
            z: num(13)?,
            ry: num(14)?,
            score: if toks.len() == 16 { Some(num(15)?) } else { None },
        });
    }
    Ok(out)
}

/// Labels and calibration of one image.
#[derive(Debug, Clone)]
pub struct Frame {
    pub id: String,
    pub calib: Calib,
    pub labels: Vec<Object3D>,
}

fn read_text(path: &Path) -> Result<String, ParseError> {
    fs::read_to_string(path).map_err(|source| ParseError::Io { path: path.to_path_buf(), source })
}

pub fn load_calib(path: &Path) -> Result<Calib, ParseError> {
    parse_calib(&read_text(path)?).map_err(|e| e.in_file(path))
}

pub fn load_labels(path: &Path) -> Result<Vec<Object3D>, ParseError> {
    parse_labels(&read_text(path)?).map_err(|e| e.in_file(path))
}

/// Frame ids (file stems) of every `*.txt` in `dir`, sorted.
pub fn list_frames(dir: &Path) -> Result<Vec<String>, ParseError> {
    let io = |source| ParseError::Io { path: dir.to_path_buf(), source };
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.extension().is_some_and(|e| e == "txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// Loads every label file in `label_dir` with its calibration from `calib_dir`.
pub fn load_frames(calib_dir: &Path, label_dir: &Path) -> Result<Vec<Frame>, ParseError> {
    list_frames(label_dir)?
        .into_iter()
        .map(|id| {
            let calib = load_calib(&calib_dir.join(format!("{id}.txt")))?;
            let labels = load_labels(&label_dir.join(format!("{id}.txt")))?;
            Ok(Frame { id, calib, labels })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calib_from_p2() {
        let c = parse_calib("P2: 700 0 600 0 0 700 200 0 0 0 1 0").unwrap();
        assert_eq!(c.intrinsics, CameraIntrinsics::new(700.0, 700.0, 600.0, 200.0).unwrap());
    }

    #[test]
    fn calib_errors() {
        assert!(matches!(parse_calib("P0: 1 0 0 0 0 1 0 0 0 0 1 0\n"), Err(ParseError::MissingKey("P2"))));
        assert!(matches!(parse_calib("P2: 700 0 600"), Err(ParseError::MalformedMatrix(_))));
        assert!(matches!(parse_calib("P2: 700 0 600 0 0 700 200 0 0 0 1 x"), Err(ParseError::MalformedMatrix(_))));
        assert!(matches!(parse_calib("P2: 700 0 600 0 0 700 200 0 0 0 1 0 5"), Err(ParseError::MalformedMatrix(_))));
        assert!(matches!(parse_calib("P2: 0 0 600 0 0 700 200 0 0 0 1 0"), Err(ParseError::MalformedMatrix(_))));
    }

    #[test]
    fn label_line() {
        let objs =
            parse_labels("Car 0.00 0 -1.58 587.0 173.3 614.1 200.1 1.50 1.67 3.64 -0.65 1.65 20.00 -1.59").unwrap();
        assert_eq!(objs.len(), 1);
        let o = &objs[0];
        assert_eq!(o.class_name, "Car");
        assert_eq!(o.h, 1.50);
        assert_eq!(o.location(), Point3D::new(-0.65, 1.65, 20.0));
        assert_eq!(o.score, None);
        assert!(o.is_valid());
    }

    #[test]
    fn empty_and_short_label_files() {
        assert!(parse_labels("").unwrap().is_empty());
        assert!(parse_labels("\n  \r\n").unwrap().is_empty());
        let err = parse_labels("Car 0 0 0 1 2 3 4 1.5 1.6 3.9 0 1.65 20\n").unwrap_err();
        assert!(matches!(err, ParseError::MalformedLine { line: 1, .. }));
    }

    #[test]
    fn crlf_score_and_dont_care() {
        let text = "Car 0 0 0 1 2 3 4 1.5 1.6 3.9 0 1.65 20 0.1 0.93\r\n\
                    DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10\r\n";
        let objs = parse_labels(text).unwrap();
        assert_eq!(objs.len(), 2);
        assert_eq!(objs[0].score, Some(0.93));
        assert_eq!(objs[0].ry, 0.1);
        assert!(objs[1].is_dont_care());
        assert!(!objs[1].is_valid());
    }

    #[test]
    fn bad_number_reports_line() {
        let text = "Car 0 0 0 1 2 3 4 1.5 1.6 3.9 0 1.65 20 0.1\nCar 0 0 0 1 2 3 4 1,5 1.6 3.9 0 1.65 20 0.1\n";
        match parse_labels(text) {
            Err(ParseError::MalformedLine { line, reason }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("field 9"));
            }
            other => panic!("{other:?}"),
        }
    }
}
