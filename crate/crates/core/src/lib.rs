//! Geometry, fusion and complementarity analysis for multi-branch monocular
//! depth estimation.
//!
//! The crate covers the pinhole camera relations, the ground plane and its
//! horizon line, the height- and ground-based depth estimators, inverse-sigma
//! fusion, error statistics (MAE, error-sign opposition, complementarity
//! score) and the flip experiments used to study error complementarity.
//! KITTI calibration and label files are read directly.

pub mod camera;
pub mod depth;
pub mod fusion;
pub mod ground_plane;
pub mod kitti_io;
pub mod lab;
pub mod metrics;
pub mod pipeline;

pub use camera::{CameraIntrinsics, Eps, GeometryError, Pixel, Point3D};
pub use fusion::{fuse_with_mask, soft_fuse, FusedDepth, FusionError};
pub use ground_plane::{GroundPlane, HorizonHeatmap, HorizonLine};
pub use kitti_io::{BranchDepth, DepthEnsemble, Object3D, ParseError};
pub use metrics::ComplementarityReport;
