//! Geometric reasoning core for keypoint-based monocular 3D object detection.
//!
//! The pipeline runs entirely on the CPU and is deterministic end to end:
//!
//! 1. [`camera`]: pinhole projection, back-projection, and frustum tests.
//! 2. [`templates`]: wireframe CAD templates with 14 named keypoints per
//!    car class in a unit-normalized model frame, plus class mean dimensions.
//! 3. [`lifting`]: 2D detections to 3D poses via dimension decoding, depth
//!    from windshield keypoint pairs, MultiBin orientation decoding, and
//!    center assembly.
//! 4. [`losses`]: training losses with analytic gradients for the
//!    reprojection term.
//! 5. [`geometry3d`]: yaw-rotated 3D boxes, BEV footprint clipping, and
//!    rotated 3D IoU.
//! 6. [`kitti`]: KITTI label / calibration / result file IO and keypoint
//!    annotation files.
//! 7. [`synth`]: synthetic scene generation, a forward-projection oracle
//!    that produces ground truth and idealized detections.
//! 8. [`evalkit`]: KITTI-protocol evaluation: difficulty buckets, greedy
//!    matching, interpolated AP, and size/orientation error statistics.
//! 9. [`cli`]: runnable subcommands over the library (`synth`, `lift`,
//!    `eval`, `losscheck`, `templates`).
//!
//! Conventions used throughout: camera frame is x right, y down, z forward;
//! model frame is x along length (forward), y along height (down), z along
//! width; yaw rotates about the vertical (y) axis; angles live in
//! [-pi, pi); all distances are meters and all image coordinates are
//! continuous (sub-pixel) pixels.

pub mod angles;
pub mod camera;
pub mod cli;
pub mod evalkit;
pub mod geometry3d;
pub mod kitti;
pub mod lifting;
pub mod losses;
pub mod synth;
pub mod templates;

pub use camera::{CameraIntrinsics, Pixel, Point3};
pub use geometry3d::Box3D;
pub use lifting::{Detection2D, Pose3D};
pub use templates::{KeypointId, KeypointTemplate, TemplateSet};
