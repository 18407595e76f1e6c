//! Depth-image collision checking for multicopter trajectories using
//! free-space pyramids, plus the budgeted random-search local planner built
//! on top of it.
//!
//! The crate is organized around a single depth image: free space in front of
//! the depth surface is carved into rectangular pyramids with their apex at
//! the camera focal point. Candidate quintic trajectories are split into
//! sections of monotonically changing depth and certified collision-free by
//! confining each section to a pyramid; section/face intersection times come
//! from closed-form quartic root finding. A ray-tracing ground-truth oracle,
//! a k-d-tree baseline checker, and a closed-loop simulated-flight harness
//! support the benchmark suite in the companion CLI crate.

pub mod camera;
pub mod image;
pub mod kdtree;
pub mod oracle;
pub mod planner;
pub mod pyramid;
pub mod roots;
pub mod scene;
pub mod sim;
pub mod trajectory;

pub use camera::CameraModel;
pub use image::DepthImage;
pub use kdtree::KdTree;
pub use oracle::ClearanceOracle;
pub use planner::{Budget, PlannerConfig, PlannerReport};
pub use pyramid::{Pyramid, PyramidStore};
pub use scene::{OrientedBox, Scene};
pub use trajectory::{MonotonicSection, Trajectory, VehicleState};
