//! Synthetic scenes made of oriented boxes: depth rendering, ground-truth
//! clearance against the geometry, and the randomized scene/state
//! distributions used by the benchmarks.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraModel;
use crate::image::{DepthImage, INVALID_DEPTH};
use crate::trajectory::VehicleState;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("rotation matrix is not orthonormal")]
    NonOrthonormalRotation,
}

/// Box primitive with arbitrary orientation; `rotation_rows` holds the rows
/// of the matrix mapping box-local coordinates into the scene frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Vector3<f64>,
    pub half_extents: Vector3<f64>,
    pub rotation_rows: [[f64; 3]; 3],
}

impl OrientedBox {
    pub fn new(
        center: Vector3<f64>,
        half_extents: Vector3<f64>,
        rotation: Matrix3<f64>,
    ) -> Result<Self, SceneError> {
        let identity_error = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if identity_error > 1e-9 {
            return Err(SceneError::NonOrthonormalRotation);
        }
        let mut rows = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                rows[r][c] = rotation[(r, c)];
            }
        }
        Ok(Self { center, half_extents, rotation_rows: rows })
    }

    /// Axis-aligned box (identity rotation).
    pub fn axis_aligned(center: Vector3<f64>, half_extents: Vector3<f64>) -> Self {
        Self::new(center, half_extents, Matrix3::identity()).expect("identity is orthonormal")
    }

    /// Slab spanning `[min, max]` along each axis.
    pub fn from_bounds(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self::axis_aligned(0.5 * (min + max), 0.5 * (max - min))
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.rotation_rows[r][c])
    }

    fn to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation().transpose() * (p - self.center)
    }

    /// Euclidean distance from `p` to the box, zero inside.
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        let q = self.to_local(p);
        let mut sum = 0.0;
        for i in 0..3 {
            let d = (q[i].abs() - self.half_extents[i]).max(0.0);
            sum += d * d;
        }
        sum.sqrt()
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let q = self.to_local(p);
        (0..3).all(|i| q[i].abs() <= self.half_extents[i])
    }

    /// Entry/exit depths of the ray `t * dir` from the origin, if it hits.
    fn ray_hit(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let rot_t = self.rotation().transpose();
        let o = rot_t * (origin - self.center);
        let d = rot_t * dir;
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for i in 0..3 {
            if d[i].abs() < 1e-15 {
                if o[i].abs() > self.half_extents[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[i];
            let (t1, t2) = {
                let a = (-self.half_extents[i] - o[i]) * inv;
                let b = (self.half_extents[i] - o[i]) * inv;
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            };
            t_near = t_near.max(t1);
            t_far = t_far.min(t2);
            if t_near > t_far {
                return None;
            }
        }
        Some((t_near, t_far))
    }
}

/// Collection of oriented-box obstacles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub boxes: Vec<OrientedBox>,
}

impl Scene {
    pub fn new(boxes: Vec<OrientedBox>) -> Self {
        Self { boxes }
    }

    /// Distance from `p` to the nearest primitive; infinite for an empty
    /// scene, zero inside an obstacle.
    pub fn clearance(&self, p: &Vector3<f64>) -> f64 {
        self.boxes.iter().map(|b| b.distance(p)).fold(f64::INFINITY, f64::min)
    }

    /// Renders the scene from the camera at the origin looking along +z.
    ///
    /// Each pixel stores the z-depth of the nearest box hit along its center
    /// ray, clamped to the horizon `l`; background pixels store `l`; rays
    /// starting inside a box store the no-return code.
    pub fn render(&self, camera: &CameraModel) -> DepthImage {
        let l = camera.unknown_horizon;
        let origin = Vector3::zeros();
        let mut buf = vec![0.0f32; camera.pixel_count()];
        for iy in 0..camera.height {
            for ix in 0..camera.width {
                let dir = camera.pixel_ray(ix, iy);
                let mut depth = f64::INFINITY;
                let mut inside = false;
                for b in &self.boxes {
                    if let Some((t_near, t_far)) = b.ray_hit(&origin, &dir) {
                        if t_far <= 1e-12 {
                            continue; // entirely behind the camera
                        }
                        if t_near <= 1e-12 {
                            inside = true;
                            break;
                        }
                        depth = depth.min(t_near);
                    }
                }
                let value = if inside {
                    INVALID_DEPTH
                } else {
                    depth.min(l) as f32
                };
                buf[iy as usize * camera.width as usize + ix as usize] = value;
            }
        }
        DepthImage::new(*camera, buf).expect("buffer sized from camera")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Parameters of the randomized benchmark scene; the defaults reproduce the
/// benchmark protocol (two 20 cm thick slabs, 2 m square faces, centers on
/// the optical axis at depths uniform on 1.5..3 m, uniformly random
/// orientation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSceneParams {
    pub slab_count: usize,
    pub face_half_extent: f64,
    pub thickness: f64,
    pub depth_range: (f64, f64),
}

impl Default for BenchmarkSceneParams {
    fn default() -> Self {
        Self { slab_count: 2, face_half_extent: 1.0, thickness: 0.2, depth_range: (1.5, 3.0) }
    }
}

/// Rotation matrix drawn uniformly over SO(3) (uniform unit quaternion).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let u3: f64 = rng.gen();
    let two_pi = std::f64::consts::TAU;
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let q = nalgebra::Quaternion::new(
        b * (two_pi * u3).cos(),
        a * (two_pi * u2).sin(),
        a * (two_pi * u2).cos(),
        b * (two_pi * u3).sin(),
    );
    nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// Random benchmark scene with the default slab parameters.
pub fn random_benchmark_scene<R: Rng + ?Sized>(rng: &mut R) -> Scene {
    random_benchmark_scene_with(&BenchmarkSceneParams::default(), rng)
}

pub fn random_benchmark_scene_with<R: Rng + ?Sized>(
    params: &BenchmarkSceneParams,
    rng: &mut R,
) -> Scene {
    let half = Vector3::new(params.face_half_extent, params.face_half_extent, 0.5 * params.thickness);
    let boxes = (0..params.slab_count)
        .map(|_| {
            let depth = rng.gen_range(params.depth_range.0..params.depth_range.1);
            let rotation = random_rotation(rng);
            OrientedBox::new(Vector3::new(0.0, 0.0, depth), half, rotation)
                .expect("rotation sampled orthonormal")
        })
        .collect();
    Scene::new(boxes)
}

/// Random initial vehicle state of the benchmark protocol, in the camera
/// frame: forward speed uniform on 0..4 m/s, lateral speeds uniform on
/// -1..1 m/s, vertical (image-y) acceleration uniform on -5..5 m/s^2, zero
/// acceleration along the other axes, position at the focal point.
pub fn random_initial_state<R: Rng + ?Sized>(rng: &mut R) -> VehicleState {
    VehicleState::new(
        Vector3::zeros(),
        Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.0..4.0)),
        Vector3::new(0.0, rng.gen_range(-5.0..5.0), 0.0),
    )
}
