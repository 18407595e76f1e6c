//! Ray-tracing ground-truth collision oracle over a single depth image.
//!
//! The occupied-or-unknown set of an image is the union of
//!
//! * per-pixel truncated rays: everything at or behind the measured depth
//!   along each detecting pixel's center ray,
//! * out-of-view space at Euclidean distance at least `l` from the focal
//!   point, and
//! * everything deeper than the horizon plane `z = l`.
//!
//! [`ClearanceOracle`] answers exact minimum-distance queries against this
//! set (per-pixel point-to-ray distance in closed form) and sweeps whole
//! trajectories. Pixels at or below the `free_below` threshold carry no
//! obstacle information and are skipped, matching the free-space convention
//! used by the pyramid checker.

use nalgebra::Vector3;

use crate::camera::{boundary_normal_u, boundary_normal_v};
use crate::image::DepthImage;
use crate::trajectory::Trajectory;

const TILE: u32 = 16;

struct TruncatedRay {
    origin: Vector3<f64>,
    dir: Vector3<f64>, // unit
}

struct Tile {
    min_depth: f64,
    /// Inward unit normals of the tile's four frustum planes.
    normals: [Vector3<f64>; 4],
    start: u32,
    len: u32,
}

/// Precomputed exact clearance queries against one depth image.
pub struct ClearanceOracle {
    horizon: f64,
    fov_normals: [Vector3<f64>; 4],
    tiles: Vec<Tile>,
    rays: Vec<TruncatedRay>,
}

impl ClearanceOracle {
    /// Builds the oracle; pixels with depth at or below `free_below` are
    /// treated as carrying no return (self-view / noise floor).
    pub fn new(image: &DepthImage, free_below: f64) -> Self {
        let cam = image.camera();
        let l = cam.unknown_horizon;
        let mut tiles = Vec::new();
        let mut rays = Vec::new();

        let tiles_x = cam.width.div_ceil(TILE);
        let tiles_y = cam.height.div_ceil(TILE);
        for ty in 0..tiles_y {
            for tx in 0..tiles_x {
                let x0 = tx * TILE;
                let y0 = ty * TILE;
                let x1 = (x0 + TILE).min(cam.width);
                let y1 = (y0 + TILE).min(cam.height);
                let start = rays.len() as u32;
                let mut min_depth = f64::INFINITY;
                for iy in y0..y1 {
                    for ix in x0..x1 {
                        if !image.is_obstacle(ix, iy, free_below) {
                            continue;
                        }
                        let d = image.depth_at(ix, iy);
                        let e = cam.pixel_ray(ix, iy);
                        rays.push(TruncatedRay { origin: e * d, dir: e.normalize() });
                        min_depth = min_depth.min(d);
                    }
                }
                let len = rays.len() as u32 - start;
                if len == 0 {
                    continue;
                }
                let normals = [
                    boundary_normal_u(cam.tan_u(x0 as f64), 1.0),
                    boundary_normal_u(cam.tan_u(x1 as f64), -1.0),
                    boundary_normal_v(cam.tan_v(y0 as f64), 1.0),
                    boundary_normal_v(cam.tan_v(y1 as f64), -1.0),
                ];
                tiles.push(Tile { min_depth, normals, start, len });
            }
        }

        Self { horizon: l, fov_normals: cam.fov_plane_normals(), tiles, rays }
    }

    /// Exact minimum distance from `x` to the occupied-or-unknown set;
    /// zero inside it.
    pub fn point_clearance(&self, x: &Vector3<f64>) -> f64 {
        let mut best = self.unknown_space_distance(x);
        for tile in &self.tiles {
            // Every occupied point of the tile lies inside its frustum at
            // depth >= min_depth, so constraint violations lower-bound the
            // distance and let whole tiles be skipped.
            let mut bound = tile.min_depth - x.z;
            for n in &tile.normals {
                bound = bound.max(-n.dot(x));
            }
            if bound >= best {
                continue;
            }
            let end = (tile.start + tile.len) as usize;
            for ray in &self.rays[tile.start as usize..end] {
                let w = x - ray.origin;
                let along = w.dot(&ray.dir);
                let d2 = if along <= 0.0 {
                    w.norm_squared()
                } else {
                    (w.norm_squared() - along * along).max(0.0)
                };
                if d2 < best * best {
                    best = d2.sqrt();
                }
            }
        }
        best
    }

    /// Distance to unknown space: beyond the horizon plane, or outside the
    /// field of view at Euclidean distance >= `l` from the focal point.
    fn unknown_space_distance(&self, x: &Vector3<f64>) -> f64 {
        let l = self.horizon;
        let mut best = (l - x.z).max(0.0);
        let norm = x.norm();
        for n in &self.fov_normals {
            let s = n.dot(x);
            let cand = if s <= 0.0 {
                // Already on the out-of-view side of this plane.
                (l - norm).max(0.0)
            } else {
                let in_plane = (norm * norm - s * s).max(0.0).sqrt();
                if in_plane >= l {
                    s
                } else {
                    let radial = l - in_plane;
                    (s * s + radial * radial).sqrt()
                }
            };
            best = best.min(cand);
        }
        best
    }

    /// Whether the clearance at `x` is at least `r`; cheaper than
    /// [`point_clearance`](Self::point_clearance) because tiles are pruned
    /// against `r` and the scan stops at the first violation.
    pub fn clearance_at_least(&self, x: &Vector3<f64>, r: f64) -> bool {
        if self.unknown_space_distance(x) < r {
            return false;
        }
        let r2 = r * r;
        for tile in &self.tiles {
            let mut bound = tile.min_depth - x.z;
            for n in &tile.normals {
                bound = bound.max(-n.dot(x));
            }
            if bound >= r {
                continue;
            }
            let end = (tile.start + tile.len) as usize;
            for ray in &self.rays[tile.start as usize..end] {
                let w = x - ray.origin;
                let along = w.dot(&ray.dir);
                let d2 = if along <= 0.0 {
                    w.norm_squared()
                } else {
                    (w.norm_squared() - along * along).max(0.0)
                };
                if d2 < r2 {
                    return false;
                }
            }
        }
        true
    }

    /// Whether the swept sphere of radius `r` around the trajectory keeps
    /// clearance `r` at every sample time `{0, dt, 2dt, ..., T}`.
    ///
    /// Samples whose clearance is already implied by the 1-Lipschitz bound
    /// from an earlier sample are skipped; the verdict is identical to
    /// checking every sample.
    pub fn trajectory_free(&self, traj: &Trajectory, r: f64, dt: f64) -> bool {
        assert!(dt > 0.0, "sample step must be positive");
        let t_end = traj.duration;
        let steps = (t_end / dt).floor() as u64;
        let speed = traj.speed_bound();

        let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        if *times.last().unwrap() < t_end {
            times.push(t_end);
        }

        let mut i = 0usize;
        while i < times.len() {
            let t = times[i];
            let clearance = self.point_clearance(&traj.position_at(t));
            if clearance < r {
                return false;
            }
            if speed <= 0.0 {
                return true;
            }
            // Samples within (clearance - r) of travel cannot violate.
            let skip = ((clearance - r) / (speed * dt)).floor();
            i += 1 + (skip.max(0.0) as usize);
        }
        true
    }

    /// Number of truncated obstacle rays (detecting pixels).
    pub fn ray_count(&self) -> usize {
        self.rays.len()
    }
}

/// Minimum distance from `x` to the occupied-or-unknown set of `image`,
/// counting every detecting pixel as an obstacle.
pub fn point_clearance(image: &DepthImage, x: &Vector3<f64>) -> f64 {
    ClearanceOracle::new(image, 0.0).point_clearance(x)
}

/// Ground-truth sweep: true iff the center of the vehicle sphere keeps
/// clearance `r` at every sample along the trajectory. Pixels at or below
/// `r` are treated as self-view noise, consistent with the pyramid checker.
pub fn oracle_trajectory_free(traj: &Trajectory, image: &DepthImage, r: f64, dt: f64) -> bool {
    ClearanceOracle::new(image, r).trajectory_free(traj, r, dt)
}
