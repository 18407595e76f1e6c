//! Free-space pyramids carved out of a depth image.
//!
//! A pyramid has its apex at the camera focal point, four lateral planes
//! through the apex, and a base plane perpendicular to the optical axis.
//! Construction guarantees that any point inside the pyramid keeps at least
//! the vehicle radius of clearance from everything the image marks occupied
//! or unknown, so trajectory sections confined to a pyramid are certified
//! collision-free without further obstacle queries.

use nalgebra::{Unit, Vector3};

use crate::image::DepthImage;
use crate::trajectory::{MonotonicSection, PlaneCrossings, Trajectory};

/// Inclusive pixel-index bounds of the expanded rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

/// Why no pyramid could be built around a seed point. All variants mean
/// "no pyramid" to the collision checker; they are distinguished for
/// diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InflateFailure {
    /// Seed behind the camera or projecting outside the image.
    OutOfView,
    /// The seed pixel's depth return is at or in front of the seed point.
    OccludedSeed,
    /// A band minimum is within twice the vehicle radius: the lateral faces
    /// cannot be tilted clear of it.
    BandTooClose,
    /// The shrunk pyramid does not strictly contain the seed.
    NotContained,
}

/// Apex-anchored free-space cell; coordinates are camera-frame (the apex is
/// the origin).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pyramid {
    /// Inward unit normals of the four lateral planes (left, right, top,
    /// bottom), each containing the apex.
    pub lateral_normals: [Vector3<f64>; 4],
    /// Base plane depth of the usable (shrunk) pyramid.
    pub base_depth: f64,
    /// Pixel bounds of the expanded rectangle the pyramid was grown from.
    pub expanded_rect: PixelRect,
    /// Depth of the expanded pyramid before the radius shrink.
    pub expanded_depth: f64,
}

impl Pyramid {
    /// Strict containment: boundary points count as outside, which is what
    /// forces a neighboring pyramid to be generated at exit points.
    #[inline]
    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        x.z > 0.0
            && x.z < self.base_depth
            && self.lateral_normals.iter().all(|n| n.dot(x) > 0.0)
    }
}

/// Ordered set of pyramids generated from one depth image.
#[derive(Debug, Clone, Default)]
pub struct PyramidStore {
    items: Vec<Pyramid>,
}

impl PyramidStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, p: Pyramid) {
        self.items.push(p);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Pyramid> {
        self.items.iter()
    }

    /// First pyramid strictly containing `x`, in insertion order.
    pub fn find_containing(&self, x: &Vector3<f64>) -> Option<&Pyramid> {
        self.items.iter().find(|p| p.contains(x))
    }
}

/// Grows a pyramid around seed point `s` (camera frame), or reports why it
/// cannot be done.
///
/// The expanded rectangle starts at the pixel containing the seed's
/// projection and grows one full edge line at a time, accepting a line only
/// when every pixel on it returns deeper than the seed plus the vehicle
/// radius. Its lateral planes are then tilted inward about their apex edge
/// until everything in the corresponding outside band is at least the
/// vehicle radius away, and the base is pulled in by the radius as well as
/// capped so that the whole cell stays inside the known (within-horizon)
/// region.
pub fn inflate_pyramid(
    s: &Vector3<f64>,
    image: &DepthImage,
    radius: f64,
    max_pyramid_depth: f64,
) -> Result<Pyramid, InflateFailure> {
    let cam = image.camera();
    let horizon = cam.unknown_horizon;

    if !(s.z > 0.0) {
        return Err(InflateFailure::OutOfView);
    }
    let u = cam.focal_px * s.x / s.z + cam.cx;
    let v = cam.focal_px * s.y / s.z + cam.cy;
    let (px, py) = cam.pixel_containing(u, v).ok_or(InflateFailure::OutOfView)?;

    // Fast fail on the single seed pixel.
    let seed_depth = image.effective_depth(px, py, radius);
    if seed_depth <= s.z {
        return Err(InflateFailure::OccludedSeed);
    }
    let threshold = s.z + radius;
    if seed_depth <= threshold {
        // Any rectangle containing the seed pixel would end at base depth
        // at or in front of the seed.
        return Err(InflateFailure::NotContained);
    }

    // Round-robin single-line edge growth, freezing edges at the image
    // border or on the first rejected line.
    let (mut x0, mut x1, mut y0, mut y1) = (px, px, py, py);
    let mut min_rect_depth = seed_depth;
    let mut frozen = [false; 4]; // left, right, top, bottom
    while !frozen.iter().all(|&f| f) {
        for side in 0..4 {
            if frozen[side] {
                continue;
            }
            let line: Option<(u32, u32, u32, u32)> = match side {
                0 if x0 > 0 => Some((x0 - 1, x0 - 1, y0, y1)),
                1 if x1 + 1 < cam.width => Some((x1 + 1, x1 + 1, y0, y1)),
                2 if y0 > 0 => Some((x0, x1, y0 - 1, y0 - 1)),
                3 if y1 + 1 < cam.height => Some((x0, x1, y1 + 1, y1 + 1)),
                _ => None,
            };
            let Some((lx0, lx1, ly0, ly1)) = line else {
                frozen[side] = true;
                continue;
            };
            let mut line_min = f64::INFINITY;
            for iy in ly0..=ly1 {
                for ix in lx0..=lx1 {
                    line_min = line_min.min(image.effective_depth(ix, iy, radius));
                    if line_min <= threshold {
                        break;
                    }
                }
            }
            if line_min <= threshold {
                frozen[side] = true;
            } else {
                min_rect_depth = min_rect_depth.min(line_min);
                match side {
                    0 => x0 = lx0,
                    1 => x1 = lx1,
                    2 => y0 = ly0,
                    _ => y1 = ly1,
                }
            }
        }
    }

    // Base depth of the expanded pyramid: rectangle minimum, the caller's
    // cap, and the known-region cap keeping every point of the shrunk cell
    // at least `radius` inside the horizon ball.
    let tu0 = cam.tan_u(x0 as f64);
    let tu1 = cam.tan_u((x1 + 1) as f64);
    let tv0 = cam.tan_v(y0 as f64);
    let tv1 = cam.tan_v((y1 + 1) as f64);
    let corner_tan_sq = {
        let tu_max = tu0.abs().max(tu1.abs());
        let tv_max = tv0.abs().max(tv1.abs());
        tu_max * tu_max + tv_max * tv_max
    };
    let cos_corner = 1.0 / (1.0 + corner_tan_sq).sqrt();
    let expanded_depth = min_rect_depth
        .min(max_pyramid_depth)
        .min((horizon - radius) * cos_corner + radius);

    // Band minima over all pixels outside the rectangle; out-of-image
    // virtual pixels enter every band at the horizon depth.
    let mut band_min = [horizon; 4];
    for iy in 0..cam.height {
        for ix in 0..cam.width {
            let band = if ix < x0 {
                0
            } else if ix > x1 {
                1
            } else if iy < y0 {
                2
            } else if iy > y1 {
                3
            } else {
                continue;
            };
            let d = image.effective_depth(ix, iy, radius);
            if d < band_min[band] {
                band_min[band] = d;
                if d <= 2.0 * radius {
                    return Err(InflateFailure::BandTooClose);
                }
            }
        }
    }
    if band_min.iter().any(|&m| m <= 2.0 * radius) {
        return Err(InflateFailure::BandTooClose);
    }

    // Lateral faces: the expanded face planes tilted inward about their
    // apex edge by sin(theta) = r / (m - r), so everything in the band
    // stays at least `radius` from the tilted plane.
    let center_dir = Vector3::new(0.5 * (tu0 + tu1), 0.5 * (tv0 + tv1), 1.0);
    let expanded_normals = [
        crate::camera::boundary_normal_u(tu0, 1.0),
        crate::camera::boundary_normal_u(tu1, -1.0),
        crate::camera::boundary_normal_v(tv0, 1.0),
        crate::camera::boundary_normal_v(tv1, -1.0),
    ];
    let edge_axes = [
        Vector3::y(),
        Vector3::y(),
        Vector3::x(),
        Vector3::x(),
    ];
    let mut lateral_normals = [Vector3::zeros(); 4];
    for i in 0..4 {
        let n = expanded_normals[i];
        let mut a = edge_axes[i];
        if a.cross(&n).dot(&center_dir) > 0.0 {
            a = -a;
        }
        let sin_t = radius / (band_min[i] - radius);
        let cos_t = (1.0 - sin_t * sin_t).sqrt();
        lateral_normals[i] = n * cos_t + a.cross(&n) * sin_t;
    }

    let base_depth = expanded_depth - radius;
    let pyramid = Pyramid {
        lateral_normals,
        base_depth,
        expanded_rect: PixelRect { x0, y0, x1, y1 },
        expanded_depth,
    };
    if base_depth <= 0.0 || !pyramid.contains(s) {
        return Err(InflateFailure::NotContained);
    }
    Ok(pyramid)
}

/// Deepest time in `section` at which the trajectory crosses a lateral face
/// plane of `p`, or `None` when the section never leaves the pyramid
/// laterally.
///
/// The trajectory must start at the apex (camera-frame origin), so every
/// face plane passes through its initial position and the crossing
/// polynomial reduces to a closed-form quartic. With the section's deepest
/// endpoint inside the pyramid, no lateral crossing certifies the entire
/// section: the base cannot be crossed because depth is monotone and stays
/// below the base depth.
pub fn deepest_collision_time(
    p: &Pyramid,
    traj: &Trajectory,
    section: &MonotonicSection,
) -> Option<f64> {
    debug_assert!(traj.init.position.norm() < 1e-9, "trajectory must start at the apex");
    let mut best: Option<(f64, f64)> = None; // (depth, time)
    for n in &p.lateral_normals {
        let crossings =
            traj.plane_crossings(&Unit::new_unchecked(*n), section.t_start, section.t_end);
        let times = match &crossings {
            PlaneCrossings::InPlane => continue,
            PlaneCrossings::Times(ts) => ts,
        };
        for &t in times.iter() {
            let depth = traj.position_at(t).z;
            if best.map_or(true, |(d, _)| depth > d) {
                best = Some((depth, t));
            }
        }
    }
    best.map(|(_, t)| t)
}
