//! Median-split k-d tree over deprojected depth pixels: the baseline
//! collision checker the pyramid method is benchmarked against.

use nalgebra::Vector3;

use crate::image::DepthImage;
use crate::trajectory::Trajectory;

/// Balanced 3-d tree stored implicitly: the points of each subtree occupy a
/// contiguous range whose median element is the splitting node.
pub struct KdTree {
    points: Vec<Vector3<f64>>,
    axes: Vec<u8>,
}

impl KdTree {
    /// Builds the tree over one deprojected point per detecting pixel
    /// (depth strictly between zero and the horizon).
    pub fn from_image(image: &DepthImage) -> Self {
        let cam = image.camera();
        let mut points = Vec::new();
        for iy in 0..cam.height {
            for ix in 0..cam.width {
                if image.is_obstacle(ix, iy, 0.0) {
                    let d = image.depth_at(ix, iy);
                    points.push(cam.pixel_ray(ix, iy) * d);
                }
            }
        }
        Self::from_points(points)
    }

    pub fn from_points(mut points: Vec<Vector3<f64>>) -> Self {
        let mut axes = vec![0u8; points.len()];
        build(&mut points, &mut axes, 0);
        Self { points, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance to the nearest stored point, `None` for an empty tree.
    pub fn nearest_distance(&self, query: &Vector3<f64>) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), query, &mut best);
        Some(best.sqrt())
    }

    /// Whether any stored point lies strictly within `radius` of `query`.
    pub fn any_within(&self, query: &Vector3<f64>, radius: f64) -> bool {
        if self.points.is_empty() {
            return false;
        }
        let mut best = radius * radius;
        self.search(0, self.points.len(), query, &mut best)
    }

    /// Branch-and-bound search; `best` holds a squared-distance bound and is
    /// tightened to the nearest squared distance found below it. Returns
    /// whether any point beat the initial bound.
    fn search(&self, lo: usize, hi: usize, query: &Vector3<f64>, best: &mut f64) -> bool {
        if lo >= hi {
            return false;
        }
        let mid = lo + (hi - lo) / 2;
        let node = &self.points[mid];
        let axis = self.axes[mid] as usize;

        let mut found = false;
        let d2 = (query - node).norm_squared();
        if d2 < *best {
            *best = d2;
            found = true;
        }

        let delta = query[axis] - node[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        found |= self.search(near.0, near.1, query, best);
        if delta * delta < *best {
            found |= self.search(far.0, far.1, query, best);
        }
        found
    }
}

fn build(points: &mut [Vector3<f64>], axes: &mut [u8], depth: u8) {
    if points.is_empty() {
        return;
    }
    let axis = (depth % 3) as usize;
    let mid = points.len() / 2;
    points.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    axes[mid] = axis as u8;
    let (left_pts, rest_pts) = points.split_at_mut(mid);
    let (left_ax, rest_ax) = axes.split_at_mut(mid);
    build(left_pts, left_ax, depth + 1);
    build(&mut rest_pts[1..], &mut rest_ax[1..], depth + 1);
}

/// Baseline trajectory check: `m_samples` uniformly spaced times (endpoints
/// included); in collision when any sampled position has a stored point
/// within `r`. Occlusion and field-of-view limits are deliberately ignored,
/// matching the method this baseline reproduces.
pub fn kd_check(traj: &Trajectory, tree: &KdTree, r: f64, m_samples: usize) -> bool {
    assert!(m_samples >= 2, "need at least the two endpoint samples");
    let step = traj.duration / (m_samples - 1) as f64;
    for k in 0..m_samples {
        let t = (k as f64 * step).min(traj.duration);
        if tree.any_within(&traj.position_at(t), r) {
            return false;
        }
    }
    true
}
