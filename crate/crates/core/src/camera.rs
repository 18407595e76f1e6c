//! Pinhole camera model for depth images.
//!
//! The camera frame has its origin at the focal point with the z-axis
//! pointing into the image; a point `(X, Y, Z)` with `Z > 0` lands at pixel
//! coordinates `u = f X/Z + cx`, `v = f Y/Z + cy`. Continuous pixel
//! coordinates span `[0, width] x [0, height]`; pixel `(ix, iy)` covers the
//! unit square with center `(ix + 0.5, iy + 0.5)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid camera parameters: {0}")]
    InvalidParameters(&'static str),
}

/// Pinhole intrinsics plus the horizon distance `l` beyond which out-of-view
/// space is treated as unknown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    /// Focal length in pixels.
    #[serde(rename = "f")]
    pub focal_px: f64,
    /// Principal point, pixels.
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Unknown-space horizon, meters.
    #[serde(rename = "l")]
    pub unknown_horizon: f64,
}

impl CameraModel {
    pub fn new(
        focal_px: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        unknown_horizon: f64,
    ) -> Result<Self, CameraError> {
        if !(focal_px > 0.0) {
            return Err(CameraError::InvalidParameters("focal length must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(CameraError::InvalidParameters("image dimensions must be positive"));
        }
        if !(unknown_horizon > 0.0) {
            return Err(CameraError::InvalidParameters("unknown horizon must be positive"));
        }
        Ok(Self { focal_px, cx, cy, width, height, unknown_horizon })
    }

    /// Centered camera with the given horizontal field of view.
    pub fn with_hfov(width: u32, height: u32, hfov_deg: f64, unknown_horizon: f64) -> Self {
        let focal = 0.5 * width as f64 / (0.5 * hfov_deg.to_radians()).tan();
        Self::new(focal, 0.5 * width as f64, 0.5 * height as f64, width, height, unknown_horizon)
            .expect("valid hfov camera")
    }

    /// Projects a camera-frame point to continuous pixel coordinates and depth.
    pub fn project(&self, p: &Vector3<f64>) -> Result<(f64, f64, f64), CameraError> {
        if !(p.z > 0.0) {
            return Err(CameraError::NonPositiveDepth(p.z));
        }
        let u = self.focal_px * p.x / p.z + self.cx;
        let v = self.focal_px * p.y / p.z + self.cy;
        Ok((u, v, p.z))
    }

    /// Inverse of [`project`](Self::project): camera-frame point for pixel
    /// coordinates `(u, v)` at depth `z > 0`.
    pub fn deproject(&self, u: f64, v: f64, z: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) * z / self.focal_px, (v - self.cy) * z / self.focal_px, z)
    }

    /// Unnormalized ray direction through the center of pixel `(ix, iy)`,
    /// scaled so its z component is one (the ray parameter is depth).
    pub fn pixel_ray(&self, ix: u32, iy: u32) -> Vector3<f64> {
        Vector3::new(
            self.tan_u(ix as f64 + 0.5),
            self.tan_v(iy as f64 + 0.5),
            1.0,
        )
    }

    /// Tangent-space u coordinate of a continuous pixel column.
    pub fn tan_u(&self, u: f64) -> f64 {
        (u - self.cx) / self.focal_px
    }

    /// Tangent-space v coordinate of a continuous pixel row.
    pub fn tan_v(&self, v: f64) -> f64 {
        (v - self.cy) / self.focal_px
    }

    /// Index of the pixel whose footprint contains continuous coordinates
    /// `(u, v)`, or `None` outside the image.
    pub fn pixel_containing(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        if u < 0.0 || v < 0.0 {
            return None;
        }
        let ix = u.floor() as u32;
        let iy = v.floor() as u32;
        // The right/bottom border coordinates belong to the last pixel.
        let ix = ix.min(self.width.saturating_sub(1));
        let iy = iy.min(self.height.saturating_sub(1));
        if u > self.width as f64 || v > self.height as f64 {
            return None;
        }
        Some((ix, iy))
    }

    /// Inward unit normals of the four field-of-view boundary planes
    /// (left, right, top, bottom), each passing through the focal point.
    pub fn fov_plane_normals(&self) -> [Vector3<f64>; 4] {
        [
            boundary_normal_u(self.tan_u(0.0), 1.0),
            boundary_normal_u(self.tan_u(self.width as f64), -1.0),
            boundary_normal_v(self.tan_v(0.0), 1.0),
            boundary_normal_v(self.tan_v(self.height as f64), -1.0),
        ]
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Inward normal of the vertical plane of directions with tangent-u `t`;
/// `sign` is +1 when the interior has larger u, -1 when smaller.
pub(crate) fn boundary_normal_u(t: f64, sign: f64) -> Vector3<f64> {
    Vector3::new(sign, 0.0, -sign * t) / (1.0 + t * t).sqrt()
}

/// Inward normal of the horizontal plane of directions with tangent-v `t`.
pub(crate) fn boundary_normal_v(t: f64, sign: f64) -> Vector3<f64> {
    Vector3::new(0.0, sign, -sign * t) / (1.0 + t * t).sqrt()
}
