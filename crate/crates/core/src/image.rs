//! Depth-image container and file I/O.
//!
//! Depths are stored in meters, row-major. The value `0` marks a pixel with
//! no return; background renders at the unknown-space horizon `l`. On disk an
//! image is a 16-bit binary PGM (P5, maxval 65535, big-endian) holding
//! millimeters, with the camera parameters in a JSON sidecar next to it.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::camera::CameraModel;

/// Stored depth marking a pixel with no return.
pub const INVALID_DEPTH: f32 = 0.0;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("buffer length {got} does not match {width}x{height}")]
    BufferSize { got: usize, width: u32, height: u32 },
    #[error("depth {0} m does not fit the 16-bit millimeter encoding")]
    DepthOutOfRange(f64),
    #[error("malformed PGM: {0}")]
    MalformedPgm(&'static str),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
}

/// Row-major per-pixel depth buffer with its camera model.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    camera: CameraModel,
    depth: Vec<f32>,
}

impl DepthImage {
    pub fn new(camera: CameraModel, depth: Vec<f32>) -> Result<Self, ImageError> {
        if depth.len() != camera.pixel_count() {
            return Err(ImageError::BufferSize {
                got: depth.len(),
                width: camera.width,
                height: camera.height,
            });
        }
        Ok(Self { camera, depth })
    }

    /// Image with every pixel at the same depth.
    pub fn constant(camera: CameraModel, depth: f32) -> Self {
        let n = camera.pixel_count();
        Self { camera, depth: vec![depth; n] }
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn width(&self) -> u32 {
        self.camera.width
    }

    pub fn height(&self) -> u32 {
        self.camera.height
    }

    #[inline]
    pub fn depth_at(&self, ix: u32, iy: u32) -> f64 {
        self.depth[iy as usize * self.camera.width as usize + ix as usize] as f64
    }

    pub fn buffer(&self) -> &[f32] {
        &self.depth
    }

    /// Whether the pixel detects an obstacle: a finite return strictly in
    /// front of the horizon and above `free_below` (self-view / noise floor).
    #[inline]
    pub fn is_obstacle(&self, ix: u32, iy: u32, free_below: f64) -> bool {
        let d = self.depth_at(ix, iy);
        d > free_below && d < self.camera.unknown_horizon
    }

    /// Depth used for free-space reasoning: pixels at or below `free_below`
    /// (including no-return pixels) carry no obstacle information and count
    /// as background at the horizon.
    #[inline]
    pub fn effective_depth(&self, ix: u32, iy: u32, free_below: f64) -> f64 {
        let d = self.depth_at(ix, iy);
        if d <= free_below {
            self.camera.unknown_horizon
        } else {
            d
        }
    }

    /// Writes the 16-bit PGM and its JSON sidecar (`<stem>.json`).
    pub fn save_pgm(&self, path: &Path) -> Result<(), ImageError> {
        let mut file = fs::File::create(path)?;
        self.write_pgm(&mut file)?;
        let sidecar = sidecar_path(path);
        fs::write(&sidecar, serde_json::to_vec_pretty(&self.camera)?)?;
        Ok(())
    }

    pub fn write_pgm<W: Write>(&self, w: &mut W) -> Result<(), ImageError> {
        write!(w, "P5\n{} {}\n65535\n", self.camera.width, self.camera.height)?;
        let mut bytes = Vec::with_capacity(self.depth.len() * 2);
        for &d in &self.depth {
            let mm = (d as f64 * 1000.0).round();
            if mm < 0.0 || mm > 65535.0 {
                return Err(ImageError::DepthOutOfRange(d as f64));
            }
            bytes.extend_from_slice(&(mm as u16).to_be_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    /// Reads a PGM written by [`save_pgm`](Self::save_pgm), taking the camera
    /// from the JSON sidecar.
    pub fn load_pgm(path: &Path) -> Result<Self, ImageError> {
        let camera: CameraModel = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
        let mut file = fs::File::open(path)?;
        Self::read_pgm(&mut file, camera)
    }

    pub fn read_pgm<R: Read>(r: &mut R, camera: CameraModel) -> Result<Self, ImageError> {
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        let (width, height, data) = parse_pgm(&raw)?;
        if width != camera.width || height != camera.height {
            return Err(ImageError::MalformedPgm("dimensions do not match sidecar"));
        }
        let depth = data.iter().map(|&mm| mm as f32 / 1000.0).collect();
        Self::new(camera, depth)
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn pgm_token(raw: &[u8], pos: &mut usize) -> Result<u64, ImageError> {
    // Skip whitespace and '#' comments.
    loop {
        while *pos < raw.len() && raw[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < raw.len() && raw[*pos] == b'#' {
            while *pos < raw.len() && raw[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < raw.len() && !raw[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    std::str::from_utf8(&raw[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(ImageError::MalformedPgm("bad header token"))
}

fn parse_pgm(raw: &[u8]) -> Result<(u32, u32, Vec<u16>), ImageError> {
    if raw.len() < 2 || &raw[0..2] != b"P5" {
        return Err(ImageError::MalformedPgm("missing P5 magic"));
    }
    let mut pos = 2usize;
    let width = pgm_token(raw, &mut pos)? as u32;
    let height = pgm_token(raw, &mut pos)? as u32;
    let maxval = pgm_token(raw, &mut pos)?;
    if maxval != 65535 {
        return Err(ImageError::MalformedPgm("expected 16-bit maxval 65535"));
    }
    pos += 1; // single whitespace after maxval
    let n = width as usize * height as usize;
    if raw.len() < pos + 2 * n {
        return Err(ImageError::MalformedPgm("truncated sample data"));
    }
    let data = raw[pos..pos + 2 * n]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    Ok((width, height, data))
}
