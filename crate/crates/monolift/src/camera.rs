//! Pinhole camera model: projection, back-projection, and frustum tests.
//!
//! Camera frame: x right, y down, z forward (optical axis). Image
//! coordinates are continuous; nothing is ever rounded to whole pixels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("non-positive depth z = {0}")]
    NonPositiveDepth(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// A point in the camera frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

impl std::ops::Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl std::ops::Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl std::ops::Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Rotates a point about the vertical (y) axis by `theta`.
pub fn rotate_y(theta: f64, p: Point3) -> Point3 {
    let (s, c) = theta.sin_cos();
    Point3::new(c * p.x + s * p.z, p.y, -s * p.x + c * p.z)
}

/// A continuous image location, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pixel {
    pub u: f64,
    pub v: f64,
}

impl Pixel {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Pinhole intrinsics with a single focal length for both axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// Focal length, pixels.
    pub f: f64,
    /// Principal point, pixels.
    pub px: f64,
    pub py: f64,
    /// Image size, pixels.
    pub image_w: f64,
    pub image_h: f64,
}

impl CameraIntrinsics {
    pub fn new(f: f64, px: f64, py: f64, image_w: f64, image_h: f64) -> Result<Self, CameraError> {
        if !(f > 0.0) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "focal length must be positive, got {f}"
            )));
        }
        if !(image_w > 0.0 && image_h > 0.0) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "image size must be positive, got {image_w}x{image_h}"
            )));
        }
        if !(0.0..=image_w).contains(&px) || !(0.0..=image_h).contains(&py) {
            return Err(CameraError::InvalidIntrinsics(format!(
                "principal point ({px}, {py}) outside image {image_w}x{image_h}"
            )));
        }
        Ok(Self { f, px, py, image_w, image_h })
    }

    /// Projects a camera-frame point to the image plane.
    pub fn project(&self, p: Point3) -> Result<Pixel, CameraError> {
        if p.z <= 0.0 {
            return Err(CameraError::NonPositiveDepth(p.z));
        }
        Ok(Pixel::new(self.f * p.x / p.z + self.px, self.f * p.y / p.z + self.py))
    }

    /// Back-projects an image location at a known depth.
    pub fn backproject(&self, px: Pixel, z: f64) -> Result<Point3, CameraError> {
        if z <= 0.0 {
            return Err(CameraError::NonPositiveDepth(z));
        }
        Ok(Point3::new(z * (px.u - self.px) / self.f, z * (px.v - self.py) / self.f, z))
    }

    /// True when the point is in front of the camera and projects within
    /// [0, image_w] x [0, image_h] (bounds inclusive).
    pub fn in_frustum(&self, p: Point3) -> bool {
        match self.project(p) {
            Ok(px) => self.contains(px),
            Err(_) => false,
        }
    }

    /// True when the pixel lies within the image bounds, inclusive.
    pub fn contains(&self, px: Pixel) -> bool {
        (0.0..=self.image_w).contains(&px.u) && (0.0..=self.image_h).contains(&px.v)
    }
}
