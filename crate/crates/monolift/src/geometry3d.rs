//! Yaw-rotated 3D boxes and rotated IoU.
//!
//! Boxes rotate about the vertical (y) axis only, so 3D intersection
//! factors into a convex polygon overlap in the ground (x, z) plane times a
//! vertical interval overlap. Footprint polygons are counter-clockwise in
//! the (x, z) plane.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angles::wrap_to_pi;
use crate::camera::Point3;
use crate::templates::Dims;

/// Points closer than this to a clip edge count as inside, so shared edges
/// and vertices do not flicker between kept and discarded.
const CLIP_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("box dims must be strictly positive, got {0:?}")]
    NonPositiveDims(Dims),
}

/// An axis-aligned 2D box, used for image-plane boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Rect {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self { xmin, ymin, xmax, ymax }
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn is_well_ordered(&self) -> bool {
        self.xmin <= self.xmax && self.ymin <= self.ymax
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.xmin..=self.xmax).contains(&x) && (self.ymin..=self.ymax).contains(&y)
    }

    pub fn intersection(&self, o: &Rect) -> Option<Rect> {
        let r = Rect::new(
            self.xmin.max(o.xmin),
            self.ymin.max(o.ymin),
            self.xmax.min(o.xmax),
            self.ymax.min(o.ymax),
        );
        r.is_well_ordered().then_some(r)
    }
}

/// Intersection over union of two axis-aligned 2D boxes.
pub fn iou2d(a: &Rect, b: &Rect) -> f64 {
    let inter = a.intersection(b).map_or(0.0, |r| r.area());
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// A convex polygon in the ground plane, vertices counter-clockwise.
/// Fewer than three vertices means the empty polygon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPoly2D {
    pub vertices: Vec<(f64, f64)>,
}

impl ConvexPoly2D {
    pub fn new(vertices: Vec<(f64, f64)>) -> Self {
        Self { vertices }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Signed shoelace area; positive for counter-clockwise vertex order.
    pub fn signed_area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let n = self.vertices.len();
        let mut twice = 0.0;
        for i in 0..n {
            let (x0, y0) = self.vertices[i];
            let (x1, y1) = self.vertices[(i + 1) % n];
            twice += x0 * y1 - x1 * y0;
        }
        0.5 * twice
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }
}

/// A 3D box: geometric center, yaw about the vertical axis, metric dims.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: Point3,
    pub yaw: f64,
    pub dims: Dims,
}

impl Box3D {
    pub fn new(center: Point3, yaw: f64, dims: Dims) -> Result<Self, GeometryError> {
        if !(dims.w > 0.0 && dims.h > 0.0 && dims.l > 0.0) {
            return Err(GeometryError::NonPositiveDims(dims));
        }
        Ok(Self { center, yaw: wrap_to_pi(yaw), dims })
    }

    pub fn volume(&self) -> f64 {
        self.dims.w * self.dims.h * self.dims.l
    }

    /// The eight corners in camera frame. Corner index is a bit mask:
    /// bit 0 set = positive length half, bit 1 set = positive height half,
    /// bit 2 set = positive width half.
    pub fn corners(&self) -> [Point3; 8] {
        let mut out = [Point3::new(0.0, 0.0, 0.0); 8];
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = crate::templates::model_to_camera(
                corner_canonical(j),
                self.center,
                self.yaw,
                self.dims,
            );
        }
        out
    }

    /// Counter-clockwise footprint rectangle in the (x, z) ground plane.
    pub fn bev_footprint(&self) -> ConvexPoly2D {
        let Dims { w, l, .. } = self.dims;
        let (hl, hw) = (0.5 * l, 0.5 * w);
        let locals = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)];
        let (s, c) = self.yaw.sin_cos();
        let verts = locals
            .iter()
            .map(|&(x, z)| (c * x + s * z + self.center.x, -s * x + c * z + self.center.z))
            .collect();
        ConvexPoly2D::new(verts)
    }

    /// Vertical extent [y_min, y_max]; y grows downward but interval
    /// arithmetic is unaffected.
    pub fn y_interval(&self) -> (f64, f64) {
        (self.center.y - 0.5 * self.dims.h, self.center.y + 0.5 * self.dims.h)
    }

    /// True when the point lies inside the box, boundary inclusive.
    pub fn contains(&self, p: Point3) -> bool {
        let local = crate::camera::rotate_y(-self.yaw, p - self.center);
        local.x.abs() <= 0.5 * self.dims.l
            && local.y.abs() <= 0.5 * self.dims.h
            && local.z.abs() <= 0.5 * self.dims.w
    }
}

/// Canonical model-frame coordinates of box corner `j` under the bit
/// layout: bit 0 set = positive length half, bit 1 = positive height half,
/// bit 2 = positive width half.
pub fn corner_canonical(j: usize) -> [f64; 3] {
    [
        if j & 1 != 0 { 0.5 } else { -0.5 },
        if j & 2 != 0 { 0.5 } else { -0.5 },
        if j & 4 != 0 { 0.5 } else { -0.5 },
    ]
}

/// Clips `subject` by every edge of convex clip polygon `clip`
/// (Sutherland-Hodgman). Both polygons must be counter-clockwise; the
/// result is counter-clockwise and possibly empty.
pub fn convex_intersect(subject: &ConvexPoly2D, clip: &ConvexPoly2D) -> ConvexPoly2D {
    if subject.is_empty() || clip.is_empty() {
        return ConvexPoly2D::default();
    }
    let mut output = subject.vertices.clone();
    let n = clip.vertices.len();
    for i in 0..n {
        if output.len() < 3 {
            return ConvexPoly2D::default();
        }
        let a = clip.vertices[i];
        let b = clip.vertices[(i + 1) % n];
        let edge = (b.0 - a.0, b.1 - a.1);
        let len = (edge.0 * edge.0 + edge.1 * edge.1).sqrt();
        if len == 0.0 {
            continue;
        }
        // Signed distance of p to the directed edge a->b; positive on the
        // interior (left) side for a counter-clockwise clip polygon.
        let dist = |p: (f64, f64)| (edge.0 * (p.1 - a.1) - edge.1 * (p.0 - a.0)) / len;
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let s = input[j];
            let e = input[(j + 1) % m];
            let ds = dist(s);
            let de = dist(e);
            let s_in = ds >= -CLIP_EPS;
            let e_in = de >= -CLIP_EPS;
            match (s_in, e_in) {
                (true, true) => output.push(e),
                (true, false) => output.push(intersect_at(s, e, ds, de)),
                (false, true) => {
                    output.push(intersect_at(s, e, ds, de));
                    output.push(e);
                }
                (false, false) => {}
            }
        }
        dedup_consecutive(&mut output);
    }
    if output.len() < 3 {
        return ConvexPoly2D::default();
    }
    ConvexPoly2D::new(output)
}

fn intersect_at(s: (f64, f64), e: (f64, f64), ds: f64, de: f64) -> (f64, f64) {
    let t = ds / (ds - de);
    (s.0 + t * (e.0 - s.0), s.1 + t * (e.1 - s.1))
}

fn dedup_consecutive(pts: &mut Vec<(f64, f64)>) {
    if pts.len() < 2 {
        return;
    }
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts.iter() {
        if let Some(&last) = kept.last() {
            if (p.0 - last.0).abs() < 1e-12 && (p.1 - last.1).abs() < 1e-12 {
                continue;
            }
        }
        kept.push(p);
    }
    if kept.len() >= 2 {
        let first = kept[0];
        let last = *kept.last().unwrap();
        if (first.0 - last.0).abs() < 1e-12 && (first.1 - last.1).abs() < 1e-12 {
            kept.pop();
        }
    }
    *pts = kept;
}

/// Rotated 3D IoU: BEV footprint intersection area times vertical overlap,
/// over the volume union. Symmetric in its arguments by construction.
pub fn iou3d(a: &Box3D, b: &Box3D) -> f64 {
    // Evaluate in a canonical argument order so iou3d(a, b) and
    // iou3d(b, a) run the identical float program.
    if box_key(b) < box_key(a) {
        return iou3d(b, a);
    }
    let inter_area = convex_intersect(&a.bev_footprint(), &b.bev_footprint()).area();
    let (a0, a1) = a.y_interval();
    let (b0, b1) = b.y_interval();
    let overlap = (a1.min(b1) - a0.max(b0)).max(0.0);
    let inter = inter_area * overlap;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

fn box_key(b: &Box3D) -> [u64; 7] {
    [
        b.center.x.to_bits(),
        b.center.y.to_bits(),
        b.center.z.to_bits(),
        b.yaw.to_bits(),
        b.dims.w.to_bits(),
        b.dims.h.to_bits(),
        b.dims.l.to_bits(),
    ]
}
