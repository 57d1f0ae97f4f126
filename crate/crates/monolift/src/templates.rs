//! Wireframe CAD keypoint templates.
//!
//! Each car class carries 14 named keypoints in a unit-normalized model
//! frame and a set of mean dimensions. Model frame: x along the length axis
//! pointing forward, y along the height axis pointing down, z along the
//! width axis pointing to the car's left; every coordinate lies in
//! [-0.5, 0.5], so multiplying by the metric dimensions (l, h, w) per axis
//! recovers metric offsets from the box center.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{rotate_y, Point3};

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("template set is empty")]
    Empty,
    #[error("class ids must be dense 0..n, got {0:?}")]
    NonDenseClassIds(Vec<usize>),
    #[error("template file must define exactly 5 classes, found {0}")]
    WrongTemplateCount(usize),
    #[error("class {class}: keypoint {kp} coordinate {coord} outside [-0.5, 0.5]")]
    CoordOutOfBounds { class: usize, kp: KeypointId, coord: f64 },
    #[error("class {class}: {left}/{right} are not mirror-symmetric in the width axis")]
    AsymmetricPair { class: usize, left: KeypointId, right: KeypointId },
    #[error("class {class}: windshield pair {top}/{bottom} tilts {dx} in the length axis (limit 0.02)")]
    TiltedWindshield { class: usize, top: KeypointId, bottom: KeypointId, dx: f64 },
    #[error("class {class}: windshield pair {top}/{bottom} has zero vertical span")]
    DegenerateWindshield { class: usize, top: KeypointId, bottom: KeypointId },
    #[error("class {class}: mean dims must be strictly positive, got {dims:?}")]
    NonPositiveDims { class: usize, dims: Dims },
    #[error("class {class}: missing keypoint {name}")]
    MissingKeypoint { class: usize, name: String },
    #[error("class {class}: unknown keypoint name {name:?}")]
    UnknownKeypoint { class: usize, name: String },
}

/// Metric box dimensions, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub w: f64,
    pub h: f64,
    pub l: f64,
}

impl Dims {
    pub fn new(w: f64, h: f64, l: f64) -> Self {
        Self { w, h, l }
    }
}

/// Places a canonical model-frame point into the camera frame for a box
/// with the given center, yaw, and metric dims. The model axes scale by
/// (l, h, w) respectively and rotate about the vertical axis.
pub fn model_to_camera(canon: [f64; 3], center: Point3, yaw: f64, dims: Dims) -> Point3 {
    let local = Point3::new(dims.l * canon[0], dims.h * canon[1], dims.w * canon[2]);
    center + rotate_y(yaw, local)
}

/// The 14 keypoints annotated on every car, with stable wire codes 0..13.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeypointId {
    WheelFl,
    WheelFr,
    WheelRl,
    WheelRr,
    WindshieldFrontTl,
    WindshieldFrontTr,
    WindshieldFrontBl,
    WindshieldFrontBr,
    WindshieldRearTl,
    WindshieldRearTr,
    WindshieldRearBl,
    WindshieldRearBr,
    HeadlightL,
    HeadlightR,
}

impl KeypointId {
    pub const ALL: [KeypointId; 14] = [
        KeypointId::WheelFl,
        KeypointId::WheelFr,
        KeypointId::WheelRl,
        KeypointId::WheelRr,
        KeypointId::WindshieldFrontTl,
        KeypointId::WindshieldFrontTr,
        KeypointId::WindshieldFrontBl,
        KeypointId::WindshieldFrontBr,
        KeypointId::WindshieldRearTl,
        KeypointId::WindshieldRearTr,
        KeypointId::WindshieldRearBl,
        KeypointId::WindshieldRearBr,
        KeypointId::HeadlightL,
        KeypointId::HeadlightR,
    ];

    pub fn code(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).unwrap()
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            KeypointId::WheelFl => "wheel_fl",
            KeypointId::WheelFr => "wheel_fr",
            KeypointId::WheelRl => "wheel_rl",
            KeypointId::WheelRr => "wheel_rr",
            KeypointId::WindshieldFrontTl => "windshield_front_tl",
            KeypointId::WindshieldFrontTr => "windshield_front_tr",
            KeypointId::WindshieldFrontBl => "windshield_front_bl",
            KeypointId::WindshieldFrontBr => "windshield_front_br",
            KeypointId::WindshieldRearTl => "windshield_rear_tl",
            KeypointId::WindshieldRearTr => "windshield_rear_tr",
            KeypointId::WindshieldRearBl => "windshield_rear_bl",
            KeypointId::WindshieldRearBr => "windshield_rear_br",
            KeypointId::HeadlightL => "headlight_l",
            KeypointId::HeadlightR => "headlight_r",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }

    /// The keypoint mirrored across the car's length axis (left <-> right).
    pub fn mirror_twin(self) -> KeypointId {
        match self {
            KeypointId::WheelFl => KeypointId::WheelFr,
            KeypointId::WheelFr => KeypointId::WheelFl,
            KeypointId::WheelRl => KeypointId::WheelRr,
            KeypointId::WheelRr => KeypointId::WheelRl,
            KeypointId::WindshieldFrontTl => KeypointId::WindshieldFrontTr,
            KeypointId::WindshieldFrontTr => KeypointId::WindshieldFrontTl,
            KeypointId::WindshieldFrontBl => KeypointId::WindshieldFrontBr,
            KeypointId::WindshieldFrontBr => KeypointId::WindshieldFrontBl,
            KeypointId::WindshieldRearTl => KeypointId::WindshieldRearTr,
            KeypointId::WindshieldRearTr => KeypointId::WindshieldRearTl,
            KeypointId::WindshieldRearBl => KeypointId::WindshieldRearBr,
            KeypointId::WindshieldRearBr => KeypointId::WindshieldRearBl,
            KeypointId::HeadlightL => KeypointId::HeadlightR,
            KeypointId::HeadlightR => KeypointId::HeadlightL,
        }
    }

    /// True for keypoints on the car's left side (positive width axis).
    pub fn is_left(self) -> bool {
        matches!(
            self,
            KeypointId::WheelFl
                | KeypointId::WheelRl
                | KeypointId::WindshieldFrontTl
                | KeypointId::WindshieldFrontBl
                | KeypointId::WindshieldRearTl
                | KeypointId::WindshieldRearBl
                | KeypointId::HeadlightL
        )
    }
}

impl fmt::Display for KeypointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A windshield corner pair usable for depth retrieval. Only the four
/// near-vertical window corner pairs are legal; `ALL` lists them in the
/// tie-break order used when two pairs subtend the same pixel span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthPair {
    FrontLeft,
    FrontRight,
    RearLeft,
    RearRight,
}

impl DepthPair {
    pub const ALL: [DepthPair; 4] =
        [DepthPair::FrontLeft, DepthPair::FrontRight, DepthPair::RearLeft, DepthPair::RearRight];

    pub fn top(self) -> KeypointId {
        match self {
            DepthPair::FrontLeft => KeypointId::WindshieldFrontTl,
            DepthPair::FrontRight => KeypointId::WindshieldFrontTr,
            DepthPair::RearLeft => KeypointId::WindshieldRearTl,
            DepthPair::RearRight => KeypointId::WindshieldRearTr,
        }
    }

    pub fn bottom(self) -> KeypointId {
        match self {
            DepthPair::FrontLeft => KeypointId::WindshieldFrontBl,
            DepthPair::FrontRight => KeypointId::WindshieldFrontBr,
            DepthPair::RearLeft => KeypointId::WindshieldRearBl,
            DepthPair::RearRight => KeypointId::WindshieldRearBr,
        }
    }
}

impl fmt::Display for DepthPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DepthPair::FrontLeft => "front_left",
            DepthPair::FrontRight => "front_right",
            DepthPair::RearLeft => "rear_left",
            DepthPair::RearRight => "rear_right",
        };
        f.write_str(s)
    }
}

/// One car class: canonical keypoints plus mean dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointTemplate {
    pub class_id: usize,
    pub class_name: String,
    pub mean_dims: Dims,
    /// Canonical model-frame coordinates (x, y, z), indexed by keypoint code.
    pub keypoints: [[f64; 3]; 14],
}

impl KeypointTemplate {
    pub fn keypoint(&self, id: KeypointId) -> [f64; 3] {
        self.keypoints[id.code()]
    }

    /// Fraction of the model height spanned by a windshield pair, in (0, 1].
    pub fn pair_height_ratio(&self, pair: DepthPair) -> f64 {
        let yt = self.keypoint(pair.top())[1];
        let yb = self.keypoint(pair.bottom())[1];
        (yt - yb).abs()
    }

    /// Signed model-frame coordinates of a keypoint, reported per metric
    /// axis as (r_w, r_h, r_l) so that element-wise multiplication by
    /// (w, h, l) gives the metric offset from box center to keypoint.
    pub fn center_offset_ratios(&self, id: KeypointId) -> (f64, f64, f64) {
        let [x, y, z] = self.keypoint(id);
        (z, y, x)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        let d = self.mean_dims;
        if !(d.w > 0.0 && d.h > 0.0 && d.l > 0.0) {
            return Err(TemplateError::NonPositiveDims { class: self.class_id, dims: d });
        }
        for id in KeypointId::ALL {
            for &c in &self.keypoint(id) {
                if !(-0.5..=0.5).contains(&c) || !c.is_finite() {
                    return Err(TemplateError::CoordOutOfBounds {
                        class: self.class_id,
                        kp: id,
                        coord: c,
                    });
                }
            }
        }
        for id in KeypointId::ALL {
            if !id.is_left() {
                continue;
            }
            let twin = id.mirror_twin();
            let [lx, ly, lz] = self.keypoint(id);
            let [rx, ry, rz] = self.keypoint(twin);
            if (lx - rx).abs() > 1e-9 || (ly - ry).abs() > 1e-9 || (lz + rz).abs() > 1e-9 {
                return Err(TemplateError::AsymmetricPair {
                    class: self.class_id,
                    left: id,
                    right: twin,
                });
            }
        }
        for pair in DepthPair::ALL {
            let dx = (self.keypoint(pair.top())[0] - self.keypoint(pair.bottom())[0]).abs();
            if dx > 0.02 {
                return Err(TemplateError::TiltedWindshield {
                    class: self.class_id,
                    top: pair.top(),
                    bottom: pair.bottom(),
                    dx,
                });
            }
            if self.pair_height_ratio(pair) <= 0.0 {
                return Err(TemplateError::DegenerateWindshield {
                    class: self.class_id,
                    top: pair.top(),
                    bottom: pair.bottom(),
                });
            }
        }
        Ok(())
    }
}

/// All templates for a dataset, keyed by dense class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: Vec<KeypointTemplate>,
}

impl TemplateSet {
    pub fn new(templates: Vec<KeypointTemplate>) -> Result<Self, TemplateError> {
        if templates.is_empty() {
            return Err(TemplateError::Empty);
        }
        let mut ids: Vec<usize> = templates.iter().map(|t| t.class_id).collect();
        ids.sort_unstable();
        if ids.iter().enumerate().any(|(i, &id)| i != id) {
            return Err(TemplateError::NonDenseClassIds(ids));
        }
        let mut templates = templates;
        templates.sort_by_key(|t| t.class_id);
        for t in &templates {
            t.validate()?;
        }
        Ok(Self { templates })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn for_class(&self, class_id: usize) -> Option<&KeypointTemplate> {
        self.templates.get(class_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &KeypointTemplate> {
        self.templates.iter()
    }

    /// Assigns metric dimensions to the class whose mean dims are nearest in
    /// (w/h, l/h) aspect-ratio space; ties resolve to the lowest class id.
    pub fn classify_by_ratios(&self, dims: Dims) -> usize {
        let ratios = |d: Dims| (d.w / d.h, d.l / d.h);
        let (qw, ql) = ratios(dims);
        let mut best = (f64::INFINITY, 0usize);
        for t in &self.templates {
            let (tw, tl) = ratios(t.mean_dims);
            let d2 = (qw - tw).powi(2) + (ql - tl).powi(2);
            if d2 < best.0 {
                best = (d2, t.class_id);
            }
        }
        best.1
    }

    /// The five built-in car classes, generated from one parametric
    /// wireframe with per-class proportions.
    pub fn builtin() -> Self {
        let shapes = [
            CarShape {
                class_id: 0,
                name: "compact",
                dims: Dims::new(1.66, 1.45, 3.80),
                wheel: [0.33, 0.27, 0.41],
                ws_front: WsParams { x: 0.10, top_y: -0.44, bot_y: -0.06, z: 0.37 },
                ws_rear: WsParams { x: -0.26, top_y: -0.44, bot_y: -0.04, z: 0.37 },
                headlight: [0.49, 0.10, 0.33],
            },
            CarShape {
                class_id: 1,
                name: "sedan",
                dims: Dims::new(1.80, 1.45, 4.60),
                wheel: [0.31, 0.26, 0.42],
                ws_front: WsParams { x: 0.08, top_y: -0.45, bot_y: -0.05, z: 0.38 },
                ws_rear: WsParams { x: -0.24, top_y: -0.45, bot_y: -0.06, z: 0.38 },
                headlight: [0.49, 0.08, 0.34],
            },
            CarShape {
                class_id: 2,
                name: "suv",
                dims: Dims::new(1.92, 1.80, 4.75),
                wheel: [0.32, 0.30, 0.41],
                ws_front: WsParams { x: 0.09, top_y: -0.42, bot_y: -0.02, z: 0.39 },
                ws_rear: WsParams { x: -0.30, top_y: -0.42, bot_y: -0.02, z: 0.39 },
                headlight: [0.49, 0.12, 0.35],
            },
            CarShape {
                class_id: 3,
                name: "sports",
                dims: Dims::new(1.85, 1.25, 4.45),
                wheel: [0.34, 0.24, 0.43],
                ws_front: WsParams { x: 0.06, top_y: -0.40, bot_y: -0.02, z: 0.36 },
                ws_rear: WsParams { x: -0.20, top_y: -0.40, bot_y: -0.04, z: 0.36 },
                headlight: [0.49, 0.06, 0.36],
            },
            CarShape {
                class_id: 4,
                name: "van",
                dims: Dims::new(1.95, 2.10, 5.10),
                wheel: [0.30, 0.31, 0.40],
                ws_front: WsParams { x: 0.16, top_y: -0.46, bot_y: -0.10, z: 0.40 },
                ws_rear: WsParams { x: -0.44, top_y: -0.46, bot_y: -0.08, z: 0.40 },
                headlight: [0.49, 0.14, 0.36],
            },
        ];
        Self::new(shapes.iter().map(CarShape::build).collect())
            .expect("builtin templates satisfy their own invariants")
    }

    /// Loads a template set from a JSON file; see `to_json_string` for the
    /// schema.
    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, TemplateError> {
        let file: TemplateFile = serde_json::from_str(text)?;
        if file.templates.len() != 5 {
            return Err(TemplateError::WrongTemplateCount(file.templates.len()));
        }
        let mut templates = Vec::with_capacity(file.templates.len());
        for rec in file.templates {
            let mut coords = [[f64::NAN; 3]; 14];
            let mut seen = [false; 14];
            for (name, xyz) in &rec.keypoints {
                let id = KeypointId::from_name(name).ok_or_else(|| {
                    TemplateError::UnknownKeypoint { class: rec.class_id, name: name.clone() }
                })?;
                coords[id.code()] = *xyz;
                seen[id.code()] = true;
            }
            if let Some(missing) = KeypointId::ALL.iter().find(|id| !seen[id.code()]) {
                return Err(TemplateError::MissingKeypoint {
                    class: rec.class_id,
                    name: missing.name().to_string(),
                });
            }
            templates.push(KeypointTemplate {
                class_id: rec.class_id,
                class_name: rec.class_name,
                mean_dims: rec.mean_dims,
                keypoints: coords,
            });
        }
        Self::new(templates)
    }

    pub fn to_json_string(&self) -> String {
        let file = TemplateFile {
            templates: self
                .templates
                .iter()
                .map(|t| TemplateRecord {
                    class_id: t.class_id,
                    class_name: t.class_name.clone(),
                    mean_dims: t.mean_dims,
                    keypoints: KeypointId::ALL
                        .iter()
                        .map(|&id| (id.name().to_string(), t.keypoint(id)))
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("template serialization cannot fail")
    }
}

#[derive(Serialize, Deserialize)]
struct TemplateFile {
    templates: Vec<TemplateRecord>,
}

#[derive(Serialize, Deserialize)]
struct TemplateRecord {
    class_id: usize,
    class_name: String,
    mean_dims: Dims,
    keypoints: BTreeMap<String, [f64; 3]>,
}

struct WsParams {
    x: f64,
    top_y: f64,
    bot_y: f64,
    z: f64,
}

struct CarShape {
    class_id: usize,
    name: &'static str,
    dims: Dims,
    /// Front wheel [x, y, z]; rear wheels reuse y, z with x negated.
    wheel: [f64; 3],
    ws_front: WsParams,
    ws_rear: WsParams,
    headlight: [f64; 3],
}

impl CarShape {
    fn build(&self) -> KeypointTemplate {
        let mut kp = [[0.0f64; 3]; 14];
        let mut put = |id: KeypointId, x: f64, y: f64, z: f64| {
            kp[id.code()] = [x, y, z];
        };
        let [wx, wy, wz] = self.wheel;
        put(KeypointId::WheelFl, wx, wy, wz);
        put(KeypointId::WheelFr, wx, wy, -wz);
        put(KeypointId::WheelRl, -wx, wy, wz);
        put(KeypointId::WheelRr, -wx, wy, -wz);
        for (ws, tl, tr, bl, br) in [
            (
                &self.ws_front,
                KeypointId::WindshieldFrontTl,
                KeypointId::WindshieldFrontTr,
                KeypointId::WindshieldFrontBl,
                KeypointId::WindshieldFrontBr,
            ),
            (
                &self.ws_rear,
                KeypointId::WindshieldRearTl,
                KeypointId::WindshieldRearTr,
                KeypointId::WindshieldRearBl,
                KeypointId::WindshieldRearBr,
            ),
        ] {
            put(tl, ws.x, ws.top_y, ws.z);
            put(tr, ws.x, ws.top_y, -ws.z);
            put(bl, ws.x, ws.bot_y, ws.z);
            put(br, ws.x, ws.bot_y, -ws.z);
        }
        let [hx, hy, hz] = self.headlight;
        put(KeypointId::HeadlightL, hx, hy, hz);
        put(KeypointId::HeadlightR, hx, hy, -hz);
        KeypointTemplate {
            class_id: self.class_id,
            class_name: self.name.to_string(),
            mean_dims: self.dims,
            keypoints: kp,
        }
    }
}
