use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{ClassId, LabelSpace};

/// Minimum spread between the largest and smallest channel of an entity
/// colour. Background texture is grey, so coloured entities never collide with it.
pub const MIN_ENTITY_CHROMA: u8 = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub width: usize,
    pub height: usize,
    pub num_frames: usize,
    #[serde(default)]
    pub seed: u64,
    pub labels: Vec<String>,
    #[serde(default)]
    pub background: BackgroundSpec,
    #[serde(default)]
    pub entities: Vec<EntitySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    /// Texture displacement per frame, in pixels.
    #[serde(default)]
    pub drift: [f64; 2],
    /// Peak deviation of the grey texture from mid-grey.
    #[serde(default = "default_contrast")]
    pub contrast: f64,
    /// Shortest texture wavelength, in pixels.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_contrast() -> f64 {
    80.0
}

fn default_scale() -> f64 {
    10.0
}

impl Default for BackgroundSpec {
    fn default() -> Self {
        Self { drift: [0.0, 0.0], contrast: default_contrast(), scale: default_scale() }
    }
}

/// A class given either by index or by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassRef {
    Id(ClassId),
    Name(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Disc {
        radius: f64,
    },
    Rectangle {
        width: f64,
        height: f64,
        #[serde(default)]
        angle_deg: f64,
    },
    Capsule {
        length: f64,
        radius: f64,
        #[serde(default)]
        angle_deg: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub frame: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    pub class: ClassRef,
    pub shape: Shape,
    pub path: Vec<Waypoint>,
    /// `[enter, exit)`; defaults to the whole video.
    #[serde(default)]
    pub span: Option<[usize; 2]>,
    #[serde(default)]
    pub z_order: i32,
    pub color: [u8; 3],
}

/// Validated entity with resolved class id and span.
#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub class_id: ClassId,
    pub shape: Shape,
    pub path: Vec<Waypoint>,
    pub enter: usize,
    pub exit: usize,
    pub z_order: i32,
    pub color: [u8; 3],
}

impl Entity {
    pub fn is_active(&self, t: usize) -> bool {
        self.enter <= t && t < self.exit
    }

    /// Centre position at frame `t`, piecewise-linear between waypoints and
    /// clamped outside them.
    pub fn position(&self, t: usize) -> [f64; 2] {
        let first = self.path[0];
        if t <= first.frame {
            return [first.x, first.y];
        }
        for pair in self.path.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if t <= b.frame {
                let s = (t - a.frame) as f64 / (b.frame - a.frame) as f64;
                return [a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)];
            }
        }
        let last = self.path[self.path.len() - 1];
        [last.x, last.y]
    }

    /// Whether the pixel centred at `(px, py)` is covered when the entity sits at `centre`.
    pub fn covers(&self, centre: [f64; 2], px: f64, py: f64) -> bool {
        let (dx, dy) = (px - centre[0], py - centre[1]);
        match self.shape {
            Shape::Disc { radius } => dx * dx + dy * dy <= radius * radius,
            Shape::Rectangle { width, height, angle_deg } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
                u.abs() <= width / 2.0 && v.abs() <= height / 2.0
            }
            Shape::Capsule { length, radius, angle_deg } => {
                let (s, c) = angle_deg.to_radians().sin_cos();
                let u = (c * dx + s * dy).clamp(-length / 2.0, length / 2.0);
                let (qx, qy) = (dx - u * c, dy - u * s);
                qx * qx + qy * qy <= radius * radius
            }
        }
    }

    /// Conservative half-extent of the shape around its centre.
    pub fn reach(&self) -> f64 {
        match self.shape {
            Shape::Disc { radius } => radius,
            Shape::Rectangle { width, height, .. } => 0.5 * (width * width + height * height).sqrt(),
            Shape::Capsule { length, radius, .. } => length / 2.0 + radius,
        }
    }
}

/// A validated synthetic video description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub(crate) spec: ScenarioSpec,
    pub(crate) labels: Arc<LabelSpace>,
    pub(crate) entities: Vec<Entity>,
}

fn scenario_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Scenario { path: path.into(), message: message.into() }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: ScenarioSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            scenario_err(path, e.into_inner().to_string())
        })?;
        Self::new(spec)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn new(spec: ScenarioSpec) -> Result<Self> {
        if spec.width == 0 || spec.height == 0 {
            return Err(scenario_err("width", "image dimensions must be positive"));
        }
        if spec.num_frames == 0 {
            return Err(scenario_err("num_frames", "need at least one frame"));
        }
        let labels = LabelSpace::new(spec.labels.iter().cloned()).map_err(|e| scenario_err("labels", e.to_string()))?;
        let bg = &spec.background;
        if !(bg.drift[0].is_finite() && bg.drift[1].is_finite()) {
            return Err(scenario_err("background.drift", "must be finite"));
        }
        if !(bg.contrast.is_finite() && (0.0..=110.0).contains(&bg.contrast)) {
            return Err(scenario_err("background.contrast", "must lie in [0, 110]"));
        }
        if !(bg.scale.is_finite() && bg.scale >= 2.0) {
            return Err(scenario_err("background.scale", "must be at least 2 pixels"));
        }
        let mut colors = HashSet::new();
        let mut entities = Vec::with_capacity(spec.entities.len());
        for (i, e) in spec.entities.iter().enumerate() {
            let at = |field: &str| format!("entities[{i}].{field}");
            let class_id = match &e.class {
                ClassRef::Id(id) => *id,
                ClassRef::Name(name) => labels
                    .names()
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| scenario_err(at("class"), format!("unknown class `{name}`")))?
                    as ClassId,
            };
            if class_id == 0 || !labels.contains(class_id) {
                return Err(scenario_err(at("class"), "entity class must be a foreground class of the label space"));
            }
            let dims_ok = match e.shape {
                Shape::Disc { radius } => radius > 0.0 && radius.is_finite(),
                Shape::Rectangle { width, height, angle_deg } => {
                    width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite() && angle_deg.is_finite()
                }
                Shape::Capsule { length, radius, angle_deg } => {
                    length >= 0.0 && radius > 0.0 && length.is_finite() && radius.is_finite() && angle_deg.is_finite()
                }
            };
            if !dims_ok {
                return Err(scenario_err(at("shape"), "shape dimensions must be positive and finite"));
            }
            if e.path.is_empty() {
                return Err(scenario_err(at("path"), "needs at least one waypoint"));
            }
            for (k, pair) in e.path.windows(2).enumerate() {
                if pair[1].frame <= pair[0].frame {
                    return Err(scenario_err(
                        format!("entities[{i}].path[{}].frame", k + 1),
                        "waypoint frames must be strictly increasing",
                    ));
                }
            }
            if e.path.iter().any(|w| !(w.x.is_finite() && w.y.is_finite())) {
                return Err(scenario_err(at("path"), "waypoint coordinates must be finite"));
            }
            let [enter, exit] = e.span.unwrap_or([0, spec.num_frames]);
            if enter >= exit || exit > spec.num_frames {
                return Err(scenario_err(at("span"), format!("span must satisfy enter < exit <= {}", spec.num_frames)));
            }
            let chroma = e.color.iter().max().unwrap() - e.color.iter().min().unwrap();
            if chroma < MIN_ENTITY_CHROMA {
                return Err(scenario_err(
                    at("color"),
                    format!("colour is too grey (channel spread {chroma} < {MIN_ENTITY_CHROMA})"),
                ));
            }
            if !colors.insert(e.color) {
                return Err(scenario_err(at("color"), "entity colours must be unique"));
            }
            entities.push(Entity {
                class_id,
                shape: e.shape,
                path: e.path.clone(),
                enter,
                exit,
                z_order: e.z_order,
                color: e.color,
            });
        }
        Ok(Self { spec, labels: Arc::new(labels), entities })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec).expect("scenario spec serializes")
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.spec.width, self.spec.height)
    }

    pub fn num_frames(&self) -> usize {
        self.spec.num_frames
    }

    pub fn label_space(&self) -> &Arc<LabelSpace> {
        &self.labels
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    /// Colour-to-class table of all entities, in declaration order.
    pub fn palette(&self) -> Palette {
        Palette { entries: self.entities.iter().map(|e| (e.color, e.class_id)).collect() }
    }
}

/// Maps flat entity colours to classes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Palette {
    pub entries: Vec<([u8; 3], ClassId)>,
}

impl Palette {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,g,b,class_id\n");
        for ([r, g, b], c) in &self.entries {
            out.push_str(&format!("{r},{g},{b},{c}\n"));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Option<Vec<u8>> =
                (fields.len() == 4).then(|| fields.iter().map(|f| f.parse().ok()).collect()).flatten();
            match parsed {
                Some(v) => entries.push(([v[0], v[1], v[2]], v[3])),
                None => return Err(Error::invalid(format!("palette line {}: expected r,g,b,class_id", n + 1))),
            }
        }
        Ok(Self { entries })
    }
}
