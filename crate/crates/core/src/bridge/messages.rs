//! Wire messages. Every message is a JSON object with a `type` tag and the
//! request `id`; pixel buffers travel base64-encoded.

use std::sync::Arc;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{AnchorPoint, AnchorPrompt, BBox, BinaryMask, ClassId, Frame, LabelSpace, SegMask};
use crate::metrics::Detection;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Overseer,
    Segmenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub id: u64,
    #[serde(flatten)]
    pub body: Message,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Message {
    Hello { version: u32, roles: Vec<Role> },
    Capabilities { version: u32, roles: Vec<Role>, labels: Vec<String> },
    Detect { frame_index: usize, frame: WireImage },
    Detections { detections: Vec<WireDetection> },
    Prompt { t: usize, frame: WireImage, mask: Option<WireImage>, anchors: Vec<WireAnchor> },
    Step { frame: WireImage },
    Mask { mask: WireImage },
    Rewind { t: usize },
    Ok,
    Error { message: String },
    Bye,
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Capabilities { .. } => "capabilities",
            Message::Detect { .. } => "detect",
            Message::Detections { .. } => "detections",
            Message::Prompt { .. } => "prompt",
            Message::Step { .. } => "step",
            Message::Mask { .. } => "mask",
            Message::Rewind { .. } => "rewind",
            Message::Ok => "ok",
            Message::Error { .. } => "error",
            Message::Bye => "bye",
        }
    }
}

mod b64 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

/// Raster payload: RGB triples for frames, one byte per pixel for masks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireImage {
    pub width: usize,
    pub height: usize,
    #[serde(with = "b64")]
    pub data: Vec<u8>,
}

impl WireImage {
    pub fn from_frame(f: &Frame) -> Self {
        Self { width: f.width(), height: f.height(), data: f.data().to_vec() }
    }

    pub fn from_mask(m: &SegMask) -> Self {
        Self { width: m.width(), height: m.height(), data: m.labels().to_vec() }
    }

    pub fn from_binary(m: &BinaryMask) -> Self {
        Self { width: m.width(), height: m.height(), data: m.bits().iter().map(|&b| b as u8).collect() }
    }

    pub fn to_frame(&self) -> Result<Frame> {
        Frame::new(self.width, self.height, self.data.clone())
    }

    pub fn to_mask(&self, labels: &Arc<LabelSpace>) -> Result<SegMask> {
        SegMask::new(self.width, self.height, self.data.clone(), labels.clone())
    }

    pub fn to_binary(&self) -> Result<BinaryMask> {
        if self.data.iter().any(|&b| b > 1) {
            return Err(Error::Protocol("binary mask bytes must be 0 or 1".into()));
        }
        BinaryMask::new(self.width, self.height, self.data.iter().map(|&b| b == 1).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDetection {
    pub class_probs: Vec<f64>,
    /// `[x_min, y_min, x_max, y_max]`, normalized.
    pub bbox: [f64; 4],
    pub score: f64,
    pub mask: WireImage,
}

impl WireDetection {
    pub fn from_detection(d: &Detection) -> Self {
        Self {
            class_probs: d.class_probs.clone(),
            bbox: d.bbox.coords(),
            score: d.score,
            mask: WireImage::from_binary(&d.mask),
        }
    }

    pub fn to_detection(&self) -> Result<Detection> {
        let [x0, y0, x1, y1] = self.bbox;
        Detection::new(self.class_probs.clone(), BBox::new(x0, y0, x1, y1)?, self.score, self.mask.to_binary()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WirePoint {
    pub x: usize,
    pub y: usize,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireAnchor {
    pub class_id: ClassId,
    pub points: Vec<WirePoint>,
    pub mask: Option<WireImage>,
}

impl WireAnchor {
    pub fn from_anchor(a: &AnchorPrompt) -> Self {
        Self {
            class_id: a.class_id,
            points: a.points.iter().map(|p| WirePoint { x: p.x, y: p.y, positive: p.positive }).collect(),
            mask: a.mask.as_ref().map(WireImage::from_binary),
        }
    }

    pub fn to_anchor(&self, dims: (usize, usize)) -> Result<AnchorPrompt> {
        let points = self.points.iter().map(|p| AnchorPoint { x: p.x, y: p.y, positive: p.positive }).collect();
        let mask = self.mask.as_ref().map(WireImage::to_binary).transpose()?;
        AnchorPrompt::new(self.class_id, points, mask, dims)
    }
}
