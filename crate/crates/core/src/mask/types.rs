use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use crate::error::{check_dims, Error, Result};

/// Class index into a [`LabelSpace`]; `0` is background.
pub type ClassId = u8;

/// Ordered set of class ids, as predicted or tracked at one frame.
pub type ClassSet = BTreeSet<ClassId>;

pub const BACKGROUND: ClassId = 0;

/// An 8-bit RGB image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame dimensions must be positive"));
        }
        if data.len() != 3 * width * height {
            return Err(Error::invalid(format!(
                "frame data has {} bytes, expected {}",
                data.len(),
                3 * width * height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb.repeat(width * height);
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixel_at(&self, index: usize) -> [u8; 3] {
        let i = 3 * index;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Luma (BT.601 weights) in `[0, 255]`.
    pub fn to_gray(&self) -> Vec<f32> {
        self.data.chunks_exact(3).map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32).collect()
    }
}

/// Ordered class names; the line index is the class id and index 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    names: Vec<String>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::invalid("label space needs at least the background class"));
        }
        if names.len() > 256 {
            return Err(Error::invalid("label space exceeds 256 classes"));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if n.is_empty() {
                return Err(Error::invalid("empty class name"));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::invalid(format!("duplicate class name `{n}`")));
            }
        }
        Ok(Self { names })
    }

    /// Label space `background, class1, .., class{n-1}` for callers without names.
    pub fn anonymous(count: usize) -> Result<Self> {
        Self::new((0..count).map(|i| if i == 0 { "background".to_string() } else { format!("class{i}") }))
    }

    /// Parses one class name per line; trailing empty lines are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        Self::new(lines)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for n in &self.names {
            out.push_str(n);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, id: ClassId) -> bool {
        (id as usize) < self.names.len()
    }
}

/// Row-major boolean raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid(format!("binary mask has {} pixels, expected {}", bits.len(), width * height)));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn set_index(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<usize> {
        check_dims(self.dims(), other.dims())?;
        Ok(self.bits.iter().zip(&other.bits).filter(|(a, b)| **a && **b).count())
    }

    /// Indices of set pixels in row-major order.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        check_dims(self.dims(), other.dims())?;
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        })
    }
}

/// Axis-aligned box in normalized `[0, 1]` image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(in_unit(x_min) && in_unit(y_min) && in_unit(x_max) && in_unit(y_max)) {
            return Err(Error::invalid("bbox coordinates must lie in [0, 1]"));
        }
        if x_min > x_max || y_min > y_max {
            return Err(Error::invalid("bbox min exceeds max"));
        }
        Ok(Self { x_min, y_min, x_max, y_max })
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// Box IoU; two degenerate (zero-area) identical boxes score 1.
    pub fn iou(&self, other: &BBox) -> f64 {
        let w = (self.x_max.min(other.x_max) - self.x_min.max(other.x_min)).max(0.0);
        let h = (self.y_max.min(other.y_max) - self.y_min.max(other.y_min)).max(0.0);
        let inter = w * h;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            if self == other {
                1.0
            } else {
                0.0
            }
        } else {
            inter / union
        }
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

/// Per-pixel class ids over a shared [`LabelSpace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegMask {
    width: usize,
    height: usize,
    labels: Vec<ClassId>,
    label_space: Arc<LabelSpace>,
}

impl SegMask {
    pub fn new(width: usize, height: usize, labels: Vec<ClassId>, label_space: Arc<LabelSpace>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::invalid(format!("mask has {} labels, expected {}", labels.len(), width * height)));
        }
        if let Some(bad) = labels.iter().find(|&&l| !label_space.contains(l)) {
            return Err(Error::invalid(format!("label {bad} outside label space of {} classes", label_space.len())));
        }
        Ok(Self { width, height, labels, label_space })
    }

    pub fn background(width: usize, height: usize, label_space: Arc<LabelSpace>) -> Self {
        Self { width, height, labels: vec![BACKGROUND; width * height], label_space }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn label_space(&self) -> &Arc<LabelSpace> {
        &self.label_space
    }

    pub fn get(&self, x: usize, y: usize) -> ClassId {
        self.labels[y * self.width + x]
    }

    /// Panics if `class` is outside the label space.
    pub fn set(&mut self, x: usize, y: usize, class: ClassId) {
        assert!(self.label_space.contains(class), "class {class} outside label space");
        self.labels[y * self.width + x] = class;
    }

    pub(crate) fn set_index(&mut self, index: usize, class: ClassId) {
        debug_assert!(self.label_space.contains(class));
        self.labels[index] = class;
    }

    pub fn class_mask(&self, class: ClassId) -> BinaryMask {
        BinaryMask { width: self.width, height: self.height, bits: self.labels.iter().map(|&l| l == class).collect() }
    }

    /// All labels occurring in the mask, background included.
    pub fn classes(&self) -> ClassSet {
        let mut seen = [false; 256];
        for &l in &self.labels {
            seen[l as usize] = true;
        }
        (0..=255u8).filter(|&c| seen[c as usize]).collect()
    }

    pub fn foreground_classes(&self) -> ClassSet {
        let mut set = self.classes();
        set.remove(&BACKGROUND);
        set
    }

    pub fn contains_class(&self, class: ClassId) -> bool {
        self.labels.contains(&class)
    }
}
