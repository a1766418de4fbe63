use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mask::io::{read_frame, read_mask};
use crate::mask::{Frame, LabelSpace, SegMask};
use crate::scene::Scenario;

use std::sync::Arc;

/// Sequential provider of video frames. Indices must run `0, 1, 2, ...`;
/// runners reject anything else.
pub trait FrameSource {
    fn next_frame(&mut self) -> Result<Option<(usize, Frame)>>;

    fn len_hint(&self) -> Option<usize> {
        None
    }
}

impl<T: FrameSource + ?Sized> FrameSource for &mut T {
    fn next_frame(&mut self) -> Result<Option<(usize, Frame)>> {
        (**self).next_frame()
    }

    fn len_hint(&self) -> Option<usize> {
        (**self).len_hint()
    }
}

/// Frames held in memory, with explicit indices.
#[derive(Debug, Clone)]
pub struct MemorySource {
    frames: Vec<(usize, Frame)>,
    pos: usize,
}

impl MemorySource {
    pub fn new(frames: Vec<Frame>) -> Self {
        Self::indexed(frames.into_iter().enumerate().collect())
    }

    pub fn indexed(frames: Vec<(usize, Frame)>) -> Self {
        Self { frames, pos: 0 }
    }
}

impl FrameSource for MemorySource {
    fn next_frame(&mut self) -> Result<Option<(usize, Frame)>> {
        let item = self.frames.get(self.pos).cloned();
        self.pos += 1;
        Ok(item)
    }

    fn len_hint(&self) -> Option<usize> {
        Some(self.frames.len())
    }
}

/// Renders a scenario lazily.
pub struct ScenarioSource<'a> {
    scenario: &'a Scenario,
    next: usize,
}

impl<'a> ScenarioSource<'a> {
    pub fn new(scenario: &'a Scenario) -> Self {
        Self { scenario, next: 0 }
    }
}

impl FrameSource for ScenarioSource<'_> {
    fn next_frame(&mut self) -> Result<Option<(usize, Frame)>> {
        if self.next >= self.scenario.num_frames() {
            return Ok(None);
        }
        let t = self.next;
        self.next += 1;
        Ok(Some((t, self.scenario.render(t)?.0)))
    }

    fn len_hint(&self) -> Option<usize> {
        Some(self.scenario.num_frames())
    }
}

/// File name of frame `t` inside a sequence directory.
pub fn frame_file_name(t: usize, extension: &str) -> String {
    format!("{t:05}.{extension}")
}

/// Numbered files `NNNNN.<extension>` of a directory, checked to run
/// `0..n` without gaps.
pub fn numbered_files(dir: &Path, extension: &str) -> Result<Vec<PathBuf>> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(extension) {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let index = stem.parse().map_err(|_| Error::invalid(format!("unnumbered file `{}`", path.display())))?;
        found.push((index, path));
    }
    found.sort();
    for (expected, (index, _)) in found.iter().enumerate() {
        if *index != expected {
            return Err(Error::NonMonotoneSource { expected, found: *index });
        }
    }
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// PPM frames `00000.ppm, 00001.ppm, ...` read from a directory on demand.
#[derive(Debug, Clone)]
pub struct DirSource {
    files: Vec<PathBuf>,
    next: usize,
}

impl DirSource {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self> {
        let files = numbered_files(dir.as_ref(), "ppm")?;
        if files.is_empty() {
            return Err(Error::invalid(format!("no frames in `{}`", dir.as_ref().display())));
        }
        Ok(Self { files, next: 0 })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

impl FrameSource for DirSource {
    fn next_frame(&mut self) -> Result<Option<(usize, Frame)>> {
        let Some(path) = self.files.get(self.next) else { return Ok(None) };
        let t = self.next;
        self.next += 1;
        Ok(Some((t, read_frame(path)?)))
    }

    fn len_hint(&self) -> Option<usize> {
        Some(self.files.len())
    }
}

/// Reads every `NNNNN.pgm` mask of a directory.
pub fn read_mask_sequence(dir: impl AsRef<Path>, labels: Arc<LabelSpace>) -> Result<Vec<SegMask>> {
    numbered_files(dir.as_ref(), "pgm")?.iter().map(|p| read_mask(p, labels.clone())).collect()
}

/// Writes masks as `NNNNN.pgm`, creating the directory.
pub fn write_mask_sequence(dir: impl AsRef<Path>, masks: &[SegMask]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for (t, m) in masks.iter().enumerate() {
        crate::mask::io::write_mask(dir.join(frame_file_name(t, "pgm")), m)?;
    }
    Ok(())
}
