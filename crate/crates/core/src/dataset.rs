//! On-disk layout of a simulated sequence:
//!
//! ```text
//! DIR/frames/NNNNN.ppm   DIR/masks/NNNNN.pgm   DIR/flow/NNNNN.flo
//! DIR/labels.txt  DIR/palette.csv  DIR/timeline.csv  DIR/scenario.json
//! ```
//!
//! Flow file `t` maps frame `t` onto frame `t + 1`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::controller::frame_file_name;
use crate::error::{Error, Result};
use crate::flow::io::write_flow;
use crate::mask::io::{read_label_space, write_frame, write_label_space, write_mask};
use crate::mask::LabelSpace;
use crate::scene::{timeline_csv, Palette, Scenario};

pub const FRAMES_DIR: &str = "frames";
pub const MASKS_DIR: &str = "masks";
pub const FLOW_DIR: &str = "flow";
pub const LABELS_FILE: &str = "labels.txt";
pub const PALETTE_FILE: &str = "palette.csv";
pub const TIMELINE_FILE: &str = "timeline.csv";
pub const SCENARIO_FILE: &str = "scenario.json";

/// Renders every frame of `scenario` into `dir`.
pub fn write_dataset(scenario: &Scenario, dir: &Path, emit_flow: bool) -> Result<()> {
    let frames = dir.join(FRAMES_DIR);
    let masks = dir.join(MASKS_DIR);
    fs::create_dir_all(&frames)?;
    fs::create_dir_all(&masks)?;
    for t in 0..scenario.num_frames() {
        let (frame, mask) = scenario.render(t)?;
        write_frame(frames.join(frame_file_name(t, "ppm")), &frame)?;
        write_mask(masks.join(frame_file_name(t, "pgm")), &mask)?;
    }
    if emit_flow {
        let flow = dir.join(FLOW_DIR);
        fs::create_dir_all(&flow)?;
        for t in 0..scenario.num_frames().saturating_sub(1) {
            write_flow(flow.join(frame_file_name(t, "flo")), &scenario.ground_truth_flow(t)?)?;
        }
    }
    write_label_space(dir.join(LABELS_FILE), scenario.label_space())?;
    fs::write(dir.join(PALETTE_FILE), scenario.palette().to_csv())?;
    fs::write(dir.join(TIMELINE_FILE), timeline_csv(&scenario.class_timeline()))?;
    fs::write(dir.join(SCENARIO_FILE), scenario.to_json())?;
    Ok(())
}

/// Looks for `name` next to a sequence directory, then in its parent.
pub fn find_sidecar(seq_dir: &Path, name: &str) -> Option<PathBuf> {
    [Some(seq_dir), seq_dir.parent()].into_iter().flatten().map(|d| d.join(name)).find(|p| p.is_file())
}

pub fn load_labels(path: Option<&Path>, seq_dir: &Path) -> Result<Arc<LabelSpace>> {
    let path = match path {
        Some(p) => p.to_path_buf(),
        None => find_sidecar(seq_dir, LABELS_FILE)
            .ok_or_else(|| Error::invalid(format!("no {LABELS_FILE} found beside `{}`", seq_dir.display())))?,
    };
    Ok(Arc::new(read_label_space(path)?))
}

pub fn load_palette(path: Option<&Path>, seq_dir: &Path) -> Result<Option<Palette>> {
    let path = match path {
        Some(p) => Some(p.to_path_buf()),
        None => find_sidecar(seq_dir, PALETTE_FILE),
    };
    path.map(|p| Palette::from_csv(&fs::read_to_string(p)?)).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{numbered_files, read_mask_sequence};
    use crate::scene::presets::tool_entry;

    #[test]
    fn dataset_layout_and_sidecars() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::new(tool_entry(5, 24, 2)).unwrap();
        write_dataset(&s, dir.path(), true).unwrap();
        assert_eq!(numbered_files(&dir.path().join(FRAMES_DIR), "ppm").unwrap().len(), 5);
        assert_eq!(numbered_files(&dir.path().join(FLOW_DIR), "flo").unwrap().len(), 4);
        let frames = dir.path().join(FRAMES_DIR);
        let labels = load_labels(None, &frames).unwrap();
        assert_eq!(labels.names(), s.label_space().names());
        assert_eq!(load_palette(None, &frames).unwrap(), Some(s.palette()));
        let masks = read_mask_sequence(dir.path().join(MASKS_DIR), labels).unwrap();
        assert_eq!(masks[3], s.render(3).unwrap().1);
        assert!(load_labels(None, &dir.path().join("nowhere").join("deeper")).is_err());
    }
}
