//! Backward optical flow, mask warping and `.flo` files.
//!
//! Flow between frames `t` and `t + 1` is always referenced at `t + 1`, so
//! warping a mask from `t` onto `t + 1` is a single gather.

mod field;
mod horn_schunck;
pub mod io;

pub use field::FlowField;
pub use horn_schunck::{estimate_flow, HornSchunckParams};

use crate::error::{check_dims, Result};
use crate::mask::{SegMask, BACKGROUND};

/// Nearest-neighbour backward warp: `out[p] = m[round(p + f[p])]`.
/// Invalid or out-of-bounds lookups yield background.
pub fn warp_mask(m: &SegMask, f: &FlowField) -> Result<SegMask> {
    check_dims(m.dims(), f.dims())?;
    let (w, h) = m.dims();
    let mut out = SegMask::background(w, h, m.label_space().clone());
    for y in 0..h {
        for x in 0..w {
            let Some([u, v]) = f.get(x, y) else { continue };
            let sx = (x as f32 + u).round();
            let sy = (y as f32 + v).round();
            if sx < 0.0 || sy < 0.0 || sx >= w as f32 || sy >= h as f32 {
                continue;
            }
            let label = m.get(sx as usize, sy as usize);
            if label != BACKGROUND {
                out.set_index(y * w + x, label);
            }
        }
    }
    Ok(out)
}
