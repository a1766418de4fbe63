//! Textual model descriptions, as accepted on the command line.
//!
//! Overseers: `oracle`, `noisy:KEY=VALUE,...` (keys `drop`, `flip`,
//! `spurious`, `jitter`, `morph`, `seed`) and `bridge:ENDPOINT`.
//! Segmenters: `tracker`, `tracker:KEY=VALUE,...` (keys `history`,
//! `tolerance`, `share`) and `bridge:ENDPOINT`.

use std::sync::Arc;
use std::time::Duration;

use super::{NoiseParams, OracleOverseer, Overseer, SurrogateTracker, TrackerParams, VideoSegmenter};
use crate::bridge::{BridgeOverseer, BridgeSegmenter, Endpoint};
use crate::error::{Error, Result};
use crate::mask::LabelSpace;
use crate::scene::Palette;

#[derive(Debug, Clone, PartialEq)]
pub enum OverseerSpec {
    Oracle(NoiseParams),
    Bridge(Endpoint),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmenterSpec {
    Tracker(TrackerParams),
    Bridge(Endpoint),
}

/// What in-process models need to be built.
#[derive(Debug, Clone)]
pub struct ModelContext {
    pub labels: Arc<LabelSpace>,
    /// Entity colours; required by the oracle overseer.
    pub palette: Option<Palette>,
    pub timeout: Duration,
}

fn options(body: &str) -> Result<Vec<(&str, &str)>> {
    body.split(',')
        .filter(|s| !s.is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::invalid(format!("model option `{kv}` is not KEY=VALUE")))
        })
        .collect()
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::invalid(format!("model option `{key}` has unparsable value `{value}`")))
}

impl OverseerSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let (head, body) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "oracle" if body.is_empty() => Ok(Self::Oracle(NoiseParams::default())),
            "noisy" => {
                let mut n = NoiseParams::default();
                for (k, v) in options(body)? {
                    match k {
                        "drop" => n.drop_prob = num(k, v)?,
                        "flip" => n.class_flip_prob = num(k, v)?,
                        "spurious" => n.spurious_prob = num(k, v)?,
                        "jitter" => n.box_jitter = num(k, v)?,
                        "morph" => n.mask_erode_dilate = num(k, v)?,
                        "seed" => n.seed = num(k, v)?,
                        _ => return Err(Error::invalid(format!("unknown overseer option `{k}`"))),
                    }
                }
                n.validate()?;
                Ok(Self::Oracle(n))
            }
            "bridge" => Ok(Self::Bridge(Endpoint::parse(body)?)),
            _ => Err(Error::invalid(format!("unknown overseer `{s}`; expected oracle, noisy:... or bridge:..."))),
        }
    }

    pub fn build(&self, ctx: &ModelContext) -> Result<Box<dyn Overseer>> {
        match self {
            Self::Oracle(noise) => {
                let palette = ctx
                    .palette
                    .as_ref()
                    .ok_or_else(|| Error::invalid("the oracle overseer needs the scene palette (palette.csv)"))?;
                Ok(Box::new(OracleOverseer::with_noise(palette, ctx.labels.clone(), *noise)?))
            }
            Self::Bridge(endpoint) => {
                let o = BridgeOverseer::connect(endpoint, ctx.timeout)?;
                check_labels(o.label_space(), &ctx.labels)?;
                Ok(Box::new(o))
            }
        }
    }
}

impl SegmenterSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let (head, body) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "tracker" => {
                let mut p = TrackerParams::default();
                for (k, v) in options(body)? {
                    match k {
                        "history" => p.history = num(k, v)?,
                        "tolerance" => p.color_tolerance = num(k, v)?,
                        "share" => p.min_color_share = num(k, v)?,
                        _ => return Err(Error::invalid(format!("unknown segmenter option `{k}`"))),
                    }
                }
                Ok(Self::Tracker(p))
            }
            "bridge" => Ok(Self::Bridge(Endpoint::parse(body)?)),
            _ => Err(Error::invalid(format!("unknown segmenter `{s}`; expected tracker or bridge:..."))),
        }
    }

    pub fn build(&self, ctx: &ModelContext) -> Result<Box<dyn VideoSegmenter>> {
        match self {
            Self::Tracker(p) => Ok(Box::new(SurrogateTracker::with_params(ctx.labels.clone(), *p)?)),
            Self::Bridge(endpoint) => {
                let s = BridgeSegmenter::connect(endpoint, ctx.timeout)?;
                check_labels(s.label_space(), &ctx.labels)?;
                Ok(Box::new(s))
            }
        }
    }
}

fn check_labels(remote: &LabelSpace, local: &LabelSpace) -> Result<()> {
    if remote.names() == local.names() {
        Ok(())
    } else {
        Err(Error::Protocol(format!("remote label space {:?} differs from {:?}", remote.names(), local.names())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overseer_specs() {
        assert_eq!(OverseerSpec::parse("oracle").unwrap(), OverseerSpec::Oracle(NoiseParams::default()));
        let OverseerSpec::Oracle(n) = OverseerSpec::parse("noisy:drop=0.1,flip=0.05,morph=2,seed=9").unwrap() else {
            panic!("expected oracle")
        };
        assert_eq!((n.drop_prob, n.class_flip_prob, n.mask_erode_dilate, n.seed), (0.1, 0.05, 2, 9));
        assert!(matches!(OverseerSpec::parse("bridge:cmd=srv --x").unwrap(), OverseerSpec::Bridge(_)));
        for bad in ["oracle:drop=1", "noisy:drop=2", "noisy:bogus=1", "noisy:drop", "mask2former"] {
            assert!(OverseerSpec::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parses_segmenter_specs() {
        assert_eq!(SegmenterSpec::parse("tracker").unwrap(), SegmenterSpec::Tracker(TrackerParams::default()));
        let SegmenterSpec::Tracker(p) = SegmenterSpec::parse("tracker:history=32,tolerance=3").unwrap() else {
            panic!("expected tracker")
        };
        assert_eq!((p.history, p.color_tolerance), (32, 3));
        assert!(matches!(
            SegmenterSpec::parse("bridge:localhost:4000").unwrap(),
            SegmenterSpec::Bridge(Endpoint::Tcp(_))
        ));
        assert!(SegmenterSpec::parse("sam2").is_err());
    }

    #[test]
    fn oracle_requires_a_palette() {
        let ctx = ModelContext {
            labels: Arc::new(LabelSpace::new(["background", "tool"]).unwrap()),
            palette: None,
            timeout: Duration::from_secs(1),
        };
        assert!(OverseerSpec::parse("oracle").unwrap().build(&ctx).err().unwrap().is_input_error());
        assert!(SegmenterSpec::parse("tracker:history=0").unwrap().build(&ctx).is_err());
    }
}
