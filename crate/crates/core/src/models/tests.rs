use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::mask::{sample_anchors, ClassSet, Frame, LabelSpace, SegMask};
use crate::metrics::Detection;
use crate::scene::presets::tool_entry;
use crate::scene::{BackgroundSpec, ClassRef, EntitySpec, Scenario, ScenarioSpec, Shape, Waypoint};

fn oracle(s: &Scenario) -> OracleOverseer {
    OracleOverseer::new(&s.palette(), s.label_space().clone()).unwrap()
}

fn disc(class: u8, r: f64, path: &[(usize, f64, f64)], span: Option<[usize; 2]>, color: [u8; 3]) -> EntitySpec {
    EntitySpec {
        class: ClassRef::Id(class),
        shape: Shape::Disc { radius: r },
        path: path.iter().map(|&(frame, x, y)| Waypoint { frame, x, y }).collect(),
        span,
        z_order: 0,
        color,
    }
}

fn scenario(entities: Vec<EntitySpec>, frames: usize) -> Scenario {
    Scenario::new(ScenarioSpec {
        width: 40,
        height: 32,
        num_frames: frames,
        seed: 5,
        labels: vec!["background".into(), "tissue".into(), "tool".into()],
        background: BackgroundSpec::default(),
        entities,
    })
    .unwrap()
}

#[test]
fn noise_free_oracle_reproduces_ground_truth() {
    let s = Scenario::new(tool_entry(60, 64, 20)).unwrap();
    let o = oracle(&s);
    for t in 0..s.num_frames() {
        let (frame, gt) = s.render(t).unwrap();
        let out = o.detect(t, &frame).unwrap();
        assert_eq!(out.semantic_mask, gt, "frame {t}");
        assert_eq!(out.class_set, gt.foreground_classes());
    }
}

#[test]
fn full_drop_gives_empty_output() {
    let s = Scenario::new(tool_entry(10, 64, 0)).unwrap();
    let noise = NoiseParams { drop_prob: 1.0, ..NoiseParams::default() };
    let o = OracleOverseer::with_noise(&s.palette(), s.label_space().clone(), noise).unwrap();
    let out = o.detect(3, &s.render(3).unwrap().0).unwrap();
    assert!(out.detections.is_empty() && out.class_set.is_empty());
    assert!(out.semantic_mask.foreground_classes().is_empty());
}

#[test]
fn spurious_detections_are_reproducible() {
    let s = Scenario::new(tool_entry(10, 64, 0)).unwrap();
    let noise = NoiseParams { spurious_prob: 1.0, seed: 9, ..NoiseParams::default() };
    let a = OracleOverseer::with_noise(&s.palette(), s.label_space().clone(), noise).unwrap();
    let b = a.clone();
    let frame = s.render(4).unwrap().0;
    let (x, y) = (a.detect(4, &frame).unwrap(), b.detect(4, &frame).unwrap());
    assert_eq!(x, y);
    assert_eq!(x.detections.len(), 3);
    assert_eq!(x.detections[2].score, 0.5);
    assert_ne!(a.detect(5, &frame).unwrap().detections[2].mask, x.detections[2].mask);
}

#[test]
fn invalid_noise_is_rejected() {
    let s = Scenario::new(tool_entry(10, 64, 0)).unwrap();
    let noise = NoiseParams { drop_prob: 1.5, ..NoiseParams::default() };
    assert!(OracleOverseer::with_noise(&s.palette(), s.label_space().clone(), noise).is_err());
}

#[test]
fn higher_score_wins_overlaps() {
    let labels = Arc::new(LabelSpace::anonymous(3).unwrap());
    let full = crate::mask::BinaryMask::from_fn(4, 4, |_, _| true);
    let low = Detection::one_hot(1, 3, 0.3, full.clone()).unwrap();
    let high = Detection::one_hot(2, 3, 0.9, full).unwrap();
    let out = OverseerOutput::from_detections(vec![high, low], 4, 4, labels).unwrap();
    assert!(out.semantic_mask.labels().iter().all(|&l| l == 2));
    assert_eq!(out.class_set, [1, 2].into_iter().collect());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn class_set_is_argmax_set(seed in 0u64..1000, drop in 0.0f64..1.0, flip in 0.0f64..1.0,
                               spur in 0.0f64..1.0, k in 0u32..3, t in 0usize..30) {
        let s = Scenario::new(tool_entry(30, 48, 10)).unwrap();
        let noise = NoiseParams { drop_prob: drop, class_flip_prob: flip, spurious_prob: spur,
                                  box_jitter: 2.0, mask_erode_dilate: k, seed };
        let o = OracleOverseer::with_noise(&s.palette(), s.label_space().clone(), noise).unwrap();
        let out = o.detect(t, &s.render(t).unwrap().0).unwrap();
        let argmax: ClassSet = out.detections.iter().map(Detection::class).collect();
        prop_assert_eq!(&out.class_set, &argmax);
        let mut allowed = out.class_set.clone();
        allowed.insert(0);
        prop_assert!(out.semantic_mask.classes().is_subset(&allowed));
        prop_assert_eq!(o.detect(t, &s.render(t).unwrap().0).unwrap(), out);
    }
}

#[test]
fn injections_add_a_class_for_their_duration() {
    let s = Scenario::new(tool_entry(12, 48, 0)).unwrap();
    let inj = Injection { start: 3, duration: 2, class_id: 3, region: [0, 0, 4, 4] };
    let o = InjectingOverseer::new(oracle(&s), vec![inj]).unwrap();
    let present: Vec<bool> =
        (0..8).map(|t| o.detect(t, &s.render(t).unwrap().0).unwrap().class_set.contains(&3)).collect();
    assert_eq!(present, [false, false, false, true, true, false, false, false]);
    assert!(InjectingOverseer::new(oracle(&s), vec![Injection { class_id: 0, ..inj }]).is_err());
}

fn run_tracker(s: &Scenario, prompt_at_zero: &SegMask) -> Vec<SegMask> {
    let mut tr = SurrogateTracker::new(s.label_space().clone());
    let mut out = vec![tr.prompt(0, &s.render(0).unwrap().0, Some(prompt_at_zero), &[]).unwrap()];
    for t in 1..s.num_frames() {
        out.push(tr.step(&s.render(t).unwrap().0).unwrap());
    }
    out
}

#[test]
fn static_scene_keeps_the_prompt_mask() {
    let s = scenario(
        vec![
            disc(1, 6.0, &[(0, 12.0, 12.0)], None, [200, 40, 40]),
            disc(2, 4.0, &[(0, 28.0, 20.0)], None, [40, 200, 40]),
        ],
        8,
    );
    let gt = s.render(0).unwrap().1;
    for m in run_tracker(&s, &gt) {
        assert_eq!(m, gt);
    }
}

#[test]
fn moving_object_is_followed_exactly() {
    let s = scenario(vec![disc(1, 4.0, &[(0, 6.0, 16.0), (9, 33.0, 16.0)], None, [200, 40, 40])], 10);
    let masks = run_tracker(&s, &s.render(0).unwrap().1);
    for (t, m) in masks.iter().enumerate() {
        assert_eq!(m, &s.render(t).unwrap().1, "frame {t}");
    }
}

#[test]
fn unprompted_entry_is_missed_until_reprompt() {
    let s = scenario(
        vec![
            disc(1, 6.0, &[(0, 12.0, 12.0)], None, [200, 40, 40]),
            disc(2, 4.0, &[(0, 30.0, 20.0)], Some([5, 12]), [40, 200, 40]),
        ],
        12,
    );
    let mut tr = SurrogateTracker::new(s.label_space().clone());
    tr.prompt(0, &s.render(0).unwrap().0, Some(&s.render(0).unwrap().1), &[]).unwrap();
    for t in 1..9 {
        let m = tr.step(&s.render(t).unwrap().0).unwrap();
        assert!(!m.contains_class(2), "frame {t}");
    }
    tr.rewind(5).unwrap();
    let (f5, gt5) = s.render(5).unwrap();
    let anchors: Vec<_> =
        gt5.foreground_classes().into_iter().map(|c| sample_anchors(&gt5, c, 3, 0).unwrap()).collect();
    assert_eq!(tr.prompt(5, &f5, Some(&gt5), &anchors).unwrap(), gt5);
    for t in 6..12 {
        assert_eq!(tr.step(&s.render(t).unwrap().0).unwrap(), s.render(t).unwrap().1);
    }
}

#[test]
fn exiting_object_disappears() {
    let s = scenario(
        vec![
            disc(1, 6.0, &[(0, 12.0, 12.0)], None, [200, 40, 40]),
            disc(2, 4.0, &[(0, 30.0, 20.0)], Some([0, 4]), [40, 200, 40]),
        ],
        8,
    );
    let masks = run_tracker(&s, &s.render(0).unwrap().1);
    assert!(masks[3].contains_class(2));
    assert!(masks[4..].iter().all(|m| !m.contains_class(2)));
}

#[test]
fn only_the_prompted_instance_is_tracked() {
    let s = scenario(
        vec![
            disc(1, 5.0, &[(0, 10.0, 12.0)], None, [200, 40, 40]),
            disc(1, 5.0, &[(0, 30.0, 12.0)], None, [200, 40, 90]),
        ],
        4,
    );
    let gt = s.render(0).unwrap().1;
    let mut left = SegMask::background(40, 32, s.label_space().clone());
    for y in 0..32 {
        for x in 0..20 {
            if gt.get(x, y) == 1 {
                left.set(x, y, 1);
            }
        }
    }
    for m in run_tracker(&s, &left) {
        assert_eq!(m, left);
    }
}

#[test]
fn anchors_alone_prompt_an_object() {
    let s = scenario(vec![disc(2, 5.0, &[(0, 10.0, 12.0), (3, 16.0, 12.0)], None, [40, 200, 40])], 4);
    let (f0, gt0) = s.render(0).unwrap();
    let anchors = sample_anchors(&gt0, 2, 1, 0).unwrap();
    let mut tr = SurrogateTracker::new(s.label_space().clone());
    assert_eq!(tr.prompt(0, &f0, None, &[anchors]).unwrap(), gt0);
    assert_eq!(tr.step(&s.render(1).unwrap().0).unwrap(), s.render(1).unwrap().1);
}

#[test]
fn contract_errors() {
    let s = scenario(vec![disc(1, 5.0, &[(0, 10.0, 12.0)], None, [200, 40, 40])], 30);
    let mut tr = SurrogateTracker::new(s.label_space().clone());
    let f = s.render(0).unwrap().0;
    assert!(matches!(tr.step(&f), Err(crate::Error::NotPrompted)));
    tr.prompt(0, &f, Some(&s.render(0).unwrap().1), &[]).unwrap();
    for _ in 0..20 {
        tr.step(&f).unwrap();
    }
    assert_eq!(tr.history_span(), Some((5, 20)));
    assert!(matches!(tr.rewind(4), Err(crate::Error::RewindOutOfHistory { requested: 4, oldest: 5, newest: 20 })));
    tr.rewind(17).unwrap();
    assert_eq!(tr.state().unwrap().frame_index, 17);
    assert!(tr.step(&Frame::filled(8, 8, [0, 0, 0]).unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn tracker_never_emits_unprompted_classes(keep in proptest::collection::vec(any::<bool>(), 3), frames in 2usize..10) {
        let s = scenario(
            vec![
                disc(1, 5.0, &[(0, 8.0, 8.0), (9, 20.0, 10.0)], None, [200, 40, 40]),
                disc(2, 4.0, &[(0, 30.0, 24.0), (9, 24.0, 20.0)], None, [40, 200, 40]),
                disc(2, 3.0, &[(0, 10.0, 26.0)], Some([1, 10]), [40, 90, 200]),
            ],
            10,
        );
        let gt = s.render(0).unwrap().1;
        let mut prompt = SegMask::background(40, 32, s.label_space().clone());
        for (i, &l) in gt.labels().iter().enumerate() {
            if l != 0 && keep[l as usize] {
                prompt.set(i % 40, i / 40, l);
            }
        }
        let prompted = prompt.foreground_classes();
        let mut tr = SurrogateTracker::new(s.label_space().clone());
        tr.prompt(0, &s.render(0).unwrap().0, Some(&prompt), &[]).unwrap();
        for t in 1..frames {
            let m = tr.step(&s.render(t).unwrap().0).unwrap();
            prop_assert!(m.foreground_classes().is_subset(&prompted));
        }
    }
}
