//! Ready-made scenarios used by the benchmark suite and the examples.

use super::spec::{BackgroundSpec, ClassRef, EntitySpec, ScenarioSpec, Shape, Waypoint};

fn wp(frame: usize, x: f64, y: f64) -> Waypoint {
    Waypoint { frame, x, y }
}

fn entity(
    class: &str,
    shape: Shape,
    path: Vec<Waypoint>,
    span: Option<[usize; 2]>,
    z_order: i32,
    color: [u8; 3],
) -> EntitySpec {
    EntitySpec { class: ClassRef::Name(class.into()), shape, path, span, z_order, color }
}

fn labels() -> Vec<String> {
    ["background", "tissue", "tool", "gauze"].map(String::from).to_vec()
}

/// One slowly drifting tissue region; a tool appears at `entry` and sweeps
/// across it until the end of the video.
pub fn tool_entry(num_frames: usize, size: usize, entry: usize) -> ScenarioSpec {
    let s = size as f64;
    let last = num_frames.saturating_sub(1).max(entry + 1);
    ScenarioSpec {
        width: size,
        height: size,
        num_frames,
        seed: 7,
        labels: labels(),
        background: BackgroundSpec { drift: [0.2, 0.1], ..BackgroundSpec::default() },
        entities: vec![
            entity(
                "tissue",
                Shape::Disc { radius: 0.22 * s },
                vec![wp(0, 0.35 * s, 0.55 * s), wp(last, 0.45 * s, 0.5 * s)],
                None,
                0,
                [180, 70, 80],
            ),
            entity(
                "tool",
                Shape::Capsule { length: 0.3 * s, radius: 0.05 * s, angle_deg: 35.0 },
                vec![wp(entry, 0.8 * s, 0.25 * s), wp(last, 0.55 * s, 0.4 * s)],
                Some([entry, num_frames]),
                1,
                [200, 200, 40],
            ),
        ],
    }
}

/// Three scenarios with entries, exits and occlusions, for method comparisons.
pub fn benchmark_suite(num_frames: usize, size: usize) -> Vec<ScenarioSpec> {
    let s = size as f64;
    let t = num_frames;
    let f = |x: f64| ((x * t as f64) as usize).min(t.saturating_sub(1));
    let mut a = tool_entry(t, size, f(0.25));
    a.seed = 21;
    a.entities.push(entity(
        "gauze",
        Shape::Rectangle { width: 0.18 * s, height: 0.12 * s, angle_deg: 10.0 },
        vec![wp(0, 0.75 * s, 0.8 * s), wp(f(0.6), 0.7 * s, 0.75 * s)],
        Some([0, f(0.6)]),
        0,
        [60, 160, 220],
    ));

    let b = ScenarioSpec {
        width: size,
        height: size,
        num_frames: t,
        seed: 22,
        labels: labels(),
        background: BackgroundSpec { drift: [-0.15, 0.2], ..BackgroundSpec::default() },
        entities: vec![
            entity(
                "tissue",
                Shape::Rectangle { width: 0.45 * s, height: 0.3 * s, angle_deg: -15.0 },
                vec![wp(0, 0.4 * s, 0.4 * s), wp(f(1.0), 0.5 * s, 0.45 * s)],
                None,
                0,
                [170, 90, 60],
            ),
            entity(
                "tool",
                Shape::Capsule { length: 0.35 * s, radius: 0.04 * s, angle_deg: -50.0 },
                vec![wp(f(0.2), 0.2 * s, 0.8 * s), wp(f(0.7), 0.6 * s, 0.6 * s)],
                Some([f(0.2), f(0.7)]),
                1,
                [230, 210, 50],
            ),
            entity(
                "gauze",
                Shape::Disc { radius: 0.1 * s },
                vec![wp(f(0.5), 0.8 * s, 0.2 * s), wp(f(1.0), 0.7 * s, 0.3 * s)],
                Some([f(0.5), t]),
                0,
                [70, 150, 230],
            ),
        ],
    };

    let c = ScenarioSpec {
        width: size,
        height: size,
        num_frames: t,
        seed: 23,
        labels: labels(),
        background: BackgroundSpec { drift: [0.3, -0.1], ..BackgroundSpec::default() },
        entities: vec![
            entity(
                "tissue",
                Shape::Disc { radius: 0.18 * s },
                vec![wp(0, 0.3 * s, 0.3 * s), wp(f(1.0), 0.35 * s, 0.4 * s)],
                None,
                0,
                [190, 60, 110],
            ),
            entity(
                "tissue",
                Shape::Disc { radius: 0.14 * s },
                vec![wp(0, 0.72 * s, 0.7 * s), wp(f(1.0), 0.68 * s, 0.62 * s)],
                None,
                0,
                [150, 80, 50],
            ),
            entity(
                "tool",
                Shape::Capsule { length: 0.3 * s, radius: 0.045 * s, angle_deg: 20.0 },
                vec![wp(0, 0.8 * s, 0.2 * s), wp(f(0.4), 0.5 * s, 0.5 * s), wp(f(0.45), 0.5 * s, 0.5 * s)],
                Some([0, f(0.45)]),
                1,
                [220, 220, 60],
            ),
            entity(
                "tool",
                Shape::Capsule { length: 0.25 * s, radius: 0.05 * s, angle_deg: 120.0 },
                vec![wp(f(0.65), 0.2 * s, 0.8 * s), wp(f(1.0), 0.45 * s, 0.55 * s)],
                Some([f(0.65), t]),
                1,
                [240, 150, 30],
            ),
        ],
    };
    vec![a, b, c]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Scenario;

    #[test]
    fn presets_validate() {
        let s = Scenario::new(tool_entry(200, 128, 50)).unwrap();
        let timeline = s.class_timeline();
        assert!(!timeline[49].contains(&2) && timeline[50].contains(&2));
        for spec in benchmark_suite(120, 96) {
            Scenario::new(spec).unwrap();
        }
    }
}
