mod common;

use std::collections::HashMap;

use posefuse_core::posefilter::{plan_actions, FilterConfig, PoseEvent, PoseStream, ReconAction};
use posefuse_core::Pose;
use proptest::prelude::*;

#[test]
fn golden_streams() {
    for (name, expected) in common::expected_plans() {
        common::check_golden(&name, &expected).unwrap();
    }
}

#[test]
fn stream_jsonl_roundtrips_bitwise() {
    for name in ["keyframes.jsonl", "update_spread.jsonl"] {
        let stream = common::load_stream(name);
        let mut buf = Vec::new();
        stream.write_jsonl(&mut buf).unwrap();
        assert_eq!(PoseStream::read_jsonl(&buf[..]).unwrap(), stream);
    }
}

/// A walk along x with random step lengths, followed by random revisions of old frames.
fn arb_stream() -> impl Strategy<Value = PoseStream> {
    (prop::collection::vec(0.0f64..0.25, 1..60), prop::collection::vec((0usize..60, 0usize..60, -0.3f64..0.3), 0..40))
        .prop_map(|(steps, updates)| {
            let mut x = 0.0;
            let mut truth = Vec::new();
            let mut events = Vec::new();
            for (t, s) in steps.iter().enumerate() {
                x += s;
                truth.push(x);
                events.push(PoseEvent::new_frame(t as u64, t as u64, Pose::from_translation(x, 0.0, 0.0)));
            }
            let n = steps.len();
            for (when, frame, dy) in updates {
                let t = when % n;
                let f = frame % (t + 1);
                events.push(PoseEvent::update(t as u64, f as u64, Pose::from_translation(truth[f], dy, 0.0)));
            }
            events.sort_by_key(|e| (e.time, !e.is_new_frame));
            PoseStream::new(events).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn plan_invariants(stream in arb_stream()) {
        let cfg = FilterConfig::default();
        let plan = plan_actions(&stream, &cfg);
        let mut live: HashMap<u64, Vec<[f64; 16]>> = HashMap::new();
        let mut seen_frames = Vec::new();
        let integrates: Vec<_> = plan.iter().filter(|a| a.action.kind() == "integrate").collect();
        for (i, a) in integrates.iter().enumerate() {
            let n = a.action.bundle().frames.len();
            if i + 1 < integrates.len() {
                prop_assert_eq!(n, cfg.bundle_size);
            } else {
                prop_assert!((1..=cfg.bundle_size).contains(&n));
            }
        }
        for (i, a) in plan.iter().enumerate() {
            let b = a.action.bundle();
            let poses: Vec<_> = b.frames.iter().map(|f| f.pose.to_row_major()).collect();
            match &a.action {
                ReconAction::Integrate(_) => {
                    prop_assert!(!live.contains_key(&b.id));
                    seen_frames.extend(b.frames.iter().map(|f| f.frame));
                    live.insert(b.id, poses);
                }
                ReconAction::Deintegrate(_) => {
                    prop_assert_eq!(live.get(&b.id), Some(&poses));
                    let next = &plan[i + 1];
                    prop_assert_eq!(next.action.kind(), "reintegrate");
                    prop_assert_eq!(next.action.bundle().id, b.id);
                    prop_assert_eq!(next.tick, a.tick);
                }
                ReconAction::Reintegrate(_) => {
                    prop_assert_eq!(plan[i - 1].action.kind(), "deintegrate");
                    live.insert(b.id, poses);
                }
            }
        }
        let mut sorted = seen_frames.clone();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), seen_frames.len());
        prop_assert!(seen_frames.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(plan.windows(2).all(|w| w[0].tick <= w[1].tick));
    }

    #[test]
    fn updates_below_threshold_never_trigger(stream in arb_stream()) {
        let cfg = FilterConfig { update_threshold: 1e6, ..FilterConfig::default() };
        prop_assert!(plan_actions(&stream, &cfg).iter().all(|a| a.action.kind() == "integrate"));
    }
}
