use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use super::stream::{FrameId, PoseStream};
use crate::geometry::Pose;

/// Totals above this are counted in the last histogram bin.
pub const HISTOGRAM_CLIP: f64 = 2.0;

const BIN_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FrameUpdates {
    pub updates: usize,
    /// Sum of translations between consecutive estimates, meters.
    pub total_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bins `[i·w, (i+1)·w)` for values clipped to [`HISTOGRAM_CLIP`]; the clip
    /// value itself lands in the final bin.
    pub fn new(values: impl IntoIterator<Item = f64>, bin_width: f64) -> Self {
        let n_bins = (HISTOGRAM_CLIP / bin_width + BIN_EPSILON).floor() as usize + 1;
        let mut counts = vec![0; n_bins];
        for v in values {
            let v = v.clamp(0.0, HISTOGRAM_CLIP);
            let bin = ((v / bin_width + BIN_EPSILON).floor() as usize).min(n_bins - 1);
            counts[bin] += 1;
        }
        Self { bin_width, counts }
    }

    pub fn bin_lower(&self, bin: usize) -> f64 {
        (bin as f64 * self.bin_width * 1e9).round() / 1e9
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "bin_lower_m,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{}", self.bin_lower(i), c)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StreamStats {
    #[serde(skip)]
    pub per_frame: BTreeMap<FrameId, FrameUpdates>,
    pub frames: usize,
    pub update_events: usize,
    pub fraction_updated: f64,
    pub fraction_over_half_meter: f64,
    pub fraction_over_two_meters: f64,
    pub histogram: Histogram,
}

/// Per-frame accumulated update distance over a stream, with summary fractions.
pub fn stream_stats(stream: &PoseStream, bin_width: f64) -> StreamStats {
    let mut latest: BTreeMap<FrameId, Pose> = BTreeMap::new();
    let mut per_frame: BTreeMap<FrameId, FrameUpdates> = BTreeMap::new();
    for e in stream.events() {
        let entry = per_frame.entry(e.frame_id).or_default();
        if let Some(prev) = latest.get(&e.frame_id) {
            if !e.is_new_frame {
                entry.updates += 1;
                entry.total_distance += prev.translation_distance(&e.pose);
            }
        }
        latest.insert(e.frame_id, e.pose);
    }
    let frames = per_frame.len();
    let fraction = |pred: &dyn Fn(&FrameUpdates) -> bool| {
        if frames == 0 {
            0.0
        } else {
            per_frame.values().filter(|f| pred(f)).count() as f64 / frames as f64
        }
    };
    StreamStats {
        frames,
        update_events: stream.update_count(),
        fraction_updated: fraction(&|f| f.updates >= 1),
        fraction_over_half_meter: fraction(&|f| f.total_distance >= 0.5),
        fraction_over_two_meters: fraction(&|f| f.total_distance >= 2.0),
        histogram: Histogram::new(per_frame.values().map(|f| f.total_distance), bin_width),
        per_frame,
    }
}
