use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use posefuse_core::posefilter::stream_stats;

use super::read_stream;

#[derive(clap::Args, Debug)]
pub struct Args {
    #[arg(long, value_name = "FILE")]
    stream: PathBuf,
    /// Histogram CSV with columns bin_lower_m,count.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Summary JSON; defaults to the CSV path with a .json extension.
    #[arg(long, value_name = "FILE")]
    summary: Option<PathBuf>,
    /// Bin width, meters.
    #[arg(long, default_value_t = 0.05)]
    bin_width: f64,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    if !(args.bin_width > 0.0 && args.bin_width.is_finite()) {
        return Err(crate::UsageError("--bin-width must be positive".into()).into());
    }
    let stream = read_stream(&args.stream)?;
    let stats = stream_stats(&stream, args.bin_width);

    let mut w =
        BufWriter::new(fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    stats
        .histogram
        .write_csv(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", args.out.display()))?;

    let summary = BTreeMap::from([
        ("frames", serde_json::json!(stats.frames)),
        ("update_events", serde_json::json!(stats.update_events)),
        ("fraction_updated", serde_json::json!(stats.fraction_updated)),
        ("fraction_over_half_meter", serde_json::json!(stats.fraction_over_half_meter)),
        ("fraction_over_two_meters", serde_json::json!(stats.fraction_over_two_meters)),
        ("bin_width", serde_json::json!(args.bin_width)),
    ]);
    let summary_path = args.summary.unwrap_or_else(|| args.out.with_extension("json"));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")
        .with_context(|| format!("writing {}", summary_path.display()))?;
    println!(
        "{} frames, {} update events; updated {:.3}, >=0.5 m {:.3}, >=2 m {:.3}",
        stats.frames,
        stats.update_events,
        stats.fraction_updated,
        stats.fraction_over_half_meter,
        stats.fraction_over_two_meters
    );
    Ok(())
}
