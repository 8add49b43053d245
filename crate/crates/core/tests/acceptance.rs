//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use posefuse_core::featvol::{extract_features, FeatureMode, FeatureVolume, Sampler};
use posefuse_core::grid::{Sign, VoxelGrid};
use posefuse_core::metrics::{evaluate_with_seeds, EvalConfig, GroundTruth};
use posefuse_core::pipeline::{reconstruct, run_experiment, EvalScope, Representation, Strategy, Volume};
use posefuse_core::posefilter::{plan_actions, PoseEvent, PoseStream};
use posefuse_core::simulator::{
    default_orbit, render_depth, simulate_stream, write_trajectory, DriftConfig, Primitive, SimulatedRun,
};
use posefuse_core::{DepthStore, ExperimentConfig, Intrinsics, Pose, Scene, TriangleMesh, TsdfVolume};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn desk_run() -> &'static SimulatedRun {
    static RUN: OnceLock<SimulatedRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let frames = posefuse_core::simulator::DEFAULT_FRAMES;
        let cfg = ExperimentConfig::default();
        simulate_stream(
            &Scene::default_room(),
            &default_orbit(frames),
            &DriftConfig::desk_default(cfg.seed, frames),
            &Intrinsics::desk_default(),
        )
        .unwrap()
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn exact_deintegration() -> Outcome {
    let start = Instant::now();
    let grid = common::small_grid();
    let k = common::small_camera();
    let trunc = 3.0 * grid.voxel_size();
    let mut worst = 0.0f64;
    for seq in 0..50u64 {
        let mut rng = common::rng(1000 + seq);
        let scene = common::random_scene(&mut rng);
        let views = common::random_views(&mut rng, &scene, 20, &k);
        let mut vol = TsdfVolume::new(grid, trunc).unwrap();
        let mut before_last = None;
        for (n, (depth, pose)) in views.iter().enumerate() {
            if n == views.len() - 1 {
                before_last = Some(vol.clone());
            }
            vol.integrate(depth, pose, &k, Sign::Integrate).unwrap();
        }
        let (last_depth, last_pose) = views.last().unwrap();
        vol.integrate(last_depth, last_pose, &k, Sign::Deintegrate).unwrap();
        check(vol.bitwise_eq(before_last.as_ref().unwrap()), || {
            format!("sequence {seq}: removing the last view is not bitwise")
        })?;
        vol.integrate(last_depth, last_pose, &k, Sign::Integrate).unwrap();

        let removed = rng.random_range(0..views.len() - 1);
        vol.integrate(&views[removed].0, &views[removed].1, &k, Sign::Deintegrate).unwrap();
        let mut oracle = TsdfVolume::new(grid, trunc).unwrap();
        for (_, (depth, pose)) in views.iter().enumerate().filter(|(n, _)| *n != removed) {
            oracle.integrate(depth, pose, &k, Sign::Integrate).unwrap();
        }
        let diff = max_abs_diff(vol.weighted_sums(), oracle.weighted_sums())
            .max(max_abs_diff(vol.weight_sums(), oracle.weight_sums()));
        worst = worst.max(diff);
        check(diff <= 1e-6, || format!("sequence {seq}: removing view {removed} differs by {diff:e}"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:.1?}, budget 30s"))?;
    Ok(format!("50×20 sequences, last removal bitwise, earlier removal max diff {worst:e}, {elapsed:.1?}"))
}

fn featvol_linearity() -> Outcome {
    let grid = common::small_grid();
    let k = common::small_camera();
    let trunc = 3.0 * grid.voxel_size();
    let (mut worst_order, mut worst_oracle) = (0.0f64, 0.0f64);
    for s in 0..10u64 {
        let mut rng = common::rng(2000 + s);
        let scene = common::random_scene(&mut rng);
        let views = common::random_views(&mut rng, &scene, 8, &k);

        let maps: Vec<_> = views
            .iter()
            .enumerate()
            .map(|(i, (d, _))| extract_features(d, FeatureMode::Hashed { channels: 4 }, i as u64))
            .collect();
        let mut order: Vec<usize> = (0..views.len()).collect();
        let mut forward = FeatureVolume::new(grid, 4).unwrap();
        for &i in &order {
            forward.integrate(&maps[i], &views[i].1, &k, Sign::Integrate, Sampler::Dense).unwrap();
        }
        order.shuffle(&mut rng);
        let mut shuffled = FeatureVolume::new(grid, 4).unwrap();
        for &i in &order {
            shuffled.integrate(&maps[i], &views[i].1, &k, Sign::Integrate, Sampler::Dense).unwrap();
        }
        check(forward.counts() == shuffled.counts(), || format!("scene {s}: counts depend on order"))?;
        for v in 0..grid.len() {
            if let (Some(a), Some(b)) = (forward.feature(v), shuffled.feature(v)) {
                for (x, y) in a.iter().zip(&b) {
                    let rel = (x - y).abs() / x.abs().max(1.0);
                    worst_order = worst_order.max(rel);
                }
            }
        }
        check(worst_order <= 1e-5, || format!("scene {s}: order changes features by {worst_order:e}"))?;

        let mut tsdf = TsdfVolume::new(grid, trunc).unwrap();
        let mut fv = FeatureVolume::new(grid, 1).unwrap();
        for (i, (depth, pose)) in views.iter().enumerate() {
            tsdf.integrate(depth, pose, &k, Sign::Integrate).unwrap();
            let f = extract_features(depth, FeatureMode::IdentityDepth, i as u64);
            fv.integrate(&f, pose, &k, Sign::Integrate, Sampler::TruncatedDepth { truncation: trunc }).unwrap();
        }
        for v in 0..grid.len() {
            match (tsdf.tsdf(v), fv.channel(v, 0)) {
                (Some(a), Some(b)) => worst_oracle = worst_oracle.max((a - b).abs()),
                (None, None) => {}
                _ => return Err(format!("scene {s}: voxel {v} observed by only one representation")),
            }
        }
        check(worst_oracle <= 1e-6, || format!("scene {s}: identity-depth oracle off by {worst_oracle:e}"))?;
    }
    Ok(format!("order invariance max rel diff {worst_order:e}, tsdf oracle max diff {worst_oracle:e} over 10 scenes"))
}

fn pose_filter_conformance() -> Outcome {
    let plans = common::expected_plans();
    for (name, expected) in &plans {
        common::check_golden(name, expected)?;
    }
    Ok(format!("{} golden streams, incl. 0.449 m / 0.450 m boundary", plans.len()))
}

fn strategy_ordering() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let k = Intrinsics::desk_default();
    let summary = single_threaded(|| -> Result<String, String> {
        let run = desk_run();
        let depths = DepthStore::from_frames(run.depths.clone());
        let setup = cfg.fusion(k).unwrap();
        let mut gt = GroundTruth::new(&run.stream, &depths, setup);
        let mut lines = Vec::new();
        for rep in Representation::ALL {
            let mut f = Vec::new();
            for st in Strategy::ALL {
                let e = run_experiment(
                    &run.stream,
                    &depths,
                    &cfg.filter(),
                    st,
                    rep,
                    &mut gt,
                    &cfg.eval(),
                    EvalScope::Final,
                )
                .map_err(|e| e.to_string())?;
                f.push(e.final_report().ok_or("no final report")?.metrics.fscore);
            }
            let (none, reint, deint) = (f[0], f[1], f[2]);
            check(deint - reint >= 0.02 && reint - none >= 0.02, || {
                format!("{rep}: deintegrate {deint:.4}, reintegrate-only {reint:.4}, no-updates {none:.4}")
            })?;
            lines.push(format!("{rep} {deint:.3} > {reint:.3} > {none:.3}"));
        }
        Ok(lines.join("; "))
    })?;
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(300), || format!("took {elapsed:.1?}, budget 300s"))?;
    Ok(format!("F-score {summary}, {elapsed:.1?} single-threaded"))
}

fn full_correction_equivalence() -> Outcome {
    let run = desk_run();
    let k = Intrinsics::desk_default();
    let cfg = ExperimentConfig::default();
    let offset = Pose::from_translation(0.08, 0.0, 0.0);
    let last = run.trajectory.len() as u64 - 1;
    let mut events: Vec<PoseEvent> = run
        .trajectory
        .iter()
        .enumerate()
        .map(|(t, p)| PoseEvent::new_frame(t as u64, t as u64, offset.compose(p)))
        .collect();
    events.extend(run.trajectory.iter().enumerate().map(|(f, p)| PoseEvent::update(last, f as u64, *p)));
    let stream = PoseStream::new(events).unwrap();
    let depths = DepthStore::from_frames(run.depths.clone());
    let setup = cfg.fusion(k).unwrap();
    let keyframes: Vec<u64> = plan_actions(&stream, &cfg.filter())
        .iter()
        .filter(|a| a.action.kind() == "integrate")
        .flat_map(|a| a.action.bundle().member_frames().collect::<Vec<_>>())
        .collect();
    let mut details = Vec::new();
    for rep in Representation::ALL {
        let rec = reconstruct(&stream, &depths, &cfg.filter(), Strategy::Deintegrate, rep, setup, None)
            .map_err(|e| e.to_string())?;
        let updates = rec.applied.iter().filter(|a| a.action.kind() == "deintegrate").count();
        let mut scratch = posefuse_core::pipeline::Reconstructor::new(rep, setup, &depths).unwrap();
        let bundle = posefuse_core::posefilter::Bundle {
            id: 0,
            created_at: last,
            frames: keyframes
                .iter()
                .map(|&f| posefuse_core::posefilter::BundleFrame { frame: f, pose: run.trajectory[f as usize] })
                .collect(),
        };
        scratch.apply(&posefuse_core::ReconAction::Integrate(bundle)).unwrap();
        let worst = volume_diff(&rec.volume, scratch.volume())?;
        check(worst <= 1e-5, || format!("{rep}: max voxel difference {worst:e}"))?;
        details.push(format!("{rep} max diff {worst:e} after {updates} bundle updates"));
    }
    Ok(details.join("; "))
}

fn volume_diff(a: &Volume, b: &Volume) -> Result<f64, String> {
    let mut worst = 0.0f64;
    for v in 0..a.len() {
        match (a.value(v), b.value(v)) {
            (Some(x), Some(y)) => worst = worst.max((x - y).abs()),
            (None, None) => {}
            _ => return Err(format!("voxel {v} observed in only one volume")),
        }
    }
    Ok(worst)
}

fn plane(z: f64) -> TriangleMesh {
    let v = |x: f64, y: f64| Vector3::new(x, y, z);
    TriangleMesh::new(vec![v(-1.0, -1.0), v(1.0, -1.0), v(1.0, 1.0), v(-1.0, 1.0)], vec![[0, 1, 2], [0, 2, 3]]).unwrap()
}

fn metrics_oracle() -> Outcome {
    let cfg = EvalConfig::default();
    let seeds = cfg.sample_seeds();
    let near = evaluate_with_seeds(&plane(0.04), &plane(0.0), &cfg, seeds).unwrap();
    check(
        (near.accuracy - 0.04).abs() <= 0.002
            && (near.completeness - 0.04).abs() <= 0.002
            && (near.chamfer - 0.04).abs() <= 0.002,
        || format!("0.04 m shift: {near:?}"),
    )?;
    check(near.precision == 1.0 && near.recall == 1.0, || format!("0.04 m shift: {near:?}"))?;
    let far = evaluate_with_seeds(&plane(0.06), &plane(0.0), &cfg, seeds).unwrap();
    check(far.precision == 0.0 && far.recall == 0.0 && far.fscore == 0.0, || format!("0.06 m shift: {far:?}"))?;
    check((far.accuracy - 0.06).abs() <= 0.002 && (far.completeness - 0.06).abs() <= 0.002, || {
        format!("0.06 m shift: {far:?}")
    })?;

    let sphere = {
        let mut vol = TsdfVolume::new(common::small_grid(), 0.12).unwrap();
        let scene = Scene::new(vec![Primitive::Sphere { center: [0.0, 0.0, 0.0], radius: 0.45 }]).unwrap();
        let k = common::small_camera();
        let mut rng = common::rng(6);
        for (d, p) in common::random_views(&mut rng, &scene, 12, &k) {
            vol.integrate(&d, &p, &k, Sign::Integrate).unwrap();
        }
        vol.extract_mesh()
    };
    for (a, b) in [(plane(0.04), plane(0.0)), (sphere.clone(), plane(0.1)), (plane(0.0), sphere)] {
        let ab = evaluate_with_seeds(&a, &b, &cfg, (11, 12)).unwrap();
        let ba = evaluate_with_seeds(&b, &a, &cfg, (12, 11)).unwrap();
        check(ab.accuracy == ba.completeness && ab.completeness == ba.accuracy, || {
            format!("asymmetric: {ab:?} vs {ba:?}")
        })?;
    }
    Ok(format!("0.04 m: acc {:.4} comp {:.4} P=R=1; 0.06 m: P=R=0; symmetry exact", near.accuracy, near.completeness))
}

fn simulator_fidelity() -> Outcome {
    let scene = Scene::default_room();
    let k = Intrinsics::desk_default();
    let orbit = default_orbit(300);
    let (mut valid, mut on_surface) = (0usize, 0usize);
    for pose in orbit.iter().step_by(10) {
        let depth = render_depth(&scene, pose, &k);
        for row in 0..k.height {
            for col in 0..k.width {
                if let Some(z) = depth.get(col, row) {
                    valid += 1;
                    let p = pose.transform_point(&k.backproject(col as f64, row as f64, z as f64));
                    if scene.sdf(&p).abs() <= 2e-3 {
                        on_surface += 1;
                    }
                }
            }
        }
    }
    let fraction = on_surface as f64 / valid as f64;
    check(fraction >= 0.999, || format!("only {fraction:.5} of {valid} valid pixels on the surface"))?;

    let bytes = || {
        let frames = 40;
        let traj = default_orbit(frames);
        let run = simulate_stream(&scene, &traj, &DriftConfig::desk_default(7, frames), &k).unwrap();
        let mut buf = Vec::new();
        run.stream.write_jsonl(&mut buf).unwrap();
        write_trajectory(&run.trajectory, &mut buf).unwrap();
        for d in &run.depths {
            d.write_to(&mut buf).unwrap();
        }
        buf
    };
    let (a, b) = (bytes(), bytes());
    check(a == b, || "same-seed runs differ".into())?;
    Ok(format!("{fraction:.5} of {valid} pixels within 2 mm; same-seed runs byte-identical ({} bytes)", a.len()))
}

fn mesh_extraction() -> Outcome {
    let scene = Scene::new(vec![Primitive::Sphere { center: [0.0, 0.0, 0.0], radius: 0.5 }]).unwrap();
    let k = Intrinsics::desk_default();
    let grid = VoxelGrid::from_bounds(Vector3::new(-0.8, -0.8, -0.8), Vector3::new(0.8, 0.8, 0.8), 0.04).unwrap();
    let mut vol = TsdfVolume::new(grid, 0.12).unwrap();
    let n = 40;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for i in 0..n {
        // Fibonacci sphere of viewpoints at 1.5 m.
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let a = golden * i as f64;
        let eye = Vector3::new(r * a.cos(), r * a.sin(), z) * 1.5;
        let up = if z.abs() > 0.9 { Vector3::x() } else { Vector3::z() };
        let pose = Pose::look_at(eye, Vector3::zeros(), up).unwrap();
        vol.integrate(&render_depth(&scene, &pose, &k), &pose, &k, Sign::Integrate).unwrap();
    }
    let mesh = vol.extract_mesh();
    check(!mesh.is_empty(), || "empty mesh".into())?;
    let good = mesh.vertices.iter().filter(|v| (v.norm() - 0.5).abs() <= 0.04).count();
    let fraction = good as f64 / mesh.vertices.len() as f64;
    check(fraction >= 0.95, || format!("{fraction:.4} of vertices within one voxel"))?;
    Ok(format!("{fraction:.4} of {} vertices within 0.04 m of the sphere", mesh.vertices.len()))
}

fn integration_speed() -> Outcome {
    let k = Intrinsics::desk_default();
    let grid = VoxelGrid::new(Vector3::new(-3.0, -3.0, -0.1), 0.04, [150, 150, 150]).unwrap();
    let pose = default_orbit(300)[0];
    let depth = render_depth(&Scene::default_room(), &pose, &k);
    let mut times = single_threaded(|| {
        let mut vol = TsdfVolume::new(grid, 0.12).unwrap();
        (0..7)
            .map(|_| {
                let t = Instant::now();
                vol.integrate(&depth, &pose, &k, Sign::Integrate).unwrap();
                t.elapsed()
            })
            .collect::<Vec<_>>()
    });
    times.sort();
    let median = times[times.len() / 2];
    check(median <= Duration::from_millis(100), || format!("median {median:.1?} per frame"))?;
    Ok(format!("median {median:.1?} per 320×240 frame into 150³ voxels, one thread"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1", "exact de-integration", exact_deintegration),
        ("AC2", "feature-volume linearity", featvol_linearity),
        ("AC3", "pose-filter conformance", pose_filter_conformance),
        ("AC4", "strategy ordering", strategy_ordering),
        ("AC5", "full-correction equivalence", full_correction_equivalence),
        ("AC6", "metrics oracle", metrics_oracle),
        ("AC7", "simulator fidelity", simulator_fidelity),
        ("AC8", "mesh extraction", mesh_extraction),
        ("AC9", "integration speed", integration_speed),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("[PASS] {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
