use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use posefuse_bench::Fixture;
use posefuse_core::featvol::{extract_features, FeatureMode, FeatureVolume, Sampler};
use posefuse_core::grid::Sign;

fn fusion(c: &mut Criterion) {
    let fx = Fixture::desk(12);
    let (depth, pose) = &fx.views[0];
    let mut g = c.benchmark_group("fusion");
    g.sample_size(20);

    g.bench_function("tsdf_integrate", |b| {
        let mut vol = fx.empty_volume();
        b.iter(|| vol.integrate(black_box(depth), pose, &fx.camera, Sign::Integrate).unwrap());
    });
    g.bench_function("tsdf_integrate_deintegrate", |b| {
        let mut vol = fx.fused();
        b.iter(|| {
            vol.integrate(black_box(depth), pose, &fx.camera, Sign::Integrate).unwrap();
            vol.integrate(black_box(depth), pose, &fx.camera, Sign::Deintegrate).unwrap();
        });
    });
    let features = extract_features(depth, FeatureMode::Hashed { channels: 8 }, 0);
    g.bench_function("featvol_integrate_8ch", |b| {
        let mut vol = FeatureVolume::new(fx.config.grid().unwrap(), 8).unwrap();
        b.iter(|| vol.integrate(black_box(&features), pose, &fx.camera, Sign::Integrate, Sampler::Dense).unwrap());
    });
    let fused = fx.fused();
    g.bench_function("marching_cubes", |b| b.iter(|| black_box(fused.extract_mesh())));
    g.finish();
}

criterion_group!(benches, fusion);
criterion_main!(benches);
