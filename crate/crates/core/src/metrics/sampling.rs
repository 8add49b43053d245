use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mesh::TriangleMesh;

/// `n` points uniformly distributed over the mesh surface, deterministic per seed.
/// Empty or zero-area meshes yield no points.
pub fn point_sample(mesh: &TriangleMesh, n: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let target = rng.random::<f64>() * total;
            let t = cumulative.partition_point(|&c| c <= target).min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(t);
            let (r1, r2): (f64, f64) = (rng.random(), rng.random());
            let s = r1.sqrt();
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect()
}
