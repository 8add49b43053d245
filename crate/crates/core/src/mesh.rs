//! Triangle meshes, marching-cubes extraction and ASCII PLY.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::grid::VoxelGrid;
use crate::mc_tables::{CORNERS, EDGES, TRIANGLES};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = Self { vertices, triangles };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("mesh has non-finite vertices".into()));
        }
        let n = self.vertices.len() as u32;
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidInput(format!("triangle {t:?} indexes past {n} vertices")));
        }
        Ok(())
    }

    pub fn triangle(&self, t: usize) -> [Vector3<f64>; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Writes ASCII PLY with float vertex coordinates.
    pub fn write_ply(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "ply")?;
        writeln!(w, "format ascii 1.0")?;
        writeln!(w, "element vertex {}", self.vertices.len())?;
        writeln!(w, "property float x")?;
        writeln!(w, "property float y")?;
        writeln!(w, "property float z")?;
        writeln!(w, "element face {}", self.triangles.len())?;
        writeln!(w, "property list uchar int vertex_indices")?;
        writeln!(w, "end_header")?;
        for v in &self.vertices {
            writeln!(w, "{} {} {}", v[0] as f32, v[1] as f32, v[2] as f32)?;
        }
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    /// Reads the ASCII PLY subset written by [`TriangleMesh::write_ply`]
    /// (extra vertex properties after x y z are ignored).
    pub fn read_ply(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, Ok(l))) => Ok((n + 1, l)),
                Some((n, Err(e))) => Err(Error::io(format!("PLY line {}", n + 1), e)),
                None => Err(Error::Format(format!("PLY ended while reading {what}"))),
            }
        };
        let fmt = |line: usize, msg: &str| Error::Format(format!("PLY line {line}: {msg}"));

        let (n, magic) = next("magic")?;
        if magic.trim() != "ply" {
            return Err(fmt(n, "missing 'ply' magic"));
        }
        let (mut n_vertices, mut n_faces) = (None, None);
        loop {
            let (n, line) = next("header")?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            match tok.as_slice() {
                ["end_header"] => break,
                ["format", f, ..] if *f != "ascii" => return Err(fmt(n, "only ascii PLY is supported")),
                ["element", "vertex", c] => n_vertices = Some(c.parse::<usize>().map_err(|_| fmt(n, "bad count"))?),
                ["element", "face", c] => n_faces = Some(c.parse::<usize>().map_err(|_| fmt(n, "bad count"))?),
                _ => {}
            }
        }
        let n_vertices = n_vertices.ok_or_else(|| Error::Format("PLY has no vertex element".into()))?;
        let n_faces = n_faces.unwrap_or(0);

        let mut vertices = Vec::with_capacity(n_vertices);
        for _ in 0..n_vertices {
            let (n, line) = next("vertices")?;
            let xyz: Vec<f64> = line
                .split_whitespace()
                .take(3)
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| fmt(n, "bad vertex"))?;
            if xyz.len() != 3 {
                return Err(fmt(n, "vertex needs 3 coordinates"));
            }
            vertices.push(Vector3::new(xyz[0], xyz[1], xyz[2]));
        }
        let mut triangles = Vec::with_capacity(n_faces);
        for _ in 0..n_faces {
            let (n, line) = next("faces")?;
            let idx: Vec<u32> = line
                .split_whitespace()
                .map(|s| s.parse::<u32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| fmt(n, "bad face"))?;
            match idx.as_slice() {
                [3, a, b, c] => triangles.push([*a, *b, *c]),
                _ => return Err(fmt(n, "only triangle faces are supported")),
            }
        }
        Self::new(vertices, triangles)
    }

    pub fn save_ply(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut w = BufWriter::new(file);
        self.write_ply(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load_ply(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::read_ply(BufReader::new(file))
    }
}

/// Extracts the zero isosurface of a scalar field sampled on `grid`.
///
/// `field(index)` returns `None` for unobserved voxels; cells touching one are
/// skipped and the field is never evaluated twice per voxel. Vertices on
/// shared edges are shared between triangles.
pub fn marching_cubes(grid: &VoxelGrid, field: impl Fn(usize) -> Option<f64>) -> TriangleMesh {
    let [nx, ny, nz] = grid.dims();
    let mut mesh = TriangleMesh::default();
    if nx < 2 || ny < 2 || nz < 2 {
        return mesh;
    }
    let values: Vec<Option<f64>> = (0..grid.len()).map(&field).collect();
    // (index of the lower edge endpoint, axis) -> vertex id
    let mut edge_vertices: HashMap<(usize, u8), u32> = HashMap::new();

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut corner_values = [0.0f64; 8];
                let mut corner_index = [0usize; 8];
                let mut observed = true;
                for (c, off) in CORNERS.iter().enumerate() {
                    let idx = grid.index(i + off[0], j + off[1], k + off[2]);
                    match values[idx] {
                        Some(v) => {
                            corner_values[c] = v;
                            corner_index[c] = idx;
                        }
                        None => {
                            observed = false;
                            break;
                        }
                    }
                }
                if !observed {
                    continue;
                }
                let case = corner_values
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (c, &v)| if v < 0.0 { acc | (1 << c) } else { acc });
                let tris = &TRIANGLES[case];
                if tris[0] < 0 {
                    continue;
                }
                let mut edge_vertex = |e: usize, mesh: &mut TriangleMesh| -> u32 {
                    let [mut a, mut b] = EDGES[e];
                    if corner_index[a] > corner_index[b] {
                        std::mem::swap(&mut a, &mut b);
                    }
                    let axis = (0..3).find(|&ax| CORNERS[a][ax] != CORNERS[b][ax]).unwrap() as u8;
                    *edge_vertices.entry((corner_index[a], axis)).or_insert_with(|| {
                        let (va, vb) = (corner_values[a], corner_values[b]);
                        let t = va / (va - vb);
                        let pa = grid.position(i + CORNERS[a][0], j + CORNERS[a][1], k + CORNERS[a][2]);
                        let pb = grid.position(i + CORNERS[b][0], j + CORNERS[b][1], k + CORNERS[b][2]);
                        mesh.vertices.push(pa + (pb - pa) * t);
                        (mesh.vertices.len() - 1) as u32
                    })
                };
                for tri in tris.chunks_exact(3).take_while(|t| t[0] >= 0) {
                    let v = [0, 1, 2].map(|n| edge_vertex(tri[n] as usize, &mut mesh));
                    mesh.triangles.push(v);
                }
            }
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled(grid: &VoxelGrid, sdf: impl Fn(Vector3<f64>) -> f64) -> TriangleMesh {
        marching_cubes(grid, |idx| {
            let [i, j, k] = grid.coords(idx);
            Some(sdf(grid.position(i, j, k)))
        })
    }

    fn sphere_grid() -> VoxelGrid {
        VoxelGrid::from_bounds(Vector3::repeat(-0.8), Vector3::repeat(0.8), 0.04).unwrap()
    }

    #[test]
    fn all_positive_gives_empty_mesh() {
        let mesh = sampled(&sphere_grid(), |_| 0.3);
        assert!(mesh.is_empty());
        assert!(mesh.vertices.is_empty());
    }

    #[test]
    fn sphere_vertices_near_radius() {
        let mesh = sampled(&sphere_grid(), |p| p.norm() - 0.5);
        assert!(mesh.triangles.len() > 1000);
        for v in &mesh.vertices {
            assert!((v.norm() - 0.5).abs() <= 0.04, "vertex radius {}", v.norm());
        }
        let area = mesh.surface_area();
        let exact = 4.0 * std::f64::consts::PI * 0.25;
        assert!((area - exact).abs() / exact < 0.02, "area {area}");
    }

    #[test]
    fn closed_surface_is_watertight() {
        let mesh = sampled(&sphere_grid(), |p| p.norm() - 0.5);
        let mut edge_use: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &mesh.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edge_use.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(edge_use.values().all(|&n| n == 2));
    }

    #[test]
    fn plane_is_exact() {
        let grid = VoxelGrid::from_bounds(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0), 0.04).unwrap();
        let mesh = sampled(&grid, |p| p[2] - 0.5);
        assert!(!mesh.is_empty());
        for v in &mesh.vertices {
            assert!((v[2] - 0.5).abs() <= 1e-6);
        }
    }

    #[test]
    fn unobserved_cells_are_skipped() {
        let grid = sphere_grid();
        let full = sampled(&grid, |p| p.norm() - 0.5);
        let half = marching_cubes(&grid, |idx| {
            let [i, j, k] = grid.coords(idx);
            let p = grid.position(i, j, k);
            (p[0] < 0.0).then(|| p.norm() - 0.5)
        });
        assert!(!half.is_empty() && half.triangles.len() < full.triangles.len());
        assert!(half.vertices.iter().all(|v| v[0] < 0.0));
    }

    #[test]
    fn ply_roundtrip() {
        let mesh = TriangleMesh::new(
            vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 0.5, 0.25)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let mut bytes = Vec::new();
        mesh.write_ply(&mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("ply\nformat ascii 1.0\nelement vertex 3\n"));
        assert!(text.ends_with("3 0 1 2\n"));
        assert_eq!(TriangleMesh::read_ply(bytes.as_slice()).unwrap(), mesh);
    }

    #[test]
    fn rejects_bad_meshes() {
        assert!(TriangleMesh::new(vec![Vector3::zeros()], vec![[0, 0, 1]]).is_err());
        assert!(TriangleMesh::new(vec![Vector3::new(f64::NAN, 0.0, 0.0)], vec![]).is_err());
        assert!(TriangleMesh::read_ply(&b"ply\nformat ascii 1.0\nelement vertex 1\nend_header\n"[..]).is_err());
    }
}
