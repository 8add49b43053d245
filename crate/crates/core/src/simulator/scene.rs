use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analytic signed-distance primitives, meters. Negative inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Primitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    /// Points `p` with `normal · p = offset`; `normal` is normalized on use.
    Plane {
        normal: [f64; 3],
        offset: f64,
    },
}

impl Primitive {
    pub fn sdf(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Primitive::Sphere { center, radius } => (p - Vector3::from(*center)).norm() - radius,
            Primitive::Box { center, half_extents } => {
                let q = (p - Vector3::from(*center)).abs() - Vector3::from(*half_extents);
                let outside = q.map(|v| v.max(0.0)).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
            Primitive::Plane { normal, offset } => {
                let n = Vector3::from(*normal);
                (n.dot(p) - offset) / n.norm()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        let ok = match self {
            Primitive::Sphere { center, radius } => finite(center) && *radius > 0.0,
            Primitive::Box { center, half_extents } => {
                finite(center) && half_extents.iter().all(|h| *h > 0.0 && h.is_finite())
            }
            Primitive::Plane { normal, offset } => {
                finite(normal) && offset.is_finite() && Vector3::from(*normal).norm() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid primitive {self:?}")))
        }
    }

    fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        match self {
            Primitive::Sphere { center, radius } => {
                let c = Vector3::from(*center);
                Some((c.add_scalar(-radius), c.add_scalar(*radius)))
            }
            Primitive::Box { center, half_extents } => {
                let (c, h) = (Vector3::from(*center), Vector3::from(*half_extents));
                Some((c - h, c + h))
            }
            Primitive::Plane { .. } => None,
        }
    }
}

/// Union of primitives.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
}

impl Scene {
    /// Validating constructor: at least one well-formed primitive.
    pub fn new(primitives: Vec<Primitive>) -> Result<Self> {
        if primitives.is_empty() {
            return Err(Error::InvalidInput("scene has no primitives".into()));
        }
        for p in &primitives {
            p.validate()?;
        }
        Ok(Self { primitives })
    }

    /// A scene with nothing in it; renders as all-invalid depth.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Parses scene JSON. Syntax errors report the 1-based line.
    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene =
            serde_json::from_str(text).map_err(|e| Error::Json { line: e.line(), message: e.to_string() })?;
        Self::new(scene.primitives)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    /// Signed distance to the union; `+inf` for an empty scene.
    #[inline]
    pub fn sdf(&self, p: &Vector3<f64>) -> f64 {
        self.primitives.iter().map(|prim| prim.sdf(p)).fold(f64::INFINITY, f64::min)
    }

    /// Axis-aligned bounds of the bounded primitives.
    pub fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        self.primitives.iter().filter_map(Primitive::bounds).reduce(|(lo, hi), (l, h)| (lo.inf(&l), hi.sup(&h)))
    }

    /// Desk-scale room: a 6×6 m floor slab and four furniture boxes, 3 m tall bound.
    pub fn default_room() -> Self {
        let b = |center: [f64; 3], half_extents: [f64; 3]| Primitive::Box { center, half_extents };
        Self {
            primitives: vec![
                b([0.0, 0.0, -0.05], [3.0, 3.0, 0.05]),
                b([0.6, 0.4, 0.375], [0.5, 0.35, 0.375]),
                b([-0.8, -0.5, 0.6], [0.3, 0.4, 0.6]),
                b([-0.5, 0.9, 0.2], [0.2, 0.2, 0.2]),
                b([0.7, -0.9, 0.9], [0.15, 0.15, 0.9]),
            ],
        }
    }

    /// Reconstruction bounds of [`Scene::default_room`].
    pub fn default_room_bounds() -> (Vector3<f64>, Vector3<f64>) {
        (Vector3::new(-3.0, -3.0, -0.1), Vector3::new(3.0, 3.0, 2.9))
    }
}
