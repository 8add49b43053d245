use nalgebra::Vector3;

const LEAF_SIZE: usize = 16;

/// Static 3-d tree over a point set for nearest-neighbor distance queries.
pub struct KdTree {
    points: Vec<Vector3<f64>>,
    nodes: Vec<Node>,
}

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: usize, right: usize },
}

impl KdTree {
    pub fn new(points: &[Vector3<f64>]) -> Self {
        let mut tree = Self { points: points.to_vec(), nodes: Vec::new() };
        if !tree.points.is_empty() {
            let n = tree.points.len();
            tree.build(0, n, 0);
        }
        tree
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        self.nodes.push(Node::Leaf { start, end });
        let axis = depth % 3;
        let mid = start + (end - start) / 2;
        self.points[start..end].select_nth_unstable_by(mid - start, |a, b| a[axis].total_cmp(&b[axis]));
        let value = self.points[mid][axis];
        let left = self.build(start, mid, depth + 1);
        let right = self.build(mid, end, depth + 1);
        self.nodes[id] = Node::Split { axis, value, left, right };
        id
    }

    /// Distance to the nearest point, or `max_distance` if none is closer.
    pub fn nearest_distance(&self, q: &Vector3<f64>, max_distance: f64) -> f64 {
        if self.points.is_empty() {
            return max_distance;
        }
        let mut best_sq = max_distance * max_distance;
        self.search(0, q, &mut best_sq);
        best_sq.sqrt().min(max_distance)
    }

    fn search(&self, node: usize, q: &Vector3<f64>, best_sq: &mut f64) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for p in &self.points[start..end] {
                    let d = (p - q).norm_squared();
                    if d < *best_sq {
                        *best_sq = d;
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let delta = q[axis] - value;
                let (near, far) = if delta < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best_sq);
                if delta * delta < *best_sq {
                    self.search(far, q, best_sq);
                }
            }
        }
    }
}
