//! Exact nearest-neighbour search over a static point set.

#[derive(Debug, Clone)]
enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<KdNode>,
        right: Box<KdNode>,
    },
}

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Vec<f64>>,
    /// Permutation of point indices; leaves own contiguous ranges.
    order: Vec<usize>,
    root: KdNode,
}

/// Euclidean distance, summed in coordinate order.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

impl KdTree {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let root = build(&points, &mut order, 0, points.len());
        Self { points, order, root }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of, and distance to, the nearest point; ties go to the lowest
    /// index. `None` for an empty tree.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(&self.root, q, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn search(&self, node: &KdNode, q: &[f64], best: &mut (usize, f64)) {
        match node {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let d = squared(&self.points[i], q);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

fn build(points: &[Vec<f64>], order: &mut [usize], start: usize, end: usize) -> KdNode {
    if end - start <= LEAF_SIZE || points[0].is_empty() {
        return KdNode::Leaf { start, end };
    }
    let d = points[0].len();
    // split on the widest axis
    let axis = (0..d)
        .map(|k| {
            let (lo, hi) = order[start..end]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(points[i][k]), hi.max(points[i][k]))
                });
            (k, hi - lo)
        })
        .fold((0, -1.0), |best, (k, w)| if w > best.1 { (k, w) } else { best })
        .0;
    let slice = &mut order[start..end];
    slice.sort_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    let mid = start + (end - start) / 2;
    let value = points[order[mid]][axis];
    KdNode::Split {
        axis,
        value,
        left: Box::new(build(points, order, start, mid)),
        right: Box::new(build(points, order, mid, end)),
    }
}
