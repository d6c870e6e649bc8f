//! Static kd-tree for k-nearest-neighbour queries in low dimension.

const LEAF: usize = 12;

enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

pub(crate) struct KdTree<'a> {
    dim: usize,
    points: &'a [f64],
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    /// `points` is row-major with `dim` coordinates per point.
    pub fn new(points: &'a [f64], dim: usize) -> Self {
        let n = points.len() / dim;
        let mut tree = KdTree {
            dim,
            points,
            order: (0..n as u32).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    fn coord(&self, i: u32, d: usize) -> f64 {
        self.points[i as usize * self.dim + d]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut best = (0, -1.0);
        for d in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.coord(i, d);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best.1 {
                best = (d, hi - lo);
            }
        }
        if best.1 <= 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = best.0;
        let mid = start + (end - start) / 2;
        let (points, d) = (self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a as usize * d + dim]
                .total_cmp(&points[b as usize * d + dim])
                .then(a.cmp(&b))
        });
        let value = self.coord(self.order[mid], dim);
        self.nodes.push(Node::Split { dim, value, left: 0, right: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// The `k` nearest points to point `target` (excluding itself), nearest first.
    pub fn nearest(&self, target: u32, k: usize, out: &mut Vec<(f64, u32)>) {
        out.clear();
        if self.nodes.is_empty() || k == 0 {
            return;
        }
        let q: Vec<f64> = (0..self.dim).map(|d| self.coord(target, d)).collect();
        self.search(0, &q, target, k, out);
    }

    fn search(&self, node: usize, q: &[f64], target: u32, k: usize, out: &mut Vec<(f64, u32)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if i == target {
                        continue;
                    }
                    let base = i as usize * self.dim;
                    let mut d2 = 0.0;
                    for (d, &qv) in q.iter().enumerate() {
                        let t = self.points[base + d] - qv;
                        d2 += t * t;
                    }
                    if out.len() == k {
                        let worst = out[k - 1];
                        if (d2, i) >= worst {
                            continue;
                        }
                        out.pop();
                    }
                    let pos = out.partition_point(|&e| e < (d2, i));
                    out.insert(pos, (d2, i));
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, target, k, out);
                if out.len() < k || diff * diff <= out[k - 1].0 {
                    self.search(far, q, target, k, out);
                }
            }
        }
    }
}
