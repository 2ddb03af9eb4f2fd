//! A kd-tree over the support points of a measure.
//!
//! One structure serves three needs: nearest-neighbor and empty-ball queries
//! (lattice, BAUP tests), radius scans (boundary masses), and the node
//! hierarchy reused by the treecode far-field evaluation in `riesz`.
//! Construction and traversal are deterministic.

use crate::measure::DiscreteMeasure;

const LEAF_SIZE: usize = 24;

#[derive(Clone, Debug)]
pub struct Node {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Range into `KdTree::order`.
    pub start: usize,
    pub end: usize,
    /// Indices of children in the node arena; `None` for leaves.
    pub children: Option<(usize, usize)>,
}

impl Node {
    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Half the box diagonal: the radius of the smallest ball around the
    /// center containing the whole node.
    pub fn radius(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
            * 0.5
    }

    fn min_dist_sq(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..x.len() {
            let v = if x[i] < self.lo[i] {
                self.lo[i] - x[i]
            } else if x[i] > self.hi[i] {
                x[i] - self.hi[i]
            } else {
                0.0
            };
            s += v * v;
        }
        s
    }
}

pub struct KdTree<'a> {
    coords: &'a [f64],
    ambient: usize,
    /// Permutation of point indices; nodes own contiguous ranges.
    pub order: Vec<usize>,
    pub nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn from_measure(m: &'a DiscreteMeasure) -> Self {
        Self::new(m.coords(), m.ambient_dim())
    }

    pub fn new(coords: &'a [f64], ambient: usize) -> Self {
        let n = coords.len() / ambient;
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        build(coords, ambient, &mut order, 0, n, &mut nodes);
        Self { coords, ambient, order, nodes }
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.ambient..(i + 1) * self.ambient]
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Nearest point to `x`. Exact ties resolve to the smallest point index.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let (idx, d2) = self.nearest_filtered(x, |_| true).expect("tree is nonempty");
        (idx, d2)
    }

    /// Nearest point satisfying `keep`; `None` if no point does.
    pub fn nearest_filtered<F: Fn(usize) -> bool>(&self, x: &[f64], keep: F) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        self.nearest_rec(0, x, &keep, &mut best);
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    fn nearest_rec<F: Fn(usize) -> bool>(
        &self,
        node: usize,
        x: &[f64],
        keep: &F,
        best: &mut Option<(usize, f64)>,
    ) {
        let nd = &self.nodes[node];
        if let Some((_, bd2)) = best {
            if nd.min_dist_sq(x) > *bd2 {
                return;
            }
        }
        match nd.children {
            None => {
                for &i in &self.order[nd.start..nd.end] {
                    if !keep(i) {
                        continue;
                    }
                    let d2 = crate::geometry::dist_sq(self.point(i), x);
                    let better = match best {
                        None => true,
                        Some((bi, bd2)) => d2 < *bd2 || (d2 == *bd2 && i < *bi),
                    };
                    if better {
                        *best = Some((i, d2));
                    }
                }
            }
            Some((l, r)) => {
                let dl = self.nodes[l].min_dist_sq(x);
                let dr = self.nodes[r].min_dist_sq(x);
                // visit the closer child first; ties favor the left child so
                // traversal order (and therefore tie-breaking) is fixed
                if dl <= dr {
                    self.nearest_rec(l, x, keep, best);
                    self.nearest_rec(r, x, keep, best);
                } else {
                    self.nearest_rec(r, x, keep, best);
                    self.nearest_rec(l, x, keep, best);
                }
            }
        }
    }

    /// Calls `visit` for every point with `|p - x| < r` (open ball), in
    /// deterministic order.
    pub fn for_each_in_ball<F: FnMut(usize, f64)>(&self, x: &[f64], r: f64, mut visit: F) {
        if self.nodes.is_empty() {
            return;
        }
        let r2 = r * r;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let nd = &self.nodes[node];
            if nd.min_dist_sq(x) >= r2 {
                continue;
            }
            match nd.children {
                None => {
                    for &i in &self.order[nd.start..nd.end] {
                        let d2 = crate::geometry::dist_sq(self.point(i), x);
                        if d2 < r2 {
                            visit(i, d2.sqrt());
                        }
                    }
                }
                Some((l, r_)) => {
                    stack.push(r_);
                    stack.push(l);
                }
            }
        }
    }

    /// True iff the open ball `B(x, r)` contains no point.
    pub fn ball_is_empty(&self, x: &[f64], r: f64) -> bool {
        let (_, d) = self.nearest(x);
        d >= r
    }
}

fn build(
    coords: &[f64],
    ambient: usize,
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut lo = vec![f64::INFINITY; ambient];
    let mut hi = vec![f64::NEG_INFINITY; ambient];
    for &i in &order[start..end] {
        let p = &coords[i * ambient..(i + 1) * ambient];
        for c in 0..ambient {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let me = nodes.len();
    nodes.push(Node { lo: lo.clone(), hi: hi.clone(), start, end, children: None });
    let count = end - start;
    if count > LEAF_SIZE {
        let axis = (0..ambient)
            .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap())
            .unwrap();
        if hi[axis] - lo[axis] > 0.0 {
            let mid = start + count / 2;
            order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
                let ca = coords[a * ambient + axis];
                let cb = coords[b * ambient + axis];
                ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
            });
            let l = build(coords, ambient, order, start, mid, nodes);
            let r = build(coords, ambient, order, mid, end, nodes);
            nodes[me].children = Some((l, r));
        }
    }
    me
}
