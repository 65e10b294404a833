//! A small kd-tree for k-nearest-neighbor queries in the low dimensions
//! (d <= 6) the entropy estimator works in.

/// kd-tree over points stored as flat rows. Nodes live implicitly in
/// `order`: each subrange's median is its subtree root.
pub struct KdTree<'a> {
    points: &'a [Vec<f64>],
    order: Vec<usize>,
    dim: usize,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vec<f64>]) -> Self {
        let dim = points.first().map(|p| p.len()).unwrap_or(0);
        let mut order: Vec<usize> = (0..points.len()).collect();
        let len = order.len();
        build_rec(points, &mut order, 0, len, 0, dim);
        KdTree { points, order, dim }
    }

    /// Squared distance to the `k`-th nearest neighbor of `points[query]`,
    /// excluding the query point itself.
    pub fn kth_neighbor_dist2(&self, query: usize, k: usize) -> f64 {
        let mut heap: Vec<f64> = Vec::with_capacity(k + 1);
        self.search(0, self.order.len(), 0, query, k, &mut heap);
        heap.iter().copied().fold(0.0, f64::max)
    }

    fn search(&self, lo: usize, hi: usize, depth: usize, query: usize, k: usize, heap: &mut Vec<f64>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let q = &self.points[query];
        if idx != query {
            push_neighbor(heap, k, dist2(q, &self.points[idx]));
        }
        let axis = depth % self.dim;
        let delta = q[axis] - self.points[idx][axis];
        let (near, far) = if delta <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, depth + 1, query, k, heap);
        let worst = current_worst(heap, k);
        if delta * delta < worst {
            self.search(far.0, far.1, depth + 1, query, k, heap);
        }
    }
}

fn build_rec(points: &[Vec<f64>], order: &mut [usize], lo: usize, hi: usize, depth: usize, dim: usize) {
    if hi - lo <= 1 {
        return;
    }
    let axis = depth % dim;
    let mid = (lo + hi) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
        points[a][axis]
            .partial_cmp(&points[b][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    build_rec(points, order, lo, mid, depth + 1, dim);
    build_rec(points, order, mid + 1, hi, depth + 1, dim);
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn push_neighbor(heap: &mut Vec<f64>, k: usize, d2: f64) {
    if heap.len() < k {
        heap.push(d2);
    } else {
        let (wi, wd) = heap
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        if d2 < wd {
            heap[wi] = d2;
        }
    }
}

fn current_worst(heap: &[f64], k: usize) -> f64 {
    if heap.len() < k {
        f64::INFINITY
    } else {
        heap.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_brute_force() {
        let mut pts = Vec::new();
        let mut s = 12345u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64) / (1u64 << 31) as f64
        };
        for _ in 0..200 {
            pts.push(vec![next(), next()]);
        }
        let tree = KdTree::build(&pts);
        for q in [0usize, 7, 50, 199] {
            for k in [1usize, 4, 8] {
                let mut d: Vec<f64> = (0..pts.len())
                    .filter(|&i| i != q)
                    .map(|i| dist2(&pts[q], &pts[i]))
                    .collect();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let want = d[k - 1];
                let got = tree.kth_neighbor_dist2(q, k);
                assert!((got - want).abs() < 1e-15, "q={q} k={k}: {got} vs {want}");
            }
        }
    }
}
