//! Single-linkage clustering at a fixed radius with a hashed cell grid.

use std::collections::HashMap;

use crate::linalg::dist2;

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Above this dimension the 3^n neighbour-cell sweep costs more than a
/// pairwise scan.
const MAX_GRID_DIM: usize = 5;

/// Labels `0..c` of the connected components of the graph joining points at
/// distance `≤ radius`; labels follow first appearance.
pub fn single_linkage(points: &[Vec<f64>], radius: f64) -> Vec<usize> {
    let n = points.len();
    let mut uf = UnionFind::new(n);
    let r2 = radius * radius;
    let dim = points.first().map_or(0, Vec::len);
    if dim <= MAX_GRID_DIM && radius > 0.0 {
        let cell = |p: &[f64]| -> Vec<i64> { p.iter().map(|v| (v / radius).floor() as i64).collect() };
        let mut grid: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            grid.entry(cell(p)).or_default().push(i);
        }
        let offsets = neighbour_offsets(dim);
        for (i, p) in points.iter().enumerate() {
            let c = cell(p);
            for off in &offsets {
                let key: Vec<i64> = c.iter().zip(off).map(|(a, b)| a + b).collect();
                if let Some(bucket) = grid.get(&key) {
                    for &j in bucket {
                        if j > i && dist2(p, &points[j]) <= r2 {
                            uf.union(i, j);
                        }
                    }
                }
            }
        }
    } else {
        for i in 0..n {
            for j in i + 1..n {
                if dist2(&points[i], &points[j]) <= r2 {
                    uf.union(i, j);
                }
            }
        }
    }
    let mut labels = vec![usize::MAX; n];
    let mut map = HashMap::new();
    for i in 0..n {
        let root = uf.find(i);
        let next = map.len();
        labels[i] = *map.entry(root).or_insert(next);
    }
    labels
}

pub fn count_components(points: &[Vec<f64>], radius: f64) -> usize {
    single_linkage(points, radius).into_iter().max().map_or(0, |m| m + 1)
}

/// Component count of the subset `idx` of `points`, by a sweep along the
/// coordinate of widest spread.
pub fn count_components_of(points: &[Vec<f64>], idx: &[usize], radius: f64) -> usize {
    if idx.is_empty() {
        return 0;
    }
    let dim = points[idx[0]].len();
    let axis = (0..dim)
        .map(|c| {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(points[i][c]), hi.max(points[i][c]))
            });
            (c, hi - lo)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(c, _)| c);
    let mut sorted = idx.to_vec();
    sorted.sort_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let mut uf = UnionFind::new(sorted.len());
    let r2 = radius * radius;
    let mut count = sorted.len();
    for a in 0..sorted.len() {
        let pa = &points[sorted[a]];
        for b in a + 1..sorted.len() {
            let pb = &points[sorted[b]];
            if pb[axis] - pa[axis] > radius {
                break;
            }
            if uf.find(a) != uf.find(b) && dist2(pa, pb) <= r2 {
                uf.union(a, b);
                count -= 1;
            }
        }
    }
    count
}

/// Component means, in label order.
pub fn cluster_centers(points: &[Vec<f64>], labels: &[usize]) -> Vec<Vec<f64>> {
    let c = labels.iter().copied().max().map_or(0, |m| m + 1);
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; c];
    let mut counts = vec![0usize; c];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, k)| s.into_iter().map(|v| v / k as f64).collect())
        .collect()
}

fn neighbour_offsets(dim: usize) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|o| {
                (-1..=1).map(move |d| {
                    let mut o2 = o.clone();
                    o2.push(d);
                    o2
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_blobs() {
        let mut pts = Vec::new();
        for i in 0..20 {
            pts.push(vec![i as f64 * 0.01, 0.0]);
            pts.push(vec![5.0 + i as f64 * 0.01, 1.0]);
        }
        assert_eq!(count_components(&pts, 0.02), 2);
        assert_eq!(count_components(&pts, 10.0), 1);
        assert_eq!(count_components(&pts, 0.001), 40);
    }

    #[test]
    fn grid_and_pairwise_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| (0..3).map(|_| rng.gen::<f64>()).collect()).collect();
        let a = count_components(&pts, 0.08);
        // embed in 7 dimensions to force the pairwise path
        let wide: Vec<Vec<f64>> = pts.iter().map(|p| [p.clone(), vec![0.0; 4]].concat()).collect();
        assert_eq!(a, count_components(&wide, 0.08));
        let idx: Vec<usize> = (0..300).collect();
        assert_eq!(a, count_components_of(&pts, &idx, 0.08));
        let odd: Vec<usize> = (0..300).filter(|i| i % 2 == 1).collect();
        let sub: Vec<Vec<f64>> = odd.iter().map(|&i| pts[i].clone()).collect();
        assert_eq!(count_components(&sub, 0.08), count_components_of(&pts, &odd, 0.08));
    }
}
