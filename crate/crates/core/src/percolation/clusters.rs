use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{Point, MAX_DIM};
use crate::math::{floor, powf};
use crate::unionfind::UnionFind;

/// Connected components of the union of open balls of radius `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabeling {
    /// Component id per point, numbered by first appearance.
    pub labels: Vec<usize>,
    /// Point count per component id.
    pub sizes: Vec<usize>,
    pub radius: f64,
}

impl ClusterLabeling {
    pub fn component_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn same(&self, a: usize, b: usize) -> bool {
        self.labels[a] == self.labels[b]
    }
}

/// Labels the components of the graph joining points at distance `< 2 radius`.
///
/// Points are bucketed into a dense grid of cells of side at least `2 radius`
/// (counting sort), so only the 3^d neighbouring cells are scanned per point.
/// Sparse inputs get coarser cells to keep the grid at `O(n)` size.
pub fn label_clusters(points: &[Point], radius: f64) -> ClusterLabeling {
    assert!(radius > 0.0, "radius must be positive");
    let n = points.len();
    let mut uf = UnionFind::new(n);
    if n > 1 {
        link_close_pairs(points, 2.0 * radius, &mut uf);
    }
    let labels = uf.labels();
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    ClusterLabeling { labels, sizes, radius }
}

fn link_close_pairs(points: &[Point], reach: f64, uf: &mut UnionFind) {
    let n = points.len();
    let d = points[0].dim();
    let mut lo = [f64::INFINITY; MAX_DIM];
    let mut hi = [f64::NEG_INFINITY; MAX_DIM];
    for p in points {
        for i in 0..d {
            lo[i] = lo[i].min(p.coords()[i]);
            hi[i] = hi[i].max(p.coords()[i]);
        }
    }
    let budget = (4 * n + 64) as f64;
    let mut side = reach;
    let cells_for = |side: f64| -> f64 {
        (0..d).map(|i| floor((hi[i] - lo[i]) / side) + 1.0).product()
    };
    let mut total = cells_for(side);
    if total > budget {
        side *= powf(total / budget, 1.0 / d as f64) * 1.0001;
        total = cells_for(side);
        while total > budget {
            side *= 1.5;
            total = cells_for(side);
        }
    }
    let mut dims = [1usize; MAX_DIM];
    for i in 0..d {
        dims[i] = floor((hi[i] - lo[i]) / side) as usize + 1;
    }
    let cell_of = |p: &Point| -> [usize; MAX_DIM] {
        let mut c = [0usize; MAX_DIM];
        for i in 0..d {
            c[i] = (floor((p.coords()[i] - lo[i]) / side) as usize).min(dims[i] - 1);
        }
        c
    };
    let flat = |c: &[usize; MAX_DIM]| -> usize {
        let mut f = 0;
        for i in (0..d).rev() {
            f = f * dims[i] + c[i];
        }
        f
    };
    let total = total as usize;
    let mut start = vec![0u32; total + 1];
    let mut cell_idx = Vec::with_capacity(n);
    for p in points {
        let f = flat(&cell_of(p));
        cell_idx.push(f as u32);
        start[f + 1] += 1;
    }
    for f in 0..total {
        start[f + 1] += start[f];
    }
    let mut fill = start.clone();
    let mut order = vec![0u32; n];
    for (i, &f) in cell_idx.iter().enumerate() {
        order[fill[f as usize] as usize] = i as u32;
        fill[f as usize] += 1;
    }

    let reach_sq = reach * reach;
    let offsets = 3usize.pow(d as u32);
    for i in 0..n {
        let p = &points[i];
        let c = cell_of(p);
        for code in 0..offsets {
            let mut nb = c;
            let mut rem = code;
            let mut valid = true;
            for (a, &dim_len) in nb.iter_mut().zip(dims.iter()).take(d) {
                let off = (rem % 3) as isize - 1;
                rem /= 3;
                let v = *a as isize + off;
                if v < 0 || v >= dim_len as isize {
                    valid = false;
                    break;
                }
                *a = v as usize;
            }
            if !valid {
                continue;
            }
            let f = flat(&nb);
            for &j in &order[start[f] as usize..start[f + 1] as usize] {
                let j = j as usize;
                if j > i && p.dist_sq(&points[j]) < reach_sq {
                    uf.union(i, j);
                }
            }
        }
    }
}
