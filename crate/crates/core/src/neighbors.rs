//! Exact brute-force nearest neighbours under Euclidean distance.

use alloc::vec::Vec;

use crate::math;
use crate::Matrix;

/// Exact k-NN over a borrowed point set. Ties are broken by ascending point index.
#[derive(Debug, Clone, Copy)]
pub struct NeighborIndex<'a> {
    points: &'a Matrix,
}

impl<'a> NeighborIndex<'a> {
    pub fn new(points: &'a Matrix) -> Self {
        NeighborIndex { points }
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// The `k` nearest points to `x` as `(index, squared distance)`, sorted by
    /// `(distance, index)`. `exclude` removes one index from consideration.
    pub fn query(&self, x: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = (0..self.points.rows())
            .filter(|&i| Some(i) != exclude)
            .map(|i| (i, math::squared_distance(x, self.points.row(i))))
            .collect();
        let k = k.min(all.len());
        let cmp = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if k < all.len() && k > 0 {
            all.select_nth_unstable_by(k - 1, cmp);
        }
        all.truncate(k);
        all.sort_by(cmp);
        all
    }

    /// Neighbours of stored point `i`, excluding itself.
    pub fn query_point(&self, i: usize, k: usize) -> Vec<(usize, f64)> {
        self.query(self.points.row(i), k, Some(i))
    }
}
