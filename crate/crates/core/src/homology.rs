//! Betti numbers and Euler characteristics over GF(2).
//!
//! Boundary matrices come straight from the facet lists; ranks are
//! computed by bitset Gaussian elimination. Ranks are all that is needed:
//! `b_d = dim ker d_d - rank d_{d+1}` with the zero maps at both ends.

use crate::complex::PolyComplex;
use crate::point::Point3;
use std::collections::HashMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A dense GF(2) matrix stored as 64-bit row bitsets.
#[derive(Clone, Debug)]
pub struct Gf2Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Vec<u64>>,
}

impl Gf2Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        let words = cols.div_ceil(64);
        Gf2Matrix {
            rows,
            cols,
            data: vec![vec![0u64; words]; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        assert!(r < self.rows && c < self.cols);
        let (w, b) = (c / 64, c % 64);
        if value {
            self.data[r][w] |= 1 << b;
        } else {
            self.data[r][w] &= !(1 << b);
        }
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        let (w, b) = (c / 64, c % 64);
        self.data[r][w] >> b & 1 == 1
    }

    pub fn transpose(&self) -> Gf2Matrix {
        let mut t = Gf2Matrix::zero(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) {
                    t.set(c, r, true);
                }
            }
        }
        t
    }

    /// Rank by row elimination.
    pub fn rank(&self) -> usize {
        let mut data = self.data.clone();
        let mut rank = 0;
        for col in 0..self.cols {
            let (w, b) = (col / 64, col % 64);
            let pivot = (rank..self.rows).find(|r| data[*r][w] >> b & 1 == 1);
            let pivot = match pivot {
                None => continue,
                Some(p) => p,
            };
            data.swap(rank, pivot);
            let (head, tail) = data.split_at_mut(rank + 1);
            let pivot_row = &head[rank];
            for row in tail.iter_mut() {
                if row[w] >> b & 1 == 1 {
                    for (dst, src) in row.iter_mut().zip(pivot_row.iter()) {
                        *dst ^= *src;
                    }
                }
            }
            rank += 1;
            if rank == self.rows {
                break;
            }
        }
        rank
    }
}

/// The boundary matrix of dimension `d`: rows are the `(d-1)`-cells, the
/// columns the `d`-cells, with a one wherever the facet relation holds.
/// Cells index rows and columns in key order.
pub fn boundary_matrix(complex: &PolyComplex, d: usize) -> Gf2Matrix {
    assert!((1..=3).contains(&d));
    let row_index: HashMap<Point3, usize> = complex
        .cells(d - 1)
        .enumerate()
        .map(|(i, (k, _))| (k, i))
        .collect();
    let counts = complex.counts();
    let mut m = Gf2Matrix::zero(counts[d - 1], counts[d]);
    for (col, (_, cell)) in complex.cells(d).enumerate() {
        for f in &cell.facets {
            m.set(row_index[f], col, true);
        }
    }
    m
}

/// Betti numbers `(b0, b1, b2)` over GF(2).
pub fn betti(complex: &PolyComplex) -> (usize, usize, usize) {
    if complex.is_empty() {
        return (0, 0, 0);
    }
    let counts = complex.counts();
    let ranks: Vec<usize> = {
        let dims: Vec<usize> = (1..=3).collect();
        #[cfg(feature = "parallel")]
        {
            dims.par_iter()
                .map(|d| boundary_matrix(complex, *d).rank())
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            dims.iter()
                .map(|d| boundary_matrix(complex, *d).rank())
                .collect()
        }
    };
    let (r1, r2, r3) = (ranks[0], ranks[1], ranks[2]);
    let b0 = counts[0] - r1;
    let b1 = counts[1] - r1 - r2;
    let b2 = counts[2] - r2 - r3;
    (b0, b1, b2)
}

/// Alternating sum of cell counts.
pub fn euler(complex: &PolyComplex) -> i64 {
    complex.euler()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{boundary_subcomplex, build_p_complex, build_q_complex};
    use crate::criticality::{build_criticality_table, detect_critical};
    use crate::ecm_grid::build_q_grid;
    use crate::image_io::BinaryImage;
    use crate::repair::repair_grid;

    fn q_complex(points: &[[i32; 3]]) -> PolyComplex {
        let img = BinaryImage::from_points(points.iter().map(|c| Point3(*c)));
        build_q_complex(&build_q_grid(&img)).unwrap()
    }

    #[test]
    fn single_voxel_boundary_matrices() {
        let q = q_complex(&[[0, 0, 0]]);
        let d3 = boundary_matrix(&q, 3);
        assert_eq!((d3.rows(), d3.cols()), (6, 1));
        assert_eq!((0..6).filter(|r| d3.get(*r, 0)).count(), 6);

        let d1 = boundary_matrix(&q, 1);
        assert_eq!((d1.rows(), d1.cols()), (8, 12));
        for c in 0..12 {
            assert_eq!((0..8).filter(|r| d1.get(*r, c)).count(), 2);
        }
    }

    #[test]
    fn chain_complex_identity() {
        let q = q_complex(&[[0, 0, 0], [1, 1, 0], [1, 1, 1]]);
        for d in 2..=3 {
            let a = boundary_matrix(&q, d - 1);
            let b = boundary_matrix(&q, d);
            for col in 0..b.cols() {
                for row in 0..a.rows() {
                    let mut sum = false;
                    for mid in 0..a.cols() {
                        sum ^= a.get(row, mid) && b.get(mid, col);
                    }
                    assert!(!sum, "nonzero product entry in dims {d}");
                }
            }
        }
    }

    #[test]
    fn rank_equals_transpose_rank() {
        let q = q_complex(&[[0, 0, 0], [1, 0, 0], [1, 1, 0], [2, 2, 2]]);
        for d in 1..=3 {
            let m = boundary_matrix(&q, d);
            assert_eq!(m.rank(), m.transpose().rank());
        }
    }

    #[test]
    fn betti_of_contractible() {
        assert_eq!(betti(&q_complex(&[[0, 0, 0]])), (1, 0, 0));
        let block: Vec<[i32; 3]> =
            (0..8i32).map(|b| [b & 1, (b >> 1) & 1, (b >> 2) & 1]).collect();
        assert_eq!(betti(&q_complex(&block)), (1, 0, 0));
    }

    #[test]
    fn betti_of_hollow_shell() {
        // A 3x3x3 block without its center encloses one cavity.
        let mut pts = Vec::new();
        for x in 0..3 {
            for y in 0..3 {
                for z in 0..3 {
                    if (x, y, z) != (1, 1, 1) {
                        pts.push([x, y, z]);
                    }
                }
            }
        }
        assert_eq!(betti(&q_complex(&pts)), (1, 0, 1));
    }

    #[test]
    fn betti_of_square_ring() {
        // A 3x3 layer without its center: one independent loop.
        let mut pts = Vec::new();
        for x in 0..3 {
            for y in 0..3 {
                if (x, y) != (1, 1) {
                    pts.push([x, y, 0]);
                }
            }
        }
        assert_eq!(betti(&q_complex(&pts)), (1, 1, 0));
    }

    #[test]
    fn euler_examples() {
        let q = q_complex(&[[0, 0, 0]]);
        assert_eq!(euler(&q), 1);
        assert_eq!(euler(&boundary_subcomplex(&q)), 2);
        assert_eq!(betti(&PolyComplex::new()), (0, 0, 0));
        assert_eq!(euler(&PolyComplex::new()), 0);
    }

    #[test]
    fn euler_poincare() {
        for pts in [
            vec![[0, 0, 0], [1, 1, 1]],
            vec![[0, 0, 0], [1, 1, 0], [0, 1, 1]],
            vec![[0, 0, 0], [2, 0, 0]],
        ] {
            let q = q_complex(&pts);
            let (b0, b1, b2) = betti(&q);
            assert_eq!(euler(&q), b0 as i64 - b1 as i64 + b2 as i64);
        }
    }

    #[test]
    fn repair_preserves_betti() {
        for pts in [
            vec![[0, 0, 0], [1, 1, 1]],
            vec![[0, 0, 0], [1, 1, 0]],
            vec![[0, 0, 0], [1, 1, 0], [1, 1, 1], [0, 2, 1]],
        ] {
            let img = BinaryImage::from_points(pts.iter().map(|c| Point3(*c)));
            let grid = build_q_grid(&img);
            let table = build_criticality_table();
            let critical = detect_critical(&grid, &table);
            let outcome = repair_grid(&grid, &critical);
            let q = build_q_complex(&grid).unwrap();
            let p = build_p_complex(&grid, &outcome).unwrap();
            assert_eq!(betti(&q), betti(&p), "for {pts:?}");
            assert_eq!(euler(&q), euler(&p));
        }
    }
}
