#![allow(dead_code)]

//! Independent oracles for the integration and acceptance suites.
//!
//! Everything here is built directly from voxel geometry with plain
//! coordinate arithmetic: no grids, no structuring elements, no incidence
//! machinery from the library. Keys use the same quarter-unit scale (cell
//! barycenter times four) so results are directly comparable.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use wellcomposed::point::Point3;
use wellcomposed::BinaryImage;

pub use rand_core::RngCore;

/// Explicit closure-of-cubes complex: every cell of every foreground
/// voxel, deduplicated, with facet relations by direct arithmetic.
pub struct OracleComplex {
    /// Per dimension: key -> facet keys.
    pub cells: [BTreeMap<Point3, Vec<Point3>>; 4],
}

impl OracleComplex {
    pub fn build(image: &BinaryImage) -> OracleComplex {
        let mut cells: [BTreeMap<Point3, Vec<Point3>>; 4] = Default::default();
        for &v in image.foreground() {
            let c = v * 4;
            // The cube.
            let mut cube_facets = Vec::new();
            for axis in 0..3 {
                for s in [-2, 2] {
                    cube_facets.push(c + Point3::unit(axis) * s);
                }
            }
            cube_facets.sort_unstable();
            cells[3].insert(c, cube_facets);
            // Squares, one per cube face.
            for axis in 0..3 {
                for s in [-2, 2] {
                    let sq = c + Point3::unit(axis) * s;
                    let (a, b) = (((axis + 1) % 3), ((axis + 2) % 3));
                    let mut facets = Vec::new();
                    for (ax, t) in [(a, 2), (a, -2), (b, 2), (b, -2)] {
                        facets.push(sq + Point3::unit(ax) * t);
                    }
                    facets.sort_unstable();
                    cells[2].insert(sq, facets);
                }
            }
            // Edges: midpoints of the 12 cube edges.
            for axis in 0..3 {
                let (a, b) = (((axis + 1) % 3), ((axis + 2) % 3));
                for sa in [-2, 2] {
                    for sb in [-2, 2] {
                        let e = c + Point3::unit(a) * sa + Point3::unit(b) * sb;
                        let mut facets = vec![
                            e + Point3::unit(axis) * 2,
                            e - Point3::unit(axis) * 2,
                        ];
                        facets.sort_unstable();
                        cells[1].insert(e, facets);
                    }
                }
            }
            // Vertices: the 8 corners.
            for d in wellcomposed::point::corner_directions() {
                cells[0].insert(c + d * 2, Vec::new());
            }
        }
        OracleComplex { cells }
    }

    pub fn counts(&self) -> [usize; 4] {
        [
            self.cells[0].len(),
            self.cells[1].len(),
            self.cells[2].len(),
            self.cells[3].len(),
        ]
    }

    pub fn euler(&self) -> i64 {
        let c = self.counts();
        c[0] as i64 - c[1] as i64 + c[2] as i64 - c[3] as i64
    }

    /// Keys of cells of one dimension.
    pub fn keys(&self, dim: usize) -> impl Iterator<Item = Point3> + '_ {
        self.cells[dim].keys().copied()
    }

    /// Free squares: those with exactly one cube coface.
    pub fn boundary_squares(&self) -> BTreeSet<Point3> {
        let mut coface_count: HashMap<Point3, usize> = HashMap::new();
        for facets in self.cells[3].values() {
            for f in facets {
                *coface_count.entry(*f).or_insert(0) += 1;
            }
        }
        self.cells[2]
            .keys()
            .filter(|k| coface_count.get(k).copied().unwrap_or(0) == 1)
            .copied()
            .collect()
    }

    /// Cells of the star of a vertex: every cell whose closure contains it.
    pub fn star_of_vertex(&self, v: Point3) -> Vec<(Point3, usize)> {
        let mut out = Vec::new();
        for dim in 1..4 {
            for key in self.cells[dim].keys() {
                if self.closure_contains_vertex(*key, dim, v) {
                    out.push((*key, dim));
                }
            }
        }
        out
    }

    fn closure_contains_vertex(&self, key: Point3, dim: usize, v: Point3) -> bool {
        if dim == 0 {
            return key == v;
        }
        self.cells[dim][&key]
            .iter()
            .any(|f| self.closure_contains_vertex(*f, dim - 1, v))
    }

    /// All critical vertex keys, sorted: vertices with an incident
    /// boundary edge whose boundary-square coface count is not two, or
    /// with a disconnected link graph over their boundary edges.
    pub fn critical_vertices(&self) -> Vec<Point3> {
        let boundary_squares = self.boundary_squares();
        let mut edge_bcount: HashMap<Point3, usize> = HashMap::new();
        let mut vertex_arcs: HashMap<Point3, Vec<(Point3, Point3)>> = HashMap::new();
        for sq in &boundary_squares {
            let edges = &self.cells[2][sq];
            let mut per_vertex: HashMap<Point3, Vec<Point3>> = HashMap::new();
            for e in edges {
                *edge_bcount.entry(*e).or_insert(0) += 1;
                for v in &self.cells[1][e] {
                    per_vertex.entry(*v).or_default().push(*e);
                }
            }
            // Each corner of a square meets exactly two of its edges.
            for (v, es) in per_vertex {
                vertex_arcs.entry(v).or_default().push((es[0], es[1]));
            }
        }
        let mut vertex_edges: HashMap<Point3, Vec<Point3>> = HashMap::new();
        for (e, ends) in &self.cells[1] {
            if !edge_bcount.contains_key(e) {
                continue;
            }
            for v in ends {
                vertex_edges.entry(*v).or_default().push(*e);
            }
        }

        let mut out = Vec::new();
        for v in self.keys(0) {
            let edges = match vertex_edges.get(&v) {
                Some(e) => e,
                None => continue,
            };
            if edges.iter().any(|e| edge_bcount[e] != 2) {
                out.push(v);
                continue;
            }
            let index: HashMap<Point3, usize> =
                edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
            let mut parent: Vec<usize> = (0..edges.len()).collect();
            fn find(parent: &mut Vec<usize>, i: usize) -> usize {
                if parent[i] != i {
                    let r = find(parent, parent[i]);
                    parent[i] = r;
                }
                parent[i]
            }
            if let Some(arcs) = vertex_arcs.get(&v) {
                for (ea, eb) in arcs {
                    let (a, b) = (find(&mut parent, index[ea]), find(&mut parent, index[eb]));
                    parent[a] = b;
                }
            }
            let root = find(&mut parent, 0);
            if (1..edges.len()).any(|i| find(&mut parent, i) != root) {
                out.push(v);
            }
        }
        out
    }

    pub fn vertex_is_critical(&self, v: Point3) -> bool {
        self.critical_vertices().contains(&v)
    }
}

/// Naive GF(2) Betti numbers on the oracle complex, with dense boolean
/// elimination, sharing no code with the library's bitset path.
pub fn oracle_betti(oracle: &OracleComplex) -> (usize, usize, usize) {
    let counts = oracle.counts();
    if counts.iter().all(|c| *c == 0) {
        return (0, 0, 0);
    }
    let rank = |d: usize| -> usize {
        let rows: Vec<Point3> = oracle.keys(d - 1).collect();
        let row_index: HashMap<Point3, usize> =
            rows.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut matrix: Vec<Vec<bool>> = oracle.cells[d]
            .values()
            .map(|facets| {
                let mut col = vec![false; rows.len()];
                for f in facets {
                    col[row_index[f]] = true;
                }
                col
            })
            .collect();
        // Column echelon over GF(2).
        let mut rank = 0;
        let ncols = matrix.len();
        for r in 0..rows.len() {
            let Some(pivot) = (rank..ncols).find(|c| matrix[*c][r]) else {
                continue;
            };
            matrix.swap(rank, pivot);
            for c in 0..ncols {
                if c != rank && matrix[c][r] {
                    let (a, b) = if c < rank {
                        let (lo, hi) = matrix.split_at_mut(rank);
                        (&mut lo[c], &hi[0])
                    } else {
                        let (lo, hi) = matrix.split_at_mut(c);
                        (&mut hi[0], &lo[rank])
                    };
                    for (x, y) in a.iter_mut().zip(b.iter()) {
                        *x ^= *y;
                    }
                }
            }
            rank += 1;
            if rank == ncols {
                break;
            }
        }
        rank
    };
    let (r1, r2, r3) = (rank(1), rank(2), rank(3));
    (
        counts[0] - r1,
        counts[1] - r1 - r2,
        counts[2] - r2 - r3,
    )
}

/// Number of 26-connected foreground components, by union-find on voxels.
pub fn count_components_26(image: &BinaryImage) -> usize {
    let voxels: Vec<Point3> = image.foreground().iter().copied().collect();
    let index: HashMap<Point3, usize> =
        voxels.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut parent: Vec<usize> = (0..voxels.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for (i, v) in voxels.iter().enumerate() {
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if (dx, dy, dz) == (0, 0, 0) {
                        continue;
                    }
                    if let Some(&j) = index.get(&(*v + Point3([dx, dy, dz]))) {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a] = b;
                    }
                }
            }
        }
    }
    let mut roots = HashSet::new();
    for i in 0..voxels.len() {
        roots.insert(find(&mut parent, i));
    }
    roots.len()
}

/// Deterministic random image of side `n` at the given density.
pub fn random_image(rng: &mut impl RngCore, n: i32, density: f64) -> BinaryImage {
    let threshold = (density * u32::MAX as f64) as u32;
    let mut pts = Vec::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                if rng.next_u32() <= threshold {
                    pts.push(Point3::new(x, y, z));
                }
            }
        }
    }
    BinaryImage::from_points(pts)
}

/// Fixed-seed generator for reproducible corpora.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand_core::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
