//! Deciding which vertices of a cubical complex break manifoldness.
//!
//! A vertex is critical when the boundary surface around it is not locally
//! a disk: some incident boundary edge has more than two boundary square
//! cofaces, or the link of the vertex in the boundary splits into several
//! components. Around a vertex only the 2x2x2 block of incident cubes
//! matters, so criticality is a function of an 8-bit occupancy pattern and
//! is precomputed into a 256-entry table.
//!
//! Octant bit order is fixed as `bit = (dx>0) + 2*(dy>0) + 4*(dz>0)` over
//! the corner direction `(dx,dy,dz)` from the vertex.

use crate::ecm_grid::{GrayscaleGrid, StructuringElement, EMPTY};
use crate::point::{corner_directions, Point3};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Criticality of each of the 256 occupancy patterns of the 2x2x2 cube
/// block around a vertex.
#[derive(Clone, PartialEq, Eq)]
pub struct CriticalityTable {
    entries: [bool; 256],
}

impl CriticalityTable {
    pub fn is_critical(&self, pattern: u8) -> bool {
        self.entries[pattern as usize]
    }

    /// Patterns flagged critical, ascending.
    pub fn critical_patterns(&self) -> Vec<u8> {
        (0u16..256)
            .filter(|i| self.entries[*i as usize])
            .map(|i| i as u8)
            .collect()
    }

    /// Golden-file form: 256 characters `0`/`1` plus a trailing newline.
    pub fn dump(&self) -> String {
        let mut s: String = self
            .entries
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect();
        s.push('\n');
        s
    }
}

impl std::fmt::Debug for CriticalityTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "CriticalityTable({} critical patterns)",
            self.critical_patterns().len()
        )
    }
}

/// Local boundary structure of one occupancy pattern.
///
/// Everything incident to the central vertex lives inside the block: a
/// square through the vertex has its (up to) two cubes in the block, and
/// an edge through the vertex has its four. A square is free when exactly
/// one of its cubes is present; the boundary subcomplex near the vertex is
/// exactly the free squares and their faces.
struct LocalStar {
    present: [bool; 8],
}

impl LocalStar {
    fn new(pattern: u8) -> Self {
        let mut present = [false; 8];
        for (bit, slot) in present.iter_mut().enumerate() {
            *slot = pattern & (1 << bit) != 0;
        }
        LocalStar { present }
    }

    fn cube(&self, d: Point3) -> bool {
        let bit =
            (d.x() > 0) as usize + 2 * ((d.y() > 0) as usize) + 4 * ((d.z() > 0) as usize);
        self.present[bit]
    }

    /// The twelve squares through the vertex: (normal axis, sign in axis a,
    /// sign in axis b) where (a, b) are the other two axes in order.
    fn squares() -> Vec<(usize, i32, i32)> {
        let mut out = Vec::with_capacity(12);
        for normal in 0..3 {
            for sa in [-1, 1] {
                for sb in [-1, 1] {
                    out.push((normal, sa, sb));
                }
            }
        }
        out
    }

    fn square_cubes(&self, sq: (usize, i32, i32)) -> (bool, bool) {
        let (normal, sa, sb) = sq;
        let (a, b) = other_axes(normal);
        let mut d = [0i32; 3];
        d[a] = sa;
        d[b] = sb;
        d[normal] = 1;
        let up = self.cube(Point3(d));
        d[normal] = -1;
        let down = self.cube(Point3(d));
        (up, down)
    }

    fn square_free(&self, sq: (usize, i32, i32)) -> bool {
        let (u, d) = self.square_cubes(sq);
        u != d
    }

    /// The two edges through the vertex contained in a square: (axis, sign).
    fn square_edges(sq: (usize, i32, i32)) -> [(usize, i32); 2] {
        let (normal, sa, sb) = sq;
        let (a, b) = other_axes(normal);
        [(a, sa), (b, sb)]
    }
}

fn other_axes(axis: usize) -> (usize, usize) {
    match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Decide criticality of a single occupancy pattern from the local
/// boundary structure.
pub fn pattern_is_critical(pattern: u8) -> bool {
    if pattern == 0 || pattern == 0xFF {
        // Vertex absent from the complex, or interior to a full block.
        return false;
    }
    let star = LocalStar::new(pattern);

    // Free-square cofaces per incident edge, indexed by (axis, sign).
    let mut edge_free = [[0usize; 2]; 3];
    let mut arcs: Vec<((usize, i32), (usize, i32))> = Vec::new();
    for sq in LocalStar::squares() {
        // A free square has exactly one cube, so it exists.
        if !star.square_free(sq) {
            continue;
        }
        let [e1, e2] = LocalStar::square_edges(sq);
        for (axis, sign) in [e1, e2] {
            edge_free[axis][(sign > 0) as usize] += 1;
        }
        arcs.push((e1, e2));
    }

    // E1: each boundary edge must have exactly two free square cofaces.
    // Counts around an edge are even, so a violation is a count of four.
    let mut nodes: Vec<(usize, i32)> = Vec::new();
    for (axis, free) in edge_free.iter().enumerate() {
        for (si, sign) in [(-1i32, 0usize), (1, 1)] {
            let n = free[sign];
            if n != 0 {
                nodes.push((axis, si));
            }
            if n != 0 && n != 2 {
                return true;
            }
        }
    }
    if nodes.is_empty() {
        // Mixed patterns always have a free square through the vertex.
        return false;
    }

    // E2: the link graph over boundary edges must be connected.
    let index = |e: (usize, i32)| nodes.iter().position(|n| *n == e).unwrap();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for (e1, e2) in arcs {
        let (a, b) = (index(e1), index(e2));
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let root0 = find(&mut parent, 0);
    (1..nodes.len()).any(|i| find(&mut parent, i) != root0)
}

/// Build the table by running the local-complex decision on all 256 patterns.
pub fn build_criticality_table() -> CriticalityTable {
    let mut entries = [false; 256];
    for (i, e) in entries.iter_mut().enumerate() {
        *e = pattern_is_critical(i as u8);
    }
    CriticalityTable { entries }
}

/// A signed coordinate permutation of `Z^3`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SignedPerm {
    pub perm: [usize; 3],
    pub signs: [i32; 3],
}

impl SignedPerm {
    pub fn apply(&self, p: Point3) -> Point3 {
        Point3([
            self.signs[0] * p.0[self.perm[0]],
            self.signs[1] * p.0[self.perm[1]],
            self.signs[2] * p.0[self.perm[2]],
        ])
    }

    pub fn compose(&self, other: &SignedPerm) -> SignedPerm {
        // Composition applied as self(other(p)).
        let mut perm = [0usize; 3];
        let mut signs = [0i32; 3];
        for i in 0..3 {
            perm[i] = other.perm[self.perm[i]];
            signs[i] = self.signs[i] * other.signs[self.perm[i]];
        }
        SignedPerm { perm, signs }
    }
}

/// The 48 signed permutations: all cube symmetries including reflections.
#[derive(Clone, Debug)]
pub struct SymmetryGroup {
    elements: Vec<SignedPerm>,
}

impl SymmetryGroup {
    pub fn full() -> Self {
        let perms = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut elements = Vec::with_capacity(48);
        for perm in perms {
            for sx in [1, -1] {
                for sy in [1, -1] {
                    for sz in [1, -1] {
                        elements.push(SignedPerm {
                            perm,
                            signs: [sx, sy, sz],
                        });
                    }
                }
            }
        }
        SymmetryGroup { elements }
    }

    pub fn elements(&self) -> &[SignedPerm] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Image of an occupancy pattern under a symmetry: bit at the image
    /// direction receives the bit at the source direction.
    pub fn apply_to_pattern(&self, g: &SignedPerm, pattern: u8) -> u8 {
        let dirs = corner_directions();
        let mut out = 0u8;
        for (bit, d) in dirs.iter().enumerate() {
            if pattern & (1 << bit) != 0 {
                let img = g.apply(*d);
                let ibit = (img.x() > 0) as usize
                    + 2 * ((img.y() > 0) as usize)
                    + 4 * ((img.z() > 0) as usize);
                out |= 1 << ibit;
            }
        }
        out
    }

    /// Lexicographically smallest pattern in the orbit of `pattern`.
    pub fn canonical_pattern(&self, pattern: u8) -> u8 {
        self.elements
            .iter()
            .map(|g| self.apply_to_pattern(g, pattern))
            .min()
            .unwrap()
    }

    /// Orbit of one pattern.
    pub fn orbit(&self, pattern: u8) -> Vec<u8> {
        let mut orbit: Vec<u8> = self
            .elements
            .iter()
            .map(|g| self.apply_to_pattern(g, pattern))
            .collect();
        orbit.sort_unstable();
        orbit.dedup();
        orbit
    }
}

/// Orbit counts of all 256 patterns and of the critical subset under the
/// symmetry group: `(total_classes, critical_classes)`.
pub fn classify_patterns(table: &CriticalityTable, group: &SymmetryGroup) -> (usize, usize) {
    let mut reps = std::collections::BTreeSet::new();
    let mut critical_reps = std::collections::BTreeSet::new();
    for pattern in 0u16..256 {
        let canon = group.canonical_pattern(pattern as u8);
        reps.insert(canon);
        if table.is_critical(pattern as u8) {
            critical_reps.insert(canon);
        }
    }
    (reps.len(), critical_reps.len())
}

/// One representative pattern per critical class, sorted.
pub fn critical_class_representatives(
    table: &CriticalityTable,
    group: &SymmetryGroup,
) -> Vec<u8> {
    let mut reps = std::collections::BTreeSet::new();
    for pattern in table.critical_patterns() {
        reps.insert(group.canonical_pattern(pattern));
    }
    reps.into_iter().collect()
}

/// The matching elements equivalent to the table: one per critical
/// pattern, reading the vertex (0), the eight diagonal guards (-1) and
/// the eight cube corners (3 where occupied, -1 where not).
pub fn critical_elements(table: &CriticalityTable) -> Vec<StructuringElement> {
    let dirs = corner_directions();
    table
        .critical_patterns()
        .into_iter()
        .map(|pattern| {
            let mut entries = vec![(Point3::ZERO, 0i8)];
            for (bit, d) in dirs.iter().enumerate() {
                entries.push((*d, EMPTY));
                let corner = if pattern & (1 << bit) != 0 { 3 } else { EMPTY };
                entries.push((*d * 2, corner));
            }
            StructuringElement::new(entries)
        })
        .collect()
}

/// Read the occupancy pattern around a vertex point from corner colors:
/// 3 means the octant cube is present, -1 absent.
pub fn vertex_pattern(grid: &GrayscaleGrid, p: Point3) -> u8 {
    let mut pattern = 0u8;
    for (bit, d) in corner_directions().iter().enumerate() {
        if grid.get(p + *d * 2) == 3 {
            pattern |= 1 << bit;
        }
    }
    pattern
}

fn critical_in_slab(
    grid: &GrayscaleGrid,
    table: &CriticalityTable,
    z: i32,
) -> Vec<Point3> {
    let o = grid.origin();
    let d = grid.dims();
    let mut out = Vec::new();
    for y in 0..d[1] {
        for x in 0..d[0] {
            let p = o + Point3([x, y, z]);
            if grid.get(p) == 0 && table.is_critical(vertex_pattern(grid, p)) {
                out.push(p);
            }
        }
    }
    out
}

/// All critical vertex points of a cubical-complex grid, sorted
/// lexicographically. Scans every stored point with color 0 and looks the
/// corner pattern up in the table.
pub fn detect_critical(grid: &GrayscaleGrid, table: &CriticalityTable) -> Vec<Point3> {
    #[cfg(feature = "parallel")]
    {
        let mut found: Vec<Point3> = (0..grid.dims()[2])
            .into_par_iter()
            .flat_map_iter(|z| critical_in_slab(grid, table, z))
            .collect();
        found.sort_unstable();
        found
    }
    #[cfg(not(feature = "parallel"))]
    {
        detect_critical_seq(grid, table)
    }
}

/// Sequential detection; same contract and output as [`detect_critical`].
pub fn detect_critical_seq(grid: &GrayscaleGrid, table: &CriticalityTable) -> Vec<Point3> {
    let mut found = Vec::new();
    for z in 0..grid.dims()[2] {
        found.extend(critical_in_slab(grid, table, z));
    }
    found.sort_unstable();
    found
}
