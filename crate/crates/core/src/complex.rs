//! Explicit incidence complexes: the cubical complex of an image, its
//! polyhedral repair, boundary subcomplexes, the manifold conditions, and
//! derivation of the repaired grid's structuring elements.
//!
//! Cells are keyed by their grid point, so the grid and the complex are
//! mutually redundant views of the same structure; tests exploit that for
//! cross-checks. Vertex geometry is the key scaled by a quarter. Square
//! cells also carry their vertex cycle; quadrilaterals created by the
//! repair are warped, so geometry beyond the vertices is deliberately not
//! represented.
//!
//! The repair rules are applied per cell, driven only by which corner
//! vertices are critical:
//!
//! * a critical vertex becomes a half-size cube with all its faces;
//! * an edge with one critical endpoint becomes a pyramid (base on the
//!   half-size cube, apex at the surviving endpoint), with two critical
//!   endpoints a connecting cube;
//! * a square with a critical corner becomes a pillow: two big faces just
//!   off the square plane, sides closed by the pyramid triangles or
//!   connecting-cube faces lying in the square plane, hinged shut along
//!   sides whose corners are both non-critical;
//! * a cube swaps each facet toward a replaced square for the pillow's
//!   near big face, becoming one of the hexahedra.

use crate::ecm_grid::{fits, q_face_elements, GrayscaleGrid, StructuringElement, EMPTY};
use crate::error::{BpError, ComplexError, FitError};
use crate::point::{signed_units, Point3};
use crate::repair::RepairOutcome;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One cell: its facet keys and, for 2-cells, the ordered vertex cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub facets: Vec<Point3>,
    pub cycle: Option<Vec<Point3>>,
}

/// A complete polyhedral complex keyed by grid points.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PolyComplex {
    dims: [BTreeMap<Point3, Cell>; 4],
}

impl PolyComplex {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(
        &mut self,
        dim: usize,
        key: Point3,
        mut facets: Vec<Point3>,
        cycle: Option<Vec<Point3>>,
    ) -> Result<(), ComplexError> {
        if self.dims.iter().any(|m| m.contains_key(&key)) {
            return Err(ComplexError::DuplicateKey(key));
        }
        facets.sort_unstable();
        self.dims[dim].insert(key, Cell { facets, cycle });
        Ok(())
    }

    pub fn cells(&self, dim: usize) -> impl Iterator<Item = (Point3, &Cell)> + '_ {
        self.dims[dim].iter().map(|(k, c)| (*k, c))
    }

    pub fn counts(&self) -> [usize; 4] {
        [
            self.dims[0].len(),
            self.dims[1].len(),
            self.dims[2].len(),
            self.dims[3].len(),
        ]
    }

    pub fn is_empty(&self) -> bool {
        self.dims.iter().all(|m| m.is_empty())
    }

    pub fn dim_of(&self, key: Point3) -> Option<usize> {
        (0..4).find(|d| self.dims[*d].contains_key(&key))
    }

    pub fn cell(&self, key: Point3) -> Option<(usize, &Cell)> {
        (0..4).find_map(|d| self.dims[d].get(&key).map(|c| (d, c)))
    }

    pub fn facets_of(&self, key: Point3) -> Option<&[Point3]> {
        self.cell(key).map(|(_, c)| c.facets.as_slice())
    }

    pub fn edge_endpoints(&self, edge: Point3) -> Option<&[Point3]> {
        self.dims[1].get(&edge).map(|c| c.facets.as_slice())
    }

    /// Alternating sum of cell counts.
    pub fn euler(&self) -> i64 {
        let c = self.counts();
        c[0] as i64 - c[1] as i64 + c[2] as i64 - c[3] as i64
    }

    /// Every facet key must name a cell one dimension below.
    pub fn validate_closure(&self) -> Result<(), ComplexError> {
        for dim in 1..4 {
            for (key, cell) in &self.dims[dim] {
                for f in &cell.facets {
                    if !self.dims[dim - 1].contains_key(f) {
                        return Err(ComplexError::DanglingFacet {
                            cell: *key,
                            facet: *f,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Largest dimension holding any cell; `None` when empty.
    pub fn top_dim(&self) -> Option<usize> {
        (0..4).rev().find(|d| !self.dims[*d].is_empty())
    }

    /// A complete complex: every cell below the top dimension is a
    /// (transitive) face of some top-dimensional cell.
    pub fn is_complete(&self) -> bool {
        let top = match self.top_dim() {
            None => return true,
            Some(t) => t,
        };
        let mut covered: HashSet<Point3> = HashSet::new();
        let mut stack: Vec<(usize, Point3)> =
            self.dims[top].keys().map(|k| (top, *k)).collect();
        while let Some((d, k)) = stack.pop() {
            if !covered.insert(k) {
                continue;
            }
            if d > 0 {
                for f in &self.dims[d][&k].facets {
                    stack.push((d - 1, *f));
                }
            }
        }
        self.dims
            .iter()
            .flat_map(|m| m.keys())
            .all(|k| covered.contains(k))
    }

    /// Deterministic text form: `dim key facet_keys...`, one cell per line,
    /// ordered by dimension then key.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for dim in 0..4 {
            for (key, cell) in &self.dims[dim] {
                out.push_str(&format!("{dim} {key}"));
                for f in &cell.facets {
                    out.push_str(&format!(" {f}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn other_axes(axis: usize) -> (usize, usize) {
    // Ordered so that unit(a) x unit(b) = unit(axis).
    ((axis + 1) % 3, (axis + 2) % 3)
}

/// Rotate a cycle so its smallest vertex comes first, preserving
/// orientation.
fn normalize_cycle(mut cycle: Vec<Point3>) -> Vec<Point3> {
    let min = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, p)| **p)
        .map(|(i, _)| i)
        .unwrap();
    cycle.rotate_left(min);
    cycle
}

/// Corners of an axis-aligned square counterclockwise about the positive
/// normal axis: center +- `r` along the two in-plane axes.
fn square_cycle(center: Point3, normal_axis: usize, r: i32) -> Vec<Point3> {
    let (a, b) = other_axes(normal_axis);
    let (ua, ub) = (Point3::unit(a) * r, Point3::unit(b) * r);
    normalize_cycle(vec![
        center - ua - ub,
        center + ua - ub,
        center + ua + ub,
        center - ua + ub,
    ])
}

/// Axis with residue 0 mod 4: the direction an original edge runs along.
fn edge_axis(key: Point3) -> usize {
    (0..3)
        .find(|a| key.0[*a].rem_euclid(4) == 0)
        .expect("not an edge key")
}

/// Axis with residue 2 mod 4: the normal of an original square.
fn square_normal(key: Point3) -> usize {
    (0..3)
        .find(|a| key.0[*a].rem_euclid(4) == 2)
        .expect("not a square key")
}

/// Build the explicit cubical complex from its grid: one cell per stored
/// point, facets recovered by element matching, square cycles oriented
/// counterclockwise about the positive normal.
pub fn build_q_complex(grid: &GrayscaleGrid) -> Result<PolyComplex, ComplexError> {
    let elements = q_face_elements();
    let mut complex = PolyComplex::new();
    for p in grid.cell_points() {
        let dim = grid.get(p) as usize;
        let facets = if dim == 0 {
            Vec::new()
        } else {
            crate::ecm_grid::faces_of(grid, p, &elements)?
        };
        let cycle = if dim == 2 {
            Some(square_cycle(p, square_normal(p), 2))
        } else {
            None
        };
        complex.insert(dim, p, facets, cycle)?;
    }
    complex.validate_closure()?;
    Ok(complex)
}

/// Emit the half-size cube replacing a critical vertex, with all faces.
fn emit_vertex_cube(complex: &mut PolyComplex, p: Point3) -> Result<(), ComplexError> {
    let units = signed_units();
    complex.insert(3, p, units.iter().map(|u| p + *u).collect(), None)?;
    for u in units {
        let axis = (0..3).find(|a| u.0[*a] != 0).unwrap();
        let (a, b) = other_axes(axis);
        let facets = vec![
            p + u + Point3::unit(a),
            p + u - Point3::unit(a),
            p + u + Point3::unit(b),
            p + u - Point3::unit(b),
        ];
        complex.insert(2, p + u, facets, Some(square_cycle(p + u, axis, 1)))?;
    }
    for i in 0..3 {
        for j in (i + 1)..3 {
            let k = 3 - i - j;
            for si in [-1, 1] {
                for sj in [-1, 1] {
                    let e = p + Point3::unit(i) * si + Point3::unit(j) * sj;
                    let facets = vec![e + Point3::unit(k), e - Point3::unit(k)];
                    complex.insert(1, e, facets, None)?;
                }
            }
        }
    }
    for d in crate::point::corner_directions() {
        complex.insert(0, p + d, Vec::new(), None)?;
    }
    Ok(())
}

/// Emit the pyramid replacing an edge with exactly one critical endpoint.
///
/// `k` is the old edge key, `v` the critical endpoint, `w` the survivor.
fn emit_pyramid(
    complex: &mut PolyComplex,
    k: Point3,
    v: Point3,
    w: Point3,
) -> Result<(), ComplexError> {
    let axis = edge_axis(k);
    let u = (k - v).map(|c| c / 2);
    debug_assert_eq!(w, k + u * 2);
    debug_assert_eq!(axis, (0..3).find(|a| u.0[*a] != 0).unwrap());
    let (a, b) = other_axes(axis);
    let (ta, tb) = (Point3::unit(a), Point3::unit(b));
    let base = k - u;

    let mut facets3 = vec![base];
    for t in [ta, tb] {
        facets3.push(k + t);
        facets3.push(k - t);
    }
    complex.insert(3, k, facets3, None)?;

    for (t, tp) in [(ta, tb), (ta * -1, tb), (tb, ta), (tb * -1, ta)] {
        let key = k + t;
        let facets = vec![base + t, k + t + tp, k + t - tp];
        let cycle = normalize_cycle(vec![w, base + t + tp, base + t - tp]);
        complex.insert(2, key, facets, Some(cycle))?;
    }
    for sa in [-1, 1] {
        for sb in [-1, 1] {
            let key = k + ta * sa + tb * sb;
            complex.insert(1, key, vec![w, base + ta * sa + tb * sb], None)?;
        }
    }
    Ok(())
}

/// Emit the connecting cube replacing an edge with two critical endpoints.
fn emit_edge_cube(
    complex: &mut PolyComplex,
    k: Point3,
    va: Point3,
    vb: Point3,
) -> Result<(), ComplexError> {
    let axis = edge_axis(k);
    let u = (k - va).map(|c| c / 2);
    debug_assert_eq!(vb, k + u * 2);
    let (a, b) = other_axes(axis);
    let (ta, tb) = (Point3::unit(a), Point3::unit(b));
    let near = k - u;
    let far = k + u;

    let mut facets3 = vec![near, far];
    for t in [ta, ta * -1, tb, tb * -1] {
        facets3.push(k + t);
    }
    complex.insert(3, k, facets3, None)?;

    for t in [ta, ta * -1, tb, tb * -1] {
        let t_axis = (0..3).find(|x| t.0[*x] != 0).unwrap();
        let tp = if t_axis == a { tb } else { ta };
        let facets = vec![k + t + tp, k + t - tp, near + t, far + t];
        complex.insert(2, k + t, facets, Some(square_cycle(k + t, t_axis, 1)))?;
    }
    for sa in [-1, 1] {
        for sb in [-1, 1] {
            let d = ta * sa + tb * sb;
            complex.insert(1, k + d, vec![near + d, far + d], None)?;
        }
    }
    Ok(())
}

/// Emit the pillow replacing a square with a critical corner: the 3-cell
/// and its two big faces. The in-plane side facets belong to the edge
/// replacements; sides with two non-critical corners keep the original
/// edge as a hinge shared by both big faces.
fn emit_pillow(
    complex: &mut PolyComplex,
    k: Point3,
    critical: &BTreeSet<Point3>,
) -> Result<(), ComplexError> {
    let normal = square_normal(k);
    let n = Point3::unit(normal);
    let corners = square_cycle(k, normal, 2);

    let mut facets3 = vec![k + n, k - n];
    for i in 0..4 {
        let (ca, cb) = (corners[i], corners[(i + 1) % 4]);
        if critical.contains(&ca) || critical.contains(&cb) {
            let e = (ca + cb).map(|c| c / 2);
            let t_int = (k - e).map(|c| c / 2);
            facets3.push(e + t_int);
        }
    }
    complex.insert(3, k, facets3, None)?;

    for s in [1, -1] {
        let key = k + n * s;
        let mut cycle = Vec::with_capacity(4);
        for c in &corners {
            if critical.contains(c) {
                let d = (k - *c).map(|x| x / 2);
                cycle.push(*c + d + n * s);
            } else {
                cycle.push(*c);
            }
        }
        let mut facets = Vec::with_capacity(4);
        for i in 0..4 {
            let (ca, cb) = (corners[i], corners[(i + 1) % 4]);
            let e = (ca + cb).map(|c| c / 2);
            if critical.contains(&ca) || critical.contains(&cb) {
                let t_int = (k - e).map(|c| c / 2);
                facets.push(e + t_int + n * s);
            } else {
                facets.push(e);
            }
        }
        complex.insert(2, key, facets, Some(normalize_cycle(cycle)))?;
    }
    Ok(())
}

/// Build the repaired polyhedral complex from the original grid and the
/// repair outcome. Starts from the cubical complex and replaces every
/// cell incident to a critical vertex according to the per-corner rules.
pub fn build_p_complex(
    grid_q: &GrayscaleGrid,
    outcome: &RepairOutcome,
) -> Result<PolyComplex, ComplexError> {
    let critical: BTreeSet<Point3> = outcome.critical.iter().copied().collect();
    let mut complex = PolyComplex::new();

    for p in grid_q.cell_points() {
        match grid_q.get(p) {
            0 => {
                if critical.contains(&p) {
                    emit_vertex_cube(&mut complex, p)?;
                } else {
                    complex.insert(0, p, Vec::new(), None)?;
                }
            }
            1 => {
                let axis = edge_axis(p);
                let u = Point3::unit(axis);
                let (va, vb) = (p - u * 2, p + u * 2);
                match (critical.contains(&va), critical.contains(&vb)) {
                    (false, false) => {
                        complex.insert(1, p, vec![va, vb], None)?;
                    }
                    (true, false) => emit_pyramid(&mut complex, p, va, vb)?,
                    (false, true) => emit_pyramid(&mut complex, p, vb, va)?,
                    (true, true) => emit_edge_cube(&mut complex, p, va, vb)?,
                }
            }
            2 => {
                let normal = square_normal(p);
                let corners = square_cycle(p, normal, 2);
                if corners.iter().any(|c| critical.contains(c)) {
                    emit_pillow(&mut complex, p, &critical)?;
                } else {
                    let (a, b) = other_axes(normal);
                    let facets = vec![
                        p + Point3::unit(a) * 2,
                        p - Point3::unit(a) * 2,
                        p + Point3::unit(b) * 2,
                        p - Point3::unit(b) * 2,
                    ];
                    complex.insert(2, p, facets, Some(square_cycle(p, normal, 2)))?;
                }
            }
            3 => {
                let mut facets = Vec::with_capacity(6);
                for d in signed_units() {
                    let face = p + d * 2;
                    let d_axis = (0..3).find(|a| d.0[*a] != 0).unwrap();
                    let face_corners = square_cycle(face, d_axis, 2);
                    if face_corners.iter().any(|c| critical.contains(c)) {
                        facets.push(p + d);
                    } else {
                        facets.push(face);
                    }
                }
                complex.insert(3, p, facets, None)?;
            }
            _ => unreachable!("cell colors are 0..=3"),
        }
    }

    complex.validate_closure()?;
    debug_assert!(complex.is_complete());
    Ok(complex)
}

/// The boundary subcomplex: 2-cells with exactly one 3-coface, together
/// with all their faces.
pub fn boundary_subcomplex(complex: &PolyComplex) -> PolyComplex {
    let mut coface_count: HashMap<Point3, usize> = HashMap::new();
    for (_, cell) in complex.cells(3) {
        for f in &cell.facets {
            *coface_count.entry(*f).or_insert(0) += 1;
        }
    }
    let mut out = PolyComplex::new();
    for (key, cell) in complex.cells(2) {
        if coface_count.get(&key).copied().unwrap_or(0) != 1 {
            continue;
        }
        out.dims[2].insert(key, cell.clone());
        for e in &cell.facets {
            let edge = &complex.dims[1][e];
            out.dims[1].insert(*e, edge.clone());
            for v in &edge.facets {
                out.dims[0].insert(*v, complex.dims[0][v].clone());
            }
        }
    }
    out
}

/// Manifoldness report for a complete complex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WellComposedReport {
    /// Boundary edges with a 2-coface count different from two.
    pub e1_violations: Vec<(Point3, usize)>,
    /// Boundary vertices whose link graph is disconnected.
    pub e2_violations: Vec<Point3>,
    pub is_well_composed: bool,
}

/// Check the two local manifold conditions on the boundary subcomplex:
/// every boundary edge has exactly two boundary 2-cofaces, and the link
/// graph of every boundary vertex is connected.
pub fn check_well_composed(complex: &PolyComplex) -> WellComposedReport {
    let boundary = boundary_subcomplex(complex);

    let mut edge_cofaces: HashMap<Point3, usize> = HashMap::new();
    for (_, cell) in boundary.cells(2) {
        for e in &cell.facets {
            *edge_cofaces.entry(*e).or_insert(0) += 1;
        }
    }
    let mut e1_violations: Vec<(Point3, usize)> = boundary
        .cells(1)
        .map(|(e, _)| (e, edge_cofaces.get(&e).copied().unwrap_or(0)))
        .filter(|(_, n)| *n != 2)
        .collect();
    e1_violations.sort_unstable();

    // Edges incident to each boundary vertex.
    let mut vertex_edges: HashMap<Point3, Vec<Point3>> = HashMap::new();
    for (e, cell) in boundary.cells(1) {
        for v in &cell.facets {
            vertex_edges.entry(*v).or_default().push(e);
        }
    }
    // Arcs come from boundary 2-cells: within one 2-cell, all facet edges
    // meeting a given vertex are link-connected there.
    let mut vertex_arcs: HashMap<Point3, Vec<(Point3, Point3)>> = HashMap::new();
    for (_, cell) in boundary.cells(2) {
        let mut per_vertex: HashMap<Point3, Vec<Point3>> = HashMap::new();
        for e in &cell.facets {
            for v in &boundary.dims[1][e].facets {
                per_vertex.entry(*v).or_default().push(*e);
            }
        }
        for (v, edges) in per_vertex {
            for w in edges.windows(2) {
                vertex_arcs.entry(v).or_default().push((w[0], w[1]));
            }
        }
    }

    let mut e2_violations = Vec::new();
    for (v, _) in boundary.cells(0) {
        let edges = match vertex_edges.get(&v) {
            Some(e) => e.as_slice(),
            None => continue,
        };
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
                let (a, b) = (index[ea], index[eb]);
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
        let mut roots = HashSet::new();
        for i in 0..edges.len() {
            roots.insert(find(&mut parent, i));
        }
        if roots.len() > 1 {
            e2_violations.push(v);
        }
    }
    e2_violations.sort_unstable();

    let is_well_composed = e1_violations.is_empty() && e2_violations.is_empty();
    WellComposedReport {
        e1_violations,
        e2_violations,
        is_well_composed,
    }
}

/// Cells having any proper face among `keys`.
pub fn star(complex: &PolyComplex, keys: &[Point3]) -> Result<BTreeSet<Point3>, ComplexError> {
    for k in keys {
        if complex.dim_of(*k).is_none() {
            return Err(ComplexError::UnknownKey(*k));
        }
    }
    let mut cofaces: HashMap<Point3, Vec<Point3>> = HashMap::new();
    for dim in 1..4 {
        for (key, cell) in complex.cells(dim) {
            for f in &cell.facets {
                cofaces.entry(*f).or_default().push(key);
            }
        }
    }
    let mut result: BTreeSet<Point3> = BTreeSet::new();
    let mut stack: Vec<Point3> = keys.to_vec();
    while let Some(k) = stack.pop() {
        if let Some(ups) = cofaces.get(&k) {
            for up in ups {
                if result.insert(*up) {
                    stack.push(*up);
                }
            }
        }
    }
    Ok(result)
}

/// The link graph of a vertex in the boundary subcomplex: nodes are the
/// incident boundary edges, arcs join edges sharing a boundary 2-cell.
#[derive(Clone, Debug)]
pub struct LinkGraph {
    pub nodes: Vec<Point3>,
    pub arcs: Vec<(usize, usize)>,
}

impl LinkGraph {
    pub fn components(&self) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let r = find(parent, parent[i]);
                parent[i] = r;
            }
            parent[i]
        }
        for (a, b) in &self.arcs {
            let (ra, rb) = (find(&mut parent, *a), find(&mut parent, *b));
            parent[ra] = rb;
        }
        let mut roots = HashSet::new();
        for i in 0..self.nodes.len() {
            roots.insert(find(&mut parent, i));
        }
        roots.len()
    }
}

pub fn link_graph(complex: &PolyComplex, vertex: Point3) -> Result<LinkGraph, ComplexError> {
    if complex.dim_of(vertex) != Some(0) {
        return Err(ComplexError::UnknownKey(vertex));
    }
    let boundary = boundary_subcomplex(complex);
    let mut nodes: Vec<Point3> = boundary
        .cells(1)
        .filter(|(_, c)| c.facets.contains(&vertex))
        .map(|(e, _)| e)
        .collect();
    nodes.sort_unstable();
    let index: HashMap<Point3, usize> =
        nodes.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let mut arcs = Vec::new();
    for (_, cell) in boundary.cells(2) {
        let at_v: Vec<usize> = cell
            .facets
            .iter()
            .filter_map(|e| index.get(e).copied())
            .collect();
        for w in at_v.windows(2) {
            arcs.push((w[0], w[1]));
        }
    }
    Ok(LinkGraph { nodes, arcs })
}

/// Derive the canonical structuring element of one cell: origin color,
/// facet offsets one color down, and guard entries at bare axis units
/// whose direction carries no facet while the opposite direction does.
fn cell_element(
    g_p: &GrayscaleGrid,
    key: Point3,
    dim: usize,
    facets: &[Point3],
) -> Result<StructuringElement, BpError> {
    let offsets: Vec<Point3> = facets.iter().map(|f| *f - key).collect();
    let mut entries: Vec<(Point3, i8)> = vec![(Point3::ZERO, dim as i8)];
    for off in &offsets {
        entries.push((*off, dim as i8 - 1));
    }
    let has = |p: Point3| offsets.contains(&p);
    for d in signed_units() {
        if !has(d) && !has(d * 2) && (has(-d) || has(-d * 2)) {
            let read = g_p.get(key + d);
            if read != EMPTY {
                return Err(BpError::GuardNotEmpty {
                    cell: key,
                    offset: d,
                    read,
                });
            }
            entries.push((d, EMPTY));
        }
    }
    Ok(StructuringElement::new(entries))
}

/// Derive and validate the element set of a repaired grid.
///
/// Elements are deduplicated by exact offset-map equality. Validation
/// enforces per-cell lookup: at every cell exactly one facet claim
/// survives the closure filter of [`faces_via_bp`], and it recovers the
/// explicit facet set exactly.
pub fn derive_bp(
    g_p: &GrayscaleGrid,
    complex: &PolyComplex,
) -> Result<Vec<StructuringElement>, BpError> {
    let mut elements: BTreeSet<StructuringElement> = BTreeSet::new();
    let mut owner: BTreeMap<StructuringElement, Point3> = BTreeMap::new();
    for dim in 1..4 {
        for (key, cell) in complex.cells(dim) {
            let se = cell_element(g_p, key, dim, &cell.facets)?;
            owner.entry(se.clone()).or_insert(key);
            elements.insert(se);
        }
    }
    let elements: Vec<StructuringElement> = elements.into_iter().collect();

    let cells: Vec<(Point3, usize, Vec<Point3>)> = (1..4)
        .flat_map(|d| {
            complex
                .cells(d)
                .map(move |(k, c)| (k, d, c.facets.clone()))
        })
        .collect();

    let check = |cell: &(Point3, usize, Vec<Point3>)| -> Result<(), BpError> {
        let (key, dim, facets) = cell;
        let got = lookup_facets(g_p, &elements, *key).map_err(|e| match e {
            FitError::AmbiguousFit(p) => {
                let second = elements
                    .iter()
                    .filter(|se| se.origin_value() == *dim as i8 && fits(g_p, p, se))
                    .filter_map(|se| owner.get(se))
                    .find(|o| **o != *key)
                    .copied()
                    .unwrap_or(p);
                BpError::AmbiguityUnresolvable {
                    first: *key,
                    second,
                }
            }
            other => BpError::Fit(other),
        })?;
        let mut got_sorted = got;
        got_sorted.sort_unstable();
        let mut want = facets.clone();
        want.sort_unstable();
        if got_sorted != want {
            return Err(BpError::FacetMismatch {
                cell: *key,
                got: got_sorted,
                want,
            });
        }
        Ok(())
    };

    #[cfg(feature = "parallel")]
    cells.par_iter().try_for_each(check)?;
    #[cfg(not(feature = "parallel"))]
    cells.iter().try_for_each(check)?;

    Ok(elements)
}

fn lookup_facets(
    g_p: &GrayscaleGrid,
    elements: &[StructuringElement],
    key: Point3,
) -> Result<Vec<Point3>, FitError> {
    let color = g_p.get(key);
    if color < 1 {
        return Err(FitError::NotAPositiveCell { point: key, color });
    }
    let mut claims: Vec<Vec<Point3>> = elements
        .iter()
        .filter(|se| se.origin_value() == color && fits(g_p, key, se))
        .map(|se| {
            let mut pts: Vec<Point3> =
                se.facet_offsets().into_iter().map(|off| key + off).collect();
            pts.sort_unstable();
            pts
        })
        .collect();
    claims.sort();
    claims.dedup();
    if claims.is_empty() {
        return Err(FitError::NoElementFits(key));
    }
    if claims.len() == 1 {
        return Ok(claims.pop().unwrap());
    }
    // An element can fit at a foreign cell whose surroundings mimic its
    // own ("shadow" fits). A genuine facet claim closes up: the facets of
    // a 2-cell chain into one cycle, the facets of a 3-cell bound a
    // closed surface. Shadow claims leave open borders and are dropped.
    let mut admissible: Vec<Vec<Point3>> = claims
        .into_iter()
        .filter(|claim| claim_closes_up(g_p, elements, color, claim))
        .collect();
    match admissible.len() {
        1 => Ok(admissible.pop().unwrap()),
        _ => Err(FitError::AmbiguousFit(key)),
    }
}

/// Whether a claimed facet set bounds the cell it pretends to: for an
/// edge two distinct endpoints, for a polygon facet edges forming a
/// single closed vertex cycle, for a polyhedron facet polygons whose
/// edges each occur exactly twice.
fn claim_closes_up(
    g_p: &GrayscaleGrid,
    elements: &[StructuringElement],
    color: i8,
    claim: &[Point3],
) -> bool {
    match color {
        1 => claim.len() == 2 && claim[0] != claim[1],
        2 => {
            if claim.len() < 3 {
                return false;
            }
            let mut degree: HashMap<Point3, usize> = HashMap::new();
            let mut arcs: Vec<(Point3, Point3)> = Vec::new();
            for e in claim {
                let ends = match lookup_facets(g_p, elements, *e) {
                    Ok(v) if v.len() == 2 => v,
                    _ => return false,
                };
                *degree.entry(ends[0]).or_insert(0) += 1;
                *degree.entry(ends[1]).or_insert(0) += 1;
                arcs.push((ends[0], ends[1]));
            }
            if degree.values().any(|d| *d != 2) {
                return false;
            }
            // Degree two everywhere plus connectivity means one cycle.
            let index: HashMap<Point3, usize> = degree
                .keys()
                .enumerate()
                .map(|(i, v)| (*v, i))
                .collect();
            let mut parent: Vec<usize> = (0..index.len()).collect();
            fn find(parent: &mut Vec<usize>, i: usize) -> usize {
                if parent[i] != i {
                    let r = find(parent, parent[i]);
                    parent[i] = r;
                }
                parent[i]
            }
            for (a, b) in arcs {
                let (ra, rb) = (find(&mut parent, index[&a]), find(&mut parent, index[&b]));
                parent[ra] = rb;
            }
            let root = find(&mut parent, 0);
            (1..index.len()).all(|i| find(&mut parent, i) == root)
        }
        3 => {
            let mut count: HashMap<Point3, usize> = HashMap::new();
            for f in claim {
                let edges = match lookup_facets(g_p, elements, *f) {
                    Ok(v) => v,
                    Err(_) => return false,
                };
                for e in edges {
                    *count.entry(e).or_insert(0) += 1;
                }
            }
            !count.is_empty() && count.values().all(|n| *n == 2)
        }
        _ => false,
    }
}

/// Facet points of the cell at `key`, recovered from the grid and the
/// derived element set alone.
pub fn faces_via_bp(
    g_p: &GrayscaleGrid,
    bp: &[StructuringElement],
    key: Point3,
) -> Result<Vec<Point3>, FitError> {
    lookup_facets(g_p, bp, key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criticality::{build_criticality_table, detect_critical};
    use crate::ecm_grid::build_q_grid;
    use crate::image_io::BinaryImage;
    use crate::repair::repair_grid;

    fn image(points: &[[i32; 3]]) -> BinaryImage {
        BinaryImage::from_points(points.iter().map(|c| Point3(*c)))
    }

    fn pipeline(
        points: &[[i32; 3]],
    ) -> (GrayscaleGrid, RepairOutcome, PolyComplex, PolyComplex) {
        let grid = build_q_grid(&image(points));
        let table = build_criticality_table();
        let critical = detect_critical(&grid, &table);
        let outcome = repair_grid(&grid, &critical);
        let q = build_q_complex(&grid).unwrap();
        let p = build_p_complex(&grid, &outcome).unwrap();
        (grid, outcome, q, p)
    }

    #[test]
    fn single_voxel_counts() {
        let (_, _, q, _) = pipeline(&[[0, 0, 0]]);
        assert_eq!(q.counts(), [8, 12, 6, 1]);
        assert_eq!(q.euler(), 1);
        assert!(q.is_complete());
    }

    #[test]
    fn solid_block_counts() {
        let pts: Vec<[i32; 3]> =
            (0..8i32).map(|b| [b & 1, (b >> 1) & 1, (b >> 2) & 1]).collect();
        let grid = build_q_grid(&image(&pts));
        let q = build_q_complex(&grid).unwrap();
        assert_eq!(q.counts(), [27, 54, 36, 8]);
        assert_eq!(q.euler(), 1);
    }

    #[test]
    fn empty_grid_empty_complex() {
        let grid = build_q_grid(&BinaryImage::empty());
        let q = build_q_complex(&grid).unwrap();
        assert!(q.is_empty());
        assert!(q.is_complete());
        assert_eq!(q.euler(), 0);
    }

    #[test]
    fn grid_complex_bijection() {
        let (grid, outcome, q, p) = pipeline(&[[0, 0, 0], [1, 1, 0], [1, 1, 1]]);
        for (g, k) in [(&grid, &q), (&outcome.g_p, &p)] {
            let by_color: Vec<usize> = (0..4)
                .map(|d| g.cell_points().filter(|x| g.get(*x) == d as i8).count())
                .collect();
            assert_eq!(by_color, k.counts().to_vec());
            for x in g.cell_points() {
                assert_eq!(k.dim_of(x), Some(g.get(x) as usize), "at {x:?}");
            }
        }
    }

    #[test]
    fn vertex_pair_small_cube() {
        let (_, _, _, p) = pipeline(&[[0, 0, 0], [1, 1, 1]]);
        let key = Point3::new(2, 2, 2);
        let (dim, cell) = p.cell(key).unwrap();
        assert_eq!(dim, 3);
        let mut expect: Vec<Point3> = signed_units().iter().map(|u| key + *u).collect();
        expect.sort_unstable();
        assert_eq!(cell.facets, expect);
    }

    #[test]
    fn identity_on_well_composed() {
        let (_, _, q, p) = pipeline(&[[0, 0, 0], [1, 0, 0], [0, 1, 0]]);
        assert_eq!(q, p);
    }

    #[test]
    fn edge_pair_connecting_cube() {
        let (_, _, _, p) = pipeline(&[[0, 0, 0], [1, 1, 0]]);
        let key = Point3::new(2, 2, 0);
        let (dim, cell) = p.cell(key).unwrap();
        assert_eq!(dim, 3);
        let mut expect = vec![
            Point3::new(3, 2, 0),
            Point3::new(1, 2, 0),
            Point3::new(2, 3, 0),
            Point3::new(2, 1, 0),
            Point3::new(2, 2, 1),
            Point3::new(2, 2, -1),
        ];
        expect.sort_unstable();
        assert_eq!(cell.facets, expect);
    }

    #[test]
    fn boundary_of_single_voxel() {
        let (_, _, q, _) = pipeline(&[[0, 0, 0]]);
        let b = boundary_subcomplex(&q);
        assert_eq!(b.counts(), [8, 12, 6, 0]);
        assert_eq!(b.euler(), 2);
    }

    #[test]
    fn boundary_of_solid_block() {
        let pts: Vec<[i32; 3]> =
            (0..8i32).map(|b| [b & 1, (b >> 1) & 1, (b >> 2) & 1]).collect();
        let grid = build_q_grid(&image(&pts));
        let q = build_q_complex(&grid).unwrap();
        let b = boundary_subcomplex(&q);
        assert_eq!(b.counts()[2], 24);
        assert_eq!(b.euler(), 2);
    }

    #[test]
    fn well_composed_checks() {
        let (_, _, q, p) = pipeline(&[[0, 0, 0], [1, 1, 1]]);
        let rq = check_well_composed(&q);
        assert!(!rq.is_well_composed);
        assert_eq!(rq.e2_violations, vec![Point3::new(2, 2, 2)]);
        assert!(rq.e1_violations.is_empty());
        let rp = check_well_composed(&p);
        assert!(rp.is_well_composed, "{rp:?}");
    }

    #[test]
    fn e1_violation_on_shared_edge() {
        let (_, _, q, p) = pipeline(&[[0, 0, 0], [1, 1, 0]]);
        let rq = check_well_composed(&q);
        assert!(!rq.is_well_composed);
        assert!(rq.e1_violations.contains(&(Point3::new(2, 2, 0), 4)));
        assert!(check_well_composed(&p).is_well_composed);
    }

    #[test]
    fn repaired_mixed_image_is_well_composed() {
        let (_, _, _, p) = pipeline(&[[0, 0, 0], [1, 1, 0], [1, 1, 1], [0, 2, 1]]);
        let r = check_well_composed(&p);
        assert!(r.is_well_composed, "{r:?}");
    }

    #[test]
    fn two_cell_cycles_are_closed_walks() {
        let (_, _, q, p) = pipeline(&[[0, 0, 0], [1, 1, 0], [1, 1, 1]]);
        for complex in [&q, &p] {
            for (key, cell) in complex.cells(2) {
                let cycle = cell.cycle.as_ref().expect("2-cells carry cycles");
                assert!(cycle.len() >= 3, "cycle too short at {key:?}");
                let mut used: Vec<Point3> = Vec::new();
                for i in 0..cycle.len() {
                    let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
                    let edge = cell
                        .facets
                        .iter()
                        .find(|e| {
                            let ends = complex.edge_endpoints(**e).unwrap();
                            ends.contains(&a) && ends.contains(&b)
                        })
                        .unwrap_or_else(|| panic!("no facet joins {a:?}-{b:?} of {key:?}"));
                    used.push(*edge);
                }
                used.sort_unstable();
                let mut facets = cell.facets.clone();
                facets.sort_unstable();
                assert_eq!(used, facets, "cycle edges differ from facets at {key:?}");
            }
        }
    }

    #[test]
    fn boundary_of_boundary_vanishes() {
        let (_, _, q, p) = pipeline(&[[0, 0, 0], [1, 1, 1], [1, 2, 1]]);
        for complex in [&q, &p] {
            for dim in 2..4 {
                for (key, cell) in complex.cells(dim) {
                    let mut count: HashMap<Point3, usize> = HashMap::new();
                    for f in &cell.facets {
                        for ff in complex.facets_of(*f).unwrap() {
                            *count.entry(*ff).or_insert(0) += 1;
                        }
                    }
                    for (sub, n) in count {
                        assert_eq!(n % 2, 0, "odd incidence {key:?} -> {sub:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn euler_preserved_and_matches_colors() {
        for pts in [
            vec![[0, 0, 0], [1, 1, 1]],
            vec![[0, 0, 0], [1, 1, 0]],
            vec![[0, 0, 0], [1, 1, 0], [1, 1, 1], [2, 0, 0]],
        ] {
            let (grid, outcome, q, p) = pipeline(&pts);
            assert_eq!(q.euler(), p.euler());
            assert_eq!(grid.euler_from_colors(), q.euler());
            assert_eq!(outcome.g_p.euler_from_colors(), p.euler());
        }
    }

    #[test]
    fn star_and_link_examples() {
        let (_, _, q, _) = pipeline(&[[0, 0, 0]]);
        let corner = Point3::new(2, 2, 2);
        let st = star(&q, &[corner]).unwrap();
        assert_eq!(st.len(), 7);
        assert!(st.contains(&Point3::ZERO));

        let lk = link_graph(&q, corner).unwrap();
        assert_eq!(lk.nodes.len(), 3);
        assert_eq!(lk.components(), 1);

        assert!(star(&q, &[]).unwrap().is_empty());
        assert!(matches!(
            star(&q, &[Point3::new(9, 9, 9)]),
            Err(ComplexError::UnknownKey(_))
        ));
    }

    #[test]
    fn hexahedron_classes_modulo_symmetry() {
        use crate::criticality::SymmetryGroup;
        let group = SymmetryGroup::full();
        let mut classes: BTreeSet<Vec<Point3>> = BTreeSet::new();
        for marking in 0u16..256 {
            let dirs = crate::point::corner_directions();
            let verts: Vec<Point3> = dirs
                .iter()
                .enumerate()
                .map(|(bit, d)| {
                    if marking & (1 << bit) != 0 {
                        *d // trimmed corner pulled inward
                    } else {
                        *d * 2
                    }
                })
                .collect();
            let canonical = group
                .elements()
                .iter()
                .map(|g| {
                    let mut img: Vec<Point3> = verts.iter().map(|v| g.apply(*v)).collect();
                    img.sort_unstable();
                    img
                })
                .min()
                .unwrap();
            classes.insert(canonical);
        }
        assert_eq!(classes.len(), 22);
    }

    #[test]
    fn derived_elements_for_named_cells() {
        let (_, outcome, _, p) = pipeline(&[[0, 0, 0], [1, 1, 1]]);
        let bp = derive_bp(&outcome.g_p, &p).unwrap();

        // Small-cube element: origin 3, faces at all six unit offsets.
        let small: Vec<(Point3, i8)> = std::iter::once((Point3::ZERO, 3))
            .chain(signed_units().iter().map(|u| (*u, 2)))
            .collect();
        let small = StructuringElement::new(small);
        assert!(bp.contains(&small));

        // Pyramid element: five faces at unit offsets, an empty guard at
        // the sixth (toward the apex).
        let apexward = bp.iter().any(|se| {
            se.origin_value() == 3
                && se.len() == 7
                && se.offsets_with(2).len() == 5
                && se
                    .entries()
                    .filter(|(o, v)| *v == EMPTY && o.norm_inf() == 1)
                    .count()
                    == 1
        });
        assert!(apexward);

        // Each cube here has one critical corner, so exactly the three
        // faces at that corner are replaced: the hexahedron element mixes
        // three near faces with three far ones.
        let mixed = bp.iter().any(|se| {
            se.origin_value() == 3
                && se
                    .offsets_with(2)
                    .iter()
                    .filter(|o| o.norm_inf() == 2)
                    .count()
                    == 3
                && se
                    .offsets_with(2)
                    .iter()
                    .filter(|o| o.norm_inf() == 1)
                    .count()
                    == 3
        });
        assert!(mixed);
    }

    #[test]
    fn bp_lookup_matches_explicit_facets() {
        for pts in [
            vec![[0, 0, 0], [1, 1, 1]],
            vec![[0, 0, 0], [1, 1, 0]],
            vec![[0, 0, 0], [1, 1, 0], [0, 1, 1]],
        ] {
            let (_, outcome, _, p) = pipeline(&pts);
            let bp = derive_bp(&outcome.g_p, &p).unwrap();
            for dim in 1..4 {
                for (key, cell) in p.cells(dim) {
                    let mut got = faces_via_bp(&outcome.g_p, &bp, key).unwrap();
                    got.sort_unstable();
                    assert_eq!(got, cell.facets, "at {key:?}");
                }
            }
        }
    }

    #[test]
    fn bp_on_well_composed_grid_reduces_to_q_elements() {
        let (grid, outcome, q, p) = pipeline(&[[0, 0, 0], [1, 0, 0]]);
        assert_eq!(q, p);
        let bp = derive_bp(&outcome.g_p, &p).unwrap();
        let q_els = q_face_elements();
        for dim in 1..4 {
            for (key, _) in p.cells(dim) {
                let mut via_bp = faces_via_bp(&outcome.g_p, &bp, key).unwrap();
                via_bp.sort_unstable();
                let mut via_q = crate::ecm_grid::faces_of(&grid, key, &q_els).unwrap();
                via_q.sort_unstable();
                assert_eq!(via_bp, via_q);
            }
        }
    }

    #[test]
    fn bp_rejects_vertices() {
        let (_, outcome, _, p) = pipeline(&[[0, 0, 0], [1, 1, 1]]);
        let bp = derive_bp(&outcome.g_p, &p).unwrap();
        let vertex = Point3::new(-2, -2, -2);
        assert!(matches!(
            faces_via_bp(&outcome.g_p, &bp, vertex),
            Err(FitError::NotAPositiveCell { .. })
        ));
    }

    #[test]
    fn dump_is_deterministic_and_sorted() {
        let (_, _, q, _) = pipeline(&[[0, 0, 0]]);
        let d1 = q.dump();
        assert_eq!(d1, q.dump());
        assert!(d1.starts_with("0 "));
        assert_eq!(d1.lines().count(), 27);
    }
}
