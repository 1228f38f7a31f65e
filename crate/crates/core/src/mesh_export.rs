//! Triangulated boundary surfaces and Wavefront OBJ output.
//!
//! Boundary 2-cells are fanned from their smallest vertex key. Vertex
//! positions are grid keys divided by four, always exact multiples of a
//! quarter, so two decimal places print them losslessly.

use crate::complex::{boundary_subcomplex, PolyComplex};
use crate::point::Point3;
use std::collections::{BTreeMap, HashMap};

/// A triangle soup with shared, deduplicated vertices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    /// Vertex positions in voxel units.
    pub vertices: Vec<[f64; 3]>,
    /// Zero-based vertex index triples (one-based only in the OBJ text).
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Number of distinct undirected edges and how many triangles border
    /// each.
    pub fn edge_use_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for t in &self.triangles {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                let key = (a.min(b), a.max(b));
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Every undirected edge borders exactly two triangles.
    pub fn is_edge_manifold(&self) -> bool {
        self.edge_use_counts().values().all(|n| *n == 2)
    }

    /// Every vertex's incident triangle edges form a single closed cycle.
    pub fn is_vertex_manifold(&self) -> bool {
        let mut incident: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for t in &self.triangles {
            for i in 0..3 {
                let v = t[i];
                let others = (t[(i + 1) % 3], t[(i + 2) % 3]);
                incident.entry(v).or_default().push(others);
            }
        }
        for (_, wedges) in incident {
            // Opposite edges of the wedge fan must chain into one cycle.
            let mut degree: HashMap<usize, usize> = HashMap::new();
            for (a, b) in &wedges {
                *degree.entry(*a).or_insert(0) += 1;
                *degree.entry(*b).or_insert(0) += 1;
            }
            if degree.values().any(|d| *d != 2) {
                return false;
            }
            let nodes: Vec<usize> = degree.keys().copied().collect();
            let index: HashMap<usize, usize> =
                nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
            let mut parent: Vec<usize> = (0..nodes.len()).collect();
            fn find(parent: &mut Vec<usize>, i: usize) -> usize {
                if parent[i] != i {
                    let r = find(parent, parent[i]);
                    parent[i] = r;
                }
                parent[i]
            }
            for (a, b) in &wedges {
                let (ra, rb) = (find(&mut parent, index[a]), find(&mut parent, index[b]));
                parent[ra] = rb;
            }
            let root = find(&mut parent, 0);
            if (1..nodes.len()).any(|i| find(&mut parent, i) != root) {
                return false;
            }
        }
        true
    }

    /// Number of connected components of the triangle graph.
    pub fn components(&self) -> usize {
        if self.triangles.is_empty() {
            return 0;
        }
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let r = find(parent, parent[i]);
                parent[i] = r;
            }
            parent[i]
        }
        for t in &self.triangles {
            for i in 1..3 {
                let (a, b) = (find(&mut parent, t[0]), find(&mut parent, t[i]));
                parent[a] = b;
            }
        }
        let mut roots = std::collections::HashSet::new();
        for t in &self.triangles {
            roots.insert(find(&mut parent, t[0]));
        }
        roots.len()
    }
}

/// Triangulate the boundary subcomplex: each boundary 2-cell's cycle is
/// fanned from its lexicographically smallest vertex key; vertices are
/// deduplicated by key and emitted in key order.
pub fn triangulate_boundary(complex: &PolyComplex) -> TriMesh {
    let boundary = boundary_subcomplex(complex);

    let mut vertex_ids: BTreeMap<Point3, usize> = BTreeMap::new();
    for (_, cell) in boundary.cells(2) {
        for v in cell.cycle.as_ref().expect("boundary 2-cells carry cycles") {
            vertex_ids.insert(*v, 0);
        }
    }
    for (i, (_, id)) in vertex_ids.iter_mut().enumerate() {
        *id = i;
    }

    let mut triangles = Vec::new();
    for (key, cell) in boundary.cells(2) {
        let cycle = cell.cycle.as_ref().unwrap();
        assert!(cycle.len() >= 3, "degenerate cycle at {key:?}");
        // Cycles are stored with their smallest vertex first.
        let anchor = vertex_ids[&cycle[0]];
        for i in 1..cycle.len() - 1 {
            triangles.push([anchor, vertex_ids[&cycle[i]], vertex_ids[&cycle[i + 1]]]);
        }
    }

    let vertices: Vec<[f64; 3]> = vertex_ids
        .keys()
        .map(|k| {
            [
                k.x() as f64 / 4.0,
                k.y() as f64 / 4.0,
                k.z() as f64 / 4.0,
            ]
        })
        .collect();
    TriMesh {
        vertices,
        triangles,
    }
}

/// Emit the OBJ text: `v` lines with fixed two-decimal coordinates, then
/// one-based `f` lines, in deterministic order.
pub fn write_obj(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        out.push_str(&format!("v {:.2} {:.2} {:.2}\n", v[0], v[1], v[2]));
    }
    for t in &mesh.triangles {
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    out
}
