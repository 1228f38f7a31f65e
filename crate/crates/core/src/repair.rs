//! Local recoloring that turns the grid of a cubical complex into the grid
//! of its well-composed polyhedral repair.
//!
//! For every critical vertex the vertex itself and each cell of its star
//! get a constant rewrite of their surroundings: the vertex grows into a
//! half-size cube (colors 3/2/1/0 over its radius-1 block), each incident
//! edge into a pyramid or connecting cube (color 3 at the edge point, 2 on
//! the surviving lateral face slots, 1 on the diagonal edge slots), each
//! incident square into a pillow (color 3 at the square point, 2 on the
//! two big-face slots). Incident cubes keep color 3.
//!
//! All writes are constant assignments; overlapping writers always agree,
//! so the result is independent of processing order and of the thread
//! schedule. A debug-mode detector asserts that agreement; release builds
//! skip it.

use crate::ecm_grid::{
    cofaces_of_vertex, neighborhood_offsets, GrayscaleGrid, NeighborhoodKind,
};
use crate::error::WriteConflict;
use crate::point::Point3;
use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One recoloring assignment, tagged with the cell point that caused it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecolorWrite {
    pub target: Point3,
    pub value: i8,
    /// The star cell (or the critical vertex itself) whose rewrite
    /// produced this assignment.
    pub trigger: Point3,
}

/// Result of repairing a grid.
#[derive(Clone, Debug)]
pub struct RepairOutcome {
    /// The repaired grid.
    pub g_p: GrayscaleGrid,
    /// The critical vertex points, sorted.
    pub critical: Vec<Point3>,
    /// Star of each critical vertex: its coface points with dimensions.
    pub stars: BTreeMap<Point3, Vec<(Point3, i8)>>,
    /// Number of points whose color differs from the input grid.
    pub touched: usize,
}

fn in_shell1(s: Point3, center: Point3) -> bool {
    (s - center).norm_inf() == 1
}

fn unit_offsets() -> &'static (Vec<Point3>, Vec<Point3>, Vec<Point3>) {
    static CELLS: std::sync::OnceLock<(Vec<Point3>, Vec<Point3>, Vec<Point3>)> =
        std::sync::OnceLock::new();
    CELLS.get_or_init(|| {
        (
            neighborhood_offsets(NeighborhoodKind::N6, 1),
            neighborhood_offsets(NeighborhoodKind::N12, 1),
            neighborhood_offsets(NeighborhoodKind::N8, 1),
        )
    })
}

/// The writes performed for one critical vertex and its star.
pub fn recolor_writes(p: Point3, star: &[(Point3, i8)]) -> Vec<RecolorWrite> {
    let (n6, n12, n8) = unit_offsets();

    let mut writes = Vec::with_capacity(27 + star.len() * 9);

    // Vertex: grow into a half-size cube.
    writes.push(RecolorWrite {
        target: p,
        value: 3,
        trigger: p,
    });
    for (offsets, value) in [(n6, 2i8), (n12, 1), (n8, 0)] {
        for off in offsets {
            writes.push(RecolorWrite {
                target: p + *off,
                value,
                trigger: p,
            });
        }
    }

    for &(q, dim) in star {
        match dim {
            1 => {
                // Edge: the other endpoint sits at the mirror of p through q.
                let q1 = q * 2 - p;
                writes.push(RecolorWrite {
                    target: q,
                    value: 3,
                    trigger: q,
                });
                for (offsets, value) in [(n6, 2i8), (n12, 1)] {
                    for off in offsets {
                        let s = q + *off;
                        if in_shell1(s, p) || in_shell1(s, q1) {
                            continue;
                        }
                        writes.push(RecolorWrite {
                            target: s,
                            value,
                            trigger: q,
                        });
                    }
                }
            }
            2 => {
                // Square: its four side-edge points sit at +-2 along the
                // in-plane axes (the axes where q - p varies).
                let u = q - p;
                let mut edge_points = Vec::with_capacity(4);
                for axis in 0..3 {
                    if u.0[axis] != 0 {
                        edge_points.push(q + Point3::unit(axis) * 2);
                        edge_points.push(q + Point3::unit(axis) * -2);
                    }
                }
                writes.push(RecolorWrite {
                    target: q,
                    value: 3,
                    trigger: q,
                });
                for off in n6 {
                    let s = q + *off;
                    if edge_points.iter().any(|e| in_shell1(s, *e)) {
                        continue;
                    }
                    writes.push(RecolorWrite {
                        target: s,
                        value: 2,
                        trigger: q,
                    });
                }
            }
            _ => {
                // Cubes keep their color.
            }
        }
    }
    writes
}

fn star_of(grid: &GrayscaleGrid, p: Point3) -> Vec<(Point3, i8)> {
    cofaces_of_vertex(grid, p)
}

fn apply_writes(grid: &mut GrayscaleGrid, writes: &[RecolorWrite]) {
    // Debug builds assert that overlapping writers agree, with a flat
    // shadow buffer so the check stays cheap on large grids.
    #[cfg(debug_assertions)]
    {
        const UNWRITTEN: i8 = -2;
        let (o, d) = (grid.origin(), grid.dims());
        let len = d[0] as usize * d[1] as usize * d[2] as usize;
        let mut seen: Vec<i8> = vec![UNWRITTEN; len];
        for w in writes {
            let rel = w.target - o;
            let idx = (rel.x() + d[0] * (rel.y() + d[1] * rel.z())) as usize;
            let prev = seen[idx];
            assert!(
                prev == UNWRITTEN || prev == w.value,
                "conflicting writes at {:?}: {} vs {}",
                w.target,
                prev,
                w.value
            );
            seen[idx] = w.value;
        }
    }
    for w in writes {
        grid.set(w.target, w.value);
    }
}

/// Repair a cubical-complex grid around the given critical vertices.
///
/// `critical` must be the detection output for `grid`. Stars are read from
/// the unmodified input grid; the writes are then applied in one batch.
pub fn repair_grid(grid: &GrayscaleGrid, critical: &[Point3]) -> RepairOutcome {
    let stars: Vec<(Point3, Vec<(Point3, i8)>)> = {
        #[cfg(feature = "parallel")]
        {
            critical
                .par_iter()
                .map(|p| (*p, star_of(grid, *p)))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            critical.iter().map(|p| (*p, star_of(grid, *p))).collect()
        }
    };

    let writes: Vec<RecolorWrite> = {
        #[cfg(feature = "parallel")]
        {
            stars
                .par_iter()
                .flat_map_iter(|(p, star)| recolor_writes(*p, star))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            stars
                .iter()
                .flat_map(|(p, star)| recolor_writes(*p, star))
                .collect()
        }
    };

    let mut g_p = grid.clone();
    apply_writes(&mut g_p, &writes);

    let touched = grid
        .points()
        .filter(|x| grid.get(*x) != g_p.get(*x))
        .count();

    RepairOutcome {
        g_p,
        critical: critical.to_vec(),
        stars: stars.into_iter().collect(),
        touched,
    }
}

/// Detection and repair fused into one call: the critical set and the
/// stars come out of a single scan over the grid's vertex points.
pub fn detect_and_repair(
    grid: &GrayscaleGrid,
    table: &crate::criticality::CriticalityTable,
) -> RepairOutcome {
    let critical = crate::criticality::detect_critical(grid, table);
    repair_grid(grid, &critical)
}

/// Sequential repair; identical contract and output to [`repair_grid`].
pub fn repair_grid_seq(grid: &GrayscaleGrid, critical: &[Point3]) -> RepairOutcome {
    let stars: Vec<(Point3, Vec<(Point3, i8)>)> =
        critical.iter().map(|p| (*p, star_of(grid, *p))).collect();
    let writes: Vec<RecolorWrite> = stars
        .iter()
        .flat_map(|(p, star)| recolor_writes(*p, star))
        .collect();
    let mut g_p = grid.clone();
    apply_writes(&mut g_p, &writes);
    let touched = grid
        .points()
        .filter(|x| grid.get(*x) != g_p.get(*x))
        .count();
    RepairOutcome {
        g_p,
        critical: critical.to_vec(),
        stars: stars.into_iter().collect(),
        touched,
    }
}

// Deterministic shuffling for the well-definedness audit, independent of
// any external randomness source.
struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }
}

fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = (rng.next() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Replay the recoloring under several random orders of the critical set
/// and of each star, with write-once tracking.
///
/// Returns the first conflicting point if any two writers ever disagree or
/// any two runs produce different grids; on valid input this never fires.
pub fn verify_welldefined(
    grid: &GrayscaleGrid,
    critical: &[Point3],
    orders: usize,
    seed: u64,
) -> Result<(), WriteConflict> {
    let mut rng = SplitMix64(seed);
    let mut reference: Option<GrayscaleGrid> = None;
    for _ in 0..orders.max(1) {
        let mut order = critical.to_vec();
        shuffle(&mut order, &mut rng);
        let mut g_p = grid.clone();
        let mut written: std::collections::HashMap<Point3, i8> =
            std::collections::HashMap::new();
        for p in &order {
            let mut star = star_of(grid, *p);
            shuffle(&mut star, &mut rng);
            for w in recolor_writes(*p, &star) {
                if let Some(prev) = written.insert(w.target, w.value) {
                    if prev != w.value {
                        return Err(WriteConflict {
                            point: w.target,
                            first: prev,
                            second: w.value,
                        });
                    }
                }
                g_p.set(w.target, w.value);
            }
        }
        match &reference {
            None => reference = Some(g_p),
            Some(r) => {
                if *r != g_p {
                    let bad = r
                        .points()
                        .find(|x| r.get(*x) != g_p.get(*x))
                        .expect("grids differ");
                    return Err(WriteConflict {
                        point: bad,
                        first: r.get(bad),
                        second: g_p.get(bad),
                    });
                }
            }
        }
    }
    Ok(())
}
