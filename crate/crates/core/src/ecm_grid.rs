//! The grayscale-grid encoding of cell complexes.
//!
//! Every cell of a complex is represented by one lattice point: four grid
//! units per voxel unit, so the point is the cell barycenter scaled by
//! four. The color stored at a point is the dimension of the cell it
//! represents (`-1` where no cell lives). Boundary relations are not
//! stored; they are recovered by matching small structuring elements
//! against the colors around a point.
//!
//! For the cubical complex of a binary image the layout is rigid: cubes
//! sit at points with all coordinates `0 mod 4`, squares have one
//! coordinate `2 mod 4`, edges two, vertices three. The repair step later
//! fills odd coordinates with the cells it creates.

use crate::error::{FitError, ParseError};
use crate::image_io::BinaryImage;
use crate::point::{corner_directions, Point3};
use crate::textio::Tokens;
use std::collections::BTreeMap;

/// Colors a grid stores: `-1` (empty) or a cell dimension `0..=3`.
pub const EMPTY: i8 = -1;

/// A bounded dense field of cell colors over `Z^3`, `-1` outside its box.
#[derive(Clone, PartialEq, Eq)]
pub struct GrayscaleGrid {
    origin: Point3,
    dims: [i32; 3],
    values: Vec<i8>,
}

impl GrayscaleGrid {
    /// An all-empty grid covering `[origin, origin + dims)`.
    pub fn filled_empty(origin: Point3, dims: [i32; 3]) -> Self {
        assert!(dims.iter().all(|d| *d > 0), "grid dims must be positive");
        let len = dims[0] as usize * dims[1] as usize * dims[2] as usize;
        GrayscaleGrid {
            origin,
            dims,
            values: vec![EMPTY; len],
        }
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn dims(&self) -> [i32; 3] {
        self.dims
    }

    fn index(&self, p: Point3) -> Option<usize> {
        let d = p - self.origin;
        if d.x() < 0 || d.y() < 0 || d.z() < 0 {
            return None;
        }
        if d.x() >= self.dims[0] || d.y() >= self.dims[1] || d.z() >= self.dims[2] {
            return None;
        }
        Some(
            (d.x() + self.dims[0] * (d.y() + self.dims[1] * d.z())) as usize,
        )
    }

    /// Color at `p`; reads outside the stored box return `-1`.
    pub fn get(&self, p: Point3) -> i8 {
        match self.index(p) {
            Some(i) => self.values[i],
            None => EMPTY,
        }
    }

    /// Store a color. Panics outside the box or outside `{-1,0,1,2,3}`.
    pub fn set(&mut self, p: Point3, v: i8) {
        assert!((-1..=3).contains(&v), "color {v} out of range");
        let i = self
            .index(p)
            .unwrap_or_else(|| panic!("write at {p:?} outside grid box"));
        self.values[i] = v;
    }

    /// Iterate all stored points in x-fastest order.
    pub fn points(&self) -> impl Iterator<Item = Point3> + '_ {
        let (o, d) = (self.origin, self.dims);
        (0..d[2]).flat_map(move |z| {
            (0..d[1]).flat_map(move |y| {
                (0..d[0]).map(move |x| o + Point3([x, y, z]))
            })
        })
    }

    /// Points holding a cell, i.e. color `>= 0`.
    pub fn cell_points(&self) -> impl Iterator<Item = Point3> + '_ {
        self.points().filter(move |p| self.get(*p) >= 0)
    }

    /// Number of stored points with color `>= 0`.
    pub fn cell_count(&self) -> usize {
        self.values.iter().filter(|v| **v >= 0).count()
    }

    /// Alternating color sum `sum((-1)^color)` over cells: the Euler
    /// characteristic of the encoded complex, from colors alone.
    pub fn euler_from_colors(&self) -> i64 {
        self.values
            .iter()
            .filter(|v| **v >= 0)
            .map(|v| if v % 2 == 0 { 1i64 } else { -1i64 })
            .sum()
    }

    pub(crate) fn raw_values(&self) -> &[i8] {
        &self.values
    }
}

impl std::fmt::Debug for GrayscaleGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "GrayscaleGrid(origin {:?}, dims {:?}, {} cells)",
            self.origin,
            self.dims,
            self.cell_count()
        )
    }
}

/// Residue class of a grid point: the dimension its position admits.
///
/// Counting coordinates congruent to `0 mod 4` classifies every point of
/// the lattice: 3 such coordinates for cubes down to 0 for the blocks
/// around vertices. Positions in class `d` only ever hold colors written
/// by a cell of original dimension `d`.
pub fn residue_class(p: Point3) -> i8 {
    p.0.iter().filter(|c| (*c).rem_euclid(4) == 0).count() as i8
}

/// A finite offset-to-color map containing the origin. Fitting one
/// against a grid recovers boundary relations.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StructuringElement {
    entries: BTreeMap<Point3, i8>,
}

impl StructuringElement {
    pub fn new<I: IntoIterator<Item = (Point3, i8)>>(entries: I) -> Self {
        let entries: BTreeMap<Point3, i8> = entries.into_iter().collect();
        assert!(
            entries.contains_key(&Point3::ZERO),
            "structuring element must contain the origin"
        );
        StructuringElement { entries }
    }

    pub fn origin_value(&self) -> i8 {
        self.entries[&Point3::ZERO]
    }

    pub fn entries(&self) -> impl Iterator<Item = (Point3, i8)> + '_ {
        self.entries.iter().map(|(p, v)| (*p, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the origin is always present
    }

    pub fn get(&self, offset: Point3) -> Option<i8> {
        self.entries.get(&offset).copied()
    }

    /// Offsets carrying a given value, sorted.
    pub fn offsets_with(&self, value: i8) -> Vec<Point3> {
        self.entries
            .iter()
            .filter(|(_, v)| **v == value)
            .map(|(p, _)| *p)
            .collect()
    }

    /// Offsets one dimension below the origin value: the facet slots.
    pub fn facet_offsets(&self) -> Vec<Point3> {
        self.offsets_with(self.origin_value() - 1)
    }
}

impl std::fmt::Debug for StructuringElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SE{{")?;
        for (i, (p, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p:?}:{v}")?;
        }
        write!(f, "}}")
    }
}

/// True iff every entry of `se` matches the grid colors around `p`.
pub fn fits(grid: &GrayscaleGrid, p: Point3, se: &StructuringElement) -> bool {
    se.entries().all(|(q, v)| grid.get(p + q) == v)
}

/// The neighborhood families used by the recoloring operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborhoodKind {
    /// Axis endpoints: 6 points.
    N6,
    /// In-plane diagonal points: 12.
    N12,
    /// Full diagonal corners: 8.
    N8,
    /// Full Chebyshev shell at radius `l`: `(2l+1)^3 - (2l-1)^3` points.
    Shell,
    /// Solid Chebyshev ball of radius `l`: `(2l+1)^3` points.
    Box,
}

/// Offsets of the neighborhood of the given kind and radius around the origin.
pub fn neighborhood_offsets(kind: NeighborhoodKind, radius: i32) -> Vec<Point3> {
    assert!(radius >= 1);
    let l = radius;
    let mut out = Vec::new();
    match kind {
        NeighborhoodKind::N6 => {
            for axis in 0..3 {
                for s in [-l, l] {
                    out.push(Point3::unit(axis) * s);
                }
            }
        }
        NeighborhoodKind::N12 => {
            for zero_axis in 0..3 {
                let (a, b) = match zero_axis {
                    0 => (1, 2),
                    1 => (0, 2),
                    _ => (0, 1),
                };
                for sa in [-l, l] {
                    for sb in [-l, l] {
                        out.push(Point3::unit(a) * sa + Point3::unit(b) * sb);
                    }
                }
            }
        }
        NeighborhoodKind::N8 => {
            for d in corner_directions() {
                out.push(d * l);
            }
        }
        NeighborhoodKind::Shell | NeighborhoodKind::Box => {
            for x in -l..=l {
                for y in -l..=l {
                    for z in -l..=l {
                        let p = Point3([x, y, z]);
                        if matches!(kind, NeighborhoodKind::Shell) && p.norm_inf() != l {
                            continue;
                        }
                        out.push(p);
                    }
                }
            }
        }
    }
    out.sort();
    out
}

/// The neighborhood translated to `p`.
pub fn neighborhood(kind: NeighborhoodKind, radius: i32, p: Point3) -> Vec<Point3> {
    neighborhood_offsets(kind, radius)
        .into_iter()
        .map(|q| q + p)
        .collect()
}

/// Build the grid encoding of the cubical complex of `image`.
///
/// Each foreground voxel center `(i,j,k)` contributes color 3 at
/// `(4i,4j,4k)`, 2 at the six face barycenters, 1 at the twelve edge
/// barycenters and 0 at the eight corner barycenters, all scaled by four.
/// The box covers the image bounding box scaled by four with a margin of
/// three per side, leaving room for the repair step's new cells.
pub fn build_q_grid(image: &BinaryImage) -> GrayscaleGrid {
    let (lo, hi) = match image.bbox() {
        None => return GrayscaleGrid::filled_empty(Point3::ZERO, [1, 1, 1]),
        Some(b) => b,
    };
    let origin = lo * 4 - Point3([3, 3, 3]);
    let dims = [
        4 * (hi.x() - lo.x()) + 7,
        4 * (hi.y() - lo.y()) + 7,
        4 * (hi.z() - lo.z()) + 7,
    ];
    let mut grid = GrayscaleGrid::filled_empty(origin, dims);
    for &v in image.foreground() {
        let c = v * 4;
        for dx in [-2i32, 0, 2] {
            for dy in [-2i32, 0, 2] {
                for dz in [-2i32, 0, 2] {
                    let off = Point3([dx, dy, dz]);
                    let dim = 3 - off.support() as i8;
                    grid.set(c + off, dim);
                }
            }
        }
    }
    grid
}

/// The seven face-matching elements for cubical-complex grids.
///
/// Three rotations of the edge element (origin 1, endpoints at `+-2`
/// along the edge axis, guards at `+-1`), three of the square element
/// (origin 2, side edges at the four in-plane `+-2` offsets, guards at
/// the in-plane `+-1` offsets), and one cube element (origin 3, faces at
/// all six `+-2` axis offsets, guards at `+-1`).
pub fn q_face_elements() -> Vec<StructuringElement> {
    let mut out = Vec::with_capacity(7);
    // Edge elements, one per axis the edge runs along.
    for axis in 0..3 {
        let u = Point3::unit(axis);
        out.push(StructuringElement::new([
            (Point3::ZERO, 1),
            (u, EMPTY),
            (-u, EMPTY),
            (u * 2, 0),
            (u * 2 * -1, 0),
        ]));
    }
    // Square elements, one per normal axis.
    for normal in 0..3 {
        let (a, b) = match normal {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let mut entries = vec![(Point3::ZERO, 2i8)];
        for axis in [a, b] {
            let u = Point3::unit(axis);
            entries.push((u, EMPTY));
            entries.push((-u, EMPTY));
            entries.push((u * 2, 1));
            entries.push((u * 2 * -1, 1));
        }
        out.push(StructuringElement::new(entries));
    }
    // Cube element.
    let mut entries = vec![(Point3::ZERO, 3i8)];
    for axis in 0..3 {
        let u = Point3::unit(axis);
        entries.push((u, EMPTY));
        entries.push((-u, EMPTY));
        entries.push((u * 2, 2));
        entries.push((u * 2 * -1, 2));
    }
    out.push(StructuringElement::new(entries));
    out
}

/// Facets of the cell at `p`: the unique fitting element's facet offsets
/// translated by `p`. Exactly one element with matching origin color must
/// fit; zero or several signal a grid inconsistent with the element set.
pub fn faces_of(
    grid: &GrayscaleGrid,
    p: Point3,
    elements: &[StructuringElement],
) -> Result<Vec<Point3>, FitError> {
    let color = grid.get(p);
    if color < 1 {
        return Err(FitError::NotAPositiveCell { point: p, color });
    }
    let mut found: Option<&StructuringElement> = None;
    for se in elements {
        if se.origin_value() == color && fits(grid, p, se) {
            if found.is_some() {
                return Err(FitError::AmbiguousFit(p));
            }
            found = Some(se);
        }
    }
    let se = found.ok_or(FitError::NoElementFits(p))?;
    Ok(se.facet_offsets().into_iter().map(|q| q + p).collect())
}

/// Cofaces of the vertex at `p` (color 0), as `(point, dimension)` pairs.
///
/// For each of the 26 directions `u`, the coface element reads `-1` at
/// `p+u` and the matching dimension at `p+2u`: 1 along the axes, 2 along
/// in-plane diagonals, 3 along full diagonals.
pub fn cofaces_of_vertex(grid: &GrayscaleGrid, p: Point3) -> Vec<(Point3, i8)> {
    debug_assert_eq!(grid.get(p), 0, "cofaces_of_vertex requires a vertex point");
    static SHELL: std::sync::OnceLock<Vec<(Point3, i8)>> = std::sync::OnceLock::new();
    let shell = SHELL.get_or_init(|| {
        neighborhood_offsets(NeighborhoodKind::Shell, 1)
            .into_iter()
            .map(|u| (u, u.support() as i8))
            .collect()
    });
    let mut out = Vec::new();
    for &(u, dim) in shell {
        if grid.get(p + u) == EMPTY && grid.get(p + u * 2) == dim {
            out.push((p + u * 2, dim));
        }
    }
    out.sort();
    out
}

/// Serialize a grid: header `ecmgrid ox oy oz nx ny nz`, then the colors
/// in x-fastest order.
pub fn dump_grid(grid: &GrayscaleGrid) -> String {
    let o = grid.origin();
    let d = grid.dims();
    let mut out = format!(
        "ecmgrid {} {} {} {} {} {}\n",
        o.x(),
        o.y(),
        o.z(),
        d[0],
        d[1],
        d[2]
    );
    let vals = grid.raw_values();
    let row = d[0] as usize;
    for chunk in vals.chunks(row) {
        let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Parse the `ecmgrid` format back into a grid; lossless round-trip.
pub fn load_grid(bytes: &[u8]) -> Result<GrayscaleGrid, ParseError> {
    let mut tok = Tokens::new(bytes);
    let (off, magic) = tok.next().ok_or(ParseError::MalformedHeader {
        offset: 0,
        reason: "empty input".into(),
    })?;
    if magic != "ecmgrid" {
        return Err(ParseError::MalformedHeader {
            offset: off,
            reason: format!("expected 'ecmgrid', got {magic:?}"),
        });
    }
    let mut header = [0i64; 6];
    for h in &mut header {
        let (off, s) = tok.next().ok_or(ParseError::MalformedHeader {
            offset: bytes.len(),
            reason: "missing header field".into(),
        })?;
        *h = s.parse::<i64>().map_err(|_| ParseError::MalformedHeader {
            offset: off,
            reason: format!("bad header field {s:?}"),
        })?;
    }
    let dims = [header[3], header[4], header[5]];
    if dims.iter().any(|d| *d <= 0 || *d > i32::MAX as i64) {
        return Err(ParseError::MalformedHeader {
            offset: 0,
            reason: format!("bad dimensions {dims:?}"),
        });
    }
    let origin = Point3([header[0] as i32, header[1] as i32, header[2] as i32]);
    let mut grid =
        GrayscaleGrid::filled_empty(origin, [dims[0] as i32, dims[1] as i32, dims[2] as i32]);
    let expected = (dims[0] * dims[1] * dims[2]) as usize;
    let mut count = 0usize;
    while let Some((off, s)) = tok.next() {
        if count == expected {
            return Err(ParseError::CountMismatch {
                expected,
                actual: expected + 1,
            });
        }
        let v = s.parse::<i64>().map_err(|_| ParseError::InvalidToken {
            offset: off,
            token: s.into(),
        })?;
        if !(-1..=3).contains(&v) {
            return Err(ParseError::ValueOutOfRange {
                offset: off,
                value: v,
            });
        }
        grid.values[count] = v as i8;
        count += 1;
    }
    if count != expected {
        return Err(ParseError::CountMismatch {
            expected,
            actual: count,
        });
    }
    Ok(grid)
}
