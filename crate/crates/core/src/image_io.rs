//! Binary 3D images: the foreground point set, its bounding box, and the
//! two text formats (`voxgrid` dense grids and `x,y,z` coordinate lists).

use crate::error::ParseError;
use crate::point::Point3;
use crate::textio::Tokens;
use std::collections::BTreeSet;

/// A finite set of foreground voxel centers in `Z^3`.
///
/// Each foreground point stands for the unit closed cube centered there.
/// The bounding box is tight on every axis when the foreground is nonempty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    foreground: BTreeSet<Point3>,
    bbox: Option<(Point3, Point3)>,
    /// Number of duplicate coordinate lines collapsed during parsing.
    pub duplicates_collapsed: usize,
}

impl BinaryImage {
    pub fn from_points<I: IntoIterator<Item = Point3>>(points: I) -> Self {
        let mut img = BinaryImage {
            foreground: BTreeSet::new(),
            bbox: None,
            duplicates_collapsed: 0,
        };
        for p in points {
            img.insert(p);
        }
        img
    }

    pub fn empty() -> Self {
        Self::from_points([])
    }

    fn insert(&mut self, p: Point3) {
        if !self.foreground.insert(p) {
            self.duplicates_collapsed += 1;
            return;
        }
        self.bbox = Some(match self.bbox {
            None => (p, p),
            Some((lo, hi)) => (
                Point3([
                    lo.x().min(p.x()),
                    lo.y().min(p.y()),
                    lo.z().min(p.z()),
                ]),
                Point3([
                    hi.x().max(p.x()),
                    hi.y().max(p.y()),
                    hi.z().max(p.z()),
                ]),
            ),
        });
    }

    pub fn foreground(&self) -> &BTreeSet<Point3> {
        &self.foreground
    }

    pub fn contains(&self, p: Point3) -> bool {
        self.foreground.contains(&p)
    }

    pub fn len(&self) -> usize {
        self.foreground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.foreground.is_empty()
    }

    /// Tight bounding box `(min, max)`; `None` when the image is empty.
    pub fn bbox(&self) -> Option<(Point3, Point3)> {
        self.bbox
    }

    /// Translate every foreground point by `d`.
    pub fn translated(&self, d: Point3) -> Self {
        Self::from_points(self.foreground.iter().map(|p| *p + d))
    }
}

/// Parse the dense `voxgrid nx ny nz` format: a header followed by
/// `nx*ny*nz` tokens `0`/`1`, x varying fastest, then y, then z.
/// Voxel `(x,y,z)` is foreground iff its token is `1`; the grid origin is
/// at `(0,0,0)`.
pub fn parse_voxgrid(bytes: &[u8]) -> Result<BinaryImage, ParseError> {
    let mut tok = Tokens::new(bytes);
    let (off, magic) = tok.next().ok_or(ParseError::MalformedHeader {
        offset: 0,
        reason: "empty input".into(),
    })?;
    if magic != "voxgrid" {
        return Err(ParseError::MalformedHeader {
            offset: off,
            reason: format!("expected 'voxgrid', got {magic:?}"),
        });
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        let (off, s) = tok.next().ok_or(ParseError::MalformedHeader {
            offset: bytes.len(),
            reason: "missing dimension".into(),
        })?;
        *d = s.parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| {
            ParseError::MalformedHeader {
                offset: off,
                reason: format!("bad dimension {s:?}"),
            }
        })?;
    }
    let expected = dims[0] * dims[1] * dims[2];
    let mut points = Vec::new();
    let mut count = 0usize;
    while let Some((off, s)) = tok.next() {
        if count == expected {
            return Err(ParseError::CountMismatch {
                expected,
                actual: expected + 1,
            });
        }
        let x = (count % dims[0]) as i32;
        let y = ((count / dims[0]) % dims[1]) as i32;
        let z = (count / (dims[0] * dims[1])) as i32;
        match s {
            "0" => {}
            "1" => points.push(Point3([x, y, z])),
            _ => {
                return Err(ParseError::InvalidToken {
                    offset: off,
                    token: s.into(),
                })
            }
        }
        count += 1;
    }
    if count != expected {
        return Err(ParseError::CountMismatch {
            expected,
            actual: count,
        });
    }
    Ok(BinaryImage::from_points(points))
}

/// Serialize to the `voxgrid` format. The emitted grid spans from the
/// origin, so the image must not contain negative coordinates.
pub fn serialize_voxgrid(img: &BinaryImage) -> Result<String, ParseError> {
    let (lo, hi) = match img.bbox() {
        None => return Ok("voxgrid 1 1 1\n0\n".into()),
        Some(b) => b,
    };
    if lo.0.iter().any(|c| *c < 0) {
        return Err(ParseError::ValueOutOfRange {
            offset: 0,
            value: *lo.0.iter().min().unwrap() as i64,
        });
    }
    let dims = [hi.x() as usize + 1, hi.y() as usize + 1, hi.z() as usize + 1];
    let mut out = format!("voxgrid {} {} {}\n", dims[0], dims[1], dims[2]);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            let mut row = String::with_capacity(2 * dims[0]);
            for x in 0..dims[0] {
                if x > 0 {
                    row.push(' ');
                }
                row.push(if img.contains(Point3([x as i32, y as i32, z as i32])) {
                    '1'
                } else {
                    '0'
                });
            }
            out.push_str(&row);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Parse the coordinate list format: one `x,y,z` integer triple per
/// nonempty line. Duplicates are collapsed and counted.
pub fn parse_coords(bytes: &[u8]) -> Result<BinaryImage, ParseError> {
    let text = String::from_utf8_lossy(bytes);
    let mut img = BinaryImage::empty();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(ParseError::FieldArity {
                line: idx + 1,
                actual: fields.len(),
            });
        }
        let mut c = [0i32; 3];
        for (i, f) in fields.iter().enumerate() {
            c[i] = f
                .trim()
                .parse::<i32>()
                .map_err(|_| ParseError::NonInteger {
                    line: idx + 1,
                    field: f.trim().into(),
                })?;
        }
        img.insert(Point3(c));
    }
    Ok(img)
}

/// Serialize to the coordinate list format, one point per line, sorted.
pub fn serialize_coords(img: &BinaryImage) -> String {
    let mut out = String::new();
    for p in img.foreground() {
        out.push_str(&format!("{p}\n"));
    }
    out
}
