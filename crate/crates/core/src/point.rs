//! Integer lattice points and axis helpers shared by every module.
//!
//! Two unit conventions coexist: voxel coordinates (one unit per voxel
//! center) and grid coordinates (one unit per quarter cell, i.e. voxel
//! coordinate times four). `Point3` is used for both; the scale is part of
//! each function's contract, not the type.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// A point of the integer lattice `Z^3`, ordered lexicographically.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Point3(pub [i32; 3]);

impl Point3 {
    pub const ZERO: Point3 = Point3([0, 0, 0]);

    pub fn new(x: i32, y: i32, z: i32) -> Self {
        Point3([x, y, z])
    }

    pub fn x(&self) -> i32 {
        self.0[0]
    }

    pub fn y(&self) -> i32 {
        self.0[1]
    }

    pub fn z(&self) -> i32 {
        self.0[2]
    }

    /// Unit vector along axis 0, 1 or 2.
    pub fn unit(axis: usize) -> Self {
        let mut c = [0; 3];
        c[axis] = 1;
        Point3(c)
    }

    /// Chebyshev (L-infinity) norm.
    pub fn norm_inf(&self) -> i32 {
        self.0.iter().map(|c| c.abs()).max().unwrap()
    }

    /// Number of nonzero coordinates.
    pub fn support(&self) -> usize {
        self.0.iter().filter(|c| **c != 0).count()
    }

    pub fn map<F: Fn(i32) -> i32>(&self, f: F) -> Self {
        Point3([f(self.0[0]), f(self.0[1]), f(self.0[2])])
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3([
            self.0[0] + rhs.0[0],
            self.0[1] + rhs.0[1],
            self.0[2] + rhs.0[2],
        ])
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3([
            self.0[0] - rhs.0[0],
            self.0[1] - rhs.0[1],
            self.0[2] - rhs.0[2],
        ])
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<i32> for Point3 {
    type Output = Point3;
    fn mul(self, k: i32) -> Point3 {
        Point3([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }
}

impl fmt::Debug for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0[0], self.0[1], self.0[2])
    }
}

impl fmt::Display for Point3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

impl From<[i32; 3]> for Point3 {
    fn from(c: [i32; 3]) -> Self {
        Point3(c)
    }
}

/// The six signed axis unit vectors, in a fixed order (+x, -x, +y, -y, +z, -z).
pub fn signed_units() -> [Point3; 6] {
    [
        Point3([1, 0, 0]),
        Point3([-1, 0, 0]),
        Point3([0, 1, 0]),
        Point3([0, -1, 0]),
        Point3([0, 0, 1]),
        Point3([0, 0, -1]),
    ]
}

/// The eight corner directions of a cube, indexed so that
/// `bit = (dx>0) + 2*(dy>0) + 4*(dz>0)`.
pub fn corner_directions() -> [Point3; 8] {
    let mut out = [Point3::ZERO; 8];
    for (bit, d) in out.iter_mut().enumerate() {
        *d = Point3([
            if bit & 1 != 0 { 1 } else { -1 },
            if bit & 2 != 0 { 1 } else { -1 },
            if bit & 4 != 0 { 1 } else { -1 },
        ]);
    }
    out
}
