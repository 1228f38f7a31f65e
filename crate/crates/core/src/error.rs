//! Error types for parsing, element matching and complex construction.

use crate::point::Point3;
use thiserror::Error;

/// Errors raised while parsing input files.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: String },
    #[error("invalid token {token:?} at byte {offset}")]
    InvalidToken { offset: usize, token: String },
    #[error("expected {expected} values, got {actual}")]
    CountMismatch { expected: usize, actual: usize },
    #[error("value {value} out of range at byte {offset}")]
    ValueOutOfRange { offset: usize, value: i64 },
    #[error("expected 3 fields, got {actual} at line {line}")]
    FieldArity { line: usize, actual: usize },
    #[error("non-integer field {field:?} at line {line}")]
    NonInteger { line: usize, field: String },
}

/// Errors raised by structuring-element queries against a grid.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FitError {
    #[error("no structuring element fits at {0:?}")]
    NoElementFits(Point3),
    #[error("multiple structuring elements fit at {0:?}")]
    AmbiguousFit(Point3),
    #[error("point {point:?} has color {color}, expected a cell of dimension >= 1")]
    NotAPositiveCell { point: Point3, color: i8 },
}

/// Errors raised while assembling or validating a polyhedral complex.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ComplexError {
    #[error("cell {cell:?} names facet {facet:?} which is absent")]
    DanglingFacet { cell: Point3, facet: Point3 },
    #[error("duplicate cell key {0:?}")]
    DuplicateKey(Point3),
    #[error("unknown cell key {0:?}")]
    UnknownKey(Point3),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Errors raised while deriving or validating the element set of a repaired grid.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum BpError {
    #[error("guard offset {offset:?} of cell {cell:?} reads {read}, expected -1")]
    GuardNotEmpty {
        cell: Point3,
        offset: Point3,
        read: i8,
    },
    #[error("cells {first:?} and {second:?} produce inseparable local patterns")]
    AmbiguityUnresolvable { first: Point3, second: Point3 },
    #[error("element lookup at {cell:?} recovered {got:?}, complex lists {want:?}")]
    FacetMismatch {
        cell: Point3,
        got: Vec<Point3>,
        want: Vec<Point3>,
    },
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// A conflicting recoloring detected while auditing the repair procedure.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("point {point:?} assigned both {first} and {second}")]
pub struct WriteConflict {
    pub point: Point3,
    pub first: i8,
    pub second: i8,
}
