//! Gaussian-polynomial algebra over discrete sources: the perturbative
//! generating functional, its normalization, n-point Green's functions, and
//! the source-functional form of the S-matrix identities.
//!
//! Every object is a polynomial carried against the implicit factor
//! `exp(-(i/2) J^T Delta J)`. Functional derivatives `(1/i) d/dJ_x` act by the
//! product rule on the polynomial and on the Gaussian, so Z[J] at any order is
//! built by repeated application of a single derivative rule.

mod identities;
mod poly;
mod series;

use thiserror::Error;

pub use identities::{
    apply_c, b_power, verify_c_equals_b, verify_kd_identity, CbCase, CbReport, KdReport, OnShellRule,
    IDENTITY_TOLERANCE,
};
pub use poly::{serialize_complex, serialize_complex_vec, GaussianPolynomial, Monomial, SourcePolynomial};
pub use series::{
    green, invert_series, smatrix_series, z_series, z_series_with, FieldPolynomial, GreenResult, PerturbativeSeries,
    SeriesOptions, DEFAULT_ORDER_CAP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenfunError {
    #[error("site {site} is out of range for {size} sites")]
    InvalidSite { site: usize, size: usize },
    #[error("formal field symbols present; evaluate through the operator route instead")]
    FieldsPresent,
    #[error("polynomials carry different propagators or implicit factors")]
    PropagatorMismatch,
    #[error("expected {expected} entries, got {got}")]
    SourceLength { expected: usize, got: usize },
    #[error("order {requested} exceeds the configured cap of {cap}")]
    OrderCapExceeded { requested: usize, cap: usize },
    #[error("vacuum amplitude vanishes at order zero; cannot normalize")]
    VanishingVacuum,
    #[error("{0}")]
    Unsupported(String),
}
