//! Point counts, moments and pointless-curve scans for diagonal Fermat
//! curves `A x^ell + B y^ell = z^ell` over finite fields.

pub mod charsum;
pub mod cli;
pub mod curve;
pub mod error;
pub mod field;
pub mod moments;
pub mod ntheory;
pub mod polyfit;
pub mod scan;
pub mod sweep;

pub use error::{Error, Result};
pub use field::{make_field, make_field_q, FieldElement, FieldSpec};
