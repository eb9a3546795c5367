//! Spectral analysis of half-line Dirac (Zakharov-Shabat) operators whose data
//! is a sum of decaying oscillatory terms of Wigner-von Neumann type.
//!
//! The crate is organised around the pieces of that analysis:
//!
//! * [`operator_data`] represents and evaluates the operator data
//!   `phi(x) = sum_j c_j exp(-i phi_j x) gamma_j(x)`.
//! * [`recursion`] evaluates the critical-point coefficient functions
//!   `f_{I,K}`, `g_{I,K}`, `h_I`, the symmetric product and their identities.
//! * [`exceptional_set`] enumerates the finite sets of energies that can carry
//!   embedded eigenvalues for finitely many frequencies.
//! * [`prufer`] integrates the eigenequation, directly and in Pruefer
//!   variables, and reports boundedness/subordinacy diagnostics.
//! * [`eigen_construct`] builds data with an embedded eigenvalue and checks the
//!   predicted decay rate.
//! * [`infinite_type`] handles truncated small-divisor sums, Catalan numbers
//!   and the Hausdorff-dimension bound for infinitely many terms.
//! * [`cli`] is the `wvn` command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod eigen_construct;
pub mod error;
pub mod exceptional_set;
pub mod infinite_type;
pub mod operator_data;
pub mod prufer;
pub mod recursion;

pub use error::{Error, ErrorClass, Result};
pub use num_complex::Complex64;
