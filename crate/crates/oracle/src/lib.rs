//! Brute-force reference computations.
//!
//! Nothing here calls into the numerical routines of `qgp-core`; only its
//! plain data types (gates, circuits) are shared. Inverses, determinants and
//! eigendecompositions are computed with textbook dense algorithms so that
//! agreement with the Cholesky / LAPACK-style paths in the library is
//! meaningful.

pub mod dense;
pub mod gp;
pub mod linalg;
pub mod stats;
