//! Path transforms and explicit laws for Brownian motion conditioned to stay
//! in the unit interval, viewed through the affine alcove picture.
//!
//! The crate is organized around five layers:
//!
//! - [`path`]: discretized real paths, the Pitman/Levy wall transforms, their
//!   alternating iteration and string-parameter extraction, time inversion.
//! - [`cone`]: affine and dihedral root data, exact samplers for the limiting
//!   string-parameter laws, cone membership tests.
//! - [`laws`]: closed-form oracles — the theta-type harmonic function, killed
//!   and conditioned interval kernels, space-time cone kernels, and the
//!   explicit distributions of the limit weight and first string parameter.
//! - [`mc`]: Monte Carlo experiments tying the transform pipeline to the
//!   closed-form laws, plus the statistics toolkit.
//! - [`crystal`]: exact combinatorics — anti-lecture-hall compositions,
//!   string-coordinate crystal enumeration, q-series identities and
//!   Weyl–Kac / Verma characters.

pub mod cone;
pub mod crystal;
pub mod error;
pub mod laws;
pub mod mc;
pub mod numeric;
pub mod path;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
