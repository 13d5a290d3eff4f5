//! Computational laboratory for sparse equidistribution of unipotent orbits
//! on the modular surface `SL(2,R)/SL(2,Z)`.
//!
//! The crate is organized bottom-up:
//!
//! - [`group`]: arbitrary-precision matrix Lie group arithmetic (products,
//!   exponentials, adjoint matrices, Cartan and Iwasawa decompositions).
//! - [`modular`]: reduction to the fundamental domain, the frame metric on the
//!   unit tangent bundle, injectivity radius, Haar sampling and test functions.
//! - [`orbit`]: exponentially sparse horocycle orbits with automatic precision.
//! - [`measure`]: empirical measures, weak-* discrepancy and unipotent defect.
//! - [`density`]: upper densities, shift and weak-type maximal inequalities,
//!   and the density-one subsequence merge.
//! - [`sl2`]: exact rational Jacobson–Morozov triples and weight decompositions.
//! - [`ratner`]: unipotent limits of conjugated sequences, correlation decay,
//!   the law of large numbers experiment and ball-overlap estimates.

pub mod density;
pub mod error;
pub mod exact;
pub mod group;
pub mod measure;
pub mod modular;
pub mod mp;
pub mod orbit;
pub mod ratner;
pub mod rng;
pub mod sl2;

pub use error::{Error, Result};
