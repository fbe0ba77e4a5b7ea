//! Finite-element impedance tomography toolkit.
//!
//! The pipeline runs from a triangulated domain ([`mesh`]) through the
//! conductivity forward problem ([`forward`]) to two reconstruction routes:
//! subspace fitting on measurement statistics ([`statistics`], [`subspace`]),
//! which yields a whole family of equally good solutions from a single
//! injection, and stacked multi-pattern, multi-frequency inversion
//! ([`multifreq`]), which pins the conductivity down uniquely. [`phantom`]
//! supplies synthetic ground truths and ensembles.

pub mod error;
pub mod forward;
pub mod keyvalue;
pub mod linalg;
pub mod mesh;
pub mod multifreq;
pub mod phantom;
pub mod statistics;
pub mod subspace;

pub use error::{Error, Result};
