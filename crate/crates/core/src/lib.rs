//! Hamiltonian teleparallel gravity on a periodic 3-torus, written in
//! differential forms.

pub mod bundle;
pub mod dynamics;
pub mod error;
pub mod exterior;
pub mod fields;
pub mod linalg;
pub mod par;
pub mod smearing;
pub mod teleparallel;
pub mod variational;

pub use error::{Error, Result};
