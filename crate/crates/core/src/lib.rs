//! Equilibrium solvers for monotone two-player games that are close to zero-sum.

pub mod diagnostics;
pub mod error;
pub mod game;
pub mod icl;
pub mod instances;
pub mod saddle;
pub mod sets;
pub mod vecmat;

pub use error::{Error, Result};
