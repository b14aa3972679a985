//! Finite algebras, their congruence structure, programs (NUDFAs) over them,
//! and a compiler from programs over nilpotent Malcev algebras into
//! bounded-depth modular-counting circuits.

pub mod algebra;
pub mod arith;
pub mod circuit;
pub mod congruence;
pub mod error;
pub mod fixtures;

pub use error::{Error, Result};
pub mod cc;
pub mod cli;
pub mod compiler;
pub mod fieldpoly;
pub mod hardness;
pub mod localizer;
pub mod lowering;
pub mod program;
pub mod solvers;
