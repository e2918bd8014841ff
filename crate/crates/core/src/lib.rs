//! Numerical Morse homology on explicit manifold models.
//!
//! Pipeline: locate and classify critical points, count gradient flow lines
//! mod 2 by shooting, assemble the GF(2) Morse complex, compute homology and
//! spectral numbers, and build continuation maps between scenes. A separate
//! `fredholm` module checks index formulas for `d/ds + A(s)`.

pub mod algebra;
pub mod continuation;
pub mod error;
pub mod fields;
pub mod flow;
pub mod fredholm;
pub mod critical;
pub mod geometry;
pub mod moduli;
pub mod pipeline;
pub mod scene;

pub use error::{MorseError, Result};
