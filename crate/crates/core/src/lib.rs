//! Multibump sign-changing solutions of
//! `-Δu = a⁺[λu + f(x,u)] - μ a⁻ g(x,u)` with Dirichlet boundary,
//! computed by energy descent over a Nehari-type set built from orthogonal
//! components of the field.

pub mod decomposition;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod nehari;
pub mod operators;
pub mod par;
pub mod solver;

pub use error::{Error, Result};
