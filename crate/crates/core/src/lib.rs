//! Graphical Lagrangian mean curvature flow of potentials on the flat torus
//! `[0, 2π)ⁿ`.
//!
//! The potential `u = ½ xᵀAx + v(x)` evolves by `∂u/∂t = θ(D²u)`, where
//! `θ = Σ arctan λᵢ` is the Lagrangian angle of the graph of `∇u`. The crate
//! provides the pointwise eigenvalue algebra ([`spectrum`]), periodic
//! finite-difference fields ([`field`]), first-principles tensor constructions
//! used as oracles ([`geometry`]), explicit time stepping ([`flow`]), global
//! diagnostics with monotonicity checks ([`monitors`]), initial-data
//! generators ([`scenarios`]) and the batch front end ([`cli`]).

pub mod cli;
pub mod error;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod monitors;
pub mod oracles;
pub mod rng;
pub mod scenarios;
pub mod spectrum;

pub use error::{Error, Result};
