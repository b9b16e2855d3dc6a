//! Gradient-based learning in n-player continuous games.
//!
//! Each player `i` controls `x_i ∈ R^{d_i}` and minimizes its own cost
//! `f_i(x_i, x_{-i})`. Stacking the individual gradients gives the game form
//! `ω(x) = (D_1 f_1, …, D_n f_n)`; simultaneous gradient play iterates
//! `x_i ← x_i − γ_i D_i f_i(x)`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basin;
pub mod dynamics;
pub mod equilibrium;
pub mod games;
pub mod error;
pub mod experiment;
pub mod game;
pub mod linalg;
pub mod lq;
pub mod sampling;

pub use error::{Error, Result};
pub use game::{DerivativeMethod, Game, GameBuilder, JacobianReport, JointPoint};
