//! Weighted evaluations, Shapley operators and discounted strategies for
//! finite two-player zero-sum stochastic games.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation: file formats, the command line and experiment reports live
//! in the `stochgame` companion crate.
//!
//! The main entry points:
//!
//! - [`Evaluation`]: a probability distribution over stages (finite head plus
//!   an optional geometric tail) together with its shift algebra.
//! - [`GameSpec`]: a validated finite stochastic game.
//! - [`matrix_game::solve`]: a deterministic simplex solver for matrix games.
//! - [`ShapleyOperator`] and [`GameOperator`]: the one-stage operator and its
//!   iterates along an evaluation.
//! - [`values`]: weighted, n-stage and discounted values with certified error
//!   bounds.
//! - [`strategies`]: stage-wise discounted strategies, exact payoffs, best
//!   responses and exploitability.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;

mod error;
pub mod evaluation;
pub mod game;
pub mod math;
pub mod matrix_game;
pub mod operator;
pub mod strategies;
pub mod values;

pub use error::{Error, Result};
pub use evaluation::{BlockDecomposition, DiscountedPiece, Evaluation, GeometricTail};
pub use game::{GameSpec, MixedAction, ValueFunction};
pub use matrix_game::{Matrix, MatrixGameSolution};
pub use operator::{GameOperator, LipschitzOperator, ShapleyOperator};
pub use strategies::MarkovStrategy;

/// Absolute tolerance on the total mass of an evaluation and on the sum of
/// every probability vector.
pub const MASS_TOL: f64 = 1e-12;

/// Default certificate tolerance of the matrix-game solver.
pub const SOLVER_TOL: f64 = 1e-10;
