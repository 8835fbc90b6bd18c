//! File formats, experiment runners and reports on top of
//! [`stochgame_core`].
//!
//! Every runner is deterministic given its inputs: random draws come from
//! seeded ChaCha streams and parallel work is collected in input order.

pub mod counterexample;
pub mod io;
pub mod properties;
pub mod solve;
pub mod sweep;

pub use stochgame_core as core;
