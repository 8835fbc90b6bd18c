use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GameSpec;
use crate::{Error, Result};

/// Names accepted by [`corpus`].
pub const CORPUS_NAMES: [&str; 4] = ["absorbing", "big_match", "cycle2", "matching_pennies"];

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// A named game from the built-in corpus.
pub fn corpus(name: &str) -> Result<GameSpec> {
    match name {
        // one absorbing state paying 0.75
        "absorbing" => GameSpec::new(labels(&["absorbed"]), 1, 1, vec![0.75], vec![1.0]),
        // two states visited alternately, paying 0 then 1
        "cycle2" => GameSpec::new(labels(&["s0", "s1"]), 1, 1, vec![0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0]),
        "matching_pennies" => GameSpec::new(labels(&["s"]), 2, 2, vec![1.0, -1.0, -1.0, 1.0], vec![1.0; 4]),
        "big_match" => big_match(),
        _ => Err(Error::UnknownGame(name.to_string())),
    }
}

/// The top row absorbs: top-left into a state paying 1 forever, top-right
/// into a state paying 0 forever. The bottom row pays 0 or 1 and stays.
fn big_match() -> Result<GameSpec> {
    let (active, one, zero) = (0, 1, 2);
    let mut payoff = vec![0.0; 3 * 4];
    let mut trans = vec![0.0; 3 * 4 * 3];
    let mut set = |k: usize, i: usize, j: usize, g: f64, next: usize| {
        let cell = (k * 2 + i) * 2 + j;
        payoff[cell] = g;
        trans[cell * 3 + next] = 1.0;
    };
    set(active, 0, 0, 1.0, one);
    set(active, 0, 1, 0.0, zero);
    set(active, 1, 0, 0.0, active);
    set(active, 1, 1, 1.0, active);
    for i in 0..2 {
        for j in 0..2 {
            set(one, i, j, 1.0, one);
            set(zero, i, j, 0.0, zero);
        }
    }
    GameSpec::new(labels(&["active", "absorbed_1", "absorbed_0"]), 2, 2, payoff, trans)
}

/// A seeded random game: payoffs uniform on `[-1, 1]`, transition rows
/// drawn uniformly and normalized.
pub fn random_game(seed: u64, n_states: usize, n_p1: usize, n_p2: usize) -> Result<GameSpec> {
    if n_states == 0 || n_p1 == 0 || n_p2 == 0 {
        return Err(Error::Precondition("random game needs nonempty state and action sets"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = n_states * n_p1 * n_p2;
    let payoff: Vec<f64> = (0..cells).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut trans = Vec::with_capacity(cells * n_states);
    for _ in 0..cells {
        let row: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
        let sum: f64 = row.iter().sum();
        trans.extend(row.iter().map(|p| p / sum));
    }
    let names = (0..n_states).map(|k| alloc::format!("k{k}")).collect();
    GameSpec::new(names, n_p1, n_p2, payoff, trans)
}
