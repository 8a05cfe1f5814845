#![allow(dead_code)]

pub mod dense_tableau;

use cep_eens::lp::{LpProblem, Sense};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Small random LP with mixed bounds and senses. Integer data keeps the
/// oracle's arithmetic well conditioned.
pub fn random_lp(seed: u64) -> LpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=7);
    let m = rng.gen_range(1..=6);
    let mut lp = LpProblem::new();
    for j in 0..n {
        let kind = rng.gen_range(0..10);
        let lo = rng.gen_range(-5..=3) as f64;
        let (lower, upper) = match kind {
            0..=4 => (lo, lo + rng.gen_range(0..=8) as f64),
            5..=6 => (lo, f64::INFINITY),
            7 => (f64::NEG_INFINITY, lo + 2.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let cost = rng.gen_range(-6..=6) as f64;
        lp.add_var(format!("x{j}"), lower, upper, cost);
    }
    for i in 0..m {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                let a = rng.gen_range(-4..=4) as f64;
                if a != 0.0 {
                    terms.push((cep_eens::lp::VarId(j), a));
                }
            }
        }
        let sense = match rng.gen_range(0..3) {
            0 => Sense::Le,
            1 => Sense::Ge,
            _ => Sense::Eq,
        };
        let rhs = rng.gen_range(-8..=8) as f64;
        lp.add_row(format!("r{i}"), terms, sense, rhs);
    }
    lp
}
