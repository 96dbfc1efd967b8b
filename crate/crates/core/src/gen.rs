//! Seeded random economies.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{default_agent_ids, default_room_ids, Economy, Preference};
use crate::rational::Rational;

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub n: usize,
    /// Menu size, counting zero.
    pub k: usize,
    pub max_value: i64,
    pub max_budget: i64,
    pub rent_range: (i64, i64),
}

impl GenConfig {
    pub fn new(n: usize, k: usize) -> Self {
        GenConfig { n, k, max_value: 100, max_budget: 100, rent_range: (-50, 300) }
    }
}

fn rho_pool() -> Vec<Rational> {
    vec![Rational::new(1, 2), Rational::one(), Rational::from(2)]
}

pub fn random_economy(cfg: &GenConfig, seed: u64) -> Economy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut menu = vec![Rational::zero()];
    let mut pool = rho_pool();
    pool.shuffle(&mut rng);
    menu.extend(pool.into_iter().take(cfg.k.saturating_sub(1)));
    menu.sort();
    let prefs = (0..cfg.n)
        .map(|_| {
            let values = (0..cfg.n).map(|_| Rational::from(rng.gen_range(0..=cfg.max_value))).collect();
            let budget = Rational::from(rng.gen_range(0..=cfg.max_budget));
            let rho = menu[rng.gen_range(0..menu.len())].clone();
            Preference { values, budget, rho }
        })
        .collect();
    let m = Rational::from(rng.gen_range(cfg.rent_range.0..=cfg.rent_range.1));
    let rho_bar = menu.last().unwrap().clone();
    Economy::new(default_agent_ids(cfg.n), default_room_ids(cfg.n), prefs, m, menu, rho_bar)
        .expect("generated economies are valid")
}

/// The suite's standard mix: `count` economies cycling `n` over 2..=5 and
/// `k` over 1..=3, seeded from `base`.
pub fn standard_suite(count: usize, base: u64) -> Vec<(u64, Economy)> {
    (0..count)
        .map(|c| {
            let n = 2 + c % 4;
            let k = 1 + (c / 4) % 3;
            let seed = base + c as u64;
            (seed, random_economy(&GenConfig::new(n, k), seed))
        })
        .collect()
}
