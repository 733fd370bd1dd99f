use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Which point pairs enter the angle constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PairStrategy {
    /// All pairs up to 120 points, otherwise 30 random partners per point.
    Auto { seed: u64 },
    All,
    /// Every point paired with the first one.
    Star,
    Random { partners: usize, seed: u64 },
}

impl Default for PairStrategy {
    fn default() -> Self {
        PairStrategy::Auto { seed: 0 }
    }
}

impl PairStrategy {
    pub fn pairs(&self, n: usize) -> Vec<(usize, usize)> {
        match *self {
            PairStrategy::Auto { seed } if n > 120 => {
                PairStrategy::Random { partners: 30, seed }.pairs(n)
            }
            PairStrategy::Auto { .. } | PairStrategy::All => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            PairStrategy::Star => (1..n).map(|j| (0, j)).collect(),
            PairStrategy::Random { partners, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut out = Vec::with_capacity(n * partners);
                for i in 0..n {
                    let k = partners.min(n - 1);
                    for j in sample(&mut rng, n - 1, k).into_iter() {
                        let j = if j >= i { j + 1 } else { j };
                        out.push((i.min(j), i.max(j)));
                    }
                }
                out.sort_unstable();
                out.dedup();
                out
            }
        }
    }
}
