//! Experiment families and their data feeds.
//!
//! Random coefficient streams use ChaCha8 seeded with the run seed. Every
//! (node, role) pair reads its own stream, `stream = (node << 8) | role`, so
//! adding a node or a role never shifts the draws of another. Roles are
//! listed in [`stream`].

pub mod dispatch;
pub mod market;
pub mod pev;
pub mod synthetic;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::problem::NodeProblem;

pub use dispatch::{build_dispatch, DispatchScenario};
pub use market::{ingest_market_csv, synthetic_market, write_market_csv, MarketSeries};
pub use pev::{build_pev, PevSpec};
pub use synthetic::{build_synthetic, SyntheticSpec};

/// Role tags of the RNG stream split.
pub mod stream {
    pub const SYNTHETIC_INIT: u64 = 1;
    pub const SYNTHETIC_WALK: u64 = 2;
    pub const PEV_INIT: u64 = 3;
    pub const PEV_WALK: u64 = 4;
    /// Market generator uses node slot 0.
    pub const MARKET: u64 = 5;
}

pub(crate) fn rng_for(seed: u64, node: usize, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((node as u64) << 8) | role);
    rng
}

/// A built problem instance with a label for run metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub problems: Vec<NodeProblem>,
}

impl Scenario {
    pub fn nodes(&self) -> usize {
        self.problems.len()
    }

    pub fn horizon(&self) -> usize {
        self.problems.first().map_or(0, NodeProblem::horizon)
    }
}
