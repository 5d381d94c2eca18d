//! Memoryless block discovery.
//!
//! Each event attributes the next block to the selfish pool with probability
//! `alpha` and advances the simulated clock by an exponential interval. The
//! drawn time is the block's timestamp; publication may happen later but the
//! stamp never changes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::chain::Miner;
use crate::error::{Error, Result};

pub const DEFAULT_BLOCKS_PER_RUN: u64 = 1000;
pub const DEFAULT_MEAN_BLOCK_INTERVAL_SECONDS: f64 = 600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub blocks_per_run: u64,
    pub seed: u64,
    pub mean_block_interval_seconds: f64,
}

impl MiningConfig {
    pub fn new(alpha: f64, gamma: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            alpha,
            gamma,
            blocks_per_run: DEFAULT_BLOCKS_PER_RUN,
            seed,
            mean_block_interval_seconds: DEFAULT_MEAN_BLOCK_INTERVAL_SECONDS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The selfish pool is a minority: `alpha` must lie in `[0, 0.5]`. The
    /// closed upper end admits the last point of the default sweep grid.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.alpha) {
            return Err(Error::invalid(
                "alpha",
                format!("{} not in [0, 0.5]", self.alpha),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(
                "gamma",
                format!("{} not in [0, 1]", self.gamma),
            ));
        }
        if self.blocks_per_run == 0 {
            return Err(Error::invalid("blocks", "must be at least 1"));
        }
        if !(self.mean_block_interval_seconds > 0.0 && self.mean_block_interval_seconds.is_finite())
        {
            return Err(Error::invalid(
                "mean_block_interval_seconds",
                "must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningEvent {
    pub block_index: u64,
    pub miner: Miner,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct MiningEngine {
    alpha: f64,
    interval: Exp<f64>,
    rng: ChaCha8Rng,
    clock: f64,
    next_index: u64,
    limit: u64,
}

impl MiningEngine {
    pub fn new(cfg: &MiningConfig) -> Result<Self> {
        cfg.validate()?;
        let interval = Exp::new(1.0 / cfg.mean_block_interval_seconds)
            .map_err(|e| Error::invalid("mean_block_interval_seconds", e.to_string()))?;
        Ok(Self {
            alpha: cfg.alpha,
            interval,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            clock: 0.0,
            next_index: 0,
            limit: cfg.blocks_per_run,
        })
    }

    pub fn is_finished(&self) -> bool {
        self.next_index >= self.limit
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Draws the next block. Returns `None` once `blocks_per_run` events have
    /// been produced.
    pub fn next_event(&mut self) -> Option<MiningEvent> {
        if self.is_finished() {
            return None;
        }
        let miner = if self.rng.random::<f64>() < self.alpha {
            Miner::Selfish
        } else {
            Miner::Honest
        };
        let next = self.clock + self.interval.sample(&mut self.rng);
        // a tiny draw can round away; stamps must strictly increase
        self.clock = if next > self.clock {
            next
        } else {
            next_up(self.clock)
        };
        let ev = MiningEvent {
            block_index: self.next_index,
            miner,
            time: self.clock,
        };
        self.next_index += 1;
        Some(ev)
    }
}

fn next_up(x: f64) -> f64 {
    f64::from_bits(x.to_bits() + 1)
}

impl Iterator for MiningEngine {
    type Item = MiningEvent;

    fn next(&mut self) -> Option<MiningEvent> {
        self.next_event()
    }
}

/// Which tip the next honest block extends while a tie is open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TieChoice {
    MineOnSelfishTip,
    MineOnHonestTip,
}

/// Routes an honest block during a tie: the selfish tip is extended with
/// probability `gamma`.
pub fn honest_tie_split<R: Rng + ?Sized>(rng: &mut R, gamma: f64) -> TieChoice {
    if rng.random::<f64>() < gamma {
        TieChoice::MineOnSelfishTip
    } else {
        TieChoice::MineOnHonestTip
    }
}
