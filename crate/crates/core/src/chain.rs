//! Block, chain and fork bookkeeping shared by every policy and strategy.
//!
//! Blocks live in an append-only [`BlockTree`] arena and are addressed by an
//! opaque [`BlockId`] counter. A [`ForkSet`] is a snapshot of the competing
//! chains above the last common block, and is the only input the
//! fork-resolving policies look at.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque block identifier, assigned in mining order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId(pub u64);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(0);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Miner {
    Selfish,
    Honest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    /// `None` only for genesis.
    pub parent: Option<BlockId>,
    pub height: u64,
    /// Simulated seconds since the start of the run, stamped at mining time.
    pub timestamp: f64,
    pub miner: Miner,
}

/// Append-only block arena. Index `i` holds `BlockId(i)`.
#[derive(Debug, Clone)]
pub struct BlockTree {
    blocks: Vec<Block>,
}

impl Default for BlockTree {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockTree {
    /// A tree containing only genesis (height 0, timestamp 0).
    pub fn new() -> Self {
        Self {
            blocks: vec![Block {
                id: BlockId::GENESIS,
                parent: None,
                height: 0,
                timestamp: 0.0,
                miner: Miner::Honest,
            }],
        }
    }

    pub fn get(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(id.0 as usize)
    }

    /// Panics on an id that was not issued by this tree.
    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Mines a child of `parent`. Rejects unknown parents and timestamps that
    /// do not strictly exceed the parent's.
    pub fn append(&mut self, parent: BlockId, timestamp: f64, miner: Miner) -> Result<BlockId> {
        let parent_block = self.get(parent).ok_or(Error::UnknownParent(parent.0))?;
        if timestamp.is_nan() || timestamp <= parent_block.timestamp {
            return Err(Error::NonMonotonicTimestamp {
                parent: parent_block.timestamp,
                child: timestamp,
            });
        }
        let id = BlockId(self.blocks.len() as u64);
        let height = parent_block.height + 1;
        self.blocks.push(Block {
            id,
            parent: Some(parent),
            height,
            timestamp,
            miner,
        });
        Ok(id)
    }

    /// Blocks strictly above `ancestor` on the path to `tip`, ascending by
    /// height. Returns `None` if `ancestor` is not on that path.
    pub fn path_from(&self, ancestor: BlockId, tip: BlockId) -> Option<Vec<Block>> {
        let mut out = Vec::new();
        let mut cur = tip;
        while cur != ancestor {
            let b = self.get(cur)?;
            out.push(b.clone());
            cur = b.parent?;
        }
        out.reverse();
        Some(out)
    }
}

/// Competing chains descending from one fork-point block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForkSet {
    /// Height of the last common block (C_H).
    pub fork_point_height: u64,
    /// Each chain ascends by height from `fork_point_height + 1`. Chain order
    /// is discovery order and acts as the final tiebreaker everywhere.
    pub chains: Vec<Vec<Block>>,
}

impl ForkSet {
    /// Validates the structural invariants: at least one chain, consecutive
    /// heights starting right above the fork point, a shared parent for every
    /// first block, strictly increasing timestamps and no block shared
    /// between chains.
    pub fn new(fork_point_height: u64, chains: Vec<Vec<Block>>) -> Result<Self> {
        if chains.is_empty() {
            return Err(Error::EmptyFork);
        }
        let mut root: Option<Option<BlockId>> = None;
        let mut seen = std::collections::HashSet::new();
        for (ci, chain) in chains.iter().enumerate() {
            for (i, b) in chain.iter().enumerate() {
                let expected = fork_point_height + 1 + i as u64;
                if b.height != expected {
                    return Err(Error::MalformedFork(format!(
                        "chain {ci} block {i} has height {}, expected {expected}",
                        b.height
                    )));
                }
                if i == 0 {
                    match root {
                        None => root = Some(b.parent),
                        Some(p) if p != b.parent => {
                            return Err(Error::MalformedFork(format!(
                                "chain {ci} does not share the fork-point parent"
                            )))
                        }
                        _ => {}
                    }
                } else {
                    let prev = &chain[i - 1];
                    if b.parent != Some(prev.id)
                        || b.timestamp.is_nan()
                        || b.timestamp <= prev.timestamp
                    {
                        return Err(Error::MalformedFork(format!(
                            "chain {ci} is not a timestamp-increasing path at index {i}"
                        )));
                    }
                }
                if !seen.insert(b.id) {
                    return Err(Error::MalformedFork(format!(
                        "block {} appears in more than one chain",
                        b.id.0
                    )));
                }
            }
        }
        Ok(Self {
            fork_point_height,
            chains,
        })
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn total_blocks(&self) -> usize {
        self.chains.iter().map(Vec::len).sum()
    }
}

/// Per-chain scores computed by a fork-resolving policy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainScores {
    pub lengths: Vec<u64>,
    pub weights: Vec<f64>,
    pub validating_weights: Vec<u64>,
}

/// CL[i] = tip height of chain i minus the fork-point height.
pub fn chain_lengths(fork: &ForkSet) -> Vec<u64> {
    fork.chains
        .iter()
        .map(|c| {
            c.last()
                .map(|tip| tip.height - fork.fork_point_height)
                .unwrap_or(0)
        })
        .collect()
}

/// Blocks above the fork point on every chain except the winner.
pub fn stale_blocks_on_loss(fork: &ForkSet, winner_index: usize) -> Result<u64> {
    if winner_index >= fork.len() {
        return Err(Error::InvalidWinner {
            index: winner_index,
            chains: fork.len(),
        });
    }
    Ok(chain_lengths(fork)
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != winner_index)
        .map(|(_, &l)| l)
        .sum())
}
