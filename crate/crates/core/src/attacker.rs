//! Selfish-pool strategies.
//!
//! [`AttackerState`] tracks the pool's private branch relative to the current
//! race base (the last block both sides agree on). Lengths are counted above
//! that base, so "lead" is `private_len - public_len`. The simulation driver
//! applies the returned [`PublishAction`]s to the block tree and calls
//! [`AttackerState::on_prefix_committed`] whenever honest miners adopt a
//! published private prefix.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// SM1 with a double-spend check on every overtaking release.
    CombinedSm1,
    /// CombinedSm1, plus a full release as soon as the lead exceeds the
    /// published K.
    ModifiedSm1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PublishAction {
    /// Abandon the private branch and mine on the public tip.
    Adopt,
    /// Make the first `upto` private blocks public.
    Publish { upto: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerState {
    pub strategy: Strategy,
    /// Live K, when the defense publishes one.
    pub known_k: Option<u32>,
    /// Release on `lead >= K` instead of `lead > K`.
    pub release_inclusive: bool,
    /// Blocks on the private branch above the race base, published or not.
    pub private_len: u64,
    /// How many of those are public.
    pub published: u64,
    /// Length of the chain honest miners extend, above the race base.
    pub public_len: u64,
    /// Private branch length (PBL) as used by the release rules.
    pub pbl: u64,
    /// Double-spend opportunities taken so far.
    pub ds: u64,
}

impl AttackerState {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            known_k: None,
            release_inclusive: false,
            private_len: 0,
            published: 0,
            public_len: 0,
            pbl: 0,
            ds: 0,
        }
    }

    pub fn lead(&self) -> i64 {
        self.private_len as i64 - self.public_len as i64
    }

    pub fn hidden(&self) -> u64 {
        self.private_len - self.published
    }

    fn publish_all(&mut self, out: &mut Vec<PublishAction>) {
        self.published = self.private_len;
        self.pbl = 0;
        out.push(PublishAction::Publish {
            upto: self.private_len,
        });
    }

    pub fn on_selfish_block(&mut self) -> Vec<PublishAction> {
        let mut out = Vec::new();
        let delta_prev = self.lead();
        self.private_len += 1;
        self.pbl += 1;
        if delta_prev == 0 && self.pbl == 2 {
            // was a tie with a branch of one
            self.publish_all(&mut out);
        }
        self.apply_modified_release(&mut out);
        out
    }

    /// `nrc` is the merchant's required confirmation count at this instant.
    pub fn on_honest_block(&mut self, nrc: u64) -> Vec<PublishAction> {
        let mut out = Vec::new();
        let delta_prev = self.lead();
        self.public_len += 1;
        match delta_prev {
            d if d <= 0 => {
                self.private_len = 0;
                self.published = 0;
                self.public_len = 0;
                self.pbl = 0;
                out.push(PublishAction::Adopt);
            }
            1 => {
                if self.published < self.private_len {
                    self.published = self.private_len;
                    out.push(PublishAction::Publish {
                        upto: self.private_len,
                    });
                }
            }
            2 => {
                self.publish_all(&mut out);
                if self.public_len >= nrc {
                    self.ds += 1;
                }
            }
            _ => {
                if self.published < self.private_len {
                    self.published += 1;
                    out.push(PublishAction::Publish {
                        upto: self.published,
                    });
                }
            }
        }
        self.apply_modified_release(&mut out);
        out
    }

    /// Full release when the lead exceeds `k` (or reaches it, in inclusive
    /// mode). A no-op if nothing is hidden.
    pub fn modified_release(&mut self, k: u32) -> Vec<PublishAction> {
        let mut out = Vec::new();
        let lead = self.lead();
        let k = k as i64;
        let fire = if self.release_inclusive {
            lead >= k
        } else {
            lead > k
        };
        if fire && self.hidden() > 0 {
            self.publish_all(&mut out);
        }
        out
    }

    fn apply_modified_release(&mut self, out: &mut Vec<PublishAction>) {
        if self.strategy != Strategy::ModifiedSm1 {
            return;
        }
        if let Some(k) = self.known_k {
            out.extend(self.modified_release(k));
        }
    }

    /// Honest miners adopted the published private prefix: those blocks leave
    /// the race and the honest branch they displaced is gone.
    pub fn on_prefix_committed(&mut self, blocks: u64) {
        debug_assert!(blocks <= self.published);
        self.private_len -= blocks;
        self.published -= blocks;
        self.public_len = 0;
        if self.private_len == 0 {
            self.pbl = 0;
        }
    }

    /// Honest miners extended an uncontested public chain that the attacker
    /// has no stake in (nothing private): rebase onto the new tip.
    pub fn rebase_if_idle(&mut self) {
        if self.private_len == 0 {
            self.public_len = 0;
            self.pbl = 0;
        }
    }
}
