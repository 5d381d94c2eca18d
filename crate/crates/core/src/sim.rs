//! One seeded run: mining events feed the attacker, attacker releases are
//! judged by the active fork-resolving policy, and the defense adapts K and
//! Z at window boundaries.
//!
//! The race is kept relative to a `base` block that every party agrees on.
//! Above it sit the public honest branch and the attacker's branch, whose
//! first `published` blocks are public. Honest hash extends the honest branch
//! except during an open tie under a baseline policy, where gamma routes
//! it. A release that wins its fork decision, or an honest block mined on the
//! released tip, commits the released prefix and orphans the honest branch.
//! Blocks become stale when they can no longer join the main chain: honest
//! blocks when a release overtakes them, attacker blocks when the attacker
//! adopts the public chain or the run ends.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacker::{AttackerState, PublishAction, Strategy};
use crate::chain::{Block, BlockId, BlockTree, ForkSet, Miner};
use crate::defense::{Defense, DefenseConfig, Policy, WindowTrace};
use crate::error::Result;
use crate::frp::{self, Criterion, TieRule};
use crate::mining::{honest_tie_split, MiningConfig, MiningEngine, TieChoice};

/// What a double-spend counts as.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DsCounting {
    /// The overtaking release meets the confirmation condition and honest
    /// miners adopt it.
    #[default]
    Adopted,
    /// The confirmation condition is met at release, whatever the outcome.
    Opportunity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub policy: Policy,
    pub mining: MiningConfig,
    pub defense: DefenseConfig,
    pub strategy: Strategy,
    pub release_inclusive: bool,
    pub ds_counting: DsCounting,
}

impl RunConfig {
    pub fn new(policy: Policy, mining: MiningConfig) -> Self {
        Self {
            policy,
            mining,
            defense: DefenseConfig::default(),
            strategy: policy.default_strategy(),
            release_inclusive: false,
            ds_counting: DsCounting::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mining.validate()?;
        self.defense.validate(self.policy)
    }

    /// Gamma actually applied to ties; uniform tie-breaking forces one half.
    pub fn effective_gamma(&self) -> f64 {
        match self.policy {
            Policy::Uniform => 0.5,
            _ => self.mining.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub blocks_mined: u64,
    pub selfish_win_blocks: u64,
    pub honest_win_blocks: u64,
    pub ds_count: u64,
    pub ds_opportunities: u64,
    pub avg_z: f64,
    pub avg_k: f64,
    pub weight_decisions: u64,
    pub height_decisions: u64,
    pub fork_stale_blocks: u64,
    pub hidden_at_end: u64,
    pub windows: Vec<WindowTrace>,
}

impl RunOutcome {
    pub fn main_chain_len(&self) -> u64 {
        self.selfish_win_blocks + self.honest_win_blocks
    }
}

/// Independent child seed for a named stream of one run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x243f_6a88_85a3_08d3)))
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

const TIE_STREAM: u64 = 1;
const DEFENSE_STREAM: u64 = 2;

struct Race {
    cfg: RunConfig,
    tree: BlockTree,
    base: BlockId,
    base_height: u64,
    honest: Vec<Block>,
    private: Vec<Block>,
    attacker: AttackerState,
    defense: Defense,
    tie_rng: ChaCha8Rng,
    selfish_wins: u64,
    honest_wins: u64,
    stale: u64,
    ds_count: u64,
    ds_opportunities: u64,
    weight_decisions: u64,
    height_decisions: u64,
}

impl Race {
    fn new(cfg: RunConfig) -> Result<Self> {
        let mut attacker = AttackerState::new(cfg.strategy);
        attacker.release_inclusive = cfg.release_inclusive;
        let defense = Defense::new(
            cfg.policy,
            cfg.defense.clone(),
            derive_seed(cfg.mining.seed, DEFENSE_STREAM),
        )?;
        attacker.known_k = defense.current_k();
        Ok(Self {
            tie_rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.mining.seed, TIE_STREAM)),
            cfg,
            tree: BlockTree::new(),
            base: BlockId::GENESIS,
            base_height: 0,
            honest: Vec::new(),
            private: Vec::new(),
            attacker,
            defense,
            selfish_wins: 0,
            honest_wins: 0,
            stale: 0,
            ds_count: 0,
            ds_opportunities: 0,
            weight_decisions: 0,
            height_decisions: 0,
        })
    }

    fn published(&self) -> usize {
        self.attacker.published as usize
    }

    fn tip_of(&self, branch: &[Block]) -> BlockId {
        branch.last().map_or(self.base, |b| b.id)
    }

    fn mint(&mut self, parent: BlockId, time: f64, miner: Miner) -> Result<Block> {
        let id = self.tree.append(parent, time, miner)?;
        Ok(self.tree.block(id).clone())
    }

    fn add_main(&mut self, blocks: &[Block]) {
        for b in blocks {
            match b.miner {
                Miner::Selfish => self.selfish_wins += 1,
                Miner::Honest => self.honest_wins += 1,
            }
        }
    }

    fn mark_stale(&mut self, blocks: u64) {
        self.stale += blocks;
        self.defense.record_stale(blocks);
    }

    /// The released prefix joins the main chain; the honest branch is orphaned.
    fn commit_prefix(&mut self) {
        let n = self.published();
        let prefix: Vec<Block> = self.private.drain(..n).collect();
        self.add_main(&prefix);
        let orphaned = self.honest.len() as u64;
        self.mark_stale(orphaned);
        self.honest.clear();
        if let Some(tip) = prefix.last() {
            self.base = tip.id;
            self.base_height = tip.height;
        }
        self.attacker.on_prefix_committed(n as u64);
    }

    /// With nothing private left, the honest branch is the settled chain.
    fn settle_if_idle(&mut self) {
        if self.attacker.private_len == 0 {
            let settled = std::mem::take(&mut self.honest);
            self.add_main(&settled);
            if let Some(tip) = settled.last() {
                self.base = tip.id;
                self.base_height = tip.height;
            }
            self.attacker.rebase_if_idle();
        }
    }

    fn is_open_tie(&self) -> bool {
        let p = self.published();
        !self.cfg.policy.is_defended() && p > 0 && p == self.honest.len()
    }

    /// Judges a fresh release. Returns whether the released prefix won.
    fn on_release(&mut self) -> Result<bool> {
        if self.honest.is_empty() {
            // nothing competes: the release just extends the chain
            self.commit_prefix();
            return Ok(true);
        }
        let p = self.published();
        let fork = ForkSet::new(
            self.base_height,
            vec![self.honest.clone(), self.private[..p].to_vec()],
        )?;
        let decision = match self.cfg.policy {
            Policy::None | Policy::Uniform => {
                if p == self.honest.len() {
                    // tie stays open; the next honest block settles it
                    return Ok(false);
                }
                frp::select_chain_longest(&fork, TieRule::FirstSeen, &mut self.tie_rng)?
            }
            Policy::Sdtla => frp::select_chain_sdtla(
                &fork,
                self.defense.current_k().expect("sdtla has K"),
                self.cfg.defense.length_rule_inclusive,
            )?,
            Policy::Wvbm => frp::select_chain_wvbm(&fork, self.cfg.defense.validation_threshold)?,
        };
        match decision.criterion {
            Criterion::Weight => self.weight_decisions += 1,
            Criterion::Length => self.height_decisions += 1,
        }
        self.defense.record_decision(decision.criterion);
        if decision.winner_index == 1 {
            self.commit_prefix();
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn apply(
        &mut self,
        actions: &[PublishAction],
        published_before: u64,
        ds_before: u64,
    ) -> Result<()> {
        if actions.contains(&PublishAction::Adopt) {
            // every attacker block above the base is abandoned
            let abandoned = self.private.len() as u64;
            self.private.clear();
            self.mark_stale(abandoned);
        }
        let released = self.attacker.published > published_before;
        let won = if released { self.on_release()? } else { false };
        if self.attacker.ds > ds_before {
            self.ds_opportunities += 1;
            if self.cfg.ds_counting == DsCounting::Opportunity || won {
                self.ds_count += 1;
            }
        }
        self.settle_if_idle();
        Ok(())
    }

    fn on_selfish(&mut self, time: f64) -> Result<()> {
        let parent = self.tip_of(&self.private);
        let block = self.mint(parent, time, Miner::Selfish)?;
        self.private.push(block);
        let (pub_before, ds_before) = (self.attacker.published, self.attacker.ds);
        let actions = self.attacker.on_selfish_block();
        self.apply(&actions, pub_before, ds_before)
    }

    fn on_honest(&mut self, time: f64) -> Result<()> {
        let on_released_tip = self.is_open_tie()
            && honest_tie_split(&mut self.tie_rng, self.cfg.effective_gamma())
                == TieChoice::MineOnSelfishTip;
        if on_released_tip {
            self.commit_prefix();
        }
        let parent = self.tip_of(&self.honest);
        let block = self.mint(parent, time, Miner::Honest)?;
        self.honest.push(block);
        let nrc = self.defense.current_nrc() as u64;
        let (pub_before, ds_before) = (self.attacker.published, self.attacker.ds);
        let actions = self.attacker.on_honest_block(nrc);
        self.apply(&actions, pub_before, ds_before)?;
        debug_assert_eq!(self.attacker.public_len, self.honest.len() as u64);
        Ok(())
    }

    fn finish(mut self, blocks_mined: u64, z_sum: u64, k_sum: u64) -> RunOutcome {
        // the public head is the honest branch; released attacker blocks that
        // never won are stale, unreleased ones stay hidden
        let head = std::mem::take(&mut self.honest);
        self.add_main(&head);
        let released_losers = self.published() as u64;
        self.stale += released_losers;
        let hidden = self.attacker.hidden();
        debug_assert_eq!(
            blocks_mined,
            self.selfish_wins + self.honest_wins + self.stale + hidden,
            "block conservation"
        );
        let n = blocks_mined.max(1) as f64;
        RunOutcome {
            blocks_mined,
            selfish_win_blocks: self.selfish_wins,
            honest_win_blocks: self.honest_wins,
            ds_count: self.ds_count,
            ds_opportunities: self.ds_opportunities,
            avg_z: z_sum as f64 / n,
            avg_k: k_sum as f64 / n,
            weight_decisions: self.weight_decisions,
            height_decisions: self.height_decisions,
            fork_stale_blocks: self.stale,
            hidden_at_end: hidden,
            windows: self.defense.into_trace(),
        }
    }
}

/// Executes one run to completion.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut engine = MiningEngine::new(&cfg.mining)?;
    let mut race = Race::new(cfg.clone())?;
    let (mut z_sum, mut k_sum, mut mined) = (0u64, 0u64, 0u64);
    while let Some(ev) = engine.next_event() {
        match ev.miner {
            Miner::Selfish => race.on_selfish(ev.time)?,
            Miner::Honest => race.on_honest(ev.time)?,
        }
        mined += 1;
        z_sum += race.defense.current_nrc() as u64;
        k_sum += race.defense.current_k().unwrap_or(0) as u64;
        race.defense.on_block_mined()?;
        race.attacker.known_k = race.defense.current_k();
    }
    Ok(race.finish(mined, z_sum, k_sum))
}
