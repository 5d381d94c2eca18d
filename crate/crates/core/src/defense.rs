//! Defense controllers: the live safe parameters (K, Z), the per-window
//! tracker, and the time-window handlers that drive the learning automata.
//!
//! One [`Defense`] represents the shared view of every honest miner. The
//! simulation driver reports fork decisions and stale blocks as they happen
//! and calls [`Defense::on_block_mined`] after each block; window boundaries
//! fall every `tau_blocks * window_taus` mined blocks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacker::Strategy;
use crate::automata::Automaton;
use crate::automata::{
    ds_reinforcement, sbcr, sm_reinforcement, stale_rate_per_k, stale_rate_per_z,
    update_ds_safe_parameter, update_sm_safe_parameter, AutomatonConfig, Bounds, DsAction,
    DsSignalInputs, LinearRewardPenalty, SmAction, SmSignalInputs,
};
use crate::error::{Error, Result};
use crate::frp::{Criterion, ValidationThreshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Longest chain, first-seen on ties, gamma routes honest hash.
    None,
    /// Longest chain with honest hash split evenly on ties.
    Uniform,
    Sdtla,
    Wvbm,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::None, Policy::Uniform, Policy::Sdtla, Policy::Wvbm];

    pub fn name(self) -> &'static str {
        match self {
            Policy::None => "none",
            Policy::Uniform => "uniform",
            Policy::Sdtla => "sdtla",
            Policy::Wvbm => "wvbm",
        }
    }

    pub fn is_defended(self) -> bool {
        matches!(self, Policy::Sdtla | Policy::Wvbm)
    }

    /// Adversary each policy is evaluated against by default: the K-aware
    /// attacker faces SDTLA, the plain combined attacker faces the rest.
    pub fn default_strategy(self) -> Strategy {
        match self {
            Policy::Sdtla => Strategy::ModifiedSm1,
            _ => Strategy::CombinedSm1,
        }
    }

    pub fn default_z_bounds(self) -> Bounds {
        match self {
            Policy::Wvbm => Bounds { min: 2, max: 12 },
            _ => Bounds { min: 3, max: 24 },
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("policy", format!("unknown policy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DefenseConfig {
    pub tau_blocks: u32,
    pub window_taus: u32,
    pub k_bounds: Bounds,
    /// Policy default when absent.
    pub z_bounds: Option<Bounds>,
    pub k_initial: u32,
    pub z_initial: u32,
    /// Merchant confirmations used by undefended policies.
    pub fixed_nrc: u32,
    /// Automata and parameters return to their initial state every this many
    /// windows; `None` disables resets.
    pub reset_period_windows: Option<u32>,
    pub automaton: AutomatonConfig,
    /// SDTLA decides on length when the gap is at least K instead of above K.
    pub length_rule_inclusive: bool,
    pub validation_threshold: ValidationThreshold,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self {
            tau_blocks: 5,
            window_taus: 12,
            k_bounds: Bounds { min: 1, max: 3 },
            z_bounds: None,
            k_initial: 1,
            z_initial: 6,
            fixed_nrc: 6,
            reset_period_windows: Some(10),
            automaton: AutomatonConfig::default(),
            length_rule_inclusive: false,
            validation_threshold: ValidationThreshold::default(),
        }
    }
}

impl DefenseConfig {
    pub fn z_bounds_for(&self, policy: Policy) -> Bounds {
        self.z_bounds.unwrap_or_else(|| policy.default_z_bounds())
    }

    pub fn window_blocks(&self) -> u64 {
        self.tau_blocks as u64 * self.window_taus as u64
    }

    pub fn validate(&self, policy: Policy) -> Result<()> {
        if self.tau_blocks < 1 {
            return Err(Error::invalid("tau_blocks", "must be at least 1"));
        }
        if self.window_taus < 1 {
            return Err(Error::invalid("window_taus", "must be at least 1"));
        }
        if self.fixed_nrc < 1 {
            return Err(Error::invalid("fixed_nrc", "must be at least 1"));
        }
        if self.reset_period_windows == Some(0) {
            return Err(Error::invalid("reset_period_windows", "must be at least 1"));
        }
        let k = Bounds::new(self.k_bounds.min, self.k_bounds.max, "k_bounds")?;
        let z = self.z_bounds_for(policy);
        let z = Bounds::new(z.min, z.max, "z_bounds")?;
        if !k.contains(self.k_initial) {
            return Err(Error::invalid("k_initial", "outside k_bounds"));
        }
        if policy.is_defended() && !z.contains(self.z_initial) {
            return Err(Error::invalid("z_initial", "outside z_bounds"));
        }
        match self.validation_threshold {
            ValidationThreshold::LengthFraction { fraction }
                if !(fraction > 0.0 && fraction <= 1.0) =>
            {
                return Err(Error::invalid(
                    "validation_threshold",
                    "fraction must lie in (0, 1]",
                ));
            }
            _ => {}
        }
        self.automaton.validate()
    }
}

/// Counters for the window in progress plus the previous window's rates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowTracker {
    pub fork_stale_blocks: u64,
    pub weight_decisions: u64,
    pub height_decisions: u64,
    pub previous_rate_per_k: Option<f64>,
    pub previous_rate_per_z: Option<f64>,
}

impl WindowTracker {
    fn roll(&mut self, rate_k: Option<f64>, rate_z: Option<f64>) {
        self.fork_stale_blocks = 0;
        self.weight_decisions = 0;
        self.height_decisions = 0;
        self.previous_rate_per_k = rate_k;
        self.previous_rate_per_z = rate_z;
    }
}

/// One closed time window, as written to `windows.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowTrace {
    pub window_index: u32,
    pub end_block: u64,
    /// K and Z in effect during the closing window.
    pub k: Option<u32>,
    pub z: u32,
    pub fork_stale_blocks: u64,
    pub weight_decisions: u64,
    pub height_decisions: u64,
    pub stale_rate_per_k: Option<f64>,
    pub stale_rate_per_z: f64,
    pub sbcr: f64,
    pub beta1: Option<bool>,
    pub beta2: Option<bool>,
    pub beta_k: Option<bool>,
    pub beta_z: Option<bool>,
    pub action_k: Option<SmAction>,
    pub action_z: Option<DsAction>,
    pub reset: bool,
    /// K and Z for the next window.
    pub next_k: Option<u32>,
    pub next_z: u32,
}

#[derive(Debug)]
struct SmController {
    k: u32,
    bounds: Bounds,
    la: LinearRewardPenalty,
    rng: ChaCha8Rng,
}

#[derive(Debug)]
struct DsController {
    z: u32,
    bounds: Bounds,
    la: LinearRewardPenalty,
    rng: ChaCha8Rng,
}

#[derive(Debug)]
pub struct Defense {
    policy: Policy,
    cfg: DefenseConfig,
    sm: Option<SmController>,
    ds: Option<DsController>,
    tracker: WindowTracker,
    windows_closed: u32,
    mined: u64,
    trace: Vec<WindowTrace>,
}

impl Defense {
    /// `seed` feeds the automata streams only; K and Z are sampled from
    /// independent streams so the Z path does not depend on whether K exists.
    pub fn new(policy: Policy, cfg: DefenseConfig, seed: u64) -> Result<Self> {
        cfg.validate(policy)?;
        let sm = match policy {
            Policy::Sdtla => Some(SmController {
                k: cfg.k_initial,
                bounds: cfg.k_bounds,
                la: LinearRewardPenalty::new(SmAction::ALL.len(), cfg.automaton)?,
                rng: ChaCha8Rng::seed_from_u64(seed ^ 0x4b4b_4b4b_4b4b_4b4b),
            }),
            _ => None,
        };
        let ds = if policy.is_defended() {
            Some(DsController {
                z: cfg.z_initial,
                bounds: cfg.z_bounds_for(policy),
                la: LinearRewardPenalty::new(DsAction::ALL.len(), cfg.automaton)?,
                rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a_5a5a_5a5a_5a5a),
            })
        } else {
            None
        };
        Ok(Self {
            policy,
            cfg,
            sm,
            ds,
            tracker: WindowTracker::default(),
            windows_closed: 0,
            mined: 0,
            trace: Vec::new(),
        })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn config(&self) -> &DefenseConfig {
        &self.cfg
    }

    /// Confirmations the merchant waits for right now.
    pub fn current_nrc(&self) -> u32 {
        self.ds.as_ref().map_or(self.cfg.fixed_nrc, |d| d.z)
    }

    pub fn current_k(&self) -> Option<u32> {
        self.sm.as_ref().map(|s| s.k)
    }

    pub fn tracker(&self) -> &WindowTracker {
        &self.tracker
    }

    pub fn trace(&self) -> &[WindowTrace] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<WindowTrace> {
        self.trace
    }

    pub fn record_decision(&mut self, criterion: Criterion) {
        match criterion {
            Criterion::Weight => self.tracker.weight_decisions += 1,
            Criterion::Length => self.tracker.height_decisions += 1,
        }
    }

    pub fn record_stale(&mut self, blocks: u64) {
        self.tracker.fork_stale_blocks += blocks;
    }

    /// Advances the block counter; closes a window on its boundary.
    pub fn on_block_mined(&mut self) -> Result<()> {
        self.mined += 1;
        if self.mined.is_multiple_of(self.cfg.window_blocks()) {
            self.on_time_window()?;
        }
        Ok(())
    }

    fn on_time_window(&mut self) -> Result<()> {
        let Some(ds) = self.ds.as_mut() else {
            // undefended: nothing adapts, counters just roll
            self.tracker.roll(None, None);
            return Ok(());
        };
        self.windows_closed += 1;
        let t = &self.tracker;
        let z_in_effect = ds.z;
        let rate_z = stale_rate_per_z(t.fork_stale_blocks, z_in_effect)?;
        let old_z = t.previous_rate_per_z;
        let sbcr_value = old_z.map_or(0.5, |old| sbcr(rate_z, old));
        let reset = self
            .cfg
            .reset_period_windows
            .is_some_and(|p| self.windows_closed.is_multiple_of(p));

        let mut row = WindowTrace {
            window_index: self.windows_closed,
            end_block: self.mined,
            k: None,
            z: z_in_effect,
            fork_stale_blocks: t.fork_stale_blocks,
            weight_decisions: t.weight_decisions,
            height_decisions: t.height_decisions,
            stale_rate_per_k: None,
            stale_rate_per_z: rate_z,
            sbcr: sbcr_value,
            beta1: None,
            beta2: None,
            beta_k: None,
            beta_z: None,
            action_k: None,
            action_z: None,
            reset,
            next_k: None,
            next_z: z_in_effect,
        };

        if let Some(old) = old_z {
            if ds.la.pending().is_some() {
                let beta = ds_reinforcement(&DsSignalInputs {
                    stale_rate_per_z_old: old,
                    stale_rate_per_z_new: rate_z,
                });
                ds.la.update(beta);
                row.beta_z = Some(beta);
            }
        }
        if reset {
            ds.la.reset();
            ds.z = self.cfg.z_initial;
        } else {
            let (z, action) =
                update_ds_safe_parameter(ds.z, ds.bounds, sbcr_value, &mut ds.la, &mut ds.rng)?;
            ds.z = z;
            row.action_z = Some(action);
        }
        row.next_z = ds.z;

        let mut rate_k = None;
        if let Some(sm) = self.sm.as_mut() {
            let k_in_effect = sm.k;
            let r = stale_rate_per_k(t.fork_stale_blocks, k_in_effect)?;
            rate_k = Some(r);
            row.k = Some(k_in_effect);
            row.stale_rate_per_k = Some(r);
            if let Some(old) = t.previous_rate_per_k {
                if sm.la.pending().is_some() {
                    let signal = sm_reinforcement(&SmSignalInputs {
                        weight_decisions: t.weight_decisions,
                        height_decisions: t.height_decisions,
                        stale_rate_per_k_old: old,
                        stale_rate_per_k_new: r,
                    });
                    sm.la.update(signal.beta);
                    row.beta1 = Some(signal.beta1);
                    row.beta2 = Some(signal.beta2);
                    row.beta_k = Some(signal.beta);
                }
            }
            if reset {
                sm.la.reset();
                sm.k = self.cfg.k_initial;
            } else {
                let (k, action) =
                    update_sm_safe_parameter(sm.k, sm.bounds, &mut sm.la, &mut sm.rng)?;
                sm.k = k;
                row.action_k = Some(action);
            }
            row.next_k = Some(sm.k);
        }

        self.tracker.roll(rate_k, Some(rate_z));
        self.trace.push(row);
        Ok(())
    }
}
