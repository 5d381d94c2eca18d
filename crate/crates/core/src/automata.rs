//! Learning automata, reinforcement signals, and the K / Z safe-parameter
//! update rules.
//!
//! The automaton itself sits behind the [`Automaton`] trait; the default is a
//! linear reward-penalty scheme over a uniform initial vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait Automaton: std::fmt::Debug + Send {
    fn num_actions(&self) -> usize;
    fn probabilities(&self) -> &[f64];
    /// Samples among `allowed` (indices into the action list) with the
    /// probabilities renormalized over that subset, and remembers the choice.
    fn choose(&mut self, allowed: &[usize], rng: &mut dyn rand::RngCore) -> Result<usize>;
    /// Last choice still awaiting reinforcement.
    fn pending(&self) -> Option<usize>;
    /// Applies the reinforcement for the pending choice. `reward == true`
    /// means β = 1. No-op without a pending choice.
    fn update(&mut self, reward: bool);
    /// Back to uniform probabilities, nothing pending.
    fn reset(&mut self);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutomatonConfig {
    /// Reward step `a` in (0, 1).
    pub reward_step: f64,
    /// Penalty step `b` in [0, 1).
    pub penalty_step: f64,
}

impl Default for AutomatonConfig {
    fn default() -> Self {
        Self {
            reward_step: 0.1,
            penalty_step: 0.1,
        }
    }
}

impl AutomatonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reward_step > 0.0 && self.reward_step < 1.0) {
            return Err(Error::invalid("reward_step", "must lie in (0, 1)"));
        }
        if !(self.penalty_step >= 0.0 && self.penalty_step < 1.0) {
            return Err(Error::invalid("penalty_step", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Linear reward-penalty automaton. With `penalty_step == 0` it is the
/// reward-inaction scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRewardPenalty {
    probabilities: Vec<f64>,
    reward_step: f64,
    penalty_step: f64,
    pending: Option<usize>,
}

impl LinearRewardPenalty {
    pub fn new(num_actions: usize, cfg: AutomatonConfig) -> Result<Self> {
        cfg.validate()?;
        if num_actions < 2 {
            return Err(Error::invalid("num_actions", "need at least two actions"));
        }
        Ok(Self {
            probabilities: vec![1.0 / num_actions as f64; num_actions],
            reward_step: cfg.reward_step,
            penalty_step: cfg.penalty_step,
            pending: None,
        })
    }

    pub fn with_probabilities(probabilities: Vec<f64>, cfg: AutomatonConfig) -> Result<Self> {
        let mut a = Self::new(probabilities.len(), cfg)?;
        let sum: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("probabilities", "must be a distribution"));
        }
        a.probabilities = probabilities;
        Ok(a)
    }

    /// Applies one step for `action` without touching the pending slot.
    pub fn reinforce(&mut self, action: usize, reward: bool) {
        let r = self.probabilities.len() as f64;
        if reward {
            let a = self.reward_step;
            for (j, p) in self.probabilities.iter_mut().enumerate() {
                if j == action {
                    *p += a * (1.0 - *p);
                } else {
                    *p *= 1.0 - a;
                }
            }
        } else {
            let b = self.penalty_step;
            for (j, p) in self.probabilities.iter_mut().enumerate() {
                if j == action {
                    *p *= 1.0 - b;
                } else {
                    *p = b / (r - 1.0) + (1.0 - b) * *p;
                }
            }
        }
        let sum: f64 = self.probabilities.iter().sum();
        for p in &mut self.probabilities {
            *p = (*p / sum).max(0.0);
        }
    }
}

impl Automaton for LinearRewardPenalty {
    fn num_actions(&self) -> usize {
        self.probabilities.len()
    }

    fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    fn choose(&mut self, allowed: &[usize], rng: &mut dyn rand::RngCore) -> Result<usize> {
        if allowed.is_empty() {
            return Err(Error::NoAllowedActions);
        }
        if let Some(&bad) = allowed.iter().find(|&&i| i >= self.probabilities.len()) {
            return Err(Error::invalid(
                "allowed",
                format!("action {bad} out of range"),
            ));
        }
        let mass: f64 = allowed.iter().map(|&i| self.probabilities[i]).sum();
        let choice = if mass <= 0.0 {
            allowed[rng.random_range(0..allowed.len())]
        } else {
            let mut u = rng.random::<f64>() * mass;
            let mut pick = *allowed.last().expect("non-empty");
            for &i in allowed {
                let p = self.probabilities[i];
                if u < p {
                    pick = i;
                    break;
                }
                u -= p;
            }
            pick
        };
        self.pending = Some(choice);
        Ok(choice)
    }

    fn pending(&self) -> Option<usize> {
        self.pending
    }

    fn update(&mut self, reward: bool) {
        if let Some(action) = self.pending.take() {
            self.reinforce(action, reward);
        }
    }

    fn reset(&mut self) {
        let n = self.probabilities.len() as f64;
        self.probabilities.iter_mut().for_each(|p| *p = 1.0 / n);
        self.pending = None;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SmAction {
    Grow,
    Stop,
    Shrink,
}

impl SmAction {
    pub const ALL: [SmAction; 3] = [SmAction::Grow, SmAction::Stop, SmAction::Shrink];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> SmAction {
        SmAction::ALL[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DsAction {
    Increase,
    NoChange,
    Decrease,
}

impl DsAction {
    pub const ALL: [DsAction; 3] = [DsAction::Increase, DsAction::NoChange, DsAction::Decrease];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> DsAction {
        DsAction::ALL[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmSignalInputs {
    pub weight_decisions: u64,
    pub height_decisions: u64,
    pub stale_rate_per_k_old: f64,
    pub stale_rate_per_k_new: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsSignalInputs {
    pub stale_rate_per_z_old: f64,
    pub stale_rate_per_z_new: f64,
}

/// Thresholded SM signal, with its two factors kept for the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmSignal {
    pub beta1: bool,
    pub beta2: bool,
    pub beta: bool,
}

fn per_parameter(stale: u64, param: u32, name: &'static str) -> Result<f64> {
    if param < 1 {
        return Err(Error::invalid(name, "must be at least 1"));
    }
    Ok(stale as f64 / param as f64)
}

pub fn stale_rate_per_z(fork_stale_blocks_in_window: u64, current_z: u32) -> Result<f64> {
    per_parameter(fork_stale_blocks_in_window, current_z, "z")
}

pub fn stale_rate_per_k(fork_stale_blocks_in_window: u64, current_k: u32) -> Result<f64> {
    per_parameter(fork_stale_blocks_in_window, current_k, "k")
}

/// Stale blocks change rate; 0.5 when both rates are zero.
pub fn sbcr(new_rate: f64, old_rate: f64) -> f64 {
    let total = new_rate + old_rate;
    if total > 0.0 {
        new_rate / total
    } else {
        0.5
    }
}

pub fn sm_reinforcement(inputs: &SmSignalInputs) -> SmSignal {
    let decisions = inputs.weight_decisions + inputs.height_decisions;
    let beta1 = decisions > 0 && inputs.weight_decisions as f64 / decisions as f64 > 0.5;
    let rates = inputs.stale_rate_per_k_new + inputs.stale_rate_per_k_old;
    let beta2 = rates > 0.0 && inputs.stale_rate_per_k_old / rates > 0.5;
    SmSignal {
        beta1,
        beta2,
        beta: beta1 && beta2,
    }
}

/// Reward iff the stale rate per Z fell.
pub fn ds_reinforcement(inputs: &DsSignalInputs) -> bool {
    let rates = inputs.stale_rate_per_z_new + inputs.stale_rate_per_z_old;
    rates > 0.0 && inputs.stale_rate_per_z_old / rates > 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: u32,
    pub max: u32,
}

impl Bounds {
    pub fn new(min: u32, max: u32, name: &'static str) -> Result<Self> {
        if min < 1 || min >= max {
            return Err(Error::invalid(
                name,
                format!("need 1 <= min < max, got {min}..{max}"),
            ));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, v: u32) -> bool {
        (self.min..=self.max).contains(&v)
    }
}

pub fn sm_allowed_actions(k: u32, bounds: Bounds) -> &'static [SmAction] {
    if k >= bounds.max {
        &[SmAction::Stop, SmAction::Shrink]
    } else if k <= bounds.min {
        &[SmAction::Grow, SmAction::Stop]
    } else {
        &SmAction::ALL
    }
}

pub fn ds_allowed_actions(z: u32, bounds: Bounds) -> &'static [DsAction] {
    if z >= bounds.max {
        &[DsAction::NoChange, DsAction::Decrease]
    } else if z <= bounds.min {
        &[DsAction::Increase, DsAction::NoChange]
    } else {
        &DsAction::ALL
    }
}

pub fn apply_sm_action(k: u32, bounds: Bounds, action: SmAction) -> u32 {
    let next = match action {
        SmAction::Grow => k + 1,
        SmAction::Shrink => k.saturating_sub(1),
        SmAction::Stop => k,
    };
    next.clamp(bounds.min, bounds.max)
}

pub fn apply_ds_action(z: u32, bounds: Bounds, sbcr_value: f64, action: DsAction) -> u32 {
    match action {
        DsAction::Increase => {
            let next = if sbcr_value >= 0.75 && z <= bounds.max {
                z * 2
            } else {
                z + 2
            };
            next.min(bounds.max)
        }
        DsAction::Decrease => {
            let next = if z > 6 && z.is_multiple_of(2) {
                z / 2
            } else if z > bounds.min {
                z - 2
            } else {
                z
            };
            next.max(bounds.min)
        }
        DsAction::NoChange => z,
    }
}

/// Lets the automaton pick among the actions allowed at `k` and applies it.
pub fn update_sm_safe_parameter(
    k: u32,
    bounds: Bounds,
    la: &mut dyn Automaton,
    rng: &mut dyn rand::RngCore,
) -> Result<(u32, SmAction)> {
    let allowed: Vec<usize> = sm_allowed_actions(k, bounds)
        .iter()
        .map(|a| a.index())
        .collect();
    let action = SmAction::from_index(la.choose(&allowed, rng)?);
    Ok((apply_sm_action(k, bounds, action), action))
}

pub fn update_ds_safe_parameter(
    z: u32,
    bounds: Bounds,
    sbcr_value: f64,
    la: &mut dyn Automaton,
    rng: &mut dyn rand::RngCore,
) -> Result<(u32, DsAction)> {
    let allowed: Vec<usize> = ds_allowed_actions(z, bounds)
        .iter()
        .map(|a| a.index())
        .collect();
    let action = DsAction::from_index(la.choose(&allowed, rng)?);
    Ok((apply_ds_action(z, bounds, sbcr_value, action), action))
}
