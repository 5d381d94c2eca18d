//! Fork-resolving policies.
//!
//! Timestamp-weighted selection rewards the chain holding the *newest* block
//! at each of the first ten heights above the fork point, with larger
//! coefficients on the older heights. A height that only one chain reaches
//! is won by that chain. Each evaluated height is awarded exactly once.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{chain_lengths, ChainScores, ForkSet};
use crate::error::{Error, Result};

/// Per-height coefficients applied to the first ten heights.
pub const HEIGHT_WEIGHTS: [f64; 10] = [1.0, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55];
/// Weight per block beyond the tenth.
pub const OVERFLOW_COEFFICIENT: f64 = 0.5;
pub const WEIGHTED_HEIGHTS: usize = HEIGHT_WEIGHTS.len();

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Length,
    Weight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub winner_index: usize,
    pub criterion: Criterion,
    pub scores: ChainScores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Keep the incumbent (lowest-index) chain.
    FirstSeen,
    /// Pick uniformly among the tied chains.
    Uniform,
}

/// Minimum validating weight a strictly longest chain needs under WVBM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationThreshold {
    /// `ceil(min(L, 10) * fraction)`; the default fraction is one quarter.
    LengthFraction { fraction: f64 },
}

impl Default for ValidationThreshold {
    fn default() -> Self {
        ValidationThreshold::LengthFraction { fraction: 0.25 }
    }
}

impl ValidationThreshold {
    pub fn required(&self, length: u64) -> u64 {
        match *self {
            ValidationThreshold::LengthFraction { fraction } => {
                let capped = length.min(WEIGHTED_HEIGHTS as u64) as f64;
                // round before ceil so 10 * 0.3 does not become 4
                let raw = (capped * fraction * 1e9).round() / 1e9;
                raw.ceil() as u64
            }
        }
    }
}

/// Index of the chain with the newest block at 1-based offset `h` above the
/// fork point, among chains that reach it. Equal stamps go to the lowest
/// index.
fn newest_at(fork: &ForkSet, h: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, chain) in fork.chains.iter().enumerate() {
        if let Some(b) = chain.get(h - 1) {
            match best {
                Some((_, ts)) if b.timestamp <= ts => {}
                _ => best = Some((j, b.timestamp)),
            }
        }
    }
    best.map(|(j, _)| j)
}

fn evaluated_heights(fork: &ForkSet) -> usize {
    let max_len = chain_lengths(fork).into_iter().max().unwrap_or(0) as usize;
    max_len.min(WEIGHTED_HEIGHTS)
}

pub fn chains_weight(fork: &ForkSet) -> Vec<f64> {
    let mut cw = vec![0.0; fork.len()];
    for h in 1..=evaluated_heights(fork) {
        if let Some(j) = newest_at(fork, h) {
            cw[j] += HEIGHT_WEIGHTS[h - 1];
        }
    }
    for (j, &len) in chain_lengths(fork).iter().enumerate() {
        if len > WEIGHTED_HEIGHTS as u64 {
            cw[j] += (len - WEIGHTED_HEIGHTS as u64) as f64 * OVERFLOW_COEFFICIENT;
        }
    }
    cw
}

pub fn validating_weight(fork: &ForkSet) -> Vec<u64> {
    let mut cvw = vec![0u64; fork.len()];
    for h in 1..=evaluated_heights(fork) {
        if let Some(j) = newest_at(fork, h) {
            cvw[j] += 1;
        }
    }
    cvw
}

/// Chain indices sorted by length, longest first; stable.
fn by_length(lengths: &[u64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by(|&a, &b| lengths[b].cmp(&lengths[a]));
    order
}

/// Weights are multiples of 0.05; compare them as integers so sums that are
/// equal in exact arithmetic tie here too.
fn weight_units(w: f64) -> i64 {
    (w * 20.0).round() as i64
}

/// Heaviest chain; equal weights go to the longer chain, then the lower index.
fn heaviest(weights: &[f64], lengths: &[u64]) -> usize {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        weight_units(weights[b])
            .cmp(&weight_units(weights[a]))
            .then(lengths[b].cmp(&lengths[a]))
    });
    order[0]
}

fn non_empty(fork: &ForkSet) -> Result<()> {
    if fork.is_empty() {
        Err(Error::EmptyFork)
    } else {
        Ok(())
    }
}

/// Length decides when the two longest chains differ by more than `k` (at
/// least `k` when `inclusive`); otherwise the heaviest chain wins.
pub fn select_chain_sdtla(fork: &ForkSet, k: u32, inclusive: bool) -> Result<Decision> {
    non_empty(fork)?;
    let lengths = chain_lengths(fork);
    let mut scores = ChainScores {
        lengths: lengths.clone(),
        ..Default::default()
    };
    let order = by_length(&lengths);
    if order.len() == 1 {
        return Ok(Decision {
            winner_index: order[0],
            criterion: Criterion::Length,
            scores,
        });
    }
    let gap = lengths[order[0]] - lengths[order[1]];
    let by_len = if inclusive {
        gap >= k as u64
    } else {
        gap > k as u64
    };
    if by_len {
        return Ok(Decision {
            winner_index: order[0],
            criterion: Criterion::Length,
            scores,
        });
    }
    scores.weights = chains_weight(fork);
    Ok(Decision {
        winner_index: heaviest(&scores.weights, &lengths),
        criterion: Criterion::Weight,
        scores,
    })
}

/// A strictly longest chain wins on length if its validating weight meets
/// the threshold; otherwise, and on length ties, the heaviest chain wins.
pub fn select_chain_wvbm(fork: &ForkSet, threshold: ValidationThreshold) -> Result<Decision> {
    non_empty(fork)?;
    let lengths = chain_lengths(fork);
    let validating = validating_weight(fork);
    let mut scores = ChainScores {
        lengths: lengths.clone(),
        validating_weights: validating.clone(),
        ..Default::default()
    };
    let order = by_length(&lengths);
    if order.len() == 1 {
        return Ok(Decision {
            winner_index: order[0],
            criterion: Criterion::Length,
            scores,
        });
    }
    let top = order[0];
    if lengths[top] > lengths[order[1]] && validating[top] >= threshold.required(lengths[top]) {
        return Ok(Decision {
            winner_index: top,
            criterion: Criterion::Length,
            scores,
        });
    }
    scores.weights = chains_weight(fork);
    Ok(Decision {
        winner_index: heaviest(&scores.weights, &lengths),
        criterion: Criterion::Weight,
        scores,
    })
}

pub fn select_chain_longest<R: Rng + ?Sized>(
    fork: &ForkSet,
    tie_rule: TieRule,
    rng: &mut R,
) -> Result<Decision> {
    non_empty(fork)?;
    let lengths = chain_lengths(fork);
    let max = *lengths.iter().max().expect("non-empty");
    let tied: Vec<usize> = (0..lengths.len()).filter(|&i| lengths[i] == max).collect();
    let winner_index = match tie_rule {
        TieRule::FirstSeen => tied[0],
        TieRule::Uniform => tied[rng.random_range(0..tied.len())],
    };
    Ok(Decision {
        winner_index,
        criterion: Criterion::Length,
        scores: ChainScores {
            lengths,
            ..Default::default()
        },
    })
}
