//! Brute-force fork evaluation shared by the integration suites.
//!
//! Weights are kept in integer units of 0.05 so the evaluator never touches
//! floating point: height `h` (1-based, h <= 10) is worth `21 - h` units and
//! every block past the tenth is worth 10 units.

#![allow(dead_code)]

use forksim::chain::{Block, BlockId, ForkSet, Miner};
use forksim::frp::Criterion;
use rand::seq::SliceRandom;
use rand::Rng;

pub const UNIT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub winner: usize,
    pub criterion: Criterion,
}

/// Per-chain timestamps, ascending within each chain.
pub type Stamps = Vec<Vec<f64>>;

/// Random fork: 1..=max_chains chains of 1..=max_len blocks, every timestamp
/// distinct across the whole fork.
pub fn random_stamps<R: Rng>(rng: &mut R, max_chains: usize, max_len: usize) -> Stamps {
    let n = rng.random_range(1..=max_chains);
    let lens: Vec<usize> = (0..n).map(|_| rng.random_range(1..=max_len)).collect();
    let total: usize = lens.iter().sum();
    // distinct integers in a small range force many interleavings
    let mut pool: Vec<u32> = (1..=(total as u32 * 3)).collect();
    pool.shuffle(rng);
    let mut it = pool.into_iter();
    lens.iter()
        .map(|&l| {
            let mut s: Vec<f64> = (&mut it).take(l).map(|v| v as f64 * 7.5).collect();
            s.sort_by(f64::total_cmp);
            s
        })
        .collect()
}

pub fn build_fork(fork_point_height: u64, stamps: &Stamps) -> ForkSet {
    let root = BlockId(1_000_000);
    let mut next = 0u64;
    let chains = stamps
        .iter()
        .enumerate()
        .map(|(ci, chain)| {
            let mut parent = root;
            chain
                .iter()
                .enumerate()
                .map(|(i, &ts)| {
                    next += 1;
                    let b = Block {
                        id: BlockId(next),
                        parent: Some(parent),
                        height: fork_point_height + 1 + i as u64,
                        timestamp: ts,
                        miner: if ci == 0 {
                            Miner::Honest
                        } else {
                            Miner::Selfish
                        },
                    };
                    parent = b.id;
                    b
                })
                .collect()
        })
        .collect();
    ForkSet::new(fork_point_height, chains).expect("generated fork is well formed")
}

fn lengths(stamps: &Stamps) -> Vec<usize> {
    stamps.iter().map(Vec::len).collect()
}

/// Chain owning the newest block at each of the first ten heights reached.
fn height_winners(stamps: &Stamps) -> Vec<usize> {
    let top = lengths(stamps).into_iter().max().unwrap_or(0).min(10);
    (0..top)
        .map(|h| {
            let mut best = usize::MAX;
            for (j, chain) in stamps.iter().enumerate() {
                if let Some(&ts) = chain.get(h) {
                    if best == usize::MAX || ts > stamps[best][h] {
                        best = j;
                    }
                }
            }
            best
        })
        .collect()
}

pub fn weight_units(stamps: &Stamps) -> Vec<u64> {
    let mut w = vec![0u64; stamps.len()];
    for (h, &j) in height_winners(stamps).iter().enumerate() {
        w[j] += 20 - h as u64;
    }
    for (j, &l) in lengths(stamps).iter().enumerate() {
        w[j] += l.saturating_sub(10) as u64 * 10;
    }
    w
}

pub fn validating_counts(stamps: &Stamps) -> Vec<u64> {
    let mut v = vec![0u64; stamps.len()];
    for j in height_winners(stamps) {
        v[j] += 1;
    }
    v
}

/// Heaviest chain; ties go to the longer chain, then the earlier index.
fn heaviest(stamps: &Stamps) -> usize {
    let w = weight_units(stamps);
    let l = lengths(stamps);
    let mut best = 0;
    for j in 1..stamps.len() {
        if (w[j], l[j]) > (w[best], l[best]) {
            best = j;
        }
    }
    best
}

/// Index and length of the first longest chain, and the runner-up length.
fn leaders(stamps: &Stamps) -> (usize, usize, usize) {
    let l = lengths(stamps);
    let max = *l.iter().max().unwrap();
    let first = l.iter().position(|&x| x == max).unwrap();
    let second = l
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != first)
        .map(|(_, &x)| x)
        .max()
        .unwrap_or(0);
    (first, max, second)
}

/// `k = None` stands for an unbounded gap requirement.
pub fn sdtla(stamps: &Stamps, k: Option<u64>, inclusive: bool) -> Verdict {
    if stamps.len() == 1 {
        return Verdict {
            winner: 0,
            criterion: Criterion::Length,
        };
    }
    let (first, max, second) = leaders(stamps);
    let gap = (max - second) as u64;
    let by_length = match k {
        None => false,
        Some(k) if inclusive => gap >= k,
        Some(k) => gap > k,
    };
    if by_length {
        Verdict {
            winner: first,
            criterion: Criterion::Length,
        }
    } else {
        Verdict {
            winner: heaviest(stamps),
            criterion: Criterion::Weight,
        }
    }
}

pub fn quarter_threshold(len: usize) -> u64 {
    (len.min(10) as u64).div_ceil(4)
}

pub fn wvbm(stamps: &Stamps) -> Verdict {
    if stamps.len() == 1 {
        return Verdict {
            winner: 0,
            criterion: Criterion::Length,
        };
    }
    let (first, max, second) = leaders(stamps);
    if max > second && validating_counts(stamps)[first] >= quarter_threshold(max) {
        Verdict {
            winner: first,
            criterion: Criterion::Length,
        }
    } else {
        Verdict {
            winner: heaviest(stamps),
            criterion: Criterion::Weight,
        }
    }
}
