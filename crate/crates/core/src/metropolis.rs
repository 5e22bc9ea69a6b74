//! Metropolis chains over a basis of kernel moves: the baseline sampler.
//! A step proposes `u +/- delta` for a uniformly chosen move and sign and
//! accepts with the monomial ratio `(x^u' / u'!) / (x^u / u!)`, computed
//! in log space. Out-of-bound proposals leave the chain in place and
//! still count as a step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ConfigurationMatrix, CountVector, ModelSpec};

/// An integer table move lying in the kernel of the configuration matrix,
/// so that adding or subtracting it preserves the statistics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Move {
    delta: Vec<i64>,
}

impl Move {
    /// Validates kernel membership before accepting a user-supplied move.
    pub fn validated(delta: Vec<i64>, matrix: &ConfigurationMatrix) -> Result<Move> {
        if delta.len() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.cols(),
                got: delta.len(),
            });
        }
        if matrix.apply_signed(&delta).iter().any(|&v| v != 0) {
            return Err(Error::MoveNotInKernel);
        }
        Ok(Move { delta })
    }

    pub fn delta(&self) -> &[i64] {
        &self.delta
    }
}

/// The basic moves of the two-way independence model: one +1/-1 swap per
/// pair of rows and pair of columns.
pub fn basis_two_way(rows: usize, cols: usize) -> Vec<Move> {
    assert!(rows >= 2 && cols >= 2, "need at least a 2x2 table");
    let m = rows * cols;
    let cell = |i: usize, j: usize| i * cols + j;
    let mut moves = Vec::with_capacity(rows * (rows - 1) * cols * (cols - 1) / 4);
    for i1 in 0..rows {
        for i2 in i1 + 1..rows {
            for j1 in 0..cols {
                for j2 in j1 + 1..cols {
                    let mut delta = vec![0i64; m];
                    delta[cell(i1, j1)] = 1;
                    delta[cell(i2, j2)] = 1;
                    delta[cell(i1, j2)] = -1;
                    delta[cell(i2, j1)] = -1;
                    moves.push(Move { delta });
                }
            }
        }
    }
    moves
}

/// The known basis for the 2x3x3 no-three-way-interaction model: nine
/// eight-cell swaps plus six twelve-cell moves.
///
/// The twelve-cell family pairs a permutation assignment of third indices
/// in layer one with a mirrored assignment in layer two; the partner
/// permutation is found by solving the kernel condition (it must be a
/// permutation avoiding the first everywhere), and the resulting moves
/// are deduplicated up to sign.
pub fn basis_no_three_way() -> Vec<Move> {
    let matrix = ConfigurationMatrix::no_three_way_2x3x3();
    let cell = |i1: usize, i2: usize, i3: usize| 9 * i1 + 3 * i2 + i3;
    let mut moves = Vec::with_capacity(15);
    for i2 in 0..3 {
        for j2 in i2 + 1..3 {
            for i3 in 0..3 {
                for j3 in i3 + 1..3 {
                    let mut delta = vec![0i64; 18];
                    delta[cell(0, i2, i3)] = 1;
                    delta[cell(0, j2, j3)] = 1;
                    delta[cell(1, i2, j3)] = 1;
                    delta[cell(1, j2, i3)] = 1;
                    delta[cell(0, i2, j3)] = -1;
                    delta[cell(0, j2, i3)] = -1;
                    delta[cell(1, i2, i3)] = -1;
                    delta[cell(1, j2, j3)] = -1;
                    debug_assert!(matrix.apply_signed(&delta).iter().all(|&v| v == 0));
                    moves.push(Move { delta });
                }
            }
        }
    }

    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut long_moves: Vec<Vec<i64>> = Vec::with_capacity(6);
    for pi in PERMS {
        for pj in PERMS {
            if (0..3).any(|k| pi[k] == pj[k]) {
                continue; // overlapping cells would cancel below twelve
            }
            let mut delta = vec![0i64; 18];
            for k in 0..3 {
                delta[cell(0, k, pi[k])] += 1;
                delta[cell(0, k, pj[k])] -= 1;
                delta[cell(1, k, pj[k])] += 1;
                delta[cell(1, k, pi[k])] -= 1;
            }
            if matrix.apply_signed(&delta).iter().any(|&v| v != 0) {
                continue;
            }
            // Canonical sign: first nonzero entry positive.
            if delta.iter().find(|&&v| v != 0).is_some_and(|&v| v < 0) {
                delta.iter_mut().for_each(|v| *v = -*v);
            }
            if !long_moves.contains(&delta) {
                long_moves.push(delta);
            }
        }
    }
    moves.extend(long_moves.into_iter().map(|delta| Move { delta }));
    moves
}

/// Chain setup: the initial table fixes the fiber.
#[derive(Clone, Debug)]
pub struct ChainConfig {
    pub burn_in: u64,
    pub length: u64,
    pub seed: u64,
    pub initial: CountVector,
}

/// Recorded states with per-state acceptance flags and overall counters
/// (post burn-in).
#[derive(Clone, Debug)]
pub struct ChainRun {
    pub states: Vec<CountVector>,
    /// Whether the step that produced each recorded state was accepted.
    pub accepted_flags: Vec<bool>,
    pub proposals: u64,
    pub acceptances: u64,
}

impl ChainRun {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.acceptances as f64 / self.proposals as f64
        }
    }
}

struct LogFactorials {
    table: Vec<f64>,
}

impl LogFactorials {
    fn new() -> Self {
        LogFactorials { table: vec![0.0] }
    }

    fn get(&mut self, k: u64) -> f64 {
        let k = k as usize;
        while self.table.len() <= k {
            let n = self.table.len() as f64;
            let last = *self.table.last().unwrap();
            self.table.push(last + n.ln());
        }
        self.table[k]
    }
}

struct Stepper<'a> {
    basis: &'a [Move],
    ln_odds: Vec<f64>,
    logfact: LogFactorials,
}

impl<'a> Stepper<'a> {
    fn new(model: &ModelSpec, basis: &'a [Move]) -> Self {
        Stepper {
            basis,
            ln_odds: model.odds_f64().iter().map(|&x| x.ln()).collect(),
            logfact: LogFactorials::new(),
        }
    }

    /// One proposal; mutates `counts` on acceptance and reports the flag.
    fn step(&mut self, counts: &mut [u64], rng: &mut ChaCha8Rng) -> bool {
        let mv = &self.basis[rng.gen_range(0..self.basis.len())];
        let sign: i64 = if rng.gen_bool(0.5) { 1 } else { -1 };
        let mut log_ratio = 0.0;
        for (j, &dz) in mv.delta.iter().enumerate() {
            if dz == 0 {
                continue;
            }
            let step = sign * dz;
            let next = counts[j] as i64 + step;
            if next < 0 {
                return false; // stay; the proposal still counts as a step
            }
            log_ratio +=
                step as f64 * self.ln_odds[j] + self.logfact.get(counts[j]) - self.logfact.get(next as u64);
        }
        if log_ratio < 0.0 && rng.gen::<f64>() >= log_ratio.exp() {
            return false;
        }
        for (j, &dz) in mv.delta.iter().enumerate() {
            if dz != 0 {
                counts[j] = (counts[j] as i64 + sign * dz) as u64;
            }
        }
        true
    }
}

/// A single Metropolis proposal from `current`, returning the next state.
pub fn metropolis_step(
    model: &ModelSpec,
    current: &CountVector,
    basis: &[Move],
    rng: &mut ChaCha8Rng,
) -> CountVector {
    let mut counts = current.counts().to_vec();
    Stepper::new(model, basis).step(&mut counts, rng);
    CountVector::new(counts)
}

/// Runs a chain: `burn_in` steps are discarded, then `length` states are
/// recorded, stepping `thin` times between records. Deterministic given
/// the seed.
pub fn run_chain(
    model: &ModelSpec,
    config: &ChainConfig,
    basis: &[Move],
    thin: u64,
) -> Result<ChainRun> {
    if basis.is_empty() {
        return Err(Error::NoBasisAvailable);
    }
    let m = model.matrix().cols();
    if config.initial.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: config.initial.len(),
        });
    }
    for mv in basis {
        if mv.delta.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: mv.delta.len(),
            });
        }
    }
    let thin = thin.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut stepper = Stepper::new(model, basis);
    let mut counts = config.initial.counts().to_vec();

    for _ in 0..config.burn_in {
        stepper.step(&mut counts, &mut rng);
    }

    let mut states = Vec::with_capacity(config.length as usize);
    let mut accepted_flags = Vec::with_capacity(config.length as usize);
    let mut proposals = 0u64;
    let mut acceptances = 0u64;
    for _ in 0..config.length {
        let mut accepted = false;
        for _ in 0..thin {
            accepted = stepper.step(&mut counts, &mut rng);
            proposals += 1;
            acceptances += accepted as u64;
        }
        states.push(CountVector::new(counts.clone()));
        accepted_flags.push(accepted);
    }
    Ok(ChainRun {
        states,
        accepted_flags,
        proposals,
        acceptances,
    })
}
