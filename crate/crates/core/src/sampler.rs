//! The sequential direct sampler: starting from the target statistics, it
//! picks one count at a time with probability proportional to the
//! estimated expected counts of the current state, subtracts the picked
//! column, and stops at zero. One walk emits one table.
//!
//! With the exact estimator the transition probability is the
//! partition-function ratio kernel and the output follows the conditional
//! distribution exactly; with the closed-form or scaling estimators the
//! walk stays supported on the same lattice but is biased where the MLE
//! and the unbiased estimate differ.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decomposable::{decomposable_mu_f64, DecomposableStructure};
use crate::error::{Error, Result};
use crate::fiber::{umvue_cached, FiberLimits, ZCache};
use crate::mle::{ips_solve_raw, two_way_mle_f64, IpsConfig};
use crate::model::{ConfigurationMatrix, CountVector, ModelSpec, SufficientStatistics};

/// How the per-step expected counts are estimated.
#[derive(Clone, Debug)]
pub enum EstimatorKind {
    /// Exact partition-function ratios from the fiber oracle. Exact, but
    /// needs the fiber to be enumerable.
    ExactUmvue,
    /// Closed rational form for two-way independence models.
    TwoWayRational,
    /// Closed rational form for a decomposable model with the given
    /// clique structure.
    Decomposable(DecomposableStructure),
    /// Generalized iterative proportional scaling with the given stopping
    /// rule.
    Ips(IpsConfig),
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::ExactUmvue => "exact",
            EstimatorKind::TwoWayRational => "rational",
            EstimatorKind::Decomposable(_) => "decomposable",
            EstimatorKind::Ips(_) => "ips",
        }
    }
}

/// Knobs for the sampling loop.
#[derive(Clone, Copy, Debug)]
pub struct SamplerOptions {
    /// Discarded paths allowed before giving up. Discards should be rare;
    /// exhausting this signals a misconfigured estimator.
    pub retry_cap: u32,
    pub fiber_limits: FiberLimits,
    /// Record intermediate statistics vectors on emitted paths.
    pub record_states: bool,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        SamplerOptions {
            retry_cap: 100,
            fiber_limits: FiberLimits::default(),
            record_states: false,
        }
    }
}

/// The ordered cell picks of one walk, and optionally the statistics
/// vector after each pick (the final one is zero).
#[derive(Clone, Debug)]
pub struct SamplePath {
    pub picks: Vec<usize>,
    pub states: Option<Vec<SufficientStatistics>>,
}

/// One emitted table with its path and retry/solver telemetry.
#[derive(Clone, Debug)]
pub struct DrawResult {
    pub table: CountVector,
    pub path: SamplePath,
    /// Paths discarded before this one succeeded.
    pub retries: u32,
    /// Scaling iteration counts per step (empty for other estimators).
    pub ips_iterations: Vec<u32>,
}

/// Normalized transition probabilities at one state.
#[derive(Clone, Debug)]
pub struct StepInfo {
    pub probs: Vec<f64>,
    cum: Vec<f64>,
    pub ips_iterations: u32,
}

impl StepInfo {
    fn from_mu(mu: Vec<f64>, ips_iterations: u32) -> Result<Self> {
        let sum: f64 = mu.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::DegenerateState);
        }
        let probs: Vec<f64> = mu.iter().map(|&v| v / sum).collect();
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cum.push(acc);
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        Ok(StepInfo {
            probs,
            cum,
            ips_iterations,
        })
    }

    /// Inverse-CDF pick with a single uniform variate.
    fn pick(&self, u: f64) -> usize {
        self.cum
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cum.len() - 1)
    }
}

enum CachedStep {
    Ready(Arc<StepInfo>),
    NotConverged(u32),
    Degenerate,
}

/// A sampling session for one model and target statistics vector.
///
/// Construction validates the estimator against the model; draws are then
/// cheap and reproducible. The session is `Sync`: the partition-function
/// and step caches are shared behind locks, and per-draw randomness comes
/// from a stream index so results do not depend on scheduling.
pub struct TableSampler<'a> {
    model: &'a ModelSpec,
    b: SufficientStatistics,
    n: u64,
    estimator: EstimatorKind,
    options: SamplerOptions,
    zcache: Option<ZCache>,
    step_cache: Mutex<HashMap<Vec<i64>, CachedStep>>,
    two_way_shape: Option<(usize, usize)>,
}

impl<'a> TableSampler<'a> {
    pub fn new(
        model: &'a ModelSpec,
        b: SufficientStatistics,
        estimator: EstimatorKind,
    ) -> Result<Self> {
        Self::with_options(model, b, estimator, SamplerOptions::default())
    }

    pub fn with_options(
        model: &'a ModelSpec,
        b: SufficientStatistics,
        estimator: EstimatorKind,
        options: SamplerOptions,
    ) -> Result<Self> {
        let n = match model.matrix().degree(&b) {
            Ok(n) => n,
            Err(Error::NonIntegralDegree(v)) => {
                return Err(Error::InvalidB(format!(
                    "degree {v} is not a nonnegative integer"
                )))
            }
            Err(e) => return Err(e),
        };
        let mut zcache = None;
        let mut two_way_shape = None;
        match &estimator {
            EstimatorKind::ExactUmvue => {
                let cache = ZCache::new(options.fiber_limits);
                let z = cache.z(model, b.values())?;
                if z.is_zero() {
                    return Err(Error::InvalidB(
                        "statistics lie outside the semigroup".to_string(),
                    ));
                }
                zcache = Some(cache);
            }
            EstimatorKind::TwoWayRational => {
                if !model.has_uniform_odds() {
                    return Err(Error::IncompatibleEstimator(
                        "two-way closed form needs uniform odds".to_string(),
                    ));
                }
                two_way_shape = Some(detect_two_way(model.matrix()).ok_or_else(|| {
                    Error::IncompatibleEstimator(
                        "matrix is not a two-way independence configuration".to_string(),
                    )
                })?);
            }
            EstimatorKind::Decomposable(structure) => {
                if !model.has_uniform_odds() {
                    return Err(Error::IncompatibleEstimator(
                        "decomposable closed form needs uniform odds".to_string(),
                    ));
                }
                if structure.cell_count() != model.matrix().cols()
                    || structure.configuration_matrix() != *model.matrix()
                {
                    return Err(Error::IncompatibleEstimator(
                        "clique structure does not generate this matrix".to_string(),
                    ));
                }
            }
            EstimatorKind::Ips(config) => {
                if !(config.epsilon > 0.0) || config.max_iterations == 0 {
                    return Err(Error::IncompatibleEstimator(
                        "scaling config needs epsilon > 0 and at least one iteration".to_string(),
                    ));
                }
                if !model.matrix().is_nonnegative() {
                    return Err(Error::NegativeEntryInA);
                }
            }
        }
        Ok(TableSampler {
            model,
            b,
            n,
            estimator,
            options,
            zcache,
            step_cache: Mutex::new(HashMap::new()),
            two_way_shape,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        self.model
    }

    pub fn statistics(&self) -> &SufficientStatistics {
        &self.b
    }

    pub fn total_count(&self) -> u64 {
        self.n
    }

    pub fn estimator(&self) -> &EstimatorKind {
        &self.estimator
    }

    /// Transition probabilities at `beta` with `remaining` counts left.
    ///
    /// Estimates are divided by the remaining count and renormalized;
    /// scaling components below `epsilon / m` are snapped to zero first so
    /// that float fuzz never resurrects a transition the model forbids.
    pub fn step_probabilities(&self, beta: &[i64], remaining: u64) -> Result<Arc<StepInfo>> {
        match &self.estimator {
            EstimatorKind::ExactUmvue => {
                if let Some(hit) = self.cached(beta) {
                    return hit;
                }
                let zcache = self.zcache.as_ref().expect("exact sampler has a cache");
                let mu = umvue_cached(self.model, beta, zcache)?;
                let remaining = BigRational::from_integer(remaining.into());
                let probs: Vec<f64> = mu
                    .iter()
                    .map(|v| (v / &remaining).to_f64().unwrap_or(0.0))
                    .collect();
                let entry = match StepInfo::from_mu(probs, 0) {
                    Ok(info) => CachedStep::Ready(Arc::new(info)),
                    Err(Error::DegenerateState) => CachedStep::Degenerate,
                    Err(e) => return Err(e),
                };
                let mut cache = self.step_cache.lock().unwrap();
                let entry = cache.entry(beta.to_vec()).or_insert(entry);
                Self::entry_result(entry)
            }
            EstimatorKind::TwoWayRational => {
                let (r, _) = self.two_way_shape.expect("shape checked at construction");
                let (row_sums, col_sums) = beta.split_at(r);
                let mu = two_way_mle_f64(row_sums, col_sums, remaining as f64);
                Ok(Arc::new(StepInfo::from_mu(mu, 0)?))
            }
            EstimatorKind::Decomposable(structure) => {
                let blocks = structure.split_stats(beta)?;
                let mu = decomposable_mu_f64(structure, &blocks)?;
                Ok(Arc::new(StepInfo::from_mu(mu, 0)?))
            }
            EstimatorKind::Ips(config) => {
                if let Some(hit) = self.cached(beta) {
                    return hit;
                }
                let res = ips_solve_raw(self.model, beta, remaining, config)?;
                let entry = if res.converged {
                    let threshold = config.epsilon / self.model.matrix().cols() as f64;
                    let mu: Vec<f64> = res
                        .mu_hat
                        .iter()
                        .map(|&v| if v < threshold { 0.0 } else { v })
                        .collect();
                    match StepInfo::from_mu(mu, res.iterations) {
                        Ok(info) => CachedStep::Ready(Arc::new(info)),
                        Err(Error::DegenerateState) => CachedStep::Degenerate,
                        Err(e) => return Err(e),
                    }
                } else {
                    CachedStep::NotConverged(res.iterations)
                };
                let mut cache = self.step_cache.lock().unwrap();
                let entry = cache.entry(beta.to_vec()).or_insert(entry);
                Self::entry_result(entry)
            }
        }
    }

    fn cached(&self, beta: &[i64]) -> Option<Result<Arc<StepInfo>>> {
        let cache = self.step_cache.lock().unwrap();
        cache.get(beta).map(Self::entry_result)
    }

    fn entry_result(entry: &CachedStep) -> Result<Arc<StepInfo>> {
        match entry {
            CachedStep::Ready(info) => Ok(info.clone()),
            CachedStep::NotConverged(it) => Err(Error::EstimatorFailed(format!(
                "scaling stopped after {it} iterations"
            ))),
            CachedStep::Degenerate => Err(Error::DegenerateState),
        }
    }

    /// Draws one table; stream 0 of the given seed.
    pub fn draw_table(&self, seed: u64) -> Result<DrawResult> {
        self.draw_stream(seed, 0)
    }

    /// Draws one table from a dedicated randomness stream, so that batch
    /// draws are reproducible independent of evaluation order.
    ///
    /// A path is discarded and redrawn (from the same stream) when the
    /// estimator fails or every transition probability vanishes.
    pub fn draw_stream(&self, seed: u64, stream: u64) -> Result<DrawResult> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let matrix = self.model.matrix();
        let m = matrix.cols();
        let mut retries = 0u32;
        'attempt: loop {
            let mut counts = vec![0u64; m];
            let mut picks = Vec::with_capacity(self.n as usize);
            let mut states = self.options.record_states.then(Vec::new);
            let mut ips_iterations = Vec::new();
            let mut beta = self.b.values().to_vec();
            for t in 0..self.n {
                let remaining = self.n - t;
                let info = match self.step_probabilities(&beta, remaining) {
                    Ok(info) => info,
                    Err(Error::EstimatorFailed(_)) | Err(Error::DegenerateState) => {
                        if retries >= self.options.retry_cap {
                            return Err(Error::RetriesExhausted(retries));
                        }
                        retries += 1;
                        continue 'attempt;
                    }
                    Err(e) => return Err(e),
                };
                let j = info.pick(rng.gen::<f64>());
                counts[j] += 1;
                picks.push(j);
                if matches!(self.estimator, EstimatorKind::Ips(_)) {
                    ips_iterations.push(info.ips_iterations);
                }
                for (b, &a) in beta.iter_mut().zip(matrix.column(j).iter()) {
                    *b -= a;
                }
                if let Some(states) = states.as_mut() {
                    states.push(SufficientStatistics::new(beta.clone()));
                }
            }
            debug_assert!(beta.iter().all(|&v| v == 0), "walk must end at zero");
            return Ok(DrawResult {
                table: CountVector::new(counts),
                path: SamplePath { picks, states },
                retries,
                ips_iterations,
            });
        }
    }

    /// Draws `count` tables on streams `0..count` of the seed.
    pub fn draw_batch(&self, count: usize, seed: u64) -> Result<Vec<DrawResult>> {
        (0..count)
            .map(|i| self.draw_stream(seed, i as u64))
            .collect()
    }

    /// Product of step probabilities along a pick sequence; zero when the
    /// path leaves the support.
    pub fn path_probability(&self, path: &SamplePath) -> Result<f64> {
        let matrix = self.model.matrix();
        if path.picks.len() != self.n as usize {
            return Err(Error::InconsistentPath);
        }
        let mut beta = self.b.values().to_vec();
        let mut prob = 1.0f64;
        for (t, &j) in path.picks.iter().enumerate() {
            if j >= matrix.cols() {
                return Err(Error::InconsistentPath);
            }
            let info = self.step_probabilities(&beta, self.n - t as u64)?;
            let p = info.probs[j];
            if p == 0.0 {
                return Ok(0.0);
            }
            prob *= p;
            for (b, &a) in beta.iter_mut().zip(matrix.column(j).iter()) {
                *b -= a;
            }
        }
        Ok(prob)
    }

    /// Exact rational path probability under the partition-function
    /// kernel. Only available with the exact estimator.
    pub fn path_probability_exact(&self, path: &SamplePath) -> Result<BigRational> {
        let Some(cache) = self.zcache.as_ref() else {
            return Err(Error::IncompatibleEstimator(
                "exact path probabilities need the exact estimator".to_string(),
            ));
        };
        let matrix = self.model.matrix();
        if path.picks.len() != self.n as usize {
            return Err(Error::InconsistentPath);
        }
        let mut beta = self.b.values().to_vec();
        let mut prob = BigRational::one();
        for (t, &j) in path.picks.iter().enumerate() {
            if j >= matrix.cols() {
                return Err(Error::InconsistentPath);
            }
            let z_here = cache.z(self.model, &beta)?;
            if z_here.is_zero() {
                return Ok(BigRational::zero());
            }
            for (b, &a) in beta.iter_mut().zip(matrix.column(j).iter()) {
                *b -= a;
            }
            let z_next = cache.z(self.model, &beta)?;
            if z_next.is_zero() {
                return Ok(BigRational::zero());
            }
            let remaining = BigRational::from_integer((self.n - t as u64).into());
            prob *= &self.model.odds()[j] * &z_next.value / &z_here.value / remaining;
        }
        Ok(prob)
    }
}

/// Checks whether the matrix is exactly the two-way independence
/// configuration for some table shape, returning the shape.
fn detect_two_way(matrix: &ConfigurationMatrix) -> Option<(usize, usize)> {
    let d = matrix.rows();
    let m = matrix.cols();
    (1..d)
        .map(|r| (r, d - r))
        .filter(|&(r, c)| r * c == m)
        .find(|&(r, c)| &ConfigurationMatrix::two_way_independence(r, c) == matrix)
}

/// One-shot convenience wrappers over a throwaway session.
pub fn step_probabilities(
    model: &ModelSpec,
    beta: &SufficientStatistics,
    remaining: u64,
    estimator: EstimatorKind,
) -> Result<Vec<f64>> {
    let sampler = TableSampler::new(model, beta.clone(), estimator)?;
    if sampler.total_count() != remaining || remaining == 0 {
        return Err(Error::InvalidB(format!(
            "remaining count {} does not match the degree {}",
            remaining,
            sampler.total_count()
        )));
    }
    Ok(sampler
        .step_probabilities(beta.values(), remaining)?
        .probs
        .clone())
}

pub fn draw_table(
    model: &ModelSpec,
    b: &SufficientStatistics,
    estimator: EstimatorKind,
    seed: u64,
) -> Result<DrawResult> {
    TableSampler::new(model, b.clone(), estimator)?.draw_table(seed)
}

pub fn draw_batch(
    model: &ModelSpec,
    b: &SufficientStatistics,
    estimator: EstimatorKind,
    count: usize,
    seed: u64,
) -> Result<Vec<DrawResult>> {
    TableSampler::new(model, b.clone(), estimator)?.draw_batch(count, seed)
}

pub fn path_probability(
    model: &ModelSpec,
    b: &SufficientStatistics,
    path: &SamplePath,
    estimator: EstimatorKind,
) -> Result<f64> {
    TableSampler::new(model, b.clone(), estimator)?.path_probability(path)
}
