//! Exact brute-force engine over fibers: enumeration, the partition
//! function `Z(b; x) = sum over the fiber of x^v / v!`, conditional
//! probabilities, and the unbiased estimate of expected counts obtained
//! from partition-function ratios.
//!
//! Everything here is computed in exact rational arithmetic and serves as
//! the independent oracle for the samplers and the closed-form estimators.
//! It is deliberately desk-scale: enumeration stops with an error once a
//! configurable element cap is exceeded.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{ConfigurationMatrix, CountVector, ModelSpec, SufficientStatistics};

/// Caps on the brute-force search.
#[derive(Clone, Copy, Debug)]
pub struct FiberLimits {
    /// Maximum number of fiber elements visited before giving up.
    pub max_elements: u64,
}

impl Default for FiberLimits {
    fn default() -> Self {
        FiberLimits {
            max_elements: 10_000_000,
        }
    }
}

/// All tables `v >= 0` with `Av = b`, in ascending lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fiber {
    pub elements: Vec<CountVector>,
}

impl Fiber {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// An exactly evaluated partition function value.
///
/// `value` is zero exactly when the fiber is empty, matching the
/// convention `Z(b; x) = 0` for statistics outside the semigroup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolynomialValue {
    pub value: BigRational,
    pub term_count: u64,
}

impl PolynomialValue {
    fn zero() -> Self {
        PolynomialValue {
            value: BigRational::zero(),
            term_count: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }
}

/// Depth-first search over cells in lexicographic order.
///
/// Bounds per cell come from the remaining total count (fixed by the
/// degree functional) and, for rows whose remaining columns are all
/// nonnegative, from the row residual. A node is pruned when a row
/// residual goes negative with no later negative entry to recover it, or
/// when the residual exceeds what the remaining count can still supply.
/// For nonnegative matrices this is exactly residual-feasibility pruning;
/// matrices with negative entries stay correct through the suffix checks.
struct FiberWalk<'a> {
    matrix: &'a ConfigurationMatrix,
    odds: Option<&'a [BigRational]>,
    limits: FiberLimits,
    // has_neg_suffix[i * (m + 1) + j]: does row i have a negative entry in
    // any column >= j?
    has_neg_suffix: Vec<bool>,
    // max_pos_suffix[i * (m + 1) + j]: largest nonnegative entry of row i
    // over columns >= j.
    max_pos_suffix: Vec<i64>,
    visited: u64,
}

enum Flow {
    Continue,
    Stop,
}

impl<'a> FiberWalk<'a> {
    fn new(
        matrix: &'a ConfigurationMatrix,
        odds: Option<&'a [BigRational]>,
        limits: FiberLimits,
    ) -> Self {
        let d = matrix.rows();
        let m = matrix.cols();
        let mut has_neg_suffix = vec![false; d * (m + 1)];
        let mut max_pos_suffix = vec![0i64; d * (m + 1)];
        for i in 0..d {
            for j in (0..m).rev() {
                let a = matrix.entry(i, j);
                has_neg_suffix[i * (m + 1) + j] = a < 0 || has_neg_suffix[i * (m + 1) + j + 1];
                max_pos_suffix[i * (m + 1) + j] = max_pos_suffix[i * (m + 1) + j + 1].max(a);
            }
        }
        FiberWalk {
            matrix,
            odds,
            limits,
            has_neg_suffix,
            max_pos_suffix,
            visited: 0,
        }
    }

    /// Runs the walk; `visit` returns whether to keep searching.
    fn run(
        &mut self,
        beta: &[i64],
        visit: &mut dyn FnMut(&[u64], Option<&BigRational>) -> Flow,
    ) -> Result<()> {
        let d = self.matrix.rows();
        if beta.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: beta.len(),
            });
        }
        let Some(n) = self.matrix.degree_of(beta) else {
            return Ok(()); // non-integral degree: the fiber is empty
        };
        let m = self.matrix.cols();
        let mut residual = beta.to_vec();
        let mut v = vec![0u64; m];
        let weight = BigRational::one();
        self.descend(0, n, &mut residual, &mut v, weight, visit)?;
        Ok(())
    }

    fn dead(&self, depth: usize, remaining: u64, residual: &[i64]) -> bool {
        let m = self.matrix.cols();
        for (i, &r) in residual.iter().enumerate() {
            let idx = i * (m + 1) + depth;
            if r < 0 && !self.has_neg_suffix[idx] {
                return true;
            }
            if r > 0 && self.max_pos_suffix[idx].saturating_mul(remaining as i64) < r {
                return true;
            }
        }
        false
    }

    fn descend(
        &mut self,
        depth: usize,
        remaining: u64,
        residual: &mut Vec<i64>,
        v: &mut Vec<u64>,
        weight: BigRational,
        visit: &mut dyn FnMut(&[u64], Option<&BigRational>) -> Flow,
    ) -> Result<Flow> {
        let m = self.matrix.cols();
        if self.dead(depth, remaining, residual) {
            return Ok(Flow::Continue);
        }
        if depth == m {
            if remaining == 0 && residual.iter().all(|&r| r == 0) {
                self.visited += 1;
                if self.visited > self.limits.max_elements {
                    return Err(Error::FiberTooLarge {
                        cap: self.limits.max_elements,
                    });
                }
                return Ok(visit(v, self.odds.map(|_| &weight)));
            }
            return Ok(Flow::Continue);
        }

        let col = self.matrix.column(depth);
        // Row-derived cap, usable only when the suffix after this column
        // cannot push the residual back up.
        let mut cap = remaining;
        for (i, &a) in col.iter().enumerate() {
            if a > 0 && !self.has_neg_suffix[i * (m + 1) + depth + 1] {
                if residual[i] < 0 {
                    return Ok(Flow::Continue);
                }
                cap = cap.min((residual[i] / a) as u64);
            }
        }

        let mut weight = weight;
        let mut count = 0u64;
        loop {
            v[depth] = count;
            let flow = self.descend(
                depth + 1,
                remaining - count,
                residual,
                v,
                weight.clone(),
                visit,
            )?;
            if matches!(flow, Flow::Stop) {
                v[depth] = 0;
                return Ok(Flow::Stop);
            }
            if count == cap {
                break;
            }
            count += 1;
            for (r, &a) in residual.iter_mut().zip(col.iter()) {
                *r -= a;
            }
            if let Some(odds) = self.odds {
                // x^v / v! grows by x_j / count when v_j increments.
                weight *= &odds[depth];
                weight /= BigRational::from_integer(BigInt::from(count));
            }
        }
        // Restore the residual consumed by this cell.
        for (r, &a) in residual.iter_mut().zip(col.iter()) {
            *r += a * cap as i64;
        }
        v[depth] = 0;
        Ok(Flow::Continue)
    }
}

/// Enumerates every table in the fiber of `beta`.
pub fn enumerate_fiber(
    matrix: &ConfigurationMatrix,
    beta: &SufficientStatistics,
    limits: FiberLimits,
) -> Result<Fiber> {
    let mut elements = Vec::new();
    let mut walk = FiberWalk::new(matrix, None, limits);
    walk.run(beta.values(), &mut |v, _| {
        elements.push(CountVector::new(v.to_vec()));
        Flow::Continue
    })?;
    Ok(Fiber { elements })
}

/// True when the fiber of `beta` is nonempty (early-exit search).
pub fn in_semigroup(
    matrix: &ConfigurationMatrix,
    beta: &SufficientStatistics,
    limits: FiberLimits,
) -> Result<bool> {
    in_semigroup_raw(matrix, beta.values(), limits)
}

pub(crate) fn in_semigroup_raw(
    matrix: &ConfigurationMatrix,
    beta: &[i64],
    limits: FiberLimits,
) -> Result<bool> {
    let mut found = false;
    let mut walk = FiberWalk::new(matrix, None, limits);
    walk.run(beta, &mut |_, _| {
        found = true;
        Flow::Stop
    })?;
    Ok(found)
}

/// Evaluates `Z(beta; x)` exactly by summing `x^v / v!` over the fiber.
pub fn z_value(
    model: &ModelSpec,
    beta: &SufficientStatistics,
    limits: FiberLimits,
) -> Result<PolynomialValue> {
    z_value_raw(model, beta.values(), limits)
}

pub(crate) fn z_value_raw(
    model: &ModelSpec,
    beta: &[i64],
    limits: FiberLimits,
) -> Result<PolynomialValue> {
    let mut acc = PolynomialValue::zero();
    let mut walk = FiberWalk::new(model.matrix(), Some(model.odds()), limits);
    walk.run(beta, &mut |_, weight| {
        acc.value += weight.expect("weights requested");
        acc.term_count += 1;
        Flow::Continue
    })?;
    Ok(acc)
}

/// The exact weight `x^u / u!` of a single table.
pub fn table_weight(model: &ModelSpec, u: &CountVector) -> BigRational {
    let mut w = BigRational::one();
    for (j, &count) in u.counts().iter().enumerate() {
        for t in 1..=count {
            w *= &model.odds()[j];
            w /= BigRational::from_integer(BigInt::from(t));
        }
    }
    w
}

/// `P(U = u | AU = beta)` evaluated exactly.
pub fn conditional_probability(
    model: &ModelSpec,
    beta: &SufficientStatistics,
    u: &CountVector,
    limits: FiberLimits,
) -> Result<BigRational> {
    if u.len() != model.matrix().cols() {
        return Err(Error::DimensionMismatch {
            expected: model.matrix().cols(),
            got: u.len(),
        });
    }
    if model.matrix().apply_counts(u.counts()) != beta.values() {
        return Err(Error::NotInFiber);
    }
    let z = z_value(model, beta, limits)?;
    if z.is_zero() {
        return Err(Error::EmptyFiber);
    }
    Ok(table_weight(model, u) / z.value)
}

/// The unbiased estimate of expected counts given `beta`, computed from
/// partition-function ratios: component `j` is `x_j Z(beta - a_j) / Z(beta)`,
/// and vanishes exactly when `beta - a_j` leaves the semigroup.
pub fn umvue(
    model: &ModelSpec,
    beta: &SufficientStatistics,
    limits: FiberLimits,
) -> Result<Vec<BigRational>> {
    let cache = ZCache::new(limits);
    umvue_cached(model, beta.values(), &cache)
}

pub(crate) fn umvue_cached(
    model: &ModelSpec,
    beta: &[i64],
    cache: &ZCache,
) -> Result<Vec<BigRational>> {
    let z = cache.z(model, beta)?;
    if z.is_zero() {
        return Err(Error::EmptyFiber);
    }
    let matrix = model.matrix();
    let mut out = Vec::with_capacity(matrix.cols());
    let mut shifted = beta.to_vec();
    for j in 0..matrix.cols() {
        for (s, &a) in shifted.iter_mut().zip(matrix.column(j).iter()) {
            *s -= a;
        }
        let zj = cache.z(model, &shifted)?;
        out.push(&model.odds()[j] * &zj.value / &z.value);
        shifted.copy_from_slice(beta);
    }
    Ok(out)
}

/// Memoized partition-function values keyed by the statistics vector.
///
/// Sampling revisits overlapping states across paths, and evaluating `Z`
/// dominates the cost of the exact sampler. Values are computed outside
/// the lock and inserted whole, so concurrent readers never observe a
/// partial entry; a duplicated computation on a race is harmless because
/// the value is deterministic.
pub struct ZCache {
    limits: FiberLimits,
    map: Mutex<HashMap<Vec<i64>, Arc<PolynomialValue>>>,
}

impl ZCache {
    pub fn new(limits: FiberLimits) -> Self {
        ZCache {
            limits,
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn limits(&self) -> FiberLimits {
        self.limits
    }

    pub fn z(&self, model: &ModelSpec, beta: &[i64]) -> Result<Arc<PolynomialValue>> {
        if let Some(hit) = self.map.lock().unwrap().get(beta) {
            return Ok(hit.clone());
        }
        let value = Arc::new(z_value_raw(model, beta, self.limits)?);
        let mut map = self.map.lock().unwrap();
        Ok(map.entry(beta.to_vec()).or_insert(value).clone())
    }

    pub fn len(&self) -> usize {
        self.map.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use num::FromPrimitive;
    use rand::{Rng, SeedableRng};

    fn two_by_two() -> ModelSpec {
        ModelSpec::log_linear(ConfigurationMatrix::two_way_independence(2, 2))
    }

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn stats(values: &[i64]) -> SufficientStatistics {
        SufficientStatistics::new(values.to_vec())
    }

    #[test]
    fn fiber_of_fig1_statistics() {
        let model = two_by_two();
        let fiber =
            enumerate_fiber(model.matrix(), &stats(&[1, 2, 2, 1]), FiberLimits::default()).unwrap();
        let got: Vec<&[u64]> = fiber.elements.iter().map(|e| e.counts()).collect();
        assert_eq!(got, vec![&[0, 1, 2, 0][..], &[1, 0, 1, 1][..]]);
    }

    #[test]
    fn zero_statistics_have_the_zero_table() {
        let model = two_by_two();
        let fiber =
            enumerate_fiber(model.matrix(), &stats(&[0, 0, 0, 0]), FiberLimits::default()).unwrap();
        assert_eq!(fiber.len(), 1);
        assert_eq!(fiber.elements[0].counts(), &[0, 0, 0, 0]);
    }

    #[test]
    fn mismatched_margins_give_empty_fiber() {
        let model = two_by_two();
        let fiber =
            enumerate_fiber(model.matrix(), &stats(&[1, 0, 2, 1]), FiberLimits::default()).unwrap();
        assert!(fiber.is_empty());
        assert!(!in_semigroup(model.matrix(), &stats(&[1, 0, 2, 1]), FiberLimits::default())
            .unwrap());
    }

    #[test]
    fn element_cap_is_enforced() {
        let model = two_by_two();
        let err = enumerate_fiber(
            model.matrix(),
            &stats(&[1, 2, 2, 1]),
            FiberLimits { max_elements: 1 },
        )
        .unwrap_err();
        assert!(matches!(err, Error::FiberTooLarge { cap: 1 }));
    }

    #[test]
    fn partition_value_of_fig1_statistics() {
        let model = two_by_two();
        let z = z_value(&model, &stats(&[1, 2, 2, 1]), FiberLimits::default()).unwrap();
        assert_eq!(z.value, rational(3, 2));
        assert_eq!(z.term_count, 2);
    }

    #[test]
    fn partition_value_of_zero_is_one() {
        let model = two_by_two();
        let z = z_value(&model, &stats(&[0, 0, 0, 0]), FiberLimits::default()).unwrap();
        assert_eq!(z.value, BigRational::one());
    }

    #[test]
    fn partition_value_of_permutation_fiber() {
        let model = two_by_two();
        let z = z_value(&model, &stats(&[1, 1, 1, 1]), FiberLimits::default()).unwrap();
        assert_eq!(z.value, BigRational::from_i64(2).unwrap());
        assert_eq!(z.term_count, 2);
    }

    #[test]
    fn conditional_probabilities_of_fig1_fiber() {
        let model = two_by_two();
        let b = stats(&[1, 2, 2, 1]);
        let p1 = conditional_probability(
            &model,
            &b,
            &CountVector::new(vec![1, 0, 1, 1]),
            FiberLimits::default(),
        )
        .unwrap();
        assert_eq!(p1, rational(2, 3));
        let p2 = conditional_probability(
            &model,
            &b,
            &CountVector::new(vec![0, 1, 2, 0]),
            FiberLimits::default(),
        )
        .unwrap();
        assert_eq!(p2, rational(1, 3));
    }

    #[test]
    fn singleton_fiber_probability_is_one() {
        let model = two_by_two();
        let p = conditional_probability(
            &model,
            &stats(&[0, 0, 0, 0]),
            &CountVector::zero(4),
            FiberLimits::default(),
        )
        .unwrap();
        assert!(p.is_one());
    }

    #[test]
    fn table_outside_fiber_rejected() {
        let model = two_by_two();
        let err = conditional_probability(
            &model,
            &stats(&[1, 2, 2, 1]),
            &CountVector::new(vec![1, 1, 1, 1]),
            FiberLimits::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotInFiber));
    }

    #[test]
    fn unbiased_estimate_of_fig1_statistics() {
        let model = two_by_two();
        let mu = umvue(&model, &stats(&[1, 2, 2, 1]), FiberLimits::default()).unwrap();
        assert_eq!(
            mu,
            vec![
                rational(2, 3),
                rational(1, 3),
                rational(4, 3),
                rational(2, 3)
            ]
        );
    }

    #[test]
    fn single_column_statistics_give_a_unit_vector() {
        let model = two_by_two();
        // b = a_1 = (1, 0, 1, 0): only the table e_1 fits.
        let mu = umvue(&model, &stats(&[1, 0, 1, 0]), FiberLimits::default()).unwrap();
        assert_eq!(
            mu,
            vec![
                BigRational::one(),
                BigRational::zero(),
                BigRational::zero(),
                BigRational::zero()
            ]
        );
    }

    #[test]
    fn empty_fiber_has_no_estimate() {
        let model = two_by_two();
        let err = umvue(&model, &stats(&[1, 0, 2, 1]), FiberLimits::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyFiber));
    }

    #[test]
    fn quasi_independence_closed_form_cell() {
        // Estimate for the (1,3) cell of the quasi-independence model
        // equals u_row1 * (u_13 + u_23) / (u_row1 + u_row2).
        let model = ModelSpec::log_linear(ConfigurationMatrix::quasi_independence_3x3());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let u: Vec<u64> = (0..8).map(|_| rng.gen_range(0..4)).collect();
            let cv = CountVector::new(u);
            if cv.total() == 0 {
                continue;
            }
            let b = SufficientStatistics::from_counts(model.matrix(), &cv).unwrap();
            let mu = umvue(&model, &b, FiberLimits::default()).unwrap();
            let b1 = BigRational::from_i64(b.values()[0]).unwrap();
            let b2 = BigRational::from_i64(b.values()[1]).unwrap();
            let col3 = BigRational::from_i64(b.values()[5]).unwrap();
            if (b.values()[0] + b.values()[1]) == 0 {
                continue;
            }
            assert_eq!(mu[2], &b1 * &col3 / (&b1 + &b2));
        }
    }

    // Estimating equations and homogeneity, cross-checked against a direct
    // expectation computed independently of the partition-function ratios.
    #[test]
    fn estimate_satisfies_margin_and_total_identities() {
        let models = [
            two_by_two(),
            ModelSpec::log_linear(ConfigurationMatrix::quasi_independence_3x3()),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for model in &models {
            for _ in 0..8 {
                let m = model.matrix().cols();
                let u: Vec<u64> = (0..m).map(|_| rng.gen_range(0..3)).collect();
                let cv = CountVector::new(u);
                let b = SufficientStatistics::from_counts(model.matrix(), &cv).unwrap();
                let mu = umvue(model, &b, FiberLimits::default()).unwrap();

                // A * estimate = b, exactly.
                for i in 0..model.matrix().rows() {
                    let lhs: BigRational = (0..m)
                        .map(|j| {
                            BigRational::from_i64(model.matrix().entry(i, j)).unwrap() * &mu[j]
                        })
                        .sum();
                    assert_eq!(lhs, BigRational::from_i64(b.values()[i]).unwrap());
                }

                // Total equals the degree, exactly.
                let total: BigRational = mu.iter().cloned().sum();
                let deg = model.matrix().degree(&b).unwrap();
                assert_eq!(total, BigRational::from_u64(deg).unwrap());

                // Independent route: expectation by direct summation.
                let z = z_value(model, &b, FiberLimits::default()).unwrap();
                let fiber = enumerate_fiber(model.matrix(), &b, FiberLimits::default()).unwrap();
                for j in 0..m {
                    let direct: BigRational = fiber
                        .elements
                        .iter()
                        .map(|v| {
                            BigRational::from_u64(v.counts()[j]).unwrap() * table_weight(model, v)
                        })
                        .sum();
                    assert_eq!(mu[j], direct / &z.value);
                }
            }
        }
    }

    #[test]
    fn partition_value_invariant_under_column_permutation() {
        let base = ModelSpec::with_float_odds(
            ConfigurationMatrix::two_way_independence(2, 2),
            &[3.0, 2.0, 1.0, 0.5],
        )
        .unwrap();
        let b = stats(&[2, 1, 2, 1]);
        let z = z_value(&base, &b, FiberLimits::default()).unwrap();

        let perm = [2usize, 0, 3, 1];
        let a = base.matrix();
        let rows: Vec<Vec<i64>> = (0..a.rows())
            .map(|i| perm.iter().map(|&j| a.entry(i, j)).collect())
            .collect();
        let odds: Vec<BigRational> = perm.iter().map(|&j| base.odds()[j].clone()).collect();
        let permuted = ModelSpec::new(ConfigurationMatrix::new(rows).unwrap(), odds).unwrap();
        let zp = z_value(&permuted, &b, FiberLimits::default()).unwrap();
        assert_eq!(z.value, zp.value);
        assert_eq!(z.term_count, zp.term_count);
    }

    #[test]
    fn cache_returns_identical_values() {
        let model = two_by_two();
        let cache = ZCache::new(FiberLimits::default());
        let beta = [1i64, 2, 2, 1];
        let first = cache.z(&model, &beta).unwrap();
        let second = cache.z(&model, &beta).unwrap();
        assert_eq!(first.value, second.value);
        assert_eq!(cache.len(), 1);
    }
}
