//! Diagnostics for comparing samplers: chi-square statistics, empirical
//! distributions over chi-square values, total-variation distance, and
//! effective sample size of autocorrelated chains.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Values are binned to nine decimal places before forming the support,
/// so float noise cannot split an atom that is exactly rational.
const CANONICAL_SCALE: f64 = 1e9;

fn canonical_key(value: f64) -> i64 {
    let scaled = value * CANONICAL_SCALE;
    debug_assert!(scaled.abs() < i64::MAX as f64 / 2.0);
    scaled.round() as i64
}

/// Pearson chi-square statistic `sum_j (u_j - e_j)^2 / e_j`.
pub fn chi_square(counts: &[u64], expected: &[f64]) -> Result<f64> {
    if counts.len() != expected.len() {
        return Err(Error::DimensionMismatch {
            expected: expected.len(),
            got: counts.len(),
        });
    }
    for (j, &e) in expected.iter().enumerate() {
        if !(e > 0.0) {
            return Err(Error::NonPositiveExpected(j));
        }
    }
    Ok(counts
        .iter()
        .zip(expected.iter())
        .map(|(&u, &e)| {
            let diff = u as f64 - e;
            diff * diff / e
        })
        .sum())
}

/// A finite distribution over canonicalized real values.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalDistribution {
    support: Vec<f64>,
    masses: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Relative frequencies of the given values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut bins: BTreeMap<i64, u64> = BTreeMap::new();
        for &v in values {
            *bins.entry(canonical_key(v)).or_insert(0) += 1;
        }
        let n = values.len() as f64;
        let mut support = Vec::with_capacity(bins.len());
        let mut masses = Vec::with_capacity(bins.len());
        for (key, count) in bins {
            support.push(key as f64 / CANONICAL_SCALE);
            masses.push(count as f64 / n);
        }
        Ok(EmpiricalDistribution { support, masses })
    }

    /// A reference distribution from explicit atoms; masses must sum to
    /// one within 1e-12.
    pub fn from_masses(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut bins: BTreeMap<i64, f64> = BTreeMap::new();
        for &(v, mass) in pairs {
            if mass < 0.0 {
                return Err(Error::Parse("negative mass".into()));
            }
            *bins.entry(canonical_key(v)).or_insert(0.0) += mass;
        }
        let total: f64 = bins.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parse(format!("masses sum to {total}, not 1")));
        }
        let mut support = Vec::with_capacity(bins.len());
        let mut masses = Vec::with_capacity(bins.len());
        for (key, mass) in bins {
            support.push(key as f64 / CANONICAL_SCALE);
            masses.push(mass);
        }
        Ok(EmpiricalDistribution { support, masses })
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass_at(&self, value: f64) -> f64 {
        let key = canonical_key(value);
        match self
            .support
            .binary_search_by_key(&key, |&v| canonical_key(v))
        {
            Ok(idx) => self.masses[idx],
            Err(_) => 0.0,
        }
    }

    fn merged<'a>(&'a self, other: &'a Self) -> impl Iterator<Item = (f64, f64)> + 'a {
        let mut keys: Vec<i64> = self
            .support
            .iter()
            .chain(other.support.iter())
            .map(|&v| canonical_key(v))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter().map(move |key| {
            let v = key as f64 / CANONICAL_SCALE;
            (self.mass_at(v), other.mass_at(v))
        })
    }
}

/// Total variation distance `1/2 sum_z |p(z) - q(z)|` over the union
/// support.
pub fn total_variation(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> f64 {
    0.5 * p.merged(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Half the sum of squared mass differences, `1/2 sum_z (p(z) - q(z))^2`.
///
/// Not a total variation distance, but far less sensitive to sampling
/// noise on a large support; exposed alongside [`total_variation`] for
/// trend comparisons.
pub fn total_variation_squared(p: &EmpiricalDistribution, q: &EmpiricalDistribution) -> f64 {
    0.5 * p.merged(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Effective sample size report.
#[derive(Clone, Debug, Serialize)]
pub struct EssReport {
    pub n: usize,
    /// Computed sample autocorrelations, including the one that triggered
    /// censoring (which is excluded from the sum).
    pub autocorrelations: Vec<f64>,
    pub ess: f64,
}

/// `N / (1 + 2 sum_t rho_t)` with the biased sample autocorrelation
/// estimate, censoring the sum at the first lag where `rho_t < 0.01`.
pub fn effective_sample_size(values: &[f64]) -> Result<EssReport> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len();
    if n < 2 {
        return Err(Error::ConstantSequence);
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = values.iter().map(|&v| v - mean).collect();
    let c0: f64 = centered.iter().map(|&v| v * v).sum::<f64>() / nf;
    if c0 == 0.0 {
        return Err(Error::ConstantSequence);
    }
    let mut autocorrelations = Vec::new();
    let mut sum = 0.0;
    for lag in 1..n {
        let ct: f64 = (0..n - lag).map(|i| centered[i] * centered[i + lag]).sum::<f64>() / nf;
        let rho = ct / c0;
        autocorrelations.push(rho);
        if rho < 0.01 {
            break;
        }
        sum += rho;
    }
    Ok(EssReport {
        n,
        autocorrelations,
        ess: nf / (1.0 + 2.0 * sum),
    })
}
