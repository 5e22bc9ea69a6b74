//! Ready-made experiment setups: the model families studied with the
//! samplers, with marginals scaled by a parameter `s`, chi-square expected
//! vectors, default estimators, and Markov bases where one is built in.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::One;

use crate::error::{Error, Result};
use crate::metropolis::{basis_no_three_way, basis_two_way, Move};
use crate::mle::IpsConfig;
use crate::model::{ConfigurationMatrix, CountVector, ModelSpec, SufficientStatistics};
use crate::sampler::EstimatorKind;

/// Everything needed to run one experiment at one scale.
#[derive(Clone, Debug)]
pub struct ExperimentPreset {
    pub name: String,
    pub s: u64,
    pub model: ModelSpec,
    pub b: SufficientStatistics,
    pub n: u64,
    /// Expected cell values for the chi-square statistic.
    pub expected: Vec<f64>,
    pub cell_labels: Vec<String>,
    pub default_estimator: EstimatorKind,
    pub ips: IpsConfig,
    pub basis: Option<Vec<Move>>,
    /// A table in the fiber of `b`, used to start Metropolis chains.
    pub initial_table: CountVector,
}

pub const PRESET_NAMES: [&str; 6] = [
    "indep-2x2",
    "indep-4x5",
    "nonindep-4x5",
    "nonindep-3x4",
    "no3way-2x3x3",
    "quasi-3x3",
];

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn two_way_labels(rows: usize, cols: usize) -> Vec<String> {
    (1..=rows)
        .flat_map(|i| (1..=cols).map(move |j| format!("u{i}{j}")))
        .collect()
}

fn two_way_margins(rows: usize, cols: usize, s: u64) -> SufficientStatistics {
    let row_sum = (cols as u64 * s) as i64;
    let col_sum = (rows as u64 * s) as i64;
    let mut b = vec![row_sum; rows];
    b.extend(vec![col_sum; cols]);
    SufficientStatistics::new(b)
}

/// Builds the named preset at scale `s >= 1`.
pub fn preset(name: &str, s: u64) -> Result<ExperimentPreset> {
    if s == 0 {
        return Err(Error::Parse("scale s must be at least 1".into()));
    }
    let si = s as i64;
    let p = match name {
        "indep-2x2" => {
            let model = ModelSpec::log_linear(ConfigurationMatrix::two_way_independence(2, 2));
            let b = SufficientStatistics::new(vec![si, 2 * si, 2 * si, si]);
            let n = 3 * s;
            ExperimentPreset {
                name: name.to_string(),
                s,
                b,
                n,
                expected: vec![n as f64 / 4.0; 4],
                cell_labels: two_way_labels(2, 2),
                default_estimator: EstimatorKind::ExactUmvue,
                ips: IpsConfig::default(),
                basis: Some(basis_two_way(2, 2)),
                initial_table: CountVector::new(vec![s, 0, s, s]),
                model,
            }
        }
        "indep-4x5" => {
            let model = ModelSpec::log_linear(ConfigurationMatrix::two_way_independence(4, 5));
            ExperimentPreset {
                name: name.to_string(),
                s,
                b: two_way_margins(4, 5, s),
                n: 20 * s,
                expected: vec![s as f64; 20],
                cell_labels: two_way_labels(4, 5),
                default_estimator: EstimatorKind::TwoWayRational,
                ips: IpsConfig::default(),
                basis: Some(basis_two_way(4, 5)),
                initial_table: CountVector::new(vec![s; 20]),
                model,
            }
        }
        "nonindep-4x5" => {
            let mut odds = vec![
                ratio(3, 1),
                ratio(2, 1),
                BigRational::one(),
                BigRational::one(),
                BigRational::one(),
                ratio(2, 1),
                ratio(2, 1),
            ];
            odds.extend(vec![BigRational::one(); 13]);
            let model =
                ModelSpec::new(ConfigurationMatrix::two_way_independence(4, 5), odds)?;
            let ips = IpsConfig {
                epsilon: 0.1,
                max_iterations: 1000,
            };
            ExperimentPreset {
                name: name.to_string(),
                s,
                b: two_way_margins(4, 5, s),
                n: 20 * s,
                // The study design scores both two-way models against the
                // uniform table, independent of the odds.
                expected: vec![s as f64; 20],
                cell_labels: two_way_labels(4, 5),
                default_estimator: EstimatorKind::Ips(ips),
                ips,
                basis: Some(basis_two_way(4, 5)),
                initial_table: CountVector::new(vec![s; 20]),
                model,
            }
        }
        "nonindep-3x4" => {
            let odds = vec![
                ratio(3, 1),
                ratio(2, 1),
                ratio(100, 101),
                BigRational::one(),
                ratio(200, 104),
                ratio(200, 103),
                ratio(100, 102),
                BigRational::one(),
                BigRational::one(),
                BigRational::one(),
                BigRational::one(),
                BigRational::one(),
            ];
            let model =
                ModelSpec::new(ConfigurationMatrix::two_way_independence(3, 4), odds)?;
            let ips = IpsConfig {
                epsilon: 0.1,
                max_iterations: 1000,
            };
            ExperimentPreset {
                name: name.to_string(),
                s,
                b: two_way_margins(3, 4, s),
                n: 12 * s,
                expected: vec![s as f64; 12],
                cell_labels: two_way_labels(3, 4),
                default_estimator: EstimatorKind::Ips(ips),
                ips,
                basis: Some(basis_two_way(3, 4)),
                initial_table: CountVector::new(vec![s; 12]),
                model,
            }
        }
        "no3way-2x3x3" => {
            let model = ModelSpec::log_linear(ConfigurationMatrix::no_three_way_2x3x3());
            let mut b = vec![3 * si; 12];
            b.extend(vec![2 * si; 9]);
            let ips = IpsConfig {
                epsilon: 0.005,
                max_iterations: 1000,
            };
            let labels = (1..=2)
                .flat_map(|i1| {
                    (1..=3).flat_map(move |i2| (1..=3).map(move |i3| format!("u{i1}{i2}{i3}")))
                })
                .collect();
            ExperimentPreset {
                name: name.to_string(),
                s,
                b: SufficientStatistics::new(b),
                n: 18 * s,
                expected: vec![s as f64; 18],
                cell_labels: labels,
                default_estimator: EstimatorKind::Ips(ips),
                ips,
                basis: Some(basis_no_three_way()),
                initial_table: CountVector::new(vec![s; 18]),
                model,
            }
        }
        "quasi-3x3" => {
            let model = ModelSpec::log_linear(ConfigurationMatrix::quasi_independence_3x3());
            // Scaled image of the all-ones table on the eight free cells.
            let b = SufficientStatistics::new(vec![3 * si, 3 * si, 2 * si, 3 * si, 3 * si, 2 * si]);
            let labels = ["u11", "u12", "u13", "u21", "u22", "u23", "u31", "u32"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            ExperimentPreset {
                name: name.to_string(),
                s,
                b,
                n: 8 * s,
                expected: vec![s as f64; 8],
                cell_labels: labels,
                default_estimator: EstimatorKind::ExactUmvue,
                ips: IpsConfig::default(),
                basis: None,
                initial_table: CountVector::new(vec![s; 8]),
                model,
            }
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    debug_assert_eq!(p.model.matrix().degree(&p.b).unwrap(), p.n);
    debug_assert_eq!(
        p.model.matrix().apply_counts(p.initial_table.counts()),
        p.b.values()
    );
    Ok(p)
}
