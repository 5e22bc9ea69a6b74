//! Sampling contingency tables from the conditional distribution of a
//! log-affine model given its sufficient statistics.
//!
//! A model is described by an integer configuration matrix `A` (columns are
//! the per-count increments of the sufficient statistics) together with a
//! vector of positive odds `x`; `x = 1` recovers the log-linear case. Given
//! observed sufficient statistics `b = Au`, the library draws tables `u`
//! from `P(U = u | AU = b) ∝ x^u / u!` in three ways:
//!
//! - **sequentially and exactly**, one count at a time, with transition
//!   probabilities computed from ratios of fiber partition functions
//!   (brute-force, exact rational arithmetic — desk scale only);
//! - **sequentially and approximately**, replacing the exact expected
//!   counts by a maximum-likelihood estimate: a closed rational form where
//!   one exists (two-way independence, decomposable models) or generalized
//!   iterative proportional scaling for anything else;
//! - with a **Metropolis chain** over a basis of kernel moves, as a
//!   baseline.
//!
//! The [`fiber`] module doubles as the independent oracle for everything
//! else: it enumerates fibers, evaluates the partition function exactly,
//! and produces the minimum-variance unbiased estimate of expected counts.
//! [`analysis`] has the chi-square / total-variation / effective-sample-size
//! toolkit used to compare samplers, and [`presets`] provides ready-made
//! experiment setups for the built-in model families.
//!
//! ```
//! use fibersample::presets::preset;
//! use fibersample::sampler::TableSampler;
//!
//! let p = preset("indep-2x2", 1).unwrap();
//! let sampler = TableSampler::new(&p.model, p.b.clone(), p.default_estimator.clone()).unwrap();
//! let draw = sampler.draw_table(7).unwrap();
//! assert_eq!(p.model.matrix().apply_counts(draw.table.counts()), p.b.values());
//! ```

pub mod analysis;
pub mod decomposable;
mod error;
pub mod fiber;
pub mod io;
pub mod metropolis;
pub mod mle;
pub mod model;
pub mod presets;
pub mod sampler;

pub use error::{Error, Result};
pub use model::{ConfigurationMatrix, CountVector, ModelSpec, SufficientStatistics};
