//! Maximum-likelihood estimates of expected counts: closed rational forms
//! for two-way independence and the quasi-independence oracle cell, and
//! generalized iterative proportional scaling for arbitrary log-affine
//! models with a nonnegative configuration matrix.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::FromPrimitive;

use crate::error::{Error, Result};
use crate::model::{ModelSpec, SufficientStatistics};

/// Stopping rule for the scaling iteration: stop at the first iterate
/// whose total absolute margin error drops below `epsilon` per statistic,
/// giving up after `max_iterations`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IpsConfig {
    pub epsilon: f64,
    pub max_iterations: u32,
}

impl IpsConfig {
    pub fn new(epsilon: f64, max_iterations: u32) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Parse("epsilon must be positive".into()));
        }
        if max_iterations == 0 {
            return Err(Error::Parse("max_iterations must be at least 1".into()));
        }
        Ok(IpsConfig {
            epsilon,
            max_iterations,
        })
    }
}

impl Default for IpsConfig {
    fn default() -> Self {
        IpsConfig {
            epsilon: 0.1,
            max_iterations: 1000,
        }
    }
}

/// Expected counts from the scaling solver.
#[derive(Clone, Debug)]
pub struct MleResult {
    pub mu_hat: Vec<f64>,
    /// Index of the first iterate that met the stopping rule, or the cap.
    pub iterations: u32,
    pub converged: bool,
}

/// Closed-form expected counts of the two-way independence model:
/// cell (i, j) gets `row_i * col_j / total`, exactly.
pub fn two_way_independence_mle(
    row_sums: &[u64],
    col_sums: &[u64],
    total: u64,
) -> Result<Vec<BigRational>> {
    if total == 0 {
        return Err(Error::ZeroTotal);
    }
    let rs: u64 = row_sums.iter().sum();
    let cs: u64 = col_sums.iter().sum();
    if rs != total || cs != total {
        return Err(Error::MarginalMismatch);
    }
    let t = BigRational::from_u64(total).unwrap();
    let mut out = Vec::with_capacity(row_sums.len() * col_sums.len());
    for &r in row_sums {
        for &c in col_sums {
            let num = BigInt::from(r) * BigInt::from(c);
            out.push(BigRational::from_integer(num) / &t);
        }
    }
    Ok(out)
}

/// Closed form for the (1,3) cell of the 3x3 quasi-independence model
/// with a structural zero at (3,3): `b_1 (u_13 + u_23) / (b_1 + b_2)`
/// where `b = (u_1., u_2., u_31 + u_32, u_.1, u_.2, u_13 + u_23)`.
pub fn quasi_independence_mu13(b: &SufficientStatistics) -> Result<BigRational> {
    if b.len() != 6 {
        return Err(Error::DimensionMismatch {
            expected: 6,
            got: b.len(),
        });
    }
    let v = b.values();
    let denom = v[0] + v[1];
    if denom == 0 {
        return Err(Error::ZeroDenominator);
    }
    let num = BigInt::from(v[0]) * BigInt::from(v[5]);
    Ok(BigRational::new(num, BigInt::from(denom)))
}

/// Generalized iterative proportional scaling for the expected counts of
/// a log-affine model with `A >= 0`, conditioned on `beta` with total
/// count `n`.
///
/// Starting from the odds direction `p = x / sum(x)`, each sweep rescales
/// every cell by the geometric mean of its margin ratios:
///
/// `p_j <- p_j * { prod_i (beta_i / (n * (Ap)_i))^(a_ij) }^(1/s)`
///
/// where `s` is the common column sum of `A`. Matrices with non-uniform
/// column sums are homogenized first by appending one slack row
/// `s_max - s_j` with slack statistic `s_max * n - sum(beta)`, which keeps
/// the update exactly in the form above. Cells forced to zero by a zero
/// statistic are frozen before iterating so the sweep never divides zero
/// by zero. When the column sums are uniform the update is invariant
/// under rescaling of `p`, so each iterate is renormalized to keep it a
/// probability vector without disturbing the trajectory.
///
/// A non-converged result is still returned, flagged, so callers can
/// discard and redraw.
pub fn ips_solve(
    model: &ModelSpec,
    beta: &SufficientStatistics,
    n: u64,
    config: &IpsConfig,
) -> Result<MleResult> {
    ips_solve_raw(model, beta.values(), n, config)
}

pub(crate) fn ips_solve_raw(
    model: &ModelSpec,
    beta: &[i64],
    n: u64,
    config: &IpsConfig,
) -> Result<MleResult> {
    assert!(config.epsilon > 0.0 && config.max_iterations >= 1);
    let matrix = model.matrix();
    if !matrix.is_nonnegative() {
        return Err(Error::NegativeEntryInA);
    }
    let d = matrix.rows();
    if beta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: beta.len(),
        });
    }
    let m = matrix.cols();
    if n == 0 {
        return Ok(MleResult {
            mu_hat: vec![0.0; m],
            iterations: 0,
            converged: true,
        });
    }

    // Column sums; homogenize with a slack row if they differ.
    let col_sums: Vec<i64> = (0..m).map(|j| matrix.column(j).iter().sum()).collect();
    let s_max = *col_sums.iter().max().unwrap();
    let uniform = col_sums.iter().all(|&s| s == s_max);
    let mut rows: Vec<Vec<i64>> = (0..d).map(|i| matrix.row(i).to_vec()).collect();
    let mut stats: Vec<i64> = beta.to_vec();
    if !uniform {
        rows.push(col_sums.iter().map(|&s| s_max - s).collect());
        let total: i64 = stats.iter().sum();
        stats.push(s_max * n as i64 - total);
    }
    // Statistics off the semigroup (reachable when an approximate walk
    // steps into a lattice hole) have no estimate; report instead of
    // erroring so callers can discard the path.
    let not_converged = |m: usize| MleResult {
        mu_hat: vec![0.0; m],
        iterations: 0,
        converged: false,
    };
    if stats.iter().any(|&b| b < 0) {
        return Ok(not_converged(m));
    }
    let s = s_max as f64;
    let nrows = rows.len();

    // Freeze cells touched by a zero statistic; their estimate is exactly
    // zero and the corresponding factors are skipped.
    let mut active = vec![true; m];
    for (i, row) in rows.iter().enumerate() {
        if stats[i] == 0 {
            for (j, &a) in row.iter().enumerate() {
                if a > 0 {
                    active[j] = false;
                }
            }
        }
    }

    let mut p: Vec<f64> = model
        .odds_f64()
        .iter()
        .zip(active.iter())
        .map(|(&x, &keep)| if keep { x } else { 0.0 })
        .collect();
    let psum: f64 = p.iter().sum();
    if psum <= 0.0 {
        // Every cell is forced to zero yet counts remain.
        return Ok(not_converged(m));
    }
    p.iter_mut().for_each(|v| *v /= psum);

    let nf = n as f64;
    let tol = config.epsilon * d as f64;
    let mut margins = vec![0.0f64; nrows];
    let mut log_ratio = vec![0.0f64; nrows];

    let compute_margins = |p: &[f64], margins: &mut [f64]| {
        for (g, row) in margins.iter_mut().zip(rows.iter()) {
            *g = row
                .iter()
                .zip(p.iter())
                .filter(|(&a, _)| a != 0)
                .map(|(&a, &pj)| a as f64 * pj)
                .sum();
        }
    };

    // The update is multiplicative and the (homogenized) column sums are
    // uniform, so it is invariant under rescaling of `p`: renormalizing
    // each sweep keeps the iterate a probability vector without changing
    // the trajectory, and makes the returned estimate satisfy the stated
    // margin-error bound directly.
    compute_margins(&p, &mut margins);
    for t in 1..=config.max_iterations {
        for i in 0..nrows {
            if stats[i] == 0 {
                log_ratio[i] = 0.0; // only frozen cells touch this row
            } else {
                if margins[i] <= 0.0 {
                    // The statistics sit on a face the freezing step does
                    // not cover; report non-convergence.
                    return Ok(MleResult {
                        mu_hat: p.iter().map(|&pj| nf * pj).collect(),
                        iterations: t,
                        converged: false,
                    });
                }
                log_ratio[i] = (stats[i] as f64 / (nf * margins[i])).ln();
            }
        }
        let mut sum = 0.0;
        for j in 0..m {
            if !active[j] {
                continue;
            }
            let mut acc = 0.0;
            for i in 0..nrows {
                let a = rows[i][j];
                if a != 0 {
                    acc += a as f64 * log_ratio[i];
                }
            }
            p[j] *= (acc / s).exp();
            sum += p[j];
        }
        p.iter_mut().for_each(|v| *v /= sum);
        compute_margins(&p, &mut margins);
        let err: f64 = (0..d)
            .map(|i| (nf * margins[i] - stats[i] as f64).abs())
            .sum();
        if err < tol {
            return Ok(MleResult {
                mu_hat: p.iter().map(|&pj| nf * pj).collect(),
                iterations: t,
                converged: true,
            });
        }
    }
    Ok(MleResult {
        mu_hat: p.iter().map(|&pj| nf * pj).collect(),
        iterations: config.max_iterations,
        converged: false,
    })
}

/// Float fast path for the two-way closed form, used per sampling step.
pub(crate) fn two_way_mle_f64(row_sums: &[i64], col_sums: &[i64], total: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(row_sums.len() * col_sums.len());
    for &r in row_sums {
        for &c in col_sums {
            out.push(r as f64 * c as f64 / total);
        }
    }
    out
}
