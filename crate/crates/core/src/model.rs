//! Configuration matrices, odds vectors, count vectors, and sufficient
//! statistics, plus the exact degree functional used by every sampler.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An integer matrix whose columns are the per-count increments of the
/// sufficient statistics, together with an exact rational functional `c`
/// certifying `c'A = (1, ..., 1)`.
///
/// The certificate guarantees that every table in a fiber has the same
/// total count, which in turn bounds all sampling loops; it is computed
/// once, exactly, at validation time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigurationMatrix {
    entries: Vec<i64>,
    rows: usize,
    cols: usize,
    // Column-major copy for the enumeration hot path.
    columns: Vec<Vec<i64>>,
    degree_functional: Vec<BigRational>,
}

impl ConfigurationMatrix {
    /// Validates an integer matrix and solves for the degree functional.
    ///
    /// Fails if the matrix is empty, has a zero row or column, or if the
    /// all-ones vector is not in its row span. The functional returned is
    /// the minimum-norm solution of `c'A = 1`, obtained by a first-pivot
    /// rational solve of the Gram system; minimum norm makes the
    /// integrality check in [`ConfigurationMatrix::degree`] independent of
    /// pivot order.
    pub fn new(rows: Vec<Vec<i64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let d = rows.len();
        let m = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: row.len(),
                });
            }
            if row.iter().all(|&a| a == 0) {
                return Err(Error::ZeroRowOrColumn {
                    kind: "row",
                    index: i,
                });
            }
        }
        for j in 0..m {
            if rows.iter().all(|row| row[j] == 0) {
                return Err(Error::ZeroRowOrColumn {
                    kind: "column",
                    index: j,
                });
            }
        }
        let entries: Vec<i64> = rows.iter().flatten().copied().collect();
        let degree_functional = solve_degree_functional(&entries, d, m)?;
        let columns = (0..m)
            .map(|j| (0..d).map(|i| entries[i * m + j]).collect())
            .collect();
        Ok(ConfigurationMatrix {
            entries,
            rows: d,
            cols: m,
            columns,
            degree_functional,
        })
    }

    /// Number of rows `d` (sufficient-statistic coordinates).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns `m` (table cells).
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.entries[i * self.cols + j]
    }

    /// The `j`-th column as a dense vector of length `d`.
    pub fn column(&self, j: usize) -> &[i64] {
        &self.columns[j]
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// The exact rational functional `c` with `c'A = (1, ..., 1)`.
    pub fn degree_functional(&self) -> &[BigRational] {
        &self.degree_functional
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|&a| a >= 0)
    }

    /// `A u` for a table `u`.
    pub fn apply_counts(&self, counts: &[u64]) -> Vec<i64> {
        assert_eq!(counts.len(), self.cols);
        let mut out = vec![0i64; self.rows];
        for (j, &u) in counts.iter().enumerate() {
            if u == 0 {
                continue;
            }
            let u = u as i64;
            for (o, &a) in out.iter_mut().zip(self.columns[j].iter()) {
                *o += a * u;
            }
        }
        out
    }

    /// `A z` for an integer vector `z` (used for kernel checks on moves).
    pub fn apply_signed(&self, z: &[i64]) -> Vec<i64> {
        assert_eq!(z.len(), self.cols);
        let mut out = vec![0i64; self.rows];
        for (j, &u) in z.iter().enumerate() {
            if u == 0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.columns[j].iter()) {
                *o += a * u;
            }
        }
        out
    }

    /// The total count `c'β` certified by the degree functional.
    ///
    /// Fails with [`Error::NonIntegralDegree`] when the rational value is
    /// not a nonnegative integer, which flags statistics vectors that
    /// cannot have come from any table.
    pub fn degree(&self, stats: &SufficientStatistics) -> Result<u64> {
        if stats.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: stats.len(),
            });
        }
        self.degree_of(stats.values())
            .ok_or_else(|| Error::NonIntegralDegree(self.degree_value(stats.values()).to_string()))
    }

    /// As [`ConfigurationMatrix::degree`], but `None` instead of an error.
    pub fn degree_of(&self, values: &[i64]) -> Option<u64> {
        let deg = self.degree_value(values);
        if !deg.is_integer() || deg.is_negative() {
            return None;
        }
        deg.to_integer().to_u64()
    }

    fn degree_value(&self, values: &[i64]) -> BigRational {
        self.degree_functional
            .iter()
            .zip(values.iter())
            .map(|(c, &b)| c * BigRational::from_integer(BigInt::from(b)))
            .sum()
    }

    /// Row-stacked independence model for an `r x c` two-way table:
    /// row-sum indicators over column-sum indicators, cells in row-major
    /// order.
    pub fn two_way_independence(table_rows: usize, table_cols: usize) -> Self {
        assert!(table_rows >= 1 && table_cols >= 1);
        let m = table_rows * table_cols;
        let mut rows = Vec::with_capacity(table_rows + table_cols);
        for i in 0..table_rows {
            let mut row = vec![0i64; m];
            for j in 0..table_cols {
                row[i * table_cols + j] = 1;
            }
            rows.push(row);
        }
        for j in 0..table_cols {
            let mut row = vec![0i64; m];
            for i in 0..table_rows {
                row[i * table_cols + j] = 1;
            }
            rows.push(row);
        }
        Self::new(rows).expect("independence matrix is always valid")
    }

    /// The 3x3 quasi-independence model with a structural zero in the
    /// (3,3) cell: 8 cells `u11..u32` in row-major order, with the row-3
    /// and column-3 marginals collapsed onto the surviving cells.
    pub fn quasi_independence_3x3() -> Self {
        let rows = vec![
            vec![1, 1, 1, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 1, 1, 1, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 1, 1],
            vec![1, 0, 0, 1, 0, 0, 1, 0],
            vec![0, 1, 0, 0, 1, 0, 0, 1],
            vec![0, 0, 1, 0, 0, 1, 0, 0],
        ];
        Self::new(rows).expect("quasi-independence matrix is always valid")
    }

    /// The no-three-way-interaction model for a 2x3x3 table: all three
    /// two-way marginals are fixed. Cells are ordered with the last index
    /// fastest, `u111, u112, ..., u233`.
    pub fn no_three_way_2x3x3() -> Self {
        let m = 18;
        let cell = |i1: usize, i2: usize, i3: usize| 9 * i1 + 3 * i2 + i3;
        let mut rows = Vec::with_capacity(21);
        for i1 in 0..2 {
            for i2 in 0..3 {
                let mut row = vec![0i64; m];
                for i3 in 0..3 {
                    row[cell(i1, i2, i3)] = 1;
                }
                rows.push(row);
            }
        }
        for i1 in 0..2 {
            for i3 in 0..3 {
                let mut row = vec![0i64; m];
                for i2 in 0..3 {
                    row[cell(i1, i2, i3)] = 1;
                }
                rows.push(row);
            }
        }
        for i2 in 0..3 {
            for i3 in 0..3 {
                let mut row = vec![0i64; m];
                for i1 in 0..2 {
                    row[cell(i1, i2, i3)] = 1;
                }
                rows.push(row);
            }
        }
        Self::new(rows).expect("no-three-way matrix is always valid")
    }
}

/// A configuration matrix together with a strictly positive odds vector.
/// All-ones odds give the log-linear special case.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    matrix: ConfigurationMatrix,
    odds: Vec<BigRational>,
    odds_f64: Vec<f64>,
}

impl ModelSpec {
    pub fn new(matrix: ConfigurationMatrix, odds: Vec<BigRational>) -> Result<Self> {
        if odds.len() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.cols(),
                got: odds.len(),
            });
        }
        for (j, x) in odds.iter().enumerate() {
            if !x.is_positive() {
                return Err(Error::NonPositiveOdds(j));
            }
        }
        let odds_f64 = odds.iter().map(|x| x.to_f64().unwrap_or(0.0)).collect();
        Ok(ModelSpec {
            matrix,
            odds,
            odds_f64,
        })
    }

    /// Log-linear model: all odds equal to one.
    pub fn log_linear(matrix: ConfigurationMatrix) -> Self {
        let odds = vec![BigRational::one(); matrix.cols()];
        Self::new(matrix, odds).expect("unit odds are positive")
    }

    /// Builds the odds from floats, converted exactly.
    pub fn with_float_odds(matrix: ConfigurationMatrix, odds: &[f64]) -> Result<Self> {
        let rational: Vec<BigRational> = odds
            .iter()
            .enumerate()
            .map(|(j, &x)| BigRational::from_float(x).ok_or(Error::NonPositiveOdds(j)))
            .collect::<Result<_>>()?;
        Self::new(matrix, rational)
    }

    pub fn matrix(&self) -> &ConfigurationMatrix {
        &self.matrix
    }

    pub fn odds(&self) -> &[BigRational] {
        &self.odds
    }

    pub fn odds_f64(&self) -> &[f64] {
        &self.odds_f64
    }

    /// True when every odds entry equals one.
    pub fn is_log_linear(&self) -> bool {
        self.odds.iter().all(|x| x.is_one())
    }

    /// True when all odds entries are equal; the conditional distribution
    /// is then identical to the log-linear one.
    pub fn has_uniform_odds(&self) -> bool {
        self.odds.windows(2).all(|w| w[0] == w[1])
    }
}

/// A table of nonnegative counts with its cached total.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Self {
        let total = counts.iter().sum();
        CountVector { counts, total }
    }

    pub fn zero(len: usize) -> Self {
        CountVector {
            counts: vec![0; len],
            total: 0,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// The image `b = Au` of a table, or any statistics vector to condition on.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SufficientStatistics {
    values: Vec<i64>,
}

impl SufficientStatistics {
    pub fn new(values: Vec<i64>) -> Self {
        SufficientStatistics { values }
    }

    /// `Au` for a validated matrix and table.
    pub fn from_counts(matrix: &ConfigurationMatrix, u: &CountVector) -> Result<Self> {
        if u.len() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.cols(),
                got: u.len(),
            });
        }
        Ok(SufficientStatistics {
            values: matrix.apply_counts(u.counts()),
        })
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Minimum-norm exact solution of `c'A = 1`: solve the Gram system
/// `(A'A) w = 1` with rational Gaussian elimination (free variables at
/// zero) and take `c = A w`. Consistency of the Gram system is equivalent
/// to the all-ones vector lying in the row span.
fn solve_degree_functional(entries: &[i64], d: usize, m: usize) -> Result<Vec<BigRational>> {
    let a = |i: usize, j: usize| entries[i * m + j];
    // Gram matrix G[j][k] = sum_i a_ij a_ik, augmented with rhs 1.
    let mut aug: Vec<Vec<BigRational>> = (0..m)
        .map(|j| {
            (0..m)
                .map(|k| {
                    let g: i64 = (0..d).map(|i| a(i, j) * a(i, k)).sum();
                    BigRational::from_integer(BigInt::from(g))
                })
                .chain(std::iter::once(BigRational::one()))
                .collect()
        })
        .collect();

    let mut pivot_row = 0;
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    for col in 0..m {
        let Some(r) = (pivot_row..m).find(|&r| !aug[r][col].is_zero()) else {
            continue;
        };
        aug.swap(pivot_row, r);
        let inv = aug[pivot_row][col].clone();
        for c in col..=m {
            let v = &aug[pivot_row][c] / &inv;
            aug[pivot_row][c] = v;
        }
        for r in 0..m {
            if r != pivot_row && !aug[r][col].is_zero() {
                let f = aug[r][col].clone();
                for c in col..=m {
                    let v = &aug[r][c] - &f * &aug[pivot_row][c];
                    aug[r][c] = v;
                }
            }
        }
        pivots.push((pivot_row, col));
        pivot_row += 1;
        if pivot_row == m {
            break;
        }
    }
    for r in pivot_row..m {
        if !aug[r][m].is_zero() {
            return Err(Error::OnesNotInRowspan);
        }
    }
    let mut w = vec![BigRational::zero(); m];
    for &(r, col) in &pivots {
        w[col] = aug[r][m].clone();
    }
    // c = A w
    let c: Vec<BigRational> = (0..d)
        .map(|i| {
            (0..m)
                .map(|j| BigRational::from_integer(BigInt::from(a(i, j))) * &w[j])
                .sum()
        })
        .collect();
    // The Gram solve guarantees this, but the certificate is cheap to
    // re-check and everything downstream depends on it.
    for j in 0..m {
        let dot: BigRational = (0..d)
            .map(|i| &c[i] * BigRational::from_integer(BigInt::from(a(i, j))))
            .sum();
        if !dot.is_one() {
            return Err(Error::OnesNotInRowspan);
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::FromPrimitive;
    use proptest::prelude::*;

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn two_by_two_independence_certificate() {
        let a = ConfigurationMatrix::two_way_independence(2, 2);
        assert_eq!(a.rows(), 4);
        assert_eq!(a.cols(), 4);
        let c = a.degree_functional();
        assert_eq!(c, &vec![rational(1, 2); 4][..]);
        // c'A = 1 exactly.
        for j in 0..4 {
            let dot: BigRational = (0..4)
                .map(|i| &c[i] * BigRational::from_i64(a.entry(i, j)).unwrap())
                .sum();
            assert!(dot.is_one());
        }
    }

    #[test]
    fn identity_matrix_certificate() {
        let a = ConfigurationMatrix::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(
            a.degree_functional(),
            &[BigRational::one(), BigRational::one()]
        );
    }

    #[test]
    fn zero_column_rejected() {
        let err = ConfigurationMatrix::new(vec![vec![1, 0], vec![1, 0]]).unwrap_err();
        assert!(matches!(
            err,
            Error::ZeroRowOrColumn {
                kind: "column",
                index: 1
            }
        ));
    }

    #[test]
    fn zero_row_rejected() {
        let err = ConfigurationMatrix::new(vec![vec![1, 1], vec![0, 0]]).unwrap_err();
        assert!(matches!(err, Error::ZeroRowOrColumn { kind: "row", .. }));
    }

    #[test]
    fn empty_matrix_rejected() {
        assert!(matches!(
            ConfigurationMatrix::new(vec![]),
            Err(Error::EmptyMatrix)
        ));
        assert!(matches!(
            ConfigurationMatrix::new(vec![vec![]]),
            Err(Error::EmptyMatrix)
        ));
    }

    #[test]
    fn ones_outside_rowspan_rejected() {
        // Rows are (1, 2) multiples; c'A = 1 needs c1 + 2 c2 ... the span
        // of (1, 2) never contains (1, 1).
        let err = ConfigurationMatrix::new(vec![vec![1, 2], vec![2, 4]]).unwrap_err();
        assert!(matches!(err, Error::OnesNotInRowspan));
    }

    #[test]
    fn sufficient_statistics_of_fig1_table() {
        let a = ConfigurationMatrix::two_way_independence(2, 2);
        let u = CountVector::new(vec![1, 0, 1, 1]);
        let b = SufficientStatistics::from_counts(&a, &u).unwrap();
        assert_eq!(b.values(), &[1, 2, 2, 1]);
        // A second table with the same image.
        let v = CountVector::new(vec![0, 1, 2, 0]);
        let bv = SufficientStatistics::from_counts(&a, &v).unwrap();
        assert_eq!(bv.values(), &[1, 2, 2, 1]);
    }

    #[test]
    fn zero_table_maps_to_zero() {
        let a = ConfigurationMatrix::quasi_independence_3x3();
        let u = CountVector::zero(8);
        let b = SufficientStatistics::from_counts(&a, &u).unwrap();
        assert!(b.values().iter().all(|&v| v == 0));
        assert_eq!(a.degree(&b).unwrap(), 0);
    }

    #[test]
    fn statistics_length_checked() {
        let a = ConfigurationMatrix::two_way_independence(2, 2);
        let u = CountVector::new(vec![1, 2, 3]);
        assert!(matches!(
            SufficientStatistics::from_counts(&a, &u),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn degree_of_fig1_statistics() {
        let a = ConfigurationMatrix::two_way_independence(2, 2);
        let b = SufficientStatistics::new(vec![1, 2, 2, 1]);
        assert_eq!(a.degree(&b).unwrap(), 3);
    }

    #[test]
    fn inconsistent_statistics_have_no_degree() {
        let a = ConfigurationMatrix::two_way_independence(2, 2);
        // Row sums 3, column sums 4: no table exists and the rational
        // degree comes out at 7/2.
        let b = SufficientStatistics::new(vec![1, 2, 2, 2]);
        assert!(matches!(a.degree(&b), Err(Error::NonIntegralDegree(_))));
    }

    #[test]
    fn no_three_way_matrix_shape() {
        let a = ConfigurationMatrix::no_three_way_2x3x3();
        assert_eq!(a.rows(), 21);
        assert_eq!(a.cols(), 18);
        // Every cell sits in exactly three marginals.
        for j in 0..18 {
            let s: i64 = a.column(j).iter().sum();
            assert_eq!(s, 3);
        }
    }

    #[test]
    fn odds_must_be_positive() {
        let a = ConfigurationMatrix::two_way_independence(2, 2);
        let odds = vec![
            BigRational::one(),
            BigRational::zero(),
            BigRational::one(),
            BigRational::one(),
        ];
        assert!(matches!(
            ModelSpec::new(a, odds),
            Err(Error::NonPositiveOdds(1))
        ));
    }

    fn preset_matrices() -> Vec<ConfigurationMatrix> {
        vec![
            ConfigurationMatrix::two_way_independence(2, 2),
            ConfigurationMatrix::two_way_independence(4, 5),
            ConfigurationMatrix::quasi_independence_3x3(),
            ConfigurationMatrix::no_three_way_2x3x3(),
        ]
    }

    proptest! {
        #[test]
        fn degree_equals_total_count(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for a in preset_matrices() {
                let u = CountVector::new((0..a.cols()).map(|_| rng.gen_range(0..7u64)).collect());
                let b = SufficientStatistics::from_counts(&a, &u).unwrap();
                prop_assert_eq!(a.degree(&b).unwrap(), u.total());
            }
        }

        #[test]
        fn column_permutation_preserves_certificate(perm_seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
            let a = ConfigurationMatrix::quasi_independence_3x3();
            let mut order: Vec<usize> = (0..a.cols()).collect();
            order.shuffle(&mut rng);
            let rows: Vec<Vec<i64>> = (0..a.rows())
                .map(|i| order.iter().map(|&j| a.entry(i, j)).collect())
                .collect();
            let permuted = ConfigurationMatrix::new(rows).unwrap();
            let c = permuted.degree_functional();
            for j in 0..permuted.cols() {
                let dot: BigRational = (0..permuted.rows())
                    .map(|i| &c[i] * BigRational::from_i64(permuted.entry(i, j)).unwrap())
                    .sum();
                prop_assert!(dot.is_one());
            }
        }
    }
}
