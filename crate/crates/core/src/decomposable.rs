//! Decomposable graphical models described by a perfect clique sequence:
//! the closed-form expected counts `prod_C u(j_C) / prod_S u(j_S)^nu(S)`
//! and the configuration matrix whose statistics are the stacked clique
//! marginals.
//!
//! The structure (cliques, separators, multiplicities) is user-supplied;
//! the library validates marginal consistency but does not compute
//! junction trees.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::ConfigurationMatrix;

/// A separator with its multiplicity in the perfect sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Separator {
    pub vars: Vec<usize>,
    pub multiplicity: u32,
}

/// Variable levels plus an ordered clique list and separator list, with
/// precomputed cell-to-marginal index maps.
///
/// Cells are indexed in row-major order with the last variable fastest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecomposableStructure {
    levels: Vec<usize>,
    cliques: Vec<Vec<usize>>,
    separators: Vec<Separator>,
    cells: usize,
    clique_maps: Vec<Vec<usize>>,
    clique_sizes: Vec<usize>,
    sep_maps: Vec<Vec<usize>>,
    sep_sizes: Vec<usize>,
    // Cliques containing each separator; the first is used to derive the
    // separator marginal, the rest to cross-check consistency.
    sep_hosts: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct StructureFile {
    variables: Vec<usize>,
    cliques: Vec<Vec<usize>>,
    separators: Vec<SeparatorFile>,
}

#[derive(Deserialize)]
struct SeparatorFile {
    vars: Vec<usize>,
    #[serde(default = "default_multiplicity")]
    multiplicity: u32,
}

fn default_multiplicity() -> u32 {
    1
}

impl DecomposableStructure {
    pub fn new(
        levels: Vec<usize>,
        cliques: Vec<Vec<usize>>,
        separators: Vec<(Vec<usize>, u32)>,
    ) -> Result<Self> {
        if levels.is_empty() || levels.iter().any(|&l| l == 0) {
            return Err(Error::InvalidStructure(
                "every variable needs at least one level".into(),
            ));
        }
        if cliques.is_empty() {
            return Err(Error::InvalidStructure("no cliques given".into()));
        }
        let nvars = levels.len();
        let mut covered = vec![false; nvars];
        let mut sorted_cliques = Vec::with_capacity(cliques.len());
        for clique in cliques {
            let mut vars = clique;
            vars.sort_unstable();
            vars.dedup();
            if vars.is_empty() {
                return Err(Error::InvalidStructure("empty clique".into()));
            }
            if *vars.last().unwrap() >= nvars {
                return Err(Error::InvalidStructure("clique names unknown variable".into()));
            }
            for &v in &vars {
                covered[v] = true;
            }
            sorted_cliques.push(vars);
        }
        if !covered.iter().all(|&c| c) {
            return Err(Error::InvalidStructure(
                "cliques do not cover every variable".into(),
            ));
        }
        let mut sorted_seps = Vec::with_capacity(separators.len());
        for (vars, multiplicity) in separators {
            let mut vars = vars;
            vars.sort_unstable();
            vars.dedup();
            if vars.iter().any(|&v| v >= nvars) {
                return Err(Error::InvalidStructure(
                    "separator names unknown variable".into(),
                ));
            }
            if multiplicity == 0 {
                return Err(Error::InvalidStructure(
                    "separator multiplicity must be at least 1".into(),
                ));
            }
            sorted_seps.push(Separator { vars, multiplicity });
        }

        let cells: usize = levels.iter().product();
        let marginal = |vars: &[usize]| -> (Vec<usize>, usize) {
            let size: usize = vars.iter().map(|&v| levels[v]).product();
            let mut map = Vec::with_capacity(cells);
            for cell in 0..cells {
                // Decode the cell into variable values, last variable fastest.
                let mut rest = cell;
                let mut values = vec![0usize; nvars];
                for v in (0..nvars).rev() {
                    values[v] = rest % levels[v];
                    rest /= levels[v];
                }
                let mut idx = 0usize;
                for &v in vars {
                    idx = idx * levels[v] + values[v];
                }
                map.push(idx);
            }
            (map, size)
        };

        let mut clique_maps = Vec::new();
        let mut clique_sizes = Vec::new();
        for vars in &sorted_cliques {
            let (map, size) = marginal(vars);
            clique_maps.push(map);
            clique_sizes.push(size);
        }
        let mut sep_maps = Vec::new();
        let mut sep_sizes = Vec::new();
        let mut sep_hosts = Vec::new();
        for sep in &sorted_seps {
            let hosts: Vec<usize> = sorted_cliques
                .iter()
                .enumerate()
                .filter(|(_, c)| sep.vars.iter().all(|v| c.contains(v)))
                .map(|(i, _)| i)
                .collect();
            if hosts.is_empty() {
                return Err(Error::InvalidStructure(
                    "separator is not contained in any clique".into(),
                ));
            }
            let (map, size) = marginal(&sep.vars);
            sep_maps.push(map);
            sep_sizes.push(size);
            sep_hosts.push(hosts);
        }

        Ok(DecomposableStructure {
            levels,
            cliques: sorted_cliques,
            separators: sorted_seps,
            cells,
            clique_maps,
            clique_sizes,
            sep_maps,
            sep_sizes,
            sep_hosts,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: StructureFile = serde_json::from_str(text)?;
        Self::new(
            file.variables,
            file.cliques,
            file.separators
                .into_iter()
                .map(|s| (s.vars, s.multiplicity))
                .collect(),
        )
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    pub fn separators(&self) -> &[Separator] {
        &self.separators
    }

    /// Number of table cells `m`.
    pub fn cell_count(&self) -> usize {
        self.cells
    }

    /// Lengths of the per-clique marginal blocks, in clique order.
    pub fn clique_sizes(&self) -> &[usize] {
        &self.clique_sizes
    }

    /// The configuration matrix whose rows are the clique-marginal
    /// indicators, stacked in clique order.
    pub fn configuration_matrix(&self) -> ConfigurationMatrix {
        let mut rows = Vec::new();
        for (map, &size) in self.clique_maps.iter().zip(self.clique_sizes.iter()) {
            for idx in 0..size {
                rows.push(
                    (0..self.cells)
                        .map(|cell| if map[cell] == idx { 1 } else { 0 })
                        .collect(),
                );
            }
        }
        ConfigurationMatrix::new(rows).expect("clique indicators always span the ones vector")
    }

    /// Sums a full table down to its clique marginals.
    pub fn clique_marginals(&self, counts: &[u64]) -> Result<Vec<Vec<u64>>> {
        if counts.len() != self.cells {
            return Err(Error::DimensionMismatch {
                expected: self.cells,
                got: counts.len(),
            });
        }
        Ok(self
            .clique_maps
            .iter()
            .zip(self.clique_sizes.iter())
            .map(|(map, &size)| {
                let mut out = vec![0u64; size];
                for (cell, &u) in counts.iter().enumerate() {
                    out[map[cell]] += u;
                }
                out
            })
            .collect())
    }

    /// Splits a stacked statistics vector into per-clique marginal blocks.
    pub fn split_stats<'a>(&self, beta: &'a [i64]) -> Result<Vec<&'a [i64]>> {
        let total: usize = self.clique_sizes.iter().sum();
        if beta.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: beta.len(),
            });
        }
        let mut out = Vec::with_capacity(self.clique_sizes.len());
        let mut offset = 0;
        for &size in &self.clique_sizes {
            out.push(&beta[offset..offset + size]);
            offset += size;
        }
        Ok(out)
    }

    fn separator_marginals_from(&self, clique_marginals: &[Vec<u64>]) -> Result<Vec<Vec<u64>>> {
        let mut out = Vec::with_capacity(self.separators.len());
        for (s, hosts) in self.sep_hosts.iter().enumerate() {
            let mut derived: Option<Vec<u64>> = None;
            for &c in hosts {
                let mut m = vec![0u64; self.sep_sizes[s]];
                // Push the clique marginal down to the separator by
                // summing cells that agree on the separator variables.
                let mut seen = vec![false; self.clique_sizes[c]];
                for cell in 0..self.cells {
                    let ci = self.clique_maps[c][cell];
                    if seen[ci] {
                        continue;
                    }
                    seen[ci] = true;
                    m[self.sep_maps[s][cell]] += clique_marginals[c][ci];
                }
                match &derived {
                    None => derived = Some(m),
                    Some(prev) if *prev == m => {}
                    Some(_) => {
                        return Err(Error::InconsistentMarginals(format!(
                            "cliques disagree on separator {s}"
                        )))
                    }
                }
            }
            out.push(derived.expect("separator has at least one host"));
        }
        Ok(out)
    }
}

/// Closed-form expected counts of a decomposable model from its clique
/// marginals: cell `j` gets `prod_C u(j_C) / prod_S u(j_S)^nu(S)`, with
/// the convention that a cell whose clique marginals all vanish is zero.
pub fn decomposable_mle(
    structure: &DecomposableStructure,
    clique_marginals: &[Vec<u64>],
) -> Result<Vec<BigRational>> {
    if clique_marginals.len() != structure.cliques.len() {
        return Err(Error::DimensionMismatch {
            expected: structure.cliques.len(),
            got: clique_marginals.len(),
        });
    }
    let mut total: Option<u64> = None;
    for (c, marg) in clique_marginals.iter().enumerate() {
        if marg.len() != structure.clique_sizes[c] {
            return Err(Error::DimensionMismatch {
                expected: structure.clique_sizes[c],
                got: marg.len(),
            });
        }
        let sum: u64 = marg.iter().sum();
        match total {
            None => total = Some(sum),
            Some(t) if t == sum => {}
            Some(t) => {
                return Err(Error::InconsistentMarginals(format!(
                    "clique totals differ: {t} vs {sum}"
                )))
            }
        }
    }
    let sep_marginals = structure.separator_marginals_from(clique_marginals)?;

    let mut out = Vec::with_capacity(structure.cells);
    for cell in 0..structure.cells {
        let mut num = BigInt::one();
        let mut zero = false;
        for (c, marg) in clique_marginals.iter().enumerate() {
            let v = marg[structure.clique_maps[c][cell]];
            if v == 0 {
                zero = true;
                break;
            }
            num *= BigInt::from(v);
        }
        if zero {
            out.push(BigRational::zero());
            continue;
        }
        let mut den = BigInt::one();
        for (s, marg) in sep_marginals.iter().enumerate() {
            let v = marg[structure.sep_maps[s][cell]];
            if v == 0 {
                return Err(Error::ZeroSeparatorWithPositiveClique);
            }
            for _ in 0..structure.separators[s].multiplicity {
                den *= BigInt::from(v);
            }
        }
        out.push(BigRational::new(num, den));
    }
    Ok(out)
}

/// Float fast path used per sampling step; assumes the statistics came
/// from a real table so the marginals are consistent by construction.
pub(crate) fn decomposable_mu_f64(
    structure: &DecomposableStructure,
    beta_blocks: &[&[i64]],
) -> Result<Vec<f64>> {
    let mut sep_marg: Vec<Vec<f64>> = Vec::with_capacity(structure.separators.len());
    for (s, hosts) in structure.sep_hosts.iter().enumerate() {
        let c = hosts[0];
        let mut m = vec![0.0f64; structure.sep_sizes[s]];
        let mut seen = vec![false; structure.clique_sizes[c]];
        for cell in 0..structure.cells {
            let ci = structure.clique_maps[c][cell];
            if seen[ci] {
                continue;
            }
            seen[ci] = true;
            m[structure.sep_maps[s][cell]] += beta_blocks[c][ci] as f64;
        }
        sep_marg.push(m);
    }
    let mut out = Vec::with_capacity(structure.cells);
    for cell in 0..structure.cells {
        let mut num = 1.0f64;
        for (c, block) in beta_blocks.iter().enumerate() {
            num *= block[structure.clique_maps[c][cell]] as f64;
        }
        if num == 0.0 {
            out.push(0.0);
            continue;
        }
        let mut den = 1.0f64;
        for (s, marg) in sep_marg.iter().enumerate() {
            let v = marg[structure.sep_maps[s][cell]];
            if v == 0.0 {
                return Err(Error::ZeroSeparatorWithPositiveClique);
            }
            den *= v.powi(structure.separators[s].multiplicity as i32);
        }
        out.push(num / den);
    }
    Ok(out)
}

/// The independence structure of an `r x c` two-way table: single-variable
/// cliques and one empty separator.
pub fn two_way_structure(rows: usize, cols: usize) -> DecomposableStructure {
    DecomposableStructure::new(vec![rows, cols], vec![vec![0], vec![1]], vec![(vec![], 1)])
        .expect("two-way structure is valid")
}

/// The chain graph 1 - 2 - 3: cliques {1,2} and {2,3} with separator {2}.
pub fn chain_structure(levels: [usize; 3]) -> DecomposableStructure {
    DecomposableStructure::new(
        levels.to_vec(),
        vec![vec![0, 1], vec![1, 2]],
        vec![(vec![1], 1)],
    )
    .expect("chain structure is valid")
}
