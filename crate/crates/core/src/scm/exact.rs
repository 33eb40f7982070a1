use serde::Serialize;

use super::{Result, Scm, ScmError, MAX_NOISE_CONFIGURATIONS};
use crate::graph::Dag;

/// Deviation threshold below which an exact conditional independence holds.
/// Enumeration is exact up to floating-point rounding.
pub const DEFAULT_CI_TOLERANCE: f64 = 1e-10;

/// Largest model [`Scm::verify_markov`] will enumerate.
pub const MAX_MARKOV_VARIABLES: usize = 8;

const MAX_CELLS: usize = 1 << 24;

/// Joint probability table over the product of finite variable domains.
/// Cells are laid out row-major with the last variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    names: Vec<String>,
    domains: Vec<Vec<f64>>,
    strides: Vec<usize>,
    probs: Vec<f64>,
}

/// One d-separation-implied statement `x _||_ y | given`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CiCheck {
    pub x: String,
    pub y: String,
    pub given: Vec<String>,
    pub holds: bool,
    pub deviation: f64,
}

fn strides_for(domains: &[Vec<f64>]) -> Vec<usize> {
    let mut strides = vec![1; domains.len()];
    for k in (0..domains.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * domains[k + 1].len();
    }
    strides
}

impl ExactDistribution {
    /// Builds a table from explicit values; probabilities must be
    /// non-negative and sum to one within 1e-12.
    pub fn new(names: Vec<String>, domains: Vec<Vec<f64>>, probs: Vec<f64>) -> Option<Self> {
        let cells: usize = domains.iter().map(Vec::len).product();
        let total: f64 = probs.iter().sum();
        if names.len() != domains.len()
            || probs.len() != cells
            || probs.iter().any(|p| !(*p >= 0.0))
            || (total - 1.0).abs() > 1e-12
        {
            return None;
        }
        let strides = strides_for(&domains);
        Some(Self { names, domains, strides, probs })
    }

    pub(super) fn from_scm(scm: &Scm) -> Result<Self> {
        let mut domains = Vec::with_capacity(scm.len());
        let mut noise = Vec::with_capacity(scm.len());
        for i in 0..scm.len() {
            let (Some(support), Some(ns)) = (scm.support(i), scm.noise(i).support()) else {
                return Err(ScmError::NotFinite { node: scm.names()[i].clone() });
            };
            domains.push(support.to_vec());
            noise.push(ns);
        }
        let configs = noise.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.len()));
        if configs.is_none_or(|c| c > MAX_NOISE_CONFIGURATIONS) {
            return Err(ScmError::EnumerationBound(format!(
                "more than {MAX_NOISE_CONFIGURATIONS} noise configurations"
            )));
        }
        let cells = domains.iter().try_fold(1usize, |acc, d| acc.checked_mul(d.len()));
        if cells.is_none_or(|c| c > MAX_CELLS) {
            return Err(ScmError::EnumerationBound(format!("more than {MAX_CELLS} joint cells")));
        }
        let strides = strides_for(&domains);
        let mut probs = vec![0.0; cells.unwrap_or(0)];

        let n = scm.len();
        let mut odometer = vec![0usize; n];
        let mut values = vec![0.0; n];
        let mut args = Vec::new();
        'outer: loop {
            let mut p = 1.0;
            for i in 0..n {
                p *= noise[i][odometer[i]].1;
            }
            for &i in scm.graph().topo_indices() {
                args.clear();
                args.extend(scm.parents_of(i).iter().map(|&q| values[q]));
                values[i] = scm
                    .mechanism(i)
                    .evaluate(&args, noise[i][odometer[i]].0)
                    .expect("finite mechanisms validated at construction");
            }
            let mut cell = 0;
            for i in 0..n {
                let k = domains[i]
                    .iter()
                    .position(|&d| d == values[i])
                    .expect("support covers every attainable value");
                cell += k * strides[i];
            }
            probs[cell] += p;
            for i in (0..n).rev() {
                odometer[i] += 1;
                if odometer[i] < noise[i].len() {
                    continue 'outer;
                }
                odometer[i] = 0;
            }
            break;
        }
        Ok(Self { names: scm.names().to_vec(), domains, strides, probs })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn domain(&self, var: usize) -> &[f64] {
        &self.domains[var]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_cells(&self) -> usize {
        self.probs.len()
    }

    fn cell_digits(&self, cell: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.domains)
            .map(|(s, d)| (cell / s) % d.len())
            .collect()
    }

    pub fn cell_values(&self, cell: usize) -> Vec<f64> {
        self.cell_digits(cell)
            .into_iter()
            .zip(&self.domains)
            .map(|(k, d)| d[k])
            .collect()
    }

    /// Probability of a full assignment; zero for values outside the domains.
    pub fn prob(&self, values: &[f64]) -> f64 {
        let mut cell = 0;
        for ((v, d), s) in values.iter().zip(&self.domains).zip(&self.strides) {
            match d.iter().position(|x| x == v) {
                Some(k) => cell += k * s,
                None => return 0.0,
            }
        }
        self.probs[cell]
    }

    /// Marginal table over `vars` (in the given order).
    pub fn marginal(&self, vars: &[usize]) -> ExactDistribution {
        let domains: Vec<Vec<f64>> = vars.iter().map(|&v| self.domains[v].clone()).collect();
        let strides = strides_for(&domains);
        let mut probs = vec![0.0; domains.iter().map(Vec::len).product()];
        for (cell, &p) in self.probs.iter().enumerate() {
            probs[self.project(cell, vars, &strides)] += p;
        }
        ExactDistribution {
            names: vars.iter().map(|&v| self.names[v].clone()).collect(),
            domains,
            strides,
            probs,
        }
    }

    fn project(&self, cell: usize, vars: &[usize], sub_strides: &[usize]) -> usize {
        vars.iter()
            .zip(sub_strides)
            .map(|(&v, s)| ((cell / self.strides[v]) % self.domains[v].len()) * s)
            .sum()
    }

    /// `p(var = value | given)`, or `None` when the conditioning event has
    /// probability zero.
    pub fn conditional(&self, var: usize, value: f64, given: &[(usize, f64)]) -> Option<f64> {
        let mut joint = 0.0;
        let mut evidence = 0.0;
        for (cell, &p) in self.probs.iter().enumerate() {
            let vals = self.cell_values(cell);
            if given.iter().all(|&(g, gv)| vals[g] == gv) {
                evidence += p;
                if vals[var] == value {
                    joint += p;
                }
            }
        }
        (evidence > 0.0).then(|| joint / evidence)
    }

    /// Cell-wise product of `p(x_i | pa_i)` along `dag`, whose nodes must be
    /// in the same order as this table's variables.
    pub fn causal_factorization(&self, dag: &Dag) -> Vec<f64> {
        let factors: Vec<(Vec<usize>, Vec<usize>)> =
            (0..self.names.len()).map(|i| (vec![i], dag.parents(i).to_vec())).collect();
        self.product_of_conditionals(&factors)
    }

    /// Chain-rule product `p(x_o1) p(x_o2 | x_o1) p(x_o3 | x_o1, x_o2) ...`
    /// for an arbitrary variable order, i.e. an entangled factorization.
    pub fn chain_factorization(&self, order: &[usize]) -> Vec<f64> {
        let factors: Vec<(Vec<usize>, Vec<usize>)> =
            (0..order.len()).map(|k| (vec![order[k]], order[..k].to_vec())).collect();
        self.product_of_conditionals(&factors)
    }

    fn product_of_conditionals(&self, factors: &[(Vec<usize>, Vec<usize>)]) -> Vec<f64> {
        let mut out = vec![1.0; self.probs.len()];
        for (head, tail) in factors {
            let all: Vec<usize> = tail.iter().chain(head).copied().collect();
            let joint = self.marginal(&all);
            let cond = self.marginal(tail);
            for (cell, slot) in out.iter_mut().enumerate() {
                let pj = joint.probs[self.project(cell, &all, &joint.strides)];
                let pc = cond.probs[self.project(cell, tail, &cond.strides)];
                *slot *= if pc > 0.0 { pj / pc } else { 0.0 };
            }
        }
        out
    }

    /// `max |p(a, b | z) - p(a | z) p(b | z)|` over cells with `p(z) > 0`.
    pub fn ci_deviation(&self, a: usize, b: usize, z: &[usize]) -> f64 {
        let mut vars = vec![a, b];
        vars.extend_from_slice(z);
        let m = self.marginal(&vars);
        let (na, nb) = (m.domains[0].len(), m.domains[1].len());
        let nz = m.probs.len() / (na * nb);
        // layout: a slowest, then b, then the z block
        let at = |ia: usize, ib: usize, iz: usize| m.probs[(ia * nb + ib) * nz + iz];
        let mut worst: f64 = 0.0;
        for iz in 0..nz {
            let pz: f64 = (0..na).flat_map(|ia| (0..nb).map(move |ib| (ia, ib))).map(|(ia, ib)| at(ia, ib, iz)).sum();
            if pz <= 0.0 {
                continue;
            }
            for ia in 0..na {
                let pa = (0..nb).map(|ib| at(ia, ib, iz)).sum::<f64>() / pz;
                for ib in 0..nb {
                    let pb = (0..na).map(|ja| at(ja, ib, iz)).sum::<f64>() / pz;
                    worst = worst.max((at(ia, ib, iz) / pz - pa * pb).abs());
                }
            }
        }
        worst
    }
}

pub(super) fn verify_markov(scm: &Scm, tolerance: f64) -> Result<Vec<CiCheck>> {
    let n = scm.len();
    if n > MAX_MARKOV_VARIABLES {
        return Err(ScmError::EnumerationBound(format!(
            "{n} variables, Markov verification enumerates at most {MAX_MARKOV_VARIABLES}"
        )));
    }
    let dist = scm.exact_distribution()?;
    let g = scm.graph();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let rest: Vec<usize> = (0..n).filter(|&k| k != i && k != j).collect();
            for mask in 0u32..(1 << rest.len()) {
                let z: Vec<usize> =
                    rest.iter().enumerate().filter(|(k, _)| mask & (1 << k) != 0).map(|(_, &v)| v).collect();
                if !g.d_separated_idx(&[i], &[j], &z) {
                    continue;
                }
                let deviation = dist.ci_deviation(i, j, &z);
                out.push(CiCheck {
                    x: g.name(i).to_owned(),
                    y: g.name(j).to_owned(),
                    given: z.iter().map(|&k| g.name(k).to_owned()).collect(),
                    holds: deviation <= tolerance,
                    deviation,
                });
            }
        }
    }
    Ok(out)
}
