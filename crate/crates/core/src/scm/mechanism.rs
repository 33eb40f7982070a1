use serde::{Deserialize, Serialize};

/// Scalar function applied to a single parent value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnaryFn {
    Identity,
    /// Binary negation, `1 - x`.
    Not,
    Square,
    Cube,
    Tanh,
    Sin,
    Exp,
    /// Coefficients in ascending order of power.
    Polynomial(Vec<f64>),
    /// Linear interpolation between `(knots[k], values[k])`, constant outside.
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
}

impl UnaryFn {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            UnaryFn::Identity => x,
            UnaryFn::Not => 1.0 - x,
            UnaryFn::Square => x * x,
            UnaryFn::Cube => x * x * x,
            UnaryFn::Tanh => x.tanh(),
            UnaryFn::Sin => x.sin(),
            UnaryFn::Exp => x.exp(),
            UnaryFn::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &a| acc * x + a),
            UnaryFn::PiecewiseLinear { knots, values } => {
                let k = knots.partition_point(|&t| t <= x);
                if k == 0 {
                    values[0]
                } else if k == knots.len() {
                    values[k - 1]
                } else {
                    let (x0, x1) = (knots[k - 1], knots[k]);
                    let w = (x - x0) / (x1 - x0);
                    values[k - 1] + w * (values[k] - values[k - 1])
                }
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        if let UnaryFn::PiecewiseLinear { knots, values } = self {
            if knots.is_empty() || knots.len() != values.len() {
                return Err("piecewise-linear needs equally many (>= 1) knots and values".into());
            }
            if knots.windows(2).any(|w| !(w[0] < w[1])) {
                return Err("piecewise-linear knots must be strictly increasing".into());
            }
        }
        Ok(())
    }
}

/// `intercept + sum_k terms[k](parent_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParentFn {
    #[serde(default)]
    pub intercept: f64,
    pub terms: Vec<UnaryFn>,
}

impl ParentFn {
    pub fn new(terms: Vec<UnaryFn>) -> Self {
        Self { intercept: 0.0, terms }
    }

    pub fn eval(&self, parents: &[f64]) -> f64 {
        self.intercept + self.terms.iter().zip(parents).map(|(f, &x)| f.eval(x)).sum::<f64>()
    }
}

/// Structural assignment of one node given its parents and its own noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mechanism {
    /// The node equals its noise.
    Passthrough,
    /// Ignores parents and noise; installed by hard interventions.
    Constant { value: f64 },
    /// Finite lookup. `outputs` is laid out row-major over the parent domains
    /// followed by the noise domain (noise varies fastest).
    Table {
        parent_domains: Vec<Vec<f64>>,
        noise_domain: Vec<f64>,
        outputs: Vec<f64>,
    },
    /// `intercept + coefficients . parents + noise`.
    Linear {
        coefficients: Vec<f64>,
        #[serde(default)]
        intercept: f64,
    },
    /// `intercept + sum_k terms[k](parent_k) + noise`.
    Additive {
        #[serde(default)]
        intercept: f64,
        terms: Vec<UnaryFn>,
    },
    /// The noise value `v` picks `family[v]`, which is applied to the parents.
    Selector { family: Vec<ParentFn> },
}

impl Mechanism {
    pub fn arity(&self) -> usize {
        match self {
            Mechanism::Passthrough | Mechanism::Constant { .. } => 0,
            Mechanism::Table { parent_domains, .. } => parent_domains.len(),
            Mechanism::Linear { coefficients, .. } => coefficients.len(),
            Mechanism::Additive { terms, .. } => terms.len(),
            Mechanism::Selector { family } => family.first().map_or(0, |f| f.terms.len()),
        }
    }

    /// Mechanisms whose output set is finite whenever parents and noise are.
    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            Mechanism::Passthrough
                | Mechanism::Constant { .. }
                | Mechanism::Table { .. }
                | Mechanism::Selector { .. }
        )
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        match self {
            Mechanism::Table { parent_domains, noise_domain, outputs } => {
                let cells = parent_domains.iter().map(Vec::len).product::<usize>() * noise_domain.len();
                if noise_domain.is_empty() || parent_domains.iter().any(Vec::is_empty) {
                    return Err("table domains must be non-empty".into());
                }
                if outputs.len() != cells {
                    return Err(format!("table has {} outputs, domain product is {cells}", outputs.len()));
                }
                Ok(())
            }
            Mechanism::Additive { terms, .. } => terms.iter().try_for_each(UnaryFn::validate),
            Mechanism::Selector { family } => {
                let Some(first) = family.first() else {
                    return Err("selector family is empty".into());
                };
                if family.iter().any(|f| f.terms.len() != first.terms.len()) {
                    return Err("selector family members disagree on arity".into());
                }
                family.iter().flat_map(|f| &f.terms).try_for_each(UnaryFn::validate)
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the assignment. Returns `None` when a table lookup misses or
    /// a selector index is out of range.
    pub fn evaluate(&self, parents: &[f64], noise: f64) -> Option<f64> {
        match self {
            Mechanism::Passthrough => Some(noise),
            Mechanism::Constant { value } => Some(*value),
            Mechanism::Table { parent_domains, noise_domain, outputs } => {
                let mut idx = 0;
                for (dom, &v) in parent_domains.iter().zip(parents) {
                    idx = idx * dom.len() + dom.iter().position(|&d| d == v)?;
                }
                idx = idx * noise_domain.len() + noise_domain.iter().position(|&d| d == noise)?;
                Some(outputs[idx])
            }
            Mechanism::Linear { coefficients, intercept } => Some(
                intercept + coefficients.iter().zip(parents).map(|(c, x)| c * x).sum::<f64>() + noise,
            ),
            Mechanism::Additive { intercept, terms } => {
                Some(intercept + terms.iter().zip(parents).map(|(f, &x)| f.eval(x)).sum::<f64>() + noise)
            }
            Mechanism::Selector { family } => {
                let v = selector_index(noise, family.len())?;
                Some(family[v].eval(parents))
            }
        }
    }
}

pub(crate) fn selector_index(noise: f64, len: usize) -> Option<usize> {
    (noise >= 0.0 && noise.fract() == 0.0 && (noise as usize) < len).then_some(noise as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unary_functions() {
        assert_eq!(UnaryFn::Not.eval(1.0), 0.0);
        assert_eq!(UnaryFn::Polynomial(vec![1.0, 0.0, 2.0]).eval(3.0), 19.0);
        let pl = UnaryFn::PiecewiseLinear { knots: vec![0.0, 1.0], values: vec![0.0, 2.0] };
        assert_eq!(pl.eval(0.25), 0.5);
        assert_eq!(pl.eval(-1.0), 0.0);
        assert_eq!(pl.eval(5.0), 2.0);
    }

    #[test]
    fn table_lookup_is_row_major_with_noise_last() {
        let m = Mechanism::Table {
            parent_domains: vec![vec![0.0, 1.0]],
            noise_domain: vec![0.0, 1.0],
            outputs: vec![10.0, 11.0, 12.0, 13.0],
        };
        assert_eq!(m.evaluate(&[1.0], 0.0), Some(12.0));
        assert_eq!(m.evaluate(&[0.0], 1.0), Some(11.0));
        assert_eq!(m.evaluate(&[2.0], 1.0), None);
    }

    #[test]
    fn selector_picks_by_noise() {
        let m = Mechanism::Selector {
            family: vec![ParentFn::new(vec![UnaryFn::Identity]), ParentFn::new(vec![UnaryFn::Not])],
        };
        assert_eq!(m.evaluate(&[1.0], 0.0), Some(1.0));
        assert_eq!(m.evaluate(&[1.0], 1.0), Some(0.0));
        assert_eq!(m.evaluate(&[1.0], 2.0), None);
        assert_eq!(m.arity(), 1);
    }

    #[test]
    fn table_size_validated() {
        let m = Mechanism::Table {
            parent_domains: vec![vec![0.0, 1.0]],
            noise_domain: vec![0.0],
            outputs: vec![1.0],
        };
        assert!(m.validate().is_err());
    }
}
