use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Distribution of an exogenous noise variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// Takes values 0 and 1.
    Bernoulli { p: f64 },
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, std_dev: f64 },
    /// Takes values `0 .. weights.len()`.
    Categorical { weights: Vec<f64> },
    Constant { value: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            NoiseSpec::Bernoulli { p } if !(0.0..=1.0).contains(p) => {
                Err(format!("bernoulli p = {p} outside [0, 1]"))
            }
            NoiseSpec::Uniform { low, high } if !(low < high) || !low.is_finite() || !high.is_finite() => {
                Err(format!("uniform bounds must satisfy low < high, got [{low}, {high}]"))
            }
            NoiseSpec::Gaussian { mean, std_dev } if !(*std_dev > 0.0) || !mean.is_finite() || !std_dev.is_finite() => {
                Err(format!("gaussian needs finite mean and std_dev > 0, got ({mean}, {std_dev})"))
            }
            NoiseSpec::Categorical { weights } => {
                if weights.is_empty() {
                    return Err("categorical weights are empty".into());
                }
                if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                    return Err("categorical weights must be non-negative".into());
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(format!("categorical weights sum to {total}, expected 1"));
                }
                Ok(())
            }
            NoiseSpec::Constant { value } if !value.is_finite() => Err("constant must be finite".into()),
            _ => Ok(()),
        }
    }

    /// `(value, probability)` pairs when the distribution is discrete.
    /// Zero-probability values are dropped.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        let pts = match self {
            NoiseSpec::Bernoulli { p } => vec![(0.0, 1.0 - p), (1.0, *p)],
            NoiseSpec::Categorical { weights } => {
                weights.iter().enumerate().map(|(i, w)| (i as f64, *w)).collect()
            }
            NoiseSpec::Constant { value } => vec![(*value, 1.0)],
            NoiseSpec::Uniform { .. } | NoiseSpec::Gaussian { .. } => return None,
        };
        Some(pts.into_iter().filter(|&(_, p)| p > 0.0).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.support().is_some()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            NoiseSpec::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseSpec::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            NoiseSpec::Gaussian { mean, std_dev } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std_dev * z
            }
            NoiseSpec::Categorical { weights } => {
                let u = rng.random::<f64>();
                let mut acc = 0.0;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        return i as f64;
                    }
                }
                // rounding left u above the last cumulative weight
                weights.iter().rposition(|w| *w > 0.0).unwrap_or(0) as f64
            }
            NoiseSpec::Constant { value } => *value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(NoiseSpec::Bernoulli { p: 1.5 }.validate().is_err());
        assert!(NoiseSpec::Uniform { low: 1.0, high: 1.0 }.validate().is_err());
        assert!(NoiseSpec::Gaussian { mean: 0.0, std_dev: 0.0 }.validate().is_err());
        assert!(NoiseSpec::Categorical { weights: vec![0.5, 0.6] }.validate().is_err());
        assert!(NoiseSpec::Categorical { weights: vec![-0.5, 1.5] }.validate().is_err());
        assert!(NoiseSpec::Categorical { weights: vec![0.25, 0.75] }.validate().is_ok());
    }

    #[test]
    fn supports() {
        assert_eq!(NoiseSpec::Bernoulli { p: 1.0 }.support(), Some(vec![(1.0, 1.0)]));
        assert_eq!(NoiseSpec::Constant { value: 3.0 }.support(), Some(vec![(3.0, 1.0)]));
        assert!(NoiseSpec::Gaussian { mean: 0.0, std_dev: 1.0 }.support().is_none());
    }
}
