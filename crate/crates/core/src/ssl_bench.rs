//! Self-training on causal versus anticausal 1D classification tasks.
//!
//! Anticausal: the label causes the feature (`X | Y` is a Gaussian cluster per
//! class), so unlabeled `X` reveals where the classes separate. Causal: the
//! feature causes the label (`Y = 1[X > theta]` with label noise) and `p(X)` is
//! the same Gaussian whatever `theta` is, so unlabeled data carries nothing
//! about the boundary.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SslError {
    #[error("need at least 2 labeled points, got {0}")]
    TooFewLabeled(usize),
    #[error("test set must have at least {min} points, got {got}")]
    TestTooSmall { min: usize, got: usize },
    #[error("labeled data has no example of class {0}")]
    MissingClass(u8),
    #[error("need at least {min} seeds, got {got}")]
    TooFewSeeds { min: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, SslError>;

pub const MIN_TEST: usize = 500;
pub const MIN_SEEDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskDirection {
    Causal,
    Anticausal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SslConfig {
    /// Anticausal class means sit at `-mu` and `+mu`.
    pub mu: f64,
    /// Standard deviation of every Gaussian in both generators.
    pub sigma: f64,
    /// Causal decision threshold.
    pub theta: f64,
    /// Causal label-flip probability.
    pub epsilon: f64,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub rounds: usize,
    /// Accept a self-training update only when it moves the decision
    /// boundary to a point of lower (kernel-estimated) unlabeled density.
    pub low_density_guard: bool,
}

impl Default for SslConfig {
    fn default() -> Self {
        Self {
            mu: 2.0,
            sigma: 1.0,
            theta: 0.5,
            epsilon: 0.1,
            n_labeled: 4,
            n_unlabeled: 1000,
            n_test: 1000,
            rounds: 10,
            low_density_guard: true,
        }
    }
}

impl SslConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SslError::InvalidParameter(m));
        if self.n_labeled < 2 {
            return Err(SslError::TooFewLabeled(self.n_labeled));
        }
        if self.n_test < MIN_TEST {
            return Err(SslError::TestTooSmall { min: MIN_TEST, got: self.n_test });
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return bad(format!("sigma {} must be positive", self.sigma));
        }
        if !self.mu.is_finite() || !self.theta.is_finite() {
            return bad("mu and theta must be finite".into());
        }
        if !(0.0..=0.5).contains(&self.epsilon) {
            return bad(format!("epsilon {} must be in [0, 0.5]", self.epsilon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SslTask {
    pub direction: TaskDirection,
    pub labeled_x: Vec<f64>,
    pub labeled_y: Vec<u8>,
    pub unlabeled_x: Vec<f64>,
    pub test_x: Vec<f64>,
    pub test_y: Vec<u8>,
    pub config: SslConfig,
}

/// Draws `n` points from one of the generators; `x` and the label noise come
/// from separate substreams so the causal `x` never depends on `theta`.
fn draw(direction: TaskDirection, cfg: &SslConfig, n: usize, seed: u64, part: u64) -> (Vec<f64>, Vec<u8>) {
    let mut xr = exec::substream(seed, part, 0);
    let mut yr = exec::substream(seed, part, 1);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = xr.sample(StandardNormal);
        let u: f64 = yr.random();
        match direction {
            TaskDirection::Anticausal => {
                let y = u8::from(u < 0.5);
                let centre = if y == 1 { cfg.mu } else { -cfg.mu };
                xs.push(centre + cfg.sigma * z);
                ys.push(y);
            }
            TaskDirection::Causal => {
                let x = cfg.sigma * z;
                let flip = u < cfg.epsilon;
                xs.push(x);
                ys.push(u8::from((x > cfg.theta) != flip));
            }
        }
    }
    (xs, ys)
}

/// Builds a task. The labeled set is redrawn (continuing the same stream)
/// until it contains both classes.
pub fn generate_ssl_task(direction: TaskDirection, cfg: &SslConfig, seed: u64) -> Result<SslTask> {
    cfg.validate()?;
    let mut attempt = 0u64;
    let (labeled_x, labeled_y) = loop {
        let (x, y) = draw(direction, cfg, cfg.n_labeled, seed, 0x1ab0 + (attempt << 16));
        if y.contains(&0) && y.contains(&1) {
            break (x, y);
        }
        attempt += 1;
        if attempt > 10_000 {
            return Err(SslError::InvalidParameter("could not draw both classes".into()));
        }
    };
    let (unlabeled_x, _) = draw(direction, cfg, cfg.n_unlabeled, seed, 0x7a1);
    let (test_x, test_y) = draw(direction, cfg, cfg.n_test, seed, 0x7e57);
    Ok(SslTask { direction, labeled_x, labeled_y, unlabeled_x, test_x, test_y, config: cfg.clone() })
}

/// Nearest-class-mean classifier on the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMeans {
    pub mean0: f64,
    pub mean1: f64,
}

impl ClassMeans {
    pub fn fit(x: &[f64], y: &[u8]) -> Result<Self> {
        let mean = |c: u8| {
            let v: Vec<f64> = x.iter().zip(y).filter(|(_, &l)| l == c).map(|(&a, _)| a).collect();
            if v.is_empty() {
                Err(SslError::MissingClass(c))
            } else {
                Ok(v.iter().sum::<f64>() / v.len() as f64)
            }
        };
        Ok(Self { mean0: mean(0)?, mean1: mean(1)? })
    }

    pub fn predict(&self, x: f64) -> u8 {
        u8::from((x - self.mean1).abs() < (x - self.mean0).abs())
    }

    pub fn boundary(&self) -> f64 {
        0.5 * (self.mean0 + self.mean1)
    }

    pub fn accuracy(&self, x: &[f64], y: &[u8]) -> f64 {
        let hits = x.iter().zip(y).filter(|(&a, &l)| self.predict(a) == l).count();
        hits as f64 / x.len() as f64
    }
}

fn kde(points: &[f64], at: f64) -> f64 {
    let n = points.len() as f64;
    let m = points.iter().sum::<f64>() / n;
    let sd = (points.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
    let h = (1.06 * sd * n.powf(-0.2)).max(f64::MIN_POSITIVE);
    points.iter().map(|p| (-0.5 * ((at - p) / h).powi(2)).exp()).sum::<f64>() / (n * h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SslOutcome {
    pub supervised_acc: f64,
    pub ssl_acc: f64,
    pub supervised_boundary: f64,
    pub ssl_boundary: f64,
    /// Self-training rounds whose update was kept.
    pub accepted_rounds: usize,
}

impl SslOutcome {
    pub fn gain(&self) -> f64 {
        self.ssl_acc - self.supervised_acc
    }
}

/// Supervised nearest-class-mean baseline versus self-training: each round
/// pseudo-labels the unlabeled points with the current classifier and refits
/// the class means on labeled plus pseudo-labeled data.
pub fn self_train_eval(task: &SslTask, rounds: usize) -> Result<SslOutcome> {
    let sup = ClassMeans::fit(&task.labeled_x, &task.labeled_y)?;
    let mut cur = sup;
    let mut accepted = 0;
    if !task.unlabeled_x.is_empty() {
        let mut xs = task.labeled_x.clone();
        xs.extend_from_slice(&task.unlabeled_x);
        for _ in 0..rounds {
            let mut ys = task.labeled_y.clone();
            ys.extend(task.unlabeled_x.iter().map(|&x| cur.predict(x)));
            let next = match ClassMeans::fit(&xs, &ys) {
                Ok(c) => c,
                Err(_) => break,
            };
            if next == cur {
                break;
            }
            if task.config.low_density_guard
                && kde(&task.unlabeled_x, next.boundary()) >= kde(&task.unlabeled_x, cur.boundary())
            {
                break;
            }
            cur = next;
            accepted += 1;
        }
    }
    Ok(SslOutcome {
        supervised_acc: sup.accuracy(&task.test_x, &task.test_y),
        ssl_acc: cur.accuracy(&task.test_x, &task.test_y),
        supervised_boundary: sup.boundary(),
        ssl_boundary: cur.boundary(),
        accepted_rounds: accepted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub causal: SslOutcome,
    pub anticausal: SslOutcome,
}

/// One-sided sign test of `gain_anticausal > gain_causal`; ties are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub positive: usize,
    pub negative: usize,
    pub ties: usize,
    /// `None` when every pair is tied.
    pub p_value: Option<f64>,
}

pub fn sign_test(diffs: &[f64]) -> SignTest {
    let positive = diffs.iter().filter(|&&d| d > 0.0).count();
    let negative = diffs.iter().filter(|&&d| d < 0.0).count();
    let ties = diffs.len() - positive - negative;
    let n = positive + negative;
    let p_value = (n > 0).then(|| {
        // P(Binomial(n, 1/2) >= positive)
        let mut c = 1.0f64;
        let mut tail = 0.0;
        for k in 0..=n {
            if k >= positive {
                tail += c;
            }
            c = c * (n - k) as f64 / (k + 1) as f64;
        }
        (tail / 2f64.powi(n as i32)).min(1.0)
    });
    SignTest { positive, negative, ties, p_value }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SslSummary {
    pub config: SslConfig,
    pub master_seed: u64,
    pub seeds: Vec<SeedResult>,
    pub median_gain_causal: f64,
    pub median_gain_anticausal: f64,
    pub sign_test: SignTest,
    /// Every gain difference is zero, so the sign test says nothing.
    pub degenerate: bool,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Runs both directions on `n_seeds` paired seeds derived from `master_seed`.
pub fn ssl_gap_experiment(cfg: &SslConfig, n_seeds: usize, master_seed: u64, execution: Execution) -> Result<SslSummary> {
    if n_seeds < MIN_SEEDS {
        return Err(SslError::TooFewSeeds { min: MIN_SEEDS, got: n_seeds });
    }
    cfg.validate()?;
    let seeds = exec::map_indices(execution, n_seeds, |k| {
        let seed = exec::derive_seed(master_seed, k as u64);
        let run = |d| generate_ssl_task(d, cfg, seed).and_then(|t| self_train_eval(&t, cfg.rounds));
        Ok(SeedResult { seed, causal: run(TaskDirection::Causal)?, anticausal: run(TaskDirection::Anticausal)? })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let gc: Vec<f64> = seeds.iter().map(|s| s.causal.gain()).collect();
    let ga: Vec<f64> = seeds.iter().map(|s| s.anticausal.gain()).collect();
    let diffs: Vec<f64> = ga.iter().zip(&gc).map(|(a, c)| a - c).collect();
    let sign_test = sign_test(&diffs);
    Ok(SslSummary {
        config: cfg.clone(),
        master_seed,
        degenerate: sign_test.p_value.is_none(),
        median_gain_causal: median(&gc),
        median_gain_anticausal: median(&ga),
        sign_test,
        seeds,
    })
}
