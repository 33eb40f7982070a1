//! Bivariate cause-effect inference.
//!
//! [`anm_direction`] fits an additive noise model in both directions and
//! prefers the direction whose residuals are independent of the input.
//! [`igci_direction`] uses the slope-based score: when the cause density and
//! the mechanism are chosen independently, `E[log |f'(X)|] < 0` on data
//! rescaled to the unit square.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::stats::{self, KernelSpec, LooGrid, StatsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscoveryError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("column `{0}` is constant")]
    ConstantColumn(&'static str),
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("fewer than two distinct x values")]
    TooFewDistinct,
    #[error("no pairs to evaluate")]
    EmptyBatch,
    #[error("pair `{id}`: {source}")]
    Pair { id: String, source: Box<DiscoveryError> },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, DiscoveryError>;

/// Minimum sample size for both methods.
pub const MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    XtoY,
    YtoX,
    Undecided,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::XtoY => Direction::YtoX,
            Direction::YtoX => Direction::XtoY,
            Direction::Undecided => Direction::Undecided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Anm,
    Igci,
}

/// Decision plus the evidence it was based on. `threshold` is the ANM
/// significance level or the IGCI score margin that was applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionVerdict {
    pub verdict: Direction,
    pub method: Method,
    pub anm_p_forward: Option<f64>,
    pub anm_p_backward: Option<f64>,
    pub igci_score: Option<f64>,
    pub threshold: f64,
}

/// How the two regressions are fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnmRegression {
    /// Median-heuristic bandwidth and a fixed ridge (`None`: `1e-3 * n_train`).
    Fixed { ridge: Option<f64> },
    /// Bandwidth and ridge picked by leave-one-out error.
    LeaveOneOut(LooGrid),
}

impl Default for AnmRegression {
    fn default() -> Self {
        AnmRegression::LeaveOneOut(LooGrid::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnmConfig {
    /// Significance level for the residual independence tests.
    pub alpha: f64,
    /// Fraction of the sample used to fit the regressions; the rest is used
    /// for testing residual independence.
    pub train_fraction: f64,
    pub regression: AnmRegression,
    pub permutations: usize,
    /// Larger inputs are subsampled to this many points (the HSIC Gram
    /// matrices are quadratic in size).
    pub max_samples: Option<usize>,
    /// Also run with the two halves' roles exchanged and report, per
    /// direction, the larger of the two p-values.
    pub cross_fit: bool,
    /// Split and permutation seed; not part of serialized configs.
    #[serde(skip)]
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for AnmConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            train_fraction: 0.5,
            regression: AnmRegression::default(),
            permutations: stats::DEFAULT_PERMUTATIONS,
            max_samples: Some(2000),
            cross_fit: true,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IgciConfig {
    /// Scores within `[-threshold, threshold]` are undecided.
    pub threshold: f64,
    /// Undecided when more than this fraction of consecutive pairs has a
    /// zero increment in either variable.
    pub max_skipped_fraction: f64,
}

impl Default for IgciConfig {
    fn default() -> Self {
        Self { threshold: 0.01, max_skipped_fraction: 0.2 }
    }
}

fn check_columns(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(DiscoveryError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < MIN_SAMPLES {
        return Err(DiscoveryError::TooFewSamples { needed: MIN_SAMPLES, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(DiscoveryError::NonFinite);
    }
    Ok(())
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Additive-noise-model direction test.
///
/// Fits `y = f(x) + r` and `x = g(y) + s` by kernel ridge regression on a
/// random training split and tests `x _||_ r`, `y _||_ s` with HSIC on the
/// held-out split. With `cross_fit` the halves then trade roles and each
/// direction keeps the larger p-value. Both directions use the same split and
/// permutation seed, so swapping the inputs exactly swaps the two p-values.
pub fn anm_direction(x: &[f64], y: &[f64], cfg: &AnmConfig) -> Result<DirectionVerdict> {
    check_columns(x, y)?;
    if is_constant(x) {
        return Err(DiscoveryError::ConstantColumn("x"));
    }
    if is_constant(y) {
        return Err(DiscoveryError::ConstantColumn("y"));
    }
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.shuffle(&mut exec::substream(cfg.seed, 0xa11, 0));
    if let Some(m) = cfg.max_samples {
        idx.truncate(m.max(MIN_SAMPLES));
    }
    let n_train = ((idx.len() as f64 * cfg.train_fraction).round() as usize).clamp(5, idx.len() - 5);
    let (train, test) = idx.split_at(n_train);
    let pick = |v: &[f64], ids: &[usize]| ids.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let (xtr, ytr, xte, yte) = (pick(x, train), pick(y, train), pick(x, test), pick(y, test));

    let kernel = KernelSpec::median_heuristic();
    let hsic_seed = exec::derive_seed(cfg.seed, 0x451c);
    let p_value = |inp_tr: &[f64], out_tr: &[f64], inp_te: &[f64], out_te: &[f64]| -> Result<f64> {
        let fit = match &cfg.regression {
            AnmRegression::Fixed { ridge } => {
                let ridge = ridge.unwrap_or_else(|| stats::default_ridge(inp_tr.len()));
                stats::kernel_regress(inp_tr, out_tr, &kernel, ridge)?
            }
            AnmRegression::LeaveOneOut(grid) => stats::kernel_regress_loo(inp_tr, out_tr, grid)?,
        };
        let res = fit.residuals(inp_te, out_te);
        let r = stats::hsic_test_with(inp_te, &res, &kernel, cfg.permutations, hsic_seed, cfg.execution)?;
        Ok(r.p_value)
    };
    let mut p_forward = p_value(&xtr, &ytr, &xte, &yte)?;
    let mut p_backward = p_value(&ytr, &xtr, &yte, &xte)?;
    if cfg.cross_fit {
        p_forward = p_forward.max(p_value(&xte, &yte, &xtr, &ytr)?);
        p_backward = p_backward.max(p_value(&yte, &xte, &ytr, &xtr)?);
    }

    let alpha = cfg.alpha;
    let verdict = if p_forward > p_backward && p_forward > alpha && p_backward < alpha {
        Direction::XtoY
    } else if p_backward > p_forward && p_backward > alpha && p_forward < alpha {
        Direction::YtoX
    } else {
        Direction::Undecided
    };
    Ok(DirectionVerdict {
        verdict,
        method: Method::Anm,
        anm_p_forward: Some(p_forward),
        anm_p_backward: Some(p_backward),
        igci_score: None,
        threshold: alpha,
    })
}

fn min_max(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    v.iter().map(|a| if span > 0.0 { (a - lo) / span } else { 0.0 }).collect()
}

/// Slope score `C(X -> Y)`: mean of `log |dy / dx|` over consecutive points
/// after sorting by `x`, on min-max normalized data. Pairs with a zero
/// increment in either coordinate are skipped. Returns the score and the
/// fraction of skipped pairs.
pub fn igci_slope_score(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(DiscoveryError::LengthMismatch(x.len(), y.len()));
    }
    let (xn, yn) = (min_max(x), min_max(y));
    if x.len() < 2 || is_constant(&xn) {
        return Err(DiscoveryError::TooFewDistinct);
    }
    let mut order: Vec<usize> = (0..xn.len()).collect();
    order.sort_by(|&a, &b| xn[a].total_cmp(&xn[b]).then(yn[a].total_cmp(&yn[b])));
    let mut sum = 0.0;
    let mut used = 0usize;
    for w in order.windows(2) {
        let dx = xn[w[1]] - xn[w[0]];
        let dy = (yn[w[1]] - yn[w[0]]).abs();
        if dx > 0.0 && dy > 0.0 {
            sum += (dy / dx).ln();
            used += 1;
        }
    }
    let pairs = order.len() - 1;
    let skipped = (pairs - used) as f64 / pairs as f64;
    let score = if used > 0 { sum / used as f64 } else { f64::NAN };
    Ok((score, skipped))
}

/// Information-geometric direction test with the slope-based estimator.
pub fn igci_direction(x: &[f64], y: &[f64], cfg: &IgciConfig) -> Result<DirectionVerdict> {
    check_columns(x, y)?;
    let (score, skipped) = igci_slope_score(x, y)?;
    let verdict = if skipped > cfg.max_skipped_fraction || !score.is_finite() {
        Direction::Undecided
    } else if score < -cfg.threshold {
        Direction::XtoY
    } else if score > cfg.threshold {
        Direction::YtoX
    } else {
        Direction::Undecided
    };
    Ok(DirectionVerdict {
        verdict,
        method: Method::Igci,
        anm_p_forward: None,
        anm_p_backward: None,
        igci_score: score.is_finite().then_some(score),
        threshold: cfg.threshold,
    })
}

/// One benchmark pair with its known direction.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCase {
    pub id: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub truth: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub anm: AnmConfig,
    pub igci: IgciConfig,
    /// Pair `k` runs with seed `derive_seed(seed, k)`; not serialized.
    #[serde(skip)]
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub id: String,
    pub truth: Direction,
    pub verdict: DirectionVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub method: Method,
    pub total: usize,
    pub decided: usize,
    pub correct: usize,
    /// `correct / decided`; absent when nothing was decided.
    pub accuracy: Option<f64>,
    pub decision_rate: f64,
    pub pairs: Vec<PairOutcome>,
}

/// Runs one method over a list of pairs. Pairs are processed in parallel;
/// each uses its own derived seed so results do not depend on scheduling.
pub fn batch_discover(pairs: &[PairCase], method: Method, cfg: &BatchConfig) -> Result<BatchSummary> {
    if pairs.is_empty() {
        return Err(DiscoveryError::EmptyBatch);
    }
    let results = exec::map_indices(cfg.execution, pairs.len(), |k| {
        let pair = &pairs[k];
        let verdict = match method {
            Method::Anm => {
                let anm = AnmConfig {
                    seed: exec::derive_seed(cfg.seed, k as u64),
                    execution: Execution::Sequential,
                    ..cfg.anm.clone()
                };
                anm_direction(&pair.x, &pair.y, &anm)
            }
            Method::Igci => igci_direction(&pair.x, &pair.y, &cfg.igci),
        };
        verdict
            .map(|verdict| PairOutcome { id: pair.id.clone(), truth: pair.truth, verdict })
            .map_err(|e| DiscoveryError::Pair { id: pair.id.clone(), source: Box::new(e) })
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;
    let decided = outcomes.iter().filter(|o| o.verdict.verdict != Direction::Undecided).count();
    let correct = outcomes.iter().filter(|o| o.verdict.verdict == o.truth && o.truth != Direction::Undecided).count();
    Ok(BatchSummary {
        method,
        total: outcomes.len(),
        decided,
        correct,
        accuracy: (decided > 0).then(|| correct as f64 / decided as f64),
        decision_rate: decided as f64 / outcomes.len() as f64,
        pairs: outcomes,
    })
}

/// Synthetic benchmark pairs with known ground truth.
pub mod synthetic {
    use super::*;

    fn finish(id: String, cause: Vec<f64>, effect: Vec<f64>, swap: bool) -> PairCase {
        if swap {
            PairCase { id, x: effect, y: cause, truth: Direction::YtoX }
        } else {
            PairCase { id, x: cause, y: effect, truth: Direction::XtoY }
        }
    }

    fn affine<R: Rng>(rng: &mut R, v: Vec<f64>) -> Vec<f64> {
        let scale = rng.random_range(0.5..5.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let shift = rng.random_range(-3.0..3.0);
        v.into_iter().map(|a| scale * a + shift).collect()
    }

    /// `U ~ U[-1, 1]`, effect `U^3 + 0.1 N(0, 1)`; both variables get a
    /// random sign, scale and shift, and the roles are swapped half the time.
    pub fn cubic_anm_pair(n: usize, seed: u64) -> PairCase {
        let mut rng = exec::substream(seed, 0xc0be, 0);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e: Vec<f64> = u
            .iter()
            .map(|&a| a * a * a + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (cause, effect) = (affine(&mut rng, u), affine(&mut rng, e));
        let swap = rng.random::<bool>();
        finish(format!("cubic-{seed}"), cause, effect, swap)
    }

    /// `X ~ N(0, 1)`, `Y = b X + N(0, 1)` with `|b|` in `[0.5, 2]`.
    pub fn linear_gaussian_pair(n: usize, seed: u64) -> PairCase {
        let mut rng = exec::substream(seed, 0x11ea, 0);
        let b = rng.random_range(0.5..2.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|&a| b * a + rng.sample::<f64, _>(StandardNormal)).collect();
        let swap = rng.random::<bool>();
        finish(format!("lingauss-{seed}"), x, y, swap)
    }

    /// Noise-free monotone mechanism on a uniform cause: `x^a` with `a` in
    /// `[0.25, 0.5]` or `[2, 4]`, or `exp(k x)` with `k` in `[2, 4]`,
    /// possibly reflected to be decreasing, with random affine rescaling and
    /// role swapping.
    pub fn monotone_pair(n: usize, seed: u64) -> PairCase {
        let mut rng = exec::substream(seed, 0x3070, 0);
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let family = rng.random_range(0..3);
        let a = match family {
            0 => rng.random_range(0.25..0.5),
            1 => rng.random_range(2.0..4.0),
            _ => rng.random_range(2.0..4.0),
        };
        let decreasing = rng.random::<bool>();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| {
                let f = if family == 2 { (a * v).exp() } else { v.powf(a) };
                if decreasing {
                    -f
                } else {
                    f
                }
            })
            .collect();
        let (cause, effect) = (affine(&mut rng, x), affine(&mut rng, y));
        let swap = rng.random::<bool>();
        finish(format!("monotone-{seed}"), cause, effect, swap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = exec::substream(seed, 1, 0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = x.iter().map(|&a| a * a * a + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        (x, y)
    }

    #[test]
    fn anm_finds_cubic_direction() {
        let verdicts: Vec<Direction> = (0..20)
            .map(|s| {
                let (x, y) = cubic(500, s);
                anm_direction(&x, &y, &AnmConfig { seed: s, ..AnmConfig::default() }).unwrap().verdict
            })
            .collect();
        let right = verdicts.iter().filter(|&&v| v == Direction::XtoY).count();
        assert!(right >= 17 && !verdicts.contains(&Direction::YtoX), "{verdicts:?}");
    }

    #[test]
    fn anm_swap_exchanges_p_values() {
        let (x, y) = cubic(300, 4);
        let cfg = AnmConfig { seed: 17, ..AnmConfig::default() };
        let f = anm_direction(&x, &y, &cfg).unwrap();
        let b = anm_direction(&y, &x, &cfg).unwrap();
        assert_eq!(f.verdict.reversed(), b.verdict);
        assert_eq!(f.anm_p_forward, b.anm_p_backward);
        assert_eq!(f.anm_p_backward, b.anm_p_forward);
    }

    #[test]
    fn anm_linear_gaussian_is_undecided() {
        let mut rng = exec::substream(5, 2, 0);
        let x: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|&a| 1.5 * a + rng.sample::<f64, _>(StandardNormal)).collect();
        let v = anm_direction(&x, &y, &AnmConfig::default()).unwrap();
        assert_eq!(v.verdict, Direction::Undecided, "{v:?}");
    }

    #[test]
    fn anm_errors() {
        let cfg = AnmConfig::default();
        let x: Vec<f64> = (0..30).map(f64::from).collect();
        assert_eq!(anm_direction(&x, &[1.0; 30], &cfg), Err(DiscoveryError::ConstantColumn("y")));
        assert_eq!(anm_direction(&x, &x[..29], &cfg), Err(DiscoveryError::LengthMismatch(30, 29)));
        assert!(matches!(
            anm_direction(&x[..10], &x[..10], &cfg),
            Err(DiscoveryError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn igci_identity_is_undecided() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let v = igci_direction(&x, &x, &IgciConfig::default()).unwrap();
        assert!(v.igci_score.unwrap().abs() < 1e-12);
        assert_eq!(v.verdict, Direction::Undecided);
    }

    #[test]
    fn igci_square_on_uniform() {
        let mut rng = exec::substream(9, 3, 0);
        let x: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|a| a * a).collect();
        let v = igci_direction(&x, &y, &IgciConfig::default()).unwrap();
        let expected = 2f64.ln() - 1.0;
        assert!((v.igci_score.unwrap() - expected).abs() < 0.05, "{v:?}");
        assert_eq!(v.verdict, Direction::XtoY);
    }

    #[test]
    fn igci_swap_negates_score() {
        let mut rng = exec::substream(10, 3, 0);
        let x: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|a| a.powf(3.0)).collect();
        let (f, _) = igci_slope_score(&x, &y).unwrap();
        let (b, _) = igci_slope_score(&y, &x).unwrap();
        assert!((f + b).abs() < 1e-9);
    }

    #[test]
    fn igci_duplicates_are_undecided() {
        let x: Vec<f64> = (0..100).map(|i| f64::from(i % 2)).collect();
        let y: Vec<f64> = (0..100).map(|i| f64::from(i % 3)).collect();
        let v = igci_direction(&x, &y, &IgciConfig::default()).unwrap();
        assert_eq!(v.verdict, Direction::Undecided);
        assert_eq!(
            igci_direction(&[1.0; 25], &[2.0; 25], &IgciConfig::default()),
            Err(DiscoveryError::TooFewDistinct)
        );
    }

    #[test]
    fn batch_requires_pairs() {
        assert_eq!(
            batch_discover(&[], Method::Igci, &BatchConfig::default()),
            Err(DiscoveryError::EmptyBatch)
        );
    }

    #[test]
    fn batch_counts() {
        let pairs: Vec<PairCase> = (0..20).map(|s| synthetic::monotone_pair(300, s)).collect();
        let s = batch_discover(&pairs, Method::Igci, &BatchConfig::default()).unwrap();
        assert_eq!(s.total, 20);
        assert_eq!(s.pairs.len(), 20);
        assert!(s.decision_rate > 0.9);
        assert_eq!(s.accuracy, Some(s.correct as f64 / s.decided as f64));
    }
}
