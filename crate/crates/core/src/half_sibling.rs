//! Half-sibling regression on simulated instrument panels.
//!
//! Every series in a panel (targets and siblings) sees the same latent
//! instrument systematics through its own loadings. Siblings carry no target
//! signal, so whatever part of a target they can predict is instrument, and
//! subtracting that prediction leaves the target's own signal plus noise, up
//! to a constant offset.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HsrError {
    #[error("invalid panel spec: {0}")]
    InvalidSpec(String),
    #[error("time length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no sibling series")]
    NoSiblings,
    #[error("need at least 2 time steps")]
    TooShort,
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("regression failed: {0}")]
    Regression(String),
}

pub type Result<T> = std::result::Result<T, HsrError>;

/// One latent instrument series: a stationary AR(1) process with
/// coefficient `smoothness`, rescaled to sample standard deviation
/// `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Systematic {
    pub amplitude: f64,
    pub smoothness: f64,
}

/// Periodic box dip: `-depth` for `duration` steps starting at
/// `phase + k * period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transit {
    pub depth: f64,
    pub duration: usize,
    pub period: usize,
    pub phase: usize,
}

impl Transit {
    pub fn value(&self, t: usize) -> f64 {
        if t >= self.phase && (t - self.phase) % self.period < self.duration {
            -self.depth
        } else {
            0.0
        }
    }

    pub fn series(&self, n_time: usize) -> Vec<f64> {
        (0..n_time).map(|t| self.value(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelSpec {
    pub n_targets: usize,
    pub n_siblings: usize,
    pub n_time: usize,
    pub systematics: Vec<Systematic>,
    /// Loadings are drawn uniformly from `[low, high]`, independently per
    /// series and systematic.
    pub loading_range: (f64, f64),
    /// Standard deviation of the independent per-series white noise.
    pub noise_sigma: f64,
    /// One transit per target.
    pub transits: Vec<Transit>,
    /// Project the drawn systematics onto the orthogonal complement of the
    /// constant series and all injected signals (then restore their
    /// amplitudes). With this set and `noise_sigma = 0`, least squares on the
    /// siblings recovers every signal exactly up to an offset.
    pub orthogonalize_systematics: bool,
}

impl Default for PanelSpec {
    fn default() -> Self {
        let n_targets = 4;
        Self {
            n_targets,
            n_siblings: 20,
            n_time: 1000,
            systematics: vec![
                Systematic { amplitude: 0.05, smoothness: 0.99 },
                Systematic { amplitude: 0.05, smoothness: 0.95 },
                Systematic { amplitude: 0.05, smoothness: 0.8 },
            ],
            loading_range: (0.5, 1.5),
            noise_sigma: 0.002,
            transits: (0..n_targets)
                .map(|k| Transit { depth: 0.01, duration: 100, period: 200, phase: 37 * k })
                .collect(),
            orthogonalize_systematics: false,
        }
    }
}

impl PanelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HsrError::InvalidSpec(m));
        if self.n_targets == 0 || self.n_siblings == 0 || self.n_time == 0 {
            return bad("counts must be at least 1".into());
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return bad(format!("noise sigma {} must be finite and >= 0", self.noise_sigma));
        }
        let (lo, hi) = self.loading_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("bad loading range ({lo}, {hi})"));
        }
        for s in &self.systematics {
            if !(s.amplitude >= 0.0) || !s.amplitude.is_finite() {
                return bad(format!("systematic amplitude {} must be finite and >= 0", s.amplitude));
            }
            if !(0.0..1.0).contains(&s.smoothness) {
                return bad(format!("systematic smoothness {} must be in [0, 1)", s.smoothness));
            }
        }
        if self.transits.len() != self.n_targets {
            return bad(format!("{} transits for {} targets", self.transits.len(), self.n_targets));
        }
        for t in &self.transits {
            if !(t.depth >= 0.0) || !t.depth.is_finite() {
                return bad(format!("transit depth {} must be finite and >= 0", t.depth));
            }
            if t.period == 0 {
                return bad("transit period must be at least 1".into());
            }
        }
        Ok(())
    }
}

/// Simulated panel. Series are stored one `Vec` per series, each of length
/// `n_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub time: Vec<f64>,
    pub targets: Vec<Vec<f64>>,
    pub siblings: Vec<Vec<f64>>,
    pub signals: Vec<Vec<f64>>,
    pub systematics: Vec<Vec<f64>>,
}

impl Panel {
    pub fn n_time(&self) -> usize {
        self.time.len()
    }

    /// Wide CSV: `time,t1..tN,s1..sM`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut header = vec!["time".to_string()];
        header.extend((1..=self.targets.len()).map(|k| format!("t{k}")));
        header.extend((1..=self.siblings.len()).map(|k| format!("s{k}")));
        writeln!(out, "{}", header.join(","))?;
        for t in 0..self.n_time() {
            let mut row = vec![self.time[t].to_string()];
            row.extend(self.targets.iter().chain(&self.siblings).map(|s| s[t].to_string()));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn sample_std(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn rescale(v: &mut [f64], amplitude: f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let sd = sample_std(v);
    for a in v.iter_mut() {
        *a = if sd > 0.0 { (*a - m) / sd * amplitude } else { 0.0 };
    }
}

pub fn simulate_panel(spec: &PanelSpec, seed: u64) -> Result<Panel> {
    spec.validate()?;
    let n = spec.n_time;
    let mut systematics: Vec<Vec<f64>> = spec
        .systematics
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let mut rng = exec::substream(seed, 0x5157, k as u64);
            let innov = (1.0 - s.smoothness * s.smoothness).sqrt();
            let mut v = Vec::with_capacity(n);
            let mut state: f64 = rng.sample(StandardNormal);
            for _ in 0..n {
                v.push(state);
                state = s.smoothness * state + innov * rng.sample::<f64, _>(StandardNormal);
            }
            rescale(&mut v, s.amplitude);
            v
        })
        .collect();
    let signals: Vec<Vec<f64>> = spec.transits.iter().map(|t| t.series(n)).collect();

    if spec.orthogonalize_systematics && n > 1 {
        let mut basis = vec![vec![1.0; n]];
        basis.extend(signals.iter().cloned());
        let b = DMatrix::from_fn(n, basis.len(), |i, j| basis[j][i]);
        let q = b.svd(true, false);
        let u = q.u.expect("requested U");
        let tol = q.singular_values.max() * n as f64 * f64::EPSILON;
        let keep: Vec<usize> = (0..q.singular_values.len()).filter(|&k| q.singular_values[k] > tol).collect();
        for (v, s) in systematics.iter_mut().zip(&spec.systematics) {
            let mut col = DVector::from_column_slice(v);
            for &k in &keep {
                let uk = u.column(k);
                let c = uk.dot(&col);
                col -= uk * c;
            }
            v.copy_from_slice(col.as_slice());
            rescale(v, s.amplitude);
        }
    }

    let (lo, hi) = spec.loading_range;
    let series = |stream: u64, idx: usize, signal: Option<&[f64]>| -> Vec<f64> {
        let mut load_rng = exec::substream(seed, stream, 2 * idx as u64);
        let mut noise_rng = exec::substream(seed, stream, 2 * idx as u64 + 1);
        let loadings: Vec<f64> =
            systematics.iter().map(|_| if lo < hi { load_rng.random_range(lo..=hi) } else { lo }).collect();
        (0..n)
            .map(|t| {
                let inst: f64 = loadings.iter().zip(&systematics).map(|(l, s)| l * s[t]).sum();
                let noise = if spec.noise_sigma > 0.0 {
                    spec.noise_sigma * noise_rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                inst + signal.map_or(0.0, |s| s[t]) + noise
            })
            .collect()
    };
    let targets = (0..spec.n_targets).map(|k| series(0x7a59, k, Some(&signals[k]))).collect();
    let siblings = (0..spec.n_siblings).map(|k| series(0x5b1b, k, None)).collect();
    Ok(Panel { time: (0..n).map(|t| t as f64).collect(), targets, siblings, signals, systematics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    /// Linear least squares with intercept and ridge penalty `lambda` on the
    /// centered design (`lambda = 0` is the minimum-norm least-squares fit).
    Ridge { lambda: f64 },
    /// Gaussian-kernel ridge regression on the predictor vectors, bandwidth
    /// from the median heuristic on Euclidean distances when `None`.
    Kernel { ridge: f64, bandwidth: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HsrConfig {
    pub regressor: Regressor,
    /// Also use the target's own values at `t -/+ (gap + 1 ..= gap + lags)`
    /// as predictors. 0 turns this off.
    pub target_lags: usize,
    /// Steps on each side of `t` excluded from the lag predictors, so that a
    /// short event at `t` is not predicted away.
    pub lag_gap: usize,
}

impl Default for HsrConfig {
    fn default() -> Self {
        Self { regressor: Regressor::Ridge { lambda: 0.0 }, target_lags: 0, lag_gap: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsrResult {
    pub estimate: Vec<f64>,
    /// In-sample R^2 of the prediction of the target.
    pub r_squared: f64,
    /// Mean of the target, added back to the residual.
    pub offset: f64,
}

fn design(target: &[f64], siblings: &[Vec<f64>], cfg: &HsrConfig) -> DMatrix<f64> {
    let n = target.len();
    let lag_cols = 2 * cfg.target_lags;
    DMatrix::from_fn(n, siblings.len() + lag_cols, |t, j| {
        if j < siblings.len() {
            return siblings[j][t];
        }
        let k = j - siblings.len();
        let step = cfg.lag_gap + 1 + k / 2;
        let idx = if k % 2 == 0 { t.saturating_sub(step) } else { (t + step).min(n - 1) };
        target[idx]
    })
}

fn ridge_predict(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
    let xc = DMatrix::from_fn(n, p, |i, j| x[(i, j)] - means[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let svd = xc.clone().svd(true, true);
    let (u, vt) = (svd.u.as_ref().expect("requested U"), svd.v_t.as_ref().expect("requested V"));
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = smax * n.max(p) as f64 * f64::EPSILON;
    let uty = u.transpose() * &yc;
    let mut coef = DVector::zeros(uty.len());
    for k in 0..uty.len() {
        let s = svd.singular_values[k];
        if s > tol {
            coef[k] = s / (s * s + lambda) * uty[k];
        }
    }
    let beta = vt.transpose() * coef;
    let fitted = xc * beta;
    Ok(fitted.iter().map(|f| f + y_mean).collect())
}

fn kernel_predict(x: &DMatrix<f64>, y: &[f64], ridge: f64, bandwidth: Option<f64>) -> Result<Vec<f64>> {
    let n = x.nrows();
    let dist2 = |i: usize, j: usize| (x.row(i) - x.row(j)).norm_squared();
    let h = match bandwidth {
        Some(h) => h,
        None => {
            let mut d: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| dist2(i, j).sqrt()).collect();
            d.retain(|&v| v > 0.0);
            if d.is_empty() {
                1.0
            } else {
                let mid = d.len() / 2;
                *d.select_nth_unstable_by(mid, f64::total_cmp).1
            }
        }
    };
    if !(h > 0.0) || !h.is_finite() {
        return Err(HsrError::Regression(format!("bad bandwidth {h}")));
    }
    if !(ridge > 0.0) || !ridge.is_finite() {
        return Err(HsrError::Regression(format!("kernel ridge must be positive, got {ridge}")));
    }
    let s = 1.0 / (2.0 * h * h);
    let gram = DMatrix::from_fn(n, n, |i, j| (-dist2(i, j) * s).exp());
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let mut reg = gram.clone();
    for i in 0..n {
        reg[(i, i)] += ridge;
    }
    let chol = reg.cholesky().ok_or_else(|| HsrError::Regression("kernel system not positive definite".into()))?;
    let fitted = gram * chol.solve(&yc);
    Ok(fitted.iter().map(|f| f + y_mean).collect())
}

/// Removes the sibling-predictable part of `target`:
/// `estimate = target - predict(target | siblings) + mean(target)`.
pub fn hsr_estimate(target: &[f64], siblings: &[Vec<f64>], cfg: &HsrConfig) -> Result<HsrResult> {
    if siblings.is_empty() {
        return Err(HsrError::NoSiblings);
    }
    let n = target.len();
    if let Some(s) = siblings.iter().find(|s| s.len() != n) {
        return Err(HsrError::LengthMismatch(n, s.len()));
    }
    if n < 2 {
        return Err(HsrError::TooShort);
    }
    if target.iter().chain(siblings.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(HsrError::NonFinite);
    }
    let x = design(target, siblings, cfg);
    let prediction = match cfg.regressor {
        Regressor::Ridge { lambda } => {
            if !(lambda >= 0.0) || !lambda.is_finite() {
                return Err(HsrError::Regression(format!("ridge must be finite and >= 0, got {lambda}")));
            }
            ridge_predict(&x, target, lambda)?
        }
        Regressor::Kernel { ridge, bandwidth } => kernel_predict(&x, target, ridge, bandwidth)?,
    };
    let offset = target.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = target.iter().map(|v| (v - offset).powi(2)).sum();
    let ss_res: f64 = target.iter().zip(&prediction).map(|(a, b)| (a - b).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    let estimate = target.iter().zip(&prediction).map(|(a, p)| a - p + offset).collect();
    Ok(HsrResult { estimate, r_squared, offset })
}

/// Runs [`hsr_estimate`] on every target of a panel.
pub fn hsr_panel(panel: &Panel, cfg: &HsrConfig, execution: Execution) -> Result<Vec<HsrResult>> {
    exec::map_indices(execution, panel.targets.len(), |k| hsr_estimate(&panel.targets[k], &panel.siblings, cfg))
        .into_iter()
        .collect()
}

/// `(offset-free MSE, Pearson correlation)` between an estimate and the
/// truth. The MSE is the population variance of `estimate - truth`. When
/// either series is constant the correlation is 1 if the difference is
/// constant and 0 otherwise.
pub fn recovery_score(estimate: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if estimate.len() != truth.len() {
        return Err(HsrError::LengthMismatch(estimate.len(), truth.len()));
    }
    if estimate.is_empty() {
        return Err(HsrError::TooShort);
    }
    let diff: Vec<f64> = estimate.iter().zip(truth).map(|(a, b)| a - b).collect();
    let sd = sample_std(&diff);
    let mse = sd * sd;
    let corr = match stats::pearson(estimate, truth) {
        Some(c) => c,
        None => {
            if mse == 0.0 {
                1.0
            } else {
                0.0
            }
        }
    };
    Ok((mse, corr))
}

/// Mean Pearson correlation over all sibling pairs.
pub fn mean_sibling_correlation(panel: &Panel) -> f64 {
    let m = panel.siblings.len();
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..m {
        for j in i + 1..m {
            total += stats::pearson(&panel.siblings[i], &panel.siblings[j]).unwrap_or(0.0);
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}
