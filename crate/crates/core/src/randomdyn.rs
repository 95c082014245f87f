//! Random compositions of lifted maps along i.i.d. label sequences.
//!
//! `X_k = log ‖C_{ξ_k}‖ = ½ log ‖a_{ξ_k}‖` for the random word
//! `ξ_k = z_1 … z_k`. The fast mode folds `Ψ_{z_k}` onto the running product
//! in draw order, which evaluates the reversed word; for i.i.d. draws the
//! reversed word has the same law.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{MapSet, Word};
use crate::error::{Error, Result};
use crate::kernels::{KolmogorovFactor, PDKernel};
use crate::linalg;
use crate::matrix::{inner, vec_norm, ComplexMatrix, C64};
use crate::model::{lifted_apply, LiftSet, LiftedFamily};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct IIDModel {
    labels: Vec<String>,
    probs: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

#[derive(Deserialize)]
struct RawModel {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl TryFrom<RawModel> for IIDModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        IIDModel::new(raw.labels, raw.probs)
    }
}

impl IIDModel {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>, probs: Vec<f64>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() || labels.len() != probs.len() {
            return Err(Error::BadDistribution(format!("{} labels with {} probabilities", labels.len(), probs.len())));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::BadDistribution("probabilities must be finite and nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadDistribution(format!("probabilities sum to {total}")));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::BadDistribution(format!("label `{dup}` listed twice")));
        }
        let cumulative = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(Self { labels, probs, cumulative })
    }

    /// Uniform distribution over `labels`.
    pub fn uniform<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let p = 1.0 / labels.len().max(1) as f64;
        let mut probs = vec![p; labels.len()];
        if let Some(last) = probs.last_mut() {
            *last = 1.0 - p * (labels.len() - 1) as f64;
        }
        Self::new(labels, probs)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Inverse CDF over half-open intervals `[c_{k−1}, c_k)`.
    fn pick(&self, u: f64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or_else(|| self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSample {
    pub seed: u64,
    pub labels: Vec<String>,
}

impl PathSample {
    pub fn word(&self) -> Word {
        Word::new(self.labels.iter().cloned())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Sub-seed for trial `t`: the SplitMix64 finalizer applied to
/// `seed + (t + 1) · 0x9E3779B97F4A7C15`.
pub fn sub_seed(seed: u64, t: u64) -> u64 {
    let mut z = seed.wrapping_add(t.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn draw_indices(model: &IIDModel, n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| model.pick(rng.gen::<f64>())).collect()
}

/// `n` i.i.d. labels drawn from a ChaCha8 stream seeded with `seed`.
pub fn sample_path(model: &IIDModel, n: usize, seed: u64) -> Result<PathSample> {
    if n == 0 {
        return Err(Error::Invalid("path length must be at least 1".into()));
    }
    let labels = draw_indices(model, n, seed).into_iter().map(|i| model.labels[i].clone()).collect();
    Ok(PathSample { seed, labels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogNormMode {
    /// Draw-order fold with per-step renormalization.
    Renormalized,
    /// Draw-order fold without renormalization; fails on underflow.
    Raw,
    /// Exact word order, recomputed for every prefix.
    ExactOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogNormSeries {
    /// `X_0 = 0, X_1, …, X_n`.
    pub x: Vec<f64>,
    /// First step at which the product vanished exactly (`X = −∞` from then on).
    pub vanished_at: Option<usize>,
}

fn resolve_path<'a>(lifts: &'a LiftSet, labels: &[String]) -> Result<Vec<&'a LiftedFamily>> {
    lifts.resolve_admissible(&Word::new(labels.iter().cloned()))
}

/// Renormalized draw-order fold. Returns `X_0..X_n` and the first vanishing step.
fn fold_log_norms(families: &[&LiftedFamily], m: usize) -> Result<(Vec<f64>, Option<usize>)> {
    let mut b = ComplexMatrix::identity(m);
    let mut log_acc = 0.0;
    let mut x = Vec::with_capacity(families.len() + 1);
    x.push(0.0);
    let mut vanished = None;
    for (k, lf) in families.iter().enumerate() {
        if vanished.is_some() {
            x.push(f64::NEG_INFINITY);
            continue;
        }
        b = lifted_apply(lf, &b)?;
        let c = linalg::op_norm(&b);
        if c == 0.0 {
            vanished = Some(k + 1);
            x.push(f64::NEG_INFINITY);
            continue;
        }
        log_acc += c.ln();
        b = b.scale_real(1.0 / c);
        x.push(0.5 * log_acc);
    }
    Ok((x, vanished))
}

pub fn path_log_norm(lifts: &LiftSet, path: &PathSample, mode: LogNormMode) -> Result<LogNormSeries> {
    let families = resolve_path(lifts, &path.labels)?;
    let m = lifts.dim();
    match mode {
        LogNormMode::Renormalized => {
            let (x, vanished_at) = fold_log_norms(&families, m)?;
            Ok(LogNormSeries { x, vanished_at })
        }
        LogNormMode::Raw => {
            let mut b = ComplexMatrix::identity(m);
            let mut x = vec![0.0];
            for (k, lf) in families.iter().enumerate() {
                b = lifted_apply(lf, &b)?;
                let c = linalg::op_norm(&b);
                if c < f64::MIN_POSITIVE {
                    return Err(Error::Underflow { step: k + 1 });
                }
                x.push(0.5 * c.ln());
            }
            Ok(LogNormSeries { x, vanished_at: None })
        }
        LogNormMode::ExactOrder => {
            let mut x = vec![0.0];
            let mut vanished_at = None;
            for k in 1..=families.len() {
                let reversed: Vec<&LiftedFamily> = families[..k].iter().rev().copied().collect();
                let (xs, v) = fold_log_norms(&reversed, m)?;
                if v.is_some() && vanished_at.is_none() {
                    vanished_at = Some(k);
                }
                x.push(xs[k]);
            }
            Ok(LogNormSeries { x, vanished_at })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackPoint {
    pub k: usize,
    /// `(1/k) · mean_t X_k`.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub mode: LogNormMode,
    pub per_trial_xn: Vec<f64>,
    /// Mean of `X_n / n` over trials.
    pub lambda_hat: f64,
    /// Sample standard deviation of `X_n / n` divided by `√trials`.
    pub stderr: f64,
    pub inf_formula_track: Vec<TrackPoint>,
    pub lambda_inf_hat: f64,
    /// Some trial's product vanished; the exponent is `−∞`.
    pub minus_infinity: bool,
    /// `½ log max_s d_norm(s)`, the bound from computed model norms.
    pub model_bound: f64,
    /// `½ log max_s ‖Φ_s‖_cb`, the cb-norm form of the bound.
    pub cb_bound: f64,
}

#[derive(Debug, Clone)]
pub struct LyapunovTrial {
    pub seed: u64,
    pub x: Vec<f64>,
}

/// Horizons `1, 2, 4, …` below `n`, then `n`.
pub fn track_grid(n: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = std::iter::successors(Some(1usize), |k| k.checked_mul(2)).take_while(|&k| k < n).collect();
    ks.push(n);
    ks
}

/// Runs every trial and returns the full log-norm series per trial.
pub fn lyapunov_trials(
    model: &IIDModel,
    lifts: &LiftSet,
    n: usize,
    trials: usize,
    seed: u64,
    mode: LogNormMode,
) -> Result<Vec<LyapunovTrial>> {
    if n == 0 || trials == 0 {
        return Err(Error::Invalid("horizon and trial count must be positive".into()));
    }
    for l in model.labels() {
        lifts.get(l)?;
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = sub_seed(seed, t);
            let path = sample_path(model, n, s)?;
            let series = path_log_norm(lifts, &path, mode)?;
            Ok(LyapunovTrial { seed: s, x: series.x })
        })
        .collect()
}

/// Monte-Carlo exponent estimate. Trials run in parallel; every reduction
/// runs in trial order, so the result does not depend on thread count.
pub fn lyapunov_estimate(
    model: &IIDModel,
    lifts: &LiftSet,
    n: usize,
    trials: usize,
    seed: u64,
    mode: LogNormMode,
) -> Result<LyapunovEstimate> {
    let runs = lyapunov_trials(model, lifts, n, trials, seed, mode)?;
    summarize_trials(model, lifts, n, seed, mode, &runs)
}

/// Reduces per-trial series (in trial order) to an estimate.
pub fn summarize_trials(
    model: &IIDModel,
    lifts: &LiftSet,
    n: usize,
    seed: u64,
    mode: LogNormMode,
    runs: &[LyapunovTrial],
) -> Result<LyapunovEstimate> {
    let trials = runs.len();
    if trials == 0 || runs.iter().any(|r| r.x.len() != n + 1) {
        return Err(Error::Invalid(format!("every trial needs a series of horizon {n}")));
    }
    let per_trial_xn: Vec<f64> = runs.iter().map(|r| r.x[n]).collect();
    let minus_infinity = per_trial_xn.contains(&f64::NEG_INFINITY);
    let ratios: Vec<f64> = per_trial_xn.iter().map(|x| x / n as f64).collect();
    let lambda_hat = ratios.iter().sum::<f64>() / trials as f64;
    let stderr = if trials > 1 && !minus_infinity {
        let var = ratios.iter().map(|r| (r - lambda_hat).powi(2)).sum::<f64>() / (trials - 1) as f64;
        (var / trials as f64).sqrt()
    } else {
        0.0
    };
    let inf_formula_track: Vec<TrackPoint> = track_grid(n)
        .into_iter()
        .map(|k| TrackPoint { k, value: runs.iter().map(|r| r.x[k] / k as f64).sum::<f64>() / trials as f64 })
        .collect();
    let lambda_inf_hat = inf_formula_track.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);

    let mut d_max = 0.0f64;
    let mut cb_max = 0.0f64;
    for l in model.labels() {
        let lf = lifts.get(l)?;
        d_max = d_max.max(lf.d_norm());
        cb_max = cb_max.max(crate::channels::cb_norm(lf.map()));
    }
    Ok(LyapunovEstimate {
        n,
        trials,
        seed,
        mode,
        per_trial_xn,
        lambda_hat,
        stderr,
        inf_formula_track,
        lambda_inf_hat,
        minus_infinity,
        model_bound: 0.5 * d_max.ln(),
        cb_bound: 0.5 * cb_max.ln(),
    })
}

/// Product of superoperators `S_1 S_2 ⋯ S_k` kept as `e^{log_scale} · unit`
/// with `‖unit‖_max = 1`, so long products neither overflow nor underflow.
struct ScaledProduct {
    unit: ComplexMatrix,
    log_scale: f64,
    vanished: bool,
}

impl ScaledProduct {
    fn identity(n: usize) -> Self {
        Self { unit: ComplexMatrix::identity(n), log_scale: 0.0, vanished: false }
    }

    fn push(&mut self, s: &ComplexMatrix) {
        if self.vanished {
            return;
        }
        self.unit = &self.unit * s;
        let c = self.unit.max_abs();
        if c == 0.0 {
            self.vanished = true;
            return;
        }
        self.log_scale += c.ln();
        self.unit = self.unit.scale_real(1.0 / c);
    }

    /// `(log ‖S · vec(t)‖_op-of-unvec, unvec(unit · vec t))` as log-magnitude and unit image.
    fn image(&self, t: &ComplexMatrix) -> Option<(ComplexMatrix, f64)> {
        if self.vanished {
            return None;
        }
        let v = self.unit.mul_vec(t.as_slice());
        Some((ComplexMatrix::new(t.rows(), t.cols(), v).expect("square image"), self.log_scale))
    }
}

fn log_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub k: usize,
    /// `|⟨a, K_{ξ_k}(x,y) b⟩|`.
    pub lhs: f64,
    /// `‖C_{ξ_k}‖² · ‖J_x a‖ · ‖J_y b‖`.
    pub rhs: f64,
    pub holds: bool,
    /// `log rhs − log lhs`.
    pub log_margin: f64,
    /// `(1/k) log lhs`.
    pub running_exponent: f64,
    /// `2 X_k / k`.
    pub model_exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
    pub holds: bool,
}

/// Checks `|⟨a, K_{ξ_k}(x,y) b⟩| ≤ ‖C_{ξ_k}‖² ‖J_x a‖ ‖J_y b‖` along every
/// prefix of `path`, all in exact word order.
#[allow(clippy::too_many_arguments)]
pub fn growth_check(
    kf: &KolmogorovFactor,
    lifts: &LiftSet,
    k: &PDKernel,
    path: &PathSample,
    x: usize,
    a: &[C64],
    y: usize,
    b: &[C64],
) -> Result<GrowthReport> {
    let families = resolve_path(lifts, &path.labels)?;
    let d = k.fiber_dim();
    if a.len() != d || b.len() != d {
        return Err(Error::dims(format!("vectors must have length {d}")));
    }
    if x >= k.n() || y >= k.n() {
        return Err(Error::UnknownPoint(format!("index {}", x.max(y))));
    }
    let jx = vec_norm(&kf.feature(x, a)?);
    let jy = vec_norm(&kf.feature(y, b)?);
    let block = k.block(x, y);
    let m = lifts.dim();
    let identity_m = ComplexMatrix::identity(m);
    let mut direct = ScaledProduct::identity(d * d);
    let mut lifted = ScaledProduct::identity(m * m);
    let mut rows = Vec::with_capacity(families.len() + 1);
    let mut holds = true;
    for k_len in 0..=families.len() {
        if k_len > 0 {
            let lf = families[k_len - 1];
            direct.push(&lf.map().superoperator());
            lifted.push(&lf.superoperator());
        }
        let (log_lhs, lhs) = match direct.image(block) {
            Some((t, ls)) => {
                let v = inner(a, &t.mul_vec(b)).norm();
                let l = log_or_neg_inf(v) + ls;
                (l, l.exp())
            }
            None => (f64::NEG_INFINITY, 0.0),
        };
        let (log_norm_sq, norm_sq) = match lifted.image(&identity_m) {
            Some((t, ls)) => {
                let l = log_or_neg_inf(linalg::op_norm(&t)) + ls;
                (l, l.exp())
            }
            None => (f64::NEG_INFINITY, 0.0),
        };
        let rhs = norm_sq * jx * jy;
        let log_rhs = log_norm_sq + log_or_neg_inf(jx) + log_or_neg_inf(jy);
        let row_holds = lhs <= rhs + 1e-9 && (log_lhs == f64::NEG_INFINITY || log_lhs <= log_rhs + 1e-9);
        holds &= row_holds;
        let kf64 = k_len.max(1) as f64;
        rows.push(GrowthRow {
            k: k_len,
            lhs,
            rhs,
            holds: row_holds,
            log_margin: log_rhs - log_lhs,
            running_exponent: log_lhs / kf64,
            model_exponent: log_norm_sq / kf64,
        });
    }
    Ok(GrowthReport { rows, holds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformRow {
    pub k: usize,
    /// Largest `‖K_{ξ_k}(x,y)‖ − L^k √(‖K(x,x)‖ ‖K(y,y)‖)` over pairs.
    pub worst_excess: f64,
    /// `max_{x,y} ‖K_{ξ_k}(x,y)‖`.
    pub max_lhs: f64,
    /// `L^k · max_x ‖K(x,x)‖`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBound {
    /// `max_s ‖Φ_s‖_cb`.
    pub l: f64,
    pub rows: Vec<UniformRow>,
    pub holds: bool,
    /// `log L` when `L < 1`: the guaranteed per-step decay rate.
    pub decay_rate: Option<f64>,
}

/// `‖K_{ξ_k}(x,y)‖ ≤ L^k √(‖K(x,x)‖ ‖K(y,y)‖)` along every prefix of
/// `path`, with `L = max_s ‖Φ_s‖_cb` over the declared maps.
pub fn uniform_bound_check(k: &PDKernel, maps: &MapSet, path: &PathSample) -> Result<UniformBound> {
    let resolved = maps.resolve(&path.word())?;
    let d = k.fiber_dim();
    if resolved.iter().any(|m| m.dim() != d) {
        return Err(Error::dims("map dimension differs from kernel fiber"));
    }
    let l = maps.max_cb_norm();
    let n = k.n();
    let diag: Vec<f64> = (0..n).map(|i| linalg::op_norm(k.block(i, i))).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    let mut product = ScaledProduct::identity(d * d);
    let mut rows = Vec::with_capacity(resolved.len() + 1);
    let mut holds = true;
    for k_len in 0..=resolved.len() {
        if k_len > 0 {
            product.push(&resolved[k_len - 1].superoperator());
        }
        let lk = l.powi(k_len as i32);
        let mut worst = f64::NEG_INFINITY;
        let mut max_lhs = 0.0f64;
        for xi in 0..n {
            for yi in 0..n {
                let lhs = match product.image(k.block(xi, yi)) {
                    Some((t, ls)) => (log_or_neg_inf(linalg::op_norm(&t)) + ls).exp(),
                    None => 0.0,
                };
                let rhs = lk * (diag[xi] * diag[yi]).sqrt();
                worst = worst.max(lhs - rhs);
                max_lhs = max_lhs.max(lhs);
            }
        }
        let row_holds = n == 0 || worst <= 1e-9;
        holds &= row_holds;
        rows.push(UniformRow {
            k: k_len,
            worst_excess: if n == 0 { 0.0 } else { worst },
            max_lhs,
            bound: lk * dmax,
            holds: row_holds,
        });
    }
    Ok(UniformBound { l, rows, holds, decay_rate: (l < 1.0).then(|| l.ln()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::CPMap;
    use crate::kernels::kolmogorov;
    use crate::linalg::DEFAULT_RANK_TOL;
    use crate::matrix::c64;
    use approx::assert_abs_diff_eq;

    fn scalar_map(label: &str, c: f64) -> CPMap {
        CPMap::new(label, vec![ComplexMatrix::scalar(c.sqrt())]).unwrap()
    }

    fn commuting_pair() -> MapSet {
        MapSet::new([
            CPMap::new("u", vec![ComplexMatrix::diag(&[1.0, 0.5])]).unwrap(),
            CPMap::new("v", vec![ComplexMatrix::diag(&[0.5, 1.0])]).unwrap(),
        ])
    }

    fn setup(k: ComplexMatrix, maps: &MapSet) -> (PDKernel, KolmogorovFactor, LiftSet) {
        let k = PDKernel::single(k).unwrap();
        let kf = kolmogorov(&k, DEFAULT_RANK_TOL).unwrap();
        let lifts = LiftSet::new(&kf, maps, None).unwrap();
        (k, kf, lifts)
    }

    #[test]
    fn model_validation() {
        assert!(IIDModel::new(["a", "b"], vec![0.5, 0.6]).is_err());
        assert!(IIDModel::new(["a", "b"], vec![1.5, -0.5]).is_err());
        assert!(IIDModel::new(["a"], vec![0.5, 0.5]).is_err());
        assert!(IIDModel::new(["a", "a"], vec![0.5, 0.5]).is_err());
        assert!(IIDModel::uniform(["a", "b", "c"]).is_ok());
        let m: IIDModel = serde_json::from_str(r#"{"labels":["a","b"],"probs":[0.25,0.75]}"#).unwrap();
        assert_eq!(m.probs(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<IIDModel>(r#"{"labels":["a"],"probs":[0.2]}"#).is_err());
    }

    #[test]
    fn sampling_examples() {
        let point = IIDModel::new(["s"], vec![1.0]).unwrap();
        assert!(sample_path(&point, 20, 7).unwrap().labels.iter().all(|l| l == "s"));
        let degenerate = IIDModel::new(["a", "b"], vec![1.0, 0.0]).unwrap();
        assert!(sample_path(&degenerate, 50, 3).unwrap().labels.iter().all(|l| l == "a"));
        let fair = IIDModel::uniform(["a", "b"]).unwrap();
        assert_eq!(sample_path(&fair, 100, 11).unwrap(), sample_path(&fair, 100, 11).unwrap());
        assert_ne!(sample_path(&fair, 100, 11).unwrap(), sample_path(&fair, 100, 12).unwrap());
        assert!(sample_path(&fair, 0, 1).is_err());
    }

    #[test]
    fn pick_uses_half_open_intervals() {
        let m = IIDModel::new(["a", "b"], vec![0.5, 0.5]).unwrap();
        assert_eq!(m.pick(0.0), 0);
        assert_eq!(m.pick(0.4999), 0);
        assert_eq!(m.pick(0.5), 1);
        let m = IIDModel::new(["a", "b", "c"], vec![0.5, 0.5, 0.0]).unwrap();
        assert_eq!(m.pick(1.0), 1);
    }

    #[test]
    fn sub_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|t| sub_seed(42, t)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn scalar_log_norms() {
        let maps = MapSet::new([scalar_map("s", 0.5)]);
        let (_, _, lifts) = setup(ComplexMatrix::scalar(1.0), &maps);
        let path = PathSample { seed: 0, labels: vec!["s".into(); 30] };
        for mode in [LogNormMode::Renormalized, LogNormMode::Raw, LogNormMode::ExactOrder] {
            let s = path_log_norm(&lifts, &path, mode).unwrap();
            assert_eq!(s.x[0], 0.0);
            for (k, x) in s.x.iter().enumerate() {
                assert_abs_diff_eq!(*x, -(k as f64) / 2.0 * 2f64.ln(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn commuting_pair_log_norms() {
        let maps = commuting_pair();
        let (_, _, lifts) = setup(ComplexMatrix::identity(2), &maps);
        let model = IIDModel::uniform(["u", "v"]).unwrap();
        let path = sample_path(&model, 40, 5).unwrap();
        let fast = path_log_norm(&lifts, &path, LogNormMode::Renormalized).unwrap();
        let exact = path_log_norm(&lifts, &path, LogNormMode::ExactOrder).unwrap();
        let (mut nu, mut nv) = (0usize, 0usize);
        for k in 1..=40 {
            if path.labels[k - 1] == "u" {
                nu += 1;
            } else {
                nv += 1;
            }
            let expected = -2f64.ln() * nu.min(nv) as f64;
            assert_abs_diff_eq!(fast.x[k], expected, epsilon = 1e-10);
            assert_abs_diff_eq!(exact.x[k], expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn raw_mode_underflows() {
        let maps = MapSet::new([scalar_map("s", 1e-30)]);
        let (_, _, lifts) = setup(ComplexMatrix::scalar(1.0), &maps);
        let path = PathSample { seed: 0, labels: vec!["s".into(); 20] };
        assert!(matches!(path_log_norm(&lifts, &path, LogNormMode::Raw), Err(Error::Underflow { .. })));
        assert!(path_log_norm(&lifts, &path, LogNormMode::Renormalized).unwrap().vanished_at.is_none());
    }

    #[test]
    fn nilpotent_product_vanishes() {
        let maps = MapSet::new([CPMap::new("s", vec![ComplexMatrix::from_real(&[&[0.0, 1.0], &[0.0, 0.0]])]).unwrap()]);
        let (_, _, lifts) = setup(ComplexMatrix::identity(2), &maps);
        let model = IIDModel::new(["s"], vec![1.0]).unwrap();
        let est = lyapunov_estimate(&model, &lifts, 10, 2, 1, LogNormMode::Renormalized).unwrap();
        assert!(est.minus_infinity);
        assert_eq!(est.lambda_hat, f64::NEG_INFINITY);
    }

    #[test]
    fn scalar_lyapunov_is_exact() {
        let maps = MapSet::new([scalar_map("s", 0.5)]);
        let (_, _, lifts) = setup(ComplexMatrix::scalar(1.0), &maps);
        let model = IIDModel::new(["s"], vec![1.0]).unwrap();
        let est = lyapunov_estimate(&model, &lifts, 1000, 4, 9, LogNormMode::Renormalized).unwrap();
        assert_abs_diff_eq!(est.lambda_hat, -0.5 * 2f64.ln(), epsilon = 1e-12);
        assert!(est.lambda_inf_hat <= est.lambda_hat + 1e-12);
    }

    #[test]
    fn lyapunov_is_deterministic() {
        let maps = MapSet::new([scalar_map("a", 0.5), scalar_map("b", 1.0 / 3.0)]);
        let (_, _, lifts) = setup(ComplexMatrix::scalar(1.0), &maps);
        let model = IIDModel::uniform(["a", "b"]).unwrap();
        let one = lyapunov_estimate(&model, &lifts, 500, 8, 3, LogNormMode::Renormalized).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let two = pool.install(|| lyapunov_estimate(&model, &lifts, 500, 8, 3, LogNormMode::Renormalized).unwrap());
        assert_eq!(one, two);
        assert_eq!(
            one.per_trial_xn.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            two.per_trial_xn.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn growth_examples() {
        let maps = MapSet::new([scalar_map("s", 0.5)]);
        let (k, kf, lifts) = setup(ComplexMatrix::scalar(1.0), &maps);
        let path = PathSample { seed: 0, labels: vec!["s".into(); 10] };
        let one = [c64(1.0, 0.0)];
        let r = growth_check(&kf, &lifts, &k, &path, 0, &one, 0, &one).unwrap();
        assert!(r.holds);
        for row in &r.rows {
            assert_abs_diff_eq!(row.lhs, row.rhs, epsilon = 1e-14);
        }

        let maps = commuting_pair();
        let (k, kf, lifts) = setup(ComplexMatrix::diag(&[1.0, 0.0]), &maps);
        let path = sample_path(&IIDModel::uniform(["u", "v"]).unwrap(), 20, 4).unwrap();
        let null = [c64(0.0, 0.0), c64(1.0, 0.0)];
        let r = growth_check(&kf, &lifts, &k, &path, 0, &null, 0, &null).unwrap();
        assert!(r.rows.iter().all(|row| row.lhs == 0.0 && row.holds));

        let (k, kf, lifts) = setup(ComplexMatrix::identity(2), &maps);
        let e0 = [c64(1.0, 0.0), c64(0.0, 0.0)];
        let r = growth_check(&kf, &lifts, &k, &path, 0, &e0, 0, &e0).unwrap();
        assert!(r.holds);
        let mut nv = 0;
        for row in r.rows.iter().skip(1) {
            if path.labels[row.k - 1] == "v" {
                nv += 1;
            }
            assert_abs_diff_eq!(row.lhs, 4f64.powi(-nv), epsilon = 1e-14);
        }
    }

    #[test]
    fn uniform_examples() {
        let maps = MapSet::new([scalar_map("a", 0.5), scalar_map("b", 1.0 / 3.0)]);
        let k = PDKernel::single(ComplexMatrix::scalar(1.0)).unwrap();
        let path = sample_path(&IIDModel::uniform(["a", "b"]).unwrap(), 30, 2).unwrap();
        let r = uniform_bound_check(&k, &maps, &path).unwrap();
        assert!(r.holds);
        assert_abs_diff_eq!(r.l, 0.5, epsilon = 1e-15);
        assert!(r.decay_rate.is_some());
        let mut all_a = true;
        for row in r.rows.iter().skip(1) {
            all_a &= path.labels[row.k - 1] == "a";
            assert_eq!((row.max_lhs - row.bound).abs() < 1e-15, all_a);
        }

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let dph =
            CPMap::new("s", vec![ComplexMatrix::identity(2).scale_real(h), ComplexMatrix::diag(&[h, -h])]).unwrap();
        let maps = MapSet::new([dph]);
        let k = PDKernel::single(ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        let path = PathSample { seed: 0, labels: vec!["s".into(); 5] };
        let r = uniform_bound_check(&k, &maps, &path).unwrap();
        assert!(r.holds && r.decay_rate.is_none());
        assert!(r.rows.iter().all(|row| (row.bound - 2.0).abs() < 1e-14));
    }
}
