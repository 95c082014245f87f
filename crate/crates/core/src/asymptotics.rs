//! Long-run behavior of a single iterated map: the limit kernel, the Stein
//! decomposition `K − K̄ = Σ_j Φʲ(K − Φ(K))`, harmonicity and maximality of
//! the limit, norm decay and spectral-radius estimates.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use crate::channels::{self, CPMap, MapSet, Word};
use crate::error::{Error, Result};
use crate::kernels::{self, gram, KolmogorovFactor, PDKernel};
use crate::linalg::{self, DEFAULT_PSD_TOL, DEFAULT_RANK_TOL};
use crate::matrix::ComplexMatrix;
use crate::model::{self, lifted_apply, Certificate, LiftedFamily, DEFAULT_CERT_TOL};

pub const DEFAULT_CONV_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Longest oscillation period searched for when an orbit fails to settle.
pub const MAX_PERIOD: usize = 8;

/// Which orbit was iterated when a limit failed to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitRoute {
    /// `D_n = Ψⁿ(I)` on the feature space.
    Compressed,
    /// `Φⁿ(K)` blockwise.
    Direct,
}

/// Diagnostic for an orbit that did not converge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Nonconvergence {
    pub iterations: usize,
    pub step_residual: f64,
    /// Smallest `p ≥ 2` with `‖X_N − X_{N−p}‖` below the repeat tolerance.
    pub period: Option<usize>,
    pub period_residual: Option<f64>,
    pub route: OrbitRoute,
}

impl fmt::Display for Nonconvergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step residual {:e} after {} iterations", self.step_residual, self.iterations)?;
        match self.period {
            Some(p) => write!(f, ", period-{p} oscillation (residual {:e})", self.period_residual.unwrap_or(0.0)),
            None => write!(f, ", no period ≤ {MAX_PERIOD} detected"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitStep {
    pub n: usize,
    pub step_residual: f64,
    pub norm: f64,
    pub projection_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitResult {
    pub d_inf: ComplexMatrix,
    pub iterations: usize,
    pub step_residual: f64,
    /// `‖d_inf² − d_inf‖`.
    pub projection_defect: f64,
    pub kbar: PDKernel,
    /// Smallest `min eig(D_n − D_{n+1})` seen along the run.
    pub monotonicity_min_eig: f64,
    pub series: Vec<LimitStep>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitOptions {
    pub conv_tol: f64,
    pub max_iter: usize,
    pub cert_tol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self { conv_tol: DEFAULT_CONV_TOL, max_iter: DEFAULT_MAX_ITER, cert_tol: DEFAULT_CERT_TOL }
    }
}

/// Tracks the last few iterates to detect periodic orbits.
struct PeriodWatch {
    history: VecDeque<ComplexMatrix>,
    tol: f64,
}

impl PeriodWatch {
    fn new(tol: f64) -> Self {
        Self { history: VecDeque::with_capacity(MAX_PERIOD + 1), tol }
    }

    fn push(&mut self, x: &ComplexMatrix) {
        if self.history.len() == MAX_PERIOD + 1 {
            self.history.pop_front();
        }
        self.history.push_back(x.clone());
    }

    /// Smallest period `p ≥ 2` matching the newest iterate, with its residual.
    fn period(&self) -> Option<(usize, f64)> {
        let last = self.history.back()?;
        let len = self.history.len();
        (2..len).find_map(|p| {
            let r = linalg::op_norm(&(last - &self.history[len - 1 - p]));
            (r <= self.tol).then_some((p, r))
        })
    }
}

/// `min eig(a − b)`.
fn min_eig_of_difference(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    Ok(linalg::hermitian_eigen(&(a - b))?.min())
}

fn projection_defect(d: &ComplexMatrix) -> f64 {
    linalg::op_norm(&(&(d * d) - d))
}

/// Iterates `Φⁿ(K)` directly to tell an orbit that genuinely fails to
/// converge from one that converges but is not covered by a certificate.
fn direct_orbit(k: &PDKernel, phi: &CPMap, opts: &LimitOptions, cert: &Certificate) -> Error {
    let mut g = gram(k);
    let scale = linalg::op_norm(&g).max(1.0);
    let mut watch = PeriodWatch::new(1e-9 * scale);
    watch.push(&g);
    let mut current = k.clone();
    let mut step = f64::INFINITY;
    for n in 1..=opts.max_iter {
        current = match channels::apply_kernel(phi, &current) {
            Ok(c) => c,
            Err(e) => return e,
        };
        let next = gram(&current);
        step = linalg::op_norm(&(&next - &g));
        g = next;
        if step <= opts.conv_tol * scale {
            let why = cert.require_contractive().err().map(|e| e.to_string()).unwrap_or_default();
            return Error::CertificateFailed(format!("{why}; direct orbit converges after {n} steps"));
        }
        watch.push(&g);
        // a decaying orbit also repeats within tolerance; a cycle must beat its own step
        if let Some((p, r)) = watch.period().filter(|&(_, r)| r <= 1e-3 * step) {
            return Error::NotConverged(Box::new(Nonconvergence {
                iterations: n,
                step_residual: step,
                period: Some(p),
                period_residual: Some(r),
                route: OrbitRoute::Direct,
            }));
        }
    }
    Error::NotConverged(Box::new(Nonconvergence {
        iterations: opts.max_iter,
        step_residual: step,
        period: None,
        period_residual: None,
        route: OrbitRoute::Direct,
    }))
}

/// Limit `d_inf = lim Ψⁿ(I)` and the limit kernel `K̄(x,y) = V_x* d_inf V_y`.
///
/// Requires a contractivity certificate for `lf`. Without one the direct
/// orbit `Φⁿ(K)` is probed: a periodic or non-settling orbit yields
/// [`Error::NotConverged`], otherwise [`Error::CertificateFailed`].
pub fn limit_kernel(lf: &LiftedFamily, kf: &KolmogorovFactor, opts: &LimitOptions) -> Result<LimitResult> {
    let cert = model::certify_one(lf, opts.cert_tol);
    if !cert.model_contractive {
        let k = kf.kernel_from(&ComplexMatrix::identity(kf.rank()))?;
        return Err(direct_orbit(&k, lf.map(), opts, &cert));
    }
    let m = lf.dim();
    let mut d = ComplexMatrix::identity(m);
    let mut series = Vec::new();
    let mut watch = PeriodWatch::new(1e-9);
    watch.push(&d);
    let mut mono = f64::INFINITY;
    let mut step = f64::INFINITY;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let next = lifted_apply(lf, &d)?.hermitian_part();
        if m > 0 {
            mono = mono.min(min_eig_of_difference(&d, &next)?);
        }
        step = linalg::op_norm(&(&next - &d));
        d = next;
        iterations += 1;
        series.push(LimitStep {
            n: iterations,
            step_residual: step,
            norm: linalg::op_norm(&d),
            projection_defect: projection_defect(&d),
        });
        if step <= opts.conv_tol {
            break;
        }
        watch.push(&d);
    }
    if step > opts.conv_tol {
        let (period, period_residual) = watch.period().map_or((None, None), |(p, r)| (Some(p), Some(r)));
        return Err(Error::NotConverged(Box::new(Nonconvergence {
            iterations,
            step_residual: step,
            period,
            period_residual,
            route: OrbitRoute::Compressed,
        })));
    }
    let kbar = kf.kernel_from(&d)?;
    Ok(LimitResult {
        projection_defect: projection_defect(&d),
        d_inf: d,
        iterations,
        step_residual: step,
        kbar,
        monotonicity_min_eig: if m == 0 { 0.0 } else { mono },
        series,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SteinCertified {
    pub certificate: Certificate,
    pub kbar: PDKernel,
    /// `‖gram(S_N) − (gram(K) − gram(K̄))‖` for `N = 0..=N_max`.
    pub limit_gaps: Vec<f64>,
    pub gaps_monotone: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteinResult {
    /// `Q = K − Φ(K)`, possibly not positive.
    pub q_kernel: PDKernel,
    pub q_psd: bool,
    pub q_min_eig: f64,
    /// `S_N = Σ_{j<N} Φʲ(Q)` for `N = 0..=N_max`.
    pub partial_sums: Vec<PDKernel>,
    /// `‖gram(S_N) − (gram(K) − gram(Φᴺ(K)))‖ / max(1, ‖gram(K)‖)` for `N = 0..=N_max`.
    pub telescoping_residuals: Vec<f64>,
    /// PSD verdict and minimum eigenvalue of each increment `Φʲ(Q)`, `j < N_max`.
    pub increments_psd: Vec<bool>,
    pub increment_min_eigs: Vec<f64>,
    pub certificate: Certificate,
    pub certified: Option<SteinCertified>,
    /// Why a certified instance still has no limit kernel.
    #[serde(skip)]
    pub limit_error: Option<Error>,
}

impl SteinResult {
    pub fn max_telescoping_residual(&self) -> f64 {
        self.telescoping_residuals.iter().copied().fold(0.0, f64::max)
    }

    /// The certified part, or the reason it is missing.
    pub fn require_certified(&self) -> Result<&SteinCertified> {
        self.certificate.require_contractive()?;
        if let Some(e) = &self.limit_error {
            return Err(e.clone());
        }
        self.certified.as_ref().ok_or_else(|| Error::CertificateFailed("limit kernel unavailable".into()))
    }
}

/// Stein series for `Φ` on `K`. The telescoping identity is computed for
/// every input; limit comparisons are added when the lift of `Φ` to the
/// Kolmogorov space of `K` is certified contractive.
pub fn stein(k: &PDKernel, phi: &CPMap, n_max: usize, opts: &LimitOptions) -> Result<SteinResult> {
    let phi_k = channels::apply_kernel(phi, k)?;
    let q = k.zip_blocks(&phi_k, |a, b| a - b)?;
    let q_check = linalg::psd_check(&gram(&q), DEFAULT_PSD_TOL)?;
    let gk = gram(k);
    let scale = linalg::op_norm(&gk).max(1.0);

    let mut partial_sums = Vec::with_capacity(n_max + 1);
    let mut telescoping = Vec::with_capacity(n_max + 1);
    let mut increments_psd = Vec::with_capacity(n_max);
    let mut increment_min_eigs = Vec::with_capacity(n_max);
    let mut s = k.map_blocks(|b| ComplexMatrix::zeros(b.rows(), b.cols()));
    let mut increment = q.clone();
    let mut phi_n_k = k.clone();
    for n in 0..=n_max {
        let expected = &gk - &gram(&phi_n_k);
        telescoping.push(linalg::op_norm(&(&gram(&s) - &expected)) / scale);
        partial_sums.push(s.clone());
        if n == n_max {
            break;
        }
        let check = linalg::psd_check(&gram(&increment), DEFAULT_PSD_TOL)?;
        increments_psd.push(check.is_psd);
        increment_min_eigs.push(check.min_eig);
        s = s.zip_blocks(&increment, |a, b| a + b)?;
        increment = channels::apply_kernel(phi, &increment)?;
        phi_n_k = channels::apply_kernel(phi, &phi_n_k)?;
    }

    let kf = kernels::kolmogorov(k, DEFAULT_RANK_TOL)?;
    let lf = model::lift(&kf, phi, None)?;
    let certificate = model::certify_one(&lf, opts.cert_tol);
    let mut limit_error = None;
    let certified = if certificate.model_contractive {
        match limit_kernel(&lf, &kf, opts) {
            Ok(limit) => {
                let target = &gk - &gram(&limit.kbar);
                let limit_gaps: Vec<f64> =
                    partial_sums.iter().map(|s| linalg::op_norm(&(&gram(s) - &target))).collect();
                let gaps_monotone = limit_gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12 * scale);
                Some(SteinCertified { certificate: certificate.clone(), kbar: limit.kbar, limit_gaps, gaps_monotone })
            }
            Err(e) => {
                limit_error = Some(e);
                None
            }
        }
    } else {
        None
    };
    Ok(SteinResult {
        q_kernel: q,
        q_psd: q_check.is_psd,
        q_min_eig: q_check.min_eig,
        partial_sums,
        telescoping_residuals: telescoping,
        increments_psd,
        increment_min_eigs,
        certificate,
        certified,
        limit_error,
    })
}

/// `max_{x,y} ‖Φ(K̄)(x,y) − K̄(x,y)‖`.
pub fn harmonic_check(kbar: &PDKernel, phi: &CPMap) -> Result<f64> {
    let image = channels::apply_kernel(phi, kbar)?;
    image.max_block_distance(kbar)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximalityCheck {
    /// `L ⪯ K̄` within tolerance.
    pub holds: bool,
    pub min_eig: f64,
}

/// For a `Φ`-harmonic `L ⪯ K`, checks `L ⪯ K̄`. The lift of `Φ` to the
/// Kolmogorov space of `K` must be certified contractive.
pub fn maximality_check(l: &PDKernel, k: &PDKernel, kbar: &PDKernel, phi: &CPMap, tol: f64) -> Result<MaximalityCheck> {
    let kf = kernels::kolmogorov(k, DEFAULT_RANK_TOL)?;
    let lf = model::lift(&kf, phi, None)?;
    model::certify_one(&lf, DEFAULT_CERT_TOL).require_contractive()?;
    let h = harmonic_check(l, phi)?;
    if h > tol {
        return Err(Error::PreconditionFailed(format!("L is not harmonic: defect {h:e}")));
    }
    let dom = kernels::dominates(k, l, tol)?;
    if !dom.is_psd {
        return Err(Error::PreconditionFailed(format!("L is not dominated by K: min eigenvalue {:e}", dom.min_eig)));
    }
    let check = kernels::dominates(kbar, l, tol)?;
    Ok(MaximalityCheck { holds: check.is_psd, min_eig: check.min_eig })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairBound {
    pub x: usize,
    pub y: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayBound {
    pub pairs: Vec<PairBound>,
    /// Largest `lhs − rhs` over pairs.
    pub worst_excess: f64,
    pub holds: bool,
}

/// `‖K_w(x,y)‖ ≤ (Π_j ‖Φ_{s_j}‖_cb) · √(‖K(x,x)‖ ‖K(y,y)‖)` for every pair.
pub fn decay_bound_check(k: &PDKernel, maps: &MapSet, w: &Word) -> Result<DecayBound> {
    let kw = channels::iterate_kernel(k, w, maps)?;
    let factor: f64 = maps.resolve(w)?.into_iter().map(channels::cb_norm).product();
    let n = k.n();
    let diag: Vec<f64> = (0..n).map(|i| linalg::op_norm(k.block(i, i))).collect();
    let mut pairs = Vec::with_capacity(n * n);
    let mut worst = f64::NEG_INFINITY;
    for x in 0..n {
        for y in 0..n {
            let lhs = linalg::op_norm(kw.block(x, y));
            let rhs = factor * (diag[x] * diag[y]).sqrt();
            worst = worst.max(lhs - rhs);
            pairs.push(PairBound { x, y, lhs, rhs });
        }
    }
    Ok(DecayBound { pairs, worst_excess: worst, holds: worst <= 1e-9 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralRadius {
    /// `r_n = ‖Ψⁿ(I)‖^{1/(2n)}` for `n = 1..=n_max`.
    pub r: Vec<f64>,
    pub estimate: f64,
    /// Running minimum of `r_n`.
    pub envelope: Vec<f64>,
    /// `max_n |r_n − r_{n−1}|` over the last half of the run.
    pub tail_spread: f64,
}

/// Gelfand-style sequence `‖Ψⁿ(I)‖^{1/(2n)}`, accumulated in logs.
pub fn spectral_radius_estimate(lf: &LiftedFamily, n_max: usize) -> Result<SpectralRadius> {
    if !lf.is_admissible() {
        return Err(Error::LiftInadmissible {
            label: lf.label().to_owned(),
            residual: lf.max_residual(),
            tol: lf.admissibility_tol(),
        });
    }
    if n_max == 0 {
        return Err(Error::Invalid("n_max must be at least 1".into()));
    }
    let mut t = ComplexMatrix::identity(lf.dim());
    let mut log_acc = 0.0;
    let mut r = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        t = lifted_apply(lf, &t)?.hermitian_part();
        let c = linalg::op_norm(&t);
        if c == 0.0 {
            r.extend(std::iter::repeat_n(0.0, n_max - n + 1));
            break;
        }
        log_acc += c.ln();
        t = t.scale_real(1.0 / c);
        r.push((log_acc / (2.0 * n as f64)).exp());
    }
    let envelope: Vec<f64> = r
        .iter()
        .scan(f64::INFINITY, |m, &v| {
            *m = m.min(v);
            Some(*m)
        })
        .collect();
    let half = r.len() / 2;
    let tail_spread = r[half..].windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    Ok(SpectralRadius { estimate: *r.last().unwrap_or(&0.0), r, envelope, tail_spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LiftSet;
    use approx::assert_abs_diff_eq;

    fn damp() -> CPMap {
        CPMap::new("s", vec![ComplexMatrix::diag(&[1.0, 0.5])]).unwrap()
    }

    fn half() -> CPMap {
        CPMap::new("s", vec![ComplexMatrix::scalar(std::f64::consts::FRAC_1_SQRT_2)]).unwrap()
    }

    fn dephasing() -> CPMap {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        CPMap::new("s", vec![ComplexMatrix::identity(2).scale_real(h), ComplexMatrix::diag(&[h, -h])]).unwrap()
    }

    fn swap() -> CPMap {
        CPMap::new("s", vec![ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])]).unwrap()
    }

    fn lifted(k: ComplexMatrix, phi: &CPMap) -> (PDKernel, KolmogorovFactor, LiftedFamily) {
        let k = PDKernel::single(k).unwrap();
        let kf = kernels::kolmogorov(&k, DEFAULT_RANK_TOL).unwrap();
        let lf = model::lift(&kf, phi, None).unwrap();
        (k, kf, lf)
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    #[test]
    fn limit_of_identity_map() {
        let id = CPMap::new("s", vec![ComplexMatrix::identity(2)]).unwrap();
        let (k, kf, lf) = lifted(ComplexMatrix::identity(2), &id);
        let r = limit_kernel(&lf, &kf, &LimitOptions::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(close(&r.d_inf, &ComplexMatrix::identity(2), 1e-14));
        assert!(close(r.kbar.block(0, 0), k.block(0, 0), 1e-14));
    }

    #[test]
    fn limit_of_damping() {
        let (_, kf, lf) = lifted(ComplexMatrix::identity(2), &damp());
        let r = limit_kernel(&lf, &kf, &LimitOptions::default()).unwrap();
        assert!(r.iterations <= 100);
        assert!(close(r.kbar.block(0, 0), &ComplexMatrix::diag(&[1.0, 0.0]), 1e-8));
        assert!(close(&kf.w().conjugate(&r.d_inf), &ComplexMatrix::diag(&[1.0, 0.0]), 1e-8));
        assert!(r.projection_defect <= 1e-6);
        assert!(r.monotonicity_min_eig >= -1e-10);
        assert!(harmonic_check(&r.kbar, &damp()).unwrap() <= 1e-8);
    }

    #[test]
    fn limit_of_scalar_decay() {
        let (_, kf, lf) = lifted(ComplexMatrix::scalar(1.0), &half());
        let r = limit_kernel(&lf, &kf, &LimitOptions::default()).unwrap();
        assert!(r.d_inf.max_abs() < 1e-11);
        assert!(r.kbar.block(0, 0).max_abs() < 1e-11);
    }

    #[test]
    fn swap_oscillation_is_reported() {
        let (_, kf, lf) = lifted(ComplexMatrix::diag(&[1.0, 0.0]), &swap());
        match limit_kernel(&lf, &kf, &LimitOptions::default()) {
            Err(Error::NotConverged(nc)) => {
                assert_eq!(nc.period, Some(2));
                assert_eq!(nc.route, OrbitRoute::Direct);
                assert!(nc.step_residual > 0.5);
            }
            other => panic!("expected nonconvergence, got {other:?}"),
        }
    }

    #[test]
    fn uncertified_convergent_orbit_fails_certificate() {
        let g = ComplexMatrix::from_real(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let (_, kf, lf) = lifted(g, &dephasing());
        assert!(matches!(limit_kernel(&lf, &kf, &LimitOptions::default()), Err(Error::CertificateFailed(_))));
    }

    #[test]
    fn uncertified_decaying_orbit_is_not_a_cycle() {
        let g = ComplexMatrix::from_real(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let kraus = dephasing().kraus().iter().map(|a| a.scale_real(0.9)).collect();
        let (_, kf, lf) = lifted(g, &CPMap::new("s", kraus).unwrap());
        assert!(lf.d_norm() > 1.0);
        assert!(matches!(limit_kernel(&lf, &kf, &LimitOptions::default()), Err(Error::CertificateFailed(_))));
    }

    #[test]
    fn stein_damping_closed_form() {
        let k = PDKernel::single(ComplexMatrix::identity(2)).unwrap();
        let r = stein(&k, &damp(), 30, &LimitOptions::default()).unwrap();
        assert!(close(r.q_kernel.block(0, 0), &ComplexMatrix::diag(&[0.0, 0.75]), 1e-15));
        for (j, psd) in r.increments_psd.iter().enumerate() {
            assert!(*psd, "increment {j}");
        }
        let cert = r.require_certified().unwrap();
        assert!(cert.limit_gaps[30] <= 1e-6);
        assert!(cert.gaps_monotone);
        assert!(r.max_telescoping_residual() <= 1e-10);
        assert!(close(r.partial_sums[30].block(0, 0), &ComplexMatrix::diag(&[0.0, 1.0]), 1e-6));
    }

    #[test]
    fn stein_identity_map() {
        let id = CPMap::new("s", vec![ComplexMatrix::identity(2)]).unwrap();
        let k = PDKernel::single(ComplexMatrix::from_real(&[&[2.0, 1.0], &[1.0, 1.0]])).unwrap();
        let r = stein(&k, &id, 5, &LimitOptions::default()).unwrap();
        assert_eq!(r.q_kernel.block(0, 0).max_abs(), 0.0);
        assert!(r.partial_sums.iter().all(|s| s.block(0, 0).max_abs() == 0.0));
        let c = r.require_certified().unwrap();
        assert!(close(c.kbar.block(0, 0), k.block(0, 0), 1e-12));
    }

    #[test]
    fn stein_uncertified_keeps_telescoping() {
        let k = PDKernel::single(ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        let r = stein(&k, &dephasing(), 10, &LimitOptions::default()).unwrap();
        assert!(!r.q_psd);
        assert_abs_diff_eq!(r.q_min_eig, -1.0, epsilon = 1e-12);
        assert!(r.max_telescoping_residual() <= 1e-10);
        assert!(matches!(r.require_certified(), Err(Error::CertificateFailed(_))));
    }

    #[test]
    fn harmonic_examples() {
        let zero = PDKernel::single(ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(harmonic_check(&zero, &damp()).unwrap(), 0.0);
        let k = PDKernel::single(ComplexMatrix::from_real(&[&[2.0, 1.0], &[1.0, 1.0]])).unwrap();
        let id = CPMap::new("s", vec![ComplexMatrix::identity(2)]).unwrap();
        assert_eq!(harmonic_check(&k, &id).unwrap(), 0.0);
    }

    #[test]
    fn maximality_examples() {
        let k = PDKernel::single(ComplexMatrix::identity(2)).unwrap();
        let kbar = PDKernel::single(ComplexMatrix::diag(&[1.0, 0.0])).unwrap();
        for t in [0.0, 0.5, 1.0] {
            assert!(maximality_check(&kbar.scale(t), &k, &kbar, &damp(), 1e-9).unwrap().holds);
        }
        let l = PDKernel::single(ComplexMatrix::diag(&[0.7, 0.0])).unwrap();
        assert!(maximality_check(&l, &k, &kbar, &damp(), 1e-9).unwrap().holds);
        let not_harmonic = PDKernel::single(ComplexMatrix::diag(&[0.0, 0.5])).unwrap();
        assert!(matches!(maximality_check(&not_harmonic, &k, &kbar, &damp(), 1e-9), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn decay_examples() {
        let maps = MapSet::new([half()]);
        let k = PDKernel::single(ComplexMatrix::scalar(1.0)).unwrap();
        for n in 0..5 {
            let r = decay_bound_check(&k, &maps, &Word::power("s", n)).unwrap();
            assert!(r.holds);
            assert_abs_diff_eq!(r.pairs[0].lhs, 2f64.powi(-(n as i32)), epsilon = 1e-15);
            assert_abs_diff_eq!(r.pairs[0].rhs, 2f64.powi(-(n as i32)), epsilon = 1e-15);
        }
        let maps = MapSet::new([dephasing()]);
        let k = PDKernel::single(ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        let r = decay_bound_check(&k, &maps, &Word::new(["s"])).unwrap();
        assert_abs_diff_eq!(r.pairs[0].lhs, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.pairs[0].rhs, 2.0, epsilon = 1e-14);
        assert!(r.holds);
    }

    #[test]
    fn spectral_radius_examples() {
        let (_, _, lf) = lifted(ComplexMatrix::scalar(1.0), &half());
        let r = spectral_radius_estimate(&lf, 20).unwrap();
        assert!(r.r.iter().all(|v| (v - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12));

        let (_, _, lf) = lifted(ComplexMatrix::identity(2), &dephasing());
        let r = spectral_radius_estimate(&lf, 20).unwrap();
        assert!(r.r.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let (_, _, lf) = lifted(ComplexMatrix::identity(2), &damp());
        let r = spectral_radius_estimate(&lf, 20).unwrap();
        assert!(r.r.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let k = PDKernel::single(ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        let kf = kernels::kolmogorov(&k, DEFAULT_RANK_TOL).unwrap();
        let lifts = LiftSet::new(&kf, &MapSet::new([dephasing()]), None).unwrap();
        assert!(matches!(spectral_radius_estimate(lifts.get("s").unwrap(), 5), Err(Error::LiftInadmissible { .. })));
    }
}
