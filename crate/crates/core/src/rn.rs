//! Radon–Nikodym derivatives of dominated kernels on the Kolmogorov space.
//!
//! For `L ⪯ K` there is a unique `0 ⪯ a ⪯ I` on `C^m` with
//! `L(x,y) = V_x* a V_y`; it is computed as `(W⁺)* gram(L) W⁺` and then
//! verified.

use serde::Serialize;

use crate::channels::{self, MapSet, Word};
use crate::error::{Error, Result};
use crate::kernels::{gram, KolmogorovFactor, PDKernel, RECONSTRUCTION_TOL};
use crate::linalg;
use crate::matrix::ComplexMatrix;
use crate::model::{self, LiftSet};

/// Relative tolerance for `range(gram(L)) ⊆ range(gram(K))`.
pub const RANGE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RNDerivative {
    #[serde(rename = "rn")]
    pub a: ComplexMatrix,
    pub reconstruction_residual: f64,
    pub max_eig: f64,
    pub min_eig: f64,
}

fn require_shape(kf: &KolmogorovFactor, l: &PDKernel) -> Result<()> {
    let (n, d) = kf.source_dims();
    if l.n() != n || l.fiber_dim() != d || l.points() != kf.points() {
        return Err(Error::dims("kernel does not match the Kolmogorov factor's points and fiber"));
    }
    Ok(())
}

/// Verifies `0 ⪯ a ⪯ I` and `W* a W = gram_l`.
fn verify(kf: &KolmogorovFactor, a: ComplexMatrix, gram_l: &ComplexMatrix, tol: f64) -> Result<RNDerivative> {
    let a = a.hermitian_part();
    let gk = kf.gram();
    let scale = linalg::op_norm(&gk).max(1.0);
    let reconstruction_residual = linalg::op_norm(&(&kf.w().conjugate(&a) - gram_l));
    let (min_eig, max_eig) = if a.rows() == 0 {
        (0.0, 0.0)
    } else {
        let e = linalg::hermitian_eigen(&a)?;
        (e.min(), e.max())
    };
    if reconstruction_residual > RECONSTRUCTION_TOL * scale {
        return Err(Error::NotDominated(format!("reconstruction residual {reconstruction_residual:e}")));
    }
    if min_eig < -tol || max_eig > 1.0 + tol {
        return Err(Error::NotDominated(format!("derivative spectrum [{min_eig:e}, {max_eig:e}] leaves [0, 1]")));
    }
    Ok(RNDerivative { a, reconstruction_residual, max_eig, min_eig })
}

/// `dL/dK` on the feature space of `kf`.
pub fn rn_derivative(kf: &KolmogorovFactor, l: &PDKernel, tol: f64) -> Result<RNDerivative> {
    require_shape(kf, l)?;
    let gl = gram(l);
    let gk = kf.gram();
    let dom = linalg::psd_check(&(&gk - &gl), tol)?;
    if !dom.is_psd {
        return Err(Error::NotDominated(format!("gram(K) − gram(L) has eigenvalue {:e}", dom.min_eig)));
    }
    let outside = &(&ComplexMatrix::identity(gl.rows()) - &kf.range_projector()) * &gl;
    let range_residual = linalg::op_norm(&outside);
    if range_residual > RANGE_TOL * linalg::op_norm(&gl).max(1.0) {
        return Err(Error::NotDominated(format!("gram(L) leaves the range of gram(K) by {range_residual:e}")));
    }
    let a = &(&kf.w_pinv().adjoint() * &gl) * kf.w_pinv();
    verify(kf, a, &gl, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IteratedRN {
    pub word: Word,
    #[serde(flatten)]
    pub rn: RNDerivative,
    /// `max_{x,y} ‖V_x* a_w V_y − K_w(x,y)‖` against direct iteration.
    pub oracle_residual: f64,
    pub dominated: bool,
    /// `‖a_w‖ ≤ Π_j ‖Φ_{s_j}‖_cb`, the cb-norm form of the bound.
    pub cb_bound_holds: bool,
}

/// `dK_w/dK = a_w` for subunital maps under a contractivity certificate.
pub fn rn_iterated(
    k: &PDKernel,
    kf: &KolmogorovFactor,
    lifts: &LiftSet,
    w: &Word,
    maps: &MapSet,
    tol: f64,
) -> Result<IteratedRN> {
    require_shape(kf, k)?;
    for phi in maps.iter() {
        if !channels::is_subunital(phi, tol) {
            return Err(Error::NotSubunital(phi.label().to_owned()));
        }
    }
    model::certify(lifts, tol).require_contractive()?;
    let cg = model::compressed_gram(lifts, w)?;
    let direct = channels::iterate_kernel(k, w, maps)?;
    let realized = model::realize_all(kf, &cg)?;
    let oracle_residual = realized.max_block_distance(&direct)?;
    let scale = linalg::op_norm(&kf.gram()).max(1.0);
    if oracle_residual > RECONSTRUCTION_TOL * scale {
        return Err(Error::CheckFailed(format!("compressed and direct K_w differ by {oracle_residual:e}")));
    }
    let rn = verify(kf, cg.a_w, &gram(&direct), tol)?;
    let dom = linalg::psd_check(&(&gram(k) - &gram(&direct)), tol)?;
    if !dom.is_psd {
        return Err(Error::CheckFailed(format!("K_w ⋠ K: eigenvalue {:e}", dom.min_eig)));
    }
    let cb: f64 = maps.resolve(w)?.into_iter().map(channels::cb_norm).product();
    Ok(IteratedRN { word: w.clone(), cb_bound_holds: rn.max_eig <= cb + tol, rn, oracle_residual, dominated: true })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossModel {
    pub word: Word,
    /// `dK1/dK2`.
    pub derivative: RNDerivative,
    /// `B_w = Ψ²_{s_1}(…Ψ²_{s_n}(A)…)`.
    pub b_w: ComplexMatrix,
    pub kernel: PDKernel,
    pub oracle_residual: f64,
}

/// Realizes `(K1)_w` in the model of `K2 ⪰ K1`: the lifted fold of the
/// second model seeded with `dK1/dK2`, compared with direct iteration.
pub fn cross_model(
    k1: &PDKernel,
    k2: &PDKernel,
    kf2: &KolmogorovFactor,
    lifts2: &LiftSet,
    w: &Word,
    maps: &MapSet,
    tol: f64,
) -> Result<CrossModel> {
    require_shape(kf2, k2)?;
    k2.require_compatible(k1)?;
    let derivative = rn_derivative(kf2, k1, tol)?;
    let b_w = model::fold_lifted(lifts2, w, derivative.a.clone())?;
    let kernel = kf2.kernel_from(&b_w)?;
    let direct = channels::iterate_kernel(k1, w, maps)?;
    let oracle_residual = kernel.max_block_distance(&direct)?;
    let scale = linalg::op_norm(&kf2.gram()).max(1.0);
    if oracle_residual > RECONSTRUCTION_TOL * scale {
        return Err(Error::CheckFailed(format!(
            "cross-model kernel differs from direct iteration by {oracle_residual:e}"
        )));
    }
    Ok(CrossModel { word: w.clone(), derivative, b_w, kernel, oracle_residual })
}
