//! Compressed model-space realization of iterated kernels.
//!
//! Each Kraus operator `A` is lifted to the feature space `C^m` of a
//! Kolmogorov factor as `Γ(A) = W (I_n ⊗ A) W⁺`. The lift is exact only when
//! `W (I_n ⊗ A)` vanishes on `ker W`; the residual of that condition is
//! computed and decides admissibility. On admissible lifts the compressed
//! operator `a_w = Ψ_{s_1}(…Ψ_{s_n}(I_m)…)` with `Ψ_s(T) = Σ Γ* T Γ`
//! reproduces `K_w(x,y) = V_x* a_w V_y`.
//!
//! Feature vectors over tagged Kraus strings give the same inner products
//! without any admissibility condition.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::channels::{self, CPMap, KrausTag, MapSet, Word};
use crate::error::{Error, Result};
use crate::kernels::{gram, KolmogorovFactor, PDKernel};
use crate::linalg::{self, kraus_sum};
use crate::matrix::{inner, ComplexMatrix, C64};

/// Default tolerance for certificate comparisons.
pub const DEFAULT_CERT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LiftedFamily {
    map: CPMap,
    gammas: Vec<ComplexMatrix>,
    residuals: Vec<f64>,
    adm_tol: f64,
    d_op: ComplexMatrix,
    d_norm: f64,
}

impl LiftedFamily {
    pub fn label(&self) -> &str {
        self.map.label()
    }

    pub fn map(&self) -> &CPMap {
        &self.map
    }

    pub fn gammas(&self) -> &[ComplexMatrix] {
        &self.gammas
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn admissibility_tol(&self) -> f64 {
        self.adm_tol
    }

    pub fn is_admissible(&self) -> bool {
        self.max_residual() <= self.adm_tol
    }

    /// `D_s = Σ Γ*Γ`.
    pub fn d_op(&self) -> &ComplexMatrix {
        &self.d_op
    }

    pub fn d_norm(&self) -> f64 {
        self.d_norm
    }

    /// Feature-space dimension `m`.
    pub fn dim(&self) -> usize {
        self.d_op.rows()
    }

    /// Row-major superoperator of `Ψ_s`.
    pub fn superoperator(&self) -> ComplexMatrix {
        let m = self.dim();
        let mut s = ComplexMatrix::zeros(m * m, m * m);
        for g in &self.gammas {
            s = &s + &g.adjoint().kron(&g.transpose());
        }
        s
    }

    fn require_admissible(&self) -> Result<()> {
        if self.is_admissible() {
            Ok(())
        } else {
            Err(Error::LiftInadmissible {
                label: self.label().to_owned(),
                residual: self.max_residual(),
                tol: self.adm_tol,
            })
        }
    }
}

/// `1e-8 · ‖W‖ · max_r ‖A_r‖`.
pub fn default_admissibility_tol(kf: &KolmogorovFactor, phi: &CPMap) -> f64 {
    let a_max = phi.kraus().iter().map(linalg::op_norm).fold(0.0, f64::max);
    1e-8 * linalg::op_norm(kf.w()) * a_max
}

/// Lifts every Kraus operator of `phi` to the feature space of `kf`.
/// `adm_tol = None` selects [`default_admissibility_tol`].
pub fn lift(kf: &KolmogorovFactor, phi: &CPMap, adm_tol: Option<f64>) -> Result<LiftedFamily> {
    let (n, d) = kf.source_dims();
    if phi.dim() != d {
        return Err(Error::dims(format!("map `{}` has dimension {}, kernel fiber {d}", phi.label(), phi.dim())));
    }
    let m = kf.rank();
    let complement = &ComplexMatrix::identity(n * d) - &kf.range_projector();
    let mut gammas = Vec::with_capacity(phi.kraus().len());
    let mut residuals = Vec::with_capacity(phi.kraus().len());
    for a in phi.kraus() {
        let wa = kf.w() * &a.block_diag_repeat(n);
        residuals.push(linalg::op_norm(&(&wa * &complement)));
        gammas.push(&wa * kf.w_pinv());
    }
    let d_op = kraus_sum(&gammas, &ComplexMatrix::identity(m)).hermitian_part();
    let d_norm = linalg::op_norm(&d_op);
    Ok(LiftedFamily {
        map: phi.clone(),
        gammas,
        residuals,
        adm_tol: adm_tol.unwrap_or_else(|| default_admissibility_tol(kf, phi)),
        d_op,
        d_norm,
    })
}

/// `Ψ_s(T) = Σ_r Γ_r* T Γ_r`.
pub fn lifted_apply(lf: &LiftedFamily, t: &ComplexMatrix) -> Result<ComplexMatrix> {
    let m = lf.dim();
    if t.rows() != m || t.cols() != m {
        return Err(Error::dims(format!("lifted map acts on {m}x{m}, got {}x{}", t.rows(), t.cols())));
    }
    Ok(kraus_sum(&lf.gammas, t))
}

/// Lifted families for every declared map against one Kolmogorov factor.
#[derive(Debug, Clone)]
pub struct LiftSet {
    m: usize,
    families: BTreeMap<String, LiftedFamily>,
}

impl LiftSet {
    pub fn new(kf: &KolmogorovFactor, maps: &MapSet, adm_tol: Option<f64>) -> Result<Self> {
        let families =
            maps.iter().map(|phi| Ok((phi.label().to_owned(), lift(kf, phi, adm_tol)?))).collect::<Result<_>>()?;
        Ok(Self { m: kf.rank(), families })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, label: &str) -> Result<&LiftedFamily> {
        self.families.get(label).ok_or_else(|| Error::UnknownLabel(label.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &LiftedFamily> {
        self.families.values()
    }

    pub fn all_admissible(&self) -> bool {
        self.iter().all(LiftedFamily::is_admissible)
    }

    /// Families for the letters of `w`, each required to be admissible.
    pub fn resolve_admissible(&self, w: &Word) -> Result<Vec<&LiftedFamily>> {
        w.labels()
            .iter()
            .map(|s| {
                let lf = self.get(s)?;
                lf.require_admissible()?;
                Ok(lf)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressedGram {
    pub word: Word,
    pub a_w: ComplexMatrix,
}

/// Right fold `Ψ_{s_1}(…Ψ_{s_n}(seed)…)`.
pub(crate) fn fold_lifted(lifts: &LiftSet, w: &Word, seed: ComplexMatrix) -> Result<ComplexMatrix> {
    let families = lifts.resolve_admissible(w)?;
    let mut a = seed;
    for lf in families.into_iter().rev() {
        a = lifted_apply(lf, &a)?.hermitian_part();
    }
    Ok(a)
}

/// `a_w = Ψ_{s_1}(…Ψ_{s_n}(I_m)…)`; `a_∅ = I_m`.
pub fn compressed_gram(lifts: &LiftSet, w: &Word) -> Result<CompressedGram> {
    let a_w = fold_lifted(lifts, w, ComplexMatrix::identity(lifts.m))?;
    Ok(CompressedGram { word: w.clone(), a_w })
}

/// `V_x* a_w V_y`.
pub fn realize_kernel(kf: &KolmogorovFactor, cg: &CompressedGram, x: usize, y: usize) -> Result<ComplexMatrix> {
    kf.sandwich(x, &cg.a_w, y)
}

/// The whole kernel `(x,y) ↦ V_x* a_w V_y`.
pub fn realize_all(kf: &KolmogorovFactor, cg: &CompressedGram) -> Result<PDKernel> {
    kf.kernel_from(&cg.a_w)
}

/// `‖C_w‖ = ‖a_w‖^{1/2}`.
pub fn model_norm(lifts: &LiftSet, w: &Word) -> Result<f64> {
    Ok(linalg::op_norm(&compressed_gram(lifts, w)?.a_w).sqrt())
}

/// Components of `C_w J_x(a)`, one per tagged Kraus string.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub word: Word,
    pub x: usize,
    pub a: Vec<C64>,
    pub components: BTreeMap<KrausTag, Vec<C64>>,
}

impl FeatureVector {
    pub fn norm_sqr(&self) -> f64 {
        self.components.values().map(|v| inner(v, v).re).sum()
    }
}

pub fn feature_vector(
    kf: &KolmogorovFactor,
    maps: &MapSet,
    w: &Word,
    x: usize,
    a: &[C64],
    max_count: usize,
) -> Result<FeatureVector> {
    let (_, d) = kf.source_dims();
    if a.len() != d {
        return Err(Error::dims(format!("vector of length {}, fiber dimension {d}", a.len())));
    }
    let strings = channels::kraus_strings_in_dim(w, maps, d, max_count)?;
    let mut components = BTreeMap::new();
    for s in strings {
        if s.product.rows() != d {
            return Err(Error::dims(format!("maps have dimension {}, kernel fiber {d}", s.product.rows())));
        }
        components.insert(s.tag, kf.feature(x, &s.product.mul_vec(a))?);
    }
    Ok(FeatureVector { word: w.clone(), x, a: a.to_vec(), components })
}

/// `Σ_ρ ⟨F(ρ), G(ρ)⟩` over strings present in both.
pub fn feature_gram(f: &FeatureVector, g: &FeatureVector) -> C64 {
    f.components.iter().filter_map(|(tag, u)| g.components.get(tag).map(|v| inner(u, v))).sum()
}

/// The sesquilinear form on the model space between `C_w J_x(a)` and
/// `C_v J_y(b)`. Distinct words live on orthogonal layers.
#[allow(clippy::too_many_arguments)]
pub fn model_inner(
    kf: &KolmogorovFactor,
    maps: &MapSet,
    w: &Word,
    x: usize,
    a: &[C64],
    v: &Word,
    y: usize,
    b: &[C64],
    max_count: usize,
) -> Result<C64> {
    let f = feature_vector(kf, maps, w, x, a, max_count)?;
    let g = feature_vector(kf, maps, v, y, b, max_count)?;
    Ok(feature_gram(&f, &g))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelCertificate {
    pub label: String,
    pub admissible: bool,
    pub max_residual: f64,
    pub d_norm: f64,
    pub cb_value: f64,
    /// Admissible and `d_norm ≤ cb_value + tol`: the cb-norm contraction bound at word length one.
    pub cb_bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub labels: Vec<LabelCertificate>,
    pub tol: f64,
    /// Every lift admissible and every `d_norm ≤ 1 + tol`.
    pub model_contractive: bool,
}

impl Certificate {
    pub fn label(&self, s: &str) -> Option<&LabelCertificate> {
        self.labels.iter().find(|c| c.label == s)
    }

    pub fn cb_bound_holds_everywhere(&self) -> bool {
        self.labels.iter().all(|c| c.cb_bound_holds)
    }

    pub fn require_contractive(&self) -> Result<()> {
        if self.model_contractive {
            return Ok(());
        }
        let why: Vec<String> = self
            .labels
            .iter()
            .filter(|c| !c.admissible || c.d_norm > 1.0 + self.tol)
            .map(|c| {
                if c.admissible {
                    format!("`{}` has d_norm {:.6}", c.label, c.d_norm)
                } else {
                    format!("`{}` lift inadmissible (residual {:e})", c.label, c.max_residual)
                }
            })
            .collect();
        Err(Error::CertificateFailed(why.join("; ")))
    }
}

fn certify_families<'a>(families: impl Iterator<Item = &'a LiftedFamily>, tol: f64) -> Certificate {
    let labels: Vec<LabelCertificate> = families
        .map(|lf| {
            let cb_value = channels::cb_norm(lf.map());
            LabelCertificate {
                label: lf.label().to_owned(),
                admissible: lf.is_admissible(),
                max_residual: lf.max_residual(),
                d_norm: lf.d_norm(),
                cb_value,
                cb_bound_holds: lf.is_admissible() && lf.d_norm() <= cb_value + tol,
            }
        })
        .collect();
    let model_contractive = labels.iter().all(|c| c.admissible && c.d_norm <= 1.0 + tol);
    Certificate { labels, tol, model_contractive }
}

/// Contractivity certificate for a set of lifts.
pub fn certify(lifts: &LiftSet, tol: f64) -> Certificate {
    certify_families(lifts.iter(), tol)
}

/// Certificate for a single lifted family.
pub fn certify_one(lf: &LiftedFamily, tol: f64) -> Certificate {
    certify_families(std::iter::once(lf), tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PremiseCheck {
    /// `⟨α, [Φ(T_jk)] α⟩`.
    pub lhs: f64,
    /// `‖Φ‖_cb · ⟨α, [T_jk] α⟩`.
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the blockwise quadratic-form bound
/// `⟨α,[Φ(T_jk)]α⟩ ≤ ‖Φ‖_cb ⟨α,[T_jk]α⟩` on the Gram blocks of `k`.
pub fn premise_check(k: &PDKernel, phi: &CPMap, alpha: &[C64], tol: f64) -> Result<PremiseCheck> {
    let g = gram(k);
    if alpha.len() != g.rows() {
        return Err(Error::dims(format!("α has length {}, Gram is {}x{}", alpha.len(), g.rows(), g.rows())));
    }
    let phi_k = channels::apply_kernel(phi, k)?;
    let lhs = inner(alpha, &gram(&phi_k).mul_vec(alpha)).re;
    let rhs = channels::cb_norm(phi) * inner(alpha, &g.mul_vec(alpha)).re;
    Ok(PremiseCheck { lhs, rhs, holds: lhs <= rhs + tol })
}
