//! Operator-valued positive definite kernels on finite point sets.
//!
//! A kernel on `n` points with fiber `C^d` is stored as its `n×n` array of
//! `d×d` blocks. The Gram matrix is the `(n·d)×(n·d)` block matrix, and the
//! Kolmogorov factor `W` (with `W*W = Gram`) provides the feature maps
//! `V_x`, the `m×d` column slices of `W`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, psd_check, PsdCheck, DEFAULT_PSD_TOL};
use crate::matrix::{inner, ComplexMatrix, C64};

/// Relative tolerance for the Hermitian symmetry of a kernel.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative tolerance for Gram reconstructions.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// A point id. Ids are opaque labels: the point set carries no structure.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "RawId", into = "String")]
pub struct PointId(pub String);

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Text(String),
    Int(i64),
}

impl From<RawId> for PointId {
    fn from(raw: RawId) -> Self {
        match raw {
            RawId::Text(s) => PointId(s),
            RawId::Int(i) => PointId(i.to_string()),
        }
    }
}

impl From<PointId> for String {
    fn from(p: PointId) -> String {
        p.0
    }
}

impl From<&str> for PointId {
    fn from(s: &str) -> Self {
        PointId(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel", into = "RawKernel")]
pub struct PDKernel {
    points: Vec<PointId>,
    fiber_dim: usize,
    /// Row-major `n×n` array of blocks.
    blocks: Vec<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
struct RawKernel {
    points: Vec<PointId>,
    fiber_dim: usize,
    blocks: Vec<Vec<ComplexMatrix>>,
}

impl TryFrom<RawKernel> for PDKernel {
    type Error = Error;

    fn try_from(raw: RawKernel) -> Result<Self> {
        PDKernel::new(raw.points, raw.fiber_dim, raw.blocks)
    }
}

impl From<PDKernel> for RawKernel {
    fn from(k: PDKernel) -> Self {
        let n = k.n();
        let blocks = (0..n).map(|i| (0..n).map(|j| k.block(i, j).clone()).collect()).collect();
        RawKernel { points: k.points, fiber_dim: k.fiber_dim, blocks }
    }
}

impl PDKernel {
    /// Structural validation only: distinct points, an `n×n` array of `d×d`
    /// blocks. Positivity is checked by [`validate`].
    pub fn new(points: Vec<PointId>, fiber_dim: usize, blocks: Vec<Vec<ComplexMatrix>>) -> Result<Self> {
        let n = points.len();
        let mut seen = HashSet::new();
        if let Some(p) = points.iter().find(|p| !seen.insert(*p)) {
            return Err(Error::Invalid(format!("duplicate point id `{}`", p.0)));
        }
        if blocks.len() != n || blocks.iter().any(|row| row.len() != n) {
            return Err(Error::dims(format!("kernel on {n} points needs an {n}x{n} array of blocks")));
        }
        let blocks: Vec<ComplexMatrix> = blocks.into_iter().flatten().collect();
        if let Some(b) = blocks.iter().find(|b| b.rows() != fiber_dim || b.cols() != fiber_dim) {
            return Err(Error::dims(format!("block is {}x{}, fiber dimension is {fiber_dim}", b.rows(), b.cols())));
        }
        Ok(Self { points, fiber_dim, blocks })
    }

    /// Kernel whose Gram matrix is `gram`, on points `0, 1, …`.
    pub fn from_gram(n: usize, d: usize, gram: &ComplexMatrix) -> Result<Self> {
        let points = (0..n).map(|i| PointId(i.to_string())).collect();
        Self::from_gram_with_points(points, d, gram)
    }

    pub fn from_gram_with_points(points: Vec<PointId>, d: usize, gram: &ComplexMatrix) -> Result<Self> {
        let n = points.len();
        if gram.rows() != n * d || gram.cols() != n * d {
            return Err(Error::dims(format!("gram must be {0}x{0}", n * d)));
        }
        let blocks = (0..n).map(|i| (0..n).map(|j| gram.block(i * d, j * d, d, d)).collect()).collect();
        Self::new(points, d, blocks)
    }

    /// Single-point kernel with block `k`.
    pub fn single(k: ComplexMatrix) -> Result<Self> {
        let d = k.rows();
        Self::new(vec![PointId("x".into())], d, vec![vec![k]])
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn points(&self) -> &[PointId] {
        &self.points
    }

    pub fn point_index(&self, id: &str) -> Result<usize> {
        self.points.iter().position(|p| p.0 == id).ok_or_else(|| Error::UnknownPoint(id.to_owned()))
    }

    pub fn block(&self, i: usize, j: usize) -> &ComplexMatrix {
        &self.blocks[i * self.n() + j]
    }

    /// Applies `f` to every block, keeping the point set.
    pub fn map_blocks(&self, mut f: impl FnMut(&ComplexMatrix) -> ComplexMatrix) -> Self {
        Self {
            points: self.points.clone(),
            fiber_dim: self.fiber_dim,
            blocks: self.blocks.iter().map(&mut f).collect(),
        }
    }

    pub fn try_map_blocks(&self, mut f: impl FnMut(&ComplexMatrix) -> Result<ComplexMatrix>) -> Result<Self> {
        let blocks = self.blocks.iter().map(&mut f).collect::<Result<Vec<_>>>()?;
        Ok(Self { points: self.points.clone(), fiber_dim: self.fiber_dim, blocks })
    }

    pub fn zip_blocks(
        &self,
        other: &Self,
        f: impl Fn(&ComplexMatrix, &ComplexMatrix) -> ComplexMatrix,
    ) -> Result<Self> {
        self.require_compatible(other)?;
        let blocks = self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect();
        Ok(Self { points: self.points.clone(), fiber_dim: self.fiber_dim, blocks })
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_blocks(|b| b.scale_real(s))
    }

    pub fn require_compatible(&self, other: &Self) -> Result<()> {
        if self.points != other.points || self.fiber_dim != other.fiber_dim {
            return Err(Error::dims("kernels differ in points or fiber dimension"));
        }
        Ok(())
    }

    /// Largest blockwise operator-norm distance to `other`.
    pub fn max_block_distance(&self, other: &Self) -> Result<f64> {
        self.require_compatible(other)?;
        Ok(self.blocks.iter().zip(&other.blocks).map(|(a, b)| linalg::op_norm(&(a - b))).fold(0.0, f64::max))
    }
}

/// `(n·d)×(n·d)` block matrix with `(i,j)` block `K(x_i, x_j)`.
pub fn gram(k: &PDKernel) -> ComplexMatrix {
    let (n, d) = (k.n(), k.fiber_dim());
    let mut g = ComplexMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..n {
            g.set_block(i * d, j * d, k.block(i, j));
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub hermitian_residual: f64,
    pub hermitian_ok: bool,
    pub min_eig: f64,
    pub psd: bool,
    /// Largest `‖K(x,y)‖ − √(‖K(x,x)‖·‖K(y,y)‖)` over all pairs.
    pub cauchy_schwarz_excess: f64,
    pub cauchy_schwarz_ok: bool,
    pub pass: bool,
}

/// Checks Hermitian symmetry, Gram positivity and the blockwise
/// Cauchy–Schwarz bound. Failures are reported, not raised.
pub fn validate(k: &PDKernel, tol: f64) -> Result<ValidationReport> {
    let n = k.n();
    let scale = k.blocks.iter().map(ComplexMatrix::max_abs).fold(1.0, f64::max);
    let mut herm = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            herm = herm.max((k.block(i, j) - &k.block(j, i).adjoint()).max_abs());
        }
    }
    let hermitian_ok = herm <= HERMITIAN_TOL * scale;
    let PsdCheck { is_psd, min_eig } = psd_check(&gram(k), tol)?;

    let diag_norms: Vec<f64> = (0..n).map(|i| linalg::op_norm(k.block(i, i))).collect();
    let mut excess = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let lhs = linalg::op_norm(k.block(i, j));
            excess = excess.max(lhs - (diag_norms[i] * diag_norms[j]).sqrt());
        }
    }
    if n == 0 {
        excess = 0.0;
    }
    let cauchy_schwarz_ok = excess <= tol;
    Ok(ValidationReport {
        hermitian_residual: herm,
        hermitian_ok,
        min_eig,
        psd: is_psd,
        cauchy_schwarz_excess: excess,
        cauchy_schwarz_ok,
        pass: hermitian_ok && is_psd && cauchy_schwarz_ok,
    })
}

/// Factor `W` (`m×(n·d)`, full row rank) with `W*W = gram(K)`.
///
/// Rows of `W` are `√λ_k · v_k*` over the eigenpairs of the Gram matrix
/// with `λ_k > rank_tol·λ_max`. The factor is unique only up to a unitary on
/// `C^m`; callers should compare inner products, never `W` itself.
#[derive(Debug, Clone)]
pub struct KolmogorovFactor {
    w: ComplexMatrix,
    w_pinv: ComplexMatrix,
    rank: usize,
    n: usize,
    d: usize,
    points: Vec<PointId>,
    rank_tol_used: f64,
    reconstruction_residual: f64,
}

impl KolmogorovFactor {
    pub fn w(&self) -> &ComplexMatrix {
        &self.w
    }

    pub fn w_pinv(&self) -> &ComplexMatrix {
        &self.w_pinv
    }

    /// Dimension `m` of the feature space.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn source_dims(&self) -> (usize, usize) {
        (self.n, self.d)
    }

    pub fn points(&self) -> &[PointId] {
        &self.points
    }

    pub fn rank_tol_used(&self) -> f64 {
        self.rank_tol_used
    }

    pub fn reconstruction_residual(&self) -> f64 {
        self.reconstruction_residual
    }

    /// `V_x`: the `m×d` slice of `W` at point `x`.
    pub fn slice(&self, x: usize) -> ComplexMatrix {
        self.w.block(0, x * self.d, self.rank, self.d)
    }

    /// `V_x a`, the feature vector of `(x, a)`.
    pub fn feature(&self, x: usize, a: &[C64]) -> Result<Vec<C64>> {
        self.check_point(x)?;
        if a.len() != self.d {
            return Err(Error::dims(format!("vector of length {}, fiber dimension {}", a.len(), self.d)));
        }
        Ok(self.slice(x).mul_vec(a))
    }

    /// `W*W`.
    pub fn gram(&self) -> ComplexMatrix {
        &self.w.adjoint() * &self.w
    }

    /// `V_x* · t · V_y` for an operator `t` on the feature space.
    pub fn sandwich(&self, x: usize, t: &ComplexMatrix, y: usize) -> Result<ComplexMatrix> {
        self.check_point(x)?;
        self.check_point(y)?;
        if t.rows() != self.rank || t.cols() != self.rank {
            return Err(Error::dims(format!("operator must be {0}x{0}", self.rank)));
        }
        Ok(&(&self.slice(x).adjoint() * t) * &self.slice(y))
    }

    /// Kernel `(x,y) ↦ V_x* · t · V_y`.
    pub fn kernel_from(&self, t: &ComplexMatrix) -> Result<PDKernel> {
        if t.rows() != self.rank || t.cols() != self.rank {
            return Err(Error::dims(format!("operator must be {0}x{0}", self.rank)));
        }
        let g = &(&self.w.adjoint() * t) * &self.w;
        PDKernel::from_gram_with_points(self.points.clone(), self.d, &g)
    }

    /// Orthogonal projection `W⁺W` onto `range(gram(K))`.
    pub fn range_projector(&self) -> ComplexMatrix {
        &self.w_pinv * &self.w
    }

    fn check_point(&self, x: usize) -> Result<()> {
        if x < self.n {
            Ok(())
        } else {
            Err(Error::UnknownPoint(format!("index {x}")))
        }
    }
}

/// Kolmogorov factorization of a validated kernel.
pub fn kolmogorov(k: &PDKernel, rank_tol: f64) -> Result<KolmogorovFactor> {
    let report = validate(k, DEFAULT_PSD_TOL)?;
    if !report.psd || !report.hermitian_ok {
        return Err(Error::NotPsd { min_eig: report.min_eig });
    }
    let g = gram(k);
    let eig = linalg::hermitian_eigen(&g)?;
    let cutoff = rank_tol * eig.max().max(0.0);
    let keep: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] > cutoff && eig.values[i] > 0.0).collect();
    let nd = g.rows();
    let mut w = ComplexMatrix::zeros(keep.len(), nd);
    for (row, &i) in keep.iter().enumerate() {
        let s = eig.values[i].sqrt();
        for col in 0..nd {
            w[(row, col)] = eig.vectors[(col, i)].conj() * s;
        }
    }
    let rank = keep.len();
    let residual = linalg::op_norm(&(&(&w.adjoint() * &w) - &g));
    let gnorm = linalg::op_norm(&g);
    if residual > RECONSTRUCTION_TOL * gnorm.max(1.0) {
        return Err(Error::Numerical(format!("Kolmogorov reconstruction residual {residual:e}")));
    }
    let p = linalg::pinv(&w, linalg::DEFAULT_RANK_TOL);
    if p.rank != rank {
        return Err(Error::Numerical(format!("factor rows not independent: rank {} of {rank}", p.rank)));
    }
    Ok(KolmogorovFactor {
        w,
        w_pinv: p.matrix,
        rank,
        n: k.n(),
        d: k.fiber_dim(),
        points: k.points().to_vec(),
        rank_tol_used: rank_tol,
        reconstruction_residual: residual,
    })
}

/// `⟨V_x a, V_y b⟩ = ⟨a, K(x,y) b⟩`, the scalar kernel on pairs `(x, a)`.
pub fn scalar_lift(kf: &KolmogorovFactor, x: usize, a: &[C64], y: usize, b: &[C64]) -> Result<C64> {
    Ok(inner(&kf.feature(x, a)?, &kf.feature(y, b)?))
}

/// Kernel order: `L ⪯ K` iff `gram(K) − gram(L)` is PSD within `tol`.
pub fn dominates(k: &PDKernel, l: &PDKernel, tol: f64) -> Result<PsdCheck> {
    k.require_compatible(l)?;
    psd_check(&(&gram(k) - &gram(l)), tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::c64;
    use approx::assert_abs_diff_eq;

    fn ones2() -> ComplexMatrix {
        ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]])
    }

    #[test]
    fn gram_examples() {
        let k = PDKernel::single(ComplexMatrix::identity(2)).unwrap();
        assert_eq!(gram(&k), ComplexMatrix::identity(2));
        let k = PDKernel::single(ones2()).unwrap();
        assert_eq!(gram(&k), ones2());

        let s = ComplexMatrix::from_real(&[&[1.0, 0.5], &[0.5, 1.0]]);
        let k = PDKernel::from_gram(2, 1, &s).unwrap();
        assert_eq!(k.block(0, 1), &ComplexMatrix::scalar(0.5));
        assert_eq!(gram(&k), s);
    }

    #[test]
    fn structural_errors() {
        let i2 = ComplexMatrix::identity(2);
        let err = PDKernel::new(vec!["a".into(), "b".into()], 2, vec![vec![i2.clone()]]);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
        let err = PDKernel::new(vec!["a".into()], 3, vec![vec![i2.clone()]]);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
        let err = PDKernel::new(vec!["a".into(), "a".into()], 2, vec![vec![i2.clone(); 2]; 2]);
        assert!(matches!(err, Err(Error::Invalid(_))));
    }

    #[test]
    fn validate_examples() {
        let z = ComplexMatrix::zeros(2, 2);
        let i2 = ComplexMatrix::identity(2);
        let k = PDKernel::new(vec!["a".into(), "b".into()], 2, vec![vec![i2.clone(), z.clone()], vec![z, i2]]).unwrap();
        assert!(validate(&k, 1e-9).unwrap().pass);

        let r =
            validate(&PDKernel::single(ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap(), 1e-9).unwrap();
        assert!(!r.pass);
        assert_abs_diff_eq!(r.min_eig, -1.0, epsilon = 1e-12);

        let r = validate(&PDKernel::single(ones2()).unwrap(), 1e-9).unwrap();
        assert!(r.pass);
        assert_abs_diff_eq!(r.min_eig, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn validate_flags_asymmetry() {
        let a = ComplexMatrix::scalar(0.5);
        let b = ComplexMatrix::scalar(0.25);
        let one = ComplexMatrix::scalar(1.0);
        let k = PDKernel::new(vec!["a".into(), "b".into()], 1, vec![vec![one.clone(), a], vec![b, one]]).unwrap();
        let r = validate(&k, 1e-9).unwrap();
        assert!(!r.hermitian_ok && !r.pass);
    }

    #[test]
    fn kolmogorov_examples() {
        let kf = kolmogorov(&PDKernel::single(ComplexMatrix::scalar(1.0)).unwrap(), 1e-10).unwrap();
        assert_eq!(kf.rank(), 1);
        assert!((&kf.gram() - &ComplexMatrix::scalar(1.0)).max_abs() < 1e-14);

        let kf = kolmogorov(&PDKernel::single(ones2()).unwrap(), 1e-10).unwrap();
        assert_eq!(kf.rank(), 1);
        assert!((&kf.gram() - &ones2()).max_abs() < 1e-14);

        let kf = kolmogorov(&PDKernel::single(ComplexMatrix::identity(2)).unwrap(), 1e-10).unwrap();
        assert_eq!(kf.rank(), 2);
        assert!((&kf.gram() - &ComplexMatrix::identity(2)).max_abs() < 1e-14);
    }

    #[test]
    fn kolmogorov_rejects_indefinite() {
        let k = PDKernel::single(ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!(matches!(kolmogorov(&k, 1e-10), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn scalar_lift_examples() {
        let kf = kolmogorov(&PDKernel::single(ComplexMatrix::scalar(1.0)).unwrap(), 1e-10).unwrap();
        let one = [c64(1.0, 0.0)];
        assert_abs_diff_eq!(scalar_lift(&kf, 0, &one, 0, &one).unwrap().re, 1.0, epsilon = 1e-14);

        let kf = kolmogorov(&PDKernel::single(ones2()).unwrap(), 1e-10).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = [c64(h, 0.0), c64(-h, 0.0)];
        assert!(scalar_lift(&kf, 0, &a, 0, &a).unwrap().norm() < 1e-14);

        let kf = kolmogorov(&PDKernel::single(ComplexMatrix::identity(2)).unwrap(), 1e-10).unwrap();
        let e0 = [c64(1.0, 0.0), c64(0.0, 0.0)];
        let e1 = [c64(0.0, 0.0), c64(1.0, 0.0)];
        assert!(scalar_lift(&kf, 0, &e0, 0, &e1).unwrap().norm() < 1e-14);

        assert!(matches!(scalar_lift(&kf, 0, &one, 0, &e1), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn dominates_examples() {
        let k = PDKernel::single(ones2()).unwrap();
        let r = dominates(&k, &k, 1e-9).unwrap();
        assert!(r.is_psd);
        assert_abs_diff_eq!(r.min_eig, 0.0, epsilon = 1e-14);

        let i2 = PDKernel::single(ComplexMatrix::identity(2)).unwrap();
        let r = dominates(&i2, &i2.scale(0.5), 1e-9).unwrap();
        assert!(r.is_psd);
        assert_abs_diff_eq!(r.min_eig, 0.5, epsilon = 1e-14);

        let r = dominates(&k, &i2, 1e-9).unwrap();
        assert!(!r.is_psd);
        assert_abs_diff_eq!(r.min_eig, -1.0, epsilon = 1e-14);

        let other = PDKernel::single(ComplexMatrix::identity(3)).unwrap();
        assert!(matches!(dominates(&k, &other, 1e-9), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn kernel_json_shape() {
        let json = r#"{"points":["a",7],"fiber_dim":1,"blocks":[[[[[1,0]]],[[[0.5,0]]]],[[[[0.5,0]]],[[[1,0]]]]]}"#;
        let k: PDKernel = serde_json::from_str(json).unwrap();
        assert_eq!(k.points()[1].0, "7");
        assert_eq!(k.block(0, 1)[(0, 0)], c64(0.5, 0.0));
        let back: PDKernel = serde_json::from_str(&serde_json::to_string(&k).unwrap()).unwrap();
        assert_eq!(back, k);
    }
}
