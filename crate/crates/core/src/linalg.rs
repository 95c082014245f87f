//! Certified dense primitives: Hermitian eigendecomposition, PSD tests,
//! PSD square roots, Moore–Penrose pseudo-inverses and operator norms.
//!
//! Factorizations are delegated to `nalgebra`; every result is checked
//! against a residual contract before it is returned.

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

/// Default relative singular-value cutoff for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Default relative tolerance for PSD decisions.
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

const UNITARITY_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Columns are the eigenvectors matching `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `V · diag(f(λ)) · V*`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        &scaled * &self.vectors.adjoint()
    }
}

fn require_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::dims(format!("{what} needs a square matrix, got {}x{}", m.rows(), m.cols())))
    }
}

/// Eigendecomposition of the Hermitian part `(M + M*)/2`.
pub fn hermitian_eigen(m: &ComplexMatrix) -> Result<HermitianEigen> {
    require_square(m, "hermitian_eigen")?;
    let n = m.rows();
    if n == 0 {
        return Ok(HermitianEigen { values: vec![], vectors: ComplexMatrix::zeros(0, 0) });
    }
    if !m.is_finite() {
        return Err(Error::Numerical("non-finite entries".into()));
    }
    let h = m.hermitian_part();
    let eig = h.to_nalgebra().symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, j)] = eig.eigenvectors[(i, k)];
        }
    }
    let out = HermitianEigen { values, vectors };

    let gram = &out.vectors.adjoint() * &out.vectors;
    let unitarity = (&gram - &ComplexMatrix::identity(n)).max_abs();
    if unitarity > UNITARITY_TOL {
        return Err(Error::Numerical(format!("eigenvectors not unitary ({unitarity:e})")));
    }
    // Frobenius bounds the operator norm of the residual from above.
    let residual = (&h - &out.map_values(|x| x)).frobenius();
    let scale = out.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    if residual > RESIDUAL_TOL * scale {
        return Err(Error::Numerical(format!("eigen residual {residual:e} too large")));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdCheck {
    pub is_psd: bool,
    pub min_eig: f64,
}

/// `is_psd ⇔ min_eig ≥ −tol·max(1, ‖M‖_op)` on the Hermitian part of `m`.
pub fn psd_check(m: &ComplexMatrix, tol: f64) -> Result<PsdCheck> {
    let eig = hermitian_eigen(m)?;
    let norm = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min_eig = eig.min();
    Ok(PsdCheck { is_psd: min_eig >= -tol * norm.max(1.0), min_eig })
}

/// Hermitian PSD square root; eigenvalues inside the PSD tolerance are clamped to zero.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eigen(m)?;
    let norm = eig.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if eig.min() < -DEFAULT_PSD_TOL * norm.max(1.0) {
        return Err(Error::NotPsd { min_eig: eig.min() });
    }
    Ok(eig.map_values(|x| x.max(0.0).sqrt()))
}

/// Largest singular value.
pub fn op_norm(m: &ComplexMatrix) -> f64 {
    if m.rows() == 0 || m.cols() == 0 {
        return 0.0;
    }
    m.to_nalgebra().singular_values().iter().fold(0.0, |a, &s| a.max(s))
}

/// Operator norm of a Hermitian matrix via its spectrum.
pub fn hermitian_norm(m: &ComplexMatrix) -> Result<f64> {
    let eig = hermitian_eigen(m)?;
    Ok(eig.min().abs().max(eig.max().abs()))
}

#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pub matrix: ComplexMatrix,
    pub rank: usize,
}

/// Moore–Penrose pseudo-inverse; singular values `≤ rank_tol·σ_max` are treated as zero.
///
/// Singular triples come from the Hermitian eigendecomposition of
/// `[[0, M], [M*, 0]]`, whose eigenpairs are `±σ` with vectors `(u, ±v)/√2`.
/// nalgebra's complex SVD with vectors occasionally returns factors that do
/// not reconstruct exactly rank-deficient inputs.
pub fn pinv(m: &ComplexMatrix, rank_tol: f64) -> PseudoInverse {
    let (r, c) = (m.rows(), m.cols());
    if r == 0 || c == 0 {
        return PseudoInverse { matrix: ComplexMatrix::zeros(c, r), rank: 0 };
    }
    let mut j = ComplexMatrix::zeros(r + c, r + c);
    j.set_block(0, r, m);
    j.set_block(r, 0, &m.adjoint());
    let eig = j.to_nalgebra().symmetric_eigen();
    let smax = eig.eigenvalues.iter().fold(0.0f64, |a, &s| a.max(s));
    if smax == 0.0 || !smax.is_finite() {
        return PseudoInverse { matrix: ComplexMatrix::zeros(c, r), rank: 0 };
    }
    let cutoff = rank_tol * smax;
    let z = ComplexMatrix::from_nalgebra(&eig.eigenvectors);
    let mut out = ComplexMatrix::zeros(c, r);
    let mut rank = 0;
    for (k, &s) in eig.eigenvalues.iter().enumerate() {
        if s <= cutoff {
            continue;
        }
        rank += 1;
        // (u/√2, v/√2) with M v = σ u contributes v u* / σ
        let scale = 2.0 / s;
        for a in 0..c {
            let va = z[(r + a, k)] * scale;
            for b in 0..r {
                out[(a, b)] += va * z[(b, k)].conj();
            }
        }
    }
    PseudoInverse { matrix: out, rank }
}

/// Largest residual among the four Moore–Penrose identities, in operator norm.
pub fn moore_penrose_residual(m: &ComplexMatrix, p: &ComplexMatrix) -> f64 {
    let mp = m * p;
    let pm = p * m;
    [
        op_norm(&(&(&mp * m) - m)),
        op_norm(&(&(&pm * p) - p)),
        op_norm(&(&mp - &mp.adjoint())),
        op_norm(&(&pm - &pm.adjoint())),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// `Σ_r A_r* T A_r`, the common Kraus-form conjugation.
pub(crate) fn kraus_sum(ops: &[ComplexMatrix], t: &ComplexMatrix) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(ops[0].cols(), ops[0].cols());
    for a in ops {
        acc = &acc + &a.conjugate(t);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::c64;
    use approx::assert_abs_diff_eq;

    /// Roots of λ² − tr·λ + det for a real symmetric 2×2 matrix.
    fn char_poly_roots(m: [[f64; 2]; 2]) -> (f64, f64) {
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (tr * tr - 4.0 * det).sqrt();
        ((tr - disc) / 2.0, (tr + disc) / 2.0)
    }

    #[test]
    fn eigen_examples() {
        let e = hermitian_eigen(&ComplexMatrix::identity(2)).unwrap();
        assert_eq!(e.values, vec![1.0, 1.0]);

        let (lo, hi) = char_poly_roots([[0.0, 1.0], [1.0, 0.0]]);
        let e = hermitian_eigen(&ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_abs_diff_eq!(e.values[0], lo, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], hi, epsilon = 1e-14);

        let e = hermitian_eigen(&ComplexMatrix::diag(&[3.0, -2.0, 5.0])).unwrap();
        assert_eq!(e.values, vec![-2.0, 3.0, 5.0]);
    }

    #[test]
    fn eigen_rejects_rectangular() {
        assert!(matches!(hermitian_eigen(&ComplexMatrix::zeros(2, 3)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn eigen_symmetrizes_complex_input() {
        let m = ComplexMatrix::from_rows(vec![vec![c64(2.0, 0.0), c64(0.0, -1.0)], vec![c64(0.0, 1.0), c64(2.0, 0.0)]])
            .unwrap();
        let e = hermitian_eigen(&m).unwrap();
        let (lo, hi) = (1.0, 3.0); // 2 ± |i|
        assert_abs_diff_eq!(e.values[0], lo, epsilon = 1e-13);
        assert_abs_diff_eq!(e.values[1], hi, epsilon = 1e-13);
    }

    #[test]
    fn psd_examples() {
        let r = psd_check(&ComplexMatrix::identity(2), 1e-9).unwrap();
        assert!(r.is_psd);
        assert_abs_diff_eq!(r.min_eig, 1.0, epsilon = 1e-14);

        let r = psd_check(&ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]), 1e-9).unwrap();
        assert!(!r.is_psd);
        assert_abs_diff_eq!(r.min_eig, -1.0, epsilon = 1e-14);

        let r = psd_check(&ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]]), 1e-9).unwrap();
        assert!(r.is_psd);
        assert_abs_diff_eq!(r.min_eig, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_examples() {
        let s = psd_sqrt(&ComplexMatrix::identity(2)).unwrap();
        assert!((&s - &ComplexMatrix::identity(2)).max_abs() < 1e-14);

        let s = psd_sqrt(&ComplexMatrix::diag(&[4.0, 9.0])).unwrap();
        assert!((&s - &ComplexMatrix::diag(&[2.0, 3.0])).max_abs() < 1e-14);

        // P = [[1,1],[1,1]] satisfies P² = 2P, so (P/√2)² = P.
        let p = ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let s = psd_sqrt(&p).unwrap();
        assert!((&s - &p.scale_real(std::f64::consts::FRAC_1_SQRT_2)).max_abs() < 1e-14);

        assert!(matches!(psd_sqrt(&ComplexMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]])), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn pinv_examples() {
        let p = pinv(&ComplexMatrix::identity(3), DEFAULT_RANK_TOL);
        assert_eq!(p.rank, 3);
        assert!((&p.matrix - &ComplexMatrix::identity(3)).max_abs() < 1e-14);

        let p = pinv(&ComplexMatrix::diag(&[2.0, 0.0]), DEFAULT_RANK_TOL);
        assert_eq!(p.rank, 1);
        assert!((&p.matrix - &ComplexMatrix::diag(&[0.5, 0.0])).max_abs() < 1e-14);

        // Row (1,1): X = (x,x)ᵀ with (1,1)X = 1 and XM symmetric gives x = ½.
        let row = ComplexMatrix::from_real(&[&[1.0, 1.0]]);
        let p = pinv(&row, DEFAULT_RANK_TOL);
        assert_eq!(p.rank, 1);
        assert!((&p.matrix - &ComplexMatrix::from_real(&[&[0.5], &[0.5]])).max_abs() < 1e-14);
        assert!(moore_penrose_residual(&row, &p.matrix) < 1e-14);
    }

    #[test]
    fn pinv_of_exactly_rank_deficient_product() {
        use rand::SeedableRng;
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(14437552829453311020);
        let m = &crate::random::gaussian_matrix(&mut r, 6, 2) * &crate::random::gaussian_matrix(&mut r, 2, 5);
        let p = pinv(&m, DEFAULT_RANK_TOL);
        assert_eq!(p.rank, 2);
        assert!(moore_penrose_residual(&m, &p.matrix) < 1e-12);
    }

    #[test]
    fn pinv_of_zero() {
        let p = pinv(&ComplexMatrix::zeros(2, 3), DEFAULT_RANK_TOL);
        assert_eq!(p.rank, 0);
        assert_eq!(p.matrix, ComplexMatrix::zeros(3, 2));
    }

    #[test]
    fn op_norm_examples() {
        assert_abs_diff_eq!(op_norm(&ComplexMatrix::identity(2)), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(op_norm(&ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]])), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(op_norm(&ComplexMatrix::diag(&[1.0, 0.5])), 1.0, epsilon = 1e-14);
    }
}
