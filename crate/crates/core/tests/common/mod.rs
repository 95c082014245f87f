//! Test-side oracle and instance corpora shared by the integration tests.
//! The oracle works on nalgebra matrices only and does not call into the
//! crate's own matrix arithmetic.
#![allow(dead_code)]

use std::collections::BTreeMap;

use cpkernel::channels::{MapSet, Word};
use cpkernel::random::{self, KernelKind, MapKind};
use cpkernel::randomdyn::sub_seed;
use cpkernel::{ComplexMatrix, PDKernel, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type M = DMatrix<C64>;

pub fn to_na(m: &ComplexMatrix) -> M {
    M::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn real_diag(values: &[f64]) -> M {
    M::from_diagonal(&nalgebra::DVector::from_iterator(values.len(), values.iter().map(|v| C64::new(*v, 0.0))))
}

pub fn op_norm(m: &M) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn min_eig(m: &M) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigen().eigenvalues.min()
}

/// Blocks `K(x,y)` of a kernel as nalgebra matrices.
pub fn blocks(k: &PDKernel) -> Vec<Vec<M>> {
    (0..k.n()).map(|i| (0..k.n()).map(|j| to_na(k.block(i, j))).collect()).collect()
}

pub fn kraus_of(maps: &MapSet) -> BTreeMap<String, Vec<M>> {
    maps.iter().map(|m| (m.label().to_owned(), m.kraus().iter().map(to_na).collect())).collect()
}

/// `Σ_i A_i* T A_i`.
pub fn apply(kraus: &[M], t: &M) -> M {
    kraus.iter().fold(M::zeros(t.nrows(), t.ncols()), |acc, a| acc + a.adjoint() * t * a)
}

/// `K_w` blockwise with the last letter applied first.
pub fn iterate(k: &[Vec<M>], w: &Word, kraus: &BTreeMap<String, Vec<M>>) -> Vec<Vec<M>> {
    let mut out = k.to_vec();
    for label in w.labels().iter().rev() {
        let ks = &kraus[label];
        out = out.iter().map(|row| row.iter().map(|b| apply(ks, b)).collect()).collect();
    }
    out
}

pub fn assemble(blocks: &[Vec<M>]) -> M {
    let n = blocks.len();
    let d = blocks[0][0].nrows();
    let mut g = M::zeros(n * d, n * d);
    for (i, row) in blocks.iter().enumerate() {
        for (j, b) in row.iter().enumerate() {
            g.view_mut((i * d, j * d), (d, d)).copy_from(b);
        }
    }
    g
}

/// `⟨a, T b⟩`, conjugate-linear in `a`.
pub fn form(a: &[C64], t: &M, b: &[C64]) -> C64 {
    let tb = t * nalgebra::DVector::from_column_slice(b);
    a.iter().zip(tb.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn max_block_gap(a: &[Vec<M>], b: &PDKernel) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in a.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            worst = worst.max(op_norm(&(m - to_na(b.block(i, j)))));
        }
    }
    worst
}

pub struct Instance {
    pub seed: u64,
    pub k: PDKernel,
    pub maps: MapSet,
    pub kind: KernelKind,
}

/// One random instance: `n ≤ 3` points, fiber `d ≤ 3`, up to three labels
/// with up to three Kraus operators each.
pub fn instance(seed: u64, kind: KernelKind, map_kind: MapKind) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=3);
    let d = rng.gen_range(1..=3);
    let kind = if kind == KernelKind::RankDeficient && n * d < 2 { KernelKind::FullRank } else { kind };
    let labels = rng.gen_range(1..=3);
    let k = random::random_kernel(&mut rng, n, d, kind);
    let maps = random::random_maps(&mut rng, labels, d, 3, map_kind);
    Instance { seed, k, maps, kind }
}

pub fn corpus(base: u64, count: usize, kind_of: impl Fn(usize) -> KernelKind, map_kind: MapKind) -> Vec<Instance> {
    (0..count).map(|i| instance(sub_seed(base, i as u64), kind_of(i), map_kind)).collect()
}

/// 200 full-rank instances with general CP maps.
pub fn full_rank_corpus() -> Vec<Instance> {
    corpus(0xA11CE, 200, |_| KernelKind::FullRank, MapKind::General)
}

/// 100 instances, every other one with a rank-deficient Gram.
pub fn mixed_rank_corpus() -> Vec<Instance> {
    corpus(0xB0B, 100, |i| if i % 2 == 0 { KernelKind::RankDeficient } else { KernelKind::FullRank }, MapKind::General)
}

pub fn gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
    random::gaussian_vector(rng, len)
}

pub fn from_na(m: &M) -> ComplexMatrix {
    ComplexMatrix::new(m.nrows(), m.ncols(), m.transpose().as_slice().to_vec()).expect("shape")
}

/// `V · diag(f(λ)) · V*` for Hermitian `m`.
pub fn spectral_map(m: &M, f: impl Fn(f64) -> f64) -> M {
    let e = ((m + m.adjoint()) * C64::new(0.5, 0.0)).symmetric_eigen();
    let d = M::from_diagonal(&e.eigenvalues.map(|v| C64::new(f(v), 0.0)));
    &e.eigenvectors * d * e.eigenvectors.adjoint()
}

/// Random Hermitian `C` with spectrum in `[0, top]`.
pub fn random_contraction(rng: &mut ChaCha8Rng, m: usize, top: f64) -> M {
    let b = to_na(&random::gaussian_matrix(rng, m, m));
    let h = b.adjoint() * &b;
    let s = top / op_norm(&h).max(1e-300);
    h * C64::new(s, 0.0)
}
