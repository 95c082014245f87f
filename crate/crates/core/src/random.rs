//! Seeded random instances: kernels with controlled rank, CP maps of
//! several kinds, words and test vectors.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channels::{CPMap, MapSet, Word};
use crate::kernels::PDKernel;
use crate::linalg;
use crate::matrix::{c64, ComplexMatrix, C64};

/// Smallest Gram eigenvalue of a full-rank random kernel.
pub const FULL_RANK_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Gram minimum eigenvalue at least [`FULL_RANK_FLOOR`].
    FullRank,
    /// Gram of rank strictly below `n·d` (minimum eigenvalue 0).
    RankDeficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// Gaussian Kraus family rescaled to a random cb norm in `[0.3, 1.5]`.
    General,
    /// `Φ(I) ≤ I`, cb norm in `[0.5, 1]`.
    Subunital,
    /// `Φ(I) = I`.
    Unital,
    /// Diagonal Kraus operators with `Φ(I) = I`.
    DiagonalUnital,
}

pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let data = (0..rows * cols).map(|_| complex_normal(rng)).collect();
    ComplexMatrix::new(rows, cols, data).expect("finite gaussian entries")
}

pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<C64> {
    (0..len).map(|_| complex_normal(rng)).collect()
}

/// Random PSD Gram of size `nd` built as `B*B`.
pub fn random_gram<R: Rng + ?Sized>(rng: &mut R, nd: usize, kind: KernelKind) -> ComplexMatrix {
    match kind {
        KernelKind::FullRank => {
            let b = gaussian_matrix(rng, nd, nd);
            let g = (&b.adjoint() * &b).scale_real(1.0 / nd.max(1) as f64);
            (&g + &ComplexMatrix::identity(nd).scale_real(FULL_RANK_FLOOR)).hermitian_part()
        }
        KernelKind::RankDeficient => {
            let r = if nd <= 1 { 0 } else { rng.gen_range(1..nd) };
            let b = gaussian_matrix(rng, r, nd);
            (&b.adjoint() * &b).hermitian_part()
        }
    }
}

/// Kernel on points `0..n` with fiber `C^d`. Rank-deficient kernels on a
/// single scalar point are the zero kernel.
pub fn random_kernel<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, kind: KernelKind) -> PDKernel {
    PDKernel::from_gram(n, d, &random_gram(rng, n * d, kind)).expect("consistent shape")
}

fn inverse_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    linalg::hermitian_eigen(m).expect("Hermitian unit image").map_values(|v| 1.0 / v.max(1e-300).sqrt())
}

pub fn random_map<R: Rng + ?Sized>(rng: &mut R, label: &str, d: usize, kraus_count: usize, kind: MapKind) -> CPMap {
    let count = kraus_count.max(1);
    let mut kraus: Vec<ComplexMatrix> = match kind {
        MapKind::DiagonalUnital => {
            let mut weights: Vec<Vec<f64>> =
                (0..count).map(|_| (0..d).map(|_| rng.gen_range(0.05..1.0)).collect()).collect();
            for i in 0..d {
                let total: f64 = weights.iter().map(|w| w[i]).sum();
                for w in &mut weights {
                    w[i] /= total;
                }
            }
            weights
                .into_iter()
                .map(|w| {
                    let mut a = ComplexMatrix::zeros(d, d);
                    for (i, p) in w.into_iter().enumerate() {
                        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                        a[(i, i)] = C64::from_polar(p.sqrt(), phase);
                    }
                    a
                })
                .collect()
        }
        _ => (0..count).map(|_| gaussian_matrix(rng, d, d)).collect(),
    };
    let unit = crate::linalg::kraus_sum(&kraus, &ComplexMatrix::identity(d));
    match kind {
        MapKind::General | MapKind::Subunital => {
            let target = if kind == MapKind::General { rng.gen_range(0.3..1.5) } else { rng.gen_range(0.5..1.0) };
            let s = (target / linalg::op_norm(&unit)).sqrt();
            kraus = kraus.into_iter().map(|a| a.scale_real(s)).collect();
        }
        MapKind::Unital => {
            let r = inverse_sqrt(&unit);
            kraus = kraus.into_iter().map(|a| &a * &r).collect();
        }
        MapKind::DiagonalUnital => {}
    }
    CPMap::new(label, kraus).expect("well-formed Kraus family")
}

/// Maps labelled `s0, s1, …`, each with a random Kraus count in `1..=max_kraus`.
pub fn random_maps<R: Rng + ?Sized>(rng: &mut R, labels: usize, d: usize, max_kraus: usize, kind: MapKind) -> MapSet {
    MapSet::new((0..labels).map(|i| {
        let r = rng.gen_range(1..=max_kraus.max(1));
        random_map(rng, &format!("s{i}"), d, r, kind)
    }))
}

/// Uniform word of length `len` over the labels of `maps`.
pub fn random_word<R: Rng + ?Sized>(rng: &mut R, maps: &MapSet, len: usize) -> Word {
    let labels: Vec<&str> = maps.labels().collect();
    Word::new((0..len).map(|_| labels[rng.gen_range(0..labels.len())]))
}

/// All words over the labels of `maps` with length at most `max_len`.
pub fn all_words(maps: &MapSet, max_len: usize) -> Vec<Word> {
    let labels: Vec<String> = maps.labels().map(str::to_owned).collect();
    let mut out = vec![Word::empty()];
    let mut layer = vec![Word::empty()];
    for _ in 0..max_len {
        layer = layer.iter().flat_map(|w| labels.iter().map(move |l| w.concat(&Word::new([l.clone()])))).collect();
        out.extend(layer.iter().cloned());
    }
    out
}
