//! Completely positive maps in Kraus form and the direct computation of
//! iterated kernels.
//!
//! Maps act in the Heisenberg picture, `Φ(T) = Σ_r A_r* T A_r`. For a word
//! `w = s_1 … s_n` the iterated kernel is `K_w = Φ_{s_1}∘…∘Φ_{s_n}(K)`:
//! `Φ_{s_n}` is applied first.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::PDKernel;
use crate::linalg::{self, kraus_sum};
use crate::matrix::ComplexMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CPMap {
    label: String,
    kraus: Vec<ComplexMatrix>,
}

impl CPMap {
    pub fn new(label: impl Into<String>, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let label = label.into();
        let Some(first) = kraus.first() else {
            return Err(Error::Invalid(format!("map `{label}` has an empty Kraus family")));
        };
        let d = first.rows();
        if kraus.iter().any(|a| a.rows() != d || a.cols() != d) {
            return Err(Error::dims(format!("Kraus operators of `{label}` must all be {d}x{d}")));
        }
        if kraus.iter().any(|a| !a.is_finite()) {
            return Err(Error::Invalid(format!("Kraus operators of `{label}` must be finite")));
        }
        Ok(Self { label, kraus })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].rows()
    }

    pub fn with_label(&self, label: impl Into<String>) -> Self {
        Self { label: label.into(), kraus: self.kraus.clone() }
    }

    /// `Φ(I) = Σ_r A_r* A_r`.
    pub fn unit_image(&self) -> ComplexMatrix {
        kraus_sum(&self.kraus, &ComplexMatrix::identity(self.dim()))
    }

    /// Row-major superoperator `Σ_r A_r* ⊗ A_rᵀ`, so that
    /// `vec(Φ(T)) = S · vec(T)` for row-major `vec`.
    pub fn superoperator(&self) -> ComplexMatrix {
        let d = self.dim();
        let mut s = ComplexMatrix::zeros(d * d, d * d);
        for a in &self.kraus {
            s = &s + &a.adjoint().kron(&a.transpose());
        }
        s
    }
}

/// Declared maps by label. Iteration order is the label order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MapSet {
    maps: BTreeMap<String, CPMap>,
}

#[derive(Serialize, Deserialize)]
struct RawMap {
    kraus: Vec<ComplexMatrix>,
}

impl Serialize for MapSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw: BTreeMap<&str, RawMap> =
            self.maps.iter().map(|(k, m)| (k.as_str(), RawMap { kraus: m.kraus.clone() })).collect();
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MapSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, RawMap>::deserialize(d)?;
        let mut set = MapSet::default();
        for (label, m) in raw {
            let map = CPMap::new(label, m.kraus).map_err(serde::de::Error::custom)?;
            set.insert(map);
        }
        Ok(set)
    }
}

impl MapSet {
    pub fn new(maps: impl IntoIterator<Item = CPMap>) -> Self {
        let mut set = Self::default();
        for m in maps {
            set.insert(m);
        }
        set
    }

    pub fn insert(&mut self, map: CPMap) {
        self.maps.insert(map.label.clone(), map);
    }

    pub fn get(&self, label: &str) -> Result<&CPMap> {
        self.maps.get(label).ok_or_else(|| Error::UnknownLabel(label.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &CPMap> {
        self.maps.values()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.maps.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn resolve<'a>(&'a self, w: &Word) -> Result<Vec<&'a CPMap>> {
        w.labels().iter().map(|s| self.get(s)).collect()
    }

    /// Largest cb norm over the declared maps.
    pub fn max_cb_norm(&self) -> f64 {
        self.iter().map(cb_norm).fold(0.0, f64::max)
    }
}

/// A word `s_1 … s_n` over map labels; may be empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<String>);

impl Word {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Self(labels.into_iter().map(Into::into).collect())
    }

    /// `s` repeated `n` times.
    pub fn power(s: &str, n: usize) -> Self {
        Self(vec![s.to_owned(); n])
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Concatenation `self · other`.
    pub fn concat(&self, other: &Word) -> Word {
        Word(self.0.iter().chain(&other.0).cloned().collect())
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().cloned().collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            write!(f, "∅")
        } else {
            write!(f, "{}", self.0.join("·"))
        }
    }
}

/// `Φ(T) = Σ_r A_r* T A_r`.
pub fn apply(phi: &CPMap, t: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = phi.dim();
    if t.rows() != d || t.cols() != d {
        return Err(Error::dims(format!("map `{}` acts on {d}x{d}, got {}x{}", phi.label, t.rows(), t.cols())));
    }
    Ok(kraus_sum(&phi.kraus, t))
}

/// Completely bounded norm, `‖Φ(I)‖` for a CP map.
pub fn cb_norm(phi: &CPMap) -> f64 {
    linalg::op_norm(&phi.unit_image())
}

/// `‖Φ(I) − I‖_op ≤ tol`.
pub fn is_unital(phi: &CPMap, tol: f64) -> bool {
    let defect = &phi.unit_image() - &ComplexMatrix::identity(phi.dim());
    linalg::op_norm(&defect) <= tol
}

/// `max eig(Φ(I) − I) ≤ tol`.
pub fn is_subunital(phi: &CPMap, tol: f64) -> bool {
    let defect = &phi.unit_image() - &ComplexMatrix::identity(phi.dim());
    linalg::hermitian_eigen(&defect).map(|e| e.max() <= tol).unwrap_or(false)
}

/// Applies a single map to every block of `k`.
pub fn apply_kernel(phi: &CPMap, k: &PDKernel) -> Result<PDKernel> {
    if phi.dim() != k.fiber_dim() {
        return Err(Error::dims(format!(
            "map `{}` has dimension {}, kernel fiber {}",
            phi.label,
            phi.dim(),
            k.fiber_dim()
        )));
    }
    Ok(k.map_blocks(|b| kraus_sum(&phi.kraus, b)))
}

/// `K_w = Φ_{s_1}∘…∘Φ_{s_n}(K)`, computed blockwise from the right.
pub fn iterate_kernel(k: &PDKernel, w: &Word, maps: &MapSet) -> Result<PDKernel> {
    let resolved = maps.resolve(w)?;
    let mut out = k.clone();
    for phi in resolved.into_iter().rev() {
        out = apply_kernel(phi, &out)?;
    }
    Ok(out)
}

/// One index string of the disjoint union over words, tagged with labels
/// so strings from different words never compare equal. Entries run from
/// the last letter of the word to the first, `(s_n, r_n), …, (s_1, r_1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct KrausTag(pub Vec<(String, usize)>);

#[derive(Debug, Clone)]
pub struct KrausString {
    pub tag: KrausTag,
    /// `A_{s_n,r_n} ··· A_{s_1,r_1}`.
    pub product: ComplexMatrix,
}

/// Number of Kraus strings of `w`, saturating.
pub fn kraus_string_count(w: &Word, maps: &MapSet) -> Result<usize> {
    Ok(maps.resolve(w)?.iter().fold(1usize, |acc, m| acc.saturating_mul(m.kraus.len())))
}

/// Enumerates every Kraus string of `w` with its operator product.
pub fn kraus_strings(w: &Word, maps: &MapSet, max_count: usize) -> Result<Vec<KrausString>> {
    let resolved = maps.resolve(w)?;
    let count = kraus_string_count(w, maps)?;
    if count > max_count {
        return Err(Error::TooManyStrings { count, max: max_count });
    }
    let d = match resolved.first() {
        Some(m) => m.dim(),
        None => {
            return Ok(vec![KrausString { tag: KrausTag(vec![]), product: ComplexMatrix::identity(0) }]);
        }
    };
    if resolved.iter().any(|m| m.dim() != d) {
        return Err(Error::dims("maps in a word must share one dimension"));
    }
    let mut out = vec![KrausString { tag: KrausTag(vec![]), product: ComplexMatrix::identity(d) }];
    for phi in resolved {
        let mut next = Vec::with_capacity(out.len() * phi.kraus.len());
        for s in &out {
            for (r, a) in phi.kraus.iter().enumerate() {
                let mut tag = Vec::with_capacity(s.tag.0.len() + 1);
                tag.push((phi.label.clone(), r));
                tag.extend(s.tag.0.iter().cloned());
                next.push(KrausString { tag: KrausTag(tag), product: a * &s.product });
            }
        }
        out = next;
    }
    Ok(out)
}

/// Kraus strings for `w` acting on fiber dimension `d` (needed when `w` is empty).
pub fn kraus_strings_in_dim(w: &Word, maps: &MapSet, d: usize, max_count: usize) -> Result<Vec<KrausString>> {
    let mut out = kraus_strings(w, maps, max_count)?;
    if w.is_empty() {
        out[0].product = ComplexMatrix::identity(d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn z() -> ComplexMatrix {
        ComplexMatrix::diag(&[1.0, -1.0])
    }

    fn dephasing() -> CPMap {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        CPMap::new("s", vec![ComplexMatrix::identity(2).scale_real(h), z().scale_real(h)]).unwrap()
    }

    fn half() -> CPMap {
        CPMap::new("s", vec![ComplexMatrix::scalar(std::f64::consts::FRAC_1_SQRT_2)]).unwrap()
    }

    #[test]
    fn apply_examples() {
        let out = apply(&half(), &ComplexMatrix::scalar(1.0)).unwrap();
        assert_abs_diff_eq!(out[(0, 0)].re, 0.5, epsilon = 1e-15);

        let ones = ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let out = apply(&dephasing(), &ones).unwrap();
        assert!((&out - &ComplexMatrix::identity(2)).max_abs() < 1e-15);

        let out = apply(&dephasing(), &ComplexMatrix::zeros(2, 2)).unwrap();
        assert_eq!(out.max_abs(), 0.0);

        assert!(matches!(apply(&dephasing(), &ComplexMatrix::identity(3)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn cb_norm_examples() {
        assert_abs_diff_eq!(cb_norm(&half()), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(cb_norm(&dephasing()), 1.0, epsilon = 1e-15);
        let m = CPMap::new("s", vec![ComplexMatrix::diag(&[1.0, 0.5])]).unwrap();
        assert_abs_diff_eq!(cb_norm(&m), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn unitality_examples() {
        assert!(is_unital(&dephasing(), 1e-12));
        let m = CPMap::new("s", vec![ComplexMatrix::diag(&[1.0, 0.5])]).unwrap();
        assert!(!is_unital(&m, 1e-12));
        assert!(is_subunital(&m, 1e-12));
        let big = CPMap::new("s", vec![ComplexMatrix::identity(2).scale_real(2f64.sqrt())]).unwrap();
        assert!(!is_subunital(&big, 1e-12));
    }

    #[test]
    fn iterate_examples() {
        let maps = MapSet::new([half()]);
        let k = PDKernel::single(ComplexMatrix::scalar(1.0)).unwrap();
        assert_eq!(iterate_kernel(&k, &Word::empty(), &maps).unwrap(), k);

        let k3 = iterate_kernel(&k, &Word::power("s", 3), &maps).unwrap();
        assert_abs_diff_eq!(k3.block(0, 0)[(0, 0)].re, 0.125, epsilon = 1e-15);

        let maps = MapSet::new([dephasing()]);
        let ones = PDKernel::single(ComplexMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]])).unwrap();
        let k1 = iterate_kernel(&ones, &Word::new(["s"]), &maps).unwrap();
        assert!((k1.block(0, 0) - &ComplexMatrix::identity(2)).max_abs() < 1e-15);

        assert!(matches!(iterate_kernel(&ones, &Word::new(["t"]), &maps), Err(Error::UnknownLabel(_))));
        let scalar_maps = MapSet::new([half()]);
        assert!(matches!(iterate_kernel(&ones, &Word::new(["s"]), &scalar_maps), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn kraus_string_examples() {
        let maps = MapSet::new([dephasing()]);
        let empty = kraus_strings_in_dim(&Word::empty(), &maps, 2, 10).unwrap();
        assert_eq!(empty.len(), 1);
        assert!(empty[0].tag.0.is_empty());
        assert_eq!(empty[0].product, ComplexMatrix::identity(2));

        let one = kraus_strings(&Word::new(["s"]), &maps, 10).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(&one[0].product, &dephasing().kraus()[0]);
        assert_eq!(&one[1].product, &dephasing().kraus()[1]);

        // (I/√2)(I/√2) = I/2, (Z/√2)(I/√2) = Z/2, (I/√2)(Z/√2) = Z/2, (Z/√2)(Z/√2) = I/2.
        let two = kraus_strings(&Word::new(["s", "s"]), &maps, 10).unwrap();
        assert_eq!(two.len(), 4);
        let half_i = ComplexMatrix::identity(2).scale_real(0.5);
        let half_z = z().scale_real(0.5);
        for s in &two {
            let is_i = (&s.product - &half_i).max_abs() < 1e-15;
            let is_z = (&s.product - &half_z).max_abs() < 1e-15;
            assert!(is_i ^ is_z);
            let parity = s.tag.0.iter().filter(|(_, r)| *r == 1).count() % 2;
            assert_eq!(is_z, parity == 1);
        }

        assert!(matches!(
            kraus_strings(&Word::power("s", 4), &maps, 15),
            Err(Error::TooManyStrings { count: 16, max: 15 })
        ));
    }

    #[test]
    fn tags_separate_words() {
        let maps = MapSet::new([dephasing(), dephasing().with_label("t")]);
        let s = kraus_strings(&Word::new(["s"]), &maps, 10).unwrap();
        let t = kraus_strings(&Word::new(["t"]), &maps, 10).unwrap();
        assert!(s.iter().all(|a| t.iter().all(|b| a.tag != b.tag)));
    }

    #[test]
    fn superoperator_matches_apply() {
        let phi = CPMap::new(
            "s",
            vec![
                ComplexMatrix::from_real(&[&[0.3, 0.1], &[-0.2, 0.5]]),
                ComplexMatrix::from_real(&[&[0.0, 0.7], &[0.4, 0.0]]),
            ],
        )
        .unwrap();
        let t = ComplexMatrix::from_real(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let direct = apply(&phi, &t).unwrap();
        let via = phi.superoperator().mul_vec(t.as_slice());
        let via = ComplexMatrix::new(2, 2, via).unwrap();
        assert!((&direct - &via).max_abs() < 1e-14);
    }

    #[test]
    fn maps_json_shape() {
        let json = r#"{"s":{"kraus":[[[[0.5,0]]]]}}"#;
        let maps: MapSet = serde_json::from_str(json).unwrap();
        assert_eq!(maps.get("s").unwrap().dim(), 1);
        assert!(serde_json::from_str::<MapSet>(r#"{"s":{"kraus":[]}}"#).is_err());
    }
}
