//! Records on the Boolean cube `{-1,+1}^p`, Walsh functions and marginals.
//!
//! Coordinates are zero based throughout: a [`WalshIndex`] over dimension `p`
//! holds indices in `0..p`. Fourier data uses the unnormalized convention
//! `b_J = (1/n) Σ_i w_J(x_i)`, so the empty-set coefficient of any dataset is
//! exactly one and every coefficient lies in `[-1, 1]`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// A point of `{-1,+1}^p`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CubePoint(Vec<i8>);

impl CubePoint {
    pub fn new(coords: Vec<i8>) -> Result<Self> {
        if let Some(pos) = coords.iter().position(|&c| c != 1 && c != -1) {
            return Err(Error::input(format!(
                "coordinate {pos} is {}, expected -1 or +1",
                coords[pos]
            )));
        }
        Ok(CubePoint(coords))
    }

    /// Bit `1` maps to `+1` and bit `0` to `-1`.
    pub fn from_bits(bits: &[bool]) -> Self {
        CubePoint(bits.iter().map(|&b| if b { 1 } else { -1 }).collect())
    }

    pub fn to_bits(&self) -> Vec<bool> {
        self.0.iter().map(|&c| c > 0).collect()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i8] {
        &self.0
    }

    pub fn coord(&self, j: usize) -> i8 {
        self.0[j]
    }

    /// The antipodal point (every sign flipped).
    pub fn flipped(&self) -> Self {
        CubePoint(self.0.iter().map(|&c| -c).collect())
    }

    /// Position of this point in the `2^p` enumeration where coordinate `j`
    /// contributes bit `j` when it is `+1`. Only meaningful for `p < 64`.
    pub fn cube_rank(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .fold(0usize, |acc, (j, _)| acc | (1 << j))
    }

    pub fn from_cube_rank(rank: usize, p: usize) -> Self {
        CubePoint((0..p).map(|j| if rank >> j & 1 == 1 { 1 } else { -1 }).collect())
    }
}

/// An ordered sequence of cube points sharing one dimension. Duplicates are allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    dim: usize,
    rows: Vec<CubePoint>,
}

impl Dataset {
    pub fn new(dim: usize, rows: Vec<CubePoint>) -> Result<Self> {
        if let Some(i) = rows.iter().position(|r| r.dim() != dim) {
            return Err(Error::input(format!(
                "row {i} has dimension {}, expected {dim}",
                rows[i].dim()
            )));
        }
        Ok(Dataset { dim, rows })
    }

    /// Infers the dimension from the first row.
    pub fn from_rows(rows: Vec<CubePoint>) -> Result<Self> {
        let dim = rows
            .first()
            .map(CubePoint::dim)
            .ok_or_else(|| Error::input("dataset has no rows"))?;
        Dataset::new(dim, rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[CubePoint] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &CubePoint {
        &self.rows[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CubePoint> {
        self.rows.iter()
    }

    pub fn push(&mut self, point: CubePoint) -> Result<()> {
        if point.dim() != self.dim {
            return Err(Error::input(format!(
                "point has dimension {}, dataset has {}",
                point.dim(),
                self.dim
            )));
        }
        self.rows.push(point);
        Ok(())
    }

    /// A copy with `point` appended at the end.
    pub fn with_appended(&self, point: CubePoint) -> Result<Self> {
        let mut out = self.clone();
        out.push(point)?;
        Ok(out)
    }

    pub fn into_rows(self) -> Vec<CubePoint> {
        self.rows
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a CubePoint;
    type IntoIter = std::slice::Iter<'a, CubePoint>;

    fn into_iter(self) -> Self::IntoIter {
        self.rows.iter()
    }
}

/// A subset `J` of coordinates, kept sorted and duplicate free.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct WalshIndex(Vec<usize>);

impl WalshIndex {
    /// Builds an index from strictly increasing coordinates.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(format!(
                "Walsh index {indices:?} is not strictly increasing"
            )));
        }
        Ok(WalshIndex(indices))
    }

    pub fn empty() -> Self {
        WalshIndex(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_dim(&self, p: usize) -> Result<()> {
        match self.0.last() {
            Some(&j) if j >= p => Err(Error::config(format!(
                "Walsh index {self} has coordinate {j} outside 0..{p}"
            ))),
            _ => Ok(()),
        }
    }

    /// `J Δ K`, the index of the product `w_J · w_K`.
    pub fn symmetric_difference(&self, other: &WalshIndex) -> WalshIndex {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        WalshIndex(out)
    }

    /// The sub-index picked out by the bits of `mask` (bit `t` selects the `t`-th element).
    fn submask(&self, mask: usize) -> WalshIndex {
        WalshIndex(
            self.0
                .iter()
                .enumerate()
                .filter(|(t, _)| mask >> t & 1 == 1)
                .map(|(_, &j)| j)
                .collect(),
        )
    }

    /// `w_J(x)` without bounds checking against the point's dimension.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &CubePoint) -> i8 {
        self.0.iter().fold(1i8, |acc, &j| acc * x.0[j])
    }
}

impl fmt::Display for WalshIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (t, j) in self.0.iter().enumerate() {
            if t > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

/// `w_J(x) = Π_{j∈J} x(j)`, with `w_∅ = 1`.
pub fn walsh_eval(index: &WalshIndex, x: &CubePoint) -> Result<i8> {
    index.check_dim(x.dim())?;
    Ok(index.eval_unchecked(x))
}

/// `C(p, ≤d) = Σ_{i=0}^{d} C(p, i)`.
pub fn low_degree_count(p: usize, d: usize) -> usize {
    let d = d.min(p);
    let mut total = 0usize;
    let mut term = 1usize; // C(p, 0)
    for i in 0..=d {
        total = total.saturating_add(term);
        // C(p, i+1) = C(p, i) * (p - i) / (i + 1), exact at every step
        term = term
            .checked_mul(p - i)
            .map(|t| t / (i + 1))
            .unwrap_or(usize::MAX);
    }
    total
}

/// All subsets of `0..p` of size at most `d`, ordered by size and then lexicographically.
pub fn enumerate_low_degree(p: usize, d: usize) -> Result<Vec<WalshIndex>> {
    if d > p {
        return Err(Error::config(format!("degree {d} exceeds dimension {p}")));
    }
    let mut out = Vec::with_capacity(low_degree_count(p, d));
    for size in 0..=d {
        let mut comb: Vec<usize> = (0..size).collect();
        loop {
            out.push(WalshIndex(comb.clone()));
            // advance to the next combination in lexicographic order
            let mut t = size;
            while t > 0 && comb[t - 1] == p - size + t - 1 {
                t -= 1;
            }
            if t == 0 {
                break;
            }
            comb[t - 1] += 1;
            for s in t..size {
                comb[s] = comb[s - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// The canonical low-degree Walsh basis `{w_J : |J| ≤ d}` over dimension `p`,
/// with a reverse lookup from index to column position.
#[derive(Debug, PartialEq, Eq)]
pub struct LowDegreeBasis {
    dim: usize,
    degree: usize,
    indices: Vec<WalshIndex>,
    positions: HashMap<WalshIndex, usize>,
}

impl LowDegreeBasis {
    pub fn new(p: usize, d: usize) -> Result<Self> {
        let indices = enumerate_low_degree(p, d)?;
        let positions = indices
            .iter()
            .enumerate()
            .map(|(i, j)| (j.clone(), i))
            .collect();
        Ok(LowDegreeBasis {
            dim: p,
            degree: d,
            indices,
            positions,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[WalshIndex] {
        &self.indices
    }

    pub fn position(&self, index: &WalshIndex) -> Option<usize> {
        self.positions.get(index).copied()
    }

    /// Row of Walsh values `(w_J(x))_J` in basis order.
    pub fn evaluate(&self, x: &CubePoint) -> Vec<i8> {
        self.indices.iter().map(|j| j.eval_unchecked(x)).collect()
    }
}

/// A marginal query: the fraction of records whose coordinates in `subset`
/// carry the given signs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MarginalQuery {
    subset: WalshIndex,
    signs: Vec<i8>,
}

impl MarginalQuery {
    pub fn new(subset: WalshIndex, signs: Vec<i8>) -> Result<Self> {
        if signs.len() != subset.degree() {
            return Err(Error::config(format!(
                "query on {subset} needs {} signs, got {}",
                subset.degree(),
                signs.len()
            )));
        }
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::config("query signs must be -1 or +1"));
        }
        Ok(MarginalQuery { subset, signs })
    }

    pub fn subset(&self) -> &WalshIndex {
        &self.subset
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn dimension(&self) -> usize {
        self.subset.degree()
    }

    /// The `2^|J|` sign patterns over `subset`. Pattern `r` sets sign `t` to `+1`
    /// when bit `t` of `r` is clear.
    pub fn all_patterns(subset: &WalshIndex) -> impl Iterator<Item = MarginalQuery> + '_ {
        let k = subset.degree();
        (0..1usize << k).map(move |r| MarginalQuery {
            subset: subset.clone(),
            signs: (0..k).map(|t| if r >> t & 1 == 1 { -1 } else { 1 }).collect(),
        })
    }

    pub fn matches(&self, x: &CubePoint) -> bool {
        self.subset
            .indices()
            .iter()
            .zip(&self.signs)
            .all(|(&j, &s)| x.coord(j) == s)
    }
}

impl fmt::Display for MarginalQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .subset
            .indices()
            .iter()
            .zip(&self.signs)
            .map(|(j, s)| format!("x{j}={}", if *s > 0 { "+1" } else { "-1" }))
            .collect();
        if parts.is_empty() {
            write!(f, "(total)")
        } else {
            write!(f, "{}", parts.join(","))
        }
    }
}

/// Degree-`≤d` Fourier data, one coefficient per element of a [`LowDegreeBasis`].
#[derive(Clone, Debug, PartialEq)]
pub struct FourierVector {
    basis: Arc<LowDegreeBasis>,
    coeffs: Vec<f64>,
}

impl FourierVector {
    pub fn new(basis: Arc<LowDegreeBasis>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.len() {
            return Err(Error::config(format!(
                "{} coefficients for a basis of size {}",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(FourierVector { basis, coeffs })
    }

    pub fn basis(&self) -> &Arc<LowDegreeBasis> {
        &self.basis
    }

    pub fn degree_bound(&self) -> usize {
        self.basis.degree()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeff(&self, index: &WalshIndex) -> Option<f64> {
        self.basis.position(index).map(|i| self.coeffs[i])
    }
}

/// `b_J = (1/n) Σ_i w_J(x_i)` for every `|J| ≤ d`.
pub fn fourier_of_dataset(data: &Dataset, d: usize) -> Result<FourierVector> {
    let basis = Arc::new(LowDegreeBasis::new(data.dim(), d)?);
    fourier_in_basis(data, basis)
}

/// [`fourier_of_dataset`] in an existing basis, so vectors share one `Arc`.
pub fn fourier_in_basis(data: &Dataset, basis: Arc<LowDegreeBasis>) -> Result<FourierVector> {
    if data.is_empty() {
        return Err(Error::input("cannot take Fourier data of an empty dataset"));
    }
    if data.dim() != basis.dim() {
        return Err(Error::input(format!(
            "dataset dimension {} does not match basis dimension {}",
            data.dim(),
            basis.dim()
        )));
    }
    // integer sums are exact; divide once at the end
    let mut sums = vec![0i64; basis.len()];
    for x in data {
        for (s, j) in sums.iter_mut().zip(basis.indices()) {
            *s += j.eval_unchecked(x) as i64;
        }
    }
    let n = data.len() as f64;
    let coeffs = sums.into_iter().map(|s| s as f64 / n).collect();
    FourierVector::new(basis, coeffs)
}

/// Fraction of rows matching every sign of `query`.
pub fn marginal_value(data: &Dataset, query: &MarginalQuery) -> Result<f64> {
    query.subset().check_dim(data.dim())?;
    if data.is_empty() {
        return Err(Error::input("marginal of an empty dataset"));
    }
    let hits = data.iter().filter(|x| query.matches(x)).count();
    Ok(hits as f64 / data.len() as f64)
}

/// The marginal recovered from Fourier data:
/// `2^{-|J|} Σ_{K⊆J} (Π_{j∈K} s_j) b_K`.
pub fn marginal_from_fourier(b: &FourierVector, query: &MarginalQuery) -> Result<f64> {
    let subset = query.subset();
    if subset.degree() > b.degree_bound() {
        return Err(Error::input(format!(
            "query of dimension {} exceeds the degree bound {}",
            subset.degree(),
            b.degree_bound()
        )));
    }
    subset.check_dim(b.basis().dim())?;
    let k = subset.degree();
    let mut total = 0.0;
    for mask in 0..1usize << k {
        let sign: i8 = (0..k)
            .filter(|t| mask >> t & 1 == 1)
            .map(|t| query.signs()[t])
            .product();
        let sub = subset.submask(mask);
        let coeff = b
            .coeff(&sub)
            .expect("every subset of a low-degree index is in the basis");
        total += sign as f64 * coeff;
    }
    Ok(total / (1u64 << k) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(c: &[i8]) -> CubePoint {
        CubePoint::new(c.to_vec()).unwrap()
    }

    fn idx(j: &[usize]) -> WalshIndex {
        WalshIndex::new(j.to_vec()).unwrap()
    }

    fn random_dataset(rng: &mut impl Rng, n: usize, p: usize) -> Dataset {
        let rows = (0..n)
            .map(|_| CubePoint((0..p).map(|_| if rng.random() { 1 } else { -1 }).collect()))
            .collect();
        Dataset::new(p, rows).unwrap()
    }

    #[test]
    fn walsh_eval_examples() {
        let x = pt(&[1, -1, 1]);
        assert_eq!(walsh_eval(&WalshIndex::empty(), &x).unwrap(), 1);
        assert_eq!(walsh_eval(&idx(&[0]), &x).unwrap(), 1);
        assert_eq!(walsh_eval(&idx(&[0, 1]), &x).unwrap(), -1);
    }

    #[test]
    fn walsh_eval_rejects_out_of_range() {
        let err = walsh_eval(&idx(&[3]), &pt(&[1, 1, 1])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn rejects_bad_points_and_indices() {
        assert!(CubePoint::new(vec![1, 0]).is_err());
        assert!(WalshIndex::new(vec![2, 1]).is_err());
        assert!(WalshIndex::new(vec![1, 1]).is_err());
        assert!(Dataset::new(2, vec![pt(&[1, 1]), pt(&[1])]).is_err());
    }

    #[test]
    fn enumeration_sizes_and_order() {
        assert_eq!(enumerate_low_degree(4, 2).unwrap().len(), 11);
        assert_eq!(enumerate_low_degree(5, 0).unwrap(), vec![WalshIndex::empty()]);
        assert_eq!(enumerate_low_degree(3, 3).unwrap().len(), 8);
        let e = enumerate_low_degree(3, 2).unwrap();
        let expect: Vec<WalshIndex> = [
            &[][..],
            &[0],
            &[1],
            &[2],
            &[0, 1],
            &[0, 2],
            &[1, 2],
        ]
        .iter()
        .map(|s| idx(s))
        .collect();
        assert_eq!(e, expect);
        assert!(matches!(enumerate_low_degree(2, 3), Err(Error::Config(_))));
        assert_eq!(enumerate_low_degree(6, 2).unwrap(), enumerate_low_degree(6, 2).unwrap());
    }

    #[test]
    fn low_degree_count_matches_enumeration() {
        for p in 0..10 {
            for d in 0..=p {
                assert_eq!(low_degree_count(p, d), enumerate_low_degree(p, d).unwrap().len());
            }
        }
        assert_eq!(low_degree_count(10, 2), 56);
        assert_eq!(low_degree_count(8, 2), 37);
    }

    #[test]
    fn fourier_examples() {
        let ones = Dataset::new(3, vec![pt(&[1, 1, 1]); 5]).unwrap();
        let b = fourier_of_dataset(&ones, 3).unwrap();
        assert!(b.coeffs().iter().all(|&c| c == 1.0));

        let sym = Dataset::new(2, vec![pt(&[1, 1]), pt(&[-1, -1])]).unwrap();
        let b = fourier_of_dataset(&sym, 2).unwrap();
        assert_eq!(b.coeffs(), &[1.0, 0.0, 0.0, 1.0]);

        let empty = Dataset::new(2, vec![]).unwrap();
        assert!(matches!(fourier_of_dataset(&empty, 1), Err(Error::Input(_))));
    }

    #[test]
    fn fourier_matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_dataset(&mut rng, 100, 6);
        let b = fourier_of_dataset(&x, 2).unwrap();
        // independent oracle: explicit loops over coordinate pairs
        let mut expect = vec![1.0];
        for j in 0..6 {
            let s: i32 = x.iter().map(|r| r.coords()[j] as i32).sum();
            expect.push(s as f64 / 100.0);
        }
        for a in 0..6 {
            for c in a + 1..6 {
                let s: i32 = x
                    .iter()
                    .map(|r| (r.coords()[a] * r.coords()[c]) as i32)
                    .sum();
                expect.push(s as f64 / 100.0);
            }
        }
        assert_eq!(b.coeffs(), &expect[..]);
    }

    #[test]
    fn marginal_examples() {
        let ones = Dataset::new(2, vec![pt(&[1, 1]); 3]).unwrap();
        let q = MarginalQuery::new(idx(&[0]), vec![1]).unwrap();
        assert_eq!(marginal_value(&ones, &q).unwrap(), 1.0);

        let one = Dataset::new(2, vec![pt(&[1, -1])]).unwrap();
        let q1 = MarginalQuery::new(idx(&[0, 1]), vec![1, -1]).unwrap();
        let q2 = MarginalQuery::new(idx(&[0, 1]), vec![1, 1]).unwrap();
        assert_eq!(marginal_value(&one, &q1).unwrap(), 1.0);
        assert_eq!(marginal_value(&one, &q2).unwrap(), 0.0);

        let total = MarginalQuery::new(WalshIndex::empty(), vec![]).unwrap();
        let b = fourier_of_dataset(&one, 1).unwrap();
        assert_eq!(marginal_from_fourier(&b, &total).unwrap(), 1.0);
    }

    #[test]
    fn two_dimensional_marginal_expansion() {
        // P(x1=+1, x2=-1) = (b_∅ + b_1 - b_2 - b_12) / 4
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_dataset(&mut rng, 37, 2);
        let b = fourier_of_dataset(&x, 2).unwrap();
        let c = b.coeffs();
        let expect = (c[0] + c[1] - c[2] - c[3]) / 4.0;
        let q = MarginalQuery::new(idx(&[0, 1]), vec![1, -1]).unwrap();
        assert!((marginal_value(&x, &q).unwrap() - expect).abs() < 1e-15);
        assert!((marginal_from_fourier(&b, &q).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn marginal_from_fourier_rejects_high_degree() {
        let x = Dataset::new(3, vec![pt(&[1, 1, 1])]).unwrap();
        let b = fourier_of_dataset(&x, 1).unwrap();
        let q = MarginalQuery::new(idx(&[0, 1]), vec![1, 1]).unwrap();
        assert!(matches!(marginal_from_fourier(&b, &q), Err(Error::Input(_))));
    }

    #[test]
    fn fourier_marginals_agree_with_counting_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..1000 {
            let p = rng.random_range(1..=8);
            let d = rng.random_range(0..=p.min(3));
            let n = rng.random_range(1..60);
            let x = random_dataset(&mut rng, n, p);
            let b = fourier_of_dataset(&x, d).unwrap();
            let basis = b.basis().clone();
            let j = &basis.indices()[rng.random_range(0..basis.len())];
            let signs = (0..j.degree())
                .map(|_| if rng.random() { 1 } else { -1 })
                .collect();
            let q = MarginalQuery::new(j.clone(), signs).unwrap();
            let direct = marginal_value(&x, &q).unwrap();
            let via = marginal_from_fourier(&b, &q).unwrap();
            assert!((direct - via).abs() <= 1e-12, "{q}: {direct} vs {via}");
        }
    }

    fn point_strategy(p: usize) -> impl Strategy<Value = CubePoint> {
        proptest::collection::vec(prop_oneof![Just(1i8), Just(-1i8)], p).prop_map(CubePoint)
    }

    fn index_strategy(p: usize) -> impl Strategy<Value = WalshIndex> {
        proptest::collection::btree_set(0..p, 0..=p)
            .prop_map(|s| WalshIndex(s.into_iter().collect()))
    }

    proptest! {
        #[test]
        fn character_property(x in point_strategy(7), j in index_strategy(7), k in index_strategy(7)) {
            let jk = j.symmetric_difference(&k);
            prop_assert_eq!(
                walsh_eval(&j, &x).unwrap() * walsh_eval(&k, &x).unwrap(),
                walsh_eval(&jk, &x).unwrap()
            );
        }

        #[test]
        fn dataset_fourier_is_bounded(rows in proptest::collection::vec(point_strategy(5), 1..40), d in 0usize..=5) {
            let x = Dataset::new(5, rows).unwrap();
            let b = fourier_of_dataset(&x, d).unwrap();
            prop_assert_eq!(b.coeffs()[0], 1.0);
            prop_assert!(b.coeffs().iter().all(|c| c.abs() <= 1.0));
        }

        #[test]
        fn sign_patterns_partition_unity(rows in proptest::collection::vec(point_strategy(5), 1..40), j in index_strategy(5)) {
            let x = Dataset::new(5, rows).unwrap();
            let total: f64 = MarginalQuery::all_patterns(&j)
                .map(|q| marginal_value(&x, &q).unwrap())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cube_rank_round_trip() {
        for r in 0..32 {
            assert_eq!(CubePoint::from_cube_rank(r, 5).cube_rank(), r);
        }
    }
}
