//! Subset-indexed vectors over `V = {1, ..., p}` and the zeta/Möbius
//! transforms on the Boolean lattice.
//!
//! A subset `D ⊆ V` is stored as a bitmask where variable `v` (1-based)
//! occupies bit `v - 1`. The empty set is mask `0` and `V` is `2^p - 1`, so
//! the cell `(1_D, 0_{V∖D})` of a `2^p`-table sits at position `mask(D)`.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{LmlError, Result};

/// Largest supported number of variables.
pub const MAX_VARIABLES: usize = 20;

/// A subset of the variables, encoded as a bitmask.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Subset(pub usize);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    /// The full set `{1, ..., p}`.
    pub fn full(p: usize) -> Subset {
        Subset((1usize << p) - 1)
    }

    /// Builds a subset from 1-based variable labels.
    ///
    /// Panics if a label is zero; use [`Subset::try_from_vars`] for input
    /// that has not been validated.
    pub fn from_vars(vars: &[usize]) -> Subset {
        Subset(vars.iter().fold(0, |m, &v| {
            assert!(v >= 1, "variable labels are 1-based");
            m | 1 << (v - 1)
        }))
    }

    pub fn try_from_vars(vars: &[usize], p: usize) -> Result<Subset> {
        let mut mask = 0;
        for &v in vars {
            if v == 0 || v > p {
                return Err(LmlError::VariableOutOfRange { var: v, p });
            }
            mask |= 1 << (v - 1);
        }
        Ok(Subset(mask))
    }

    pub fn singleton(v: usize) -> Subset {
        Subset::from_vars(&[v])
    }

    #[inline]
    pub fn mask(self) -> usize {
        self.0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn contains(self, v: usize) -> bool {
        v >= 1 && self.0 >> (v - 1) & 1 == 1
    }

    #[inline]
    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn union(self, other: Subset) -> Subset {
        Subset(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: Subset) -> Subset {
        Subset(self.0 & other.0)
    }

    #[inline]
    pub fn difference(self, other: Subset) -> Subset {
        Subset(self.0 & !other.0)
    }

    #[inline]
    pub fn is_disjoint(self, other: Subset) -> bool {
        self.0 & other.0 == 0
    }

    /// 1-based labels of the members, ascending.
    pub fn vars(self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut m = self.0;
        while m != 0 {
            out.push(m.trailing_zeros() as usize + 1);
            m &= m - 1;
        }
        out
    }

    /// All subsets of `self`, in ascending mask order.
    pub fn subsets(self) -> impl Iterator<Item = Subset> {
        let outer = self.0;
        let mut next = Some(0usize);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == outer {
                None
            } else {
                Some((cur.wrapping_sub(outer)) & outer)
            };
            Some(Subset(cur))
        })
    }

    /// Maps `self ⊆ outer` onto the compact index space of `outer`: the
    /// `i`-th smallest member of `outer` becomes bit `i`.
    pub fn compress(self, outer: Subset) -> usize {
        let mut out = 0;
        let mut bit = 0;
        let mut m = outer.0;
        while m != 0 {
            let low = m & m.wrapping_neg();
            if self.0 & low != 0 {
                out |= 1 << bit;
            }
            bit += 1;
            m &= m - 1;
        }
        out
    }

    /// Inverse of [`Subset::compress`].
    pub fn expand(compact: usize, outer: Subset) -> Subset {
        let mut out = 0;
        let mut bit = 0;
        let mut m = outer.0;
        while m != 0 {
            let low = m & m.wrapping_neg();
            if compact >> bit & 1 == 1 {
                out |= low;
            }
            bit += 1;
            m &= m - 1;
        }
        Subset(out)
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars = self.vars();
        if vars.is_empty() {
            return f.write_str("∅");
        }
        f.write_str("{")?;
        for (i, v) in vars.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("}")
    }
}

pub(crate) fn check_p(p: usize) -> Result<()> {
    if p == 0 || p > MAX_VARIABLES {
        Err(LmlError::VariableCountOutOfRange(p))
    } else {
        Ok(())
    }
}

/// Which way a zeta/Möbius transform sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// `(Zᵀv)_D = Σ_{E⊆D} v_E`
    OverSubsets,
    /// `(Zv)_D = Σ_{H⊇D} v_H`
    OverSupersets,
}

/// A real vector indexed by the subsets of `{1, ..., p}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetVector {
    p: usize,
    values: Vec<f64>,
}

impl SubsetVector {
    pub fn new(p: usize, values: Vec<f64>) -> Result<Self> {
        check_p(p)?;
        if values.len() != 1 << p {
            return Err(LmlError::LengthMismatch {
                len: values.len(),
                p,
            });
        }
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Err(LmlError::NonFinite(i));
        }
        Ok(SubsetVector { p, values })
    }

    /// Infers `p` from the length, which must be a power of two `>= 2`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let len = values.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(LmlError::LengthMismatch {
                len,
                p: len.max(1).ilog2() as usize,
            });
        }
        Self::new(len.trailing_zeros() as usize, values)
    }

    pub fn zeros(p: usize) -> Result<Self> {
        check_p(p)?;
        Ok(SubsetVector {
            p,
            values: vec![0.0; 1 << p],
        })
    }

    pub fn from_fn(p: usize, mut f: impl FnMut(Subset) -> f64) -> Result<Self> {
        check_p(p)?;
        let values = (0..1usize << p).map(|m| f(Subset(m))).collect();
        Self::new(p, values)
    }

    /// Unchecked constructor for values produced by internal arithmetic.
    pub(crate) fn raw(p: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), 1 << p);
        SubsetVector { p, values }
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn full_set(&self) -> Subset {
        Subset::full(self.p)
    }

    #[inline]
    pub fn get(&self, d: Subset) -> f64 {
        self.values[d.0]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (Subset, f64)> + '_ {
        self.values.iter().enumerate().map(|(m, &x)| (Subset(m), x))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SubsetVector {
        SubsetVector::raw(self.p, self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &SubsetVector) -> f64 {
        assert_eq!(self.p, other.p, "dimension mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Restriction to the subsets of `margin`, re-indexed over `|margin|`
    /// variables in ascending label order.
    pub fn restrict(&self, margin: Subset) -> Result<SubsetVector> {
        if !margin.is_subset_of(self.full_set()) {
            return Err(LmlError::SubsetOutOfRange {
                mask: margin.0,
                p: self.p,
            });
        }
        let q = margin.len();
        check_p(q)?;
        let values = (0..1usize << q)
            .map(|c| self.values[Subset::expand(c, margin).0])
            .collect();
        Ok(SubsetVector::raw(q, values))
    }

    pub fn zeta(&self, direction: Direction) -> SubsetVector {
        let mut out = self.clone();
        zeta_in_place(&mut out.values, direction);
        out
    }

    pub fn moebius(&self, direction: Direction) -> SubsetVector {
        let mut out = self.clone();
        moebius_in_place(&mut out.values, direction);
        out
    }
}

impl Index<Subset> for SubsetVector {
    type Output = f64;
    fn index(&self, d: Subset) -> &f64 {
        &self.values[d.0]
    }
}

impl IndexMut<Subset> for SubsetVector {
    fn index_mut(&mut self, d: Subset) -> &mut f64 {
        &mut self.values[d.0]
    }
}

/// Pairs every mask without `bit` with the mask that adds it, one bit
/// at a time, and applies `op(lower, upper)`.
#[inline]
fn butterfly(xs: &mut [f64], mut op: impl FnMut(&mut f64, &mut f64)) {
    let n = xs.len();
    debug_assert!(n.is_power_of_two());
    let mut half = 1;
    while half < n {
        for block in xs.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (l, h) in lo.iter_mut().zip(hi) {
                op(l, h);
            }
        }
        half <<= 1;
    }
}

/// In-place fast zeta transform, `O(p 2^p)`.
pub fn zeta_in_place(xs: &mut [f64], direction: Direction) {
    match direction {
        Direction::OverSubsets => butterfly(xs, |l, h| *h += *l),
        Direction::OverSupersets => butterfly(xs, |l, h| *l += *h),
    }
}

/// In-place fast Möbius transform; inverse of [`zeta_in_place`] in the
/// same direction.
pub fn moebius_in_place(xs: &mut [f64], direction: Direction) {
    match direction {
        Direction::OverSubsets => butterfly(xs, |l, h| *h -= *l),
        Direction::OverSupersets => butterfly(xs, |l, h| *l -= *h),
    }
}

/// Zeta transform of a subset vector.
pub fn zeta(v: &SubsetVector, direction: Direction) -> SubsetVector {
    v.zeta(direction)
}

pub fn moebius(v: &SubsetVector, direction: Direction) -> SubsetVector {
    v.moebius(direction)
}

/// Which reference matrix to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    /// `Z_{D,H} = 1(D ⊆ H)`
    Zeta,
    /// `M_{D,H} = (-1)^{|H∖D|} 1(D ⊆ H)`
    Moebius,
}

/// Dense `2^p x 2^p` matrix with rows and columns indexed by subsets.
///
/// Only used as a reference for the fast transforms.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetMatrix {
    p: usize,
    data: Vec<f64>,
}

impl SubsetMatrix {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn side(&self) -> usize {
        1 << self.p
    }

    pub fn get(&self, row: Subset, col: Subset) -> f64 {
        self.data[row.0 * self.side() + col.0]
    }

    pub fn identity(p: usize) -> Result<SubsetMatrix> {
        check_p(p)?;
        let n = 1 << p;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Ok(SubsetMatrix { p, data })
    }

    pub fn transpose(&self) -> SubsetMatrix {
        let n = self.side();
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                data[c * n + r] = self.data[r * n + c];
            }
        }
        SubsetMatrix { p: self.p, data }
    }

    pub fn mul(&self, other: &SubsetMatrix) -> SubsetMatrix {
        assert_eq!(self.p, other.p, "dimension mismatch");
        let n = self.side();
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == 0.0 {
                    continue;
                }
                for c in 0..n {
                    data[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        SubsetMatrix { p: self.p, data }
    }

    pub fn mul_vec(&self, v: &SubsetVector) -> SubsetVector {
        assert_eq!(self.p, v.p(), "dimension mismatch");
        let n = self.side();
        let values = (0..n)
            .map(|r| {
                self.data[r * n..(r + 1) * n]
                    .iter()
                    .zip(v.values())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        SubsetVector::raw(self.p, values)
    }
}

/// Builds the dense reference matrix `Z` or `M = Z^{-1}`.
pub fn build_matrix(kind: MatrixKind, p: usize) -> Result<SubsetMatrix> {
    check_p(p)?;
    let n = 1usize << p;
    let mut data = vec![0.0; n * n];
    for d in 0..n {
        for h in 0..n {
            if d & !h == 0 {
                data[d * n + h] = match kind {
                    MatrixKind::Zeta => 1.0,
                    MatrixKind::Moebius if (h & !d).count_ones() % 2 == 0 => 1.0,
                    MatrixKind::Moebius => -1.0,
                };
            }
        }
    }
    Ok(SubsetMatrix { p, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(values: &[f64]) -> SubsetVector {
        SubsetVector::from_values(values.to_vec()).unwrap()
    }

    #[test]
    fn zeta_over_supersets_p2() {
        let out = v(&[0.4, 0.3, 0.2, 0.1]).zeta(Direction::OverSupersets);
        let expected = [1.0, 0.4, 0.3, 0.1];
        for (a, b) in out.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn moebius_over_supersets_p2() {
        let out = v(&[1.0, 0.4, 0.3, 0.1]).moebius(Direction::OverSupersets);
        let expected = [0.4, 0.3, 0.2, 0.1];
        for (a, b) in out.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn p1_over_subsets() {
        let (a, b) = (0.7, -2.5);
        assert_eq!(
            v(&[a, b]).zeta(Direction::OverSubsets).values(),
            &[a, a + b]
        );
        assert_eq!(
            v(&[a, a + b]).moebius(Direction::OverSubsets).values(),
            &[a, b]
        );
    }

    #[test]
    fn zeros_stay_zero() {
        for p in 1..=6 {
            let z = SubsetVector::zeros(p).unwrap();
            for d in [Direction::OverSubsets, Direction::OverSupersets] {
                assert!(z.zeta(d).values().iter().all(|&x| x == 0.0));
                assert!(z.moebius(d).values().iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(matches!(
            SubsetVector::new(2, vec![1.0; 3]),
            Err(LmlError::LengthMismatch { .. })
        ));
        assert!(SubsetVector::from_values(vec![1.0; 6]).is_err());
        assert!(SubsetVector::from_values(vec![1.0]).is_err());
        assert!(SubsetVector::new(1, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn p1_matrices() {
        let z = build_matrix(MatrixKind::Zeta, 1).unwrap();
        let m = build_matrix(MatrixKind::Moebius, 1).unwrap();
        assert_eq!(z.data, vec![1.0, 1.0, 0.0, 1.0]);
        assert_eq!(m.data, vec![1.0, -1.0, 0.0, 1.0]);
    }

    #[test]
    fn z_times_m_is_identity_p3() {
        let z = build_matrix(MatrixKind::Zeta, 3).unwrap();
        let m = build_matrix(MatrixKind::Moebius, 3).unwrap();
        assert_eq!(z.mul(&m), SubsetMatrix::identity(3).unwrap());
        assert_eq!(m.mul(&z), SubsetMatrix::identity(3).unwrap());
    }

    #[test]
    fn build_matrix_range() {
        assert!(build_matrix(MatrixKind::Zeta, 0).is_err());
        assert!(build_matrix(MatrixKind::Zeta, 21).is_err());
    }

    #[test]
    fn subset_helpers() {
        let d = Subset::from_vars(&[1, 3, 4]);
        assert_eq!(d.mask(), 0b1101);
        assert_eq!(d.len(), 3);
        assert_eq!(d.vars(), vec![1, 3, 4]);
        assert!(d.contains(3) && !d.contains(2));
        assert_eq!(d.subsets().count(), 8);
        assert_eq!(d.to_string(), "{1,3,4}");
        assert_eq!(Subset::EMPTY.to_string(), "∅");
        assert_eq!(Subset::from_vars(&[3, 4]).compress(d), 0b110);
        assert_eq!(Subset::expand(0b110, d), Subset::from_vars(&[3, 4]));
        assert!(Subset::try_from_vars(&[0], 3).is_err());
        assert!(Subset::try_from_vars(&[4], 3).is_err());
    }

    #[test]
    fn restrict_reindexes() {
        let mu = v(&[1.0, 0.4, 0.3, 0.1]);
        assert_eq!(
            mu.restrict(Subset::from_vars(&[1])).unwrap().values(),
            &[1.0, 0.4]
        );
        assert_eq!(
            mu.restrict(Subset::from_vars(&[2])).unwrap().values(),
            &[1.0, 0.3]
        );
        assert_eq!(mu.restrict(Subset::full(2)).unwrap(), mu);
    }
}
