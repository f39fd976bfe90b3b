//! Bidirected graphs and the constraint matrices that turn them into
//! log-mean linear models.
//!
//! A distribution belongs to the bidirected graph model of `G` exactly when
//! its log-mean linear parameter vanishes on every set that is disconnected
//! in `G`, so a graph model is the selector matrix of its disconnected sets.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LmlError, Result};
use crate::subset::{check_p, Subset, SubsetVector};

/// Relative singular-value threshold for the rank check of dense `H`.
pub const RANK_TOL: f64 = 1e-8;

/// Undirected storage of a bidirected graph on nodes `1..=p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BidirectedGraph {
    p: usize,
    adjacency: Vec<usize>,
}

/// On-disk form: `{"p": 4, "edges": [[1,2],[2,3],[3,4]]}` with 1-based labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub p: usize,
    pub edges: Vec<(usize, usize)>,
}

impl BidirectedGraph {
    pub fn new(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        check_p(p)?;
        let mut adjacency = vec![0usize; p];
        for &(j, k) in edges {
            if j == 0 || k == 0 || j > p || k > p {
                return Err(LmlError::InvalidGraph(format!(
                    "edge ({j},{k}) outside 1..={p}"
                )));
            }
            if j == k {
                return Err(LmlError::InvalidGraph(format!("self-loop at node {j}")));
            }
            adjacency[j - 1] |= 1 << (k - 1);
            adjacency[k - 1] |= 1 << (j - 1);
        }
        Ok(BidirectedGraph { p, adjacency })
    }

    pub fn empty(p: usize) -> Result<Self> {
        Self::new(p, &[])
    }

    pub fn complete(p: usize) -> Result<Self> {
        Self::new(p, &all_pairs(p))
    }

    pub fn from_spec(spec: &GraphSpec) -> Result<Self> {
        Self::new(spec.p, &spec.edges)
    }

    pub fn to_spec(&self) -> GraphSpec {
        GraphSpec {
            p: self.p,
            edges: self.edges(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn has_edge(&self, j: usize, k: usize) -> bool {
        j >= 1 && j <= self.p && k >= 1 && self.adjacency[j - 1] >> (k - 1) & 1 == 1
    }

    /// Edges as `(j, k)` with `j < k`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        all_pairs(self.p)
            .into_iter()
            .filter(|&(j, k)| self.has_edge(j, k))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency
            .iter()
            .map(|a| a.count_ones() as usize)
            .sum::<usize>()
            / 2
    }

    fn neighbours(&self, v: usize) -> usize {
        self.adjacency[v - 1]
    }

    /// Connected components of the subgraph induced by `d`, ordered by
    /// their smallest member.
    pub fn connected_components(&self, d: Subset) -> Vec<Subset> {
        let mut remaining = d.mask() & (Subset::full(self.p).mask());
        let mut parts = Vec::new();
        while remaining != 0 {
            let seed = remaining & remaining.wrapping_neg();
            let mut component = seed;
            let mut frontier = seed;
            while frontier != 0 {
                let mut grown = 0;
                let mut f = frontier;
                while f != 0 {
                    let v = f.trailing_zeros() as usize + 1;
                    grown |= self.neighbours(v);
                    f &= f - 1;
                }
                frontier = grown & remaining & !component;
                component |= frontier;
            }
            parts.push(Subset(component));
            remaining &= !component;
        }
        parts
    }

    pub fn is_connected_set(&self, d: Subset) -> bool {
        self.connected_components(d).len() <= 1
    }

    /// Every subset with at least two connected components, in ascending
    /// mask order.
    pub fn disconnected_sets(&self) -> Vec<Subset> {
        (0..1usize << self.p)
            .map(Subset)
            .filter(|&d| d.len() >= 2 && !self.is_connected_set(d))
            .collect()
    }
}

/// Unordered pairs `(j, k)`, `1 <= j < k <= p`, lexicographically.
pub fn all_pairs(p: usize) -> Vec<(usize, usize)> {
    (1..=p)
        .flat_map(|j| (j + 1..=p).map(move |k| (j, k)))
        .collect()
}

/// Full column rank `2^p x k` matrix `H` defining the model `Hᵀγ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintMatrix {
    /// One unit column per listed subset.
    Selector { p: usize, sets: Vec<Subset> },
    /// Arbitrary full-rank matrix, `2^p` rows.
    Dense { p: usize, matrix: DMatrix<f64> },
}

impl ConstraintMatrix {
    pub fn saturated(p: usize) -> Result<Self> {
        check_p(p)?;
        Ok(ConstraintMatrix::Selector {
            p,
            sets: Vec::new(),
        })
    }

    /// Constraints `γ_D = 0` for each listed set; duplicates are rejected.
    pub fn selector(p: usize, sets: Vec<Subset>) -> Result<Self> {
        check_p(p)?;
        let full = Subset::full(p);
        let mut seen = BTreeSet::new();
        for &d in &sets {
            if !d.is_subset_of(full) {
                return Err(LmlError::SubsetOutOfRange { mask: d.mask(), p });
            }
            if !seen.insert(d) {
                return Err(LmlError::InvalidConstraints(format!(
                    "set {d} constrained twice"
                )));
            }
        }
        if sets.len() >= 1 << p {
            return Err(LmlError::InvalidConstraints("k must be below 2^p".into()));
        }
        Ok(ConstraintMatrix::Selector { p, sets })
    }

    /// Dense `H` given column by column, each column of length `2^p`.
    pub fn dense(p: usize, columns: &[Vec<f64>]) -> Result<Self> {
        check_p(p)?;
        let n = 1usize << p;
        if columns.len() >= n {
            return Err(LmlError::InvalidConstraints(format!(
                "{} columns, need fewer than {n}",
                columns.len()
            )));
        }
        for (i, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(LmlError::InvalidConstraints(format!(
                    "column {i} has length {}, expected {n}",
                    c.len()
                )));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(LmlError::InvalidConstraints(format!(
                    "column {i} has non-finite entries"
                )));
            }
        }
        let matrix = DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r]);
        check_full_rank(&matrix)?;
        Ok(ConstraintMatrix::Dense { p, matrix })
    }

    pub fn p(&self) -> usize {
        match self {
            ConstraintMatrix::Selector { p, .. } | ConstraintMatrix::Dense { p, .. } => *p,
        }
    }

    /// Number of constraints.
    pub fn k(&self) -> usize {
        match self {
            ConstraintMatrix::Selector { sets, .. } => sets.len(),
            ConstraintMatrix::Dense { matrix, .. } => matrix.ncols(),
        }
    }

    /// The constrained sets of a selector matrix.
    pub fn sets(&self) -> Option<&[Subset]> {
        match self {
            ConstraintMatrix::Selector { sets, .. } => Some(sets),
            ConstraintMatrix::Dense { .. } => None,
        }
    }

    /// Column `c` as a dense subset vector.
    pub fn column(&self, c: usize) -> SubsetVector {
        let p = self.p();
        match self {
            ConstraintMatrix::Selector { sets, .. } => {
                let mut v = vec![0.0; 1 << p];
                v[sets[c].mask()] = 1.0;
                SubsetVector::raw(p, v)
            }
            ConstraintMatrix::Dense { matrix, .. } => {
                SubsetVector::raw(p, matrix.column(c).iter().copied().collect())
            }
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            ConstraintMatrix::Dense { matrix, .. } => matrix.clone(),
            ConstraintMatrix::Selector { p, sets } => {
                let mut m = DMatrix::zeros(1 << p, sets.len());
                for (c, d) in sets.iter().enumerate() {
                    m[(d.mask(), c)] = 1.0;
                }
                m
            }
        }
    }

    /// `Hᵀx`.
    pub fn apply_transpose(&self, x: &SubsetVector) -> Vec<f64> {
        assert_eq!(x.p(), self.p(), "dimension mismatch");
        match self {
            ConstraintMatrix::Selector { sets, .. } => sets.iter().map(|&d| x[d]).collect(),
            ConstraintMatrix::Dense { matrix, .. } => matrix
                .column_iter()
                .map(|col| col.iter().zip(x.values()).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    /// True when no constraint touches `γ_∅` or a main effect, which
    /// guarantees the model contains the mutual-independence distributions.
    pub fn spares_low_order_rows(&self) -> bool {
        let low = |r: usize| r.count_ones() <= 1;
        match self {
            ConstraintMatrix::Selector { sets, .. } => sets.iter().all(|d| !low(d.mask())),
            ConstraintMatrix::Dense { matrix, .. } => (0..matrix.nrows())
                .filter(|&r| low(r))
                .all(|r| matrix.row(r).iter().all(|&x| x == 0.0)),
        }
    }

    /// Appends unit columns for `extra`, rejecting sets already selected.
    pub fn with_extra_zeros(&self, extra: &[Subset]) -> Result<Self> {
        let p = self.p();
        match self {
            ConstraintMatrix::Selector { sets, .. } => {
                let mut all = sets.clone();
                all.extend_from_slice(extra);
                ConstraintMatrix::selector(p, all)
            }
            ConstraintMatrix::Dense { matrix, .. } => {
                let n = matrix.nrows();
                let k = matrix.ncols();
                let mut m = matrix.clone().resize_horizontally(k + extra.len(), 0.0);
                for (i, d) in extra.iter().enumerate() {
                    if d.mask() >= n {
                        return Err(LmlError::SubsetOutOfRange { mask: d.mask(), p });
                    }
                    m[(d.mask(), k + i)] = 1.0;
                }
                check_full_rank(&m).map_err(|_| {
                    LmlError::InvalidConstraints(
                        "extra zeros duplicate existing constraints".into(),
                    )
                })?;
                Ok(ConstraintMatrix::Dense { p, matrix: m })
            }
        }
    }
}

fn check_full_rank(m: &DMatrix<f64>) -> Result<()> {
    if m.ncols() == 0 {
        return Ok(());
    }
    let sv = m.clone().svd(false, false).singular_values;
    let largest = sv.max();
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * largest).count();
    if largest == 0.0 || rank < m.ncols() {
        return Err(LmlError::InvalidConstraints(format!(
            "rank {rank} < {} columns",
            m.ncols()
        )));
    }
    Ok(())
}

/// Selector matrix of the disconnected sets of `g`.
pub fn graph_constraints(g: &BidirectedGraph) -> ConstraintMatrix {
    ConstraintMatrix::Selector {
        p: g.p(),
        sets: g.disconnected_sets(),
    }
}

/// `base` plus the zero constraints in `extra` (context-specific models).
pub fn context_specific_constraints(
    base: &ConstraintMatrix,
    extra: &[Subset],
) -> Result<ConstraintMatrix> {
    base.with_extra_zeros(extra)
}
