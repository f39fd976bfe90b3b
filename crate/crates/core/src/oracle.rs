//! Brute-force checks of independence statements against their
//! log-mean linear characterizations.
//!
//! Everything here works directly on cell probabilities or on the mean
//! parameter, so it can be used to verify the transforms and the fitted
//! models independently.

use crate::error::{LmlError, Result};
use crate::graph::BidirectedGraph;
use crate::param::{marginal_table, ParamKind, Parameter};
use crate::subset::{Subset, SubsetVector};

/// Tolerance for exactly constructed distributions.
pub const EXACT_TOL: f64 = 1e-10;
/// Tolerance for distributions produced by the solver.
pub const FITTED_TOL: f64 = 1e-8;

/// Mutual independence of `X_{A_1}, ..., X_{A_r}`, optionally within the
/// event `X_v = 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndependenceQuery {
    blocks: Vec<Subset>,
    given_one: Option<usize>,
}

impl IndependenceQuery {
    pub fn new(blocks: Vec<Subset>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(LmlError::InvalidTable(
                "an independence query needs at least two blocks".into(),
            ));
        }
        let mut seen = Subset::EMPTY;
        for &b in &blocks {
            if b.is_empty() {
                return Err(LmlError::InvalidTable("empty block".into()));
            }
            if !b.is_disjoint(seen) {
                return Err(LmlError::InvalidTable(format!(
                    "block {b} overlaps an earlier block"
                )));
            }
            seen = seen.union(b);
        }
        Ok(IndependenceQuery {
            blocks,
            given_one: None,
        })
    }

    pub fn pair(a: Subset, b: Subset) -> Result<Self> {
        Self::new(vec![a, b])
    }

    /// Restricts the query to the event `X_v = 1`.
    pub fn given_one(mut self, v: usize) -> Result<Self> {
        if self.union().contains(v) {
            return Err(LmlError::InvalidTable(format!(
                "conditioning variable {v} is inside a block"
            )));
        }
        self.given_one = Some(v);
        Ok(self)
    }

    pub fn blocks(&self) -> &[Subset] {
        &self.blocks
    }

    pub fn conditioning(&self) -> Option<usize> {
        self.given_one
    }

    pub fn union(&self) -> Subset {
        self.blocks
            .iter()
            .fold(Subset::EMPTY, |acc, &b| acc.union(b))
    }

    /// The family `𝒟` of subsets of `∪A_i` not contained in any single
    /// block. Ascending mask order.
    pub fn family(&self) -> Vec<Subset> {
        self.union()
            .subsets()
            .filter(|d| !self.blocks.iter().any(|&b| d.is_subset_of(b)))
            .collect()
    }
}

/// Conditional table of `X_{V∖{v}}` given `X_v = 1`, re-indexed over the
/// remaining variables in ascending label order.
pub fn conditional_table(pi: &SubsetVector, v: usize) -> Result<SubsetVector> {
    let p = pi.p();
    if v == 0 || v > p {
        return Err(LmlError::VariableOutOfRange { var: v, p });
    }
    let sv = Subset::singleton(v);
    let rest = Subset::full(p).difference(sv);
    let vals: Vec<f64> = (0..1usize << (p - 1))
        .map(|c| pi[Subset::expand(c, rest).union(sv)])
        .collect();
    let total: f64 = vals.iter().sum();
    SubsetVector::new(p - 1, vals.into_iter().map(|x| x / total).collect())
}

fn relabel_without(d: Subset, v: usize, p: usize) -> Subset {
    let rest = Subset::full(p).difference(Subset::singleton(v));
    Subset(d.compress(rest))
}

/// Checks that every joint cell of the blocks' union factorizes into the
/// product of the block marginals.
pub fn cellwise_independent(pi: &SubsetVector, q: &IndependenceQuery, tol: f64) -> Result<bool> {
    let (table, blocks) = match q.given_one {
        Some(v) => {
            let t = conditional_table(pi, v)?;
            let b = q
                .blocks
                .iter()
                .map(|&b| relabel_without(b, v, pi.p()))
                .collect::<Vec<_>>();
            (t, b)
        }
        None => (pi.clone(), q.blocks.clone()),
    };
    let union = blocks.iter().fold(Subset::EMPTY, |acc, &b| acc.union(b));
    if !union.is_subset_of(table.full_set()) {
        return Err(LmlError::SubsetOutOfRange {
            mask: union.mask(),
            p: table.p(),
        });
    }
    let joint = marginal_table(&table, union)?;
    let local: Vec<Subset> = blocks.iter().map(|&b| Subset(b.compress(union))).collect();
    let margins = local
        .iter()
        .map(|&b| marginal_table(&joint, b).map(|m| (b, m)))
        .collect::<Result<Vec<_>>>()?;
    let holds = joint.iter().all(|(x, pr)| {
        let product: f64 = margins
            .iter()
            .map(|(b, m)| m[Subset(x.intersection(*b).compress(*b))])
            .product();
        (pr - product).abs() <= tol
    });
    Ok(holds)
}

/// `μ_{A'∪B'} = μ_{A'} μ_{B'}` for all `A' ⊆ A`, `B' ⊆ B`.
pub fn mu_factorizes(mu: &SubsetVector, a: Subset, b: Subset, tol: f64) -> bool {
    products_factorize(mu, a, b, tol)
}

/// Same identity stated for the dependence ratios `τ_{A'∪B'} = τ_{A'} τ_{B'}`.
///
/// Ratios of sets with fewer than two members are 1 by definition (the
/// stored singleton entries hold the means and are ignored here).
pub fn tau_factorizes(tau: &SubsetVector, a: Subset, b: Subset, tol: f64) -> bool {
    let ratio = |d: Subset| if d.len() < 2 { 1.0 } else { tau[d] };
    a.subsets().all(|a1| {
        b.subsets()
            .all(|b1| (ratio(a1.union(b1)) - ratio(a1) * ratio(b1)).abs() <= tol)
    })
}

fn products_factorize(v: &SubsetVector, a: Subset, b: Subset, tol: f64) -> bool {
    a.subsets().all(|a1| {
        b.subsets()
            .all(|b1| (v[a1.union(b1)] - v[a1] * v[b1]).abs() <= tol)
    })
}

/// `|γ_D| <= tol` for every listed set.
pub fn gamma_vanishes(gamma: &SubsetVector, sets: &[Subset], tol: f64) -> bool {
    sets.iter().all(|&d| gamma[d].abs() <= tol)
}

/// Connected set Markov property: for each disconnected set, the
/// components are mutually independent.
pub fn markov_check(pi: &SubsetVector, g: &BidirectedGraph, tol: f64) -> Result<bool> {
    for d in g.disconnected_sets() {
        let q = IndependenceQuery::new(g.connected_components(d))?;
        if !cellwise_independent(pi, &q, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Independence of the query's blocks within `X_v = 1`.
pub fn context_specific_check(
    pi: &SubsetVector,
    v: usize,
    q: &IndependenceQuery,
    tol: f64,
) -> Result<bool> {
    let q = IndependenceQuery::new(q.blocks.clone())?.given_one(v)?;
    cellwise_independent(pi, &q, tol)
}

/// Log-mean linear parameter of `X_{V∖{v}} | X_v = 1`, over the remaining
/// variables in ascending label order.
pub fn conditional_gamma(pi: &SubsetVector, v: usize) -> Result<SubsetVector> {
    let param = Parameter::probability(pi.clone())?;
    Ok(param
        .condition_on_one(v)?
        .convert(ParamKind::LogMeanLinear)?
        .into_values())
}

/// Largest violation of `γ^{(v)}_D = γ_{D∪{v}} + γ_D` over nonempty
/// `D ⊆ V∖{v}`.
///
/// Under a model where `γ_D = 0`, this gives `γ^{(v)}_D = γ_{D∪{v}}`, which
/// is how zero constraints on `γ` encode context-specific independence.
pub fn conditional_gamma_residual(pi: &SubsetVector, v: usize) -> Result<f64> {
    let p = pi.p();
    let gamma = Parameter::probability(pi.clone())?
        .convert(ParamKind::LogMeanLinear)?
        .into_values();
    let cond = conditional_gamma(pi, v)?;
    let sv = Subset::singleton(v);
    let rest = Subset::full(p).difference(sv);
    Ok((1..1usize << (p - 1))
        .map(|c| {
            let d = Subset::expand(c, rest);
            (cond[Subset(c)] - gamma[d.union(sv)] - gamma[d]).abs()
        })
        .fold(0.0, f64::max))
}
