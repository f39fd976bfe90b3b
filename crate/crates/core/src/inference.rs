//! Goodness of fit and exhaustive search over bidirected graph models.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::graph::{all_pairs, graph_constraints, BidirectedGraph, ConstraintMatrix};
use crate::mle::{fit, CountVector, FitResult, SolverOptions};
use crate::subset::SubsetVector;

pub use crate::special::chi2_sf;

/// Largest `p` accepted by [`exhaustive_search`].
pub const MAX_SEARCH_VARIABLES: usize = 5;

/// `2 Σ n log(n / ψ̂)` with `0 log 0 = 0`.
pub fn deviance(n: &CountVector, psi: &SubsetVector) -> f64 {
    assert_eq!(n.p(), psi.p(), "dimension mismatch");
    let d: f64 = n
        .counts()
        .values()
        .iter()
        .zip(psi.values())
        .filter(|(&c, _)| c > 0.0)
        .map(|(&c, &e)| c * (c / e).ln())
        .sum::<f64>()
        * 2.0;
    if (-1e-8..0.0).contains(&d) {
        0.0
    } else {
        d
    }
}

/// `deviance − df · log N`.
pub fn bic(deviance: f64, df: usize, sample_size: f64) -> f64 {
    deviance - df as f64 * sample_size.ln()
}

/// Asymptotic p-value of a deviance on `df` degrees of freedom.
pub fn p_value(deviance: f64, df: usize) -> f64 {
    if df == 0 {
        1.0
    } else {
        chi2_sf(deviance.max(0.0), df)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelReport {
    pub description: String,
    /// Present for graph models.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize)>>,
    pub deviance: f64,
    pub df: usize,
    pub p_value: f64,
    pub bic: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ModelReport {
    pub fn from_fit(n: &CountVector, fit: &FitResult, description: impl Into<String>) -> Self {
        let dev = deviance(n, &fit.psi);
        ModelReport {
            description: description.into(),
            edges: None,
            deviance: dev,
            df: fit.df,
            p_value: p_value(dev, fit.df),
            bic: bic(dev, fit.df, n.total()),
            converged: fit.converged,
            error: None,
        }
    }

    fn failed(description: String, df: usize, err: String) -> Self {
        ModelReport {
            description,
            edges: None,
            deviance: f64::NAN,
            df,
            p_value: f64::NAN,
            bic: f64::NAN,
            converged: false,
            error: Some(err),
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.as_ref().map_or(0, Vec::len)
    }
}

/// Fits `h` and summarizes it.
pub fn evaluate(
    n: &CountVector,
    h: &ConstraintMatrix,
    opts: &SolverOptions,
    description: impl Into<String>,
) -> Result<(FitResult, ModelReport)> {
    let fit = fit(n, h, opts)?;
    let report = ModelReport::from_fit(n, &fit, description);
    Ok((fit, report))
}

/// Graph whose edge set is given by the bits of `index` over
/// [`all_pairs`] order.
pub fn graph_from_index(p: usize, index: usize) -> Result<BidirectedGraph> {
    let edges: Vec<_> = all_pairs(p)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| index >> i & 1 == 1)
        .map(|(_, e)| e)
        .collect();
    BidirectedGraph::new(p, &edges)
}

pub fn describe_edges(edges: &[(usize, usize)]) -> String {
    if edges.is_empty() {
        return "no edges".to_string();
    }
    edges
        .iter()
        .map(|(j, k)| format!("{j}-{k}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchResult {
    pub alpha: f64,
    /// One report per graph, indexed by [`graph_from_index`].
    pub models: Vec<ModelReport>,
    /// Index of the selected model, if any passed the filter.
    pub selected: Option<usize>,
}

impl SearchResult {
    pub fn selected_model(&self) -> Option<&ModelReport> {
        self.selected.map(|i| &self.models[i])
    }

    /// Model indices ordered by BIC, then fewer edges, then edge list;
    /// failed fits last.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.models.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ma, mb) = (&self.models[a], &self.models[b]);
            mb.converged
                .cmp(&ma.converged)
                .then_with(|| compare_models(ma, mb))
        });
        idx
    }

    pub fn passes(&self, m: &ModelReport) -> bool {
        m.converged && m.p_value >= self.alpha
    }
}

fn compare_models(a: &ModelReport, b: &ModelReport) -> Ordering {
    a.bic
        .total_cmp(&b.bic)
        .then_with(|| a.edge_count().cmp(&b.edge_count()))
        .then_with(|| a.edges.cmp(&b.edges))
}

/// Fits every bidirected graph on `p` nodes and selects the minimum-BIC
/// model among the converged fits with p-value at least `alpha`.
///
/// Fits run on the rayon pool; the result does not depend on scheduling.
pub fn exhaustive_search(
    n: &CountVector,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<SearchResult> {
    let p = n.p();
    if p > MAX_SEARCH_VARIABLES {
        return Err(crate::error::LmlError::VariableCountOutOfRange(p));
    }
    let count = 1usize << all_pairs(p).len();
    let models = (0..count)
        .into_par_iter()
        .map(|index| -> Result<ModelReport> {
            let g = graph_from_index(p, index)?;
            let edges = g.edges();
            let h = graph_constraints(&g);
            let description = describe_edges(&edges);
            let mut report = match evaluate(n, &h, opts, description.clone()) {
                Ok((_, report)) => report,
                Err(e) => ModelReport::failed(description, h.k(), e.to_string()),
            };
            report.edges = Some(edges);
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut result = SearchResult {
        alpha,
        models,
        selected: None,
    };
    result.selected = (0..result.models.len())
        .filter(|&i| result.passes(&result.models[i]))
        .min_by(|&a, &b| compare_models(&result.models[a], &result.models[b]));
    Ok(result)
}
