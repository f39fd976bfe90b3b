//! JSON shapes and plain-text tables for command output.

use std::fmt::Write as _;

use lml_core::{ModelReport, SearchResult, Subset};
use serde::Serialize;

use crate::input::{names_of, significant};

#[derive(Serialize)]
pub struct GammaRow {
    pub subset: Vec<String>,
    pub estimate: f64,
    pub se: f64,
    pub constrained: bool,
}

#[derive(Serialize)]
pub struct FitOutput {
    pub model: String,
    pub variables: Vec<String>,
    pub deviance: f64,
    pub df: usize,
    pub p_value: f64,
    pub bic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gamma: Vec<GammaRow>,
}

impl FitOutput {
    pub fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model     {}", self.model);
        let _ = writeln!(out, "deviance  {:.4}", self.deviance);
        let _ = writeln!(out, "df        {}", self.df);
        let _ = writeln!(out, "p-value   {:.4}", self.p_value);
        let _ = writeln!(out, "BIC       {:.3}", self.bic);
        let status = if self.converged {
            "converged"
        } else {
            "NOT converged"
        };
        let _ = writeln!(out, "{status} after {} iterations", self.iterations);
        let _ = writeln!(out);
        let width = self
            .gamma
            .iter()
            .map(|r| set_label(&r.subset).len())
            .max()
            .unwrap_or(0)
            .max(5);
        let _ = writeln!(out, "{:<width$}  {:>12}  {:>10}", "gamma", "estimate", "se");
        for row in &self.gamma {
            let note = if row.constrained {
                "  (fixed at 0)"
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "{:<width$}  {:>12.6}  {:>10.6}{note}",
                set_label(&row.subset),
                tidy(row.estimate),
                tidy(row.se)
            );
        }
        out
    }
}

/// Avoids printing `-0.000000` for values that are zero up to rounding.
fn tidy(x: f64) -> f64 {
    if x.abs() < 5e-7 {
        0.0
    } else {
        x
    }
}

pub fn set_label(names: &[String]) -> String {
    if names.is_empty() {
        "{}".to_string()
    } else {
        format!("{{{}}}", names.join(","))
    }
}

#[derive(Serialize)]
pub struct SearchRow {
    pub rank: usize,
    /// Position in the edge-bit enumeration of all graphs.
    pub index: usize,
    pub edges: Vec<[String; 2]>,
    pub deviance: f64,
    pub df: usize,
    pub p_value: f64,
    pub bic: f64,
    pub converged: bool,
    pub passes: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Serialize)]
pub struct SearchOutput {
    pub alpha: f64,
    pub variables: Vec<String>,
    pub selected: Option<SearchRow>,
    pub models: Vec<SearchRow>,
}

fn search_row(result: &SearchResult, variables: &[String], rank: usize, index: usize) -> SearchRow {
    let m: &ModelReport = &result.models[index];
    let edges = m
        .edges
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|&(j, k)| [variables[j - 1].clone(), variables[k - 1].clone()])
        .collect();
    SearchRow {
        rank,
        index,
        edges,
        deviance: significant(m.deviance),
        df: m.df,
        p_value: significant(m.p_value),
        bic: significant(m.bic),
        converged: m.converged,
        passes: result.passes(m),
        error: m.error.clone(),
    }
}

impl SearchOutput {
    pub fn new(result: &SearchResult, variables: &[String]) -> Self {
        let models: Vec<SearchRow> = result
            .ranking()
            .into_iter()
            .enumerate()
            .map(|(rank, index)| search_row(result, variables, rank + 1, index))
            .collect();
        let selected = result.selected.map(|i| {
            let rank = models
                .iter()
                .position(|r| r.index == i)
                .map_or(0, |r| r + 1);
            search_row(result, variables, rank, i)
        });
        SearchOutput {
            alpha: result.alpha,
            variables: variables.to_vec(),
            selected,
            models,
        }
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let index_of = |name: &String| {
            self.variables
                .iter()
                .position(|v| v == name)
                .map_or(0, |i| i + 1)
        };
        let edge_text = |row: &SearchRow| {
            if row.edges.is_empty() {
                "(none)".to_string()
            } else {
                row.edges
                    .iter()
                    .map(|[a, b]| format!("{}-{}", index_of(a), index_of(b)))
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        };
        for (i, v) in self.variables.iter().enumerate() {
            let _ = writeln!(out, "{}: {v}", i + 1);
        }
        let _ = writeln!(out);
        let width = self
            .models
            .iter()
            .map(|r| edge_text(r).len())
            .max()
            .unwrap_or(0)
            .max(5);
        let _ = writeln!(
            out,
            "   {:>4}  {:<width$}  {:>10}  {:>3}  {:>8}  {:>10}",
            "rank", "edges", "deviance", "df", "p-value", "BIC"
        );
        for row in &self.models {
            let mark = match (&self.selected, row.converged) {
                (Some(s), _) if s.index == row.index => "*",
                (_, false) => "!",
                _ if !row.passes => "-",
                _ => " ",
            };
            let _ = writeln!(
                out,
                "{mark}  {:>4}  {:<width$}  {:>10.4}  {:>3}  {:>8.4}  {:>10.3}",
                row.rank,
                edge_text(row),
                row.deviance,
                row.df,
                row.p_value,
                row.bic
            );
        }
        let _ = writeln!(out);
        match &self.selected {
            Some(s) => {
                let named = if s.edges.is_empty() {
                    "no edges".to_string()
                } else {
                    s.edges
                        .iter()
                        .map(|[a, b]| format!("{a}-{b}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                };
                let _ = writeln!(
                    out,
                    "selected: {named} (BIC {:.3}, p {:.4})",
                    s.bic, s.p_value
                );
            }
            None => {
                let _ = writeln!(out, "no model has p-value >= {}", self.alpha);
            }
        }
        let _ = writeln!(
            out,
            "* selected   - p-value below {}   ! did not converge",
            self.alpha
        );
        out
    }
}

#[derive(Serialize)]
pub struct CheckRow {
    pub subset: Vec<String>,
    pub components: Vec<Vec<String>>,
    pub gamma: f64,
    pub se: f64,
    pub z: f64,
}

#[derive(Serialize)]
pub struct CheckOutput {
    pub variables: Vec<String>,
    pub edges: Vec<[String; 2]>,
    /// Whether the empirical distribution satisfies every implied
    /// independence exactly.
    pub markov_property_holds: bool,
    pub disconnected_sets: Vec<CheckRow>,
}

/// `|z|` above this is flagged in the text output.
pub const Z_FLAG: f64 = 1.96;

impl CheckOutput {
    pub fn row(
        variables: &[String],
        d: Subset,
        components: &[Subset],
        gamma: f64,
        se: f64,
    ) -> CheckRow {
        CheckRow {
            subset: names_of(variables, d),
            components: components.iter().map(|&c| names_of(variables, c)).collect(),
            gamma: significant(gamma),
            se: significant(se),
            z: significant(if se > 0.0 { gamma / se } else { f64::NAN }),
        }
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        if self.disconnected_sets.is_empty() {
            let _ = writeln!(out, "the graph is complete: no constraints");
            return out;
        }
        let width = self
            .disconnected_sets
            .iter()
            .map(|r| set_label(&r.subset).len())
            .max()
            .unwrap_or(0)
            .max(3);
        let _ = writeln!(
            out,
            "{:<width$}  {:>10}  {:>10}  {:>8}  components",
            "set", "gamma", "se", "z"
        );
        let mut flagged = 0;
        for r in &self.disconnected_sets {
            let flag = r.z.abs() > Z_FLAG;
            flagged += usize::from(flag);
            let parts = r
                .components
                .iter()
                .map(|c| set_label(c))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                out,
                "{:<width$}  {:>10.5}  {:>10.5}  {:>8.3}  {parts}{}",
                set_label(&r.subset),
                r.gamma,
                r.se,
                r.z,
                if flag { "  <-" } else { "" }
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{} of {} constrained interactions have |z| > {Z_FLAG}",
            flagged,
            self.disconnected_sets.len()
        );
        let holds = if self.markov_property_holds {
            "yes"
        } else {
            "no"
        };
        let _ = writeln!(
            out,
            "empirical distribution satisfies the independences exactly: {holds}"
        );
        out
    }
}
