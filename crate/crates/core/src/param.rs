//! Parameterizations of the multivariate Bernoulli distribution.
//!
//! All five parameters live in a [`SubsetVector`] tagged with a
//! [`ParamKind`]:
//!
//! | kind | definition |
//! |------|------------|
//! | probability `π` | `π_D = pr(X_D = 1, X_{V∖D} = 0)` |
//! | mean `μ` | `μ = Zπ`, so `μ_D = pr(X_D = 1)` |
//! | log-mean linear `γ` | `γ = Mᵀ log μ` |
//! | log-linear `λ` | `λ = Mᵀ log π` |
//! | dependence ratio `τ` | `τ_D = μ_D / Π_{v∈D} μ_v` for `|D| ≥ 2`, else `μ_D` |
//!
//! Conversions route through `μ` (and through `π` for `λ`), using only the
//! fast transforms and elementwise maps. A parameter is admissible exactly
//! when its image in the probability simplex is strictly positive; that is
//! checked by inversion on construction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{LmlError, Result};
use crate::subset::{Direction, Subset, SubsetVector};

/// Tolerance on `Σπ = 1` below which a probability table is accepted as is.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;
/// Tolerance on `Σπ = 1` below which a table is renormalized with a warning.
pub const PROBABILITY_RENORMALIZE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    Probability,
    Mean,
    LogMeanLinear,
    LogLinear,
    DependenceRatio,
}

impl ParamKind {
    pub const ALL: [ParamKind; 5] = [
        ParamKind::Probability,
        ParamKind::Mean,
        ParamKind::LogMeanLinear,
        ParamKind::LogLinear,
        ParamKind::DependenceRatio,
    ];

    /// Short name used in files and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            ParamKind::Probability => "pi",
            ParamKind::Mean => "mu",
            ParamKind::LogMeanLinear => "gamma",
            ParamKind::LogLinear => "lambda",
            ParamKind::DependenceRatio => "tau",
        }
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pi" | "probability" | "prob" => Ok(ParamKind::Probability),
            "mu" | "mean" | "moebius" | "mobius" => Ok(ParamKind::Mean),
            "gamma" | "lml" | "log-mean-linear" => Ok(ParamKind::LogMeanLinear),
            "lambda" | "log-linear" | "loglinear" => Ok(ParamKind::LogLinear),
            "tau" | "dependence-ratio" => Ok(ParamKind::DependenceRatio),
            other => Err(format!("unknown parameter kind `{other}`")),
        }
    }
}

/// A parameter of a multivariate Bernoulli distribution together with its
/// kind. Always admissible once constructed.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    kind: ParamKind,
    values: SubsetVector,
}

impl Parameter {
    /// Validates `values` as a parameter of the given kind.
    ///
    /// Probability-like inputs whose total is off by less than
    /// [`PROBABILITY_RENORMALIZE_TOL`] are renormalized with a warning.
    pub fn new(kind: ParamKind, values: SubsetVector) -> Result<Parameter> {
        match kind {
            ParamKind::Probability => {
                let pi = normalize_probability(values, kind)?;
                Ok(Parameter { kind, values: pi })
            }
            ParamKind::LogLinear => {
                let pi =
                    normalize_probability(values.zeta(Direction::OverSubsets).map(f64::exp), kind)?;
                // Re-derive so the stored λ reconstructs a normalized table.
                Ok(Parameter {
                    kind,
                    values: log_moebius(&pi, kind)?,
                })
            }
            ParamKind::Mean => {
                let mut mu = values;
                pin_empty(&mut mu, 1.0, kind)?;
                let param = Parameter { kind, values: mu };
                check_positive(&param.to_probability_unchecked(), kind)?;
                Ok(param)
            }
            ParamKind::LogMeanLinear => {
                let mut gamma = values;
                pin_empty(&mut gamma, 0.0, kind)?;
                let param = Parameter {
                    kind,
                    values: gamma,
                };
                check_positive(&param.to_probability_unchecked(), kind)?;
                Ok(param)
            }
            ParamKind::DependenceRatio => {
                let mut tau = values;
                pin_empty(&mut tau, 1.0, kind)?;
                for v in 1..=tau.p() {
                    let t = tau[Subset::singleton(v)];
                    if !(t > 0.0 && t < 1.0) {
                        return Err(inadmissible(
                            kind,
                            format!("τ_{{{v}}} = {t} is not in (0, 1)"),
                        ));
                    }
                }
                let param = Parameter { kind, values: tau };
                check_positive(&param.to_probability_unchecked(), kind)?;
                Ok(param)
            }
        }
    }

    pub fn probability(values: SubsetVector) -> Result<Parameter> {
        Parameter::new(ParamKind::Probability, values)
    }

    /// Normalizes a table of strictly positive counts into `π`.
    pub fn from_counts(counts: &SubsetVector) -> Result<Parameter> {
        if let Some((d, n)) = counts.iter().find(|&(_, n)| n <= 0.0) {
            return Err(inadmissible(
                ParamKind::Probability,
                format!("cell {d} has count {n}; strictly positive cells are required"),
            ));
        }
        let total = counts.sum();
        Parameter::probability(counts.map(|n| n / total))
    }

    pub fn kind(&self) -> ParamKind {
        self.kind
    }

    pub fn values(&self) -> &SubsetVector {
        &self.values
    }

    pub fn into_values(self) -> SubsetVector {
        self.values
    }

    pub fn p(&self) -> usize {
        self.values.p()
    }

    pub fn get(&self, d: Subset) -> f64 {
        self.values[d]
    }

    /// Converts to another parameterization of the same distribution.
    pub fn convert(&self, target: ParamKind) -> Result<Parameter> {
        if target == self.kind {
            return Ok(self.clone());
        }
        let values = match target {
            ParamKind::Probability => self.to_probability_unchecked(),
            ParamKind::LogLinear => log_moebius(&self.to_probability_unchecked(), target)?,
            ParamKind::Mean => self.to_mean(),
            ParamKind::LogMeanLinear => log_moebius(&self.to_mean(), target)?,
            ParamKind::DependenceRatio => mean_to_tau(&self.to_mean()),
        };
        Ok(Parameter {
            kind: target,
            values,
        })
    }

    fn to_mean(&self) -> SubsetVector {
        let mut mu = match self.kind {
            ParamKind::Mean => return self.values.clone(),
            ParamKind::Probability => self.values.zeta(Direction::OverSupersets),
            ParamKind::LogLinear => self
                .values
                .zeta(Direction::OverSubsets)
                .map(f64::exp)
                .zeta(Direction::OverSupersets),
            ParamKind::LogMeanLinear => self.values.zeta(Direction::OverSubsets).map(f64::exp),
            ParamKind::DependenceRatio => tau_to_mean(&self.values),
        };
        mu[Subset::EMPTY] = 1.0;
        mu
    }

    fn to_probability_unchecked(&self) -> SubsetVector {
        match self.kind {
            ParamKind::Probability => self.values.clone(),
            ParamKind::LogLinear => self.values.zeta(Direction::OverSubsets).map(f64::exp),
            _ => self.to_mean().moebius(Direction::OverSupersets),
        }
    }

    /// The parameter of the marginal distribution of `X_A`, re-indexed over
    /// `|A|` variables in ascending label order.
    ///
    /// For `μ`, `γ` and `τ` this is the subvector indexed by the subsets of
    /// `A`; `π` and `λ` are recomputed from the marginal table.
    pub fn marginalize(&self, margin: Subset) -> Result<Parameter> {
        let full = self.values.full_set();
        if margin.is_empty() || !margin.is_subset_of(full) {
            return Err(LmlError::SubsetOutOfRange {
                mask: margin.mask(),
                p: self.p(),
            });
        }
        match self.kind {
            ParamKind::Mean | ParamKind::LogMeanLinear | ParamKind::DependenceRatio => {
                Ok(Parameter {
                    kind: self.kind,
                    values: self.values.restrict(margin)?,
                })
            }
            ParamKind::Probability | ParamKind::LogLinear => {
                let pi = marginal_table(&self.to_probability_unchecked(), margin)?;
                Parameter {
                    kind: ParamKind::Probability,
                    values: pi,
                }
                .convert(self.kind)
            }
        }
    }

    /// Mean parameter of `X_{V∖{v}}` given `X_v = 1`:
    /// `μ^{(v)}_D = μ_{D∪{v}} / μ_{v}`.
    pub fn condition_on_one(&self, v: usize) -> Result<Parameter> {
        let p = self.p();
        if v == 0 || v > p {
            return Err(LmlError::VariableOutOfRange { var: v, p });
        }
        if p < 2 {
            return Err(LmlError::VariableCountOutOfRange(p - 1));
        }
        let mu = self.to_mean();
        let sv = Subset::singleton(v);
        let denom = mu[sv];
        if denom <= 0.0 {
            return Err(inadmissible(
                ParamKind::Mean,
                format!("μ_{{{v}}} = {denom} is not positive"),
            ));
        }
        let rest = Subset::full(p).difference(sv);
        let values = (0..1usize << (p - 1))
            .map(|c| mu[Subset::expand(c, rest).union(sv)] / denom)
            .collect();
        let mut cond = SubsetVector::new(p - 1, values)?;
        cond[Subset::EMPTY] = 1.0;
        Ok(Parameter {
            kind: ParamKind::Mean,
            values: cond,
        })
    }
}

/// Marginal probability table of `X_A`, re-indexed over `|A|` variables.
pub fn marginal_table(pi: &SubsetVector, margin: Subset) -> Result<SubsetVector> {
    let q = margin.len();
    let mut out = SubsetVector::zeros(q)?;
    for (d, x) in pi.iter() {
        out[Subset(d.intersection(margin).compress(margin))] += x;
    }
    Ok(out)
}

fn inadmissible(kind: ParamKind, reason: String) -> LmlError {
    LmlError::Inadmissible {
        kind: kind.name(),
        reason,
    }
}

fn pin_empty(v: &mut SubsetVector, expected: f64, kind: ParamKind) -> Result<()> {
    let got = v[Subset::EMPTY];
    if (got - expected).abs() > PROBABILITY_SUM_TOL {
        return Err(inadmissible(
            kind,
            format!("entry at ∅ is {got}, expected {expected}"),
        ));
    }
    v[Subset::EMPTY] = expected;
    Ok(())
}

fn check_positive(pi: &SubsetVector, kind: ParamKind) -> Result<()> {
    match pi.iter().find(|&(_, x)| !(x > 0.0)) {
        Some((d, x)) => Err(inadmissible(
            kind,
            format!("implied probability of cell {d} is {x}"),
        )),
        None => Ok(()),
    }
}

fn normalize_probability(pi: SubsetVector, kind: ParamKind) -> Result<SubsetVector> {
    check_positive(&pi, kind)?;
    let total = pi.sum();
    let gap = (total - 1.0).abs();
    if gap <= PROBABILITY_SUM_TOL {
        Ok(pi)
    } else if gap <= PROBABILITY_RENORMALIZE_TOL {
        log::warn!("probabilities sum to {total}; renormalizing");
        Ok(pi.map(|x| x / total))
    } else {
        Err(inadmissible(
            kind,
            format!("implied probabilities sum to {total}"),
        ))
    }
}

/// `Mᵀ log v`, rejecting non-positive entries.
fn log_moebius(v: &SubsetVector, kind: ParamKind) -> Result<SubsetVector> {
    if let Some((d, x)) = v.iter().find(|&(_, x)| !(x > 0.0)) {
        return Err(inadmissible(kind, format!("cannot take log of {x} at {d}")));
    }
    let mut out = v.map(f64::ln).moebius(Direction::OverSubsets);
    if kind == ParamKind::LogMeanLinear {
        out[Subset::EMPTY] = 0.0;
    }
    Ok(out)
}

fn singleton_product(mu: &SubsetVector, d: Subset) -> f64 {
    d.vars()
        .into_iter()
        .map(|v| mu[Subset::singleton(v)])
        .product()
}

fn mean_to_tau(mu: &SubsetVector) -> SubsetVector {
    let mut tau = mu.clone();
    for (d, x) in mu.iter() {
        if d.len() >= 2 {
            tau[d] = x / singleton_product(mu, d);
        }
    }
    tau
}

fn tau_to_mean(tau: &SubsetVector) -> SubsetVector {
    let mut mu = tau.clone();
    for (d, x) in tau.iter() {
        if d.len() >= 2 {
            mu[d] = x * singleton_product(tau, d);
        }
    }
    mu
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi(values: &[f64]) -> Parameter {
        Parameter::probability(SubsetVector::from_values(values.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn fair_coins_have_zero_interaction() {
        let g = pi(&[0.25; 4]).convert(ParamKind::LogMeanLinear).unwrap();
        let half = 0.5f64.ln();
        let expected = [0.0, half, half, 0.0];
        for (a, b) in g.values().values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn hand_computed_p2() {
        let p = pi(&[0.4, 0.3, 0.2, 0.1]);
        let mu = p.convert(ParamKind::Mean).unwrap();
        for (a, b) in mu.values().values().iter().zip([1.0, 0.4, 0.3, 0.1]) {
            assert!((a - b).abs() < 1e-15);
        }
        let g = p.convert(ParamKind::LogMeanLinear).unwrap();
        assert!((g.get(Subset::full(2)) - (0.1f64 / 0.12).ln()).abs() < 1e-14);
        assert!((g.get(Subset::full(2)) + 0.18232).abs() < 1e-5);
        let tau = mu.convert(ParamKind::DependenceRatio).unwrap();
        assert!((tau.get(Subset::full(2)) - 0.833_333_333_333).abs() < 1e-11);
        assert_eq!(tau.get(Subset::singleton(1)), mu.get(Subset::singleton(1)));
    }

    #[test]
    fn uniform_log_linear() {
        let l = pi(&[0.25; 4]).convert(ParamKind::LogLinear).unwrap();
        let expected = [0.25f64.ln(), 0.0, 0.0, 0.0];
        for (a, b) in l.values().values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_subvector() {
        let mu = pi(&[0.4, 0.3, 0.2, 0.1]).convert(ParamKind::Mean).unwrap();
        let m1 = mu.marginalize(Subset::from_vars(&[1])).unwrap();
        assert_eq!(m1.values().values(), &[1.0, 0.4]);
        assert_eq!(mu.marginalize(Subset::full(2)).unwrap(), mu);
        assert!(mu.marginalize(Subset::EMPTY).is_err());
    }

    #[test]
    fn condition_on_second_variable() {
        let mu = pi(&[0.4, 0.3, 0.2, 0.1]).convert(ParamKind::Mean).unwrap();
        let c = mu.condition_on_one(2).unwrap();
        assert_eq!(c.p(), 1);
        assert_eq!(c.get(Subset::EMPTY), 1.0);
        assert!((c.get(Subset::singleton(1)) - 0.1 / 0.3).abs() < 1e-15);
        assert!(mu.condition_on_one(3).is_err());
    }

    #[test]
    fn probability_sum_rules() {
        let ok = SubsetVector::from_values(vec![0.25, 0.25, 0.25, 0.25 + 5e-13]).unwrap();
        assert!(Parameter::probability(ok).is_ok());
        let renorm = SubsetVector::from_values(vec![0.25, 0.25, 0.25, 0.25 + 5e-10]).unwrap();
        let p = Parameter::probability(renorm).unwrap();
        assert!((p.values().sum() - 1.0).abs() < 1e-15);
        let bad = SubsetVector::from_values(vec![0.25, 0.25, 0.25, 0.26]).unwrap();
        assert!(matches!(
            Parameter::probability(bad),
            Err(LmlError::Inadmissible { .. })
        ));
        let neg = SubsetVector::from_values(vec![0.5, 0.5, 0.1, -0.1]).unwrap();
        assert!(Parameter::probability(neg).is_err());
    }

    #[test]
    fn inadmissible_gamma_rejected() {
        // Strong positive interaction forces μ_{12} > min(μ_1, μ_2).
        let g = SubsetVector::from_values(vec![0.0, 0.5f64.ln(), 0.5f64.ln(), 1.5]).unwrap();
        assert!(matches!(
            Parameter::new(ParamKind::LogMeanLinear, g),
            Err(LmlError::Inadmissible { kind: "gamma", .. })
        ));
        let nonzero_empty = SubsetVector::from_values(vec![0.1, -1.0, -1.0, 0.0]).unwrap();
        assert!(Parameter::new(ParamKind::LogMeanLinear, nonzero_empty).is_err());
    }

    #[test]
    fn tau_singletons_checked() {
        let t = SubsetVector::from_values(vec![1.0, 1.2, 0.5, 1.0]).unwrap();
        assert!(Parameter::new(ParamKind::DependenceRatio, t).is_err());
    }

    #[test]
    fn kind_names_parse() {
        for k in ParamKind::ALL {
            assert_eq!(k.name().parse::<ParamKind>().unwrap(), k);
        }
        assert!("eta".parse::<ParamKind>().is_err());
    }

    #[test]
    fn counts_need_positive_cells() {
        let n = SubsetVector::from_values(vec![3.0, 0.0, 1.0, 1.0]).unwrap();
        assert!(Parameter::from_counts(&n).is_err());
        let n = SubsetVector::from_values(vec![3.0, 1.0, 1.0, 5.0]).unwrap();
        let p = Parameter::from_counts(&n).unwrap();
        assert_eq!(p.get(Subset::EMPTY), 0.3);
    }
}
