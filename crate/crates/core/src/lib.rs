//! Log-mean linear models for multivariate binary data.
//!
//! The log-mean linear parameter `γ = Mᵀ log Zπ` is the Möbius transform of
//! the log mean parameter of a multivariate Bernoulli distribution. Marginal
//! independence statements, and in particular bidirected graph models,
//! become linear constraints `Hᵀγ = 0`, which this crate fits by
//! constrained maximum likelihood.
//!
//! ```
//! use lml_core::{fit, graph_constraints, BidirectedGraph, CountVector, SolverOptions, TableSpec};
//!
//! let counts = CountVector::new(TableSpec::coppen().to_vector().unwrap()).unwrap();
//! let graph = BidirectedGraph::new(4, &[(1, 2), (2, 3), (3, 4)]).unwrap();
//! let result = fit(&counts, &graph_constraints(&graph), &SolverOptions::default()).unwrap();
//! assert!(result.converged);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graph;
pub mod inference;
pub mod mle;
pub mod oracle;
pub mod param;
pub mod special;
pub mod subset;
pub mod table;

pub use error::{LmlError, Result};
pub use graph::{
    context_specific_constraints, graph_constraints, BidirectedGraph, ConstraintMatrix, GraphSpec,
};
pub use inference::{bic, chi2_sf, deviance, exhaustive_search, ModelReport, SearchResult};
pub use mle::{asymptotic_se, fit, fit_from, CountVector, FitResult, SolverOptions};
pub use param::{ParamKind, Parameter};
pub use subset::{build_matrix, Direction, MatrixKind, Subset, SubsetMatrix, SubsetVector};
pub use table::TableSpec;
