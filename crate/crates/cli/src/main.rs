//! `lml`: fit log-mean linear models to multivariate binary tables.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
mod input;
mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lml_core::inference::{describe_edges, MAX_SEARCH_VARIABLES};
use lml_core::oracle::{markov_check, EXACT_TOL};
use lml_core::{
    asymptotic_se, context_specific_constraints, deviance, exhaustive_search, fit,
    graph_constraints, ConstraintMatrix, CountVector, ParamKind, Parameter, SolverOptions, Subset,
    SubsetVector, TableSpec,
};
use serde::Serialize;

use error::{CliError, CliResult};
use input::{Coding, Input};
use report::{CheckOutput, FitOutput, GammaRow, SearchOutput};

#[derive(Parser)]
#[command(
    name = "lml",
    version,
    about = "Log-mean linear models for multivariate binary data"
)]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a table or parameter vector between parameterizations.
    Convert(ConvertArgs),
    /// Fit one model and report deviance, BIC and γ̂ with standard errors.
    Fit(FitArgs),
    /// Fit every bidirected graph model and select by BIC.
    Search(SearchArgs),
    /// Empirical γ on the disconnected sets of a graph.
    Check(CheckArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Table (JSON or CSV), parameter file (JSON), or `builtin:coppen`.
    #[arg(long = "in", value_name = "FILE")]
    input: String,
    /// Code LEVEL of VAR as 1.
    #[arg(long, value_name = "VAR=LEVEL", num_args = 1.., action = clap::ArgAction::Append)]
    coding: Vec<Coding>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = SolverOptions::default().max_iterations)]
    max_iterations: usize,
    #[arg(long, default_value_t = SolverOptions::default().tolerance)]
    tolerance: f64,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            ..SolverOptions::default()
        }
    }
}

#[derive(Args)]
struct ConvertArgs {
    #[command(flatten)]
    input: InputArgs,
    /// counts, pi, mu, gamma, lambda or tau.
    #[arg(long)]
    from: String,
    /// pi, mu, gamma, lambda or tau.
    #[arg(long)]
    to: ParamKind,
    /// Write here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Edges like `1-2,2-3` (names or indices), `none`, or a JSON graph file.
    #[arg(
        long,
        required_unless_present = "constraints",
        conflicts_with = "constraints"
    )]
    graph: Option<String>,
    /// JSON file with `sets` or dense `columns`.
    #[arg(long, value_name = "FILE")]
    constraints: Option<String>,
    /// Extra sets D with γ_D = 0, e.g. `2,3,4 1,2,3,4`.
    #[arg(long, value_name = "SETS", num_args = 1.., action = clap::ArgAction::Append)]
    extra_zeros: Vec<String>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Smallest acceptable p-value.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also write the ranked result as JSON to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    graph: String,
    /// Add this to every cell before computing empirical values.
    #[arg(long, value_name = "DELTA")]
    smooth: Option<f64>,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Convert(args) => convert(args),
        Command::Fit(args) => fit_model(args),
        Command::Search(args) => search(args),
        Command::Check(args) => check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize") + "\n"
}

fn write_file(path: &PathBuf, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn counts_of(table: &TableSpec) -> CliResult<CountVector> {
    Ok(CountVector::new(table.to_vector()?)?)
}

fn convert(args: ConvertArgs) -> CliResult<()> {
    let (variables, param) = match input::load(&args.input.input, &args.input.coding)? {
        Input::Table(table) => {
            let values = table.to_vector()?;
            let pi = match args.from.as_str() {
                "counts" => {
                    let total = values.sum();
                    if !(total > 0.0) {
                        return Err(CliError::Inadmissible("the table is empty".into()));
                    }
                    values.map(|n| n / total)
                }
                "pi" | "probability" => values,
                other => {
                    return Err(CliError::parse(format!(
                        "a table can only be read as counts or pi, not `{other}`"
                    )))
                }
            };
            (table.variable_names(), Parameter::probability(pi)?)
        }
        Input::Parameter { variables, param } => {
            let from: ParamKind = args.from.parse().map_err(CliError::Parse)?;
            if from != param.kind() {
                return Err(CliError::parse(format!(
                    "--from {} but the file holds {}",
                    from.name(),
                    param.kind().name()
                )));
            }
            (variables, param)
        }
    };
    let converted = param.convert(args.to)?;
    let text = json(&input::param_to_file(&variables, &converted));
    match &args.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fit_model(args: FitArgs) -> CliResult<()> {
    let table = input::load_table(&args.input.input, &args.input.coding)?;
    let variables = table.variable_names();
    let n = counts_of(&table)?;

    let (base, mut model) = match (&args.graph, &args.constraints) {
        (Some(g), _) => {
            let graph = input::parse_graph(&table, g)?;
            let named: Vec<(usize, usize)> = graph.edges();
            let text = named
                .iter()
                .map(|&(j, k)| format!("{}-{}", variables[j - 1], variables[k - 1]))
                .collect::<Vec<_>>();
            let text = if text.is_empty() {
                describe_edges(&[])
            } else {
                text.join(" ")
            };
            (graph_constraints(&graph), format!("graph {text}"))
        }
        (None, Some(path)) => (
            input::parse_constraints(&table, path)?,
            format!("constraints from {path}"),
        ),
        (None, None) => return Err(CliError::parse("give --graph or --constraints")),
    };
    let extra = input::parse_subsets(&table, &args.extra_zeros)?;
    let h = if extra.is_empty() {
        base
    } else {
        let labels: Vec<String> = extra
            .iter()
            .map(|&d| report::set_label(&input::names_of(&variables, d)))
            .collect();
        model.push_str(&format!(" + zeros {}", labels.join(" ")));
        context_specific_constraints(&base, &extra)?
    };

    let result = fit(&n, &h, &args.solver.options())?;
    let dev = deviance(&n, &result.psi);
    let se = if result.converged {
        Some(asymptotic_se(&result)?)
    } else {
        None
    };
    let constrained = constrained_sets(&h);
    let gamma = result
        .gamma
        .iter()
        .skip(1)
        .map(|(d, g)| GammaRow {
            subset: input::names_of(&variables, d),
            estimate: input::significant(g),
            se: se.as_ref().map_or(f64::NAN, |s| input::significant(s[d])),
            constrained: constrained.contains(&d),
        })
        .collect();
    let output = FitOutput {
        model,
        variables,
        deviance: input::significant(dev),
        df: result.df,
        p_value: input::significant(lml_core::inference::p_value(dev, result.df)),
        bic: input::significant(lml_core::bic(dev, result.df, n.total())),
        converged: result.converged,
        iterations: result.iterations,
        gamma,
    };
    print!(
        "{}",
        if args.json {
            json(&output)
        } else {
            output.text()
        }
    );
    if result.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "stopped after {} iterations with constraint residual {:.2e}",
            result.iterations, result.constraint_norm
        )))
    }
}

/// Sets pinned to zero by a selector matrix; dense matrices pin none
/// individually.
fn constrained_sets(h: &ConstraintMatrix) -> Vec<Subset> {
    h.sets().map(<[Subset]>::to_vec).unwrap_or_default()
}

fn search(args: SearchArgs) -> CliResult<()> {
    let table = input::load_table(&args.input.input, &args.input.coding)?;
    if table.p() > MAX_SEARCH_VARIABLES {
        return Err(CliError::parse(format!(
            "exhaustive search handles at most {MAX_SEARCH_VARIABLES} variables, the table has {}",
            table.p()
        )));
    }
    if table.p() < 2 {
        return Err(CliError::parse(
            "exhaustive search needs at least two variables",
        ));
    }
    let n = counts_of(&table)?;
    let result = exhaustive_search(&n, args.alpha, &args.solver.options())?;
    let output = SearchOutput::new(&result, &table.variable_names());
    let text = json(&output);
    if let Some(path) = &args.out {
        write_file(path, &text)?;
    }
    print!("{}", if args.json { text } else { output.text() });
    match result.selected {
        Some(_) => Ok(()),
        None => Err(CliError::NothingPasses { alpha: args.alpha }),
    }
}

fn check(args: CheckArgs) -> CliResult<()> {
    let table = input::load_table(&args.input.input, &args.input.coding)?;
    let variables = table.variable_names();
    let graph = input::parse_graph(&table, &args.graph)?;
    let mut counts = table.to_vector()?;
    if let Some(delta) = args.smooth {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(CliError::parse("--smooth must be positive"));
        }
        counts = counts.map(|c| c + delta);
    }
    if counts.values().iter().any(|&c| c <= 0.0) {
        return Err(CliError::Inadmissible(
            "the table has empty cells; use --smooth".into(),
        ));
    }
    let n = CountVector::new(counts)?;
    let pi = n.counts().map(|c| c / n.total());
    let gamma: SubsetVector = Parameter::probability(pi.clone())?
        .convert(ParamKind::LogMeanLinear)?
        .into_values();
    let saturated = fit(
        &n,
        &ConstraintMatrix::saturated(n.p())?,
        &SolverOptions::default(),
    )?;
    let se = asymptotic_se(&saturated)?;

    let rows = graph
        .disconnected_sets()
        .into_iter()
        .map(|d| {
            CheckOutput::row(
                &variables,
                d,
                &graph.connected_components(d),
                gamma[d],
                se[d],
            )
        })
        .collect();
    let output = CheckOutput {
        edges: graph
            .edges()
            .iter()
            .map(|&(j, k)| [variables[j - 1].clone(), variables[k - 1].clone()])
            .collect(),
        variables,
        markov_property_holds: markov_check(&pi, &graph, EXACT_TOL)?,
        disconnected_sets: rows,
    };
    print!(
        "{}",
        if args.json {
            json(&output)
        } else {
            output.text()
        }
    );
    Ok(())
}
