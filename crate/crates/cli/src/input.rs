//! Reading tables, parameter files, graphs and constraint files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use lml_core::table::{CellCount, VariableSpec};
use lml_core::{
    BidirectedGraph, ConstraintMatrix, GraphSpec, ParamKind, Parameter, Subset, SubsetVector,
    TableSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const BUILTIN_COPPEN: &str = "builtin:coppen";

/// `VAR=LEVEL`: code `LEVEL` of `VAR` as 1.
#[derive(Clone, Debug)]
pub struct Coding {
    pub variable: String,
    pub level: String,
}

impl std::str::FromStr for Coding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (variable, level) = s
            .split_once('=')
            .ok_or_else(|| format!("expected VAR=LEVEL, got `{s}`"))?;
        if variable.is_empty() || level.is_empty() {
            return Err(format!("expected VAR=LEVEL, got `{s}`"));
        }
        Ok(Coding {
            variable: variable.trim().to_string(),
            level: level.trim().to_string(),
        })
    }
}

/// A parameter vector keyed by variable-name subsets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamFile {
    pub kind: String,
    pub variables: Vec<String>,
    pub values: Vec<ParamEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamEntry {
    pub subset: Vec<String>,
    pub value: f64,
}

pub enum Input {
    Table(TableSpec),
    Parameter {
        variables: Vec<String>,
        param: Parameter,
    },
}

fn read(path: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_string(),
        source,
    })
}

/// Loads `--in`: the bundled table, a CSV table, or a JSON table or
/// parameter file.
pub fn load(path: &str, codings: &[Coding]) -> CliResult<Input> {
    if path == BUILTIN_COPPEN {
        return Ok(Input::Table(apply_codings(TableSpec::coppen(), codings)?));
    }
    if path.to_ascii_lowercase().ends_with(".csv") {
        return Ok(Input::Table(apply_codings(
            read_csv(&read(path)?, codings)?,
            codings,
        )?));
    }
    let text = read(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{path}: {e}")))?;
    if value.get("kind").is_some() {
        if !codings.is_empty() {
            return Err(CliError::parse("--coding only applies to tables"));
        }
        let file: ParamFile =
            serde_json::from_value(value).map_err(|e| CliError::parse(format!("{path}: {e}")))?;
        let (variables, param) = param_from_file(&file)?;
        Ok(Input::Parameter { variables, param })
    } else {
        let table: TableSpec =
            serde_json::from_value(value).map_err(|e| CliError::parse(format!("{path}: {e}")))?;
        table.validate()?;
        Ok(Input::Table(apply_codings(table, codings)?))
    }
}

/// Loads `--in` and insists on a table.
pub fn load_table(path: &str, codings: &[Coding]) -> CliResult<TableSpec> {
    match load(path, codings)? {
        Input::Table(t) => Ok(t),
        Input::Parameter { .. } => Err(CliError::parse(format!(
            "{path} holds a parameter vector, not a table"
        ))),
    }
}

fn apply_codings(mut table: TableSpec, codings: &[Coding]) -> CliResult<TableSpec> {
    for c in codings {
        table.recode(&c.variable, &c.level)?;
    }
    Ok(table)
}

/// CSV with a header of variable names. A final `n` or `count` column
/// holds cell counts; without it every row is one observation.
///
/// Variables whose labels are not `0`/`1` need a coding.
fn read_csv(text: &str, codings: &[Coding]) -> CliResult<TableSpec> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::parse(format!("csv header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let has_counts = header
        .last()
        .is_some_and(|h| h.eq_ignore_ascii_case("n") || h.eq_ignore_ascii_case("count"));
    let names: Vec<String> = if has_counts {
        header[..header.len() - 1].to_vec()
    } else {
        header.clone()
    };
    if names.is_empty() {
        return Err(CliError::parse("csv has no variable columns"));
    }

    let mut cells: BTreeMap<Vec<String>, f64> = BTreeMap::new();
    let mut order: Vec<Vec<String>> = Vec::new();
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(format!("csv row {}: {e}", line + 2)))?;
        if record.len() != header.len() {
            return Err(CliError::parse(format!(
                "csv row {} has {} fields",
                line + 2,
                record.len()
            )));
        }
        let levels: Vec<String> = record
            .iter()
            .take(names.len())
            .map(str::to_string)
            .collect();
        let n = if has_counts {
            let raw = &record[names.len()];
            raw.parse::<f64>()
                .map_err(|_| CliError::parse(format!("csv row {}: bad count `{raw}`", line + 2)))?
        } else {
            1.0
        };
        for (seen, level) in labels.iter_mut().zip(&levels) {
            if !seen.contains(level) {
                seen.push(level.clone());
            }
        }
        if !cells.contains_key(&levels) {
            order.push(levels.clone());
        }
        *cells.entry(levels).or_insert(0.0) += n;
    }

    let variables = names
        .iter()
        .zip(&labels)
        .map(|(name, seen)| csv_variable(name, seen, codings))
        .collect::<CliResult<Vec<_>>>()?;
    let counts = order
        .into_iter()
        .map(|levels| {
            let n = cells[&levels];
            CellCount { levels, n }
        })
        .collect();
    let table = TableSpec { variables, counts };
    table.validate()?;
    Ok(table)
}

fn csv_variable(name: &str, seen: &[String], codings: &[Coding]) -> CliResult<VariableSpec> {
    if seen.len() > 2 {
        return Err(CliError::parse(format!(
            "variable `{name}` has more than two levels: {seen:?}"
        )));
    }
    let spec = |one: &str, zero: &str| VariableSpec {
        name: name.to_string(),
        one: one.into(),
        zero: zero.into(),
    };
    if let Some(c) = codings.iter().rev().find(|c| c.variable == name) {
        if seen.len() == 2 && !seen.contains(&c.level) {
            return Err(CliError::parse(format!(
                "variable `{name}` has no level `{}`",
                c.level
            )));
        }
        let zero = seen
            .iter()
            .find(|l| **l != c.level)
            .cloned()
            .unwrap_or_else(|| format!("not {}", c.level));
        return Ok(spec(&c.level, &zero));
    }
    if seen.iter().all(|l| l == "0" || l == "1") {
        return Ok(spec("1", "0"));
    }
    Err(CliError::parse(format!(
        "variable `{name}` has levels {seen:?}; say which one is coded 1 with --coding {name}=LEVEL"
    )))
}

fn param_from_file(file: &ParamFile) -> CliResult<(Vec<String>, Parameter)> {
    let kind: ParamKind = file.kind.parse().map_err(CliError::Parse)?;
    let p = file.variables.len();
    if p == 0 || p > lml_core::subset::MAX_VARIABLES {
        return Err(CliError::parse(format!("{p} variables is out of range")));
    }
    let mut values = vec![None; 1 << p];
    for entry in &file.values {
        let d = subset_by_names(&file.variables, &entry.subset)?;
        if values[d.mask()].replace(entry.value).is_some() {
            return Err(CliError::parse(format!(
                "subset {:?} listed twice",
                entry.subset
            )));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(d, v)| {
            v.ok_or_else(|| {
                CliError::parse(format!(
                    "no value for subset {:?}",
                    names_of(&file.variables, Subset(d))
                ))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let param = Parameter::new(kind, SubsetVector::new(p, values)?)?;
    Ok((file.variables.clone(), param))
}

pub fn param_to_file(variables: &[String], param: &Parameter) -> ParamFile {
    ParamFile {
        kind: param.kind().name().to_string(),
        variables: variables.to_vec(),
        values: param
            .values()
            .iter()
            .map(|(d, value)| ParamEntry {
                subset: names_of(variables, d),
                value: significant(value),
            })
            .collect(),
    }
}

/// Rounds to 12 significant digits.
pub fn significant(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.11e}").parse().unwrap_or(x)
    } else {
        x
    }
}

pub fn names_of(variables: &[String], d: Subset) -> Vec<String> {
    d.vars()
        .into_iter()
        .map(|v| variables[v - 1].clone())
        .collect()
}

fn subset_by_names(variables: &[String], items: &[String]) -> CliResult<Subset> {
    let mut d = Subset::EMPTY;
    for item in items {
        let v = variables
            .iter()
            .position(|n| n == item)
            .ok_or_else(|| CliError::parse(format!("unknown variable `{item}`")))?;
        d = d.union(Subset::singleton(v + 1));
    }
    Ok(d)
}

/// A subset written as comma separated names or 1-based indices.
pub fn parse_subset(table: &TableSpec, text: &str) -> CliResult<Subset> {
    let items: Vec<String> = text
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(CliError::parse("empty subset"));
    }
    Ok(table.parse_subset(&items)?)
}

/// Whitespace separated subsets, e.g. `"2,3,4 1,2,3,4"`. Arguments may be
/// given separately or in one string.
pub fn parse_subsets(table: &TableSpec, args: &[String]) -> CliResult<Vec<Subset>> {
    args.iter()
        .flat_map(|a| a.split_whitespace())
        .map(|s| parse_subset(table, s))
        .collect()
}

/// `--graph`: a JSON graph file, `none`, or edges like `1-2,2-3` (names or
/// indices).
pub fn parse_graph(table: &TableSpec, arg: &str) -> CliResult<BidirectedGraph> {
    let p = table.p();
    if Path::new(arg).is_file() {
        let spec: GraphSpec = serde_json::from_str(&read(arg)?)
            .map_err(|e| CliError::parse(format!("{arg}: {e}")))?;
        if spec.p != p {
            return Err(CliError::parse(format!(
                "graph has {} nodes, table has {p} variables",
                spec.p
            )));
        }
        return Ok(BidirectedGraph::from_spec(&spec)?);
    }
    let trimmed = arg.trim();
    if trimmed.is_empty() || trimmed.eq_ignore_ascii_case("none") {
        return Ok(BidirectedGraph::empty(p)?);
    }
    let mut edges = Vec::new();
    for token in trimmed
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
    {
        let (a, b) = token
            .split_once('-')
            .ok_or_else(|| CliError::parse(format!("edge `{token}` should look like 1-2")))?;
        let var = |s: &str| -> CliResult<usize> {
            let d = table.parse_subset(&[s.to_string()])?;
            Ok(d.vars()[0])
        };
        edges.push((var(a)?, var(b)?));
    }
    Ok(BidirectedGraph::new(p, &edges)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstraintFile {
    #[serde(default)]
    sets: Option<Vec<Vec<serde_json::Value>>>,
    #[serde(default)]
    columns: Option<Vec<Vec<f64>>>,
}

/// `--constraints`: `{"sets": [[names or indices], ...]}` selecting `γ_D`,
/// or `{"columns": [[...], ...]}` with dense columns of length `2^p`
/// indexed by subset mask.
pub fn parse_constraints(table: &TableSpec, path: &str) -> CliResult<ConstraintMatrix> {
    let file: ConstraintFile =
        serde_json::from_str(&read(path)?).map_err(|e| CliError::parse(format!("{path}: {e}")))?;
    match (file.sets, file.columns) {
        (Some(sets), None) => {
            let sets = sets
                .iter()
                .map(|items| {
                    let items: Vec<String> = items
                        .iter()
                        .map(|v| match v {
                            serde_json::Value::String(s) => s.clone(),
                            other => other.to_string(),
                        })
                        .collect();
                    Ok(table.parse_subset(&items)?)
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok(ConstraintMatrix::selector(table.p(), sets)?)
        }
        (None, Some(columns)) => Ok(ConstraintMatrix::dense(table.p(), &columns)?),
        _ => Err(CliError::parse(format!(
            "{path}: give exactly one of `sets` or `columns`"
        ))),
    }
}
