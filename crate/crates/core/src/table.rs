//! Self-describing contingency tables of binary variables.
//!
//! Each variable names the observed label that is coded `1`. The coding
//! matters: `μ`, `γ` and `τ` change under relabelling of states, although
//! bidirected graph models do not.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{LmlError, Result};
use crate::subset::{check_p, Subset, SubsetVector};

const COPPEN_JSON: &str = include_str!("../data/coppen.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    /// Label coded as `1`.
    pub one: String,
    /// Label coded as `0`.
    pub zero: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCount {
    /// One label per variable, in variable order.
    pub levels: Vec<String>,
    pub n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    pub variables: Vec<VariableSpec>,
    pub counts: Vec<CellCount>,
}

impl TableSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: TableSpec =
            serde_json::from_str(text).map_err(|e| LmlError::InvalidTable(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Table 1 of Coppen (1966): four symptoms of 362 psychiatric patients.
    ///
    /// Variables are Stability, Validity, Depression, Solidity, with
    /// introverted, energetic, yes and rigid coded `1`.
    pub fn coppen() -> Self {
        Self::from_json(COPPEN_JSON).expect("bundled table is valid")
    }

    pub fn p(&self) -> usize {
        self.variables.len()
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    /// 1-based index of a variable by name.
    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .map(|i| i + 1)
    }

    pub fn validate(&self) -> Result<()> {
        check_p(self.p())?;
        let mut names = BTreeSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(LmlError::InvalidTable(format!(
                    "duplicate variable `{}`",
                    v.name
                )));
            }
            if v.one == v.zero {
                return Err(LmlError::InvalidTable(format!(
                    "variable `{}` uses `{}` for both levels",
                    v.name, v.one
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for cell in &self.counts {
            let mask = self.cell_mask(&cell.levels)?;
            if !seen.insert(mask) {
                return Err(LmlError::InvalidTable(format!(
                    "cell {:?} listed twice",
                    cell.levels
                )));
            }
            if !(cell.n >= 0.0 && cell.n.is_finite()) {
                return Err(LmlError::InvalidTable(format!(
                    "cell {:?} has value {}",
                    cell.levels, cell.n
                )));
            }
        }
        Ok(())
    }

    fn cell_mask(&self, levels: &[String]) -> Result<usize> {
        if levels.len() != self.p() {
            return Err(LmlError::InvalidTable(format!(
                "cell {levels:?} has {} levels, expected {}",
                levels.len(),
                self.p()
            )));
        }
        let mut mask = 0;
        for (i, (label, var)) in levels.iter().zip(&self.variables).enumerate() {
            if *label == var.one {
                mask |= 1 << i;
            } else if *label != var.zero {
                return Err(LmlError::InvalidTable(format!(
                    "unknown level `{label}` for variable `{}`",
                    var.name
                )));
            }
        }
        Ok(mask)
    }

    /// Codes `level` of variable `name` as `1`.
    pub fn recode(&mut self, name: &str, level: &str) -> Result<()> {
        let var = self
            .variables
            .iter_mut()
            .find(|v| v.name == name)
            .ok_or_else(|| LmlError::InvalidTable(format!("no variable named `{name}`")))?;
        if var.zero == level {
            std::mem::swap(&mut var.one, &mut var.zero);
        } else if var.one != level {
            return Err(LmlError::InvalidTable(format!(
                "variable `{name}` has no level `{level}`"
            )));
        }
        Ok(())
    }

    /// Expands into a subset-indexed vector; absent cells are zero.
    pub fn to_vector(&self) -> Result<SubsetVector> {
        self.validate()?;
        let p = self.p();
        let mut values = vec![0.0; 1 << p];
        let mut present = vec![false; 1 << p];
        for cell in &self.counts {
            let m = self.cell_mask(&cell.levels)?;
            values[m] = cell.n;
            present[m] = true;
        }
        let missing = present.iter().filter(|&&b| !b).count();
        if missing > 0 {
            log::warn!("{missing} cells absent from the table; treating them as 0");
        }
        SubsetVector::new(p, values)
    }

    /// Builds a table from a subset-indexed vector.
    pub fn from_vector(variables: Vec<VariableSpec>, values: &SubsetVector) -> Result<Self> {
        if variables.len() != values.p() {
            return Err(LmlError::InvalidTable(
                "variable count does not match the vector".into(),
            ));
        }
        let counts = values
            .iter()
            .map(|(d, n)| CellCount {
                levels: variables
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        if d.contains(i + 1) {
                            v.one.clone()
                        } else {
                            v.zero.clone()
                        }
                    })
                    .collect(),
                n,
            })
            .collect();
        let spec = TableSpec { variables, counts };
        spec.validate()?;
        Ok(spec)
    }

    /// Names of the members of `d`, in variable order.
    pub fn subset_names(&self, d: Subset) -> Vec<String> {
        d.vars()
            .into_iter()
            .map(|v| self.variables[v - 1].name.clone())
            .collect()
    }

    /// Parses a subset given as variable names or 1-based indices.
    pub fn parse_subset(&self, items: &[String]) -> Result<Subset> {
        let lookup: HashMap<&str, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i + 1))
            .collect();
        let mut vars = Vec::with_capacity(items.len());
        for item in items {
            let item = item.trim();
            let v = match lookup.get(item) {
                Some(&v) => v,
                None => item
                    .parse::<usize>()
                    .map_err(|_| LmlError::InvalidTable(format!("unknown variable `{item}`")))?,
            };
            vars.push(v);
        }
        Subset::try_from_vars(&vars, self.p())
    }
}
