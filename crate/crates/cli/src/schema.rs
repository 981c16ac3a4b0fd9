//! JSON documents exchanged by the commands: separation report, ground truth
//! and evaluation metrics.
//!
//! Copulas are written as `{"family": name, "params": ...}`. Product has no
//! parameters, Clayton and Gumbel carry `[θ]`, Gaussian carries the upper
//! triangle of its correlation matrix in row order, and a factorial model
//! carries one such object per block, in partition order.

use std::path::Path;

use cca_core::{BlockPartition, CopulaModel, MarginSpec};
use nalgebra::DMatrix;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;

use crate::csv_io::write_text;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaJson {
    pub family: String,
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub demixing: Vec<Vec<f64>>,
    pub partition: Vec<Vec<usize>>,
    pub copula: CopulaJson,
    pub mutual_information: f64,
    pub copula_entropy: f64,
    pub divergence: f64,
    pub log_likelihood: f64,
    pub ica_iterations: usize,
    pub seed: u64,
    pub density_floor_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginJson {
    pub family: String,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub mixing: Vec<Vec<f64>>,
    pub partition: Vec<Vec<usize>>,
    pub copula: CopulaJson,
    pub margins: Vec<MarginJson>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockError {
    /// True channels of the block, 1-based.
    pub channels: Vec<usize>,
    pub true_family: String,
    /// Family fitted to the matching estimated block, if one exists.
    pub estimated_family: Option<String>,
    /// `|estimate − truth|` per parameter when the families agree.
    pub abs_errors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub amari_index: f64,
    /// True source (1-based) assigned to each estimated component.
    pub component_map: Vec<usize>,
    /// Estimated partition relabelled through `component_map`.
    pub estimated_partition: Vec<Vec<usize>>,
    pub true_partition: Vec<Vec<usize>>,
    pub partition_match: bool,
    pub block_errors: Vec<BlockError>,
    pub divergence: f64,
    pub log_likelihood: f64,
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> CliResult<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::invalid(format!(
            "{what} must be a non-empty square matrix"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn partition_from_json(n: usize, blocks: &[Vec<usize>]) -> CliResult<BlockPartition> {
    let zero_based = blocks
        .iter()
        .map(|b| {
            b.iter()
                .map(|&c| {
                    c.checked_sub(1)
                        .ok_or_else(|| CliError::invalid("partition channels are 1-based"))
                })
                .collect::<CliResult<Vec<_>>>()
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(BlockPartition::new(n, zero_based)?)
}

pub fn copula_to_json(model: &CopulaModel) -> CopulaJson {
    let params = match model {
        CopulaModel::Product(_) => Value::Array(vec![]),
        CopulaModel::Clayton(_) | CopulaModel::Gumbel(_) => {
            Value::from(vec![model.theta().expect("archimedean models carry theta")])
        }
        CopulaModel::Gaussian(g) => Value::from(upper_triangle(g.correlation())),
        CopulaModel::Factorial(f) => Value::Array(
            f.block_models()
                .iter()
                .map(|m| json_value(&copula_to_json(m)))
                .collect(),
        ),
    };
    CopulaJson {
        family: model.family_name().to_owned(),
        params,
    }
}

fn json_value(c: &CopulaJson) -> Value {
    serde_json::to_value(c).expect("copula json is always serializable")
}

pub fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .map(|(i, j)| m[(i, j)])
        .collect()
}

fn number_list(params: &Value, family: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::invalid(format!("{family} params must be a list of numbers"));
    params
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|v| v.as_f64().ok_or_else(bad))
        .collect()
}

/// Rebuilds a copula of dimension `dim`; factorial models need `partition`.
pub fn copula_from_json(c: &CopulaJson, partition: &BlockPartition) -> CliResult<CopulaModel> {
    let dim = partition.n_channels();
    let family = c.family.as_str();
    if family == "factorial" {
        let items = c
            .params
            .as_array()
            .ok_or_else(|| CliError::invalid("factorial params must be a list of block copulas"))?;
        if items.len() != partition.n_blocks() {
            return Err(CliError::invalid(format!(
                "factorial copula has {} blocks, partition has {}",
                items.len(),
                partition.n_blocks()
            )));
        }
        let mut models = Vec::with_capacity(items.len());
        for (item, block) in items.iter().zip(partition.blocks()) {
            let block_json: CopulaJson = serde_json::from_value(item.clone())
                .map_err(|e| CliError::invalid(format!("block copula: {e}")))?;
            if block_json.family == "factorial" {
                return Err(CliError::invalid("factorial copulas cannot be nested"));
            }
            models.push(copula_from_json(
                &block_json,
                &BlockPartition::singletons(block.len()),
            )?);
        }
        return Ok(CopulaModel::factorial(partition.clone(), models)?);
    }
    let p = number_list(&c.params, family)?;
    let model = match (family, p.as_slice()) {
        ("product", []) => CopulaModel::product(dim),
        ("clayton", [theta]) => CopulaModel::clayton(*theta, dim)?,
        ("gumbel", [theta]) if dim == 2 => CopulaModel::gumbel(*theta)?,
        ("gaussian", r) if r.len() == dim * (dim.saturating_sub(1)) / 2 => {
            let mut rho = DMatrix::identity(dim, dim);
            let mut k = 0;
            for i in 0..dim {
                for j in i + 1..dim {
                    rho[(i, j)] = r[k];
                    rho[(j, i)] = r[k];
                    k += 1;
                }
            }
            CopulaModel::gaussian(rho)?
        }
        _ => {
            return Err(CliError::invalid(format!(
                "invalid copula {family:?} with {} parameters for dimension {dim}",
                p.len()
            )))
        }
    };
    Ok(model)
}

pub fn margin_to_json(m: &MarginSpec) -> MarginJson {
    MarginJson {
        family: m.name().to_owned(),
        params: m.params().to_vec(),
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn to_json_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents are always serializable");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &to_json_text(value))
}
