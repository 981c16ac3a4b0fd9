//! `synth`, `separate` and `evaluate`.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use cca_core::ica::Nonlinearity;
use cca_core::{
    amari_index, cca_fit, synthesize, BlockPartition, CcaConfig, CopulaFamily, CopulaModel,
    FastIcaConfig, FitReport, MarginSpec, MixingSpec, PartitionMode, SeparationModel, SignalMatrix,
    SourceModel,
};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use crate::csv_io::{read_signal, read_table, write_signal, write_text};
use crate::error::{CliError, CliResult};
use crate::schema::{
    copula_from_json, copula_to_json, margin_to_json, matrix_to_rows, partition_from_json,
    read_json, rows_to_matrix, to_json_text, upper_triangle, write_json, BlockError, Metrics,
    Report, Truth,
};

#[derive(Debug, Parser)]
#[command(name = "cca", version, about = "Copula component analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw copula-coupled sources, mix them and write data plus ground truth.
    Synth(SynthArgs),
    /// Separate observations and fit a factorial copula to the sources.
    Separate(SeparateArgs),
    /// Score a separation report against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub channels: usize,
    #[arg(long)]
    pub samples: usize,
    /// Blocks separated by '|', channels by ',', 1-based; default all singletons.
    #[arg(long)]
    pub partition: Option<String>,
    /// Copula family per multi-channel block (comma list, or one for all).
    #[arg(long, value_delimiter = ',')]
    pub copula: Vec<String>,
    /// θ for Clayton/Gumbel blocks, in block order (or one for all).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub theta: Vec<f64>,
    /// Equicorrelation ρ for Gaussian blocks, in block order (or one for all).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub rho: Vec<f64>,
    /// Margin per channel (comma list, or one for all); `name` or `name:p1:p2`.
    #[arg(long, value_delimiter = ',', default_value = "laplace")]
    pub margins: Vec<String>,
    /// random | identity | file
    #[arg(long, default_value = "random")]
    pub mix: String,
    /// Row-major mixing matrix CSV for `--mix file`.
    #[arg(long)]
    pub mix_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
    #[arg(long, default_value = "truth.json")]
    pub truth_out: PathBuf,
    /// Also write the unmixed sources.
    #[arg(long)]
    pub sources_out: Option<PathBuf>,
    /// Emit a c1..cn header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SeparateArgs {
    /// Observations CSV, one sample per row.
    pub input: PathBuf,
    /// auto | product | gaussian | clayton | gumbel
    #[arg(long, default_value = "auto")]
    pub family: String,
    /// auto, or blocks such as "1,2|3"
    #[arg(long, default_value = "auto")]
    pub partition: String,
    #[arg(long, default_value_t = cca_core::inference::DEFAULT_TAU_THRESHOLD)]
    pub tau_threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = FastIcaConfig::default().max_iter)]
    pub max_iter: usize,
    #[arg(long, default_value_t = FastIcaConfig::default().tol)]
    pub tol: f64,
    /// tanh | cube
    #[arg(long, default_value = "tanh")]
    pub nonlinearity: String,
    #[arg(long)]
    pub sources_out: Option<PathBuf>,
    /// Report path; standard output when omitted.
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Recovered sources; checked against the report's channel count.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Metrics path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Separate(a) => separate(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

/// Uses `values[k]`, or `values[0]` for every `k` when one value is given.
fn pick<T: Clone>(values: &[T], k: usize) -> Option<T> {
    if values.len() == 1 {
        values.first().cloned()
    } else {
        values.get(k).cloned()
    }
}

fn check_list_len(len: usize, needed: usize, flag: &str) -> CliResult<()> {
    if len > 1 && len != needed {
        return Err(CliError::invalid(format!(
            "--{flag} lists {len} values but {needed} are needed (or give one for all)"
        )));
    }
    Ok(())
}

fn parse_margin(text: &str) -> CliResult<MarginSpec> {
    let mut parts = text.split(':');
    let name = parts.next().unwrap_or_default().trim();
    let params = parts
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| {
                CliError::invalid(format!("margin {text:?}: parameter {p:?} is not a number"))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(MarginSpec::from_name(name, &params)?)
}

fn equicorrelation(d: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho })
}

/// Builds the source model described by the synth flags.
pub fn source_model(a: &SynthArgs) -> CliResult<SourceModel> {
    let families = a
        .copula
        .iter()
        .map(|s| s.parse::<CopulaFamily>())
        .collect::<cca_core::Result<Vec<_>>>()?;
    for &theta in &a.theta {
        for f in &families {
            match f {
                CopulaFamily::Clayton => drop(CopulaModel::clayton(theta, 2)?),
                CopulaFamily::Gumbel => drop(CopulaModel::gumbel(theta)?),
                _ => {}
            }
        }
    }
    if a.channels < 2 {
        return Err(CliError::invalid(format!(
            "--channels must be at least 2, got {}",
            a.channels
        )));
    }
    let partition = match &a.partition {
        Some(text) => BlockPartition::parse(a.channels, text)?,
        None => BlockPartition::singletons(a.channels),
    };
    let joint: Vec<&Vec<usize>> = partition.blocks().iter().filter(|b| b.len() > 1).collect();
    if !joint.is_empty() && families.is_empty() {
        return Err(CliError::invalid(
            "--copula is required when the partition has a multi-channel block",
        ));
    }
    check_list_len(families.len(), joint.len(), "copula")?;

    let (mut n_theta, mut n_rho) = (0, 0);
    let mut models = Vec::with_capacity(partition.n_blocks());
    let mut k = 0;
    for block in partition.blocks() {
        if block.len() == 1 {
            models.push(CopulaModel::product(1));
            continue;
        }
        let family = pick(&families, k).expect("length checked above");
        let label = block
            .iter()
            .map(|c| (c + 1).to_string())
            .collect::<Vec<_>>()
            .join(",");
        let need = |values: &[f64], idx: usize, flag: &str| {
            pick(values, idx).ok_or_else(|| {
                CliError::invalid(format!("{family} block {label} needs a --{flag} value"))
            })
        };
        let model = match family {
            CopulaFamily::Product => CopulaModel::product(block.len()),
            CopulaFamily::Clayton => {
                n_theta += 1;
                CopulaModel::clayton(need(&a.theta, n_theta - 1, "theta")?, block.len())?
            }
            CopulaFamily::Gumbel => {
                n_theta += 1;
                if block.len() != 2 {
                    return Err(CliError::invalid(format!(
                        "gumbel block {label} must have exactly 2 channels"
                    )));
                }
                CopulaModel::gumbel(need(&a.theta, n_theta - 1, "theta")?)?
            }
            CopulaFamily::Gaussian => {
                n_rho += 1;
                let rho = need(&a.rho, n_rho - 1, "rho")?;
                CopulaModel::gaussian(equicorrelation(block.len(), rho))?
            }
        };
        models.push(model);
        k += 1;
    }
    check_list_len(a.theta.len(), n_theta, "theta")?;
    check_list_len(a.rho.len(), n_rho, "rho")?;
    if n_theta == 0 && !a.theta.is_empty() {
        return Err(CliError::invalid(
            "--theta given but no Clayton or Gumbel block uses it",
        ));
    }
    if n_rho == 0 && !a.rho.is_empty() {
        return Err(CliError::invalid(
            "--rho given but no Gaussian block uses it",
        ));
    }

    check_list_len(a.margins.len(), a.channels, "margins")?;
    let margins = (0..a.channels)
        .map(|i| parse_margin(&pick(&a.margins, i).expect("length checked above")))
        .collect::<CliResult<Vec<_>>>()?;
    let copula = CopulaModel::factorial(partition, models)?;
    Ok(SourceModel::new(copula, margins)?)
}

fn mixing_spec(a: &SynthArgs) -> CliResult<MixingSpec> {
    match (a.mix.as_str(), &a.mix_file) {
        ("random", None) => Ok(MixingSpec::Random),
        ("identity", None) => Ok(MixingSpec::Identity),
        ("file", Some(path)) => Ok(MixingSpec::Matrix(read_table(path)?.to_matrix())),
        ("file", None) => Err(CliError::invalid("--mix file needs --mix-file <path>")),
        ("random" | "identity", Some(_)) => {
            Err(CliError::invalid("--mix-file is only used with --mix file"))
        }
        (other, _) => Err(CliError::invalid(format!(
            "--mix must be random, identity or file, got {other:?}"
        ))),
    }
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let model = source_model(a)?;
    let mixing = mixing_spec(a)?;
    let data = synthesize(&model, &mixing, a.samples, a.seed)?;
    let CopulaModel::Factorial(f) = model.copula() else {
        unreachable!("source_model always builds a factorial copula")
    };
    let truth = Truth {
        mixing: matrix_to_rows(&data.mixing),
        partition: f.partition().one_based(),
        copula: copula_to_json(model.copula()),
        margins: model.margins().iter().map(margin_to_json).collect(),
        samples: a.samples,
        seed: a.seed,
    };
    write_signal(&a.out, &data.observations, a.header)?;
    write_json(&a.truth_out, &truth)?;
    if let Some(path) = &a.sources_out {
        write_signal(path, &data.sources, a.header)?;
    }
    Ok(())
}

/// Translates separate flags into a library configuration for `n` channels.
pub fn cca_config(a: &SeparateArgs, n: usize) -> CliResult<CcaConfig> {
    let families = match a.family.as_str() {
        "auto" => CopulaFamily::ALL.to_vec(),
        name => vec![name.parse::<CopulaFamily>()?],
    };
    let partition = match a.partition.as_str() {
        "auto" => PartitionMode::Auto,
        text => PartitionMode::Explicit(BlockPartition::parse(n, text)?),
    };
    let nonlinearity: Nonlinearity = a.nonlinearity.parse()?;
    Ok(CcaConfig {
        families,
        partition,
        tau_threshold: a.tau_threshold,
        ica: FastIcaConfig {
            nonlinearity,
            tol: a.tol,
            max_iter: a.max_iter,
            seed: a.seed,
        },
        seed: a.seed,
    })
}

pub fn report_json(separation: &SeparationModel, fit: &FitReport) -> Report {
    Report {
        demixing: matrix_to_rows(&separation.demixing()),
        partition: fit.partition.one_based(),
        copula: copula_to_json(&fit.copula),
        mutual_information: fit.mutual_information,
        copula_entropy: fit.copula_entropy,
        divergence: fit.divergence,
        log_likelihood: fit.log_likelihood,
        ica_iterations: fit.ica_iterations,
        seed: fit.seed,
        density_floor_hit: fit.density_floor_hit,
    }
}

fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write_text(p, text),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

pub fn separate(a: &SeparateArgs) -> CliResult<()> {
    let x = read_signal(&a.input, 2)?;
    let config = cca_config(a, x.n_channels())?;
    let (separation, fit) = cca_fit(&x, &config)?;
    if let Some(path) = &a.sources_out {
        write_signal(path, &separation.apply(&x)?, a.header)?;
    }
    emit(
        a.report_out.as_deref(),
        &to_json_text(&report_json(&separation, &fit)),
    )
}

/// Greedy one-to-one assignment of estimated components to true sources by
/// descending `|P_ij|`.
pub fn greedy_assignment(p: &DMatrix<f64>) -> Vec<usize> {
    let n = p.nrows();
    let mut entries: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    entries.sort_by(|&(a, b), &(c, d)| p[(c, d)].abs().total_cmp(&p[(a, b)].abs()));
    let mut map = vec![usize::MAX; n];
    let mut taken = vec![false; n];
    for (i, j) in entries {
        if map[i] == usize::MAX && !taken[j] {
            map[i] = j;
            taken[j] = true;
        }
    }
    map
}

fn block_params(model: &CopulaModel) -> Vec<f64> {
    match model {
        CopulaModel::Gaussian(g) => upper_triangle(g.correlation()),
        other => other.theta().into_iter().collect(),
    }
}

/// Compares each true block with the estimated block that maps onto it.
fn block_errors(
    truth: &CopulaModel,
    estimate: &CopulaModel,
    map: &[usize],
    signs: &[f64],
) -> Vec<BlockError> {
    let (CopulaModel::Factorial(t), CopulaModel::Factorial(e)) = (truth, estimate) else {
        unreachable!("both models are built as factorial copulas")
    };
    t.iter()
        .map(|(t_block, t_model)| {
            let matched = e.iter().find(|(e_block, _)| {
                let mut mapped: Vec<usize> = e_block.iter().map(|&i| map[i]).collect();
                mapped.sort_unstable();
                mapped == *t_block
            });
            let (estimated_family, abs_errors) = match matched {
                None => (None, None),
                Some((e_block, e_model)) => {
                    let same = e_model.family_name() == t_model.family_name();
                    let errors = same.then(|| {
                        let truth = block_params(t_model);
                        let est = match e_model {
                            CopulaModel::Gaussian(g) => {
                                // reorder to the true channel order and undo sign flips
                                let pos =
                                    |c: usize| e_block.iter().position(|&i| map[i] == c).unwrap();
                                let d = t_block.len();
                                (0..d)
                                    .flat_map(|a| (a + 1..d).map(move |b| (a, b)))
                                    .map(|(a, b)| {
                                        let (i, j) = (pos(t_block[a]), pos(t_block[b]));
                                        g.correlation()[(i, j)]
                                            * signs[e_block[i]]
                                            * signs[e_block[j]]
                                    })
                                    .collect()
                            }
                            other => block_params(other),
                        };
                        truth.iter().zip(&est).map(|(a, b)| (a - b).abs()).collect()
                    });
                    (Some(e_model.family_name().to_owned()), errors)
                }
            };
            BlockError {
                channels: t_block.iter().map(|c| c + 1).collect(),
                true_family: t_model.family_name().to_owned(),
                estimated_family,
                abs_errors,
            }
        })
        .collect()
}

pub fn evaluate_documents(
    report: &Report,
    truth: &Truth,
    data: Option<&SignalMatrix>,
) -> CliResult<Metrics> {
    let w = rows_to_matrix(&report.demixing, "report demixing")?;
    let a = rows_to_matrix(&truth.mixing, "truth mixing")?;
    let n = w.nrows();
    if a.nrows() != n {
        return Err(CliError::invalid(format!(
            "report has {n} channels, truth has {}",
            a.nrows()
        )));
    }
    if truth.margins.len() != n {
        return Err(CliError::invalid(format!(
            "truth lists {} margins for {n} channels",
            truth.margins.len()
        )));
    }
    if let Some(s) = data {
        if s.n_channels() != n {
            return Err(CliError::invalid(format!(
                "data has {} channels, report has {n}",
                s.n_channels()
            )));
        }
    }
    let est_partition = partition_from_json(n, &report.partition)?;
    let true_partition = partition_from_json(n, &truth.partition)?;
    let as_factorial = |json, p: &BlockPartition| -> CliResult<CopulaModel> {
        match copula_from_json(json, p)? {
            m @ CopulaModel::Factorial(_) => Ok(m),
            m => Ok(CopulaModel::factorial(p.clone(), vec![m])?),
        }
    };
    let est_model = as_factorial(&report.copula, &est_partition)?;
    let true_model = as_factorial(&truth.copula, &true_partition)?;

    let p = &w * &a;
    let amari = amari_index(&p)?;
    let map = greedy_assignment(&p);
    let signs: Vec<f64> = (0..n).map(|i| p[(i, map[i])].signum()).collect();
    let relabelled = BlockPartition::new(
        n,
        est_partition
            .blocks()
            .iter()
            .map(|b| b.iter().map(|&i| map[i]).collect())
            .collect(),
    )?;
    Ok(Metrics {
        amari_index: amari,
        component_map: map.iter().map(|j| j + 1).collect(),
        estimated_partition: relabelled.one_based(),
        true_partition: true_partition.one_based(),
        partition_match: relabelled == true_partition,
        block_errors: block_errors(&true_model, &est_model, &map, &signs),
        divergence: report.divergence,
        log_likelihood: report.log_likelihood,
    })
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let report: Report = read_json(&a.estimate)?;
    let truth: Truth = read_json(&a.truth)?;
    let data = a.data.as_deref().map(|p| read_signal(p, 1)).transpose()?;
    let metrics = evaluate_documents(&report, &truth, data.as_ref())?;
    emit(a.out.as_deref(), &to_json_text(&metrics))
}
