//! Resolved run configuration, the `run.json` manifest, and the model and
//! strategy mini-languages.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use fisc_core::effects::{ReplacementStrategy, DEFAULT_REPEATS};
use fisc_core::mlp::SigmoidMlp;
use fisc_core::model::{LinearModel, LogisticModel, SumProductModel};
use fisc_core::rashomon::read_model_class;
use fisc_core::synthetic::SyntheticFn;
use fisc_core::train::{fit_logistic, fit_mlp, FitSettings};
use fisc_core::{apply_mask, rng, Dataset, FeatureSet, LossKind, MaskVector, SharedModel};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub model: String,
    pub mask_file: Option<PathBuf>,
    pub mask_index: Option<usize>,
    pub epsilon: f64,
    pub lr: f64,
    pub seed: u64,
    pub loss: LossKind,
    pub strategy: String,
    pub independent_permutations: bool,
    pub features: Vec<String>,
    pub radii: Vec<f64>,
    pub paper_literal: bool,
    pub grid_resolution: usize,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub functions: Vec<SyntheticFn>,
    pub shuffle_labels: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub model: String,
    pub n: usize,
    pub p: Option<usize>,
    pub noise: f64,
    pub seed: u64,
}

/// Everything needed to rerun a command; output directory and thread count
/// are deliberately excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Manifest {
    Bench(BenchConfig),
    Generate(GenerateConfig),
    Search(RunConfig),
    Fis(RunConfig),
    Halo(RunConfig),
    Swarm(RunConfig),
    MlpAnalytic(RunConfig),
}

impl Manifest {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

pub fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::fs::canonicalize(path).map_err(|e| CliError::io(path, e))
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::config(format!("--epsilon must be > 0 (got {})", self.epsilon)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(CliError::config(format!("--lr must be > 0 (got {})", self.lr)));
        }
        if self.max_steps == 0 {
            return Err(CliError::config("--max-steps must be >= 1"));
        }
        if self.mask_index.is_some() != self.mask_file.is_some() {
            return Err(CliError::config("--mask-file and --mask-index go together"));
        }
        Ok(())
    }

    pub fn load_data(&self) -> CliResult<Dataset> {
        let path = self
            .data
            .as_ref()
            .ok_or_else(|| CliError::config("--data is required for this command"))?;
        Ok(Dataset::from_csv(path, self.target.as_deref())?)
    }

    /// Feature sets from `--features`; `;` or repeated flags separate sets.
    pub fn feature_sets(&self, p: usize) -> CliResult<Vec<FeatureSet>> {
        let mut out = Vec::new();
        for chunk in self.features.iter().flat_map(|s| s.split(';')) {
            let chunk = chunk.trim();
            if chunk.is_empty() {
                continue;
            }
            let set = FeatureSet::parse(chunk)?;
            set.validate(p)?;
            out.push(set);
        }
        Ok(out)
    }

    pub fn replacement(&self, p: usize) -> CliResult<ReplacementStrategy> {
        let s = parse_strategy(&self.strategy, p, self.seed, self.independent_permutations)?;
        s.validate(p)?;
        Ok(s)
    }

    /// Reference model, with the selected model-class mask applied.
    pub fn reference(&self, data: &Dataset) -> CliResult<SharedModel> {
        let base = ModelSpec::parse(&self.model)?.build(Some(data), self.seed)?;
        if base.n_features() != data.p() {
            return Err(CliError::config(format!(
                "model '{}' takes {} features but the data has {}",
                self.model,
                base.n_features(),
                data.p()
            )));
        }
        match (&self.mask_file, self.mask_index) {
            (Some(path), Some(index)) => {
                let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
                let entries = read_model_class(file)?;
                let entry = entries.get(index).ok_or_else(|| {
                    CliError::config(format!("--mask-index {index} beyond {} entries", entries.len()))
                })?;
                Ok(Arc::new(apply_mask(base, MaskVector::new(entry.mask.clone())?)?))
            }
            _ => Ok(base),
        }
    }
}

/// `permutation[:R]`, `baseline:zeros` or `baseline:FILE` (one line of `p`
/// comma-separated values).
pub fn parse_strategy(s: &str, p: usize, seed: u64, independent: bool) -> CliResult<ReplacementStrategy> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim())),
        None => (s.trim(), None),
    };
    match kind {
        "permutation" => {
            let repeats = match arg {
                Some(a) => a
                    .parse()
                    .map_err(|_| CliError::config(format!("--strategy: bad repeat count '{a}'")))?,
                None => DEFAULT_REPEATS,
            };
            Ok(ReplacementStrategy::Permutation {
                repeats,
                seed: rng::derive_seed(seed, &[rng::label("permutation")]),
                independent,
            })
        }
        "baseline" => match arg {
            None | Some("zeros") => Ok(ReplacementStrategy::zeros(p)),
            Some(file) => {
                let path = Path::new(file);
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let values = parse_numbers(text.trim(), "baseline file")?;
                Ok(ReplacementStrategy::baseline(values))
            }
        },
        other => Err(CliError::config(format!(
            "--strategy: unknown kind '{other}' (expected permutation:R or baseline:zeros|FILE)"
        ))),
    }
}

fn parse_numbers(s: &str, what: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(format!("{what}: '{}' is not a number", t.trim())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Linear(Vec<f64>),
    Logistic(Vec<f64>, f64),
    SigmoidMlp(SigmoidMlp),
    Synthetic(SyntheticFn),
    SumProduct { k: usize, p: Option<usize> },
    FitLogistic(FitSettings),
    FitMlp { hidden: usize, settings: FitSettings },
}

impl ModelSpec {
    pub fn parse(spec: &str) -> CliResult<Self> {
        let spec = spec.trim();
        let (name, body) = spec
            .strip_suffix(')')
            .and_then(|s| s.split_once('('))
            .ok_or_else(|| CliError::config(format!("--model '{spec}': expected name(arguments)")))?;
        let body = body.trim();
        match name.trim() {
            "linear" => Ok(ModelSpec::Linear(parse_numbers(body, "linear")?)),
            "logistic" => {
                let mut v = parse_numbers(body, "logistic")?;
                if v.len() < 2 {
                    return Err(CliError::config("logistic(w...,b) needs weights and a bias"));
                }
                let b = v.pop().unwrap();
                Ok(ModelSpec::Logistic(v, b))
            }
            "sigmoid-mlp" => parse_sigmoid_mlp(body).map(ModelSpec::SigmoidMlp),
            "synthetic" => Ok(ModelSpec::Synthetic(body.parse()?)),
            "sum-product" => {
                let v: Vec<usize> = body
                    .split(',')
                    .map(|t| t.trim().parse().map_err(|_| CliError::config(format!("sum-product: bad integer '{t}'"))))
                    .collect::<CliResult<_>>()?;
                match v.as_slice() {
                    [k] => Ok(ModelSpec::SumProduct { k: *k, p: None }),
                    [k, p] => Ok(ModelSpec::SumProduct { k: *k, p: Some(*p) }),
                    _ => Err(CliError::config("sum-product(k) or sum-product(k,p)")),
                }
            }
            "fit-logistic" => {
                let kv = key_values(body)?;
                Ok(ModelSpec::FitLogistic(fit_settings(&kv, FitSettings::default())?))
            }
            "fit-mlp" => {
                let kv = key_values(body)?;
                let hidden = lookup(&kv, "hidden")?.map_or(Ok(8), |v| {
                    v.parse().map_err(|_| CliError::config(format!("fit-mlp: bad hidden '{v}'")))
                })?;
                let defaults = FitSettings {
                    iterations: 3000,
                    learning_rate: 0.05,
                    seed: 0,
                };
                Ok(ModelSpec::FitMlp {
                    hidden,
                    settings: fit_settings(&kv, defaults)?,
                })
            }
            other => Err(CliError::config(format!(
                "--model: unknown model '{other}' (linear, logistic, sigmoid-mlp, synthetic, sum-product, fit-logistic, fit-mlp)"
            ))),
        }
    }

    pub fn build(&self, data: Option<&Dataset>, seed: u64) -> CliResult<SharedModel> {
        let need_data = || data.ok_or_else(|| CliError::config("a fitted model needs --data"));
        let fit_seed = rng::derive_seed(seed, &[rng::label("fit")]);
        Ok(match self {
            ModelSpec::Linear(w) => Arc::new(LinearModel::new(w.clone(), 0.0)),
            ModelSpec::Logistic(w, b) => Arc::new(LogisticModel::new(w.clone(), *b)),
            ModelSpec::SigmoidMlp(m) => Arc::new(m.clone()),
            ModelSpec::Synthetic(f) => Arc::new(*f),
            ModelSpec::SumProduct { k, p } => {
                let p = match (p, data) {
                    (Some(p), _) => *p,
                    (None, Some(d)) => d.p(),
                    (None, None) => *k,
                };
                Arc::new(SumProductModel::new(*k, p)?)
            }
            ModelSpec::FitLogistic(s) => Arc::new(fit_logistic(need_data()?, FitSettings { seed: fit_seed, ..*s })?),
            ModelSpec::FitMlp { hidden, settings } => {
                Arc::new(fit_mlp(need_data()?, *hidden, FitSettings { seed: fit_seed, ..*settings })?)
            }
        })
    }
}

fn key_values(body: &str) -> CliResult<Vec<(String, String)>> {
    body.split([';', ','])
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::config(format!("expected key=value, got '{kv}'")))
        })
        .collect()
}

fn lookup<'a>(kv: &'a [(String, String)], key: &str) -> CliResult<Option<&'a str>> {
    Ok(kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str()))
}

fn fit_settings(kv: &[(String, String)], defaults: FitSettings) -> CliResult<FitSettings> {
    let mut s = defaults;
    for (k, v) in kv {
        let bad = || CliError::config(format!("fit: bad value '{v}' for '{k}'"));
        match k.as_str() {
            "iters" | "iterations" => s.iterations = v.parse().map_err(|_| bad())?,
            "lr" => s.learning_rate = v.parse().map_err(|_| bad())?,
            "hidden" => {}
            _ => return Err(CliError::config(format!("fit: unknown key '{k}'"))),
        }
    }
    Ok(s)
}

/// `alpha=1,2; beta=0.5,0.1/0.3,-0.2; b=0` — beta rows separated by `/`.
fn parse_sigmoid_mlp(body: &str) -> CliResult<SigmoidMlp> {
    let (mut alpha, mut beta, mut b) = (None, None, 0.0);
    for part in body.split(';').filter(|s| !s.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("sigmoid-mlp: expected key=value, got '{part}'")))?;
        match k.trim() {
            "alpha" => alpha = Some(parse_numbers(v, "alpha")?),
            "beta" => {
                beta = Some(
                    v.split('/')
                        .map(|row| parse_numbers(row, "beta"))
                        .collect::<CliResult<Vec<_>>>()?,
                )
            }
            "b" => {
                b = v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::config(format!("sigmoid-mlp: bad bias '{v}'")))?
            }
            other => return Err(CliError::config(format!("sigmoid-mlp: unknown key '{other}'"))),
        }
    }
    let alpha = alpha.ok_or_else(|| CliError::config("sigmoid-mlp needs alpha="))?;
    let beta = beta.ok_or_else(|| CliError::config("sigmoid-mlp needs beta="))?;
    Ok(SigmoidMlp::new(alpha, beta, b)?)
}
