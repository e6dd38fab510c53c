//! Synthetic interaction-detection benchmark.
//!
//! Four 40-ary functions with planted pairwise interactions, the four-point
//! mixed difference used to detect them, and ROC-AUC scoring against the
//! planted labels.
//!
//! The wedge primitive `⋀(x; z)` is read conjunctively: it is `1` when `x`
//! matches `z` at *every* key and `-1` otherwise. A disjunctive reading makes
//! it constant on full-support inputs and erases the planted interactions.
//!
//! Detection scores average the normalized squared mixed difference over two
//! contexts: the remaining coordinates held at `x*`, and held at `x'`. With
//! `x*` alone, wedges keyed to `x'` values (F3's first block, F4's `x'_3`
//! term) can never fire and their pairs score zero.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::FeatureSet;
use crate::effects::fis_in_context;
use crate::error::{Error, Result};
use crate::loss::check_arity;
use crate::model::PredictiveModel;
use crate::{par, rng};

pub const SYNTHETIC_ARITY: usize = 40;

/// Sample of interest `x*` and neutral reference `x'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionContext {
    x_star: Vec<f64>,
    x_prime: Vec<f64>,
}

impl InteractionContext {
    pub fn new(x_star: Vec<f64>, x_prime: Vec<f64>) -> Result<Self> {
        if x_star.len() != x_prime.len() {
            return Err(Error::Arity {
                what: "context baseline",
                expected: x_star.len(),
                found: x_prime.len(),
            });
        }
        if x_star.iter().chain(&x_prime).any(|v| !v.is_finite()) {
            return Err(Error::numeric("context vectors must be finite"));
        }
        Ok(Self { x_star, x_prime })
    }

    /// `x* = 1`, `x' = -1` in 40 dimensions.
    pub fn benchmark() -> Self {
        Self {
            x_star: vec![1.0; SYNTHETIC_ARITY],
            x_prime: vec![-1.0; SYNTHETIC_ARITY],
        }
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn x_prime(&self) -> &[f64] {
        &self.x_prime
    }

    /// Span `h_i = x*_i - x'_i`.
    pub fn h(&self, i: usize) -> f64 {
        self.x_star[i] - self.x_prime[i]
    }

    /// Roles exchanged: the rest coordinates then sit at the old `x'`.
    pub fn swapped(&self) -> Self {
        Self {
            x_star: self.x_prime.clone(),
            x_prime: self.x_star.clone(),
        }
    }
}

/// Key/value reference for the wedge primitive (0-indexed keys).
#[derive(Debug, Clone, PartialEq)]
pub struct WedgeSpec(Vec<(usize, f64)>);

impl WedgeSpec {
    pub fn new(entries: Vec<(usize, f64)>) -> Self {
        Self(entries)
    }

    fn block(range: std::ops::Range<usize>, value: f64) -> Self {
        Self(range.map(|i| (i, value)).collect())
    }

    fn eval(&self, x: &[f64]) -> f64 {
        if self.0.iter().all(|&(k, v)| x[k] == v) {
            1.0
        } else {
            -1.0
        }
    }
}

/// `1` if `x[k] == z[k]` for every key of `z`, else `-1`.
pub fn wedge(x: &[f64], z: &WedgeSpec) -> Result<f64> {
    if z.0.is_empty() {
        return Err(Error::contract("wedge needs at least one key"));
    }
    if let Some(&(k, _)) = z.0.iter().find(|(k, _)| *k >= x.len()) {
        return Err(Error::FeatureIndex { index: k, p: x.len() });
    }
    Ok(z.eval(x))
}

/// Planted interaction structure.
#[derive(Debug, Clone)]
enum Block {
    /// Every pair inside the set interacts.
    Clique(Vec<usize>),
    /// Every pair across the two sets interacts.
    Bipartite(Vec<usize>, Vec<usize>),
}

impl Block {
    fn covers(&self, i: usize, j: usize) -> bool {
        match self {
            Block::Clique(s) => s.contains(&i) && s.contains(&j),
            Block::Bipartite(a, b) => (a.contains(&i) && b.contains(&j)) || (a.contains(&j) && b.contains(&i)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SyntheticFn {
    F1,
    F2,
    F3,
    F4,
}

impl SyntheticFn {
    pub const ALL: [SyntheticFn; 4] = [SyntheticFn::F1, SyntheticFn::F2, SyntheticFn::F3, SyntheticFn::F4];

    fn wedges(self) -> [WedgeSpec; 2] {
        let second = WedgeSpec::block(10..30, 1.0);
        match self {
            SyntheticFn::F1 => unreachable!("F1 has no wedge terms"),
            SyntheticFn::F2 => [WedgeSpec::block(0..20, 1.0), second],
            SyntheticFn::F3 => [WedgeSpec::block(0..20, -1.0), second],
            SyntheticFn::F4 => [WedgeSpec::new(vec![(0, 1.0), (1, 1.0), (2, -1.0)]), second],
        }
    }

    fn blocks(self) -> Vec<Block> {
        match self {
            SyntheticFn::F1 => vec![
                Block::Clique((0..10).collect()),
                Block::Bipartite((10..20).collect(), (20..30).collect()),
            ],
            SyntheticFn::F2 | SyntheticFn::F3 => {
                vec![Block::Clique((0..20).collect()), Block::Clique((10..30).collect())]
            }
            SyntheticFn::F4 => vec![Block::Clique(vec![0, 1, 2]), Block::Clique((10..30).collect())],
        }
    }

    fn eval_unchecked(self, x: &[f64]) -> f64 {
        let linear: f64 = x.iter().sum();
        match self {
            SyntheticFn::F1 => {
                let mut s = 0.0;
                for i in 0..10 {
                    for j in 0..10 {
                        s += x[i] * x[j];
                    }
                }
                for i in 10..20 {
                    for j in 20..30 {
                        s += x[i] * x[j];
                    }
                }
                s + linear
            }
            other => {
                let [a, b] = other.wedges();
                a.eval(x) + b.eval(x) + linear
            }
        }
    }

    /// Closed-form value at `x`.
    pub fn eval(self, x: &[f64]) -> Result<f64> {
        if x.len() != SYNTHETIC_ARITY {
            return Err(Error::Arity {
                what: "synthetic function input",
                expected: SYNTHETIC_ARITY,
                found: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Symmetric 40×40 label matrix; the diagonal is false.
    pub fn ground_truth(self) -> Vec<Vec<bool>> {
        let blocks = self.blocks();
        (0..SYNTHETIC_ARITY)
            .map(|i| {
                (0..SYNTHETIC_ARITY)
                    .map(|j| i != j && blocks.iter().any(|b| b.covers(i, j)))
                    .collect()
            })
            .collect()
    }
}

impl fmt::Display for SyntheticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for SyntheticFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "F1" => Ok(SyntheticFn::F1),
            "F2" => Ok(SyntheticFn::F2),
            "F3" => Ok(SyntheticFn::F3),
            "F4" => Ok(SyntheticFn::F4),
            _ => Err(Error::config(format!("unknown synthetic function '{s}'"))),
        }
    }
}

impl PredictiveModel for SyntheticFn {
    fn n_features(&self) -> usize {
        SYNTHETIC_ARITY
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        self.eval_unchecked(x)
    }

    fn id(&self) -> String {
        format!("synthetic({self})")
    }
}

pub fn eval_f(f: SyntheticFn, x: &[f64]) -> Result<f64> {
    f.eval(x)
}

pub fn ground_truth_pairs(f: SyntheticFn) -> Vec<Vec<bool>> {
    f.ground_truth()
}

fn pair_indices(pair: &FeatureSet) -> Result<(usize, usize)> {
    match pair.indices() {
        &[i, j] => Ok((i, j)),
        _ => Err(Error::contract("expected a feature pair")),
    }
}

/// Four-point mixed difference with the remaining coordinates held at `x*`:
///
/// `f(x*_ij) + f(x'_ij) - f(x'_i, x*_j) - f(x*_i, x'_j)`.
pub fn archdetect_delta(f: &dyn PredictiveModel, ctx: &InteractionContext, pair: &FeatureSet) -> Result<f64> {
    let (i, j) = pair_indices(pair)?;
    let p = ctx.x_star.len();
    check_arity(f, p)?;
    pair.validate(p)?;
    let point = |vi: f64, vj: f64| {
        let mut x = ctx.x_star.clone();
        x[i] = vi;
        x[j] = vj;
        f.predict_row(&x)
    };
    let (si, sj, pi, pj) = (ctx.x_star[i], ctx.x_star[j], ctx.x_prime[i], ctx.x_prime[j]);
    Ok(point(si, sj) + point(pi, pj) - point(pi, sj) - point(si, pj))
}

/// `(delta / (h_i h_j))^2`.
pub fn interaction_strength(delta: f64, ctx: &InteractionContext, pair: &FeatureSet) -> Result<f64> {
    let (i, j) = pair_indices(pair)?;
    let span = ctx.h(i) * ctx.h(j);
    if span == 0.0 {
        return Err(Error::numeric(format!("zero span for pair ({i},{j})")));
    }
    Ok((delta / span).powi(2))
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Arity {
            what: "labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.len() < 2 {
        return Err(Error::UndefinedAuc("need at least two samples".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::numeric("NaN score"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc("labels contain a single class".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks, 1-based
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank = (start + 1 + end) as f64 / 2.0;
        rank_sum_pos += midrank * order[start..end].iter().filter(|&&k| labels[k]).count() as f64;
        start = end;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    Ok(u / (np * nn))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionMethod {
    /// Mixed difference evaluated directly.
    Delta,
    /// Interaction score from the effect calculus in the same context.
    FisInContext,
}

impl fmt::Display for DetectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectionMethod::Delta => "delta",
            DetectionMethod::FisInContext => "fis_in_context",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub function: SyntheticFn,
    pub method: DetectionMethod,
    pub pairs: Vec<(usize, usize)>,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub auc: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BenchmarkOptions {
    /// Shuffle the labels with this seed (negative control).
    pub shuffle_labels: Option<u64>,
}

/// Detection score of one pair: normalized squared interaction, averaged
/// over the `x*` and `x'` rest contexts.
pub fn pair_score(f: &dyn PredictiveModel, ctx: &InteractionContext, pair: &FeatureSet, method: DetectionMethod) -> Result<f64> {
    let mut total = 0.0;
    for c in [ctx.clone(), ctx.swapped()] {
        let v = match method {
            DetectionMethod::Delta => archdetect_delta(f, &c, pair)?,
            DetectionMethod::FisInContext => fis_in_context(f, &c, pair)?,
        };
        total += interaction_strength(v, &c, pair)?;
    }
    Ok(total / 2.0)
}

pub fn run_benchmark(fns: &[SyntheticFn], method: DetectionMethod, opts: BenchmarkOptions) -> Result<Vec<DetectionResult>> {
    let ctx = InteractionContext::benchmark();
    let pairs = FeatureSet::all_pairs(SYNTHETIC_ARITY);
    fns.iter()
        .map(|&f| {
            let scores = par::try_map(&pairs, |pair| pair_score(&f, &ctx, pair, method))?;
            let truth = f.ground_truth();
            let mut labels: Vec<bool> = pairs.iter().map(|p| truth[p.indices()[0]][p.indices()[1]]).collect();
            if let Some(seed) = opts.shuffle_labels {
                labels.shuffle(&mut rng::rng_for(seed, &[rng::label("shuffle-labels"), f as u64]));
            }
            let auc = roc_auc(&scores, &labels)?;
            Ok(DetectionResult {
                function: f,
                method,
                pairs: pairs.iter().map(|p| (p.indices()[0], p.indices()[1])).collect(),
                scores,
                labels,
                auc,
            })
        })
        .collect()
}
