//! Greedy sampling of the mask-based Rashomon set and the ranges it induces.
//!
//! For each feature the search walks a single mask entry away from one, up
//! by `(1 + lr)` and down by `(1 - lr)`, accepting a step while the masked
//! model stays within `epsilon` of the reference loss. A rejected step cuts
//! the learning rate tenfold; a direction ends after `max_shrinks` cuts.
//! Every accepted mask is a member of the set. Interaction ranges are then
//! taken over products of per-feature members.

use std::io::{Read, Write};

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSet};
use crate::effects::{fis, ReplacementStrategy};
use crate::error::{Error, Result};
use crate::loss::{expected_loss, LossKind};
use crate::model::{apply_mask, MaskVector, SharedModel};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RashomonConfig {
    pub epsilon: f64,
    pub initial_learning_rate: f64,
    /// Learning-rate cuts allowed per direction.
    pub max_shrinks: usize,
    /// Loss evaluations allowed per direction.
    pub max_steps: usize,
    /// A direction also stops once its mask entry would exceed this magnitude.
    pub max_mask: f64,
    pub loss: LossKind,
    /// Replacement used when scoring interactions of sampled models.
    pub strategy: ReplacementStrategy,
    /// Masks kept per feature and direction when forming products.
    pub candidates_per_direction: usize,
    /// Reproduce the raw pseudocode: accept up to `2 * epsilon` and step the
    /// lower-bound search upward while testing the upper-bound candidate.
    pub paper_literal: bool,
}

impl RashomonConfig {
    pub fn new(epsilon: f64, loss: LossKind, strategy: ReplacementStrategy) -> Self {
        Self {
            epsilon,
            initial_learning_rate: 0.1,
            max_shrinks: 4,
            max_steps: 10_000,
            max_mask: 1e6,
            loss,
            strategy,
            candidates_per_direction: 9,
            paper_literal: false,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!("epsilon must be > 0 (got {})", self.epsilon)));
        }
        if !(self.initial_learning_rate > 0.0 && self.initial_learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be > 0 (got {})",
                self.initial_learning_rate
            )));
        }
        if self.max_shrinks == 0 {
            return Err(Error::config("max_shrinks must be >= 1"));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps must be >= 1"));
        }
        if self.candidates_per_direction < 2 {
            return Err(Error::config("candidates_per_direction must be >= 2"));
        }
        self.strategy.validate(p)
    }

    fn threshold(&self, reference_loss: f64) -> f64 {
        if self.paper_literal {
            reference_loss + 2.0 * self.epsilon
        } else {
            reference_loss + self.epsilon
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

/// One accepted mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskStep {
    pub mask: MaskVector,
    pub loss: f64,
    /// Loss shift against the reference, `loss - reference_loss`.
    pub effect: f64,
}

impl MaskStep {
    pub fn value(&self, feature: usize) -> f64 {
        self.mask.get(feature)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskTrajectory {
    pub feature: usize,
    pub direction: Direction,
    /// Accepted masks in visiting order; the identity start is not included.
    pub steps: Vec<MaskStep>,
    pub reference_loss: f64,
    /// Learning rate at each rejection, in order.
    pub shrink_rates: Vec<f64>,
    pub evaluations: usize,
    /// True when `max_steps` or `max_mask` ended the walk.
    pub budget_hit: bool,
}

impl MaskTrajectory {
    pub fn extreme(&self) -> f64 {
        self.steps.last().map_or(1.0, |s| s.value(self.feature))
    }
}

fn masked_loss(reference: &SharedModel, data: &Dataset, mask: MaskVector, loss: LossKind) -> Result<f64> {
    let m = apply_mask(reference.clone(), mask)?;
    expected_loss(&m, data, loss)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    reference: &SharedModel,
    data: &Dataset,
    i: usize,
    direction: Direction,
    cfg: &RashomonConfig,
    reference_loss: f64,
    eval_override: Option<f64>,
) -> Result<(MaskTrajectory, f64)> {
    let p = data.p();
    let threshold = cfg.threshold(reference_loss);
    let mut m = 1.0;
    let mut lr = cfg.initial_learning_rate;
    let mut steps = Vec::new();
    let mut shrink_rates = Vec::new();
    let mut evaluations = 0;
    let mut budget_hit = false;
    let mut last_candidate = 1.0;

    while shrink_rates.len() < cfg.max_shrinks {
        if evaluations >= cfg.max_steps {
            budget_hit = true;
            break;
        }
        let factor = match (direction, cfg.paper_literal) {
            (Direction::Up, _) | (Direction::Down, true) => 1.0 + lr,
            (Direction::Down, false) => 1.0 - lr,
        };
        let candidate = (m * factor).max(0.0);
        if !candidate.is_finite() || candidate.abs() > cfg.max_mask {
            budget_hit = true;
            break;
        }
        if candidate == m {
            break;
        }
        evaluations += 1;
        last_candidate = candidate;
        let tested = eval_override.unwrap_or(candidate);
        let loss = masked_loss(reference, data, MaskVector::single(p, i, tested)?, cfg.loss)?;
        if loss <= threshold {
            m = candidate;
            steps.push(MaskStep {
                mask: MaskVector::single(p, i, candidate)?,
                loss,
                effect: loss - reference_loss,
            });
        } else {
            shrink_rates.push(lr);
            lr *= 0.1;
        }
    }
    if budget_hit {
        info!("feature {i} {direction:?}: step budget bound after {evaluations} evaluations (mask {m})");
    }
    debug!("feature {i} {direction:?}: {} accepted, extreme {m}", steps.len());
    Ok((
        MaskTrajectory {
            feature: i,
            direction,
            steps,
            reference_loss,
            shrink_rates,
            evaluations,
            budget_hit,
        },
        last_candidate,
    ))
}

/// Upper and lower mask walks for feature `i`.
pub fn greedy_search_feature(
    reference: &SharedModel,
    data: &Dataset,
    i: usize,
    cfg: &RashomonConfig,
) -> Result<(MaskTrajectory, MaskTrajectory)> {
    cfg.validate(data.p())?;
    FeatureSet::single(i).validate(data.p())?;
    let reference_loss = expected_loss(reference.as_ref(), data, cfg.loss)?;
    let (up, last_up) = walk(reference, data, i, Direction::Up, cfg, reference_loss, None)?;
    let down_override = cfg.paper_literal.then_some(last_up);
    let (down, _) = walk(reference, data, i, Direction::Down, cfg, reference_loss, down_override)?;
    Ok((up, down))
}

/// The sampled model class: per-feature trajectories around one reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelClass {
    pub reference_id: String,
    pub p: usize,
    pub reference_loss: f64,
    pub epsilon: f64,
    pub loss: LossKind,
    pub trajectories: Vec<(MaskTrajectory, MaskTrajectory)>,
}

impl ModelClass {
    pub fn trajectories_for(&self, i: usize) -> Result<&(MaskTrajectory, MaskTrajectory)> {
        self.trajectories
            .iter()
            .find(|(u, _)| u.feature == i)
            .ok_or(Error::FeatureIndex { index: i, p: self.p })
    }

    /// Every recorded mask, in feature then direction order.
    pub fn steps(&self) -> impl Iterator<Item = (usize, Direction, &MaskStep)> {
        self.trajectories.iter().flat_map(|(u, d)| {
            u.steps
                .iter()
                .map(move |s| (u.feature, Direction::Up, s))
                .chain(d.steps.iter().map(move |s| (d.feature, Direction::Down, s)))
        })
    }
}

/// Runs the greedy search for every feature.
pub fn search_all_features(reference: &SharedModel, data: &Dataset, cfg: &RashomonConfig) -> Result<ModelClass> {
    cfg.validate(data.p())?;
    let reference_loss = expected_loss(reference.as_ref(), data, cfg.loss)?;
    let trajectories = par::try_map_range(data.p(), |i| greedy_search_feature(reference, data, i, cfg))?;
    Ok(ModelClass {
        reference_id: reference.id(),
        p: data.p(),
        reference_loss,
        epsilon: cfg.epsilon,
        loss: cfg.loss,
        trajectories,
    })
}

/// `k` evenly spaced entries including both ends.
fn subsample<T: Clone>(items: &[T], k: usize) -> Vec<T> {
    if items.len() <= k {
        return items.to_vec();
    }
    let last = items.len() - 1;
    let mut idx: Vec<usize> = (0..k).map(|j| (j * last + (k - 1) / 2) / (k - 1)).collect();
    idx.dedup();
    idx.into_iter().map(|j| items[j].clone()).collect()
}

/// Candidate scalars for one feature: identity, then lower then upper samples.
fn candidate_values(class: &ModelClass, i: usize, k: usize) -> Result<Vec<f64>> {
    let (up, down) = class.trajectories_for(i)?;
    let mut out = vec![1.0];
    out.extend(subsample(&down.steps, k).iter().map(|s| s.value(i)));
    out.extend(subsample(&up.steps, k).iter().map(|s| s.value(i)));
    Ok(out)
}

/// One sampled member of the interaction cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudMember {
    pub features: FeatureSet,
    pub mask: MaskVector,
    pub loss: f64,
    pub fis: f64,
}

/// Products of per-feature candidate masks over `features`, before the
/// membership filter. Masks never scale features outside the set.
pub fn composed_candidates(class: &ModelClass, features: &FeatureSet, cfg: &RashomonConfig) -> Result<Vec<MaskVector>> {
    features.validate(class.p)?;
    let per_feature = features
        .indices()
        .iter()
        .map(|&i| candidate_values(class, i, cfg.candidates_per_direction))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = per_feature.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut odometer = vec![0usize; per_feature.len()];
    for _ in 0..total {
        let mut v = vec![1.0; class.p];
        for (slot, &f) in features.indices().iter().enumerate() {
            v[f] = per_feature[slot][odometer[slot]];
        }
        out.push(MaskVector::new(v)?);
        for slot in (0..odometer.len()).rev() {
            odometer[slot] += 1;
            if odometer[slot] < per_feature[slot].len() {
                break;
            }
            odometer[slot] = 0;
        }
    }
    Ok(out)
}

/// Interaction scores of every in-set composed mask.
pub fn fisc_cloud(
    reference: &SharedModel,
    data: &Dataset,
    class: &ModelClass,
    features: &FeatureSet,
    cfg: &RashomonConfig,
) -> Result<Vec<CloudMember>> {
    cfg.validate(data.p())?;
    if features.len() < 2 {
        return Err(Error::contract("interaction cloud needs at least two features"));
    }
    let candidates = composed_candidates(class, features, cfg)?;
    let threshold = class.reference_loss + cfg.epsilon;
    let scored = par::try_map(&candidates, |mask| -> Result<Option<CloudMember>> {
        let model = apply_mask(reference.clone(), mask.clone())?;
        let loss = expected_loss(&model, data, cfg.loss)?;
        if loss > threshold {
            return Ok(None);
        }
        let rec = fis(&model, data, features, cfg.loss, &cfg.strategy)?;
        Ok(Some(CloudMember {
            features: features.clone(),
            mask: mask.clone(),
            loss,
            fis: rec.fis,
        }))
    })?;
    Ok(scored.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiscRange {
    pub features: FeatureSet,
    pub min: f64,
    pub max: f64,
    pub argmin_mask: MaskVector,
    pub argmax_mask: MaskVector,
    pub samples: usize,
}

/// Min and max of a cloud; the first occurrence wins ties.
pub fn range_of(features: &FeatureSet, cloud: &[CloudMember]) -> Result<FiscRange> {
    let first = cloud
        .first()
        .ok_or_else(|| Error::EmptyRange(format!("no in-set model for features {features}")))?;
    let (mut lo, mut hi) = (first, first);
    for m in &cloud[1..] {
        if m.fis < lo.fis {
            lo = m;
        }
        if m.fis > hi.fis {
            hi = m;
        }
    }
    Ok(FiscRange {
        features: features.clone(),
        min: lo.fis,
        max: hi.fis,
        argmin_mask: lo.mask.clone(),
        argmax_mask: hi.mask.clone(),
        samples: cloud.len(),
    })
}

/// Range of the interaction score over the sampled set.
pub fn fisc_range(
    reference: &SharedModel,
    data: &Dataset,
    class: &ModelClass,
    features: &FeatureSet,
    cfg: &RashomonConfig,
) -> Result<FiscRange> {
    range_of(features, &fisc_cloud(reference, data, class, features, cfg)?)
}

/// Model class reliance: the span of one feature's loss shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McrRange {
    pub feature: usize,
    pub lower: f64,
    pub upper: f64,
}

pub fn mcr_range(class: &ModelClass, i: usize) -> Result<McrRange> {
    let (up, down) = class.trajectories_for(i)?;
    let (mut lower, mut upper) = (0.0f64, 0.0f64);
    for s in up.steps.iter().chain(&down.steps) {
        lower = lower.min(s.effect);
        upper = upper.max(s.effect);
    }
    Ok(McrRange { feature: i, lower, upper })
}

/// One row of the model-class file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelClassEntry {
    pub mask: Vec<f64>,
    pub loss: f64,
    pub feature: Option<usize>,
    pub direction: Option<Direction>,
}

/// Reference entry first, then every recorded mask.
pub fn export_models(class: &ModelClass) -> Vec<ModelClassEntry> {
    let mut out = vec![ModelClassEntry {
        mask: vec![1.0; class.p],
        loss: class.reference_loss,
        feature: None,
        direction: None,
    }];
    out.extend(class.steps().map(|(f, d, s)| ModelClassEntry {
        mask: s.mask.as_slice().to_vec(),
        loss: s.loss,
        feature: Some(f),
        direction: Some(d),
    }));
    out
}

pub fn write_model_class<W: Write>(writer: W, class: &ModelClass) -> Result<()> {
    serde_json::to_writer_pretty(writer, &export_models(class))?;
    Ok(())
}

pub fn read_model_class<R: Read>(reader: R) -> Result<Vec<ModelClassEntry>> {
    let entries: Vec<ModelClassEntry> = serde_json::from_reader(reader)?;
    match entries.first() {
        Some(e) if e.feature.is_none() && e.mask.iter().all(|&v| v == 1.0) => Ok(entries),
        _ => Err(Error::contract("model-class file must start with the identity reference entry")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FnModel, LinearModel, PredictiveModel, SumProductModel};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use std::sync::Arc;

    fn normal_rows(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..p).map(|_| StandardNormal.sample(&mut r)).collect()).collect()
    }

    fn dataset_from(model: &dyn PredictiveModel, rows: Vec<Vec<f64>>) -> Dataset {
        let y = rows.iter().map(|r| model.predict_row(r)).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    fn shared<M: PredictiveModel + 'static>(m: M) -> SharedModel {
        Arc::new(m)
    }

    #[test]
    fn shrink_schedule_on_rejection() {
        let g = shared(LinearModel::new(vec![2.0], 0.0));
        let d = dataset_from(g.as_ref(), normal_rows(50, 1, 1));
        let mut cfg = RashomonConfig::new(1e-14, LossKind::Mse, ReplacementStrategy::zeros(1));
        cfg.initial_learning_rate = 0.1;
        let (up, down) = greedy_search_feature(&g, &d, 0, &cfg).unwrap();
        assert!(up.steps.is_empty() && down.steps.is_empty());
        let expected = [0.1, 0.01, 0.001, 0.0001];
        for t in [&up, &down] {
            assert_eq!(t.shrink_rates.len(), 4);
            for (a, b) in t.shrink_rates.iter().zip(expected) {
                assert!((a - b).abs() < 1e-12 * b);
            }
        }
    }

    #[test]
    fn linear_bound_matches_closed_form() {
        let g = shared(LinearModel::new(vec![2.0], 0.0));
        let rows = normal_rows(200, 1, 2);
        let mean_sq = rows.iter().map(|r| r[0] * r[0]).sum::<f64>() / 200.0;
        let d = dataset_from(g.as_ref(), rows);
        let cfg = RashomonConfig::new(0.01, LossKind::Mse, ReplacementStrategy::zeros(1));
        let (up, down) = greedy_search_feature(&g, &d, 0, &cfg).unwrap();
        let radius = (0.01 / (4.0 * mean_sq)).sqrt();
        let quantum = 1e-4;
        for s in &up.steps {
            let m = s.value(0);
            assert!((1.0 - m).powi(2) <= 0.01 / (4.0 * mean_sq) + 1e-15);
        }
        let (hi, lo) = (up.extreme(), down.extreme());
        assert!(hi <= 1.0 + radius + 1e-12 && 1.0 + radius - hi <= quantum * hi);
        assert!(lo >= 1.0 - radius - 1e-12 && lo - (1.0 - radius) <= quantum);
    }

    #[test]
    fn trajectories_are_monotone_and_in_set() {
        let g = shared(SumProductModel::new(2, 3).unwrap());
        let d = dataset_from(g.as_ref(), normal_rows(100, 3, 3));
        let cfg = RashomonConfig::new(0.05, LossKind::Mse, ReplacementStrategy::zeros(3));
        let class = search_all_features(&g, &d, &cfg).unwrap();
        for (up, down) in &class.trajectories {
            for w in up.steps.windows(2) {
                assert!(w[1].value(up.feature) > w[0].value(up.feature));
            }
            for w in down.steps.windows(2) {
                assert!(w[1].value(down.feature) < w[0].value(down.feature));
            }
            for s in up.steps.iter().chain(&down.steps) {
                assert!(s.loss <= class.reference_loss + cfg.epsilon);
                assert_eq!(s.mask.support(), vec![up.feature]);
            }
        }
    }

    #[test]
    fn irrelevant_feature_grows_until_budget() {
        let g = shared(LinearModel::new(vec![1.0, 0.0], 0.0));
        let d = dataset_from(g.as_ref(), normal_rows(40, 2, 4));
        let mut cfg = RashomonConfig::new(0.01, LossKind::Mse, ReplacementStrategy::zeros(2));
        cfg.max_steps = 50;
        let (up, _) = greedy_search_feature(&g, &d, 1, &cfg).unwrap();
        assert!(up.budget_hit);
        assert_eq!(up.steps.len(), 50);
        assert!(up.steps.iter().all(|s| s.effect == 0.0));
        let mcr = mcr_range(&search_all_features(&g, &d, &cfg).unwrap(), 1).unwrap();
        assert_eq!((mcr.lower, mcr.upper), (0.0, 0.0));
    }

    #[test]
    fn single_feature_search() {
        let g = shared(LinearModel::new(vec![1.0], 0.0));
        let d = dataset_from(g.as_ref(), normal_rows(20, 1, 5));
        let cfg = RashomonConfig::new(0.01, LossKind::Mse, ReplacementStrategy::zeros(1));
        assert_eq!(search_all_features(&g, &d, &cfg).unwrap().trajectories.len(), 1);
    }

    fn identity_class(g: &SharedModel, d: &Dataset, cfg: &RashomonConfig) -> ModelClass {
        let reference_loss = expected_loss(g.as_ref(), d, cfg.loss).unwrap();
        let empty = |i, dir| MaskTrajectory {
            feature: i,
            direction: dir,
            steps: vec![],
            reference_loss,
            shrink_rates: vec![],
            evaluations: 0,
            budget_hit: false,
        };
        ModelClass {
            reference_id: g.id(),
            p: d.p(),
            reference_loss,
            epsilon: cfg.epsilon,
            loss: cfg.loss,
            trajectories: (0..d.p()).map(|i| (empty(i, Direction::Up), empty(i, Direction::Down))).collect(),
        }
    }

    #[test]
    fn identity_only_range_is_reference_fis() {
        let g = shared(SumProductModel::new(2, 2).unwrap());
        let d = dataset_from(g.as_ref(), normal_rows(60, 2, 6));
        let cfg = RashomonConfig::new(0.1, LossKind::Mse, ReplacementStrategy::zeros(2));
        let class = identity_class(&g, &d, &cfg);
        let pair = FeatureSet::pair(0, 1).unwrap();
        let r = fisc_range(&g, &d, &class, &pair, &cfg).unwrap();
        let reference = fis(g.as_ref(), &d, &pair, cfg.loss, &cfg.strategy).unwrap().fis;
        assert_eq!((r.min, r.max, r.samples), (reference, reference, 1));
        assert_eq!(mcr_range(&class, 0).unwrap(), McrRange { feature: 0, lower: 0.0, upper: 0.0 });
    }

    #[test]
    fn additive_reference_has_degenerate_range() {
        let g = shared(FnModel::new("add", 3, |x| x[0].powi(2) + 3.0 * x[1] - x[2]));
        let d = dataset_from(g.as_ref(), normal_rows(80, 3, 7));
        let mut cfg = RashomonConfig::new(0.05, LossKind::SignedError, ReplacementStrategy::zeros(3));
        // signed error never penalises growing x0², so cap the walk
        cfg.max_mask = 10.0;
        let class = search_all_features(&g, &d, &cfg).unwrap();
        let r = fisc_range(&g, &d, &class, &FeatureSet::pair(0, 1).unwrap(), &cfg).unwrap();
        assert!(r.min.abs() < 1e-12 && r.max.abs() < 1e-12, "{r:?}");
        assert!(r.samples > 1);
    }

    #[test]
    fn empty_cloud_is_an_error() {
        let pair = FeatureSet::pair(0, 1).unwrap();
        assert!(matches!(range_of(&pair, &[]), Err(Error::EmptyRange(_))));
    }

    #[test]
    fn range_endpoints_are_attained() {
        let g = shared(SumProductModel::new(2, 2).unwrap());
        let d = dataset_from(g.as_ref(), normal_rows(100, 2, 8));
        let cfg = RashomonConfig::new(0.1, LossKind::Mse, ReplacementStrategy::zeros(2));
        let class = search_all_features(&g, &d, &cfg).unwrap();
        let pair = FeatureSet::pair(0, 1).unwrap();
        let r = fisc_range(&g, &d, &class, &pair, &cfg).unwrap();
        let reference = fis(g.as_ref(), &d, &pair, cfg.loss, &cfg.strategy).unwrap().fis;
        assert!(r.min <= reference && reference <= r.max && r.min < r.max);
        for (mask, v) in [(&r.argmin_mask, r.min), (&r.argmax_mask, r.max)] {
            let m = apply_mask(g.clone(), mask.clone()).unwrap();
            assert_eq!(fis(&m, &d, &pair, cfg.loss, &cfg.strategy).unwrap().fis, v);
        }
    }

    #[test]
    fn candidate_budget() {
        let g = shared(SumProductModel::new(2, 2).unwrap());
        let d = dataset_from(g.as_ref(), normal_rows(100, 2, 9));
        let cfg = RashomonConfig::new(0.1, LossKind::Mse, ReplacementStrategy::zeros(2));
        let class = search_all_features(&g, &d, &cfg).unwrap();
        let c = composed_candidates(&class, &FeatureSet::pair(0, 1).unwrap(), &cfg).unwrap();
        assert!(c.len() <= 19 * 19);
        assert!(c[0].is_identity());
    }

    #[test]
    fn subsample_keeps_endpoints() {
        let v: Vec<usize> = (0..100).collect();
        let s = subsample(&v, 9);
        assert_eq!(s.len(), 9);
        assert_eq!((s[0], s[8]), (0, 99));
        assert_eq!(subsample(&v[..3], 9), vec![0, 1, 2]);
    }

    #[test]
    fn relevant_feature_relies_more() {
        let g = shared(LinearModel::new(vec![2.0, 0.0], 0.0));
        let d = dataset_from(g.as_ref(), normal_rows(100, 2, 10));
        let mut cfg = RashomonConfig::new(0.05, LossKind::Mse, ReplacementStrategy::zeros(2));
        cfg.max_steps = 200;
        let class = search_all_features(&g, &d, &cfg).unwrap();
        assert!(mcr_range(&class, 0).unwrap().upper > mcr_range(&class, 1).unwrap().upper);
    }

    #[test]
    fn model_class_file_round_trip() {
        let g = shared(SumProductModel::new(2, 2).unwrap());
        let d = dataset_from(g.as_ref(), normal_rows(50, 2, 11));
        let mut cfg = RashomonConfig::new(10.0, LossKind::Mse, ReplacementStrategy::zeros(2));
        cfg.max_steps = 10;
        cfg.max_shrinks = 1;
        let class = search_all_features(&g, &d, &cfg).unwrap();
        let entries = export_models(&class);
        let per_dir: Vec<usize> = class.trajectories.iter().flat_map(|(u, d)| [u.steps.len(), d.steps.len()]).collect();
        assert_eq!(entries.len(), 1 + per_dir.iter().sum::<usize>());
        if per_dir.iter().all(|&n| n == 10) {
            assert_eq!(entries.len(), 41);
        }
        let mut buf = Vec::new();
        write_model_class(&mut buf, &class).unwrap();
        let back = read_model_class(buf.as_slice()).unwrap();
        assert_eq!(back, entries);
        for (a, b) in back.iter().zip(&entries) {
            for (x, y) in a.mask.iter().zip(&b.mask) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"direction\": \"up\"") && text.contains("\"feature\": null"));
    }

    #[test]
    fn empty_class_exports_reference_only() {
        let g = shared(LinearModel::new(vec![1.0, 1.0], 0.0));
        let d = dataset_from(g.as_ref(), normal_rows(10, 2, 12));
        let cfg = RashomonConfig::new(0.1, LossKind::Mse, ReplacementStrategy::zeros(2));
        let entries = export_models(&identity_class(&g, &d, &cfg));
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].mask, vec![1.0, 1.0]);
    }

    #[test]
    fn paper_literal_admits_twice_epsilon() {
        let g = shared(LinearModel::new(vec![2.0], 0.0));
        let d = dataset_from(g.as_ref(), normal_rows(100, 1, 13));
        let mut cfg = RashomonConfig::new(0.01, LossKind::Mse, ReplacementStrategy::zeros(1));
        let (fixed, _) = greedy_search_feature(&g, &d, 0, &cfg).unwrap();
        cfg.paper_literal = true;
        let (literal, down) = greedy_search_feature(&g, &d, 0, &cfg).unwrap();
        assert!(literal.extreme() > fixed.extreme());
        assert!(literal.steps.iter().any(|s| s.loss > 0.01));
        // the literal lower search also multiplies by (1 + lr)
        assert!(down.steps.iter().all(|s| s.value(0) > 1.0));
    }

    #[test]
    fn invalid_config() {
        let g = shared(LinearModel::new(vec![1.0], 0.0));
        let d = dataset_from(g.as_ref(), normal_rows(10, 1, 14));
        let mut cfg = RashomonConfig::new(0.0, LossKind::Mse, ReplacementStrategy::zeros(1));
        assert!(matches!(greedy_search_feature(&g, &d, 0, &cfg), Err(Error::Config(_))));
        cfg.epsilon = 0.1;
        cfg.initial_learning_rate = -1.0;
        assert!(matches!(greedy_search_feature(&g, &d, 0, &cfg), Err(Error::Config(_))));
    }
}
