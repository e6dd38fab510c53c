//! Main effects, joint effects and the feature interaction score.
//!
//! An effect is the loss increase caused by replacing one or more features
//! with uninformative values. The interaction score of a set `I` is the joint
//! effect of `I` minus the sum of its members' main effects; it vanishes for
//! additive models.
//!
//! Permutation replacement derives one generator per (feature set, repeat)
//! from the master seed. A joint replacement shuffles all listed columns with
//! one shared row permutation unless `independent` is set, in which case each
//! column gets the permutation it would get on its own. Main and joint effects
//! therefore share draws column-wise only in independent mode.

use std::collections::HashMap;
use std::io::Write;

use parking_lot::Mutex;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{format_float, Dataset, FeatureSet, Matrix};
use crate::error::{Error, Result};
use crate::loss::{check_arity, expected_loss, LossKind};
use crate::model::PredictiveModel;
use crate::synthetic::InteractionContext;
use crate::{par, rng};

pub const DEFAULT_REPEATS: usize = 30;

/// How "removed" features are filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReplacementStrategy {
    /// Row-shuffle the listed columns `repeats` times; effects are averaged.
    Permutation {
        repeats: usize,
        seed: u64,
        #[serde(default)]
        independent: bool,
    },
    /// Overwrite column `j` with the constant `neutral[j]`.
    Baseline { neutral: Vec<f64> },
}

impl ReplacementStrategy {
    pub fn permutation(repeats: usize, seed: u64) -> Self {
        ReplacementStrategy::Permutation {
            repeats,
            seed,
            independent: false,
        }
    }

    pub fn baseline(neutral: Vec<f64>) -> Self {
        ReplacementStrategy::Baseline { neutral }
    }

    pub fn zeros(p: usize) -> Self {
        Self::baseline(vec![0.0; p])
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            ReplacementStrategy::Permutation { repeats, .. } if *repeats == 0 => {
                Err(Error::config("permutation repeats must be >= 1"))
            }
            ReplacementStrategy::Baseline { neutral } => {
                if neutral.len() != p {
                    return Err(Error::Arity {
                        what: "baseline neutral vector",
                        expected: p,
                        found: neutral.len(),
                    });
                }
                if neutral.iter().any(|v| !v.is_finite()) {
                    return Err(Error::numeric("baseline neutral vector has non-finite entries"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Short tag used in CSV output.
    pub fn descriptor(&self) -> String {
        match self {
            ReplacementStrategy::Permutation {
                repeats,
                independent: false,
                ..
            } => format!("permutation:{repeats}"),
            ReplacementStrategy::Permutation { repeats, .. } => format!("permutation-independent:{repeats}"),
            ReplacementStrategy::Baseline { .. } => "baseline".to_string(),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ReplacementStrategy::Permutation { seed, .. } => Some(*seed),
            ReplacementStrategy::Baseline { .. } => None,
        }
    }

    fn repeats(&self) -> usize {
        match self {
            ReplacementStrategy::Permutation { repeats, .. } => *repeats,
            ReplacementStrategy::Baseline { .. } => 1,
        }
    }
}

fn set_label(indices: &[usize]) -> u64 {
    let labels: Vec<u64> = indices.iter().map(|&i| i as u64).collect();
    rng::derive_seed(indices.len() as u64, &labels)
}

fn permutation_for(n: usize, seed: u64, columns: &[usize], repeat: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut r = rng::rng_for(seed, &[rng::label("permutation"), set_label(columns), repeat as u64]);
    perm.shuffle(&mut r);
    perm
}

/// Covariates with `features` replaced, for one repeat.
fn replaced_matrix(data: &Dataset, features: &FeatureSet, strategy: &ReplacementStrategy, repeat: usize) -> Matrix {
    let src = data.x();
    let mut out = src.clone();
    match strategy {
        ReplacementStrategy::Baseline { neutral } => {
            for i in 0..src.rows() {
                for &j in features.indices() {
                    out.set(i, j, neutral[j]);
                }
            }
        }
        ReplacementStrategy::Permutation {
            seed, independent, ..
        } => {
            if *independent {
                for &j in features.indices() {
                    let perm = permutation_for(src.rows(), *seed, &[j], repeat);
                    for (i, &from) in perm.iter().enumerate() {
                        out.set(i, j, src.get(from, j));
                    }
                }
            } else {
                let perm = permutation_for(src.rows(), *seed, features.indices(), repeat);
                for (i, &from) in perm.iter().enumerate() {
                    for &j in features.indices() {
                        out.set(i, j, src.get(from, j));
                    }
                }
            }
        }
    }
    out
}

/// Datasets with `features` replaced: one for a baseline, one per repeat for
/// permutation. Columns outside `features` are untouched.
pub fn replace_features(data: &Dataset, features: &FeatureSet, strategy: &ReplacementStrategy) -> Result<Vec<Dataset>> {
    features.validate(data.p())?;
    strategy.validate(data.p())?;
    (0..strategy.repeats())
        .map(|r| data.with_x(replaced_matrix(data, features, strategy, r)))
        .collect()
}

/// Loss change from replacing a feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectRecord {
    pub features: FeatureSet,
    /// `replaced_loss - baseline_loss`.
    pub value: f64,
    /// Monte-Carlo standard error over permutation repeats.
    pub std_error: Option<f64>,
    pub replaced_loss: f64,
    pub baseline_loss: f64,
    pub strategy: String,
    pub loss: LossKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisRecord {
    pub features: FeatureSet,
    /// `joint.value - sum(mains.value)`.
    pub fis: f64,
    pub joint: EffectRecord,
    pub mains: Vec<EffectRecord>,
}

impl FisRecord {
    pub fn main_sum(&self) -> f64 {
        self.mains.iter().map(|m| m.value).sum()
    }
}

fn fingerprint(data: &Dataset) -> u64 {
    let mut h = rng::label("dataset");
    for v in data.x().as_slice().iter().chain(data.y()) {
        h = (h ^ v.to_bits()).wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Memoizes baseline losses and effects.
///
/// Keyed by (dataset fingerprint, model id, feature set, strategy, loss), so
/// masked models with distinct masks never collide.
#[derive(Debug, Default)]
pub struct EffectCache {
    baselines: Mutex<HashMap<String, f64>>,
    effects: Mutex<HashMap<String, EffectRecord>>,
}

impl EffectCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.effects.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn baseline_loss(&self, model: &dyn PredictiveModel, data: &Dataset, fp: u64, loss: LossKind) -> Result<f64> {
        let key = format!("{fp}|{}|{loss}", model.id());
        if let Some(v) = self.baselines.lock().get(&key) {
            return Ok(*v);
        }
        let v = expected_loss(model, data, loss)?;
        self.baselines.lock().insert(key, v);
        Ok(v)
    }

    /// Effect of replacing all of `features` at once.
    pub fn effect(
        &self,
        model: &dyn PredictiveModel,
        data: &Dataset,
        features: &FeatureSet,
        loss: LossKind,
        strategy: &ReplacementStrategy,
    ) -> Result<EffectRecord> {
        check_arity(model, data.p())?;
        features.validate(data.p())?;
        strategy.validate(data.p())?;
        let fp = fingerprint(data);
        let key = format!("{fp}|{}|{features}|{strategy:?}|{loss}", model.id());
        if let Some(rec) = self.effects.lock().get(&key) {
            return Ok(rec.clone());
        }

        let baseline_loss = self.baseline_loss(model, data, fp, loss)?;
        let repeats = strategy.repeats();
        let losses = par::try_map_range(repeats, |r| {
            let replaced = data.with_x(replaced_matrix(data, features, strategy, r))?;
            expected_loss(model, &replaced, loss)
        })?;
        let replaced_loss = par::mean(&losses);
        let std_error = (repeats > 1).then(|| {
            let dev: Vec<f64> = losses.iter().map(|l| (l - replaced_loss).powi(2)).collect();
            (par::sum(&dev) / (repeats - 1) as f64).sqrt() / (repeats as f64).sqrt()
        });
        let rec = EffectRecord {
            features: features.clone(),
            value: replaced_loss - baseline_loss,
            std_error,
            replaced_loss,
            baseline_loss,
            strategy: strategy.descriptor(),
            loss,
        };
        self.effects.lock().insert(key, rec.clone());
        Ok(rec)
    }

    pub fn main_effect(
        &self,
        model: &dyn PredictiveModel,
        data: &Dataset,
        i: usize,
        loss: LossKind,
        strategy: &ReplacementStrategy,
    ) -> Result<EffectRecord> {
        self.effect(model, data, &FeatureSet::single(i), loss, strategy)
    }

    pub fn fis(
        &self,
        model: &dyn PredictiveModel,
        data: &Dataset,
        features: &FeatureSet,
        loss: LossKind,
        strategy: &ReplacementStrategy,
    ) -> Result<FisRecord> {
        if features.len() < 2 {
            return Err(Error::contract("interaction score needs at least two features"));
        }
        let mains = features
            .indices()
            .iter()
            .map(|&i| self.main_effect(model, data, i, loss, strategy))
            .collect::<Result<Vec<_>>>()?;
        let joint = self.effect(model, data, features, loss, strategy)?;
        let fis = joint.value - mains.iter().map(|m| m.value).sum::<f64>();
        Ok(FisRecord {
            features: features.clone(),
            fis,
            joint,
            mains,
        })
    }
}

/// `E[L(f(X \ i))] - E[L(f(X))]`.
pub fn main_effect(
    model: &dyn PredictiveModel,
    data: &Dataset,
    i: usize,
    loss: LossKind,
    strategy: &ReplacementStrategy,
) -> Result<EffectRecord> {
    EffectCache::new().main_effect(model, data, i, loss, strategy)
}

/// `E[L(f(X \ I))] - E[L(f(X))]`.
pub fn joint_effect(
    model: &dyn PredictiveModel,
    data: &Dataset,
    features: &FeatureSet,
    loss: LossKind,
    strategy: &ReplacementStrategy,
) -> Result<EffectRecord> {
    EffectCache::new().effect(model, data, features, loss, strategy)
}

/// Joint effect minus the sum of main effects.
pub fn fis(
    model: &dyn PredictiveModel,
    data: &Dataset,
    features: &FeatureSet,
    loss: LossKind,
    strategy: &ReplacementStrategy,
) -> Result<FisRecord> {
    EffectCache::new().fis(model, data, features, loss, strategy)
}

/// Interaction score of a pair around a single sample.
///
/// Evaluated through the effect calculus on the one-row dataset `{x*}` with
/// baseline replacement by `x'`. Under signed error `E[y - ŷ]` that score is
/// the negated four-term mixed difference; the value returned is for the
/// mirrored orientation `E[ŷ - y]`, which equals the mixed difference itself.
pub fn fis_in_context(model: &dyn PredictiveModel, ctx: &InteractionContext, pair: &FeatureSet) -> Result<f64> {
    if pair.len() != 2 {
        return Err(Error::contract("context score is defined for pairs"));
    }
    let p = ctx.x_star().len();
    check_arity(model, p)?;
    let data = Dataset::from_rows(&[ctx.x_star().to_vec()], vec![0.0])?;
    let strategy = ReplacementStrategy::baseline(ctx.x_prime().to_vec());
    let rec = fis(model, &data, pair, LossKind::SignedError, &strategy)?;
    Ok(-rec.fis)
}

/// Writes `features;phi_joint;phi_main_sum;fis;strategy;loss;seed`.
pub fn write_fis_csv<W: Write>(writer: W, records: &[FisRecord], seed: Option<u64>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().delimiter(b';').from_writer(writer);
    wtr.write_record(["features", "phi_joint", "phi_main_sum", "fis", "strategy", "loss", "seed"])?;
    for r in records {
        wtr.write_record([
            r.features.to_string(),
            format_float(r.joint.value),
            format_float(r.main_sum()),
            format_float(r.fis),
            r.joint.strategy.clone(),
            r.joint.loss.to_string(),
            seed.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FnModel, LinearModel};
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_data(n: usize, p: usize, seed: u64, f: impl Fn(&[f64]) -> f64) -> Dataset {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| StandardNormal.sample(&mut r)).collect())
            .collect();
        let y = rows.iter().map(|x| f(x)).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    #[test]
    fn baseline_zero_column() {
        let d = normal_data(20, 3, 1, |x| x[0]);
        let out = replace_features(&d, &FeatureSet::single(1), &ReplacementStrategy::zeros(3)).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].x().column(1).iter().all(|&v| v == 0.0));
        assert_eq!(out[0].x().column(0), d.x().column(0));
        assert_eq!(out[0].x().column(2), d.x().column(2));
    }

    #[test]
    fn permutation_is_seeded_and_shares_rows() {
        let d = normal_data(50, 3, 2, |x| x[0]);
        let s = ReplacementStrategy::permutation(3, 11);
        let set = FeatureSet::pair(0, 2).unwrap();
        let a = replace_features(&d, &set, &s).unwrap();
        let b = replace_features(&d, &set, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_ne!(a[0].x(), a[1].x());
        // shared row permutation keeps (x0, x2) pairs intact
        let orig: Vec<(u64, u64)> = (0..50).map(|i| (d.x().get(i, 0).to_bits(), d.x().get(i, 2).to_bits())).collect();
        for i in 0..50 {
            let pair = (a[0].x().get(i, 0).to_bits(), a[0].x().get(i, 2).to_bits());
            assert!(orig.contains(&pair));
        }
        assert_eq!(a[0].x().column(1), d.x().column(1));
    }

    #[test]
    fn permuting_constant_column_is_noop() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![3.0, i as f64]).collect();
        let d = Dataset::from_rows(&rows, vec![0.0; 10]).unwrap();
        let out = replace_features(&d, &FeatureSet::single(0), &ReplacementStrategy::permutation(4, 5)).unwrap();
        assert!(out.iter().all(|o| o == &d));
    }

    #[test]
    fn out_of_range_feature() {
        let d = normal_data(5, 2, 3, |x| x[0]);
        let err = replace_features(&d, &FeatureSet::single(2), &ReplacementStrategy::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::FeatureIndex { index: 2, p: 2 }));
    }

    #[test]
    fn irrelevant_feature_has_no_effect() {
        let d = normal_data(200, 2, 4, |x| 2.0 * x[0]);
        let m = LinearModel::new(vec![2.0, 0.0], 0.0);
        let e = main_effect(&m, &d, 1, LossKind::Mse, &ReplacementStrategy::zeros(2)).unwrap();
        assert_eq!(e.value, 0.0);
        let e = main_effect(&m, &d, 1, LossKind::Mse, &ReplacementStrategy::permutation(30, 9)).unwrap();
        assert!(e.value.abs() <= 3.0 * e.std_error.unwrap().max(1e-15));
    }

    #[test]
    fn additive_main_effect_under_zero_baseline() {
        let d = normal_data(100, 2, 5, |x| x[0] + x[1]);
        let m = LinearModel::new(vec![1.0, 1.0], 0.0);
        let e = main_effect(&m, &d, 0, LossKind::Mse, &ReplacementStrategy::zeros(2)).unwrap();
        // oracle: residual after zeroing x0 is exactly x0
        let oracle = d.x().column(0).iter().map(|v| v * v).sum::<f64>() / 100.0;
        assert!((e.value - oracle).abs() < 1e-12);
    }

    #[test]
    fn masked_interaction_model_main_effect_matches_loop() {
        let d = normal_data(300, 2, 6, |x| x[0] + x[1] + x[0] * x[1]);
        let m = FnModel::new("masked", 2, |x| {
            let xi = 0.95 * x[0];
            xi + x[1] + xi * x[1]
        });
        let e = main_effect(&m, &d, 0, LossKind::Mse, &ReplacementStrategy::zeros(2)).unwrap();
        let mut base = 0.0;
        let mut repl = 0.0;
        for (row, y) in d.x().iter_rows().zip(d.y()) {
            let f = 0.95 * row[0] + row[1] + 0.95 * row[0] * row[1];
            base += (y - f).powi(2);
            repl += (y - row[1]).powi(2);
        }
        let oracle = (repl - base) / 300.0;
        assert!((e.value - oracle).abs() < 1e-10);
    }

    #[test]
    fn joint_of_singleton_equals_main() {
        let d = normal_data(50, 3, 7, |x| x[0] * x[1]);
        let m = FnModel::new("prod", 3, |x| x[0] * x[1] + x[2]);
        let s = ReplacementStrategy::permutation(5, 3);
        let a = main_effect(&m, &d, 1, LossKind::Mse, &s).unwrap();
        let b = joint_effect(&m, &d, &FeatureSet::single(1), LossKind::Mse, &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn product_joint_effect_against_direct_evaluation() {
        let d = normal_data(80, 2, 8, |x| x[0] * x[1]);
        let m = FnModel::new("prod", 2, |x| x[0] * x[1]);
        let e = joint_effect(&m, &d, &FeatureSet::pair(0, 1).unwrap(), LossKind::Mse, &ReplacementStrategy::zeros(2)).unwrap();
        // the replaced model predicts 0 everywhere; baseline loss is 0
        let oracle = d.y().iter().map(|y| y * y).sum::<f64>() / 80.0;
        assert!((e.value - oracle).abs() < 1e-12);
        assert_eq!(e.baseline_loss, 0.0);
    }

    #[test]
    fn additive_model_has_zero_fis() {
        let d = normal_data(60, 3, 9, |x| x[0]);
        let m = FnModel::new("add", 3, |x| x[0].powi(3) - 2.0 * x[1] + x[2].sin());
        let r = fis(&m, &d, &FeatureSet::new([0, 1, 2]).unwrap(), LossKind::SignedError, &ReplacementStrategy::zeros(3)).unwrap();
        assert!(r.fis.abs() < 1e-12);
        assert_eq!(r.fis, r.joint.value - r.mains.iter().map(|m| m.value).sum::<f64>());
    }

    #[test]
    fn fis_requires_two_features() {
        let d = normal_data(5, 2, 1, |x| x[0]);
        let m = LinearModel::new(vec![1.0, 1.0], 0.0);
        assert!(fis(&m, &d, &FeatureSet::single(0), LossKind::Mse, &ReplacementStrategy::zeros(2)).is_err());
    }

    #[test]
    fn more_repeats_shrink_std_error() {
        let d = normal_data(100, 2, 10, |x| x[0] * x[1] + x[0]);
        let m = FnModel::new("m", 2, |x| x[0] * x[1] + x[0]);
        let ok = (0..3).any(|retry| {
            let few = main_effect(&m, &d, 0, LossKind::Mse, &ReplacementStrategy::permutation(4, 100 + retry)).unwrap();
            let many = main_effect(&m, &d, 0, LossKind::Mse, &ReplacementStrategy::permutation(64, 100 + retry)).unwrap();
            many.std_error.unwrap() < few.std_error.unwrap()
        });
        assert!(ok);
    }

    #[test]
    fn cache_reuses_main_effects() {
        let d = normal_data(30, 3, 11, |x| x[0]);
        let m = FnModel::new("m", 3, |x| x[0] * x[1] * x[2]);
        let cache = EffectCache::new();
        let s = ReplacementStrategy::zeros(3);
        cache.fis(&m, &d, &FeatureSet::pair(0, 1).unwrap(), LossKind::Mse, &s).unwrap();
        assert_eq!(cache.len(), 3);
        cache.fis(&m, &d, &FeatureSet::pair(0, 2).unwrap(), LossKind::Mse, &s).unwrap();
        // main effect of feature 0 is reused
        assert_eq!(cache.len(), 5);
    }

    #[test]
    fn fis_csv_layout() {
        let d = normal_data(10, 2, 12, |x| x[0] * x[1]);
        let m = FnModel::new("prod", 2, |x| x[0] * x[1]);
        let r = fis(&m, &d, &FeatureSet::pair(0, 1).unwrap(), LossKind::Mse, &ReplacementStrategy::permutation(2, 4)).unwrap();
        let mut buf = Vec::new();
        write_fis_csv(&mut buf, &[r], Some(4)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "features;phi_joint;phi_main_sum;fis;strategy;loss;seed");
        let row = lines.next().unwrap();
        assert!(row.starts_with("0,1;"));
        assert!(row.ends_with(";permutation:2;mse;4"));
    }
}
