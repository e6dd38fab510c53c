//! The predictive-model contract, multiplicative masks and masked models.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureSet, Matrix};
use crate::error::{Error, Result};

/// A deterministic regression or scoring function of `n_features` inputs.
///
/// Implementations are evaluated concurrently from many threads and must not
/// mutate state during prediction.
pub trait PredictiveModel: Send + Sync {
    fn n_features(&self) -> usize;

    fn predict_row(&self, x: &[f64]) -> f64;

    /// Stable human-readable identifier; also the effect-cache key.
    fn id(&self) -> String;

    fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

pub type SharedModel = Arc<dyn PredictiveModel>;

impl<M: PredictiveModel + ?Sized> PredictiveModel for Arc<M> {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        (**self).predict_row(x)
    }

    fn id(&self) -> String {
        (**self).id()
    }

    fn predict(&self, x: &Matrix) -> Vec<f64> {
        (**self).predict(x)
    }
}

/// Closure-backed model, mostly for tests and ad-hoc experiments.
pub struct FnModel {
    name: String,
    p: usize,
    f: RowFn,
}

type RowFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

impl FnModel {
    pub fn new(name: impl Into<String>, p: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            p,
            f: Box::new(f),
        }
    }
}

impl fmt::Debug for FnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel").field("name", &self.name).field("p", &self.p).finish()
    }
}

impl PredictiveModel for FnModel {
    fn n_features(&self) -> usize {
        self.p
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn id(&self) -> String {
        self.name.clone()
    }
}

/// `w . x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }
}

impl PredictiveModel for LinearModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    fn id(&self) -> String {
        format!("linear({};{})", join(&self.weights), self.bias)
    }
}

/// `sigmoid(w . x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }
}

impl PredictiveModel for LogisticModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let z = self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias;
        sigmoid(z)
    }

    fn id(&self) -> String {
        format!("logistic({};{})", join(&self.weights), self.bias)
    }
}

/// `x_0 + ... + x_{k-1} + x_0 * ... * x_{k-1}` over `p >= k` inputs.
///
/// With `k = 2` this is the halo walkthrough function `x_i + x_j + x_i x_j`;
/// with `k = 3` its three-way sibling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumProductModel {
    pub k: usize,
    pub p: usize,
}

impl SumProductModel {
    pub fn new(k: usize, p: usize) -> Result<Self> {
        if k == 0 || k > p {
            return Err(Error::config(format!("sum-product needs 1 <= k <= p (k={k}, p={p})")));
        }
        Ok(Self { k, p })
    }
}

impl PredictiveModel for SumProductModel {
    fn n_features(&self) -> usize {
        self.p
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let head = &x[..self.k];
        head.iter().sum::<f64>() + head.iter().product::<f64>()
    }

    fn id(&self) -> String {
        format!("sum-product({};{})", self.k, self.p)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Per-feature multiplicative scales applied to the model input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaskVector(Vec<f64>);

impl MaskVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("mask entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn ones(p: usize) -> Self {
        Self(vec![1.0; p])
    }

    /// Identity except `value` at `feature`.
    pub fn single(p: usize, feature: usize, value: f64) -> Result<Self> {
        if feature >= p {
            return Err(Error::FeatureIndex { index: feature, p });
        }
        let mut v = vec![1.0; p];
        v[feature] = value;
        Self::new(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&v| v == 1.0)
    }

    /// Indices whose scale is not exactly one.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 1.0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Entrywise product.
    pub fn compose(&self, other: &MaskVector) -> Result<MaskVector> {
        if self.len() != other.len() {
            return Err(Error::Arity {
                what: "mask composition",
                expected: self.len(),
                found: other.len(),
            });
        }
        Ok(MaskVector(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect()))
    }
}

impl fmt::Display for MaskVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", join(&self.0))
    }
}

/// `backbone(X ⊙ mask)`.
#[derive(Clone)]
pub struct MaskedModel {
    backbone: SharedModel,
    mask: MaskVector,
}

impl MaskedModel {
    pub fn backbone(&self) -> &SharedModel {
        &self.backbone
    }

    pub fn mask(&self) -> &MaskVector {
        &self.mask
    }
}

impl fmt::Debug for MaskedModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaskedModel")
            .field("backbone", &self.backbone.id())
            .field("mask", &self.mask)
            .finish()
    }
}

impl PredictiveModel for MaskedModel {
    fn n_features(&self) -> usize {
        self.backbone.n_features()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let scaled: Vec<f64> = x.iter().zip(self.mask.as_slice()).map(|(v, m)| v * m).collect();
        self.backbone.predict_row(&scaled)
    }

    fn id(&self) -> String {
        format!("{}∘mask{}", self.backbone.id(), self.mask)
    }

    fn predict(&self, x: &Matrix) -> Vec<f64> {
        self.backbone.predict(&x.scale_columns(self.mask.as_slice()))
    }
}

/// Composes a mask layer in front of `backbone`.
pub fn apply_mask(backbone: SharedModel, mask: MaskVector) -> Result<MaskedModel> {
    if mask.len() != backbone.n_features() {
        return Err(Error::Arity {
            what: "mask length",
            expected: backbone.n_features(),
            found: mask.len(),
        });
    }
    Ok(MaskedModel { backbone, mask })
}

/// Multiplies single-feature masks into one mask over `target`.
///
/// `per_feature[k]` belongs to `target.indices()[k]` and may differ from the
/// identity only there.
pub fn compose_masks(per_feature: &[MaskVector], target: &FeatureSet) -> Result<MaskVector> {
    if per_feature.len() != target.len() {
        return Err(Error::Arity {
            what: "per-feature masks",
            expected: target.len(),
            found: per_feature.len(),
        });
    }
    let p = per_feature[0].len();
    target.validate(p)?;
    let mut out = MaskVector::ones(p);
    for (mask, &feature) in per_feature.iter().zip(target.indices()) {
        if mask.len() != p {
            return Err(Error::Arity {
                what: "per-feature mask length",
                expected: p,
                found: mask.len(),
            });
        }
        if let Some(stray) = mask.support().into_iter().find(|&i| i != feature) {
            return Err(Error::contract(format!(
                "mask declared for feature {feature} also scales feature {stray}"
            )));
        }
        out = out.compose(mask)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shared<M: PredictiveModel + 'static>(m: M) -> SharedModel {
        Arc::new(m)
    }

    #[test]
    fn identity_mask_is_transparent() {
        let g = shared(LinearModel::new(vec![1.0, -2.0, 0.5], 0.25));
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 4.0]]).unwrap();
        let masked = apply_mask(g.clone(), MaskVector::ones(3)).unwrap();
        assert_eq!(masked.predict(&x), g.predict(&x));
    }

    #[test]
    fn zeroing_a_feature_of_an_additive_model() {
        let g = shared(LinearModel::new(vec![1.0; 3], 0.0));
        let x = Matrix::from_rows(&[vec![1.5, 2.0, 3.0], vec![-1.0, 0.5, 4.0]]).unwrap();
        let masked = apply_mask(g.clone(), MaskVector::new(vec![0.0, 1.0, 1.0]).unwrap()).unwrap();
        let base = g.predict(&x);
        let out = masked.predict(&x);
        for i in 0..2 {
            assert_eq!(base[i] - out[i], x.get(i, 0));
        }
    }

    #[test]
    fn masked_sum_product_hand_value() {
        let g = shared(SumProductModel::new(2, 2).unwrap());
        let masked = apply_mask(g, MaskVector::new(vec![0.95, 0.85]).unwrap()).unwrap();
        let v = masked.predict_row(&[1.0, 1.0]);
        // 0.95 + 0.85 + 0.95 * 0.85
        assert!((v - 2.6075).abs() < 1e-12);
    }

    #[test]
    fn mask_length_mismatch() {
        let g = shared(LinearModel::new(vec![1.0; 3], 0.0));
        assert!(matches!(apply_mask(g, MaskVector::ones(2)), Err(Error::Arity { .. })));
    }

    #[test]
    fn compose_examples() {
        let t = FeatureSet::pair(0, 1).unwrap();
        let a = MaskVector::new(vec![0.9, 1.0]).unwrap();
        let b = MaskVector::new(vec![1.0, 1.1]).unwrap();
        assert_eq!(compose_masks(&[a.clone(), b], &t).unwrap().as_slice(), &[0.9, 1.1]);
        assert_eq!(compose_masks(std::slice::from_ref(&a), &FeatureSet::single(0)).unwrap(), a);

        let masks: Vec<MaskVector> = (0..3).map(|i| MaskVector::single(5, i, 0.5 + i as f64).unwrap()).collect();
        let out = compose_masks(&masks, &FeatureSet::new([0, 1, 2]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[0.5, 1.5, 2.5, 1.0, 1.0]);
    }

    #[test]
    fn compose_rejects_stray_support() {
        let bad = MaskVector::new(vec![0.9, 1.2]).unwrap();
        let err = compose_masks(&[bad], &FeatureSet::single(0)).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn non_finite_mask_rejected() {
        assert!(MaskVector::new(vec![1.0, f64::INFINITY]).is_err());
    }

    proptest! {
        #[test]
        fn masking_is_order_independent(
            a in proptest::collection::vec(0.1f64..3.0, 3),
            b in proptest::collection::vec(0.1f64..3.0, 3),
            row in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let g = shared(FnModel::new("poly", 3, |x| x[0] * x[1] + x[2].powi(3) - x[0]));
            let ma = MaskVector::new(a).unwrap();
            let mb = MaskVector::new(b).unwrap();
            let ab = apply_mask(shared(apply_mask(g.clone(), ma.clone()).unwrap()), mb.clone()).unwrap();
            let ba = apply_mask(shared(apply_mask(g.clone(), mb.clone()).unwrap()), ma.clone()).unwrap();
            let flat = apply_mask(g, ma.compose(&mb).unwrap()).unwrap();
            let (u, v, w) = (ab.predict_row(&row), ba.predict_row(&row), flat.predict_row(&row));
            let tol = 1e-12 * (1.0 + u.abs());
            prop_assert!((u - v).abs() <= tol && (u - w).abs() <= tol);
        }
    }
}
