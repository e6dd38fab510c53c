use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::PredictiveModel;
use crate::par;

/// Empirical loss over a whole dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `sqrt(mean((y - yhat)^2))`.
    Rmse,
    Mse,
    /// `mean(y - yhat)`. Unbounded below; used by the analytic derivations
    /// and the context-form interaction score.
    SignedError,
    /// Misclassification rate with both `y` and `yhat` thresholded at 0.5.
    ZeroOne,
}

impl LossKind {
    pub fn evaluate(self, y: &[f64], yhat: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), yhat.len());
        let terms: Vec<f64> = match self {
            LossKind::Rmse | LossKind::Mse => y
                .iter()
                .zip(yhat)
                .map(|(a, b)| (a - b) * (a - b))
                .collect(),
            LossKind::SignedError => y.iter().zip(yhat).map(|(a, b)| a - b).collect(),
            LossKind::ZeroOne => y
                .iter()
                .zip(yhat)
                .map(|(a, b)| f64::from(u8::from((*a >= 0.5) != (*b >= 0.5))))
                .collect(),
        };
        let m = par::mean(&terms);
        if self == LossKind::Rmse {
            m.sqrt()
        } else {
            m
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Rmse => "rmse",
            LossKind::Mse => "mse",
            LossKind::SignedError => "signed",
            LossKind::ZeroOne => "zero-one",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rmse" => Ok(LossKind::Rmse),
            "mse" => Ok(LossKind::Mse),
            "signed" | "signed-error" => Ok(LossKind::SignedError),
            "zero-one" | "01" => Ok(LossKind::ZeroOne),
            other => Err(Error::config(format!(
                "unknown loss '{other}' (expected rmse, mse, signed, zero-one)"
            ))),
        }
    }
}

pub(crate) fn check_arity(model: &dyn PredictiveModel, p: usize) -> Result<()> {
    if model.n_features() != p {
        return Err(Error::Arity {
            what: "model input",
            expected: model.n_features(),
            found: p,
        });
    }
    Ok(())
}

/// Predictions with arity and finiteness checks.
pub fn checked_predict(model: &dyn PredictiveModel, data: &Dataset) -> Result<Vec<f64>> {
    check_arity(model, data.p())?;
    let yhat = model.predict(data.x());
    if yhat.len() != data.n() {
        return Err(Error::Arity {
            what: "prediction vector",
            expected: data.n(),
            found: yhat.len(),
        });
    }
    if let Some(i) = yhat.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!(
            "model '{}' produced non-finite prediction at row {i}",
            model.id()
        )));
    }
    Ok(yhat)
}

/// Empirical loss of `model` over every sample in `data`.
pub fn expected_loss(model: &dyn PredictiveModel, data: &Dataset, loss: LossKind) -> Result<f64> {
    let yhat = checked_predict(model, data)?;
    let v = loss.evaluate(data.y(), &yhat);
    if !v.is_finite() {
        return Err(Error::numeric(format!("loss {loss} is not finite")));
    }
    Ok(v)
}
