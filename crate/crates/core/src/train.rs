//! Full-batch gradient descent for small reference models.
//!
//! Fixed iteration budget and seeded initialisation, so a fit is a pure
//! function of (data, settings, seed).

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{sigmoid, LogisticModel, PredictiveModel};
use crate::rng;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            iterations: 2000,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl FitSettings {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 || !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("fit needs iterations >= 1 and a positive learning rate"));
        }
        Ok(())
    }
}

/// Logistic regression by cross-entropy gradient descent; labels in [0, 1].
pub fn fit_logistic(data: &Dataset, settings: FitSettings) -> Result<LogisticModel> {
    settings.validate()?;
    if data.y().iter().any(|y| !(0.0..=1.0).contains(y)) {
        return Err(Error::config("logistic fit needs targets in [0, 1]"));
    }
    let (n, p) = (data.n(), data.p());
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    for _ in 0..settings.iterations {
        let mut gw = vec![0.0; p];
        let mut gb = 0.0;
        for (x, y) in data.x().iter_rows().zip(data.y()) {
            let z: f64 = w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
            let r = sigmoid(z) - y;
            for (g, v) in gw.iter_mut().zip(x) {
                *g += r * v;
            }
            gb += r;
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= settings.learning_rate * g / n as f64;
        }
        b -= settings.learning_rate * gb / n as f64;
    }
    if w.iter().chain([&b]).any(|v| !v.is_finite()) {
        return Err(Error::numeric("logistic fit diverged"));
    }
    Ok(LogisticModel::new(w, b))
}

/// One tanh hidden layer with a linear output, fitted to squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TanhMlp {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl TanhMlp {
    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        self.w1
            .iter()
            .zip(&self.b1)
            .map(|(row, b)| (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b).tanh())
            .collect()
    }
}

impl PredictiveModel for TanhMlp {
    fn n_features(&self) -> usize {
        self.w1[0].len()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        self.hidden(x).iter().zip(&self.w2).map(|(h, w)| h * w).sum::<f64>() + self.b2
    }

    fn id(&self) -> String {
        format!("tanh-mlp(w1={:?};b1={:?};w2={:?};b2={})", self.w1, self.b1, self.w2, self.b2)
    }
}

pub fn fit_mlp(data: &Dataset, hidden: usize, settings: FitSettings) -> Result<TanhMlp> {
    settings.validate()?;
    if hidden == 0 {
        return Err(Error::config("hidden width must be >= 1"));
    }
    let (n, p) = (data.n(), data.p());
    let mut r = rng::rng_for(settings.seed, &[rng::label("fit-mlp")]);
    let scale = 1.0 / (p as f64).sqrt();
    let mut m = TanhMlp {
        w1: (0..hidden)
            .map(|_| (0..p).map(|_| r.random_range(-scale..scale)).collect())
            .collect(),
        b1: vec![0.0; hidden],
        w2: (0..hidden).map(|_| r.random_range(-0.5..0.5)).collect(),
        b2: 0.0,
    };
    let lr = settings.learning_rate;
    for _ in 0..settings.iterations {
        let mut gw1 = vec![vec![0.0; p]; hidden];
        let mut gb1 = vec![0.0; hidden];
        let mut gw2 = vec![0.0; hidden];
        let mut gb2 = 0.0;
        for (x, y) in data.x().iter_rows().zip(data.y()) {
            let h = m.hidden(x);
            let out = h.iter().zip(&m.w2).map(|(a, w)| a * w).sum::<f64>() + m.b2;
            let r = 2.0 * (out - y);
            gb2 += r;
            for k in 0..hidden {
                gw2[k] += r * h[k];
                let back = r * m.w2[k] * (1.0 - h[k] * h[k]);
                gb1[k] += back;
                for (g, v) in gw1[k].iter_mut().zip(x) {
                    *g += back * v;
                }
            }
        }
        let step = lr / n as f64;
        for k in 0..hidden {
            m.w2[k] -= step * gw2[k];
            m.b1[k] -= step * gb1[k];
            for (w, g) in m.w1[k].iter_mut().zip(&gw1[k]) {
                *w -= step * g;
            }
        }
        m.b2 -= step * gb2;
    }
    let finite = m.w1.iter().flatten().chain(&m.b1).chain(&m.w2).chain([&m.b2]).all(|v| v.is_finite());
    if !finite {
        return Err(Error::numeric("MLP fit diverged"));
    }
    Ok(m)
}
