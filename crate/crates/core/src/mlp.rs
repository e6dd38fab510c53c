//! Closed-form treatment of the one-hidden-layer sigmoid network
//! `g(x) = Σ_k α_k σ(β_k·x) + b`.
//!
//! Masking feature `i` by `m` changes each pre-activation from `z` to
//! `z_rest + m·z_i`. Keeping every unit's activation within `ε/‖α‖₁` of its
//! reference value keeps the prediction within `ε`, which gives a per-sample
//! interval for `m` in closed form. The interval used is the intersection over
//! samples and units, so every mask inside it is a member of the set.
//!
//! Interaction scores use signed error with baseline replacement, which
//! reduces to a four-term mixed difference per sample (the bias cancels).

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSet, Matrix};
use crate::error::{Error, Result};
use crate::model::{sigmoid, MaskVector, PredictiveModel};
use crate::roots;

/// Masks are searched inside `[0, MASK_CEILING]`.
pub const MASK_CEILING: f64 = 10.0;
const GRAD_TOL: f64 = 1e-6;
const MAX_NEWTON: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidMlp {
    alpha: Vec<f64>,
    /// One row of input weights per hidden unit.
    beta: Vec<Vec<f64>>,
    bias: f64,
}

impl SigmoidMlp {
    pub fn new(alpha: Vec<f64>, beta: Vec<Vec<f64>>, bias: f64) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::config("sigmoid MLP needs at least one hidden unit"));
        }
        if let Some(a) = alpha.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
            return Err(Error::config(format!("output weights must be positive and finite (got {a})")));
        }
        if beta.len() != alpha.len() {
            return Err(Error::Arity {
                what: "beta rows",
                expected: alpha.len(),
                found: beta.len(),
            });
        }
        let p = beta[0].len();
        if p == 0 {
            return Err(Error::config("beta rows must be non-empty"));
        }
        for row in &beta {
            if row.len() != p {
                return Err(Error::Arity {
                    what: "beta row",
                    expected: p,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("beta must be finite"));
            }
        }
        if !bias.is_finite() {
            return Err(Error::config("bias must be finite"));
        }
        Ok(Self { alpha, beta, bias })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn hidden(&self) -> usize {
        self.alpha.len()
    }

    fn alpha_l1(&self) -> f64 {
        self.alpha.iter().sum()
    }

    fn pre_activation(&self, k: usize, x: &[f64]) -> f64 {
        self.beta[k].iter().zip(x).map(|(b, v)| b * v).sum()
    }
}

impl PredictiveModel for SigmoidMlp {
    fn n_features(&self) -> usize {
        self.beta[0].len()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        (0..self.hidden())
            .map(|k| self.alpha[k] * sigmoid(self.pre_activation(k, x)))
            .sum::<f64>()
            + self.bias
    }

    fn id(&self) -> String {
        format!("sigmoid-mlp(alpha={:?};beta={:?};b={})", self.alpha, self.beta, self.bias)
    }
}

pub fn mlp_predict(model: &SigmoidMlp, x: &Matrix) -> Result<Vec<f64>> {
    if x.cols() != model.n_features() {
        return Err(Error::Arity {
            what: "input columns",
            expected: model.n_features(),
            found: x.cols(),
        });
    }
    Ok(model.predict(x))
}

fn logit(q: f64) -> f64 {
    (q / (1.0 - q)).ln()
}

/// Feasible mask intervals for the features of a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskBoundary {
    pub features: FeatureSet,
    pub p: usize,
    pub epsilon: f64,
    /// Per-unit tolerance, `epsilon / ‖α‖₁`.
    pub effective_epsilon: f64,
    /// Aggregate interval per feature of the set, in set order.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Per-sample intervals (`[slot][sample]`); ±∞ where a sample places no
    /// constraint on that feature.
    pub per_sample_lower: Vec<Vec<f64>>,
    pub per_sample_upper: Vec<Vec<f64>>,
    /// Samples where the tolerance exceeds the masked activation or its
    /// complement at the boundary, so the closed form's smallness assumption fails.
    pub assumption_violations: Vec<usize>,
    pub m_star: Option<MaskVector>,
}

impl MaskBoundary {
    fn embed(&self, values: &[f64]) -> MaskVector {
        let mut v = vec![1.0; self.p];
        for (slot, &f) in self.features.indices().iter().enumerate() {
            v[f] = values[slot];
        }
        MaskVector::new(v).expect("bounds are finite")
    }

    pub fn m1(&self) -> MaskVector {
        self.embed(&self.lower)
    }

    pub fn m2(&self) -> MaskVector {
        self.embed(&self.upper)
    }
}

/// Per-feature mask intervals keeping every sample's prediction within
/// `epsilon` of the reference, for each feature of `features` masked alone.
pub fn mask_bounds(model: &SigmoidMlp, data: &Dataset, epsilon: f64, features: &FeatureSet) -> Result<MaskBoundary> {
    let p = model.n_features();
    if data.p() != p {
        return Err(Error::Arity {
            what: "dataset features",
            expected: p,
            found: data.p(),
        });
    }
    features.validate(p)?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::config(format!("epsilon must be >= 0 (got {epsilon})")));
    }
    let n = data.n();
    let e = epsilon / model.alpha_l1();
    let slots = features.len();
    if epsilon == 0.0 {
        return Ok(MaskBoundary {
            features: features.clone(),
            p,
            epsilon,
            effective_epsilon: 0.0,
            lower: vec![1.0; slots],
            upper: vec![1.0; slots],
            per_sample_lower: vec![vec![1.0; n]; slots],
            per_sample_upper: vec![vec![1.0; n]; slots],
            assumption_violations: vec![],
            m_star: None,
        });
    }

    let mut infeasible = Vec::new();
    for (s, x) in data.x().iter_rows().enumerate() {
        for k in 0..model.hidden() {
            let sz = sigmoid(model.pre_activation(k, x));
            if sz - e <= 0.0 || sz + e >= 1.0 {
                infeasible.push(s);
                break;
            }
        }
    }
    if !infeasible.is_empty() {
        return Err(Error::Infeasible {
            message: format!("tolerance {e} per unit leaves the sigmoid range"),
            samples: infeasible,
        });
    }

    let mut per_sample_lower = vec![vec![f64::NEG_INFINITY; n]; slots];
    let mut per_sample_upper = vec![vec![f64::INFINITY; n]; slots];
    for (slot, &i) in features.indices().iter().enumerate() {
        for (s, x) in data.x().iter_rows().enumerate() {
            for k in 0..model.hidden() {
                let z = model.pre_activation(k, x);
                let zi = model.beta[k][i] * x[i];
                if zi.abs() <= 1e-12 {
                    continue;
                }
                let rest = z - zi;
                let sz = sigmoid(z);
                let a = (logit(sz - e) - rest) / zi;
                let b = (logit(sz + e) - rest) / zi;
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                per_sample_lower[slot][s] = per_sample_lower[slot][s].max(lo);
                per_sample_upper[slot][s] = per_sample_upper[slot][s].min(hi);
            }
        }
    }
    let clamp = |v: f64| v.clamp(0.0, MASK_CEILING);
    let lower: Vec<f64> = per_sample_lower
        .iter()
        .map(|v| clamp(v.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
        .collect();
    let upper: Vec<f64> = per_sample_upper
        .iter()
        .map(|v| clamp(v.iter().copied().fold(f64::INFINITY, f64::min)))
        .collect();

    let mut assumption_violations = Vec::new();
    for (s, x) in data.x().iter_rows().enumerate() {
        let violated = features.indices().iter().enumerate().any(|(slot, &i)| {
            [lower[slot], upper[slot]].into_iter().any(|m| {
                (0..model.hidden()).any(|k| {
                    let zi = model.beta[k][i] * x[i];
                    let q = sigmoid(model.pre_activation(k, x) - zi + m * zi);
                    e > q.min(1.0 - q)
                })
            })
        });
        if violated {
            assumption_violations.push(s);
        }
    }
    if !assumption_violations.is_empty() {
        log::warn!(
            "tolerance smallness assumption fails on {} samples",
            assumption_violations.len()
        );
    }

    Ok(MaskBoundary {
        features: features.clone(),
        p,
        epsilon,
        effective_epsilon: e,
        lower,
        upper,
        per_sample_lower,
        per_sample_upper,
        assumption_violations,
        m_star: None,
    })
}

/// Interaction score of a pair as a function of its two mask entries.
///
/// Precomputes, per sample and unit, the pre-activation without the pair and
/// the pair's contributions at observed and baseline values.
pub struct FisSurface {
    alpha: Vec<f64>,
    // (rest, a, b, na, nb) per sample, per unit
    terms: Vec<Vec<[f64; 5]>>,
}

impl FisSurface {
    pub fn new(model: &SigmoidMlp, data: &Dataset, pair: &FeatureSet, neutral: &[f64]) -> Result<Self> {
        let p = model.n_features();
        if pair.len() != 2 {
            return Err(Error::contract("analytic interaction score is defined for pairs"));
        }
        pair.validate(p)?;
        if data.p() != p || neutral.len() != p {
            return Err(Error::Arity {
                what: "dataset/baseline features",
                expected: p,
                found: if data.p() != p { data.p() } else { neutral.len() },
            });
        }
        let (i, j) = (pair.indices()[0], pair.indices()[1]);
        let terms = data
            .x()
            .iter_rows()
            .map(|x| {
                (0..model.hidden())
                    .map(|k| {
                        let bk = &model.beta[k];
                        let (a, b) = (bk[i] * x[i], bk[j] * x[j]);
                        [model.pre_activation(k, x) - a - b, a, b, bk[i] * neutral[i], bk[j] * neutral[j]]
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            alpha: model.alpha.clone(),
            terms,
        })
    }

    pub fn value(&self, mi: f64, mj: f64) -> f64 {
        let mut total = 0.0;
        for sample in &self.terms {
            for (alpha, &[r, a, b, na, nb]) in self.alpha.iter().zip(sample) {
                let full = sigmoid(r + mi * a + mj * b);
                let both = sigmoid(r + mi * na + mj * nb);
                let drop_i = sigmoid(r + mi * na + mj * b);
                let drop_j = sigmoid(r + mi * a + mj * nb);
                total += alpha * (drop_i + drop_j - full - both);
            }
        }
        total / self.terms.len() as f64
    }

    pub fn gradient(&self, m: [f64; 2]) -> [f64; 2] {
        [
            roots::central_diff(&|t| self.value(t, m[1]), m[0]),
            roots::central_diff(&|t| self.value(m[0], t), m[1]),
        ]
    }

    fn hessian(&self, m: [f64; 2]) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for c in 0..2 {
            let step = 1e-4 * m[c].abs().max(1.0);
            let (mut up, mut dn) = (m, m);
            up[c] += step;
            dn[c] -= step;
            let (gu, gd) = (self.gradient(up), self.gradient(dn));
            for r in 0..2 {
                h[r][c] = (gu[r] - gd[r]) / (2.0 * step);
            }
        }
        let off = 0.5 * (h[0][1] + h[1][0]);
        h[0][1] = off;
        h[1][0] = off;
        h
    }
}

/// Analytic score at `(m_i, m_j)` under a zero baseline.
pub fn fis_at(model: &SigmoidMlp, data: &Dataset, pair: &FeatureSet, mi: f64, mj: f64) -> Result<f64> {
    Ok(FisSurface::new(model, data, pair, &vec![0.0; model.n_features()])?.value(mi, mj))
}

fn inside(m: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> bool {
    (0..2).all(|c| m[c] >= lo[c] && m[c] <= hi[c])
}

fn sq_norm(g: [f64; 2]) -> f64 {
    g[0] * g[0] + g[1] * g[1]
}

/// Damped Newton on the gradient from one start. `None` if the iterate
/// leaves the box or stalls.
fn newton_2d(surface: &FisSurface, start: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> Result<Option<[f64; 2]>> {
    let mut m = start;
    let mut g = surface.gradient(m);
    for _ in 0..MAX_NEWTON {
        if g[0].abs().max(g[1].abs()) < GRAD_TOL {
            return Ok(Some(m));
        }
        let h = surface.hessian(m);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let dir = if det.abs() > 1e-300 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(h[0][0] * g[1] - h[1][0] * g[0]) / det,
            ]
        } else {
            [-g[0], -g[1]]
        };
        let current = sq_norm(g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let cand = [m[0] + t * dir[0], m[1] + t * dir[1]];
            if inside(cand, lo, hi) {
                let gc = surface.gradient(cand);
                if sq_norm(gc) < current {
                    accepted = Some((cand, gc));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, gc)) => {
                m = cand;
                g = gc;
            }
            None => return Ok(None),
        }
    }
    Err(Error::Solver {
        message: format!("critical-point search did not converge in {MAX_NEWTON} iterations"),
        last: m.to_vec(),
    })
}

fn pair_box(bounds: &MaskBoundary) -> Result<([f64; 2], [f64; 2])> {
    if bounds.features.len() != 2 {
        return Err(Error::contract("critical-point search needs pair bounds"));
    }
    Ok(([bounds.lower[0], bounds.lower[1]], [bounds.upper[0], bounds.upper[1]]))
}

fn interior_critical_points(surface: &FisSurface, lo: [f64; 2], hi: [f64; 2]) -> Result<Vec<[f64; 2]>> {
    if (0..2).any(|c| hi[c] - lo[c] <= 1e-12) {
        return Ok(vec![]);
    }
    // starts ordered outward from the centre
    let fracs = [0.5, 0.3, 0.7, 0.1, 0.9];
    let mut found: Vec<[f64; 2]> = Vec::new();
    for &u in &fracs {
        for &v in &fracs {
            let start = [lo[0] + u * (hi[0] - lo[0]), lo[1] + v * (hi[1] - lo[1])];
            if let Some(m) = newton_2d(surface, start, lo, hi)? {
                if !found.iter().any(|f| (f[0] - m[0]).abs() < 1e-6 && (f[1] - m[1]).abs() < 1e-6) {
                    found.push(m);
                }
            }
        }
    }
    Ok(found)
}

/// An interior stationary point of the pair's score inside the bounds, or
/// `None` when the gradient has no zero there.
pub fn critical_mask(
    model: &SigmoidMlp,
    data: &Dataset,
    pair: &FeatureSet,
    bounds: &MaskBoundary,
) -> Result<Option<MaskVector>> {
    if &bounds.features != pair {
        return Err(Error::contract("bounds were computed for a different feature set"));
    }
    let surface = FisSurface::new(model, data, pair, &vec![0.0; model.n_features()])?;
    let (lo, hi) = pair_box(bounds)?;
    Ok(interior_critical_points(&surface, lo, hi)?
        .first()
        .map(|m| bounds.embed(m)))
}

/// Stationary points of the score restricted to the four box edges.
fn edge_critical_points(surface: &FisSurface, lo: [f64; 2], hi: [f64; 2]) -> Result<Vec<[f64; 2]>> {
    const SCAN: usize = 64;
    let mut out = Vec::new();
    for free in 0..2 {
        let fixed = 1 - free;
        if hi[free] - lo[free] <= 1e-12 {
            continue;
        }
        for at in [lo[fixed], hi[fixed]] {
            let point = |t: f64| {
                let mut m = [0.0; 2];
                m[free] = t;
                m[fixed] = at;
                m
            };
            let along = |t: f64| {
                let m = point(t);
                surface.value(m[0], m[1])
            };
            let deriv = |t: f64| roots::central_diff(&along, t);
            let ts: Vec<f64> = (0..=SCAN)
                .map(|k| lo[free] + (hi[free] - lo[free]) * k as f64 / SCAN as f64)
                .collect();
            let ds: Vec<f64> = ts.iter().map(|&t| deriv(t)).collect();
            for w in 0..SCAN {
                if ds[w] == 0.0 {
                    out.push(point(ts[w]));
                } else if ds[w].signum() != ds[w + 1].signum() && ds[w + 1] != 0.0 {
                    out.push(point(roots::bisect(deriv, ts[w], ts[w + 1], 200)?));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisExtrema {
    pub pair: FeatureSet,
    pub fis_min: f64,
    pub fis_max: f64,
    pub argmin: MaskVector,
    pub argmax: MaskVector,
    pub boundary: MaskBoundary,
    /// Number of candidate masks compared.
    pub candidates: usize,
}

/// Range of the pair's score over its feasible mask box.
///
/// Candidates are the four box corners, stationary points along each edge and
/// interior stationary points. The box is two-dimensional, so the two bound
/// masks alone do not cover its extreme values.
pub fn fis_extrema(model: &SigmoidMlp, data: &Dataset, pair: &FeatureSet, epsilon: f64) -> Result<FisExtrema> {
    let mut boundary = mask_bounds(model, data, epsilon, pair)?;
    let surface = FisSurface::new(model, data, pair, &vec![0.0; model.n_features()])?;
    let (lo, hi) = pair_box(&boundary)?;

    let interior = interior_critical_points(&surface, lo, hi)?;
    boundary.m_star = interior.first().map(|m| boundary.embed(m));

    let mut candidates = vec![lo, hi, [lo[0], hi[1]], [hi[0], lo[1]]];
    candidates.extend(edge_critical_points(&surface, lo, hi)?);
    candidates.extend(interior);
    let values: Vec<f64> = candidates.iter().map(|m| surface.value(m[0], m[1])).collect();
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("non-finite score at mask {:?}", candidates[k])));
    }
    let (mut kmin, mut kmax) = (0, 0);
    for (k, &v) in values.iter().enumerate() {
        if v < values[kmin] {
            kmin = k;
        }
        if v > values[kmax] {
            kmax = k;
        }
    }
    Ok(FisExtrema {
        pair: pair.clone(),
        fis_min: values[kmin],
        fis_max: values[kmax],
        argmin: boundary.embed(&candidates[kmin]),
        argmax: boundary.embed(&candidates[kmax]),
        boundary,
        candidates: candidates.len(),
    })
}

/// The `mlp-analytic` command's JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpReport {
    pub pair: Vec<usize>,
    pub epsilon: f64,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub m_star: Option<Vec<f64>>,
    pub fis_min: f64,
    pub fis_max: f64,
}

impl From<&FisExtrema> for MlpReport {
    fn from(e: &FisExtrema) -> Self {
        Self {
            pair: e.pair.indices().to_vec(),
            epsilon: e.boundary.epsilon,
            m1: e.boundary.m1().as_slice().to_vec(),
            m2: e.boundary.m2().as_slice().to_vec(),
            m_star: e.boundary.m_star.as_ref().map(|m| m.as_slice().to_vec()),
            fis_min: e.fis_min,
            fis_max: e.fis_max,
        }
    }
}
