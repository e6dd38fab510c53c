//! Halo-plot and swarm-plot data.
//!
//! A halo fixes the total main effect of a feature set at a radius `t`,
//! splits it over the features on a simplex grid, solves each feature's mask
//! for its share (one solution below one, one above), and records the joint
//! effect of every below/above combination. For an additive model the joint
//! effect equals `t`, so the curve coincides with the circle; departures from
//! the circle show interaction.
//!
//! Effects here are loss shifts of masked models with no feature replacement:
//! `φ_I(m) = L(g∘m_I) - L(g)`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{format_float, Dataset, FeatureSet};
use crate::error::{Error, Result};
use crate::loss::{expected_loss, LossKind};
use crate::model::{apply_mask, MaskVector, SharedModel};
use crate::rashomon::{fisc_cloud, ModelClass, RashomonConfig};
use crate::{par, roots};

/// Simplex grid resolution: allocations are multiples of `1 / resolution`.
pub const DEFAULT_RESOLUTION: usize = 10;
const SOLVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaloSpec {
    pub features: FeatureSet,
    pub radii: Vec<f64>,
    pub resolution: usize,
    pub epsilon: f64,
    pub loss: LossKind,
}

impl HaloSpec {
    pub fn new(features: FeatureSet, radii: Vec<f64>, epsilon: f64) -> Self {
        Self {
            features,
            radii,
            resolution: DEFAULT_RESOLUTION,
            epsilon,
            loss: LossKind::Mse,
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        self.features.validate(p)?;
        if !(2..=3).contains(&self.features.len()) {
            return Err(Error::config("halo needs two or three features"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config(format!("epsilon must be > 0 (got {})", self.epsilon)));
        }
        if self.radii.is_empty() {
            return Err(Error::config("at least one radius is required"));
        }
        if let Some(t) = self.radii.iter().find(|t| !(**t > 0.0 && **t <= self.epsilon)) {
            return Err(Error::config(format!("radius {t} outside (0, {}]", self.epsilon)));
        }
        if self.resolution < self.features.len() {
            return Err(Error::config(format!(
                "grid resolution {} leaves no positive allocation for {} features",
                self.resolution,
                self.features.len()
            )));
        }
        Ok(())
    }

    /// Positive integer compositions of `resolution` into `|I|` parts,
    /// lexicographic, as fractions.
    pub fn allocations(&self) -> Vec<Vec<f64>> {
        fn rec(left: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if parts == 1 {
                prefix.push(left);
                out.push(prefix.clone());
                prefix.pop();
                return;
            }
            for first in 1..=left - (parts - 1) {
                prefix.push(first);
                rec(left - first, parts - 1, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        rec(self.resolution, self.features.len(), &mut Vec::new(), &mut out);
        let k = self.resolution as f64;
        out.into_iter()
            .map(|c| c.into_iter().map(|v| v as f64 / k).collect())
            .collect()
    }
}

fn mask_effect(model: &SharedModel, data: &Dataset, mask: MaskVector, loss: LossKind, reference: f64) -> Result<f64> {
    Ok(expected_loss(&apply_mask(model.clone(), mask)?, data, loss)? - reference)
}

/// Mask value for feature `i` on the requested side of one whose
/// mask-only effect equals `target`.
pub fn solve_mask_for_effect(
    model: &SharedModel,
    data: &Dataset,
    i: usize,
    target: f64,
    side: Side,
    loss: LossKind,
) -> Result<f64> {
    FeatureSet::single(i).validate(data.p())?;
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::contract(format!("effect target must be >= 0 (got {target})")));
    }
    if target == 0.0 {
        return Ok(1.0);
    }
    let p = data.p();
    let reference = expected_loss(model.as_ref(), data, loss)?;
    let phi = |m: f64| -> Result<f64> { mask_effect(model, data, MaskVector::single(p, i, m)?, loss, reference) };
    let (limit, sign) = match side {
        Side::Below => (0.0, -1.0),
        Side::Above => (crate::mlp::MASK_CEILING, 1.0),
    };

    // step outward with doubling until the effect reaches the target
    let mut inner = 1.0;
    let mut d = 1e-3;
    let mut best = 0.0f64;
    let outer = loop {
        let m = if (limit - 1.0).abs() <= d { limit } else { 1.0 + sign * d };
        let v = phi(m)?;
        best = best.max(v);
        if v >= target {
            break m;
        }
        if m == limit {
            return Err(Error::Solver {
                message: format!(
                    "effect {target} unattainable for feature {i} on the {side:?} side; largest reached {best}"
                ),
                last: vec![m],
            });
        }
        inner = m;
        d *= 2.0;
    };

    // bisection runs on a closure that cannot fail, so stash errors
    let failure = std::cell::RefCell::new(None);
    let g = |m: f64| match phi(m) {
        Ok(v) => v - target,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let (a, b) = if inner < outer { (inner, outer) } else { (outer, inner) };
    let root = roots::bisect(g, a, b, 2000)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let achieved = phi(root)?;
    if (achieved - target).abs() > SOLVE_TOL * target.max(1.0) {
        return Err(Error::Solver {
            message: format!("effect {achieved} at mask {root} misses target {target} for feature {i}"),
            last: vec![root],
        });
    }
    Ok(root)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaloPoint {
    pub t: f64,
    /// Share of `t` per feature, in set order.
    pub fractions: Vec<f64>,
    /// Per-feature effect targets, `fraction * t`.
    pub allocation: Vec<f64>,
    pub sides: Vec<Side>,
    /// Solved mask per feature; NaN where that side could not be solved.
    pub masks: Vec<f64>,
    /// Joint effect of the composed mask; absent when any side failed.
    pub phi_joint: Option<f64>,
    pub in_set: bool,
    pub angle: f64,
    pub error: Option<String>,
}

fn sides_of(combo: usize, k: usize) -> Vec<Side> {
    (0..k)
        .map(|slot| if combo >> (k - 1 - slot) & 1 == 1 { Side::Above } else { Side::Below })
        .collect()
}

fn halo_points(model: &SharedModel, data: &Dataset, spec: &HaloSpec) -> Result<Vec<HaloPoint>> {
    spec.validate(data.p())?;
    let p = data.p();
    let k = spec.features.len();
    let combos = 1usize << k;
    let allocations = spec.allocations();
    let per_radius = allocations.len() * combos;
    let reference = expected_loss(model.as_ref(), data, spec.loss)?;
    let tasks: Vec<(usize, usize)> = (0..spec.radii.len())
        .flat_map(|r| (0..allocations.len()).map(move |a| (r, a)))
        .collect();

    let blocks = par::try_map(&tasks, |&(r, a)| -> Result<Vec<HaloPoint>> {
        let t = spec.radii[r];
        let fractions = &allocations[a];
        let allocation: Vec<f64> = fractions.iter().map(|f| f * t).collect();
        // [slot][side] -> solved mask or message
        let mut solved: Vec<[std::result::Result<f64, String>; 2]> = Vec::with_capacity(k);
        for (slot, &feature) in spec.features.indices().iter().enumerate() {
            let mut pair = [Err(String::new()), Err(String::new())];
            for (s, side) in [Side::Below, Side::Above].into_iter().enumerate() {
                pair[s] = match solve_mask_for_effect(model, data, feature, allocation[slot], side, spec.loss) {
                    Ok(m) => Ok(m),
                    Err(e @ Error::Solver { .. }) => Err(e.to_string()),
                    Err(e) => return Err(e),
                };
            }
            solved.push(pair);
        }
        let mut out = Vec::with_capacity(combos);
        for combo in 0..combos {
            let sides = sides_of(combo, k);
            let mut masks = Vec::with_capacity(k);
            let mut errors = Vec::new();
            for (slot, side) in sides.iter().enumerate() {
                match &solved[slot][*side as usize] {
                    Ok(m) => masks.push(*m),
                    Err(msg) => {
                        masks.push(f64::NAN);
                        errors.push(msg.clone());
                    }
                }
            }
            let (phi_joint, in_set) = if errors.is_empty() {
                let mut v = vec![1.0; p];
                for (slot, &f) in spec.features.indices().iter().enumerate() {
                    v[f] = masks[slot];
                }
                let phi = mask_effect(model, data, MaskVector::new(v)?, spec.loss, reference)?;
                (Some(phi), phi <= spec.epsilon)
            } else {
                (None, false)
            };
            let index = a * combos + combo;
            out.push(HaloPoint {
                t,
                fractions: fractions.clone(),
                allocation: allocation.clone(),
                sides,
                masks,
                phi_joint,
                in_set,
                angle: 2.0 * PI * index as f64 / per_radius as f64,
                error: (!errors.is_empty()).then(|| errors.join("; ")),
            });
        }
        Ok(out)
    })?;
    Ok(blocks.into_iter().flatten().collect())
}

/// Halo points of a feature pair: `allocations × 4` per radius.
pub fn halo_curve(model: &SharedModel, data: &Dataset, spec: &HaloSpec) -> Result<Vec<HaloPoint>> {
    if spec.features.len() != 2 {
        return Err(Error::config("halo curve needs exactly two features"));
    }
    halo_points(model, data, spec)
}

/// Halo points of a feature triple: `allocations × 8` per radius.
pub fn halo_surface(model: &SharedModel, data: &Dataset, spec: &HaloSpec) -> Result<Vec<HaloPoint>> {
    if spec.features.len() != 3 {
        return Err(Error::config("halo surface needs exactly three features"));
    }
    halo_points(model, data, spec)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| format_float(v)).collect::<Vec<_>>().join(",")
}

/// `;`-separated halo table; list cells are `,`-joined. A trailing `status`
/// column carries `ok` or the solver message of a flagged point.
pub fn write_halo_csv<W: Write>(writer: W, points: &[HaloPoint]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b';').from_writer(writer);
    w.write_record(["t", "alloc_fracs", "mask_values", "phi_joint", "in_set", "angle", "status"])?;
    for pt in points {
        w.write_record([
            format_float(pt.t),
            join(&pt.fractions),
            join(&pt.masks),
            pt.phi_joint.map(format_float).unwrap_or_default(),
            pt.in_set.to_string(),
            format_float(pt.angle),
            pt.error.clone().unwrap_or_else(|| "ok".into()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmRecord {
    pub features: FeatureSet,
    pub fis: f64,
    pub model_loss: f64,
    pub mask: MaskVector,
}

/// One record per in-set composed mask for every requested set.
pub fn export_swarm(
    reference: &SharedModel,
    data: &Dataset,
    class: &ModelClass,
    sets: &[FeatureSet],
    cfg: &RashomonConfig,
) -> Result<Vec<SwarmRecord>> {
    let mut out = Vec::new();
    for set in sets {
        out.extend(
            fisc_cloud(reference, data, class, set, cfg)?
                .into_iter()
                .map(|m| SwarmRecord {
                    features: m.features,
                    fis: m.fis,
                    model_loss: m.loss,
                    mask: m.mask,
                }),
        );
    }
    Ok(out)
}

pub fn write_swarm_csv<W: Write>(writer: W, records: &[SwarmRecord], p: usize) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b';').from_writer(writer);
    let mut header = vec!["pair".to_string(), "fis".into(), "loss".into()];
    header.extend((0..p).map(|j| format!("mask_{j}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.features.to_string(), format_float(r.fis), format_float(r.model_loss)];
        row.extend(r.mask.as_slice().iter().map(|&v| format_float(v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
