//! Central finite-difference checks of the analytic gradients.

use alloc::vec::Vec;

use crate::attention::ThemeObjective;
use crate::backbone::Projection;
use crate::error::Result;
use crate::subspace::{triplet_grad, triplet_loss, MaskTable, Triplet};

/// Analytic and numeric gradients laid out as one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

impl GradCheck {
    /// `‖a − n‖ / max(‖a‖, ‖n‖)`, and 0 when both vanish.
    pub fn rel_error(&self) -> f64 {
        let norm = |v: &mut dyn Iterator<Item = f64>| libm::sqrt(v.map(|x| x * x).sum::<f64>());
        let diff = norm(&mut self.analytic.iter().zip(&self.numeric).map(|(a, b)| a - b));
        let scale = norm(&mut self.analytic.iter().copied()).max(norm(&mut self.numeric.iter().copied()));
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }
}

/// Central difference of an f32 parameter, divided by the step actually
/// realised after rounding.
fn central_f32(param: f32, step: f32, mut loss_at: impl FnMut(f32) -> Result<f64>) -> Result<f64> {
    let hi = param + step;
    let lo = param - step;
    Ok((loss_at(hi)? - loss_at(lo)?) / (f64::from(hi) - f64::from(lo)))
}

/// Checks [`triplet_grad`] for the projection weight, bias and the
/// triplet's gate, in that order. A gate absent from `masks` is checked at
/// the default gate.
pub fn check_triplet(
    proj: &Projection,
    masks: &MaskTable,
    t: &Triplet<'_>,
    margin: f64,
    step: f32,
) -> Result<GradCheck> {
    let g = triplet_grad(proj, masks, t, margin)?;
    let mut analytic = g.projection.weight.clone();
    analytic.extend_from_slice(&g.projection.bias);
    analytic.extend_from_slice(&g.mask);

    let pair = t.pair();
    let mut masks = masks.clone();
    if !masks.contains(pair) {
        masks.insert(pair, masks.default_mask().to_vec())?;
    }
    let mut numeric = Vec::with_capacity(analytic.len());
    let mut p = proj.clone();
    for k in 0..proj.weight().len() {
        let orig = p.weight()[k];
        numeric.push(central_f32(orig, step, |v| {
            p.weight_mut()[k] = v;
            triplet_loss(&p, &masks, t, margin)
        })?);
        p.weight_mut()[k] = orig;
    }
    for k in 0..proj.n() {
        let orig = p.bias()[k];
        numeric.push(central_f32(orig, step, |v| {
            p.bias_mut()[k] = v;
            triplet_loss(&p, &masks, t, margin)
        })?);
        p.bias_mut()[k] = orig;
    }
    let mut m = masks.clone();
    for k in 0..proj.n() {
        let orig = masks.mask(pair)[k];
        numeric.push(central_f32(orig, step, |v| {
            m.mask_mut(pair).expect("inserted above")[k] = v;
            triplet_loss(proj, &m, t, margin)
        })?);
        m.mask_mut(pair).expect("inserted above")[k] = orig;
    }
    Ok(GradCheck { analytic, numeric })
}

/// Checks [`ThemeObjective::loss_and_grad`] for the weights followed by the
/// bias.
pub fn check_theme_objective(objective: &ThemeObjective<'_>, weights: &[f64], bias: f64, step: f64) -> GradCheck {
    let (_, gw, gb) = objective.loss_and_grad(weights, bias);
    let mut analytic = gw;
    analytic.push(gb);
    let mut w = weights.to_vec();
    let mut numeric = Vec::with_capacity(analytic.len());
    for k in 0..w.len() {
        let orig = w[k];
        w[k] = orig + step;
        let up = objective.loss(&w, bias);
        w[k] = orig - step;
        let down = objective.loss(&w, bias);
        w[k] = orig;
        numeric.push((up - down) / (2.0 * step));
    }
    numeric.push((objective.loss(&w, bias + step) - objective.loss(&w, bias - step)) / (2.0 * step));
    GradCheck { analytic, numeric }
}
