//! Weight-update computation and optimization: folding the factored
//! eligibility terms into per-layer update accumulators, applying updates
//! directly or through Adam, and halving the learning rate when validation
//! accuracy plateaus.

use libm::sqrt;

use crate::conv::{conv2d_update_accumulate, Conv2dGeom};
use crate::tensor::{accumulate_outer, zip_map, Tensor};
use crate::traces::TraceParams;
use crate::{CoreError, CoreResult};

/// Sign convention for applying an accumulated update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateDirection {
    /// Treat the accumulated update as a gradient and step against it.
    Descent,
    /// Step along the accumulated update unchanged.
    AsWritten,
}

/// The update as a signed gradient: descent passes it through, the as-written
/// convention flips it so optimizers that subtract gradients end up adding
/// the raw update.
pub fn signed_gradient(delta: &Tensor, direction: UpdateDirection) -> Tensor {
    match direction {
        UpdateDirection::Descent => delta.clone(),
        UpdateDirection::AsWritten => delta.map(|v| -v),
    }
}

/// Plain stepping without an optimizer: weights move by the learning rate
/// times the update, signed by the direction convention.
pub fn apply_update(
    w: &mut Tensor,
    delta: &Tensor,
    lr: f64,
    direction: UpdateDirection,
) -> CoreResult<()> {
    let s = match direction {
        UpdateDirection::Descent => -lr,
        UpdateDirection::AsWritten => lr,
    };
    w.add_scaled(delta, s)
}

/// Folds one step's eligibility terms, gated by the learning signal, into a
/// dense layer's update accumulator. The first term pairs the signal-scaled
/// instantaneous slope with the input trace; the second pairs the
/// signal-scaled slope trace with the instantaneous input.
pub fn accumulate_dense_update(
    acc: &mut Tensor,
    m: &Tensor,
    psi_now: &Tensor,
    q: &Tensor,
    h: Option<&Tensor>,
    input_spikes: &Tensor,
    p: &TraceParams,
) -> CoreResult<()> {
    let gated_pre = zip_map(m, psi_now, |mi, psi| mi * p.alpha_pre * psi)?;
    accumulate_outer(acc, &gated_pre, q)?;
    if let Some(h) = h {
        let gated_post = zip_map(m, h, |mi, hi| mi * p.alpha_post * hi)?;
        accumulate_outer(acc, &gated_post, input_spikes)?;
    }
    Ok(())
}

/// Convolutional counterpart of [`accumulate_dense_update`]; the outer
/// products become kernel-slot correlations over the shared weights.
pub fn accumulate_conv_update(
    acc: &mut Tensor,
    geom: &Conv2dGeom,
    m: &Tensor,
    psi_now: &Tensor,
    q: &Tensor,
    h: Option<&Tensor>,
    input_spikes: &Tensor,
    p: &TraceParams,
) -> CoreResult<()> {
    let gated_pre = zip_map(m, psi_now, |mi, psi| mi * p.alpha_pre * psi)?;
    conv2d_update_accumulate(acc, geom, &gated_pre, q)?;
    if let Some(h) = h {
        let gated_post = zip_map(m, h, |mi, hi| mi * p.alpha_post * hi)?;
        conv2d_update_accumulate(acc, geom, &gated_post, input_spikes)?;
    }
    Ok(())
}

/// Adam moment decays and the divide-by-zero guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> AdamParams {
        AdamParams { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamParams {
    pub fn validate(&self) -> CoreResult<()> {
        for beta in [self.beta1, self.beta2] {
            if !(beta.is_finite() && (0.0..1.0).contains(&beta)) {
                return Err(CoreError::InvalidParam { context: "adam beta must be in [0, 1)" });
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(CoreError::InvalidParam { context: "adam epsilon must be positive" });
        }
        Ok(())
    }
}

/// Per-layer Adam moments. The decay powers are carried incrementally so the
/// state can be saved and restored without replaying the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
    pub beta1_pow: f64,
    pub beta2_pow: f64,
}

impl AdamState {
    pub fn new(shape: &[usize]) -> AdamState {
        AdamState {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            step: 0,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }
}

/// One Adam step on a gradient. Returns the signed delta to add to the
/// weights.
pub fn adam_step(
    state: &mut AdamState,
    grad: &Tensor,
    lr: f64,
    p: &AdamParams,
) -> CoreResult<Tensor> {
    if grad.len() != state.m.len() {
        return Err(CoreError::LenMismatch { expected: state.m.len(), got: grad.len() });
    }
    state.step += 1;
    state.beta1_pow *= p.beta1;
    state.beta2_pow *= p.beta2;
    let md = state.m.data_mut();
    let gd = grad.data();
    for i in 0..md.len() {
        md[i] = p.beta1 * md[i] + (1.0 - p.beta1) * gd[i];
    }
    let vd = state.v.data_mut();
    for i in 0..vd.len() {
        vd[i] = p.beta2 * vd[i] + (1.0 - p.beta2) * gd[i] * gd[i];
    }
    let m_corr = 1.0 / (1.0 - state.beta1_pow);
    let v_corr = 1.0 / (1.0 - state.beta2_pow);
    let delta = zip_map(&state.m, &state.v, |m, v| {
        -lr * (m * m_corr) / (sqrt(v * v_corr) + p.epsilon)
    })?;
    Ok(delta)
}

/// Learning-rate schedule that halves (or scales by a configured factor)
/// after a run of epochs without a new best validation accuracy. A new best
/// resets the stall count, and so does a cut.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauScheduler {
    pub lr: f64,
    pub best: Option<f64>,
    pub stall: u32,
    pub patience: u32,
    pub factor: f64,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: u32, factor: f64) -> CoreResult<PlateauScheduler> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(CoreError::InvalidParam { context: "learning rate must be positive" });
        }
        if patience == 0 {
            return Err(CoreError::InvalidParam { context: "plateau patience must be positive" });
        }
        if !(factor.is_finite() && factor > 0.0 && factor < 1.0) {
            return Err(CoreError::InvalidParam { context: "plateau factor must be in (0, 1)" });
        }
        Ok(PlateauScheduler { lr, best: None, stall: 0, patience, factor })
    }

    /// Feeds one epoch's validation accuracy. Returns true when the rate was
    /// cut this call.
    pub fn observe(&mut self, val_accuracy: f64) -> bool {
        let improved = match self.best {
            None => true,
            Some(best) => val_accuracy > best,
        };
        if improved {
            self.best = Some(val_accuracy);
            self.stall = 0;
            return false;
        }
        self.stall += 1;
        if self.stall >= self.patience {
            self.lr *= self.factor;
            self.stall = 0;
            return true;
        }
        false
    }
}
