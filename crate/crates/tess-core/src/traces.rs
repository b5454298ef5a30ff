//! Eligibility state kept per layer during training: one low-pass trace of
//! presynaptic spikes and, optionally, one low-pass trace of the surrogate
//! slope on the postsynaptic side.
//!
//! Both traces are plain vectors, so the training-time state of a layer grows
//! with its width, never with the number of synapses and never with the
//! number of steps. Weight updates combine a factor over output neurons with
//! a factor over input neurons; the full per-synapse matrix is only ever
//! formed by folding those factors directly into the update accumulator.

use crate::tensor::{outer, Tensor};
use crate::{CoreError, CoreResult};

/// Trace decay and gating coefficients shared by a whole layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceParams {
    /// Decay of the presynaptic spike trace, in [0, 1).
    pub lambda_pre: f64,
    /// Decay of the postsynaptic slope trace, in [0, 1).
    pub lambda_post: f64,
    /// Gain on the term pairing the instantaneous slope with the spike trace.
    pub alpha_pre: f64,
    /// Gain on the term pairing the slope trace with instantaneous spikes.
    /// Zero disables the term and the slope trace is never allocated.
    pub alpha_post: f64,
}

impl Default for TraceParams {
    fn default() -> TraceParams {
        TraceParams { lambda_pre: 0.5, lambda_post: 0.2, alpha_pre: 1.0, alpha_post: 1.0 }
    }
}

impl TraceParams {
    pub fn validate(&self) -> CoreResult<()> {
        for lambda in [self.lambda_pre, self.lambda_post] {
            if !(lambda.is_finite() && (0.0..1.0).contains(&lambda)) {
                return Err(CoreError::InvalidParam { context: "trace decay must be in [0, 1)" });
            }
        }
        if !(self.alpha_pre.is_finite() && self.alpha_post.is_finite()) {
            return Err(CoreError::InvalidParam { context: "trace gains must be finite" });
        }
        Ok(())
    }

    pub fn post_active(&self) -> bool {
        self.alpha_post != 0.0
    }
}

/// Per-layer trace vectors. `q` follows the layer input, `h` the layer
/// output; `h` exists only while its gain is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceState {
    pub q: Tensor,
    pub h: Option<Tensor>,
}

impl TraceState {
    pub fn new(in_len: usize, out_len: usize, p: &TraceParams) -> TraceState {
        TraceState {
            q: Tensor::zeros(&[in_len]),
            h: p.post_active().then(|| Tensor::zeros(&[out_len])),
        }
    }

    /// Scalars this layer keeps alive for the learning rule.
    pub fn scalar_count(&self) -> usize {
        self.q.len() + self.h.as_ref().map_or(0, Tensor::len)
    }
}

/// q <- lambda_pre * q + incoming spikes.
pub fn update_q(q: &mut Tensor, input_spikes: &Tensor, lambda_pre: f64) -> CoreResult<()> {
    if q.len() != input_spikes.len() {
        return Err(CoreError::LenMismatch { expected: q.len(), got: input_spikes.len() });
    }
    let qd = q.data_mut();
    let sd = input_spikes.data();
    for i in 0..qd.len() {
        qd[i] = lambda_pre * qd[i] + sd[i];
    }
    Ok(())
}

/// h <- lambda_post * h + surrogate slope of the previous-step membrane.
pub fn update_h(h: &mut Tensor, psi_prev: &Tensor, lambda_post: f64) -> CoreResult<()> {
    if h.len() != psi_prev.len() {
        return Err(CoreError::LenMismatch { expected: h.len(), got: psi_prev.len() });
    }
    let hd = h.data_mut();
    let pd = psi_prev.data();
    for i in 0..hd.len() {
        hd[i] = lambda_post * hd[i] + pd[i];
    }
    Ok(())
}

/// One factored eligibility term: a vector over output neurons and a vector
/// over input neurons whose outer product is the per-synapse eligibility.
#[derive(Debug, Clone, PartialEq)]
pub struct EligibilityFactors {
    pub out_factor: Tensor,
    pub in_factor: Tensor,
}

impl EligibilityFactors {
    /// Expands the factors to the full per-synapse matrix. Test and
    /// inspection helper; the training path never calls this.
    pub fn materialize(&self) -> CoreResult<Tensor> {
        outer(&self.out_factor, &self.in_factor)
    }
}

/// Term pairing the instantaneous slope of each output neuron with the
/// decaying trace of the layer input.
pub fn eligibility_pre(psi_now: &Tensor, q: &Tensor, p: &TraceParams) -> EligibilityFactors {
    EligibilityFactors { out_factor: psi_now.map(|v| p.alpha_pre * v), in_factor: q.clone() }
}

/// Term pairing the decaying slope trace of each output neuron with the
/// instantaneous layer input. With the trace disabled the output factor is
/// identically zero.
pub fn eligibility_post(
    h: Option<&Tensor>,
    input_spikes: &Tensor,
    out_len: usize,
    p: &TraceParams,
) -> EligibilityFactors {
    let out_factor = match h {
        Some(h) => h.map(|v| p.alpha_post * v),
        None => Tensor::zeros(&[out_len]),
    };
    EligibilityFactors { out_factor, in_factor: input_spikes.clone() }
}

/// Closed form of the spike trace after feeding `spikes[0..]` as steps
/// 1..=T from a zero start: a decay-weighted sum of all inputs so far.
pub fn q_closed_form(spikes: &[Tensor], lambda_pre: f64) -> CoreResult<Tensor> {
    closed_form(spikes, lambda_pre)
}

/// Closed form of the slope trace after feeding `psis[0..]` as the slopes of
/// steps 0..T-1 from a zero start.
pub fn h_closed_form(psis: &[Tensor], lambda_post: f64) -> CoreResult<Tensor> {
    closed_form(psis, lambda_post)
}

fn closed_form(terms: &[Tensor], lambda: f64) -> CoreResult<Tensor> {
    let len = terms.first().map_or(0, Tensor::len);
    let mut acc = Tensor::zeros(&[len]);
    let last = terms.len();
    for (idx, term) in terms.iter().enumerate() {
        let power = (last - 1 - idx) as i32;
        acc.add_scaled(term, pow_int(lambda, power))?;
    }
    Ok(acc)
}

fn pow_int(base: f64, exp: i32) -> f64 {
    let mut out = 1.0;
    for _ in 0..exp {
        out *= base;
    }
    out
}
