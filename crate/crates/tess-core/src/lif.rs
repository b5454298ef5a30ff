//! Leaky integrate-and-fire neurons with subtractive reset and a triangular
//! surrogate slope used wherever the learning rule needs a derivative of the
//! spike threshold.
//!
//! Per step the membrane decays, loses one threshold's worth of charge for
//! each neuron that fired on the previous step, and integrates the incoming
//! current. A neuron fires when its membrane strictly exceeds the threshold.

use crate::tensor::Tensor;
use crate::{CoreError, CoreResult};

/// Neuron parameters shared by a whole layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifParams {
    /// Membrane leak per step, in [0, 1].
    pub gamma: f64,
    /// Firing threshold, also the amount subtracted on reset.
    pub v_th: f64,
    /// Peak of the triangular surrogate slope at the threshold.
    pub psi_amplitude: f64,
}

impl Default for LifParams {
    fn default() -> LifParams {
        LifParams { gamma: 0.5, v_th: 0.6, psi_amplitude: 0.3 }
    }
}

impl LifParams {
    pub fn validate(&self) -> CoreResult<()> {
        if !(self.gamma.is_finite() && (0.0..=1.0).contains(&self.gamma)) {
            return Err(CoreError::InvalidParam { context: "gamma must be in [0, 1]" });
        }
        if !(self.v_th.is_finite() && self.v_th > 0.0) {
            return Err(CoreError::InvalidParam { context: "v_th must be positive" });
        }
        if !(self.psi_amplitude.is_finite() && self.psi_amplitude > 0.0) {
            return Err(CoreError::InvalidParam { context: "psi_amplitude must be positive" });
        }
        Ok(())
    }
}

/// Membrane potentials and the current spike outputs of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LifState {
    pub u: Tensor,
    pub o: Tensor,
}

impl LifState {
    pub fn new(len: usize) -> LifState {
        LifState { u: Tensor::zeros(&[len]), o: Tensor::zeros(&[len]) }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Advances one layer by one step given its integrated input current.
pub fn lif_step(state: &mut LifState, input: &Tensor, p: &LifParams) -> CoreResult<()> {
    if input.len() != state.u.len() {
        return Err(CoreError::LenMismatch { expected: state.u.len(), got: input.len() });
    }
    let ud = state.u.data_mut();
    let od = state.o.data_mut();
    let id = input.data();
    for i in 0..ud.len() {
        let u_next = p.gamma * (ud[i] - p.v_th * od[i]) + id[i];
        ud[i] = u_next;
        od[i] = if u_next > p.v_th { 1.0 } else { 0.0 };
    }
    Ok(())
}

/// Triangular surrogate slope, peaking at the threshold and reaching zero one
/// unit of potential away from it.
pub fn psi_scalar(u: f64, p: &LifParams) -> f64 {
    let dist = 1.0 - (u - p.v_th).abs();
    p.psi_amplitude * dist.max(0.0)
}

/// Elementwise surrogate slope of a membrane tensor.
pub fn psi(u: &Tensor, p: &LifParams) -> Tensor {
    u.map(|v| psi_scalar(v, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_validate() {
        LifParams::default().validate().unwrap();
    }

    #[test]
    fn validate_rejects_bad_values() {
        assert!(LifParams { gamma: 1.5, ..Default::default() }.validate().is_err());
        assert!(LifParams { v_th: 0.0, ..Default::default() }.validate().is_err());
        assert!(LifParams { psi_amplitude: -0.3, ..Default::default() }.validate().is_err());
        assert!(LifParams { gamma: f64::NAN, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn step_integrates_and_leaks() {
        let p = LifParams::default();
        let mut s = LifState::new(1);
        s.u.data_mut()[0] = 0.4;
        let input = Tensor::vector(vec![0.3]).unwrap();
        lif_step(&mut s, &input, &p).unwrap();
        assert_eq!(s.u.data()[0], 0.5);
        assert_eq!(s.o.data()[0], 0.0);
    }

    #[test]
    fn step_resets_by_threshold_subtraction() {
        let p = LifParams::default();
        let mut s = LifState::new(1);
        s.u.data_mut()[0] = 1.0;
        s.o.data_mut()[0] = 1.0;
        let input = Tensor::vector(vec![0.8]).unwrap();
        lif_step(&mut s, &input, &p).unwrap();
        assert!((s.u.data()[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.o.data()[0], 1.0);
    }

    #[test]
    fn membrane_exactly_at_threshold_stays_silent() {
        let p = LifParams::default();
        let mut s = LifState::new(1);
        let input = Tensor::vector(vec![0.6]).unwrap();
        lif_step(&mut s, &input, &p).unwrap();
        assert_eq!(s.u.data()[0], 0.6);
        assert_eq!(s.o.data()[0], 0.0);
    }

    #[test]
    fn step_rejects_length_mismatch() {
        let p = LifParams::default();
        let mut s = LifState::new(2);
        let input = Tensor::vector(vec![0.1]).unwrap();
        assert!(lif_step(&mut s, &input, &p).is_err());
    }

    #[test]
    fn surrogate_slope_triangle() {
        let p = LifParams::default();
        assert!((psi_scalar(0.1, &p) - 0.15).abs() < 1e-12);
        assert!((psi_scalar(0.6, &p) - 0.3).abs() < 1e-12);
        assert_eq!(psi_scalar(1.6, &p), 0.0);
        assert_eq!(psi_scalar(-0.4, &p), 0.0);
        assert_eq!(psi_scalar(5.0, &p), 0.0);
    }

    #[test]
    fn surrogate_slope_is_symmetric_around_threshold() {
        let p = LifParams::default();
        for d in [0.0, 0.25, 0.5, 0.99, 1.0, 2.0] {
            let lo = psi_scalar(p.v_th - d, &p);
            let hi = psi_scalar(p.v_th + d, &p);
            assert!((lo - hi).abs() < 1e-12, "asymmetry at distance {d}");
        }
    }
}
