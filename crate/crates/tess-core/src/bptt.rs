//! Reference gradients by full backpropagation through time, for checking
//! the local rule and the cost model against ground truth at desk scale.
//!
//! The oracle is deliberately boxed in: dense layers only, at most 64
//! neurons in total, at most 10 steps. It stores every membrane and output
//! for every step, which is exactly the storage the local rule exists to
//! avoid, so the caps keep it an oracle rather than a trainer.
//!
//! Two modes share one backward pass. Spiking mode runs the real threshold
//! dynamics forward and substitutes the triangular slope for the threshold
//! derivative going backward. Smoothed mode replaces the threshold with the
//! slope's antiderivative, a piecewise quadratic ramp, making the whole
//! network differentiable so the backward pass is exact and can be validated
//! against finite differences.

use alloc::vec;
use alloc::vec::Vec;

use crate::lif::{psi_scalar, LifParams};
use crate::lsg::{class_scores, softmax};
use crate::network::{LayerKind, Network};
use crate::tensor::{accumulate_outer, matvec, matvec_transpose, zip_map, Tensor};
use crate::{CoreError, CoreResult};

const MAX_NEURONS: usize = 64;
const MAX_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Threshold dynamics forward, surrogate slope backward.
    Spiking,
    /// Differentiable ramp in place of the threshold, exact backward.
    Smoothed,
}

/// Gradients and loss from one backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BpttResult {
    /// One weight-shaped gradient per layer, in network order.
    pub grads: Vec<Tensor>,
    pub loss: f64,
    /// Class scores summed over all steps.
    pub logits: Tensor,
}

/// Ramp that the smoothed mode fires through: zero well below threshold, the
/// full slope amplitude well above, with the triangular slope as its exact
/// derivative in between.
pub fn smoothed_spike(u: f64, p: &LifParams) -> f64 {
    let s = u - p.v_th;
    let amp = p.psi_amplitude;
    if s <= -1.0 {
        0.0
    } else if s <= 0.0 {
        amp * (1.0 + s) * (1.0 + s) * 0.5
    } else if s <= 1.0 {
        amp * (1.0 - (1.0 - s) * (1.0 - s) * 0.5)
    } else {
        amp
    }
}

struct DenseStack<'a> {
    weights: Vec<&'a Tensor>,
    in_lens: Vec<usize>,
    out_lens: Vec<usize>,
    lifs: Vec<LifParams>,
}

fn dense_stack<'a>(net: &'a Network, steps: usize) -> CoreResult<DenseStack<'a>> {
    let mut stack = DenseStack {
        weights: Vec::new(),
        in_lens: Vec::new(),
        out_lens: Vec::new(),
        lifs: Vec::new(),
    };
    for layer in &net.layers {
        match &layer.kind {
            LayerKind::Dense { w, in_len, out_len } => {
                stack.weights.push(w);
                stack.in_lens.push(*in_len);
                stack.out_lens.push(*out_len);
                stack.lifs.push(layer.lif);
            }
            _ => {
                return Err(CoreError::InvalidParam {
                    context: "reference gradients support dense stacks only",
                })
            }
        }
    }
    let neurons: usize = stack.out_lens.iter().sum();
    if neurons > MAX_NEURONS || steps > MAX_STEPS {
        return Err(CoreError::OracleLimit { neurons, steps });
    }
    Ok(stack)
}

struct ForwardTrace {
    /// us[l][t] and os[l][t], step-indexed from 0.
    us: Vec<Vec<Tensor>>,
    os: Vec<Vec<Tensor>>,
    logits: Tensor,
    probs: Tensor,
    loss: f64,
}

fn forward(
    net: &Network,
    frames: &[Tensor],
    label: usize,
    mode: OracleMode,
) -> CoreResult<ForwardTrace> {
    let stack = dense_stack(net, frames.len())?;
    if frames.is_empty() {
        return Err(CoreError::InvalidParam { context: "sample needs at least one frame" });
    }
    if label >= net.class_count {
        return Err(CoreError::InvalidParam { context: "target class out of range" });
    }
    let layer_count = stack.weights.len();
    let mut us: Vec<Vec<Tensor>> = vec![Vec::new(); layer_count];
    let mut os: Vec<Vec<Tensor>> = vec![Vec::new(); layer_count];
    let mut u_prev: Vec<Tensor> = stack.out_lens.iter().map(|&n| Tensor::zeros(&[n])).collect();
    let mut o_prev: Vec<Tensor> = u_prev.clone();
    for frame in frames {
        let mut x = frame.clone();
        for l in 0..layer_count {
            if x.len() != stack.in_lens[l] {
                return Err(CoreError::LenMismatch { expected: stack.in_lens[l], got: x.len() });
            }
            let p = &stack.lifs[l];
            let a = matvec(stack.weights[l], &x)?;
            let u = zip_map(
                &zip_map(&u_prev[l], &o_prev[l], |u, o| p.gamma * (u - p.v_th * o))?,
                &a,
                |decayed, cur| decayed + cur,
            )?;
            let o = match mode {
                OracleMode::Spiking => u.map(|v| if v > p.v_th { 1.0 } else { 0.0 }),
                OracleMode::Smoothed => u.map(|v| smoothed_spike(v, p)),
            };
            u_prev[l] = u.clone();
            o_prev[l] = o.clone();
            us[l].push(u);
            os[l].push(o.clone());
            x = o;
        }
    }
    let head = net.head_basis();
    let mut logits = Tensor::zeros(&[net.class_count]);
    for o in &os[layer_count - 1] {
        logits.add_assign(&class_scores(head, o)?)?;
    }
    let probs = softmax(&logits);
    let loss = -libm::log(probs.data()[label].max(1e-300));
    Ok(ForwardTrace { us, os, logits, probs, loss })
}

/// Loss of one sample under the oracle dynamics, for finite differencing.
pub fn bptt_loss(
    net: &Network,
    frames: &[Tensor],
    label: usize,
    mode: OracleMode,
) -> CoreResult<f64> {
    Ok(forward(net, frames, label, mode)?.loss)
}

/// Full-unroll gradients of the time-summed-score cross entropy with respect
/// to every weight.
pub fn bptt_oracle(
    net: &Network,
    frames: &[Tensor],
    label: usize,
    mode: OracleMode,
) -> CoreResult<BpttResult> {
    let trace = forward(net, frames, label, mode)?;
    let stack = dense_stack(net, frames.len())?;
    let layer_count = stack.weights.len();
    let steps = frames.len();

    let mut g_logits = trace.probs.clone();
    g_logits.data_mut()[label] -= 1.0;
    let head_g_o = matvec_transpose(net.head_basis().rows(), &g_logits)?;

    let mut grads: Vec<Tensor> = stack
        .weights
        .iter()
        .map(|w| Tensor::zeros(w.shape()))
        .collect();
    let mut du_next: Vec<Tensor> = Vec::new();
    for l in (0..layer_count).rev() {
        let p = &stack.lifs[l];
        let mut du_layer: Vec<Tensor> = vec![Tensor::zeros(&[stack.out_lens[l]]); steps];
        let mut carry = Tensor::zeros(&[stack.out_lens[l]]);
        for t in (0..steps).rev() {
            let g_o = if l == layer_count - 1 {
                head_g_o.clone()
            } else {
                matvec_transpose(stack.weights[l + 1], &du_next[t])?
            };
            let psi_u = trace.us[l][t].map(|v| psi_scalar(v, p));
            let direct = zip_map(&g_o, &psi_u, |g, s| g * s)?;
            let through = zip_map(&carry, &psi_u, |c, s| c * p.gamma * (1.0 - p.v_th * s))?;
            let mut du = direct;
            du.add_assign(&through)?;
            carry = du.clone();
            du_layer[t] = du;
        }
        for t in 0..steps {
            let input = if l == 0 { &frames[t] } else { &trace.os[l - 1][t] };
            accumulate_outer(&mut grads[l], &du_layer[t], input)?;
        }
        du_next = du_layer;
    }
    Ok(BpttResult { grads, loss: trace.loss, logits: trace.logits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lsg::BasisKind;
    use crate::network::{toy_dense_specs, LayerSpec, Network, NetworkConfig};

    fn tiny_net(seed: u64) -> Network {
        let specs = toy_dense_specs(3, 2);
        let mut net = Network::build(&[2], 2, &specs, NetworkConfig::default()).unwrap();
        net.init_weights(seed);
        net
    }

    fn frames(t: usize) -> Vec<Tensor> {
        (0..t)
            .map(|i| Tensor::vector(vec![(i % 2 == 0) as u8 as f64, 1.0]).unwrap())
            .collect()
    }

    #[test]
    fn ramp_is_continuous_and_has_the_slope_as_derivative() {
        let p = LifParams::default();
        assert_eq!(smoothed_spike(p.v_th - 1.0, &p), 0.0);
        assert_eq!(smoothed_spike(p.v_th + 1.0, &p), p.psi_amplitude);
        assert!((smoothed_spike(p.v_th, &p) - p.psi_amplitude / 2.0).abs() < 1e-12);
        let h = 1e-6;
        for u in [-0.8, -0.39, 0.0, 0.3, 0.6, 0.61, 1.1, 1.59, 2.2] {
            let fd = (smoothed_spike(u + h, &p) - smoothed_spike(u - h, &p)) / (2.0 * h);
            assert!(
                (fd - psi_scalar(u, &p)).abs() < 1e-6,
                "derivative mismatch at u = {u}: fd {fd}"
            );
        }
    }

    #[test]
    fn oracle_rejects_conv_layers_and_oversized_runs() {
        let conv_specs = [
            LayerSpec::conv(1, 1, 1, 0, BasisKind::SquareWave),
            LayerSpec::dense(2, BasisKind::Identity),
        ];
        let net = Network::build(&[1, 2, 2], 2, &conv_specs, NetworkConfig::default()).unwrap();
        let f = vec![Tensor::zeros(&[1, 2, 2])];
        assert!(bptt_oracle(&net, &f, 0, OracleMode::Spiking).is_err());

        let wide = toy_dense_specs(100, 2);
        let net = Network::build(&[2], 2, &wide, NetworkConfig::default()).unwrap();
        assert!(matches!(
            bptt_oracle(&net, &frames(2), 0, OracleMode::Spiking),
            Err(CoreError::OracleLimit { neurons: 102, steps: 2 })
        ));

        let net = tiny_net(1);
        assert!(matches!(
            bptt_oracle(&net, &frames(11), 0, OracleMode::Spiking),
            Err(CoreError::OracleLimit { neurons: 5, steps: 11 })
        ));
    }

    #[test]
    fn single_step_head_gradient_known_values() {
        let specs = [LayerSpec::dense(2, BasisKind::Identity)];
        let mut net = Network::build(&[1], 2, &specs, NetworkConfig::default()).unwrap();
        *net.layers[0].weights_mut().unwrap() =
            Tensor::from_vec(&[2, 1], vec![0.8, 0.1]).unwrap();
        let f = vec![Tensor::vector(vec![1.0]).unwrap()];
        let res = bptt_oracle(&net, &f, 0, OracleMode::Spiking).unwrap();
        let e1 = core::f64::consts::E + 1.0;
        assert!((res.grads[0].data()[0] - (-0.24 / e1)).abs() < 1e-15);
        assert!((res.grads[0].data()[1] - (0.15 / e1)).abs() < 1e-15);
        assert!((res.loss - (1.0 + 1.0 / core::f64::consts::E).ln()).abs() < 1e-12);
        assert_eq!(res.logits.data(), &[1.0, 0.0]);
    }

    #[test]
    fn smoothed_gradients_match_finite_differences() {
        let net = tiny_net(17);
        let fs = frames(3);
        let res = bptt_oracle(&net, &fs, 1, OracleMode::Smoothed).unwrap();
        let h = 1e-5;
        for l in 0..2 {
            let len = net.layers[l].weights().unwrap().len();
            for i in (0..len).step_by(2) {
                let mut plus = net.clone();
                plus.layers[l].weights_mut().unwrap().data_mut()[i] += h;
                let mut minus = net.clone();
                minus.layers[l].weights_mut().unwrap().data_mut()[i] -= h;
                let fd = (bptt_loss(&plus, &fs, 1, OracleMode::Smoothed).unwrap()
                    - bptt_loss(&minus, &fs, 1, OracleMode::Smoothed).unwrap())
                    / (2.0 * h);
                let an = res.grads[l].data()[i];
                let denom = an.abs().max(fd.abs()).max(1e-6);
                assert!(
                    ((an - fd) / denom).abs() < 1e-4,
                    "layer {l} weight {i}: analytic {an} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn gradients_flow_through_time() {
        let net = tiny_net(4);
        let fs = frames(6);
        let one = bptt_oracle(&net, &fs[..1], 0, OracleMode::Smoothed).unwrap();
        let six = bptt_oracle(&net, &fs, 0, OracleMode::Smoothed).unwrap();
        assert_ne!(one.grads[0], six.grads[0]);
        assert!(six.grads.iter().all(Tensor::all_finite));
    }
}
