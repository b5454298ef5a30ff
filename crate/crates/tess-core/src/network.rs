//! Feedforward spiking networks of dense, convolutional, and pooling layers,
//! and the per-step training loop that drives them.
//!
//! Every trainable layer owns a fixed basis that turns its own spikes and the
//! sample's target into a local learning signal. During a step each layer
//! refreshes its slope trace, integrates and fires, refreshes its input
//! trace, and folds the signal-gated eligibility factors into its update
//! accumulator. No layer reads another layer's state or weights, so updates
//! for one layer are unchanged by anything happening downstream of it.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::audit::MacCounter;
use crate::conv::{avgpool2d, conv2d_forward, Conv2dGeom};
use crate::learning::{accumulate_conv_update, accumulate_dense_update};
use crate::lif::{lif_step, psi, LifParams, LifState};
use crate::lsg::{build_basis, class_scores, learning_signal, softmax, Basis, BasisKind, TaskKind, Target};
use crate::tensor::{matvec, Tensor};
use crate::traces::{update_h, update_q, TraceParams, TraceState};
use crate::{CoreError, CoreResult};

/// Architecture description of one layer, before shapes are resolved.
/// Dynamics and trace parameters default to the network-wide settings and
/// can be overridden per layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub shape: LayerShape,
    pub lif: Option<LifParams>,
    pub trace: Option<TraceParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerShape {
    Dense { out: usize, basis: BasisKind },
    Conv { out_ch: usize, kernel: usize, stride: usize, pad: usize, basis: BasisKind },
    AvgPool { kernel: usize },
}

impl LayerSpec {
    pub fn dense(out: usize, basis: BasisKind) -> LayerSpec {
        LayerSpec { shape: LayerShape::Dense { out, basis }, lif: None, trace: None }
    }

    pub fn conv(out_ch: usize, kernel: usize, stride: usize, pad: usize, basis: BasisKind) -> LayerSpec {
        LayerSpec { shape: LayerShape::Conv { out_ch, kernel, stride, pad, basis }, lif: None, trace: None }
    }

    pub fn avgpool(kernel: usize) -> LayerSpec {
        LayerSpec { shape: LayerShape::AvgPool { kernel }, lif: None, trace: None }
    }

    pub fn with_lif(mut self, p: LifParams) -> LayerSpec {
        self.lif = Some(p);
        self
    }

    pub fn with_trace(mut self, p: TraceParams) -> LayerSpec {
        self.trace = Some(p);
        self
    }

    pub fn is_weighted(&self) -> bool {
        !matches!(self.shape, LayerShape::AvgPool { .. })
    }
}

/// One layer with its shapes resolved against the input that reaches it.
#[derive(Debug, Clone, PartialEq)]
pub enum WalkedLayer {
    Dense { in_len: usize, out_len: usize },
    Conv { geom: Conv2dGeom },
    Pool { ch: usize, in_h: usize, in_w: usize, kernel: usize },
}

impl WalkedLayer {
    pub fn is_weighted(&self) -> bool {
        !matches!(self, WalkedLayer::Pool { .. })
    }

    pub fn in_len(&self) -> usize {
        match self {
            WalkedLayer::Dense { in_len, .. } => *in_len,
            WalkedLayer::Conv { geom } => geom.in_len(),
            WalkedLayer::Pool { ch, in_h, in_w, .. } => ch * in_h * in_w,
        }
    }

    pub fn out_len(&self) -> usize {
        match self {
            WalkedLayer::Dense { out_len, .. } => *out_len,
            WalkedLayer::Conv { geom } => geom.out_len(),
            WalkedLayer::Pool { ch, in_h, in_w, kernel } => {
                ch * (in_h / kernel) * (in_w / kernel)
            }
        }
    }

    /// Multiply-accumulates one forward pass through this layer costs.
    pub fn connections(&self) -> u64 {
        match self {
            WalkedLayer::Dense { in_len, out_len } => (*in_len as u64) * (*out_len as u64),
            WalkedLayer::Conv { geom } => geom.connections(),
            WalkedLayer::Pool { .. } => 0,
        }
    }
}

/// Resolves the shape each layer sees when the given input shape is pushed
/// through the stack. Pure bookkeeping; nothing is allocated at layer size.
pub fn walk_shapes(input_shape: &[usize], specs: &[LayerSpec]) -> CoreResult<Vec<WalkedLayer>> {
    if input_shape.is_empty() || input_shape.contains(&0) {
        return Err(CoreError::InvalidParam { context: "input shape must be non-empty and positive" });
    }
    let mut cur: Vec<usize> = input_shape.to_vec();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        match spec.shape {
            LayerShape::Dense { out: out_len, .. } => {
                if out_len == 0 {
                    return Err(CoreError::InvalidParam { context: "dense width must be positive" });
                }
                let in_len = cur.iter().product();
                out.push(WalkedLayer::Dense { in_len, out_len });
                cur = vec![out_len];
            }
            LayerShape::Conv { out_ch, kernel, stride, pad, .. } => {
                let [ch, h, w] = match cur[..] {
                    [ch, h, w] => [ch, h, w],
                    _ => {
                        return Err(CoreError::ShapeMismatch {
                            expected: vec![0, 0, 0],
                            got: cur.clone(),
                        })
                    }
                };
                let geom = Conv2dGeom::new(ch, h, w, out_ch, kernel, stride, pad)?;
                cur = vec![geom.out_ch, geom.out_h, geom.out_w];
                out.push(WalkedLayer::Conv { geom });
            }
            LayerShape::AvgPool { kernel } => {
                let [ch, h, w] = match cur[..] {
                    [ch, h, w] => [ch, h, w],
                    _ => {
                        return Err(CoreError::ShapeMismatch {
                            expected: vec![0, 0, 0],
                            got: cur.clone(),
                        })
                    }
                };
                if kernel == 0 || h % kernel != 0 || w % kernel != 0 {
                    return Err(CoreError::InvalidParam {
                        context: "pool kernel must divide both spatial dims",
                    });
                }
                out.push(WalkedLayer::Pool { ch, in_h: h, in_w: w, kernel });
                cur = vec![ch, h / kernel, w / kernel];
            }
        }
    }
    Ok(out)
}

/// A built layer: resolved geometry, weights where applicable, the fixed
/// signal basis for trainable layers, and the dynamics and trace parameters
/// this layer actually runs with (network defaults unless overridden).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    pub basis: Option<Basis>,
    pub lif: LifParams,
    pub trace: TraceParams,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Dense { w: Tensor, in_len: usize, out_len: usize },
    Conv { geom: Conv2dGeom, w: Tensor },
    Pool { ch: usize, in_h: usize, in_w: usize, kernel: usize },
}

impl Layer {
    pub fn is_weighted(&self) -> bool {
        !matches!(self.kind, LayerKind::Pool { .. })
    }

    pub fn out_len(&self) -> usize {
        match &self.kind {
            LayerKind::Dense { out_len, .. } => *out_len,
            LayerKind::Conv { geom, .. } => geom.out_len(),
            LayerKind::Pool { ch, in_h, in_w, kernel } => ch * (in_h / kernel) * (in_w / kernel),
        }
    }

    pub fn in_len(&self) -> usize {
        match &self.kind {
            LayerKind::Dense { in_len, .. } => *in_len,
            LayerKind::Conv { geom, .. } => geom.in_len(),
            LayerKind::Pool { ch, in_h, in_w, .. } => ch * in_h * in_w,
        }
    }

    pub fn weights(&self) -> Option<&Tensor> {
        match &self.kind {
            LayerKind::Dense { w, .. } | LayerKind::Conv { w, .. } => Some(w),
            LayerKind::Pool { .. } => None,
        }
    }

    pub fn weights_mut(&mut self) -> Option<&mut Tensor> {
        match &mut self.kind {
            LayerKind::Dense { w, .. } | LayerKind::Conv { w, .. } => Some(w),
            LayerKind::Pool { .. } => None,
        }
    }

    fn fan_in(&self) -> usize {
        match &self.kind {
            LayerKind::Dense { in_len, .. } => *in_len,
            LayerKind::Conv { geom, .. } => geom.in_ch * geom.kernel * geom.kernel,
            LayerKind::Pool { .. } => 0,
        }
    }
}

/// Dynamics, trace, and training-window settings shared by the whole network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkConfig {
    pub lif: LifParams,
    pub trace: TraceParams,
    pub task: TaskKind,
    /// Steps at the start of each sample during which no updates are taken.
    pub t_l: u32,
}

impl Default for NetworkConfig {
    fn default() -> NetworkConfig {
        NetworkConfig {
            lif: LifParams::default(),
            trace: TraceParams::default(),
            task: TaskKind::Classification,
            t_l: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> CoreResult<()> {
        self.lif.validate()?;
        self.trace.validate()
    }
}

/// A built network ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_shape: Vec<usize>,
    pub class_count: usize,
    pub layers: Vec<Layer>,
    pub cfg: NetworkConfig,
}

/// Everything that changes while one sample runs: neuron state, traces,
/// update accumulators, the signal MAC counter, and the readout sums.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    pub lif: Vec<LifState>,
    pub traces: Vec<TraceState>,
    pub deltas: Vec<Tensor>,
    pub counter: MacCounter,
    pub steps_run: u32,
    pub prob_sum: Tensor,
    pub loss_sum: f64,
}

/// Readout of one finished sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleResult {
    pub prediction: usize,
    pub prob_sum: Tensor,
    /// Mean per-step loss; absent when no target was supplied.
    pub loss: Option<f64>,
    /// Whether the prediction matched a class target.
    pub correct: Option<bool>,
}

impl Network {
    /// Resolves shapes, builds weights at zero, and attaches a basis to every
    /// trainable layer. The final layer must be trainable so the network has
    /// a readout.
    pub fn build(
        input_shape: &[usize],
        class_count: usize,
        specs: &[LayerSpec],
        cfg: NetworkConfig,
    ) -> CoreResult<Network> {
        cfg.validate()?;
        if class_count < 2 {
            return Err(CoreError::InvalidParam { context: "need at least two classes" });
        }
        if specs.is_empty() {
            return Err(CoreError::InvalidParam { context: "network needs at least one layer" });
        }
        if !specs.last().unwrap().is_weighted() {
            return Err(CoreError::InvalidParam { context: "last layer must be trainable" });
        }
        let walked = walk_shapes(input_shape, specs)?;
        let mut layers = Vec::with_capacity(specs.len());
        for (spec, shape) in specs.iter().zip(walked.iter()) {
            if !spec.is_weighted() && (spec.lif.is_some() || spec.trace.is_some()) {
                return Err(CoreError::InvalidParam {
                    context: "pooling layers take no dynamics or trace parameters",
                });
            }
            let lif = spec.lif.unwrap_or(cfg.lif);
            let trace = spec.trace.unwrap_or(cfg.trace);
            lif.validate()?;
            trace.validate()?;
            let (kind, basis_kind) = match (spec.shape, shape) {
                (LayerShape::Dense { basis, .. }, WalkedLayer::Dense { in_len, out_len }) => (
                    LayerKind::Dense {
                        w: Tensor::zeros(&[*out_len, *in_len]),
                        in_len: *in_len,
                        out_len: *out_len,
                    },
                    Some(basis),
                ),
                (LayerShape::Conv { basis, .. }, WalkedLayer::Conv { geom }) => (
                    LayerKind::Conv { geom: *geom, w: Tensor::zeros(&geom.weight_shape()) },
                    Some(basis),
                ),
                (LayerShape::AvgPool { .. }, WalkedLayer::Pool { ch, in_h, in_w, kernel }) => (
                    LayerKind::Pool { ch: *ch, in_h: *in_h, in_w: *in_w, kernel: *kernel },
                    None,
                ),
                _ => unreachable!("walked shapes track specs one to one"),
            };
            let basis = match basis_kind {
                Some(kind) => Some(build_basis(kind, class_count, shape.out_len())?),
                None => None,
            };
            layers.push(Layer { kind, basis, lif, trace });
        }
        Ok(Network { input_shape: input_shape.to_vec(), class_count, layers, cfg })
    }

    /// Draws every weight uniformly from +-sqrt(1 / fan_in), layer by layer
    /// in network order, from a stream seeded by `seed`.
    pub fn init_weights(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut self.layers {
            let fan_in = layer.fan_in();
            if let Some(w) = layer.weights_mut() {
                let bound = libm::sqrt(1.0 / fan_in as f64);
                for v in w.data_mut() {
                    *v = rng.gen_range(-bound..bound);
                }
            }
        }
    }

    pub fn weighted_count(&self) -> usize {
        self.layers.iter().filter(|l| l.is_weighted()).count()
    }

    pub fn head_basis(&self) -> &Basis {
        self.layers.last().and_then(|l| l.basis.as_ref()).expect("last layer is trainable")
    }

    pub fn weights_finite(&self) -> bool {
        self.layers.iter().filter_map(Layer::weights).all(Tensor::all_finite)
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Fresh per-sample state with all accumulators at zero.
    pub fn new_state(&self) -> NetState {
        let mut lif = Vec::new();
        let mut traces = Vec::new();
        let mut deltas = Vec::new();
        for layer in &self.layers {
            if !layer.is_weighted() {
                continue;
            }
            lif.push(LifState::new(layer.out_len()));
            traces.push(TraceState::new(layer.in_len(), layer.out_len(), &layer.trace));
            deltas.push(Tensor::zeros(layer.weights().unwrap().shape()));
        }
        NetState {
            lif,
            traces,
            deltas,
            counter: MacCounter::new(),
            steps_run: 0,
            prob_sum: Tensor::zeros(&[self.class_count]),
            loss_sum: 0.0,
        }
    }

    /// One training step: advance dynamics, refresh traces, and accumulate
    /// signal-gated updates for every trainable layer once the step index
    /// passes the update delay.
    pub fn tess_step(&self, state: &mut NetState, frame: &Tensor, target: &Target) -> CoreResult<()> {
        self.step_inner(state, frame, Some(target), true)
    }

    /// One inference step: dynamics and readout only, no traces, no updates,
    /// no signal MACs. A target may be supplied to accumulate loss.
    pub fn infer_step(
        &self,
        state: &mut NetState,
        frame: &Tensor,
        target: Option<&Target>,
    ) -> CoreResult<()> {
        self.step_inner(state, frame, target, false)
    }

    fn step_inner(
        &self,
        state: &mut NetState,
        frame: &Tensor,
        target: Option<&Target>,
        learn: bool,
    ) -> CoreResult<()> {
        if frame.len() != self.input_len() {
            return Err(CoreError::LenMismatch { expected: self.input_len(), got: frame.len() });
        }
        let step = state.steps_run + 1;
        let in_window = learn && step > self.cfg.t_l;
        let mut x = frame.clone();
        let mut si = 0;
        for layer in &self.layers {
            let trace_p = &layer.trace;
            match &layer.kind {
                LayerKind::Pool { ch, in_h, in_w, kernel } => {
                    x = avgpool2d(&x, *ch, *in_h, *in_w, *kernel)?;
                    continue;
                }
                LayerKind::Dense { w, .. } | LayerKind::Conv { w, .. } => {
                    if learn {
                        if let Some(h) = state.traces[si].h.as_mut() {
                            let psi_prev = psi(&state.lif[si].u, &layer.lif);
                            update_h(h, &psi_prev, trace_p.lambda_post)?;
                        }
                    }
                    let current = match &layer.kind {
                        LayerKind::Dense { .. } => matvec(w, &x)?,
                        LayerKind::Conv { geom, .. } => conv2d_forward(geom, w, &x)?,
                        LayerKind::Pool { .. } => unreachable!(),
                    };
                    lif_step(&mut state.lif[si], &current, &layer.lif)?;
                    if learn {
                        update_q(&mut state.traces[si].q, &x, trace_p.lambda_pre)?;
                    }
                    if in_window {
                        let target = target.ok_or(CoreError::InvalidParam {
                            context: "training step needs a target",
                        })?;
                        let basis = layer.basis.as_ref().expect("trainable layer has a basis");
                        let m = learning_signal(
                            basis,
                            &state.lif[si].o,
                            target,
                            self.cfg.task,
                            &mut state.counter,
                        )?;
                        let psi_now = psi(&state.lif[si].u, &layer.lif);
                        match &layer.kind {
                            LayerKind::Dense { .. } => accumulate_dense_update(
                                &mut state.deltas[si],
                                &m,
                                &psi_now,
                                &state.traces[si].q,
                                state.traces[si].h.as_ref(),
                                &x,
                                trace_p,
                            )?,
                            LayerKind::Conv { geom, .. } => accumulate_conv_update(
                                &mut state.deltas[si],
                                geom,
                                &m,
                                &psi_now,
                                &state.traces[si].q,
                                state.traces[si].h.as_ref(),
                                &x,
                                trace_p,
                            )?,
                            LayerKind::Pool { .. } => unreachable!(),
                        }
                    }
                    x = state.lif[si].o.clone();
                    si += 1;
                }
            }
        }
        let scores = class_scores(self.head_basis(), &x)?;
        let probs = softmax(&scores);
        state.prob_sum.add_assign(&probs)?;
        if let Some(target) = target {
            state.loss_sum += match (self.cfg.task, target) {
                (TaskKind::Classification, Target::Class(label)) => {
                    if *label >= self.class_count {
                        return Err(CoreError::InvalidParam { context: "target class out of range" });
                    }
                    -libm::log(probs.data()[*label].max(1e-300))
                }
                (TaskKind::Regression, Target::Values(want)) => {
                    if want.len() != self.class_count {
                        return Err(CoreError::LenMismatch {
                            expected: self.class_count,
                            got: want.len(),
                        });
                    }
                    let mut acc = 0.0;
                    for (z, y) in scores.data().iter().zip(want.data()) {
                        acc += 0.5 * (z - y) * (z - y);
                    }
                    acc
                }
                _ => return Err(CoreError::InvalidParam { context: "target kind does not match task" }),
            };
        }
        state.steps_run = step;
        Ok(())
    }

    fn finish(&self, state: &NetState, target: Option<&Target>) -> SampleResult {
        let prediction = state.prob_sum.argmax();
        let loss = target.map(|_| state.loss_sum / state.steps_run.max(1) as f64);
        let correct = match target {
            Some(Target::Class(label)) => Some(prediction == *label),
            _ => None,
        };
        SampleResult { prediction, prob_sum: state.prob_sum.clone(), loss, correct }
    }

    /// Runs one sample through training, returning the finished state (with
    /// accumulated updates) and the readout.
    pub fn run_tess_sample(
        &self,
        frames: &[Tensor],
        target: &Target,
    ) -> CoreResult<(NetState, SampleResult)> {
        if frames.is_empty() {
            return Err(CoreError::InvalidParam { context: "sample needs at least one frame" });
        }
        let mut state = self.new_state();
        for frame in frames {
            self.tess_step(&mut state, frame, target)?;
        }
        let result = self.finish(&state, Some(target));
        Ok((state, result))
    }

    /// Runs one sample through inference only.
    pub fn run_infer_sample(
        &self,
        frames: &[Tensor],
        target: Option<&Target>,
    ) -> CoreResult<(NetState, SampleResult)> {
        if frames.is_empty() {
            return Err(CoreError::InvalidParam { context: "sample needs at least one frame" });
        }
        let mut state = self.new_state();
        for frame in frames {
            self.infer_step(&mut state, frame, target)?;
        }
        let result = self.finish(&state, target);
        Ok((state, result))
    }
}

/// Euclidean norm of each layer's accumulated update, in layer order.
pub fn update_norms(state: &NetState) -> Vec<f64> {
    state
        .deltas
        .iter()
        .map(|d| libm::sqrt(d.data().iter().map(|v| v * v).sum()))
        .collect()
}

/// Two dense layers: a square-wave hidden layer and an identity-basis head.
pub fn toy_dense_specs(hidden: usize, class_count: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::dense(hidden, BasisKind::SquareWave),
        LayerSpec::dense(class_count, BasisKind::Identity),
    ]
}

/// Two convolution blocks with pooling, then an identity-basis head.
pub fn toy_conv_specs(ch1: usize, ch2: usize, class_count: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::conv(ch1, 3, 1, 1, BasisKind::SquareWave),
        LayerSpec::avgpool(2),
        LayerSpec::conv(ch2, 3, 1, 1, BasisKind::SquareWave),
        LayerSpec::avgpool(2),
        LayerSpec::dense(class_count, BasisKind::Identity),
    ]
}
