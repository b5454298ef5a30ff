//! Reference implementations shared by the integration tests. Everything
//! here is written with plain scalar loops over `Vec<f64>`, so the crate's
//! own tensor and layer code never sits on both sides of a comparison.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tess_core::data::SpikeDataset;
use tess_core::Tensor;

/// Every knob of the training rule in one plain struct, defaults matching
/// the production defaults.
#[derive(Debug, Clone, Copy)]
pub struct RuleParams {
    pub gamma: f64,
    pub v_th: f64,
    pub amp: f64,
    pub lambda_pre: f64,
    pub lambda_post: f64,
    pub alpha_pre: f64,
    pub alpha_post: f64,
    pub t_l: usize,
}

impl Default for RuleParams {
    fn default() -> RuleParams {
        RuleParams {
            gamma: 0.5,
            v_th: 0.6,
            amp: 0.3,
            lambda_pre: 0.5,
            lambda_post: 0.2,
            alpha_pre: 1.0,
            alpha_post: 1.0,
            t_l: 0,
        }
    }
}

/// Triangular surrogate slope.
pub fn tri(u: f64, p: &RuleParams) -> f64 {
    p.amp * (1.0 - (u - p.v_th).abs()).max(0.0)
}

pub fn ref_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&v| v / sum).collect()
}

/// Square-wave projection rows derived from scratch: entry (c, j) is +1 when
/// floor(j * (c + 1) * 2 / n) is even.
pub fn square_wave_rows(classes: usize, n: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|c| {
            (0..n)
                .map(|j| if (j * (c + 1) * 2 / n) % 2 == 0 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

pub fn identity_rows(classes: usize) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|c| (0..classes).map(|j| if j == c { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// A dense stack for the reference runner: one weight matrix and one signal
/// projection per layer, both as nested vectors.
pub struct RefNet {
    pub weights: Vec<Vec<Vec<f64>>>,
    pub bases: Vec<Vec<Vec<f64>>>,
}

pub struct RefOut {
    pub deltas: Vec<Vec<Vec<f64>>>,
    pub prob_sum: Vec<f64>,
    pub lsg_macs: u64,
}

/// Runs one classification sample through the training rule, materializing
/// the per-synapse eligibility at every step instead of factoring it.
pub fn run_reference(net: &RefNet, frames: &[Vec<f64>], label: usize, p: &RuleParams) -> RefOut {
    let layers = net.weights.len();
    let widths: Vec<usize> = net.weights.iter().map(|w| w.len()).collect();
    let mut u: Vec<Vec<f64>> = widths.iter().map(|&n| vec![0.0; n]).collect();
    let mut o: Vec<Vec<f64>> = u.clone();
    let mut q: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w[0].len()]).collect();
    let mut h: Vec<Vec<f64>> = u.clone();
    let mut deltas: Vec<Vec<Vec<f64>>> =
        net.weights.iter().map(|w| vec![vec![0.0; w[0].len()]; w.len()]).collect();
    let classes = net.bases[0].len();
    let mut prob_sum = vec![0.0; classes];
    let mut lsg_macs = 0u64;

    for (step, frame) in frames.iter().enumerate() {
        let t = step + 1;
        let mut x = frame.clone();
        for l in 0..layers {
            let n_out = widths[l];
            for i in 0..n_out {
                h[l][i] = p.lambda_post * h[l][i] + tri(u[l][i], p);
            }
            let mut u_new = vec![0.0; n_out];
            let mut o_new = vec![0.0; n_out];
            for i in 0..n_out {
                let mut a = 0.0;
                for (j, &xj) in x.iter().enumerate() {
                    a += net.weights[l][i][j] * xj;
                }
                u_new[i] = p.gamma * (u[l][i] - p.v_th * o[l][i]) + a;
                o_new[i] = if u_new[i] > p.v_th { 1.0 } else { 0.0 };
            }
            for (j, &xj) in x.iter().enumerate() {
                q[l][j] = p.lambda_pre * q[l][j] + xj;
            }
            if t > p.t_l {
                let basis = &net.bases[l];
                let z: Vec<f64> = basis
                    .iter()
                    .map(|row| row.iter().zip(&o_new).map(|(b, s)| b * s).sum())
                    .collect();
                let mut err = ref_softmax(&z);
                err[label] -= 1.0;
                let m: Vec<f64> = (0..n_out)
                    .map(|i| basis.iter().zip(&err).map(|(row, e)| row[i] * e).sum())
                    .collect();
                lsg_macs += 2 * (classes as u64) * (n_out as u64);
                for i in 0..n_out {
                    for (j, &xj) in x.iter().enumerate() {
                        let elig = p.alpha_pre * tri(u_new[i], p) * q[l][j]
                            + p.alpha_post * h[l][i] * xj;
                        deltas[l][i][j] += m[i] * elig;
                    }
                }
            }
            u[l] = u_new;
            o[l] = o_new.clone();
            x = o_new;
        }
        let head = &net.bases[layers - 1];
        let z: Vec<f64> = head
            .iter()
            .map(|row| row.iter().zip(&o[layers - 1]).map(|(b, s)| b * s).sum())
            .collect();
        for (acc, v) in prob_sum.iter_mut().zip(ref_softmax(&z)) {
            *acc += v;
        }
    }
    RefOut { deltas, prob_sum, lsg_macs }
}

/// Textbook Adam from zero-initialized weights: returns the weight vector
/// after each step of the gradient sequence.
pub fn reference_adam(
    grads: &[Vec<f64>],
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Vec<Vec<f64>> {
    let dim = grads[0].len();
    let mut w = vec![0.0; dim];
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut out = Vec::with_capacity(grads.len());
    for (step, g) in grads.iter().enumerate() {
        let t = (step + 1) as i32;
        for i in 0..dim {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - beta1.powi(t));
            let v_hat = v[i] / (1.0 - beta2.powi(t));
            w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        out.push(w.clone());
    }
    out
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

pub fn sum_frames(frames: &[Tensor]) -> Vec<f64> {
    let mut acc = vec![0.0; frames[0].len()];
    for f in frames {
        for (a, &v) in acc.iter_mut().zip(f.data()) {
            *a += v;
        }
    }
    acc
}

/// Multinomial logistic regression on time-summed frames, full batch. Reports
/// accuracy on `eval` and serves as the separability yardstick for datasets.
pub fn readout_accuracy(
    train: &SpikeDataset,
    eval: &SpikeDataset,
    epochs: usize,
    lr: f64,
) -> f64 {
    let classes = train.class_count;
    let dim = train.frame_len() + 1;
    let feats: Vec<(Vec<f64>, usize)> = train
        .samples
        .iter()
        .map(|s| {
            let mut f = sum_frames(&s.frames);
            f.push(1.0);
            (f, s.label)
        })
        .collect();
    let mut w = vec![vec![0.0; dim]; classes];
    for _ in 0..epochs {
        let mut grad = vec![vec![0.0; dim]; classes];
        for (f, label) in &feats {
            let z: Vec<f64> =
                w.iter().map(|row| row.iter().zip(f).map(|(wi, fi)| wi * fi).sum()).collect();
            let probs = ref_softmax(&z);
            for c in 0..classes {
                let e = probs[c] - if c == *label { 1.0 } else { 0.0 };
                for (g, fi) in grad[c].iter_mut().zip(f) {
                    *g += e * fi;
                }
            }
        }
        let scale = lr / feats.len() as f64;
        for c in 0..classes {
            for (wi, g) in w[c].iter_mut().zip(&grad[c]) {
                *wi -= scale * g;
            }
        }
    }
    let mut correct = 0usize;
    for s in &eval.samples {
        let mut f = sum_frames(&s.frames);
        f.push(1.0);
        let z: Vec<f64> =
            w.iter().map(|row| row.iter().zip(&f).map(|(wi, fi)| wi * fi).sum()).collect();
        let pred = z
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if pred == s.label {
            correct += 1;
        }
    }
    correct as f64 / eval.samples.len() as f64
}

pub fn random_frames(rng: &mut ChaCha8Rng, t: usize, n: usize, density: f64) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| (0..n).map(|_| (rng.gen::<f64>() < density) as u8 as f64).collect())
        .collect()
}

pub fn to_tensor_frames(frames: &[Vec<f64>]) -> Vec<Tensor> {
    frames.iter().map(|f| Tensor::vector(f.clone()).unwrap()).collect()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Copies a production weight matrix into nested vectors.
pub fn matrix_rows(w: &Tensor) -> Vec<Vec<f64>> {
    let cols = w.shape()[1];
    w.data().chunks(cols).map(<[f64]>::to_vec).collect()
}
