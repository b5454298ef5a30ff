//! The training and evaluation driver behind the train and eval commands.
//! An epoch shuffles the training split, accumulates the local-rule update
//! over each batch, and feeds the averaged update to the optimizer. Metrics
//! rows come from clean inference passes after the epoch's updates, so
//! evaluating a saved checkpoint reproduces the logged numbers exactly.

use crate::checkpoint::{AdamBlock, Checkpoint};
use crate::config::{OptimizerKind, Preset, RunConfig, SchedulerKind, UpdateMode};
use crate::dataset;
use crate::error::{cfg_err, CliError, CliResult};
use crate::metrics::{MetricsLog, Row};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;
use std::time::Instant;
use tess_core::audit;
use tess_core::data::{DatasetSplits, SpikeDataset};
use tess_core::learning::{adam_step, apply_update, signed_gradient, AdamState, PlateauScheduler};
use tess_core::lsg::Target;
use tess_core::network::{LayerSpec, Network, NetworkConfig};
use tess_core::Tensor;

/// Layer stack for the named preset, with the configured bases and widths.
pub fn preset_specs(cfg: &RunConfig, class_count: usize) -> Vec<LayerSpec> {
    match cfg.model_preset {
        Preset::ToyDense => vec![
            LayerSpec::dense(cfg.model_hidden, cfg.basis_hidden),
            LayerSpec::dense(class_count, cfg.basis_head),
        ],
        Preset::ToyConv => vec![
            LayerSpec::conv(cfg.model_ch1, 3, 1, 1, cfg.basis_hidden),
            LayerSpec::avgpool(2),
            LayerSpec::conv(cfg.model_ch2, 3, 1, 1, cfg.basis_hidden),
            LayerSpec::avgpool(2),
            LayerSpec::dense(class_count, cfg.basis_head),
        ],
        Preset::Vgg9Paper => {
            let conv = |ch| LayerSpec::conv(ch, 3, 1, 1, cfg.basis_hidden);
            vec![
                conv(64),
                conv(64),
                LayerSpec::avgpool(2),
                conv(128),
                conv(128),
                LayerSpec::avgpool(2),
                conv(256),
                conv(256),
                LayerSpec::avgpool(2),
                conv(512),
                conv(512),
                LayerSpec::dense(class_count, cfg.basis_head),
            ]
        }
    }
}

/// The input shape the preset expects for the given frames. Dense stacks
/// take flattened frames; convolutional ones need channel-height-width.
pub fn preset_input_shape(cfg: &RunConfig, frame_shape: &[usize]) -> CliResult<Vec<usize>> {
    match cfg.model_preset {
        Preset::ToyDense => Ok(vec![frame_shape.iter().product()]),
        Preset::ToyConv | Preset::Vgg9Paper => {
            if frame_shape.len() != 3 {
                return Err(CliError::Config(format!(
                    "preset {} needs frames shaped channels x height x width, got {frame_shape:?}",
                    cfg.model_preset.name()
                )));
            }
            Ok(frame_shape.to_vec())
        }
    }
}

pub fn build_network(
    cfg: &RunConfig,
    frame_shape: &[usize],
    class_count: usize,
) -> CliResult<Network> {
    let input_shape = preset_input_shape(cfg, frame_shape)?;
    let specs = preset_specs(cfg, class_count);
    let net_cfg = NetworkConfig {
        lif: cfg.lif,
        trace: cfg.trace,
        task: tess_core::lsg::TaskKind::Classification,
        t_l: cfg.update_t_l,
    };
    let mut net =
        Network::build(&input_shape, class_count, &specs, net_cfg).map_err(cfg_err)?;
    net.init_weights(cfg.train_seed);
    Ok(net)
}

/// Reshapes every frame to a flat vector, for dense stacks fed spatial data.
fn flatten(ds: SpikeDataset) -> SpikeDataset {
    let len = ds.frame_len();
    let samples = ds
        .samples
        .into_iter()
        .map(|mut s| {
            s.frames = s
                .frames
                .into_iter()
                .map(|f| f.reshaped(&[len]).expect("flattening keeps the length"))
                .collect();
            s
        })
        .collect();
    SpikeDataset { samples, class_count: ds.class_count, t_steps: ds.t_steps, frame_shape: vec![len] }
}

/// Loads the configured dataset, flattened when the preset is dense.
pub fn resolve_for_preset(cfg: &RunConfig) -> CliResult<DatasetSplits> {
    let mut splits = dataset::resolve(cfg)?;
    if cfg.model_preset == Preset::ToyDense && splits.train.frame_shape.len() > 1 {
        splits = DatasetSplits {
            train: flatten(splits.train),
            val: flatten(splits.val),
            test: flatten(splits.test),
        };
    }
    Ok(splits)
}

/// Mean per-sample loss and accuracy of a clean inference pass, in dataset
/// order. Empty splits report zeros.
pub fn evaluate(net: &Network, ds: &SpikeDataset) -> CliResult<(f64, f64)> {
    if ds.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss = 0.0;
    let mut hits = 0usize;
    for s in &ds.samples {
        let (_, r) = net
            .run_infer_sample(&s.frames, Some(&Target::Class(s.label)))
            .map_err(cfg_err)?;
        loss += r.loss.expect("target was supplied");
        if r.correct.expect("class target") {
            hits += 1;
        }
    }
    let n = ds.len() as f64;
    Ok((loss / n, hits as f64 / n))
}

enum Optimizer {
    Adam { states: Vec<AdamState> },
    Sgd,
}

impl Optimizer {
    fn new(cfg: &RunConfig, net: &Network) -> Optimizer {
        match cfg.optimizer_kind {
            OptimizerKind::Adam => Optimizer::Adam {
                states: net
                    .layers
                    .iter()
                    .filter_map(|l| l.weights())
                    .map(|w| AdamState::new(w.shape()))
                    .collect(),
            },
            OptimizerKind::Sgd => Optimizer::Sgd,
        }
    }

    /// One optimizer application: `grads` holds the averaged accumulated
    /// update per trainable layer.
    fn apply(
        &mut self,
        cfg: &RunConfig,
        net: &mut Network,
        grads: &[Tensor],
        lr: f64,
    ) -> CliResult<()> {
        let mut si = 0;
        for layer in &mut net.layers {
            let Some(w) = layer.weights_mut() else { continue };
            match self {
                Optimizer::Adam { states } => {
                    let g = signed_gradient(&grads[si], cfg.update_direction);
                    let delta = adam_step(&mut states[si], &g, lr, &cfg.adam).map_err(cfg_err)?;
                    w.add_assign(&delta).map_err(cfg_err)?;
                }
                Optimizer::Sgd => {
                    apply_update(w, &grads[si], lr, cfg.update_direction).map_err(cfg_err)?;
                }
            }
            si += 1;
        }
        Ok(())
    }
}

fn first_non_finite_layer(net: &Network) -> Option<usize> {
    net.layers
        .iter()
        .filter_map(|l| l.weights())
        .position(|w| !w.all_finite())
}

struct BatchOutcome {
    grads: Vec<Tensor>,
    lsg_macs: u64,
    trace_scalars: u64,
}

/// Sums the per-sample accumulated updates over one batch, in sample order.
/// With more than one worker the batch is cut into contiguous chunks and
/// the chunk results are folded in the same fixed order, so the result does
/// not depend on the worker count.
fn batch_grads(
    net: &Network,
    train: &SpikeDataset,
    idxs: &[usize],
    threads: usize,
) -> CliResult<BatchOutcome> {
    let run_one = |idx: usize| -> CliResult<(Vec<Tensor>, u64, u64)> {
        let s = &train.samples[idx];
        let (state, _) = net
            .run_tess_sample(&s.frames, &Target::Class(s.label))
            .map_err(cfg_err)?;
        let scalars = audit::trace_scalars(&state.traces) as u64;
        Ok((state.deltas, state.counter.lsg_macs, scalars))
    };

    let per_sample: Vec<(Vec<Tensor>, u64, u64)> = if threads <= 1 || idxs.len() <= 1 {
        idxs.iter().map(|&i| run_one(i)).collect::<CliResult<_>>()?
    } else {
        let chunk_len = idxs.len().div_ceil(threads);
        let chunks: Vec<&[usize]> = idxs.chunks(chunk_len).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    scope.spawn(move || {
                        chunk.iter().map(|&i| run_one(i)).collect::<CliResult<Vec<_>>>()
                    })
                })
                .collect();
            let mut all = Vec::with_capacity(idxs.len());
            for handle in handles {
                all.extend(handle.join().expect("worker does not panic")?);
            }
            Ok::<_, CliError>(all)
        })?
    };

    let mut iter = per_sample.into_iter();
    let (mut grads, mut macs, scalars) = iter.next().expect("batches are non-empty");
    for (deltas, m, _) in iter {
        for (acc, d) in grads.iter_mut().zip(&deltas) {
            acc.add_assign(d).map_err(cfg_err)?;
        }
        macs += m;
    }
    let scale = 1.0 / idxs.len() as f64;
    for g in &mut grads {
        g.scale(scale);
    }
    Ok(BatchOutcome { grads, lsg_macs: macs, trace_scalars: scalars })
}

fn make_checkpoint(
    cfg: &RunConfig,
    net: &Network,
    opt: &Optimizer,
    lr: f64,
    sched: Option<&PlateauScheduler>,
    epochs_done: u32,
) -> Checkpoint {
    let weights: Vec<Tensor> =
        net.layers.iter().filter_map(|l| l.weights().cloned()).collect();
    let adam = match opt {
        Optimizer::Adam { states } if states.first().map_or(false, |s| s.step > 0) => {
            Some(AdamBlock {
                moments: states.iter().map(|s| (s.m.clone(), s.v.clone())).collect(),
                step: states[0].step,
                beta1_pow: states[0].beta1_pow,
                beta2_pow: states[0].beta2_pow,
            })
        }
        _ => None,
    };
    Checkpoint {
        config_text: cfg.canonical(),
        weights,
        adam,
        lr,
        sched_best: sched.and_then(|s| s.best),
        sched_stall: sched.map_or(0, |s| s.stall),
        epochs_done,
        seed: cfg.train_seed,
    }
}

fn join(dir: &str, name: &str) -> String {
    Path::new(dir).join(name).to_string_lossy().into_owned()
}

/// Runs training end to end: writes the resolved config, the metrics CSV,
/// and the final and best checkpoints into the output directory.
pub fn cmd_train(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate()?;
    let splits = resolve_for_preset(cfg)?;
    if splits.train.is_empty() {
        return Err(CliError::Data(String::from(
            "training split is empty; increase data.samples",
        )));
    }
    if cfg.update_t_l as usize >= splits.train.t_steps {
        eprintln!(
            "warning: updates start after step {} but sequences have {} steps; training will not change the weights",
            cfg.update_t_l, splits.train.t_steps
        );
    }
    let mut net = build_network(cfg, &splits.train.frame_shape, splits.train.class_count)?;
    let mut opt = Optimizer::new(cfg, &net);
    let mut sched = match cfg.scheduler_kind {
        SchedulerKind::Plateau => Some(
            PlateauScheduler::new(cfg.optimizer_lr, cfg.scheduler_patience, cfg.scheduler_factor)
                .map_err(cfg_err)?,
        ),
        SchedulerKind::Fixed => None,
    };

    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| crate::error::io_err(&cfg.out_dir, e))?;
    let config_path = join(&cfg.out_dir, "config.txt");
    std::fs::write(&config_path, cfg.canonical())
        .map_err(|e| crate::error::io_err(&config_path, e))?;

    let mut log = MetricsLog::new();
    let push_rows = |log: &mut MetricsLog,
                         epoch: u32,
                         train: (f64, f64),
                         val: (f64, f64),
                         lr: f64,
                         wall: f64,
                         macs: u64,
                         scalars: u64| {
        log.push(Row {
            epoch,
            split: "train",
            loss: train.0,
            accuracy: train.1,
            lr,
            wall_seconds: wall,
            lsg_macs: macs,
            trace_scalars: scalars,
        });
        log.push(Row {
            epoch,
            split: "val",
            loss: val.0,
            accuracy: val.1,
            lr,
            wall_seconds: 0.0,
            lsg_macs: 0,
            trace_scalars: 0,
        });
    };

    let lr0 = cfg.optimizer_lr;
    let train0 = evaluate(&net, &splits.train)?;
    let val0 = evaluate(&net, &splits.val)?;
    push_rows(&mut log, 0, train0, val0, lr0, 0.0, 0, 0);
    eprintln!("epoch 0 train {:.4} val {:.4} lr {}", train0.1, val0.1, lr0);

    let best_path = join(&cfg.out_dir, "best.ckpt");
    let final_path = join(&cfg.out_dir, "final.ckpt");
    let mut best_acc = val0.1;
    crate::checkpoint::save(&best_path, &make_checkpoint(cfg, &net, &opt, lr0, sched.as_ref(), 0))?;

    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    for epoch in 1..=cfg.train_epochs {
        let started = Instant::now();
        let lr_used = sched.as_ref().map_or(cfg.optimizer_lr, |s| s.lr);
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(cfg.train_seed ^ 0xD1CE ^ ((epoch as u64) << 17));
        order.shuffle(&mut shuffle_rng);

        let mut epoch_macs = 0u64;
        let mut scalars = 0u64;
        if cfg.update_mode == UpdateMode::PerStep {
            for (pos, &idx) in order.iter().enumerate() {
                let s = &splits.train.samples[idx];
                let mut state = net.new_state();
                let target = Target::Class(s.label);
                for (t, frame) in s.frames.iter().enumerate() {
                    net.tess_step(&mut state, frame, &target).map_err(cfg_err)?;
                    if state.steps_run > cfg.update_t_l {
                        let grads = state.deltas.clone();
                        for d in &mut state.deltas {
                            d.fill(0.0);
                        }
                        opt.apply(cfg, &mut net, &grads, lr_used)?;
                        if let Some(layer) = first_non_finite_layer(&net) {
                            return Err(CliError::Diverged(format!(
                                "epoch {epoch}, sample {pos}, step {}, trainable layer {layer}: non-finite weights",
                                t + 1
                            )));
                        }
                    }
                }
                epoch_macs += state.counter.lsg_macs;
                scalars = audit::trace_scalars(&state.traces) as u64;
            }
        } else {
            for (batch_idx, batch) in order.chunks(cfg.train_batch_size).enumerate() {
                let outcome = batch_grads(&net, &splits.train, batch, cfg.train_threads)?;
                epoch_macs += outcome.lsg_macs;
                scalars = outcome.trace_scalars;
                opt.apply(cfg, &mut net, &outcome.grads, lr_used)?;
                if let Some(layer) = first_non_finite_layer(&net) {
                    return Err(CliError::Diverged(format!(
                        "epoch {epoch}, batch {batch_idx}, trainable layer {layer}: non-finite weights"
                    )));
                }
            }
        }

        let train_m = evaluate(&net, &splits.train)?;
        let val_m = evaluate(&net, &splits.val)?;
        let wall = if cfg.log_timing { started.elapsed().as_secs_f64() } else { 0.0 };
        push_rows(&mut log, epoch, train_m, val_m, lr_used, wall, epoch_macs, scalars);
        eprintln!("epoch {epoch} train {:.4} val {:.4} lr {}", train_m.1, val_m.1, lr_used);

        if let Some(s) = sched.as_mut() {
            s.observe(val_m.1);
        }
        if val_m.1 > best_acc {
            best_acc = val_m.1;
            crate::checkpoint::save(
                &best_path,
                &make_checkpoint(cfg, &net, &opt, lr_used, sched.as_ref(), epoch),
            )?;
        }
    }

    let lr_final = sched.as_ref().map_or(cfg.optimizer_lr, |s| s.lr);
    crate::checkpoint::save(
        &final_path,
        &make_checkpoint(cfg, &net, &opt, lr_final, sched.as_ref(), cfg.train_epochs),
    )?;
    let metrics_path = join(&cfg.out_dir, "metrics.csv");
    log.save(&metrics_path)?;

    let last_train = log.rows().iter().rev().find(|r| r.split == "train").expect("rows exist");
    let last_val = log.rows().iter().rev().find(|r| r.split == "val").expect("rows exist");
    println!("wrote {config_path}");
    println!("wrote {metrics_path}");
    println!("wrote {final_path}");
    println!("wrote {best_path}");
    println!("final train accuracy {:.6}", last_train.accuracy);
    println!("final val accuracy {:.6}", last_val.accuracy);
    println!("best val accuracy {:.6}", best_acc);
    Ok(())
}

/// Rebuilds the network a checkpoint was trained with and loads its weights.
pub fn network_from_checkpoint(
    ck: &Checkpoint,
    name: &str,
    dataset_override: Option<&str>,
) -> CliResult<(RunConfig, DatasetSplits, Network)> {
    let mut cfg = RunConfig::from_canonical(name, &ck.config_text)?;
    if let Some(src) = dataset_override {
        cfg.data_source = String::from(src);
    }
    let splits = resolve_for_preset(&cfg)?;
    let mut net = build_network(&cfg, &splits.train.frame_shape, splits.train.class_count)?;
    let mut si = 0;
    for layer in &mut net.layers {
        let Some(w) = layer.weights_mut() else { continue };
        let stored = ck.weights.get(si).ok_or_else(|| {
            CliError::Data(format!("{name}: checkpoint has too few weight tensors"))
        })?;
        if stored.shape() != w.shape() {
            return Err(CliError::Data(format!(
                "{name}: weight tensor {si} has shape {:?}, the architecture needs {:?}",
                stored.shape(),
                w.shape()
            )));
        }
        *w = stored.clone();
        si += 1;
    }
    if si != ck.weights.len() {
        return Err(CliError::Data(format!(
            "{name}: checkpoint has {} weight tensors, the architecture needs {si}",
            ck.weights.len()
        )));
    }
    Ok((cfg, splits, net))
}

/// Evaluates a checkpoint on the named split (or all three) and prints one
/// CSV row per split.
pub fn cmd_eval(ck_path: &str, dataset_override: Option<&str>, split: &str) -> CliResult<()> {
    let wanted: Vec<&str> = match split {
        "all" => vec!["train", "val", "test"],
        "train" | "val" | "test" => vec![split],
        _ => {
            return Err(CliError::Config(format!(
                "--split must be train, val, test or all, got '{split}'"
            )))
        }
    };
    let ck = crate::checkpoint::load(ck_path)?;
    let (_, splits, net) = network_from_checkpoint(&ck, ck_path, dataset_override)?;
    println!("split,loss,accuracy");
    for name in wanted {
        let ds = match name {
            "train" => &splits.train,
            "val" => &splits.val,
            _ => &splits.test,
        };
        let (loss, acc) = evaluate(&net, ds)?;
        println!("{name},{loss:.6},{acc:.6}");
    }
    Ok(())
}
