//! The dump command: debug views of basis rows, checkpoint headers, and the
//! trace tape of one training sample.

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::{cfg_err, CliError, CliResult};
use crate::trainer::{build_network, resolve_for_preset};
use tess_core::lsg::{build_basis, BasisKind, Target};

/// Prints the sign pattern of every square-wave row for `C=...,n=...`.
pub fn cmd_dump_basis(spec: &str) -> CliResult<()> {
    let mut classes: Option<usize> = None;
    let mut width: Option<usize> = None;
    for part in spec.split(',') {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--basis '{spec}': expected C=<classes>,n=<width>"))
        })?;
        let value: usize = value.trim().parse().map_err(|_| {
            CliError::Config(format!("--basis '{spec}': '{}' is not a count", value.trim()))
        })?;
        match key.trim() {
            "C" => classes = Some(value),
            "n" => width = Some(value),
            other => {
                return Err(CliError::Config(format!(
                    "--basis '{spec}': unknown field '{other}'"
                )))
            }
        }
    }
    let (Some(classes), Some(width)) = (classes, width) else {
        return Err(CliError::Config(format!(
            "--basis '{spec}': expected C=<classes>,n=<width>"
        )));
    };
    let basis = build_basis(BasisKind::SquareWave, classes, width).map_err(cfg_err)?;
    for c in 0..classes {
        println!("row {c}: {}", basis.row_string(c));
    }
    Ok(())
}

/// Prints the header fields of a checkpoint.
pub fn cmd_dump_checkpoint(path: &str) -> CliResult<()> {
    let ck = checkpoint::load(path)?;
    println!("checkpoint {path}");
    println!("  weight tensors {}", ck.weights.len());
    for (i, w) in ck.weights.iter().enumerate() {
        let dims: Vec<String> = w.shape().iter().map(|d| d.to_string()).collect();
        println!("    tensor {i} shape {}", dims.join("x"));
    }
    match &ck.adam {
        Some(block) => println!("  optimizer adam, step {}", block.step),
        None => println!("  optimizer none"),
    }
    println!("  learning rate {}", ck.lr);
    match ck.sched_best {
        Some(best) => println!("  best val accuracy {best:.6}, stall {}", ck.sched_stall),
        None => println!("  best val accuracy none"),
    }
    println!("  epochs {}", ck.epochs_done);
    println!("  seed {}", ck.seed);
    println!("  config:");
    for line in ck.config_text.lines() {
        println!("    {line}");
    }
    Ok(())
}

/// Runs the first training sample of the configured dataset and prints every
/// trace value after every step, one CSV row per scalar.
pub fn cmd_dump_traces(cfg: &RunConfig) -> CliResult<()> {
    let splits = resolve_for_preset(cfg)?;
    if splits.train.is_empty() {
        return Err(CliError::Data(String::from("training split is empty")));
    }
    let net = build_network(cfg, &splits.train.frame_shape, splits.train.class_count)?;
    let sample = &splits.train.samples[0];
    let target = Target::Class(sample.label);
    let mut state = net.new_state();
    println!("t,layer,tensor,index,value");
    for frame in &sample.frames {
        net.tess_step(&mut state, frame, &target).map_err(cfg_err)?;
        for (si, trace) in state.traces.iter().enumerate() {
            for (i, v) in trace.q.data().iter().enumerate() {
                println!("{},{si},q,{i},{v:.6}", state.steps_run);
            }
            if let Some(h) = &trace.h {
                for (i, v) in h.data().iter().enumerate() {
                    println!("{},{si},h,{i},{v:.6}", state.steps_run);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_specs_parse_strictly() {
        cmd_dump_basis("C=2,n=8").unwrap();
        cmd_dump_basis("n=8,C=2").unwrap();
        for bad in ["C=2", "n=8", "C=2,n=8,k=1", "C=two,n=8", "2x8"] {
            assert!(cmd_dump_basis(bad).is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn identity_width_on_basis_dump_still_uses_square_waves() {
        let basis = build_basis(BasisKind::SquareWave, 2, 8).unwrap();
        assert_eq!(basis.row_string(0), "++++----");
        assert_eq!(basis.row_string(1), "++--++--");
    }
}
