//! Turns a `data.source` string into loaded dataset splits. Three forms are
//! accepted: `synth:CLASSESxNEURONSxSTEPS` for flat synthetic rasters,
//! `synthframe:CLASSESxCHANNELSxHEIGHTxWIDTHxSTEPS` for spatial ones, and
//! anything else as a path to an EVF1 file.

use crate::config::RunConfig;
use crate::error::{data_err, io_err, CliError, CliResult};
use std::fs;
use tess_core::data::{
    decode_evf, split_80_10_10, synth_frame_task, synth_pattern_task, DatasetSplits, SpikeDataset,
};

fn parse_dims(spec: &str, body: &str, want: usize) -> CliResult<Vec<usize>> {
    let dims: Vec<usize> = body
        .split('x')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            CliError::Config(format!("data source '{spec}': dimensions must be integers"))
        })?;
    if dims.len() != want {
        return Err(CliError::Config(format!(
            "data source '{spec}': expected {want} x-separated dimensions, got {}",
            dims.len()
        )));
    }
    Ok(dims)
}

/// Loads or generates the dataset named by the config and cuts it 80/10/10.
pub fn resolve(cfg: &RunConfig) -> CliResult<DatasetSplits> {
    let ds = load_whole(cfg)?;
    Ok(split_80_10_10(ds))
}

/// The dataset before splitting. Synthetic sources are pure functions of the
/// seed, the sample count, and the noise level.
pub fn load_whole(cfg: &RunConfig) -> CliResult<SpikeDataset> {
    let spec = cfg.data_source.trim();
    if let Some(body) = spec.strip_prefix("synth:") {
        let d = parse_dims(spec, body, 3)?;
        return synth_pattern_task(d[0], d[1], d[2], cfg.data_samples, cfg.data_noise, cfg.train_seed)
            .map_err(|e| CliError::Config(format!("data source '{spec}': {e}")));
    }
    if let Some(body) = spec.strip_prefix("synthframe:") {
        let d = parse_dims(spec, body, 5)?;
        return synth_frame_task(
            d[0],
            d[1],
            d[2],
            d[3],
            d[4],
            cfg.data_samples,
            cfg.data_noise,
            cfg.train_seed,
        )
        .map_err(|e| CliError::Config(format!("data source '{spec}': {e}")));
    }
    let bytes = fs::read(spec).map_err(|e| io_err(spec, e))?;
    decode_evf(&bytes).map_err(|e| data_err(spec, e))
}
