//! Spike datasets: synthetic pattern generators for desk-scale experiments,
//! constant-current encoding of static images, and the EVF1 byte container
//! for event-frame data.
//!
//! Inputs are real values in [0, 1]. Binary spikes are the common case, but
//! the first layer accepts fractional drive, so normalized images repeated
//! over time and 8-bit event counts scaled down both feed the same path.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;
use crate::{CoreError, CoreResult};

/// One labeled spike sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub frames: Vec<Tensor>,
    pub label: usize,
}

/// A set of equally long spike sequences with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeDataset {
    pub samples: Vec<Sample>,
    pub class_count: usize,
    pub t_steps: usize,
    pub frame_shape: Vec<usize>,
}

impl SpikeDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn frame_len(&self) -> usize {
        self.frame_shape.iter().product()
    }

    /// Checks the container invariants: uniform sequence length, all values
    /// in [0, 1], all labels in range.
    pub fn validate(&self) -> CoreResult<()> {
        if self.class_count < 2 {
            return Err(CoreError::InvalidParam { context: "need at least two classes" });
        }
        if self.t_steps == 0 {
            return Err(CoreError::InvalidParam { context: "sequences need at least one step" });
        }
        let frame_len = self.frame_len();
        for sample in &self.samples {
            if sample.label >= self.class_count {
                return Err(CoreError::InvalidParam { context: "label out of range" });
            }
            if sample.frames.len() != self.t_steps {
                return Err(CoreError::LenMismatch {
                    expected: self.t_steps,
                    got: sample.frames.len(),
                });
            }
            for frame in &sample.frames {
                if frame.len() != frame_len {
                    return Err(CoreError::LenMismatch { expected: frame_len, got: frame.len() });
                }
                if !frame.data().iter().all(|&v| (0.0..=1.0).contains(&v)) {
                    return Err(CoreError::InvalidParam { context: "frame values must be in [0, 1]" });
                }
            }
        }
        Ok(())
    }
}

/// Train, validation, and test portions of one generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplits {
    pub train: SpikeDataset,
    pub val: SpikeDataset,
    pub test: SpikeDataset,
}

/// Cuts a dataset into 80/10/10 train/validation/test portions by position.
/// Generators emit labels round-robin, so positional cuts stay balanced.
pub fn split_80_10_10(ds: SpikeDataset) -> DatasetSplits {
    let n = ds.samples.len();
    let train_n = n * 8 / 10;
    let val_n = n / 10;
    let mut samples = ds.samples;
    let rest = samples.split_off(train_n);
    let mut val_samples = rest;
    let test_samples = val_samples.split_off(val_n.min(val_samples.len()));
    let part = |samples| SpikeDataset {
        samples,
        class_count: ds.class_count,
        t_steps: ds.t_steps,
        frame_shape: ds.frame_shape.clone(),
    };
    DatasetSplits { train: part(samples), val: part(val_samples), test: part(test_samples) }
}

/// Repeats a normalized image at every step, presenting it as a constant
/// input current.
pub fn encode_static(image: &Tensor, t_steps: usize) -> CoreResult<Vec<Tensor>> {
    if t_steps == 0 {
        return Err(CoreError::InvalidParam { context: "encoding needs at least one step" });
    }
    if !image.data().iter().all(|&v| (0.0..=1.0).contains(&v)) {
        return Err(CoreError::InvalidParam { context: "image values must be in [0, 1]" });
    }
    Ok(vec![image.clone(); t_steps])
}

fn synth_raster_task(
    class_count: usize,
    frame_shape: &[usize],
    t_steps: usize,
    sample_count: usize,
    noise: f64,
    seed: u64,
) -> CoreResult<SpikeDataset> {
    let frame_len: usize = frame_shape.iter().product();
    if class_count < 2 {
        return Err(CoreError::InvalidParam { context: "need at least two classes" });
    }
    if frame_len < class_count {
        return Err(CoreError::InvalidParam { context: "need at least one neuron per class" });
    }
    if t_steps == 0 {
        return Err(CoreError::InvalidParam { context: "sequences need at least one step" });
    }
    if !(noise.is_finite() && (0.0..=1.0).contains(&noise)) {
        return Err(CoreError::InvalidParam { context: "noise must be a probability" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut prototypes: Vec<Vec<Tensor>> = Vec::with_capacity(class_count);
    for _ in 0..class_count {
        let mut frames = Vec::with_capacity(t_steps);
        for _ in 0..t_steps {
            let mut frame = Tensor::zeros(frame_shape);
            for v in frame.data_mut() {
                *v = rng.gen_bool(0.5) as u8 as f64;
            }
            frames.push(frame);
        }
        prototypes.push(frames);
    }
    let mut samples = Vec::with_capacity(sample_count);
    for s in 0..sample_count {
        let label = s % class_count;
        let mut frames = prototypes[label].clone();
        if noise > 0.0 {
            for frame in &mut frames {
                for v in frame.data_mut() {
                    if rng.gen_bool(noise) {
                        *v = 1.0 - *v;
                    }
                }
            }
        }
        samples.push(Sample { frames, label });
    }
    let ds = SpikeDataset {
        samples,
        class_count,
        t_steps,
        frame_shape: frame_shape.to_vec(),
    };
    ds.validate()?;
    Ok(ds)
}

/// Synthetic classification task over flat spike vectors: each class gets a
/// random binary prototype raster, and samples are noisy copies made by
/// flipping each spike independently with the given probability. Everything
/// is a pure function of the seed.
pub fn synth_pattern_task(
    class_count: usize,
    neurons: usize,
    t_steps: usize,
    sample_count: usize,
    noise: f64,
    seed: u64,
) -> CoreResult<SpikeDataset> {
    synth_raster_task(class_count, &[neurons], t_steps, sample_count, noise, seed)
}

/// Same generator shaped as single-channel spatial frames, for convolutional
/// networks.
pub fn synth_frame_task(
    class_count: usize,
    channels: usize,
    height: usize,
    width: usize,
    t_steps: usize,
    sample_count: usize,
    noise: f64,
    seed: u64,
) -> CoreResult<SpikeDataset> {
    if channels == 0 || height == 0 || width == 0 {
        return Err(CoreError::InvalidParam { context: "frame dims must be positive" });
    }
    synth_raster_task(class_count, &[channels, height, width], t_steps, sample_count, noise, seed)
}

const EVF_MAGIC: &[u8; 4] = b"EVF1";
const EVF_HEADER_LEN: usize = 28;
const EVF_MAX_BYTES: u64 = 256 * 1024 * 1024;

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]])
}

/// Decodes the EVF1 container: a 28-byte little-endian header (magic,
/// sample count, steps, height, width, channels, class count), then per
/// sample one label byte followed by steps * channels * height * width
/// unsigned 8-bit values in step-major order, scaled to [0, 1] on load.
pub fn decode_evf(bytes: &[u8]) -> CoreResult<SpikeDataset> {
    if bytes.len() < EVF_HEADER_LEN {
        return Err(CoreError::Format { offset: bytes.len() as u64, context: "truncated header" });
    }
    if &bytes[0..4] != EVF_MAGIC {
        return Err(CoreError::Format { offset: 0, context: "bad magic, expected EVF1" });
    }
    let sample_count = read_u32(bytes, 4) as usize;
    let t_steps = read_u32(bytes, 8) as usize;
    let height = read_u32(bytes, 12) as usize;
    let width = read_u32(bytes, 16) as usize;
    let channels = read_u32(bytes, 20) as usize;
    let class_count = read_u32(bytes, 24) as usize;
    if t_steps == 0 || height == 0 || width == 0 || channels == 0 || class_count < 2 {
        return Err(CoreError::Format { offset: 8, context: "header counts must be positive" });
    }
    let frame_len = channels * height * width;
    let sample_bytes = 1 + t_steps * frame_len;
    let expected = EVF_HEADER_LEN as u64 + sample_count as u64 * sample_bytes as u64;
    if expected > EVF_MAX_BYTES {
        return Err(CoreError::Format { offset: 4, context: "declared payload too large" });
    }
    if (bytes.len() as u64) != expected {
        return Err(CoreError::Format {
            offset: bytes.len().min(expected as usize) as u64,
            context: "payload length does not match header",
        });
    }
    let mut samples = Vec::with_capacity(sample_count);
    let mut offset = EVF_HEADER_LEN;
    for _ in 0..sample_count {
        let label = bytes[offset] as usize;
        if label >= class_count {
            return Err(CoreError::Format { offset: offset as u64, context: "label out of range" });
        }
        offset += 1;
        let mut frames = Vec::with_capacity(t_steps);
        for _ in 0..t_steps {
            let raw = &bytes[offset..offset + frame_len];
            let data = raw.iter().map(|&b| b as f64 / 255.0).collect();
            frames.push(Tensor::from_vec(&[channels, height, width], data)?);
            offset += frame_len;
        }
        samples.push(Sample { frames, label });
    }
    let ds = SpikeDataset { samples, class_count, t_steps, frame_shape: vec![channels, height, width] };
    ds.validate()?;
    Ok(ds)
}

/// Encodes a dataset into the EVF1 container, quantizing values to 8 bits.
/// The frame shape must be channels by height by width.
pub fn encode_evf(ds: &SpikeDataset) -> CoreResult<Vec<u8>> {
    ds.validate()?;
    let [channels, height, width] = match ds.frame_shape[..] {
        [c, h, w] => [c, h, w],
        _ => {
            return Err(CoreError::ShapeMismatch {
                expected: vec![0, 0, 0],
                got: ds.frame_shape.clone(),
            })
        }
    };
    if ds.class_count > 256 {
        return Err(CoreError::InvalidParam { context: "container labels are single bytes" });
    }
    let frame_len = channels * height * width;
    let mut out = Vec::with_capacity(EVF_HEADER_LEN + ds.len() * (1 + ds.t_steps * frame_len));
    out.extend_from_slice(EVF_MAGIC);
    for value in [
        ds.len() as u32,
        ds.t_steps as u32,
        height as u32,
        width as u32,
        channels as u32,
        ds.class_count as u32,
    ] {
        out.extend_from_slice(&value.to_le_bytes());
    }
    for sample in &ds.samples {
        out.push(sample.label as u8);
        for frame in &sample.frames {
            for &v in frame.data() {
                out.push((v * 255.0 + 0.5) as u8);
            }
        }
    }
    Ok(out)
}
