//! Binary checkpoint container, little-endian throughout. Layout:
//!
//! ```text
//! offset 0   magic "TSCK"
//!        4   format version, u32, currently 1
//!        8   config length, u32
//!       12   config text in canonical form
//!        .   trainable layer count, u32
//!        .   per layer: rank u32, dims u32 each, then f64 weights
//!        .   optimizer flag, u8; when 1: per layer first and second
//!            moments (f64, weight-shaped), then step u64 and the two
//!            running decay powers, f64 each
//!        .   learning rate f64
//!        .   best-accuracy flag u8, best f64 when set, stall count u32
//!        .   finished epoch count u32
//!        .   run seed u64
//! ```
//!
//! Decoding checks every read against the remaining bytes and reports the
//! failing byte offset; trailing bytes after the seed are an error too.

use crate::error::{CliError, CliResult};
use std::fs;
use tess_core::Tensor;

const MAGIC: &[u8; 4] = b"TSCK";
const VERSION: u32 = 1;
const MAX_TENSOR_LEN: u64 = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamBlock {
    pub moments: Vec<(Tensor, Tensor)>,
    pub step: u64,
    pub beta1_pow: f64,
    pub beta2_pow: f64,
}

/// Everything a finished or interrupted run needs to be evaluated or
/// inspected later.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_text: String,
    pub weights: Vec<Tensor>,
    pub adam: Option<AdamBlock>,
    pub lr: f64,
    pub sched_best: Option<f64>,
    pub sched_stall: u32,
    pub epochs_done: u32,
    pub seed: u64,
}

pub fn encode(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ck.config_text.len() as u32).to_le_bytes());
    out.extend_from_slice(ck.config_text.as_bytes());
    out.extend_from_slice(&(ck.weights.len() as u32).to_le_bytes());
    for w in &ck.weights {
        out.extend_from_slice(&(w.shape().len() as u32).to_le_bytes());
        for &d in w.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in w.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    match &ck.adam {
        None => out.push(0),
        Some(block) => {
            out.push(1);
            for (m, v) in &block.moments {
                for &x in m.data() {
                    out.extend_from_slice(&x.to_le_bytes());
                }
                for &x in v.data() {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
            out.extend_from_slice(&block.step.to_le_bytes());
            out.extend_from_slice(&block.beta1_pow.to_le_bytes());
            out.extend_from_slice(&block.beta2_pow.to_le_bytes());
        }
    }
    out.extend_from_slice(&ck.lr.to_le_bytes());
    match ck.sched_best {
        None => out.push(0),
        Some(best) => {
            out.push(1);
            out.extend_from_slice(&best.to_le_bytes());
        }
    }
    out.extend_from_slice(&ck.sched_stall.to_le_bytes());
    out.extend_from_slice(&ck.epochs_done.to_le_bytes());
    out.extend_from_slice(&ck.seed.to_le_bytes());
    out
}

struct Reader<'a> {
    name: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, what: &str) -> CliResult<T> {
        Err(CliError::Data(format!(
            "{}: format error at byte {}: {what}",
            self.name, self.pos
        )))
    }

    fn take(&mut self, n: usize, what: &str) -> CliResult<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return self.fail(what);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> CliResult<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> CliResult<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self, what: &str) -> CliResult<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> CliResult<f64> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().unwrap()))
    }

    fn f64_vec(&mut self, len: usize, what: &str) -> CliResult<Vec<f64>> {
        let b = self.take(len * 8, what)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(name: &str, bytes: &[u8]) -> CliResult<Checkpoint> {
    let mut r = Reader { name, bytes, pos: 0 };
    if r.take(4, "truncated magic")? != MAGIC {
        r.pos = 0;
        return r.fail("bad magic, expected TSCK");
    }
    let version = r.u32("truncated version")?;
    if version != VERSION {
        r.pos -= 4;
        return r.fail("unsupported version");
    }
    let cfg_len = r.u32("truncated config length")? as usize;
    let cfg_bytes = r.take(cfg_len, "truncated config text")?;
    let config_text = match std::str::from_utf8(cfg_bytes) {
        Ok(s) => String::from(s),
        Err(_) => {
            r.pos -= cfg_len;
            return r.fail("config text is not utf-8");
        }
    };
    let layer_count = r.u32("truncated layer count")? as usize;
    let mut weights = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let rank = r.u32("truncated tensor rank")? as usize;
        if rank == 0 || rank > 8 {
            r.pos -= 4;
            return r.fail("tensor rank out of range");
        }
        let mut shape = Vec::with_capacity(rank);
        let mut len: u64 = 1;
        for _ in 0..rank {
            let d = r.u32("truncated tensor dims")? as u64;
            len = len.saturating_mul(d);
            shape.push(d as usize);
        }
        if len == 0 || len > MAX_TENSOR_LEN {
            return r.fail("tensor size out of range");
        }
        let data = r.f64_vec(len as usize, "truncated weight data")?;
        weights.push(Tensor::from_vec(&shape, data).expect("shape and data lengths agree"));
    }
    let adam = match r.u8("truncated optimizer flag")? {
        0 => None,
        1 => {
            let mut moments = Vec::with_capacity(weights.len());
            for w in &weights {
                let m = r.f64_vec(w.len(), "truncated first moments")?;
                let v = r.f64_vec(w.len(), "truncated second moments")?;
                moments.push((
                    Tensor::from_vec(w.shape(), m).expect("moment matches weight shape"),
                    Tensor::from_vec(w.shape(), v).expect("moment matches weight shape"),
                ));
            }
            let step = r.u64("truncated optimizer step")?;
            let beta1_pow = r.f64("truncated decay power")?;
            let beta2_pow = r.f64("truncated decay power")?;
            Some(AdamBlock { moments, step, beta1_pow, beta2_pow })
        }
        _ => {
            r.pos -= 1;
            return r.fail("optimizer flag must be 0 or 1");
        }
    };
    let lr = r.f64("truncated learning rate")?;
    let sched_best = match r.u8("truncated best flag")? {
        0 => None,
        1 => Some(r.f64("truncated best accuracy")?),
        _ => {
            r.pos -= 1;
            return r.fail("best flag must be 0 or 1");
        }
    };
    let sched_stall = r.u32("truncated stall count")?;
    let epochs_done = r.u32("truncated epoch count")?;
    let seed = r.u64("truncated seed")?;
    if r.pos != bytes.len() {
        return r.fail("trailing bytes after checkpoint");
    }
    Ok(Checkpoint {
        config_text,
        weights,
        adam,
        lr,
        sched_best,
        sched_stall,
        epochs_done,
        seed,
    })
}

pub fn save(path: &str, ck: &Checkpoint) -> CliResult<()> {
    fs::write(path, encode(ck)).map_err(|e| crate::error::io_err(path, e))
}

pub fn load(path: &str) -> CliResult<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| crate::error::io_err(path, e))?;
    decode(path, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_checkpoint() -> Checkpoint {
        let w0 = Tensor::from_vec(&[2, 3], vec![0.1, -0.2, 0.3, 0.4, -0.5, 0.6]).unwrap();
        let w1 = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let moments = vec![
            (Tensor::zeros(&[2, 3]), Tensor::filled(&[2, 3], 0.25)),
            (Tensor::filled(&[2, 2], -1.5), Tensor::zeros(&[2, 2])),
        ];
        Checkpoint {
            config_text: String::from("train.seed = 7\n"),
            weights: vec![w0, w1],
            adam: Some(AdamBlock { moments, step: 12, beta1_pow: 0.9_f64.powi(12), beta2_pow: 0.999_f64.powi(12) }),
            lr: 0.0005,
            sched_best: Some(0.9375),
            sched_stall: 2,
            epochs_done: 12,
            seed: 7,
        }
    }

    #[test]
    fn encode_decode_round_trips() {
        let ck = sample_checkpoint();
        let bytes = encode(&ck);
        let back = decode("mem", &bytes).unwrap();
        assert_eq!(back, ck);

        let mut plain = ck.clone();
        plain.adam = None;
        plain.sched_best = None;
        let back = decode("mem", &encode(&plain)).unwrap();
        assert_eq!(back, plain);
    }

    #[test]
    fn truncation_reports_the_failing_offset() {
        let bytes = encode(&sample_checkpoint());
        for cut in [0, 3, 7, 11, 20, bytes.len() - 1] {
            let err = decode("ck", &bytes[..cut]).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains("format error at byte"), "{msg}");
            assert!(matches!(err, CliError::Data(_)));
        }
    }

    #[test]
    fn bad_magic_and_trailing_bytes_are_rejected() {
        let mut bytes = encode(&sample_checkpoint());
        let err = decode("ck", &[b'n', b'o', b'p', b'e']).unwrap_err();
        assert!(err.to_string().contains("byte 0"), "{err}");
        assert!(err.to_string().contains("magic"), "{err}");

        let end = bytes.len();
        bytes.push(0);
        let err = decode("ck", &bytes).unwrap_err();
        assert!(err.to_string().contains(&format!("byte {end}")), "{err}");
        assert!(err.to_string().contains("trailing"), "{err}");
    }

    #[test]
    fn encoding_is_deterministic() {
        let ck = sample_checkpoint();
        assert_eq!(encode(&ck), encode(&ck));
    }
}
