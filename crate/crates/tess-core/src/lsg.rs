//! Layer-local learning signals. Each trainable layer owns a fixed matrix of
//! +1/-1 square waves (or the identity, for a classifier head) that projects
//! its spikes onto class scores; the error in those scores is projected back
//! through the same matrix to give a per-neuron signal. No state from other
//! layers is involved.

use alloc::string::String;
use alloc::vec;

use crate::audit::MacCounter;
use crate::tensor::{matvec, matvec_transpose, Tensor};
use crate::{CoreError, CoreResult};

/// Shape of the fixed projection owned by a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Rows are square waves of increasing frequency over the layer width.
    SquareWave,
    /// One indicator row per class; requires width equal to the class count.
    Identity,
}

/// A fixed class-by-width projection matrix with +1/-1 (square wave) or 0/1
/// (identity) entries. Never trained.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub kind: BasisKind,
    rows: Tensor,
}

impl Basis {
    pub fn class_count(&self) -> usize {
        self.rows.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.rows.shape()[1]
    }

    pub fn rows(&self) -> &Tensor {
        &self.rows
    }

    pub fn row(&self, c: usize) -> &[f64] {
        let n = self.width();
        &self.rows.data()[c * n..(c + 1) * n]
    }

    /// Renders one row as a +/- string for inspection.
    pub fn row_string(&self, c: usize) -> String {
        self.row(c).iter().map(|&v| if v > 0.0 { '+' } else { '-' }).collect()
    }
}

/// Builds the projection for one layer. Square waves set entry (c, j) to +1
/// when floor(j * (c + 1) * 2 / width) is even and -1 otherwise, so row c
/// alternates sign c + 1 times across the layer.
pub fn build_basis(kind: BasisKind, class_count: usize, width: usize) -> CoreResult<Basis> {
    if class_count < 2 || width == 0 {
        return Err(CoreError::InvalidParam {
            context: "basis needs at least two classes and a positive width",
        });
    }
    let rows = match kind {
        BasisKind::SquareWave => {
            if width < class_count {
                return Err(CoreError::InvalidParam {
                    context: "square-wave basis needs width >= class count",
                });
            }
            let mut data = vec![0.0; class_count * width];
            for c in 0..class_count {
                for j in 0..width {
                    let phase = j * (c + 1) * 2 / width;
                    data[c * width + j] = if phase % 2 == 0 { 1.0 } else { -1.0 };
                }
            }
            Tensor::from_vec(&[class_count, width], data)?
        }
        BasisKind::Identity => {
            if width != class_count {
                return Err(CoreError::InvalidParam {
                    context: "identity basis needs width equal to class count",
                });
            }
            let mut data = vec![0.0; class_count * width];
            for c in 0..class_count {
                data[c * width + c] = 1.0;
            }
            Tensor::from_vec(&[class_count, width], data)?
        }
    };
    Ok(Basis { kind, rows })
}

/// What the class-score error compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// Scores go through softmax and the target is a class index.
    Classification,
    /// Scores are used as-is and the target is a score vector.
    Regression,
}

/// Ground truth for one sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Target<'a> {
    Class(usize),
    Values(&'a Tensor),
}

/// Numerically shifted softmax; all-equal inputs give a uniform output.
pub fn softmax(z: &Tensor) -> Tensor {
    let max = z.data().iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let mut out = z.map(|v| libm::exp(v - max));
    let sum: f64 = out.data().iter().sum();
    out.scale(1.0 / sum);
    out
}

/// Projects spikes onto class scores without touching the signal counter.
/// Used for readout and inspection.
pub fn class_scores(basis: &Basis, spikes: &Tensor) -> CoreResult<Tensor> {
    matvec(&basis.rows, spikes)
}

/// Produces the per-neuron learning signal for one layer at one step: project
/// spikes to class scores, compare against the target, and project the error
/// back through the basis transpose. Adds 2 * classes * width to the counter,
/// one basis pass in each direction.
pub fn learning_signal(
    basis: &Basis,
    spikes: &Tensor,
    target: &Target,
    task: TaskKind,
    counter: &mut MacCounter,
) -> CoreResult<Tensor> {
    let c = basis.class_count();
    let n = basis.width();
    let z = matvec(&basis.rows, spikes)?;
    let err = match (task, target) {
        (TaskKind::Classification, Target::Class(label)) => {
            if *label >= c {
                return Err(CoreError::InvalidParam { context: "target class out of range" });
            }
            let mut e = softmax(&z);
            e.data_mut()[*label] -= 1.0;
            e
        }
        (TaskKind::Regression, Target::Values(want)) => {
            if want.len() != c {
                return Err(CoreError::LenMismatch { expected: c, got: want.len() });
            }
            let mut e = z;
            e.add_scaled(want, -1.0)?;
            e
        }
        _ => return Err(CoreError::InvalidParam { context: "target kind does not match task" }),
    };
    if !err.all_finite() {
        return Err(CoreError::NonFinite { context: "class-score error" });
    }
    let m = matvec_transpose(&basis.rows, &err)?;
    counter.add(2 * (c as u64) * (n as u64));
    Ok(m)
}
