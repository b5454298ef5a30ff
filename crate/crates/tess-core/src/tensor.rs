//! Dense row-major tensors over f64 and the dense linear ops the engine
//! needs: matrix-vector products, outer products, elementwise combinators.
//!
//! Vector-valued arguments are matched by flat length rather than by shape,
//! so a [c, h, w] spike map can feed a matrix op that sees it as a flat
//! vector. Matrix arguments are checked strictly. Constructors reject
//! non-finite values.

use alloc::vec;
use alloc::vec::Vec;

use crate::{CoreError, CoreResult};

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    pub fn filled(shape: &[usize], value: f64) -> Tensor {
        let len = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; len] }
    }

    /// Builds a tensor from a flat row-major buffer. The buffer length must
    /// equal the shape product and every value must be finite.
    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> CoreResult<Tensor> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(CoreError::LenMismatch { expected, got: data.len() });
        }
        let t = Tensor { shape: shape.to_vec(), data };
        if !t.all_finite() {
            return Err(CoreError::NonFinite { context: "tensor construction" });
        }
        Ok(t)
    }

    /// One-dimensional tensor from a value list.
    pub fn vector(data: Vec<f64>) -> CoreResult<Tensor> {
        let len = data.len();
        Tensor::from_vec(&[len], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Same buffer under a new shape with identical flat length.
    pub fn reshaped(&self, shape: &[usize]) -> CoreResult<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != self.data.len() {
            return Err(CoreError::LenMismatch { expected, got: self.data.len() });
        }
        Ok(Tensor { shape: shape.to_vec(), data: self.data.clone() })
    }

    pub fn fill(&mut self, value: f64) {
        for v in &mut self.data {
            *v = value;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn add_assign(&mut self, other: &Tensor) -> CoreResult<()> {
        self.add_scaled(other, 1.0)
    }

    /// self += s * other, matched by flat length.
    pub fn add_scaled(&mut self, other: &Tensor, s: f64) -> CoreResult<()> {
        if self.data.len() != other.data.len() {
            return Err(CoreError::LenMismatch { expected: self.data.len(), got: other.data.len() });
        }
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += s * b;
        }
        Ok(())
    }

    /// Index of the first maximal element. Panics on an empty tensor.
    pub fn argmax(&self) -> usize {
        assert!(!self.data.is_empty(), "argmax of empty tensor");
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate() {
            if v > self.data[best] {
                best = i;
            }
        }
        best
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn expect_matrix(w: &Tensor) -> CoreResult<(usize, usize)> {
    match w.shape() {
        [rows, cols] => Ok((*rows, *cols)),
        other => Err(CoreError::ShapeMismatch { expected: vec![0, 0], got: other.to_vec() }),
    }
}

fn expect_len(x: &Tensor, len: usize) -> CoreResult<()> {
    if x.len() != len {
        return Err(CoreError::LenMismatch { expected: len, got: x.len() });
    }
    Ok(())
}

/// w[m, n] * x[n] -> [m].
pub fn matvec(w: &Tensor, x: &Tensor) -> CoreResult<Tensor> {
    let (m, n) = expect_matrix(w)?;
    expect_len(x, n)?;
    let wd = w.data();
    let xd = x.data();
    let mut out = vec![0.0; m];
    for i in 0..m {
        let row = &wd[i * n..(i + 1) * n];
        let mut acc = 0.0;
        for j in 0..n {
            acc += row[j] * xd[j];
        }
        out[i] = acc;
    }
    Tensor::from_vec(&[m], out)
}

/// w[m, n] transposed times y[m] -> [n].
pub fn matvec_transpose(w: &Tensor, y: &Tensor) -> CoreResult<Tensor> {
    let (m, n) = expect_matrix(w)?;
    expect_len(y, m)?;
    let wd = w.data();
    let yd = y.data();
    let mut out = vec![0.0; n];
    for i in 0..m {
        let row = &wd[i * n..(i + 1) * n];
        let yi = yd[i];
        for j in 0..n {
            out[j] += row[j] * yi;
        }
    }
    Tensor::from_vec(&[n], out)
}

/// a[m] outer b[n] -> [m, n].
pub fn outer(a: &Tensor, b: &Tensor) -> CoreResult<Tensor> {
    let m = a.len();
    let n = b.len();
    let mut acc = Tensor::zeros(&[m, n]);
    accumulate_outer(&mut acc, a, b)?;
    Ok(acc)
}

/// acc[m, n] += a[m] outer b[n]. The training path uses this so per-step
/// outer products are folded straight into the accumulator.
pub fn accumulate_outer(acc: &mut Tensor, a: &Tensor, b: &Tensor) -> CoreResult<()> {
    let (m, n) = expect_matrix(acc)?;
    expect_len(a, m)?;
    expect_len(b, n)?;
    let ad = a.data();
    let bd = b.data();
    let out = acc.data_mut();
    for i in 0..m {
        let ai = ad[i];
        if ai == 0.0 {
            continue;
        }
        let row = &mut out[i * n..(i + 1) * n];
        for j in 0..n {
            row[j] += ai * bd[j];
        }
    }
    Ok(())
}

pub fn dot(a: &Tensor, b: &Tensor) -> CoreResult<f64> {
    expect_len(b, a.len())?;
    Ok(a.data().iter().zip(b.data().iter()).map(|(x, y)| x * y).sum())
}

/// Elementwise combination of two tensors of equal flat length; keeps the
/// shape of the first argument.
pub fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> CoreResult<Tensor> {
    expect_len(b, a.len())?;
    let data = a.data().iter().zip(b.data().iter()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        let err = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0]).unwrap_err();
        assert_eq!(err, CoreError::LenMismatch { expected: 4, got: 3 });
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        let err = Tensor::from_vec(&[2], vec![1.0, f64::NAN]).unwrap_err();
        assert_eq!(err, CoreError::NonFinite { context: "tensor construction" });
        let err = Tensor::from_vec(&[1], vec![f64::INFINITY]).unwrap_err();
        assert_eq!(err, CoreError::NonFinite { context: "tensor construction" });
    }

    #[test]
    fn matvec_known_values() {
        let w = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let x = Tensor::vector(vec![1.0, 0.0, -1.0]).unwrap();
        let y = matvec(&w, &x).unwrap();
        assert_eq!(y.data(), &[-2.0, -2.0]);
    }

    #[test]
    fn matvec_accepts_flat_length_match() {
        let w = Tensor::from_vec(&[2, 4], vec![1.0; 8]).unwrap();
        let x = Tensor::zeros(&[2, 2]);
        assert!(matvec(&w, &x).is_ok());
    }

    #[test]
    fn matvec_transpose_known_values() {
        let w = Tensor::from_vec(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = Tensor::vector(vec![1.0, -1.0]).unwrap();
        let x = matvec_transpose(&w, &y).unwrap();
        assert_eq!(x.data(), &[-3.0, -3.0, -3.0]);
    }

    #[test]
    fn outer_known_values() {
        let a = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let b = Tensor::vector(vec![3.0, 4.0, 5.0]).unwrap();
        let o = outer(&a, &b).unwrap();
        assert_eq!(o.shape(), &[2, 3]);
        assert_eq!(o.data(), &[3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn accumulate_outer_matches_outer_plus_add() {
        let a = Tensor::vector(vec![0.5, -1.0, 0.0]).unwrap();
        let b = Tensor::vector(vec![2.0, 1.0]).unwrap();
        let mut acc = Tensor::filled(&[3, 2], 1.0);
        accumulate_outer(&mut acc, &a, &b).unwrap();
        let mut expect = Tensor::filled(&[3, 2], 1.0);
        expect.add_assign(&outer(&a, &b).unwrap()).unwrap();
        assert_eq!(acc, expect);
    }

    #[test]
    fn argmax_returns_first_maximum() {
        let t = Tensor::vector(vec![1.0, 3.0, 3.0, 2.0]).unwrap();
        assert_eq!(t.argmax(), 1);
    }

    #[test]
    fn reshaped_preserves_data() {
        let t = Tensor::vector(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = t.reshaped(&[2, 2]).unwrap();
        assert_eq!(r.shape(), &[2, 2]);
        assert_eq!(r.data(), t.data());
        assert!(t.reshaped(&[3]).is_err());
    }

    #[test]
    fn add_scaled_and_dot() {
        let mut a = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let b = Tensor::vector(vec![10.0, -10.0]).unwrap();
        a.add_scaled(&b, 0.1).unwrap();
        assert_eq!(a.data(), &[2.0, 1.0]);
        assert_eq!(dot(&a, &b).unwrap(), 10.0);
    }
}
