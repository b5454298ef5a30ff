//! 2-D convolution with zero padding, its weight-gradient correlation, and
//! average pooling. Feature maps travel as flat [channels * height * width]
//! tensors; weights are stored as [out_ch, in_ch, k, k].
//!
//! The weight update takes the same factored form as the dense layers: a
//! factor over output positions and a factor over input positions. Each
//! kernel slot accumulates the correlation of the two maps under the layer's
//! connectivity, which is the weight-shared analogue of an outer product.

use alloc::vec;

use crate::tensor::Tensor;
use crate::{CoreError, CoreResult};

/// Spatial geometry of one convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dGeom {
    pub in_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Conv2dGeom {
    pub fn new(
        in_ch: usize,
        in_h: usize,
        in_w: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> CoreResult<Conv2dGeom> {
        if in_ch == 0 || in_h == 0 || in_w == 0 || out_ch == 0 {
            return Err(CoreError::InvalidParam { context: "conv dimensions must be positive" });
        }
        if kernel == 0 {
            return Err(CoreError::InvalidParam { context: "conv kernel must be positive" });
        }
        if stride == 0 {
            return Err(CoreError::InvalidParam { context: "conv stride must be positive" });
        }
        let padded_h = in_h + 2 * pad;
        let padded_w = in_w + 2 * pad;
        if padded_h < kernel || padded_w < kernel {
            return Err(CoreError::InvalidParam { context: "conv kernel exceeds padded input" });
        }
        let out_h = (padded_h - kernel) / stride + 1;
        let out_w = (padded_w - kernel) / stride + 1;
        Ok(Conv2dGeom { in_ch, in_h, in_w, out_ch, kernel, stride, pad, out_h, out_w })
    }

    pub fn in_len(&self) -> usize {
        self.in_ch * self.in_h * self.in_w
    }

    pub fn out_len(&self) -> usize {
        self.out_ch * self.out_h * self.out_w
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_ch, self.in_ch, self.kernel, self.kernel]
    }

    /// Multiply-accumulates per forward pass: every output activation does
    /// one MAC per kernel tap and input channel.
    pub fn connections(&self) -> u64 {
        self.out_len() as u64 * (self.in_ch * self.kernel * self.kernel) as u64
    }

    fn check_weights(&self, w: &Tensor) -> CoreResult<()> {
        let expect = self.weight_shape();
        if w.shape() != expect {
            return Err(CoreError::ShapeMismatch { expected: expect.to_vec(), got: w.shape().to_vec() });
        }
        Ok(())
    }

    fn check_input(&self, x: &Tensor) -> CoreResult<()> {
        if x.len() != self.in_len() {
            return Err(CoreError::LenMismatch { expected: self.in_len(), got: x.len() });
        }
        Ok(())
    }
}

/// Convolves x (flat [in_ch, in_h, in_w]) with w, producing the flat output
/// map [out_ch, out_h, out_w]. Padding contributes zeros.
pub fn conv2d_forward(geom: &Conv2dGeom, w: &Tensor, x: &Tensor) -> CoreResult<Tensor> {
    geom.check_weights(w)?;
    geom.check_input(x)?;
    let k = geom.kernel;
    let wd = w.data();
    let xd = x.data();
    let mut out = vec![0.0; geom.out_len()];
    for oc in 0..geom.out_ch {
        for oh in 0..geom.out_h {
            for ow in 0..geom.out_w {
                let mut acc = 0.0;
                for ic in 0..geom.in_ch {
                    let w_base = ((oc * geom.in_ch + ic) * k) * k;
                    let x_base = ic * geom.in_h * geom.in_w;
                    for kh in 0..k {
                        let ih = (oh * geom.stride + kh) as isize - geom.pad as isize;
                        if ih < 0 || ih >= geom.in_h as isize {
                            continue;
                        }
                        for kw in 0..k {
                            let iw = (ow * geom.stride + kw) as isize - geom.pad as isize;
                            if iw < 0 || iw >= geom.in_w as isize {
                                continue;
                            }
                            acc += wd[w_base + kh * k + kw]
                                * xd[x_base + ih as usize * geom.in_w + iw as usize];
                        }
                    }
                }
                out[(oc * geom.out_h + oh) * geom.out_w + ow] = acc;
            }
        }
    }
    Tensor::from_vec(&[geom.out_ch, geom.out_h, geom.out_w], out)
}

/// acc[out_ch, in_ch, k, k] += correlation of an output-shaped factor with an
/// input-shaped factor under the layer connectivity. Equivalent to summing
/// out_factor[o] * in_factor[i] over every (o, i) pair the kernel connects,
/// folded into the shared weights.
pub fn conv2d_update_accumulate(
    acc: &mut Tensor,
    geom: &Conv2dGeom,
    out_factor: &Tensor,
    in_factor: &Tensor,
) -> CoreResult<()> {
    geom.check_weights(acc)?;
    if out_factor.len() != geom.out_len() {
        return Err(CoreError::LenMismatch { expected: geom.out_len(), got: out_factor.len() });
    }
    geom.check_input(in_factor)?;
    let k = geom.kernel;
    let od = out_factor.data();
    let id = in_factor.data();
    let ad = acc.data_mut();
    for oc in 0..geom.out_ch {
        for oh in 0..geom.out_h {
            for ow in 0..geom.out_w {
                let a = od[(oc * geom.out_h + oh) * geom.out_w + ow];
                if a == 0.0 {
                    continue;
                }
                for ic in 0..geom.in_ch {
                    let w_base = ((oc * geom.in_ch + ic) * k) * k;
                    let x_base = ic * geom.in_h * geom.in_w;
                    for kh in 0..k {
                        let ih = (oh * geom.stride + kh) as isize - geom.pad as isize;
                        if ih < 0 || ih >= geom.in_h as isize {
                            continue;
                        }
                        for kw in 0..k {
                            let iw = (ow * geom.stride + kw) as isize - geom.pad as isize;
                            if iw < 0 || iw >= geom.in_w as isize {
                                continue;
                            }
                            ad[w_base + kh * k + kw] +=
                                a * id[x_base + ih as usize * geom.in_w + iw as usize];
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Freshly allocated correlation, see [`conv2d_update_accumulate`].
pub fn conv2d_update_from_outer(
    geom: &Conv2dGeom,
    out_factor: &Tensor,
    in_factor: &Tensor,
) -> CoreResult<Tensor> {
    let mut acc = Tensor::zeros(&geom.weight_shape());
    conv2d_update_accumulate(&mut acc, geom, out_factor, in_factor)?;
    Ok(acc)
}

/// Non-overlapping average pooling over each channel. Height and width must
/// divide evenly by the pool kernel.
pub fn avgpool2d(x: &Tensor, ch: usize, h: usize, w: usize, kernel: usize) -> CoreResult<Tensor> {
    if x.len() != ch * h * w {
        return Err(CoreError::LenMismatch { expected: ch * h * w, got: x.len() });
    }
    if kernel == 0 || h % kernel != 0 || w % kernel != 0 {
        return Err(CoreError::InvalidParam { context: "pool kernel must divide both spatial dims" });
    }
    let oh = h / kernel;
    let ow = w / kernel;
    let norm = 1.0 / (kernel * kernel) as f64;
    let xd = x.data();
    let mut out = vec![0.0; ch * oh * ow];
    for c in 0..ch {
        let x_base = c * h * w;
        for py in 0..oh {
            for px in 0..ow {
                let mut acc = 0.0;
                for dy in 0..kernel {
                    for dx in 0..kernel {
                        acc += xd[x_base + (py * kernel + dy) * w + (px * kernel + dx)];
                    }
                }
                out[(c * oh + py) * ow + px] = acc * norm;
            }
        }
    }
    Tensor::from_vec(&[ch, oh, ow], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::matvec;

    #[test]
    fn geometry_rejects_bad_params() {
        assert!(Conv2dGeom::new(0, 4, 4, 1, 3, 1, 1).is_err());
        assert!(Conv2dGeom::new(1, 4, 4, 1, 0, 1, 1).is_err());
        assert!(Conv2dGeom::new(1, 4, 4, 1, 3, 0, 1).is_err());
        assert!(Conv2dGeom::new(1, 2, 2, 1, 5, 1, 0).is_err());
    }

    #[test]
    fn geometry_output_dims() {
        let g = Conv2dGeom::new(2, 8, 8, 4, 3, 1, 1).unwrap();
        assert_eq!((g.out_h, g.out_w), (8, 8));
        assert_eq!(g.in_len(), 128);
        assert_eq!(g.out_len(), 256);
        assert_eq!(g.connections(), 256 * 18);
        let g = Conv2dGeom::new(1, 5, 5, 1, 3, 2, 0).unwrap();
        assert_eq!((g.out_h, g.out_w), (2, 2));
    }

    #[test]
    fn forward_all_ones_kernel_padded() {
        let g = Conv2dGeom::new(1, 3, 3, 1, 3, 1, 1).unwrap();
        let w = Tensor::filled(&[1, 1, 3, 3], 1.0);
        let x = Tensor::from_vec(&[1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let y = conv2d_forward(&g, &w, &x).unwrap();
        assert_eq!(y.shape(), &[1, 3, 3]);
        assert_eq!(y.data(), &[12.0, 21.0, 16.0, 27.0, 45.0, 33.0, 24.0, 39.0, 28.0]);
    }

    #[test]
    fn one_by_one_conv_matches_per_pixel_matvec() {
        let g = Conv2dGeom::new(3, 2, 2, 2, 1, 1, 0).unwrap();
        let w = Tensor::from_vec(&[2, 3, 1, 1], vec![0.5, -1.0, 2.0, 1.0, 1.0, -0.5]).unwrap();
        let x = Tensor::from_vec(
            &[3, 2, 2],
            vec![1.0, 2.0, 3.0, 4.0, 0.5, 0.0, -1.0, 1.0, 2.0, 2.0, 0.0, -2.0],
        )
        .unwrap();
        let y = conv2d_forward(&g, &w, &x).unwrap();
        let wm = Tensor::from_vec(&[2, 3], w.data().to_vec()).unwrap();
        for pix in 0..4 {
            let px = Tensor::vector((0..3).map(|c| x.data()[c * 4 + pix]).collect()).unwrap();
            let py = matvec(&wm, &px).unwrap();
            for oc in 0..2 {
                assert_eq!(y.data()[oc * 4 + pix], py.data()[oc], "pixel {pix} channel {oc}");
            }
        }
    }

    #[test]
    fn update_correlation_known_values() {
        let g = Conv2dGeom::new(1, 3, 3, 1, 2, 1, 0).unwrap();
        let out_factor = Tensor::filled(&[1, 2, 2], 1.0);
        let in_factor = Tensor::from_vec(&[1, 3, 3], (1..=9).map(f64::from).collect()).unwrap();
        let dw = conv2d_update_from_outer(&g, &out_factor, &in_factor).unwrap();
        assert_eq!(dw.data(), &[12.0, 16.0, 24.0, 28.0]);
    }

    #[test]
    fn update_with_one_by_one_kernel_is_dot_per_channel_pair() {
        let g = Conv2dGeom::new(1, 2, 2, 1, 1, 1, 0).unwrap();
        let a = Tensor::from_vec(&[1, 2, 2], vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let b = Tensor::from_vec(&[1, 2, 2], vec![2.0, 1.0, 4.0, -1.0]).unwrap();
        let dw = conv2d_update_from_outer(&g, &a, &b).unwrap();
        assert_eq!(dw.data(), &[2.0 - 2.0 + 2.0 - 3.0]);
    }

    #[test]
    fn avgpool_known_values() {
        let x = Tensor::from_vec(&[1, 4, 2], (1..=8).map(f64::from).collect()).unwrap();
        let y = avgpool2d(&x, 1, 4, 2, 2).unwrap();
        assert_eq!(y.shape(), &[1, 2, 1]);
        assert_eq!(y.data(), &[2.5, 6.5]);
        assert!(avgpool2d(&x, 1, 4, 2, 3).is_err());
    }
}
