//! Layers: 2-D convolution (cross-correlation), dense, activations and
//! nearest-neighbor upsampling, each with an explicit backward pass.

use rand::Rng;

use crate::error::{Error, Result};

use super::{gemm_abt, gemm_acc, gemm_atb, Scalar, Tensor};

/// Weight initialization family. Kaiming-uniform feeds relu layers,
/// Xavier-uniform feeds sigmoid outputs; biases start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    KaimingRelu,
    XavierSigmoid,
}

fn draw_uniform<T: Scalar, R: Rng>(rng: &mut R, n: usize, limit: f64) -> Vec<T> {
    (0..n)
        .map(|_| T::from_f64(rng.gen_range(-limit..limit)))
        .collect()
}

/// 2-D convolution with cross-correlation semantics (no kernel flip).
///
/// Operates on single items shaped `[C, H, W]`; batching is the training
/// loop's concern. The forward pass returns the im2col buffer, which the
/// backward pass reuses.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    /// `[out_c, in_c * k * k]` row-major.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub in_c: usize,
    pub out_c: usize,
    pub ksize: usize,
    pub stride: usize,
    pub pad: usize,
}

/// im2col buffer: `[in_c * k * k, out_h * out_w]` row-major.
#[derive(Debug)]
pub struct ConvCache<T> {
    cols: Vec<T>,
    in_shape: [usize; 3],
    out_shape: [usize; 3],
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng>(
        in_c: usize,
        out_c: usize,
        ksize: usize,
        stride: usize,
        pad: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let fan_in = (in_c * ksize * ksize) as f64;
        let fan_out = (out_c * ksize * ksize) as f64;
        let limit = match init {
            Init::KaimingRelu => (6.0 / fan_in).sqrt(),
            Init::XavierSigmoid => (6.0 / (fan_in + fan_out)).sqrt(),
        };
        Conv2d {
            weight: draw_uniform(rng, out_c * in_c * ksize * ksize, limit),
            bias: vec![T::ZERO; out_c],
            in_c,
            out_c,
            ksize,
            stride,
            pad,
        }
    }

    pub fn out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let span = |d: usize| -> Result<usize> {
            let padded = d + 2 * self.pad;
            if padded < self.ksize {
                return Err(Error::Shape(format!(
                    "conv kernel {} exceeds padded input {padded}",
                    self.ksize
                )));
            }
            Ok((padded - self.ksize) / self.stride + 1)
        };
        Ok((span(h)?, span(w)?))
    }

    fn im2col(&self, x: &Tensor<T>, oh: usize, ow: usize) -> Vec<T> {
        let (h, w) = (x.shape()[1], x.shape()[2]);
        let spatial = oh * ow;
        let mut cols = vec![T::ZERO; self.in_c * self.ksize * self.ksize * spatial];
        let data = x.data();
        let mut row = 0usize;
        for ic in 0..self.in_c {
            let plane = &data[ic * h * w..(ic + 1) * h * w];
            for ky in 0..self.ksize {
                for kx in 0..self.ksize {
                    let out_row = &mut cols[row * spatial..(row + 1) * spatial];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut out_row[oy * ow..(oy + 1) * ow];
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < w as isize {
                                dst[ox] = src[ix as usize];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
        cols
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, ConvCache<T>)> {
        let shape = x.shape();
        if shape.len() != 3 || shape[0] != self.in_c {
            return Err(Error::Shape(format!(
                "conv expects [{}, H, W], got {shape:?}",
                self.in_c
            )));
        }
        let (h, w) = (shape[1], shape[2]);
        let (oh, ow) = self.out_dims(h, w)?;
        let spatial = oh * ow;
        let kdim = self.in_c * self.ksize * self.ksize;
        let cols = self.im2col(x, oh, ow);
        let mut out = vec![T::ZERO; self.out_c * spatial];
        gemm_acc(self.out_c, kdim, spatial, &self.weight, &cols, &mut out);
        for oc in 0..self.out_c {
            let b = self.bias[oc];
            for v in &mut out[oc * spatial..(oc + 1) * spatial] {
                *v += b;
            }
        }
        Ok((
            Tensor::from_vec(&[self.out_c, oh, ow], out),
            ConvCache {
                cols,
                in_shape: [self.in_c, h, w],
                out_shape: [self.out_c, oh, ow],
            },
        ))
    }

    /// Returns `(grad_input, grad_weight, grad_bias)` for the scalar loss
    /// whose gradient w.r.t. this layer's output is `grad_out`.
    pub fn backward(
        &self,
        cache: &ConvCache<T>,
        grad_out: &Tensor<T>,
    ) -> (Tensor<T>, Vec<T>, Vec<T>) {
        let [in_c, h, w] = cache.in_shape;
        let [out_c, oh, ow] = cache.out_shape;
        debug_assert_eq!(grad_out.shape(), &[out_c, oh, ow]);
        let spatial = oh * ow;
        let kdim = in_c * self.ksize * self.ksize;
        let g = grad_out.data();

        let mut grad_bias = vec![T::ZERO; out_c];
        for oc in 0..out_c {
            let mut acc = T::ZERO;
            for &v in &g[oc * spatial..(oc + 1) * spatial] {
                acc += v;
            }
            grad_bias[oc] = acc;
        }

        let mut grad_weight = vec![T::ZERO; out_c * kdim];
        gemm_abt(out_c, spatial, kdim, g, &cache.cols, &mut grad_weight);

        let mut grad_cols = vec![T::ZERO; kdim * spatial];
        gemm_atb(out_c, kdim, spatial, &self.weight, g, &mut grad_cols);

        // col2im scatter-add
        let mut grad_in = Tensor::zeros(&[in_c, h, w]);
        let gdata = grad_in.data_mut();
        let mut row = 0usize;
        for ic in 0..in_c {
            let plane_off = ic * h * w;
            for ky in 0..self.ksize {
                for kx in 0..self.ksize {
                    let col_row = &grad_cols[row * spatial..(row + 1) * spatial];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = plane_off + iy as usize * w;
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < w as isize {
                                gdata[base + ix as usize] += col_row[oy * ow + ox];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
        (grad_in, grad_weight, grad_bias)
    }
}

/// Fully connected layer `y = Wx + b` on flat vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `[out, in]` row-major.
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng>(in_dim: usize, out_dim: usize, init: Init, rng: &mut R) -> Self {
        let limit = match init {
            Init::KaimingRelu => (6.0 / in_dim as f64).sqrt(),
            Init::XavierSigmoid => (6.0 / (in_dim + out_dim) as f64).sqrt(),
        };
        Dense {
            weight: draw_uniform(rng, out_dim * in_dim, limit),
            bias: vec![T::ZERO; out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.in_dim {
            return Err(Error::Shape(format!(
                "dense expects input of {}, got {}",
                self.in_dim,
                x.len()
            )));
        }
        let mut y = self.bias.clone();
        gemm_abt(self.out_dim, self.in_dim, 1, &self.weight, x, &mut y);
        Ok(y)
    }

    /// Returns `(grad_input, grad_weight, grad_bias)`.
    pub fn backward(&self, x: &[T], grad_out: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        debug_assert_eq!(x.len(), self.in_dim);
        debug_assert_eq!(grad_out.len(), self.out_dim);
        let mut grad_w = vec![T::ZERO; self.out_dim * self.in_dim];
        for (o, &g) in grad_out.iter().enumerate() {
            let row = &mut grad_w[o * self.in_dim..(o + 1) * self.in_dim];
            for (rv, &xv) in row.iter_mut().zip(x) {
                *rv = g * xv;
            }
        }
        let mut grad_x = vec![T::ZERO; self.in_dim];
        gemm_atb(self.out_dim, self.in_dim, 1, &self.weight, grad_out, &mut grad_x);
        (grad_x, grad_w, grad_out.to_vec())
    }
}

/// Elementwise rectifier.
pub fn relu<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v.maximum(T::ZERO)).collect()
}

/// Backward through relu given the forward *output*.
pub fn relu_backward<T: Scalar>(y: &[T], grad_out: &[T]) -> Vec<T> {
    y.iter()
        .zip(grad_out)
        .map(|(&yv, &g)| if yv > T::ZERO { g } else { T::ZERO })
        .collect()
}

/// Numerically stable logistic function, branching on sign. Outputs are
/// clamped to `[1e-7, 1 - 1e-7]` so downstream log-losses stay finite even
/// for extreme pre-activations.
pub fn sigmoid<T: Scalar>(x: &[T]) -> Vec<T> {
    let lo = T::from_f64(1e-7);
    let hi = T::ONE - lo;
    x.iter()
        .map(|&v| {
            let s = if v >= T::ZERO {
                T::ONE / (T::ONE + (-v).exp())
            } else {
                let e = v.exp();
                e / (T::ONE + e)
            };
            s.maximum(lo).minimum(hi)
        })
        .collect()
}

/// Backward through the sigmoid given the forward *output*.
pub fn sigmoid_backward<T: Scalar>(y: &[T], grad_out: &[T]) -> Vec<T> {
    y.iter()
        .zip(grad_out)
        .map(|(&yv, &g)| g * yv * (T::ONE - yv))
        .collect()
}

/// Nearest-neighbor 2x spatial upsampling of `[C, H, W]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Upsample2x;

impl Upsample2x {
    pub fn forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
        let (c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let mut out = Tensor::zeros(&[c, 2 * h, 2 * w]);
        let src = x.data();
        let dst = out.data_mut();
        for ci in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    let v = src[ci * h * w + y * w + xx];
                    let base = ci * 4 * h * w + 2 * y * 2 * w + 2 * xx;
                    dst[base] = v;
                    dst[base + 1] = v;
                    dst[base + 2 * w] = v;
                    dst[base + 2 * w + 1] = v;
                }
            }
        }
        out
    }

    /// Each input cell receives the sum of its four upsampled copies.
    pub fn backward<T: Scalar>(grad_out: &Tensor<T>) -> Tensor<T> {
        let (c, h2, w2) = (
            grad_out.shape()[0],
            grad_out.shape()[1],
            grad_out.shape()[2],
        );
        let (h, w) = (h2 / 2, w2 / 2);
        let mut grad_in = Tensor::zeros(&[c, h, w]);
        let g = grad_out.data();
        let dst = grad_in.data_mut();
        for ci in 0..c {
            for y in 0..h {
                for xx in 0..w {
                    let base = ci * h2 * w2 + 2 * y * w2 + 2 * xx;
                    dst[ci * h * w + y * w + xx] =
                        g[base] + g[base + 1] + g[base + w2] + g[base + w2 + 1];
                }
            }
        }
        grad_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conv_identity_kernel() {
        // 1x1 kernel with identity weights copies the input
        let mut conv = Conv2d::<f32> {
            weight: vec![1.0],
            bias: vec![0.0],
            in_c: 1,
            out_c: 1,
            ksize: 1,
            stride: 1,
            pad: 0,
        };
        let x = Tensor::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y.data(), x.data());

        conv.weight[0] = 0.0;
        let (y, _) = conv.forward(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_channel_mismatch_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = Conv2d::<f32>::new(3, 2, 3, 1, 1, Init::KaimingRelu, &mut rng);
        let x = Tensor::<f32>::zeros(&[2, 4, 4]);
        let err = conv.forward(&x).unwrap_err().to_string();
        assert!(err.contains('3') && err.contains('2'), "{err}");
    }

    #[test]
    fn conv_strided_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv2d::<f32>::new(3, 16, 3, 2, 1, Init::KaimingRelu, &mut rng);
        let x = Tensor::<f32>::zeros(&[3, 64, 64]);
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[16, 32, 32]);
    }

    #[test]
    fn dense_hand_values() {
        let dense = Dense::<f64> {
            weight: vec![2.0],
            bias: vec![3.0],
            in_dim: 1,
            out_dim: 1,
        };
        assert_eq!(dense.forward(&[1.0]).unwrap(), vec![5.0]);

        let eye = Dense::<f64> {
            weight: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0, 0.0],
            in_dim: 2,
            out_dim: 2,
        };
        assert_eq!(eye.forward(&[7.0, -2.0]).unwrap(), vec![7.0, -2.0]);
        assert!(eye.forward(&[1.0]).is_err());
    }

    #[test]
    fn activation_values() {
        assert_eq!(sigmoid(&[0.0f64]), vec![0.5]);
        assert_eq!(relu(&[-3.0f32, 0.0, 2.5]), vec![0.0, 0.0, 2.5]);

        for &x in &[500.0f64, -500.0] {
            let y = sigmoid(&[x])[0];
            assert!(y.is_finite());
            assert!(y > 0.0 && y < 1.0, "sigmoid({x}) = {y}");
        }
        for &x in &[500.0f32, -500.0] {
            let y = sigmoid(&[x])[0];
            assert!(y.is_finite());
            assert!(y > 0.0 && y < 1.0, "sigmoid({x}) = {y}");
        }
    }

    #[test]
    fn upsample_forward_and_backward() {
        let x = Tensor::from_vec(&[1, 1, 2], vec![1.0f32, 2.0]);
        let y = Upsample2x::forward(&x);
        assert_eq!(y.shape(), &[1, 2, 4]);
        assert_eq!(y.data(), &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);

        let g = Tensor::from_vec(&[1, 2, 4], vec![1.0f32; 8]);
        let gi = Upsample2x::backward(&g);
        assert_eq!(gi.data(), &[4.0, 4.0]);
    }
}
