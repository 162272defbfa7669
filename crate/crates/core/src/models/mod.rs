//! Model architectures: the convolutional autoencoder, the encoder+MLP
//! classifier (frozen and fine-tuned variants), training loops, non-neural
//! baselines and model serialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::ImageTensor;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::tensor::{
    relu, relu_backward, sigmoid, sigmoid_backward, Conv2d, Dense, Init, Scalar, Tensor,
};

mod baselines;
mod serialize;
mod train;

pub use baselines::{downscaled_features, knn_predict, BaselineKind, FeatureSource};
pub use serialize::{load_autoencoder, load_classifier, save_autoencoder, save_classifier};
pub use train::{
    encode_all, train_autoencoder, train_classifier, train_one_to_one, CvResult, OneToOneOutcome,
    TrainConfig, TrainedClassifier,
};

/// Width of the latent representation. 192 values equal a downscaled
/// 8x8x3 image, which makes the compression-rate-matched pixel baseline
/// literal.
pub const LATENT_DIM: usize = 192;

/// Whether classifier training updates the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Encoder weights stay bit-identical (Autoencoder-MLP).
    Frozen,
    /// Encoder weights receive gradient updates (Autoencoder-MLP*).
    Finetune,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Frozen => write!(f, "frozen"),
            Variant::Finetune => write!(f, "finetune"),
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frozen" => Ok(Variant::Frozen),
            "finetune" => Ok(Variant::Finetune),
            other => Err(Error::Config(format!(
                "unknown variant {other:?} (expected frozen|finetune)"
            ))),
        }
    }
}

/// Converts an HWC image in `[0,1]` to the CHW tensor layout the models use.
pub fn image_to_chw<T: Scalar>(img: &ImageTensor) -> Tensor<T> {
    let (h, w, c) = (img.height, img.width, img.channels);
    let mut data = vec![T::ZERO; c * h * w];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                data[ch * h * w + y * w + x] = T::from_f64(img.get(y, x, ch) as f64);
            }
        }
    }
    Tensor::from_vec(&[c, h, w], data)
}

/// Three strided conv blocks into a dense bottleneck:
/// 3 -> 16 -> 32 -> 64 channels, each halving the resolution, then
/// `64*(H/8)*(W/8) -> 192`.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    pub conv1: Conv2d<T>,
    pub conv2: Conv2d<T>,
    pub conv3: Conv2d<T>,
    pub fc: Dense<T>,
    pub input_hw: (usize, usize),
}

/// Forward intermediates the encoder backward pass needs.
pub struct EncoderCache<T> {
    c1: crate::tensor::layers::ConvCache<T>,
    a1: Tensor<T>,
    c2: crate::tensor::layers::ConvCache<T>,
    a2: Tensor<T>,
    c3: crate::tensor::layers::ConvCache<T>,
    a3: Tensor<T>,
}

impl<T: Scalar> Encoder<T> {
    pub fn new(input_hw: (usize, usize), rng: &mut ChaCha8Rng) -> Self {
        let (h, w) = input_hw;
        assert!(
            h % 8 == 0 && w % 8 == 0,
            "encoder input must be divisible by 8, got {h}x{w}"
        );
        Encoder {
            conv1: Conv2d::new(3, 16, 3, 2, 1, Init::KaimingRelu, rng),
            conv2: Conv2d::new(16, 32, 3, 2, 1, Init::KaimingRelu, rng),
            conv3: Conv2d::new(32, 64, 3, 2, 1, Init::KaimingRelu, rng),
            fc: Dense::new(64 * (h / 8) * (w / 8), LATENT_DIM, Init::KaimingRelu, rng),
            input_hw,
        }
    }

    pub fn bottleneck_hw(&self) -> (usize, usize) {
        (self.input_hw.0 / 8, self.input_hw.1 / 8)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Vec<T>, EncoderCache<T>)> {
        let (y1, c1) = self.conv1.forward(x)?;
        let a1 = Tensor::from_vec(y1.shape(), relu(y1.data()));
        let (y2, c2) = self.conv2.forward(&a1)?;
        let a2 = Tensor::from_vec(y2.shape(), relu(y2.data()));
        let (y3, c3) = self.conv3.forward(&a2)?;
        let a3 = Tensor::from_vec(y3.shape(), relu(y3.data()));
        let z = self.fc.forward(a3.data())?;
        Ok((
            z,
            EncoderCache {
                c1,
                a1,
                c2,
                a2,
                c3,
                a3,
            },
        ))
    }

    /// Backward from latent gradient; returns the input-image gradient plus
    /// parameter gradients in [`Encoder::param_order`] order.
    pub fn backward(&self, cache: &EncoderCache<T>, grad_z: &[T]) -> (Tensor<T>, Vec<Vec<T>>) {
        let (g_a3, g_fc_w, g_fc_b) = self.fc.backward(cache.a3.data(), grad_z);
        let g_y3 = relu_backward(cache.a3.data(), &g_a3);
        let g_y3 = Tensor::from_vec(cache.a3.shape(), g_y3);
        let (g_a2, g_c3_w, g_c3_b) = self.conv3.backward(&cache.c3, &g_y3);
        let g_y2 = relu_backward(cache.a2.data(), g_a2.data());
        let g_y2 = Tensor::from_vec(cache.a2.shape(), g_y2);
        let (g_a1, g_c2_w, g_c2_b) = self.conv2.backward(&cache.c2, &g_y2);
        let g_y1 = relu_backward(cache.a1.data(), g_a1.data());
        let g_y1 = Tensor::from_vec(cache.a1.shape(), g_y1);
        let (g_x, g_c1_w, g_c1_b) = self.conv1.backward(&cache.c1, &g_y1);
        (
            g_x,
            vec![g_c1_w, g_c1_b, g_c2_w, g_c2_b, g_c3_w, g_c3_b, g_fc_w, g_fc_b],
        )
    }

    pub fn params(&self) -> Vec<&[T]> {
        vec![
            &self.conv1.weight,
            &self.conv1.bias,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.conv3.weight,
            &self.conv3.bias,
            &self.fc.weight,
            &self.fc.bias,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.conv3.weight,
            &mut self.conv3.bias,
            &mut self.fc.weight,
            &mut self.fc.bias,
        ]
    }

    /// Order-insensitive digest of the parameter bits; used to verify the
    /// frozen-variant contract.
    pub fn digest(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        for slice in self.params() {
            for v in slice {
                for b in v.to_f64().to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x100000001b3);
                }
            }
        }
        h
    }
}

/// Mirror of the encoder: dense expansion, then three upsample+conv blocks
/// ending in a sigmoid back to `[3, H, W]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoder<T> {
    pub fc: Dense<T>,
    pub conv1: Conv2d<T>,
    pub conv2: Conv2d<T>,
    pub conv3: Conv2d<T>,
}

pub struct DecoderCache<T> {
    z: Vec<T>,
    r0: Vec<T>,
    u1: Tensor<T>,
    c1: crate::tensor::layers::ConvCache<T>,
    a1: Tensor<T>,
    u2: Tensor<T>,
    c2: crate::tensor::layers::ConvCache<T>,
    a2: Tensor<T>,
    u3: Tensor<T>,
    c3: crate::tensor::layers::ConvCache<T>,
    out: Tensor<T>,
}

impl<T: Scalar> Decoder<T> {
    pub fn new(input_hw: (usize, usize), rng: &mut ChaCha8Rng) -> Self {
        let (h, w) = input_hw;
        Decoder {
            fc: Dense::new(LATENT_DIM, 64 * (h / 8) * (w / 8), Init::KaimingRelu, rng),
            conv1: Conv2d::new(64, 32, 3, 1, 1, Init::KaimingRelu, rng),
            conv2: Conv2d::new(32, 16, 3, 1, 1, Init::KaimingRelu, rng),
            conv3: Conv2d::new(16, 3, 3, 1, 1, Init::XavierSigmoid, rng),
        }
    }

    pub fn forward(&self, z: &[T], bottleneck_hw: (usize, usize)) -> Result<(Tensor<T>, DecoderCache<T>)> {
        let (bh, bw) = bottleneck_hw;
        let y0 = self.fc.forward(z)?;
        let r0 = relu(&y0);
        let x0 = Tensor::from_vec(&[64, bh, bw], r0.clone());
        let u1 = crate::tensor::Upsample2x::forward(&x0);
        let (y1, c1) = self.conv1.forward(&u1)?;
        let a1 = Tensor::from_vec(y1.shape(), relu(y1.data()));
        let u2 = crate::tensor::Upsample2x::forward(&a1);
        let (y2, c2) = self.conv2.forward(&u2)?;
        let a2 = Tensor::from_vec(y2.shape(), relu(y2.data()));
        let u3 = crate::tensor::Upsample2x::forward(&a2);
        let (y3, c3) = self.conv3.forward(&u3)?;
        let out = Tensor::from_vec(y3.shape(), sigmoid(y3.data()));
        Ok((
            out.clone(),
            DecoderCache {
                z: z.to_vec(),
                r0,
                u1,
                c1,
                a1,
                u2,
                c2,
                a2,
                u3,
                c3,
                out,
            },
        ))
    }

    pub fn backward(&self, cache: &DecoderCache<T>, grad_out: &[T]) -> (Vec<T>, Vec<Vec<T>>) {
        let g_y3 = sigmoid_backward(cache.out.data(), grad_out);
        let g_y3 = Tensor::from_vec(cache.out.shape(), g_y3);
        let (g_u3, g_c3_w, g_c3_b) = self.conv3.backward(&cache.c3, &g_y3);
        let g_a2 = crate::tensor::Upsample2x::backward(&g_u3);
        debug_assert_eq!(g_a2.shape(), cache.a2.shape());
        let g_y2 = relu_backward(cache.a2.data(), g_a2.data());
        let g_y2 = Tensor::from_vec(cache.a2.shape(), g_y2);
        let (g_u2, g_c2_w, g_c2_b) = self.conv2.backward(&cache.c2, &g_y2);
        let g_a1 = crate::tensor::Upsample2x::backward(&g_u2);
        let g_y1 = relu_backward(cache.a1.data(), g_a1.data());
        let g_y1 = Tensor::from_vec(cache.a1.shape(), g_y1);
        let (g_u1, g_c1_w, g_c1_b) = self.conv1.backward(&cache.c1, &g_y1);
        let g_x0 = crate::tensor::Upsample2x::backward(&g_u1);
        let g_y0 = relu_backward(&cache.r0, g_x0.data());
        let (g_z, g_fc_w, g_fc_b) = self.fc.backward(&cache.z, &g_y0);
        (
            g_z,
            vec![g_fc_w, g_fc_b, g_c1_w, g_c1_b, g_c2_w, g_c2_b, g_c3_w, g_c3_b],
        )
    }

    pub fn params(&self) -> Vec<&[T]> {
        vec![
            &self.fc.weight,
            &self.fc.bias,
            &self.conv1.weight,
            &self.conv1.bias,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.conv3.weight,
            &self.conv3.bias,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            &mut self.fc.weight,
            &mut self.fc.bias,
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.conv3.weight,
            &mut self.conv3.bias,
        ]
    }
}

/// The reconstruction model.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T> {
    pub encoder: Encoder<T>,
    pub decoder: Decoder<T>,
}

impl<T: Scalar> Autoencoder<T> {
    pub fn new(input_hw: (usize, usize), seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        Autoencoder {
            encoder: Encoder::new(input_hw, &mut rng),
            decoder: Decoder::new(input_hw, &mut rng),
        }
    }

    pub fn reconstruct(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (z, _) = self.encoder.forward(x)?;
        Ok(self.decoder.forward(&z, self.encoder.bottleneck_hw())?.0)
    }
}

/// Deterministic encoder-only forward pass.
pub fn encode<T: Scalar>(model: &Autoencoder<T>, image: &Tensor<T>) -> Result<Vec<T>> {
    Ok(model.encoder.forward(image)?.0)
}

/// MLP head on top of the latent: `192 -> 128 -> n_out`, sigmoid outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead<T> {
    pub fc1: Dense<T>,
    pub fc2: Dense<T>,
}

pub struct HeadCache<T> {
    input: Vec<T>,
    h: Vec<T>,
    probs: Vec<T>,
}

impl<T: Scalar> ClassifierHead<T> {
    pub fn new(in_dim: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        ClassifierHead {
            fc1: Dense::new(in_dim, 128, Init::KaimingRelu, rng),
            fc2: Dense::new(128, n_out, Init::XavierSigmoid, rng),
        }
    }

    pub fn n_out(&self) -> usize {
        self.fc2.out_dim
    }

    pub fn forward(&self, input: &[T]) -> Result<(Vec<T>, HeadCache<T>)> {
        let h = relu(&self.fc1.forward(input)?);
        let logits = self.fc2.forward(&h)?;
        let probs = sigmoid(&logits);
        Ok((
            probs.clone(),
            HeadCache {
                input: input.to_vec(),
                h,
                probs,
            },
        ))
    }

    /// Backward from probability-space gradients; returns the gradient
    /// w.r.t. the head input plus `[fc1.w, fc1.b, fc2.w, fc2.b]` grads.
    pub fn backward(&self, cache: &HeadCache<T>, grad_probs: &[T]) -> (Vec<T>, Vec<Vec<T>>) {
        let g_logits = sigmoid_backward(&cache.probs, grad_probs);
        let (g_h, g2_w, g2_b) = self.fc2.backward(&cache.h, &g_logits);
        let g_h = relu_backward(&cache.h, &g_h);
        let (g_in, g1_w, g1_b) = self.fc1.backward(&cache.input, &g_h);
        (g_in, vec![g1_w, g1_b, g2_w, g2_b])
    }

    pub fn params(&self) -> Vec<&[T]> {
        vec![
            &self.fc1.weight,
            &self.fc1.bias,
            &self.fc2.weight,
            &self.fc2.bias,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
        ]
    }
}

/// Encoder plus MLP head; the variant records whether the encoder was
/// trainable when the head was fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier<T> {
    pub encoder: Encoder<T>,
    pub head: ClassifierHead<T>,
    pub variant: Variant,
}

impl<T: Scalar> Classifier<T> {
    pub fn n_tags(&self) -> usize {
        self.head.n_out()
    }

    /// Full forward pass from an image.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Vec<T>> {
        let (z, _) = self.encoder.forward(x)?;
        Ok(self.head.forward(&z)?.0)
    }

    /// Gradient of one output probability w.r.t. the input image, for
    /// saliency attribution. Also returns the forward probabilities.
    pub fn input_gradient(&self, x: &Tensor<T>, output_index: usize) -> Result<(Vec<T>, Tensor<T>)> {
        let (z, enc_cache) = self.encoder.forward(x)?;
        let (probs, head_cache) = self.head.forward(&z)?;
        let mut seed = vec![T::ZERO; probs.len()];
        seed[output_index] = T::ONE;
        let (g_z, _) = self.head.backward(&head_cache, &seed);
        let (g_x, _) = self.encoder.backward(&enc_cache, &g_z);
        Ok((probs, g_x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoder_produces_latent_192() {
        let ae = Autoencoder::<f32>::new((64, 64), 7);
        let x = Tensor::zeros(&[3, 64, 64]);
        let z = encode(&ae, &x).unwrap();
        assert_eq!(z.len(), LATENT_DIM);
    }

    #[test]
    fn decoder_output_matches_input_shape() {
        for hw in [(64, 64), (8, 8)] {
            let ae = Autoencoder::<f32>::new(hw, 3);
            let x = Tensor::zeros(&[3, hw.0, hw.1]);
            let y = ae.reconstruct(&x).unwrap();
            assert_eq!(y.shape(), &[3, hw.0, hw.1]);
        }
    }

    #[test]
    fn identical_images_identical_latents() {
        let ae = Autoencoder::<f32>::new((64, 64), 9);
        let mut img = ImageTensor::zeros(64, 64);
        img.set(5, 6, 0, 0.7);
        let a = encode(&ae, &image_to_chw(&img)).unwrap();
        let b = encode(&ae, &image_to_chw(&img)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zeroed_final_layer_outputs_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = Encoder::<f32>::new((64, 64), &mut rng);
        let mut head = ClassifierHead::new(LATENT_DIM, 5, &mut rng);
        head.fc2.weight.iter_mut().for_each(|w| *w = 0.0);
        head.fc2.bias.iter_mut().for_each(|b| *b = 0.0);
        let clf = Classifier {
            encoder: enc,
            head,
            variant: Variant::Frozen,
        };
        let x = Tensor::from_vec(&[3, 64, 64], vec![0.3; 3 * 64 * 64]);
        let probs = clf.forward(&x).unwrap();
        assert!(probs.iter().all(|&p| p == 0.5), "{probs:?}");
    }

    #[test]
    fn digest_changes_with_parameters() {
        let mut ae = Autoencoder::<f32>::new((64, 64), 5);
        let before = ae.encoder.digest();
        ae.encoder.fc.bias[0] += 1.0;
        assert_ne!(before, ae.encoder.digest());
    }

    #[test]
    fn full_stack_gradient_check_miniature() {
        // encoder + head + bce on an 8x8 input, f64, sampled coordinates
        use crate::tensor::{bce, bce_backward, grad_check};
        use rand::Rng;

        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let encoder = Encoder::<f64>::new((8, 8), &mut rng);
        let head = ClassifierHead::<f64>::new(LATENT_DIM, 3, &mut rng);
        let x: Vec<f64> = (0..3 * 8 * 8).map(|_| rng.gen_range(0.0..1.0)).collect();
        let targets = [1.0, 0.0, 1.0];

        // parameter vector: encoder params, head params, then the input
        let enc_lens: Vec<usize> = encoder.params().iter().map(|p| p.len()).collect();
        let head_lens: Vec<usize> = head.params().iter().map(|p| p.len()).collect();
        let mut base: Vec<f64> = Vec::new();
        for p in encoder.params() {
            base.extend_from_slice(p);
        }
        for p in head.params() {
            base.extend_from_slice(p);
        }
        base.extend_from_slice(&x);

        let unpack = |v: &[f64]| -> (Encoder<f64>, ClassifierHead<f64>, Vec<f64>) {
            let mut enc = encoder.clone();
            let mut hd = head.clone();
            let mut off = 0usize;
            for (slot, len) in enc.params_mut().into_iter().zip(&enc_lens) {
                slot.copy_from_slice(&v[off..off + len]);
                off += len;
            }
            for (slot, len) in hd.params_mut().into_iter().zip(&head_lens) {
                slot.copy_from_slice(&v[off..off + len]);
                off += len;
            }
            (enc, hd, v[off..].to_vec())
        };

        let mut f = |v: &[f64]| -> f64 {
            let (enc, hd, xin) = unpack(v);
            let (z, _) = enc.forward(&Tensor::from_vec(&[3, 8, 8], xin)).unwrap();
            let (probs, _) = hd.forward(&z).unwrap();
            bce(&probs, &targets).unwrap()
        };

        // analytic gradients
        let (z, enc_cache) = encoder
            .forward(&Tensor::from_vec(&[3, 8, 8], x.clone()))
            .unwrap();
        let (probs, head_cache) = head.forward(&z).unwrap();
        let g_probs = bce_backward(&probs, &targets);
        let (g_z, head_grads) = head.backward(&head_cache, &g_probs);
        let (g_x, enc_grads) = encoder.backward(&enc_cache, &g_z);
        let mut analytic: Vec<f64> = Vec::new();
        for g in enc_grads {
            analytic.extend(g);
        }
        for g in head_grads {
            analytic.extend(g);
        }
        analytic.extend(g_x.data());

        // sample 250 coordinates; the vector has tens of thousands
        let mut coords: Vec<usize> = Vec::new();
        for _ in 0..250 {
            coords.push(rng.gen_range(0..base.len()));
        }
        coords.sort_unstable();
        coords.dedup();

        let report = grad_check(&mut f, &base, &analytic, Some(&coords));
        assert!(
            report.passed(),
            "full stack max rel err {}",
            report.max_rel_err
        );
    }
}
