//! Training loops: autoencoder reconstruction, one-to-many classifier heads
//! (frozen / fine-tuned) and per-tag 10-fold cross-validation.
//!
//! Batch items are evaluated by concurrent workers over fixed-size chunks;
//! gradients are reduced within each chunk sequentially and chunks are
//! folded in index order, so results are bit-identical for any worker
//! count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::tagging::{micro_metrics, PredictionMatrix, TagMatrix};
use crate::tensor::{bce, bce_backward, mse, mse_backward, AdamParams, AdamState, Scalar, Tensor};

use super::{Autoencoder, Classifier, ClassifierHead, Variant, LATENT_DIM};

/// Numeric precision a training run executes in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

/// Training hyperparameters. Every random choice flows from `seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub variant: Variant,
    pub precision: Precision,
    /// Early-stopping patience in epochs; `None` disables early stopping.
    pub early_stop_patience: Option<usize>,
}

impl TrainConfig {
    /// Autoencoder defaults: 100 epochs, batch 32, lr 1e-3.
    pub fn autoencoder(seed: u64) -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            lr: 1e-3,
            seed,
            variant: Variant::Frozen,
            precision: Precision::F32,
            early_stop_patience: None,
        }
    }

    /// Classifier defaults: 50 epochs with validation-F1 early stopping.
    pub fn classifier(seed: u64, variant: Variant) -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            lr: 1e-3,
            seed,
            variant,
            precision: Precision::F32,
            early_stop_patience: Some(10),
        }
    }
}

/// Fixed reduction chunk; independent of the worker count.
const REDUCE_CHUNK: usize = 4;

fn add_grads<T: Scalar>(acc: &mut [Vec<T>], other: &[Vec<T>]) {
    for (a, b) in acc.iter_mut().zip(other) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += *y;
        }
    }
}

fn scale_grads<T: Scalar>(grads: &mut [Vec<T>], factor: f64) {
    let f = T::from_f64(factor);
    for g in grads {
        for v in g.iter_mut() {
            *v *= f;
        }
    }
}

/// Evaluates `eval` over `items`, summing losses and gradients in a fixed
/// order regardless of parallelism.
fn accumulate_batch<T, F>(items: &[usize], eval: &F) -> Result<(f64, Vec<Vec<T>>)>
where
    T: Scalar,
    F: Fn(usize) -> Result<(f64, Vec<Vec<T>>)> + Sync,
{
    let partials: Vec<Result<(f64, Vec<Vec<T>>)>> = items
        .chunks(REDUCE_CHUNK)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|chunk| {
            let mut loss = 0.0f64;
            let mut acc: Option<Vec<Vec<T>>> = None;
            for &i in *chunk {
                let (l, g) = eval(i)?;
                loss += l;
                match acc.as_mut() {
                    None => acc = Some(g),
                    Some(a) => add_grads(a, &g),
                }
            }
            Ok((loss, acc.expect("non-empty chunk")))
        })
        .collect();
    let mut total_loss = 0.0f64;
    let mut total: Option<Vec<Vec<T>>> = None;
    for partial in partials {
        let (l, g) = partial?;
        total_loss += l;
        match total.as_mut() {
            None => total = Some(g),
            Some(a) => add_grads(a, &g),
        }
    }
    Ok((total_loss, total.expect("non-empty batch")))
}

fn shuffled(n_or_items: &[usize], seed: u64) -> Vec<usize> {
    let mut order = n_or_items.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}

fn audit_finite(loss: f64, stage: &str, detail: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericAudit {
            stage: stage.to_string(),
            detail: detail.to_string(),
        })
    }
}

/// Trains the reconstruction autoencoder on the given images (the caller
/// passes the training split). Returns the model and the per-epoch mean
/// training loss curve.
pub fn train_autoencoder<T: Scalar>(
    images: &[Tensor<T>],
    cfg: &TrainConfig,
) -> Result<(Autoencoder<T>, Vec<f64>)> {
    if images.is_empty() {
        return Err(Error::Training("autoencoder needs at least one image".into()));
    }
    let hw = (images[0].shape()[1], images[0].shape()[2]);
    let mut ae = Autoencoder::new(hw, cfg.seed);
    let mut adam = AdamState::new();
    let hyper = AdamParams::with_lr(cfg.lr);
    let all: Vec<usize> = (0..images.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let order = shuffled(&all, derive_seed(cfg.seed, 0x5ff1e + epoch as u64));
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let enc = &ae.encoder;
            let dec = &ae.decoder;
            let bh = enc.bottleneck_hw();
            let (loss_sum, mut grads) = accumulate_batch(batch, &|i: usize| {
                let x = &images[i];
                let (z, enc_cache) = enc.forward(x)?;
                let (recon, dec_cache) = dec.forward(&z, bh)?;
                let loss = mse(recon.data(), x.data())?;
                let g_recon = mse_backward(recon.data(), x.data());
                let (g_z, dec_grads) = dec.backward(&dec_cache, &g_recon);
                let (_, enc_grads) = enc.backward(&enc_cache, &g_z);
                let mut grads = enc_grads;
                grads.extend(dec_grads);
                Ok((loss, grads))
            })?;
            audit_finite(loss_sum, "autoencoder training", &format!("epoch {epoch}"))?;
            scale_grads(&mut grads, 1.0 / batch.len() as f64);
            let mut params = ae.encoder.params_mut();
            params.extend(ae.decoder.params_mut());
            let grad_refs: Vec<&[T]> = grads.iter().map(|g| g.as_slice()).collect();
            adam.step(&hyper, &mut params, &grad_refs);
            epoch_loss += loss_sum;
        }
        curve.push(epoch_loss / images.len() as f64);
    }
    Ok((ae, curve))
}

/// Encoder-only forward over a full image list, parallel with ordered
/// results.
pub fn encode_all<T: Scalar>(ae: &Autoencoder<T>, images: &[Tensor<T>]) -> Result<Vec<Vec<T>>> {
    images
        .par_iter()
        .map(|img| Ok(ae.encoder.forward(img)?.0))
        .collect()
}

/// A trained classifier with its training curve and validation outcome.
pub struct TrainedClassifier<T> {
    pub model: Classifier<T>,
    /// Per-epoch mean training BCE (up to the stopping epoch).
    pub curve: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_f1: f64,
}

fn truth_row<T: Scalar>(truth: &TagMatrix, p: usize) -> Vec<T> {
    (0..truth.n_tags())
        .map(|t| if truth.get(p, t) { T::ONE } else { T::ZERO })
        .collect()
}

/// Trains the one-to-many classifier. For the frozen variant the encoder is
/// copied bit-exactly from the autoencoder and only the head is fitted (on
/// cached latents); the fine-tune variant updates the encoder end to end.
/// Early stopping watches validation micro-F1 with the configured patience
/// and restores the best parameters.
pub fn train_classifier<T: Scalar>(
    images: &[Tensor<T>],
    latents: Option<&[Vec<T>]>,
    truth: &TagMatrix,
    train_idx: &[usize],
    val_idx: &[usize],
    ae: &Autoencoder<T>,
    cfg: &TrainConfig,
) -> Result<TrainedClassifier<T>> {
    let n_tags = truth.n_tags();
    if n_tags == 0 {
        return Err(Error::Training(
            "empty tag vocabulary: nothing to classify".into(),
        ));
    }
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Training("empty train or validation split".into()));
    }
    let mut head_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0xc1a55));
    let head = ClassifierHead::new(LATENT_DIM, n_tags, &mut head_rng);

    match cfg.variant {
        Variant::Frozen => {
            let computed;
            let latents = match latents {
                Some(l) => l,
                None => {
                    computed = encode_all(ae, images)?;
                    &computed
                }
            };
            let mut clf = Classifier {
                encoder: ae.encoder.clone(),
                head,
                variant: Variant::Frozen,
            };
            let targets: Vec<Vec<T>> = (0..truth.n_paintings())
                .map(|p| truth_row(truth, p))
                .collect();
            let outcome = train_head_early_stop(
                &mut clf.head,
                latents,
                &targets,
                train_idx,
                Some((val_idx, truth)),
                cfg,
            )?;
            Ok(TrainedClassifier {
                model: clf,
                curve: outcome.curve,
                best_epoch: outcome.best_epoch,
                best_val_f1: outcome.best_score,
            })
        }
        Variant::Finetune => train_finetune(images, truth, train_idx, val_idx, ae, head, cfg),
    }
}

struct HeadTrainOutcome {
    curve: Vec<f64>,
    best_epoch: usize,
    best_score: f64,
}

/// Shared head-only loop over fixed input vectors. When `val` is provided
/// the early-stopping score is validation micro-F1 (maximized); otherwise
/// the loop runs all epochs.
fn train_head_early_stop<T: Scalar>(
    head: &mut ClassifierHead<T>,
    inputs: &[Vec<T>],
    targets: &[Vec<T>],
    train_idx: &[usize],
    val: Option<(&[usize], &TagMatrix)>,
    cfg: &TrainConfig,
) -> Result<HeadTrainOutcome> {
    let mut adam = AdamState::new();
    let hyper = AdamParams::with_lr(cfg.lr);
    let mut curve = Vec::new();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params: Option<Vec<Vec<T>>> = None;
    let mut wait = 0usize;

    for epoch in 0..cfg.epochs {
        let order = shuffled(train_idx, derive_seed(cfg.seed, 0xbeef + epoch as u64));
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let head_ref = &*head;
            let (loss_sum, mut grads) = accumulate_batch(batch, &|i: usize| {
                let (probs, cache) = head_ref.forward(&inputs[i])?;
                let loss = bce(&probs, &targets[i])?;
                let g = bce_backward(&probs, &targets[i]);
                let (_, grads) = head_ref.backward(&cache, &g);
                Ok((loss, grads))
            })?;
            audit_finite(loss_sum, "head training", &format!("epoch {epoch}"))?;
            scale_grads(&mut grads, 1.0 / batch.len() as f64);
            let mut params = head.params_mut();
            let grad_refs: Vec<&[T]> = grads.iter().map(|g| g.as_slice()).collect();
            adam.step(&hyper, &mut params, &grad_refs);
            epoch_loss += loss_sum;
        }
        curve.push(epoch_loss / train_idx.len() as f64);

        let score = match val {
            Some((val_idx, truth)) => {
                let mut pred = TagMatrix::zeros(val_idx.len(), truth.n_tags());
                let mut vt = TagMatrix::zeros(val_idx.len(), truth.n_tags());
                for (row, &p) in val_idx.iter().enumerate() {
                    let (probs, _) = head.forward(&inputs[p])?;
                    for t in 0..truth.n_tags() {
                        pred.set(row, t, probs[t].to_f64() > 0.5);
                        vt.set(row, t, truth.get(p, t));
                    }
                }
                micro_metrics(&pred, &vt)?.2
            }
            // no validation data: keep training, score by epoch order
            None => epoch as f64,
        };
        if score > best_score + 1e-12 {
            best_score = score;
            best_epoch = epoch;
            best_params = Some(head.params().iter().map(|p| p.to_vec()).collect());
            wait = 0;
        } else {
            wait += 1;
            if let Some(patience) = cfg.early_stop_patience {
                if val.is_some() && wait > patience {
                    break;
                }
            }
        }
    }
    if let Some(best) = best_params {
        for (slot, data) in head.params_mut().into_iter().zip(best) {
            slot.copy_from_slice(&data);
        }
    }
    Ok(HeadTrainOutcome {
        curve,
        best_epoch,
        best_score,
    })
}

fn train_finetune<T: Scalar>(
    images: &[Tensor<T>],
    truth: &TagMatrix,
    train_idx: &[usize],
    val_idx: &[usize],
    ae: &Autoencoder<T>,
    head: ClassifierHead<T>,
    cfg: &TrainConfig,
) -> Result<TrainedClassifier<T>> {
    let mut clf = Classifier {
        encoder: ae.encoder.clone(),
        head,
        variant: Variant::Finetune,
    };
    let mut adam = AdamState::new();
    let hyper = AdamParams::with_lr(cfg.lr);
    let targets: Vec<Vec<T>> = (0..truth.n_paintings())
        .map(|p| truth_row(truth, p))
        .collect();
    let mut curve = Vec::new();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params: Option<Vec<Vec<T>>> = None;
    let mut wait = 0usize;

    for epoch in 0..cfg.epochs {
        let order = shuffled(train_idx, derive_seed(cfg.seed, 0xf17e + epoch as u64));
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            let enc = &clf.encoder;
            let head_ref = &clf.head;
            let (loss_sum, mut grads) = accumulate_batch(batch, &|i: usize| {
                let (z, enc_cache) = enc.forward(&images[i])?;
                let (probs, head_cache) = head_ref.forward(&z)?;
                let loss = bce(&probs, &targets[i])?;
                let g = bce_backward(&probs, &targets[i]);
                let (g_z, head_grads) = head_ref.backward(&head_cache, &g);
                let (_, enc_grads) = enc.backward(&enc_cache, &g_z);
                let mut grads = enc_grads;
                grads.extend(head_grads);
                Ok((loss, grads))
            })?;
            audit_finite(loss_sum, "finetune training", &format!("epoch {epoch}"))?;
            scale_grads(&mut grads, 1.0 / batch.len() as f64);
            let mut params = clf.encoder.params_mut();
            params.extend(clf.head.params_mut());
            let grad_refs: Vec<&[T]> = grads.iter().map(|g| g.as_slice()).collect();
            adam.step(&hyper, &mut params, &grad_refs);
            epoch_loss += loss_sum;
        }
        curve.push(epoch_loss / train_idx.len() as f64);

        let mut pred = TagMatrix::zeros(val_idx.len(), truth.n_tags());
        let mut vt = TagMatrix::zeros(val_idx.len(), truth.n_tags());
        for (row, &p) in val_idx.iter().enumerate() {
            let probs = clf.forward(&images[p])?;
            for t in 0..truth.n_tags() {
                pred.set(row, t, probs[t].to_f64() > 0.5);
                vt.set(row, t, truth.get(p, t));
            }
        }
        let score = micro_metrics(&pred, &vt)?.2;
        if score > best_score + 1e-12 {
            best_score = score;
            best_epoch = epoch;
            let mut snapshot: Vec<Vec<T>> = clf.encoder.params().iter().map(|p| p.to_vec()).collect();
            snapshot.extend(clf.head.params().iter().map(|p| p.to_vec()));
            best_params = Some(snapshot);
            wait = 0;
        } else {
            wait += 1;
            if let Some(patience) = cfg.early_stop_patience {
                if wait > patience {
                    break;
                }
            }
        }
    }
    if let Some(best) = best_params {
        let mut slots = clf.encoder.params_mut();
        slots.extend(clf.head.params_mut());
        for (slot, data) in slots.into_iter().zip(best) {
            slot.copy_from_slice(&data);
        }
    }
    Ok(TrainedClassifier {
        model: clf,
        curve,
        best_epoch,
        best_val_f1: best_score,
    })
}

/// Probability matrix over a full image list.
pub fn predict<T: Scalar>(clf: &Classifier<T>, images: &[Tensor<T>]) -> Result<PredictionMatrix> {
    let rows: Vec<Vec<T>> = images
        .par_iter()
        .map(|img| clf.forward(img))
        .collect::<Result<_>>()?;
    let mut out = PredictionMatrix::zeros(images.len(), clf.n_tags());
    for (p, row) in rows.iter().enumerate() {
        for (t, v) in row.iter().enumerate() {
            out.set(p, t, v.to_f64() as f32);
        }
    }
    Ok(out)
}

/// Per-fold validation losses of a one-to-one tag model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvResult {
    pub fold_losses: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Outcome of one-to-one training for a single tag.
pub enum OneToOneOutcome<T> {
    /// Fewer than 10 positives in the training split.
    Skipped { positives: usize },
    /// All-positive or all-negative in training: the optimum is predicting
    /// the clamped base rate; recorded analytically without training.
    Degenerate { all_positive: bool, analytic_loss: f64 },
    Trained {
        cv: CvResult,
        model: ClassifierHead<T>,
    },
}

/// 10-fold cross-validation of a single-output head for one tag, over the
/// training split only. Folds are seed-deterministic; each fold trains with
/// early stopping on the fold's validation loss and reports the best value.
/// The returned model is retrained on the full training split.
pub fn train_one_to_one<T: Scalar>(
    latents: &[Vec<T>],
    truth_col: &[bool],
    train_idx: &[usize],
    cfg: &TrainConfig,
    folds: usize,
) -> Result<OneToOneOutcome<T>> {
    assert!(folds >= 2);
    let positives = train_idx.iter().filter(|&&p| truth_col[p]).count();
    if positives == train_idx.len() || positives == 0 {
        let all_positive = positives == train_idx.len();
        // clamped certainty: -ln(1 - eps)
        let analytic_loss = -(1.0f64 - 1e-7).ln();
        return Ok(OneToOneOutcome::Degenerate {
            all_positive,
            analytic_loss,
        });
    }
    if positives < 10 {
        return Ok(OneToOneOutcome::Skipped { positives });
    }

    let order = shuffled(train_idx, derive_seed(cfg.seed, 0xf01d));
    let targets: Vec<Vec<T>> = truth_col
        .iter()
        .map(|&b| vec![if b { T::ONE } else { T::ZERO }])
        .collect();

    let mut fold_losses = Vec::with_capacity(folds);
    for fold in 0..folds {
        let val_fold: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds == fold)
            .map(|(_, &p)| p)
            .collect();
        let train_fold: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds != fold)
            .map(|(_, &p)| p)
            .collect();
        let mut head = ClassifierHead::new(
            LATENT_DIM,
            1,
            &mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0xabcd + fold as u64)),
        );
        let best = train_single_output_fold(&mut head, latents, &targets, &train_fold, &val_fold, cfg)?;
        fold_losses.push(best);
    }
    let mean = fold_losses.iter().sum::<f64>() / folds as f64;
    let sd = if folds > 1 {
        (fold_losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (folds - 1) as f64).sqrt()
    } else {
        0.0
    };

    // final model on the full training split
    let mut model = ClassifierHead::new(
        LATENT_DIM,
        1,
        &mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0xf17a1)),
    );
    let mut final_cfg = cfg.clone();
    final_cfg.early_stop_patience = None;
    train_head_early_stop(&mut model, latents, &targets, train_idx, None, &final_cfg)?;

    Ok(OneToOneOutcome::Trained {
        cv: CvResult {
            fold_losses,
            mean,
            sd,
        },
        model,
    })
}

/// Trains one fold and returns the best validation BCE seen (early stopping
/// with the configured patience, minimizing the fold's validation loss).
fn train_single_output_fold<T: Scalar>(
    head: &mut ClassifierHead<T>,
    inputs: &[Vec<T>],
    targets: &[Vec<T>],
    train_fold: &[usize],
    val_fold: &[usize],
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut adam = AdamState::new();
    let hyper = AdamParams::with_lr(cfg.lr);
    let patience = cfg.early_stop_patience.unwrap_or(8);
    let mut best = f64::INFINITY;
    let mut wait = 0usize;
    for epoch in 0..cfg.epochs {
        let order = shuffled(train_fold, derive_seed(cfg.seed, 0xcf0 + epoch as u64));
        for batch in order.chunks(cfg.batch_size) {
            let head_ref = &*head;
            let (loss_sum, mut grads) = accumulate_batch(batch, &|i: usize| {
                let (probs, cache) = head_ref.forward(&inputs[i])?;
                let loss = bce(&probs, &targets[i])?;
                let g = bce_backward(&probs, &targets[i]);
                let (_, grads) = head_ref.backward(&cache, &g);
                Ok((loss, grads))
            })?;
            audit_finite(loss_sum, "cv fold training", &format!("epoch {epoch}"))?;
            scale_grads(&mut grads, 1.0 / batch.len() as f64);
            let mut params = head.params_mut();
            let grad_refs: Vec<&[T]> = grads.iter().map(|g| g.as_slice()).collect();
            adam.step(&hyper, &mut params, &grad_refs);
        }
        let mut val_loss = 0.0f64;
        for &p in val_fold {
            let (probs, _) = head.forward(&inputs[p])?;
            val_loss += bce(&probs, &targets[p])?;
        }
        val_loss /= val_fold.len() as f64;
        if val_loss < best - 1e-12 {
            best = val_loss;
            wait = 0;
        } else {
            wait += 1;
            if wait > patience {
                break;
            }
        }
    }
    Ok(best)
}
