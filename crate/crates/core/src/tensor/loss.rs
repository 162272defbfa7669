//! Scalar losses with f64-accumulated reductions and exact backward passes.

use crate::error::{Error, Result};

use super::Scalar;

const BCE_EPS: f64 = 1e-7;

/// Mean squared error over all elements. The reduction accumulates in f64;
/// the result is returned both as `T` (for training) and f64 (for checks).
pub fn mse<T: Scalar>(pred: &[T], target: &[T]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "mse over {} vs {} elements",
            pred.len(),
            target.len()
        )));
    }
    let mut acc = 0.0f64;
    for (&p, &t) in pred.iter().zip(target) {
        let d = p.to_f64() - t.to_f64();
        acc += d * d;
    }
    Ok(acc / pred.len() as f64)
}

/// Gradient of [`mse`] w.r.t. `pred`.
pub fn mse_backward<T: Scalar>(pred: &[T], target: &[T]) -> Vec<T> {
    let n = T::from_f64(pred.len() as f64);
    let two = T::from_f64(2.0);
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| two * (p - t) / n)
        .collect()
}

/// Mean binary cross-entropy; probabilities are clamped to
/// `[1e-7, 1 - 1e-7]` before the logs.
pub fn bce<T: Scalar>(pred_prob: &[T], target: &[T]) -> Result<f64> {
    if pred_prob.len() != target.len() {
        return Err(Error::Shape(format!(
            "bce over {} vs {} elements",
            pred_prob.len(),
            target.len()
        )));
    }
    let mut acc = 0.0f64;
    for (&p, &t) in pred_prob.iter().zip(target) {
        let pc = p.to_f64().clamp(BCE_EPS, 1.0 - BCE_EPS);
        let t = t.to_f64();
        acc -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
    }
    Ok(acc / pred_prob.len() as f64)
}

/// Gradient of [`bce`] w.r.t. the probabilities. Elements clamped by the
/// loss receive zero gradient, matching what finite differences observe.
pub fn bce_backward<T: Scalar>(pred_prob: &[T], target: &[T]) -> Vec<T> {
    let n = pred_prob.len() as f64;
    pred_prob
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let pf = p.to_f64();
            if !(BCE_EPS..=1.0 - BCE_EPS).contains(&pf) {
                return T::ZERO;
            }
            T::from_f64((pf - t.to_f64()) / (pf * (1.0 - pf)) / n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_zero_at_target() {
        let v = [0.3f32, -1.0, 2.0];
        assert_eq!(mse(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn bce_at_half_is_ln2() {
        let pred = [0.5f64; 8];
        let target = [1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let loss = bce(&pred, &target).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn bce_extreme_probabilities_finite() {
        let loss = bce(&[1.0f32, 0.0], &[0.0, 1.0]).unwrap();
        assert!(loss.is_finite());
        assert!(loss > 10.0, "clamped log-loss should be large: {loss}");
    }

    #[test]
    fn shape_mismatch_errors() {
        assert!(mse(&[1.0f32], &[1.0, 2.0]).is_err());
        assert!(bce(&[0.5f32], &[1.0, 0.0]).is_err());
    }
}
