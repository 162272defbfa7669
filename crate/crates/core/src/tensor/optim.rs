//! Bias-corrected Adam over a model's flat parameter list.

use super::Scalar;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        AdamParams {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers mirroring the parameter slices they update.
#[derive(Debug, Clone, Default)]
pub struct AdamState<T> {
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new() -> Self {
        AdamState {
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update over parallel lists of parameter and gradient slices. The
    /// slice order must stay fixed across calls; buffers are allocated on
    /// first use and verified afterwards.
    pub fn step(&mut self, hyper: &AdamParams, params: &mut [&mut [T]], grads: &[&[T]]) {
        assert_eq!(params.len(), grads.len(), "param/grad list mismatch");
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::ZERO; p.len()]).collect();
            self.v = params.iter().map(|p| vec![T::ZERO; p.len()]).collect();
        }
        assert_eq!(self.m.len(), params.len(), "optimizer slot count changed");
        self.step += 1;
        let b1 = T::from_f64(hyper.beta1);
        let b2 = T::from_f64(hyper.beta2);
        let one_minus_b1 = T::ONE - b1;
        let one_minus_b2 = T::ONE - b2;
        let corr1 = T::from_f64(1.0 - hyper.beta1.powi(self.step as i32));
        let corr2 = T::from_f64(1.0 - hyper.beta2.powi(self.step as i32));
        let lr = T::from_f64(hyper.lr);
        let eps = T::from_f64(hyper.eps);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(param.len(), m.len(), "parameter slice resized");
            assert_eq!(param.len(), grad.len());
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + one_minus_b1 * g;
                v[i] = b2 * v[i] + one_minus_b2 * g * g;
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut w = vec![1.5f64, -0.5];
        let g = vec![0.0f64, 0.0];
        let mut state = AdamState::new();
        state.step(&AdamParams::with_lr(0.1), &mut [&mut w], &[&g]);
        assert_eq!(w, vec![1.5, -0.5]);
    }

    #[test]
    fn first_step_magnitude_is_lr() {
        // bias-corrected first step moves by ~lr in the gradient's direction
        for &g0 in &[0.3f64, -2.0, 5.0] {
            let mut w = vec![0.0f64];
            let g = vec![g0];
            let mut state = AdamState::new();
            state.step(&AdamParams::with_lr(0.05), &mut [&mut w], &[&g]);
            let moved = -w[0] / g0.signum();
            assert!((moved - 0.05).abs() < 1e-6, "step {moved} for grad {g0}");
        }
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // minimize (w - 3)^2
        let mut w = vec![0.0f64];
        let mut state = AdamState::new();
        let hyper = AdamParams::with_lr(0.05);
        for _ in 0..2000 {
            let g = vec![2.0 * (w[0] - 3.0)];
            state.step(&hyper, &mut [&mut w], &[&g]);
        }
        assert!((w[0] - 3.0).abs() < 1e-3, "converged to {}", w[0]);
    }

    #[test]
    fn deterministic_given_state() {
        let run = || {
            let mut w = vec![1.0f32, 2.0];
            let mut state = AdamState::new();
            for i in 0..10 {
                let g = vec![0.1 * (i as f32 + 1.0), -0.2];
                state.step(&AdamParams::with_lr(0.01), &mut [&mut w], &[&g]);
            }
            w
        };
        assert_eq!(run(), run());
    }
}
