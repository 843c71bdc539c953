use super::{HyperParams, ModelError, ModelWeights};
use crate::Real;

/// Adam moment estimates and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: ModelWeights<T>,
    pub v: ModelWeights<T>,
    pub t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(weights: &ModelWeights<T>) -> Self {
        Self::with_hyper(weights, &weights.hyper)
    }

    pub fn with_hyper(weights: &ModelWeights<T>, hp: &HyperParams) -> Self {
        Self {
            m: weights.zeros_like(),
            v: weights.zeros_like(),
            t: 0,
            lr: hp.learning_rate,
            beta1: hp.adam_beta1,
            beta2: hp.adam_beta2,
            eps: hp.adam_eps,
        }
    }

    /// One bias-corrected Adam update. Gradients are checked for finiteness
    /// before anything is modified.
    pub fn step(&mut self, weights: &mut ModelWeights<T>, grads: &ModelWeights<T>) -> Result<(), ModelError> {
        let gblocks = grads.blocks();
        if gblocks.len() != self.m.blocks().len() {
            return Err(ModelError::Shape("gradient blocks do not match the optimizer state".into()));
        }
        for (name, g) in &gblocks {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(ModelError::NonFiniteGradient(name.clone()));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c = |x: f64| T::from(x).unwrap();
        let (b1, b2) = (c(self.beta1), c(self.beta2));
        let corr1 = c(1.0 - self.beta1.powi(t));
        let corr2 = c(1.0 - self.beta2.powi(t));
        let (lr, eps) = (c(self.lr), c(self.eps));
        let params = weights.blocks_mut();
        for ((((name, w), (_, g)), (_, m)), (_, v)) in
            params.into_iter().zip(gblocks).zip(self.m.blocks_mut()).zip(self.v.blocks_mut())
        {
            if w.len() != g.len() {
                return Err(ModelError::Shape(format!("gradient block {name} has wrong length")));
            }
            for i in 0..w.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
