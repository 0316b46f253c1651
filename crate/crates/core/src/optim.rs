//! Adam with bias-corrected moments.

use crate::autodiff::{Matrix, Scalar};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Adam<T> {
    lr: f64,
    step: u64,
    m: Vec<Matrix<T>>,
    v: Vec<Matrix<T>>,
}

impl<T: Scalar> Adam<T> {
    /// Zero moment buffers shaped like `params`.
    pub fn new<'a>(lr: f64, params: impl IntoIterator<Item = &'a Matrix<T>>) -> Self {
        let m: Vec<_> = params.into_iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        Self {
            lr,
            step: 0,
            v: m.clone(),
            m,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update in place. `grads[i]` pairs with the i-th param.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Matrix<T>>, grads: &[Matrix<T>]) -> Result<()> {
        let params: Vec<&mut Matrix<T>> = params.into_iter().collect();
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} params, {} grads, {} moment buffers", params.len(), grads.len(), self.m.len()),
            ));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::shape("adam_step", format!("{:?} / {:?} / {:?}", p.shape(), g.shape(), m.shape())));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let b1 = T::from_f64(BETA1);
        let b2 = T::from_f64(BETA2);
        let c1 = T::from_f64(1.0 - BETA1.powi(t));
        let c2 = T::from_f64(1.0 - BETA2.powi(t));
        let lr = T::from_f64(self.lr);
        let eps = T::from_f64(EPSILON);
        let one = T::one();
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((w, &g), m), v) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
