use crate::diffcore::Tensor;
use crate::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates for one parameter group.
///
/// Lives outside any graph; parameters are plain tensors updated in place.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        Self {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam descent step: `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    ///
    /// For ascent, pass negated gradients.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        let next = self.step + 1;
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(Error::Shape(format!(
                    "parameter {i}: param {:?}, grad {:?}, moments {:?}",
                    p.shape(),
                    g.shape(),
                    self.m[i].shape()
                )));
            }
            if let Some(bad) = g.data().iter().position(|x| !x.is_finite()) {
                return Err(Error::Diverged {
                    step: next,
                    detail: format!("gradient of parameter {i} has non-finite entry {bad}"),
                });
            }
        }
        self.step = next;
        let bc1 = 1.0 - BETA1.powi(next as i32);
        let bc2 = 1.0 - BETA2.powi(next as i32);
        for ((p, g), (m, v)) in params.into_iter().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let (pd, gd) = (p.data_mut(), g.data());
            for (k, x) in pd.iter_mut().enumerate() {
                let mk = &mut m.data_mut()[k];
                *mk = BETA1 * *mk + (1.0 - BETA1) * gd[k];
                let vk = &mut v.data_mut()[k];
                *vk = BETA2 * *vk + (1.0 - BETA2) * gd[k] * gd[k];
                let m_hat = m.data()[k] / bc1;
                let v_hat = v.data()[k] / bc2;
                *x -= lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_noop() {
        let mut p = Tensor::filled(&[2, 2], 0.3);
        let before = p.clone();
        let mut adam = AdamState::new(&[&p]);
        adam.step(vec![&mut p], &[Tensor::zeros(&[2, 2])], 1e-3).unwrap();
        assert_eq!(p, before);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [0.37, -2.5, 1e-3] {
            let mut p = Tensor::scalar(1.0);
            let mut adam = AdamState::new(&[&p]);
            adam.step(vec![&mut p], &[Tensor::scalar(g)], 0.01).unwrap();
            // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
            let expected = 1.0 - 0.01 * g / (g.abs() + EPSILON);
            assert!((p.item() - expected).abs() < 1e-15);
            assert!(((1.0 - p.item()) - 0.01 * g.signum()).abs() < 1e-7);
        }
    }

    #[test]
    fn two_steps_match_recurrence() {
        let (g, lr) = (0.8, 1e-3);
        let mut p = Tensor::scalar(0.5);
        let mut adam = AdamState::new(&[&p]);
        for _ in 0..2 {
            adam.step(vec![&mut p], &[Tensor::scalar(g)], lr).unwrap();
        }
        let (mut x, mut m, mut v) = (0.5f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= lr * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p.item() - x).abs() < 1e-12);
    }

    #[test]
    fn nan_gradient_reports_step() {
        let mut p = Tensor::scalar(0.0);
        let mut adam = AdamState::new(&[&p]);
        adam.step(vec![&mut p], &[Tensor::scalar(1.0)], 1e-3).unwrap();
        let mut bad = Tensor::scalar(0.0);
        bad.data_mut()[0] = f64::NAN;
        match adam.step(vec![&mut p], &[bad], 1e-3) {
            Err(Error::Diverged { step, .. }) => assert_eq!(step, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(adam.step_count(), 1);
    }
}
