use super::{Scalar, Tensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for a fixed list of parameter tensors.
///
/// L2 regularization is coupled: the effective gradient is `g + l2 * w` for
/// every tensor whose `decay` flag is set.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub t: u64,
    /// Reject non-finite gradients before touching any state.
    pub check_finite: bool,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(sizes: &[usize], config: AdamConfig) -> Self {
        Self {
            config,
            m: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            t: 0,
            check_finite: cfg!(debug_assertions),
        }
    }

    pub fn step(
        &mut self,
        params: &mut [&mut Tensor<T>],
        grads: &[&Tensor<T>],
        decay: &[bool],
        lr: f64,
        l2: f64,
    ) -> Result<()> {
        if params.len() != self.m.len()
            || grads.len() != params.len()
            || decay.len() != params.len()
        {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params / {} grads / {} flags",
                self.m.len(),
                params.len(),
                grads.len(),
                decay.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[i].len() {
                return Err(Error::Shape(format!("parameter group {i} size mismatch")));
            }
            if self.check_finite {
                g.check_finite(&format!("gradient group {i}"))?;
            }
        }

        self.t += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let l2 = if decay[i] { l2 } else { 0.0 };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (((w, &g), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(grads[i].data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                let g = g.f64() + l2 * w.f64();
                let m_new = beta1 * mi.f64() + (1.0 - beta1) * g;
                let v_new = beta2 * vi.f64() + (1.0 - beta2) * g * g;
                *mi = T::of(m_new);
                *vi = T::of(v_new);
                let update = lr * (m_new / bc1) / ((v_new / bc2).sqrt() + epsilon);
                *w = T::of(w.f64() - update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor<f64> {
        Tensor::new(&[1], vec![v]).unwrap()
    }

    /// Plain scalar Adam written from the textbook update.
    struct ScalarAdam {
        m: f64,
        v: f64,
        t: i32,
    }

    impl ScalarAdam {
        fn step(&mut self, w: f64, g: f64, lr: f64) -> f64 {
            self.t += 1;
            self.m = 0.9 * self.m + 0.1 * g;
            self.v = 0.999 * self.v + 0.001 * g * g;
            let m_hat = self.m / (1.0 - 0.9f64.powi(self.t));
            let v_hat = self.v / (1.0 - 0.999f64.powi(self.t));
            w - lr * m_hat / (v_hat.sqrt() + 1e-8)
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut w = Tensor::new(&[3], vec![0.5, -2.0, 7.0]).unwrap();
        let before = w.clone();
        let g = Tensor::zeros(&[3]);
        let mut adam = AdamState::<f64>::new(&[3], AdamConfig::default());
        adam.step(&mut [&mut w], &[&g], &[true], 1e-3, 0.0).unwrap();
        assert_eq!(w, before);
        assert!(adam.m[0].iter().chain(&adam.v[0]).all(|&x| x == 0.0));
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = scalar(1.0);
        let mut adam = AdamState::<f64>::new(&[1], AdamConfig::default());
        adam.step(&mut [&mut w], &[&scalar(1.0)], &[true], 0.1, 0.0)
            .unwrap();
        assert!((w.data()[0] - 0.9).abs() < 1e-7);
    }

    #[test]
    fn two_steps_match_scalar_oracle() {
        let mut w = scalar(0.3);
        let mut adam = AdamState::<f64>::new(&[1], AdamConfig::default());
        let mut oracle = ScalarAdam {
            m: 0.0,
            v: 0.0,
            t: 0,
        };
        let mut w_ref = 0.3;
        for g in [0.7, -0.2] {
            adam.step(&mut [&mut w], &[&scalar(g)], &[false], 0.01, 0.0)
                .unwrap();
            w_ref = oracle.step(w_ref, g, 0.01);
            assert!((w.data()[0] - w_ref).abs() < 1e-12);
        }
        assert!(adam.v[0][0] >= 0.0);
    }

    #[test]
    fn coupled_l2() {
        let mut w = scalar(2.0);
        let mut decayed = AdamState::<f64>::new(&[1], AdamConfig::default());
        decayed
            .step(&mut [&mut w], &[&scalar(0.0)], &[true], 0.1, 0.5)
            .unwrap();
        // effective gradient 0.5 * 2 = 1
        let mut oracle = ScalarAdam {
            m: 0.0,
            v: 0.0,
            t: 0,
        };
        assert!((w.data()[0] - oracle.step(2.0, 1.0, 0.1)).abs() < 1e-12);

        let mut w = scalar(2.0);
        let mut plain = AdamState::<f64>::new(&[1], AdamConfig::default());
        plain
            .step(&mut [&mut w], &[&scalar(0.0)], &[false], 0.1, 0.5)
            .unwrap();
        assert_eq!(w.data()[0], 2.0);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut w = scalar(1.0);
        let mut adam = AdamState::<f64>::new(&[1], AdamConfig::default());
        adam.check_finite = true;
        let r = adam.step(&mut [&mut w], &[&scalar(f64::NAN)], &[true], 0.1, 0.0);
        assert!(matches!(r, Err(Error::NonFinite(_))));
        assert_eq!(adam.t, 0);
        assert_eq!(w.data()[0], 1.0);
    }
}
