use crate::{ParamStore, Parameter, Real};

/// Adam with bias correction. Frozen parameters are skipped entirely:
/// value, moments and step count stay bit-identical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    pub fn step<F: Real>(&self, params: &mut ParamStore<F>, lr: f64) {
        for p in params.iter_mut() {
            self.step_param(p, lr);
        }
    }

    pub fn step_param<F: Real>(&self, p: &mut Parameter<F>, lr: f64) {
        if p.frozen {
            return;
        }
        p.step_count += 1;
        let t = p.step_count as i32;
        let b1 = F::from_f64(self.beta1);
        let b2 = F::from_f64(self.beta2);
        let one = F::one();
        let corr1 = F::from_f64(1.0 - self.beta1.powi(t));
        let corr2 = F::from_f64(1.0 - self.beta2.powi(t));
        let lr = F::from_f64(lr);
        let eps = F::from_f64(self.eps);

        let cols = p.value.cols();
        let rows: Vec<usize> = match p.touched_rows() {
            Some(mask) => mask
                .iter()
                .enumerate()
                .filter_map(|(i, &t)| t.then_some(i))
                .collect(),
            None => (0..p.value.rows()).collect(),
        };
        let Parameter {
            value,
            grad,
            adam_m,
            adam_v,
            ..
        } = p;
        let (x, g, m, v) = (
            value.data_mut(),
            grad.data(),
            adam_m.data_mut(),
            adam_v.data_mut(),
        );
        for r in rows {
            for i in r * cols..(r + 1) * cols {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let m_hat = m[i] / corr1;
                let v_hat = v[i] / corr2;
                x[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// One Adam step with the conventional constants.
pub fn adam_step<F: Real>(params: &mut ParamStore<F>, lr: f64) {
    Adam::default().step(params, lr);
}

/// `lr0 * gamma^epoch`.
pub fn exp_decay_lr(lr0: f64, gamma: f64, epoch: usize) -> f64 {
    lr0 * gamma.powi(epoch as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Tensor;

    fn store_with(value: Vec<f64>, grad: Vec<f64>) -> ParamStore<f64> {
        let n = value.len();
        let mut s = ParamStore::new();
        let id = s.add("w", Tensor::from_vec(&[n], value).unwrap());
        s.get_mut(id).accumulate(&grad);
        s
    }

    #[test]
    fn first_step_moves_by_lr_in_sign_direction() {
        // m_hat = g, v_hat = g^2 at t = 1, so the update is lr * g / (|g| + eps).
        let mut s = store_with(vec![1.0, 1.0, 1.0], vec![0.5, -3.0, 1e-3]);
        adam_step(&mut s, 0.01);
        let x = s.get(crate::ParamId(0)).value.data().to_vec();
        assert!((x[0] - 0.99).abs() < 1e-9);
        assert!((x[1] - 1.01).abs() < 1e-9);
        assert!((x[2] - (1.0 - 0.01 * 1e-3 / (1e-3 + 1e-8))).abs() < 1e-12);
    }

    #[test]
    fn frozen_parameter_is_untouched() {
        let mut s = store_with(vec![1.0, 2.0], vec![5.0, 5.0]);
        s.get_mut(crate::ParamId(0)).frozen = true;
        let before = s.get(crate::ParamId(0)).clone();
        for _ in 0..3 {
            adam_step(&mut s, 0.1);
        }
        let after = s.get(crate::ParamId(0));
        assert_eq!(after.value, before.value);
        assert_eq!(after.adam_m, before.adam_m);
        assert_eq!(after.adam_v, before.adam_v);
        assert_eq!(after.step_count, 0);
    }

    #[test]
    fn zero_grad_zero_moments_no_change() {
        let mut s = store_with(vec![1.0, -2.0], vec![0.0, 0.0]);
        adam_step(&mut s, 0.1);
        assert_eq!(s.get(crate::ParamId(0)).value.data(), &[1.0, -2.0]);
    }

    #[test]
    fn row_sparse_skips_untouched_rows() {
        let mut s = ParamStore::<f64>::new();
        let id = s.push(Parameter::new_row_sparse("e", Tensor::full(&[3, 2], 1.0)));
        s.get_mut(id).accumulate_row(2, &[1.0, 1.0]);
        adam_step(&mut s, 0.1);
        let v = s.get(id).value.data();
        assert_eq!(&v[..4], &[1.0; 4]);
        assert!(v[4] < 1.0 && v[5] < 1.0);
    }

    #[test]
    fn decay_schedule() {
        assert_eq!(exp_decay_lr(0.001, 0.95, 0), 0.001);
        assert!((exp_decay_lr(0.001, 0.95, 10) - 5.987369392383789e-4).abs() < 1e-12);
        assert_eq!(exp_decay_lr(0.5, 1.0, 7), 0.5);
    }
}
