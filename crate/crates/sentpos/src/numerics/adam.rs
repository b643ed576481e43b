//! Bias-corrected Adam.

use super::param::ParamSet;
use super::tensor::Tensor;

/// Optimizer state: one pair of moment tensors per parameter, in parameter
/// order, plus the shared step counter and hyperparameters.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first_moments: Vec<Tensor>,
    second_moments: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ParamSet, learning_rate: f64) -> Self {
        let first = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        let second = params.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moments: first,
            second_moments: second,
        }
    }

    /// One update from the gradients currently stored in `params`.
    /// Gradients are left untouched; callers zero them per batch.
    pub fn adam_step(&mut self, params: &mut ParamSet) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let p = params.get_mut(super::param::ParamId(i));
            let m = self.first_moments[i].data_mut();
            let v = self.second_moments[i].data_mut();
            let g = p.grad.data();
            let theta = p.value.data_mut();
            for j in 0..g.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                theta[j] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut set = ParamSet::new();
        let id = set.add("w", Tensor::from_vec(&[2], vec![1.5, -0.5]).unwrap());
        let mut adam = AdamState::new(&set, 0.1);
        adam.adam_step(&mut set);
        assert_eq!(set.get(id).value.data(), &[1.5, -0.5]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // Bias correction makes m_hat = g and v_hat = g^2 on step one, so the
        // update is lr * g / (|g| + eps) which is lr * sign(g) up to eps.
        let mut set = ParamSet::new();
        let id = set.add("w", Tensor::from_vec(&[1], vec![0.0]).unwrap());
        set.get_mut(id).grad = Tensor::from_vec(&[1], vec![3.7]).unwrap();
        let mut adam = AdamState::new(&set, 0.01);
        adam.adam_step(&mut set);
        let moved = set.get(id).value.data()[0];
        assert!((moved - (-0.01)).abs() < 1e-8, "moved {moved}");
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut set = ParamSet::new();
            let id = set.add("w", Tensor::from_vec(&[2], vec![0.3, -0.2]).unwrap());
            let mut adam = AdamState::new(&set, 0.05);
            for step in 0..10 {
                set.zero_grads();
                let v = set.get(id).value.data().to_vec();
                let g = set.get_mut(id).grad.data_mut();
                g[0] = 2.0 * v[0] + step as f64 * 0.01;
                g[1] = -v[1];
                adam.adam_step(&mut set);
            }
            set.get(id).value.data().to_vec()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}
