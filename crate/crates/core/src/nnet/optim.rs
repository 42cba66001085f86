use super::network::ParamSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam moment estimates, laid out like `ParamSet::slices`.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    steps: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<T>> = params.slices().iter().map(|s| vec![T::zero(); s.len()]).collect();
        Self { config, m: zeros.clone(), v: zeros, steps: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// One bias-corrected Adam step using the configured learning rate.
    pub fn step(&mut self, params: &mut ParamSet<T>, grads: &ParamSet<T>) -> Result<()> {
        let lr = self.config.lr;
        self.step_with_lr(params, grads, lr)
    }

    pub fn step_with_lr(&mut self, params: &mut ParamSet<T>, grads: &ParamSet<T>, lr: f64) -> Result<()> {
        if !params.same_shape(grads) {
            return Err(Error::shape("gradient layout does not match parameters"));
        }
        if lr < 0.0 || !lr.is_finite() {
            return Err(Error::config(format!("learning rate must be non-negative, got {lr}")));
        }
        self.steps += 1;
        let AdamConfig { beta1, beta2, eps, .. } = self.config;
        let t = self.steps as i32;
        let (b1, b2) = (T::lit(beta1), T::lit(beta2));
        let (one, eps, lr) = (T::one(), T::lit(eps), T::lit(lr));
        let bc1 = one - T::lit(beta1.powi(t));
        let bc2 = one - T::lit(beta2.powi(t));
        for (((p, g), m), v) in params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (one - b1) * g[k];
                v[k] = b2 * v[k] + (one - b2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p[k] = p[k] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Target tracking `θ′ ← θ·η + θ′·(1 − η)`.
pub fn soft_update<T: Scalar>(main: &ParamSet<T>, target: &mut ParamSet<T>, eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::config(format!("soft update rate must lie in (0, 1], got {eta}")));
    }
    if !main.same_shape(target) {
        return Err(Error::shape("main and target networks differ in shape"));
    }
    let (eta, keep) = (T::lit(eta), T::lit(1.0 - eta));
    for (t, m) in target.slices_mut().into_iter().zip(main.slices()) {
        for (tv, &mv) in t.iter_mut().zip(m) {
            *tv = mv * eta + *tv * keep;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::config::{Activation, LayerSpec, NetworkConfig};

    fn tiny() -> ParamSet<f64> {
        ParamSet::new(NetworkConfig {
            obs_shape: (1, 1),
            conv: None,
            encoder: vec![LayerSpec { width: 1, activation: Activation::Identity }],
            lstm_width: 1,
            actions: 2,
            seed: 3,
        })
        .unwrap()
    }

    fn filled(p: &ParamSet<f64>, v: f64) -> ParamSet<f64> {
        let mut out = p.zeros_like();
        out.set_flat(&vec![v; p.param_count()]).unwrap();
        out
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = tiny();
        let before = p.clone();
        let mut adam = Adam::new(&p, AdamConfig::default());
        let zero = p.zeros_like();
        for _ in 0..5 {
            adam.step(&mut p, &zero).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn unit_gradient_moves_each_param_by_about_lr() {
        // m̂ = 1, v̂ = 1 after bias correction: Δ = lr / (1 + 1e-8).
        let mut p = tiny();
        let before = p.to_flat();
        let mut adam = Adam::new(&p, AdamConfig { lr: 0.1, ..AdamConfig::default() });
        let ones = filled(&p, 1.0);
        adam.step(&mut p, &ones).unwrap();
        for (a, b) in p.to_flat().iter().zip(before) {
            assert!(((b - a) - 0.1 / (1.0 + 1e-8)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut p = tiny();
        let before = p.clone();
        let mut adam = Adam::new(&p, AdamConfig::default());
        adam.step_with_lr(&mut p, &filled(&before, 3.0), 0.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn soft_update_examples() {
        let main = filled(&tiny(), 1.0);
        let mut target = filled(&main, 0.0);
        soft_update(&main, &mut target, 0.001).unwrap();
        assert!(target.to_flat().iter().all(|&v| v == 0.001));

        let mut target = tiny();
        soft_update(&main, &mut target, 1.0).unwrap();
        assert_eq!(target, main);

        assert!(soft_update(&main, &mut target, 0.0).is_err());
        assert!(soft_update(&main, &mut target, 1.5).is_err());
    }

    #[test]
    fn repeated_soft_updates_converge_geometrically() {
        let main = filled(&tiny(), 1.0);
        let mut target = filled(&main, 0.0);
        let eta = 0.05;
        for k in 1..=200 {
            soft_update(&main, &mut target, eta).unwrap();
            let expected = (1.0 - eta as f64).powi(k);
            for v in target.to_flat() {
                assert!(((1.0 - v) - expected).abs() < 1e-12);
            }
        }
    }
}
