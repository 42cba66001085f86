use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Activation, NetworkConfig};
use super::layers::{Conv2d, Dense};
use super::lstm::{Lstm, LstmStepCache, RecurrentState};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// All learnable weights of the recurrent dueling network: optional
/// convolution, dense encoder stack, LSTM, value head and advantage head.
///
/// The same type doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T> {
    config: NetworkConfig,
    pub conv: Option<Conv2d<T>>,
    pub encoder: Vec<Dense<T>>,
    pub lstm: Lstm<T>,
    pub value: Dense<T>,
    pub advantage: Dense<T>,
}

struct StepCache<T> {
    conv: Option<(Vec<T>, Vec<T>)>,
    /// (input, pre-activation, activation) per encoder layer
    encoder: Vec<(Vec<T>, Vec<T>, Vec<T>)>,
    lstm_in: Vec<T>,
    lstm: LstmStepCache<T>,
    h: Vec<T>,
}

fn ensure_finite<T: Scalar>(values: &[T], layer: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::non_finite(layer))
    }
}

/// `Q(a) = V + (A(a) − mean A)`.
pub fn dueling_q<T: Scalar>(value: T, advantages: &[T]) -> Vec<T> {
    let mean = crate::scalar::mean(advantages);
    advantages.iter().map(|&a| value + (a - mean)).collect()
}

impl<T: Scalar> ParamSet<T> {
    /// Seeded initialisation with uniform fan-in scaling.
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (d, w) = config.obs_shape;
        let conv = config
            .conv
            .map(|c| Conv2d::new(d, w, c.channels, c.kernel, c.activation, &mut rng));
        let mut n_in = conv.as_ref().map_or(d * w, |c| c.out_len());
        let mut encoder = Vec::with_capacity(config.encoder.len());
        for spec in &config.encoder {
            encoder.push(Dense::new(n_in, spec.width, spec.activation, &mut rng));
            n_in = spec.width;
        }
        let lstm = Lstm::new(n_in, config.lstm_width, &mut rng);
        let value = Dense::new(config.lstm_width, 1, Activation::Identity, &mut rng);
        let advantage = Dense::new(config.lstm_width, config.actions, Activation::Identity, &mut rng);
        Ok(Self { config, conv, encoder, lstm, value, advantage })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config.clone(),
            conv: self.conv.as_ref().map(Conv2d::zeros_like),
            encoder: self.encoder.iter().map(Dense::zeros_like).collect(),
            lstm: self.lstm.zeros_like(),
            value: self.value.zeros_like(),
            advantage: self.advantage.zeros_like(),
        }
    }

    /// Parameter blocks in checkpoint order: conv weight/bias, each encoder
    /// layer's weight/bias, LSTM input weights, hidden weights, bias, value
    /// head weight/bias, advantage head weight/bias.
    pub fn slices(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::new();
        if let Some(c) = &self.conv {
            out.push(&c.weight);
            out.push(&c.bias);
        }
        for l in &self.encoder {
            out.push(&l.weight);
            out.push(&l.bias);
        }
        out.push(&self.lstm.w_input);
        out.push(&self.lstm.w_hidden);
        out.push(&self.lstm.bias);
        out.push(&self.value.weight);
        out.push(&self.value.bias);
        out.push(&self.advantage.weight);
        out.push(&self.advantage.bias);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::new();
        if let Some(c) = &mut self.conv {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        for l in &mut self.encoder {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out.push(&mut self.lstm.w_input);
        out.push(&mut self.lstm.w_hidden);
        out.push(&mut self.lstm.bias);
        out.push(&mut self.value.weight);
        out.push(&mut self.value.bias);
        out.push(&mut self.advantage.weight);
        out.push(&mut self.advantage.bias);
        out
    }

    pub fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.slices().concat()
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.config == other.config
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.slices()
            .iter()
            .zip(other.slices())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(&x, &y)| (x - y).abs()))
            .fold(T::zero(), T::max)
    }

    pub fn scale(&mut self, factor: T) {
        for s in self.slices_mut() {
            for v in s.iter_mut() {
                *v = *v * factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub fn initial_state(&self) -> RecurrentState<T> {
        RecurrentState::zeros(self.config.lstm_width)
    }

    fn check_obs(&self, obs: &[T]) -> Result<()> {
        if obs.len() != self.config.obs_len() {
            return Err(Error::shape(format!(
                "observation has {} values, network expects {}",
                obs.len(),
                self.config.obs_len()
            )));
        }
        Ok(())
    }

    fn check_state(&self, state: &RecurrentState<T>) -> Result<()> {
        let w = self.config.lstm_width;
        if state.h.len() != w || state.c.len() != w {
            return Err(Error::shape(format!(
                "recurrent state width {}/{} does not match lstm width {w}",
                state.h.len(),
                state.c.len()
            )));
        }
        Ok(())
    }

    /// State value and raw advantages for a hidden vector.
    pub fn heads(&self, h: &[T]) -> (T, Vec<T>) {
        let (v, _) = self.value.forward(h);
        let (a, _) = self.advantage.forward(h);
        (v[0], a)
    }

    fn step_cached(&self, obs: &[T], state: &RecurrentState<T>) -> Result<(Vec<T>, RecurrentState<T>, StepCache<T>)> {
        let mut x = obs.to_vec();
        let conv = match &self.conv {
            Some(c) => {
                let (z, a) = c.forward(&x);
                ensure_finite(&a, "conv")?;
                x = a.clone();
                Some((z, a))
            }
            None => None,
        };
        let mut encoder = Vec::with_capacity(self.encoder.len());
        for (i, layer) in self.encoder.iter().enumerate() {
            let (z, a) = layer.forward(&x);
            ensure_finite(&a, &format!("encoder[{i}]"))?;
            encoder.push((std::mem::replace(&mut x, a.clone()), z, a));
        }
        let (next, lstm) = self.lstm.step_cached(&x, state);
        ensure_finite(&next.h, "lstm")?;
        ensure_finite(&next.c, "lstm")?;
        let (v, adv) = self.heads(&next.h);
        let q = dueling_q(v, &adv);
        ensure_finite(&q, "dueling heads")?;
        let cache = StepCache { conv, encoder, lstm_in: x, lstm, h: next.h.clone() };
        Ok((q, next, cache))
    }

    /// Single recurrent step: Q-values for every action and the next state.
    pub fn step(&self, obs: &[T], state: &RecurrentState<T>) -> Result<(Vec<T>, RecurrentState<T>)> {
        self.check_obs(obs)?;
        self.check_state(state)?;
        let (q, next, _) = self.step_cached(obs, state)?;
        Ok((q, next))
    }

    /// Runs a `t × obs` trace through the network, threading the recurrent
    /// state from `init`. Returns the `t × |A|` Q-values and the final state.
    pub fn forward_trace(
        &self,
        obs: &Tensor<T>,
        init: &RecurrentState<T>,
    ) -> Result<(Tensor<T>, RecurrentState<T>)> {
        let rows = self.trace_rows(obs)?;
        self.check_state(init)?;
        let mut state = init.clone();
        let mut q_rows = Vec::with_capacity(rows);
        for i in 0..rows {
            let (q, next, _) = self.step_cached(obs.row(i), &state)?;
            q_rows.push(q);
            state = next;
        }
        Ok((Tensor::from_rows(&q_rows)?, state))
    }

    fn trace_rows(&self, obs: &Tensor<T>) -> Result<usize> {
        if obs.rows() == 0 {
            return Err(Error::config("trace length must be at least 1"));
        }
        if obs.row_len() != self.config.obs_len() {
            return Err(Error::shape(format!(
                "trace rows have {} values, network expects {}",
                obs.row_len(),
                self.config.obs_len()
            )));
        }
        Ok(obs.rows())
    }

    /// Backpropagation through time over a whole trace started from `init`.
    ///
    /// `dq` holds `∂L/∂Q(h_i, a)` for every step and action; gradients are
    /// accumulated into `grad`. Returns the forward Q-values.
    pub fn accumulate_gradient(
        &self,
        obs: &Tensor<T>,
        init: &RecurrentState<T>,
        dq: &Tensor<T>,
        grad: &mut ParamSet<T>,
    ) -> Result<Tensor<T>> {
        self.bptt(obs, init, grad, |_| Ok(dq.clone()))
    }

    /// Forward pass with caches, then backward with the upstream gradient
    /// produced by `upstream` from the forward Q-values.
    fn bptt<F>(&self, obs: &Tensor<T>, init: &RecurrentState<T>, grad: &mut ParamSet<T>, upstream: F) -> Result<Tensor<T>>
    where
        F: FnOnce(&Tensor<T>) -> Result<Tensor<T>>,
    {
        let rows = self.trace_rows(obs)?;
        self.check_state(init)?;
        let mut state = init.clone();
        let mut caches = Vec::with_capacity(rows);
        let mut q_rows = Vec::with_capacity(rows);
        for i in 0..rows {
            let (q, next, cache) = self.step_cached(obs.row(i), &state)?;
            q_rows.push(q);
            caches.push(cache);
            state = next;
        }
        let q = Tensor::from_rows(&q_rows)?;
        let dq = upstream(&q)?;
        if dq.rows() != rows || dq.row_len() != self.config.actions {
            return Err(Error::shape(format!(
                "upstream gradient shape {:?} does not match {rows}x{}",
                dq.shape(),
                self.config.actions
            )));
        }

        let width = self.config.lstm_width;
        let n_actions = self.config.actions as f64;
        let mut dh_next = vec![T::zero(); width];
        let mut dc_next = vec![T::zero(); width];
        for i in (0..rows).rev() {
            let cache = &caches[i];
            let dq_row = dq.row(i);
            let dv = dq_row.iter().copied().sum::<T>();
            let mean_dq = dv / T::lit(n_actions);
            let dadv: Vec<T> = dq_row.iter().map(|&d| d - mean_dq).collect();

            let mut dh = dh_next.clone();
            for k in 0..width {
                dh[k] = dh[k] + dv * self.value.weight[k];
                grad.value.weight[k] = grad.value.weight[k] + dv * cache.h[k];
                for (a, &da) in dadv.iter().enumerate() {
                    dh[k] = dh[k] + da * self.advantage.weight[a * width + k];
                    grad.advantage.weight[a * width + k] =
                        grad.advantage.weight[a * width + k] + da * cache.h[k];
                }
            }
            grad.value.bias[0] = grad.value.bias[0] + dv;
            for (b, &da) in grad.advantage.bias.iter_mut().zip(&dadv) {
                *b = *b + da;
            }

            let (mut dx, dh_prev, dc_prev) =
                self.lstm.backward_step(&cache.lstm_in, &cache.lstm, &dh, &dc_next, &mut grad.lstm);
            dh_next = dh_prev;
            dc_next = dc_prev;

            for (l, layer) in self.encoder.iter().enumerate().rev() {
                let (input, z, a) = &cache.encoder[l];
                dx = layer.backward(input, z, a, &dx, &mut grad.encoder[l]);
            }
            if let (Some(conv), Some((z, a))) = (&self.conv, &cache.conv) {
                conv.backward(obs.row(i), z, a, &dx, grad.conv.as_mut().expect("conv gradient"));
            }
        }
        for (s, name) in grad.slices().iter().zip(0..) {
            if !s.iter().all(|v| v.is_finite()) {
                return Err(Error::non_finite(format!("gradient block {name}")));
            }
        }
        Ok(q)
    }

    /// Masked squared-error loss of one trace and its exact gradient, with
    /// the recurrent state zeroed at the trace start.
    pub fn backward(
        &self,
        obs: &Tensor<T>,
        actions: &[usize],
        targets: &[T],
        n_err: usize,
    ) -> Result<(T, ParamSet<T>)> {
        let mut grad = self.zeros_like();
        let loss = self.accumulate_masked(obs, actions, targets, n_err, T::one(), &mut grad)?;
        Ok((loss, grad))
    }

    /// Accumulates `weight · ∂L/∂θ` for one trace and returns the unweighted loss.
    pub fn accumulate_masked(
        &self,
        obs: &Tensor<T>,
        actions: &[usize],
        targets: &[T],
        n_err: usize,
        weight: T,
        grad: &mut ParamSet<T>,
    ) -> Result<T> {
        let t = self.trace_rows(obs)?;
        if actions.len() != t || targets.len() != t {
            return Err(Error::shape(format!(
                "trace of length {t} needs {t} actions and targets, got {} and {}",
                actions.len(),
                targets.len()
            )));
        }
        if n_err >= t {
            return Err(Error::config(format!("n_err {n_err} leaves no learnable step in a trace of length {t}")));
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= self.config.actions) {
            return Err(Error::shape(format!("action {a} out of range")));
        }
        let tt = T::from_usize_lossy(t);
        let n_actions = self.config.actions;
        let mut loss = T::zero();
        self.bptt(obs, &self.initial_state(), grad, |q| {
            let mut dq = Tensor::zeros(vec![t, n_actions]);
            for i in n_err..t {
                let resid = targets[i] - q.get2(i, actions[i]);
                loss = loss + resid * resid / tt;
                dq.data_mut()[i * n_actions + actions[i]] = -T::lit(2.0) * resid / tt * weight;
            }
            Ok(dq)
        })?;
        Ok(loss)
    }
}

/// Mean over traces of `Σ_{i ≥ n_err} (y_i − q_i)² / t`, with the first
/// `n_err` steps (zero-based) of each trace contributing nothing.
pub fn masked_loss<T: Scalar>(q_pred: &Tensor<T>, targets: &Tensor<T>, n_err: usize) -> Result<T> {
    if q_pred.shape() != targets.shape() || q_pred.shape().len() != 2 {
        return Err(Error::shape(format!(
            "predictions {:?} and targets {:?} must both be b×t",
            q_pred.shape(),
            targets.shape()
        )));
    }
    let (b, t) = (q_pred.shape()[0], q_pred.shape()[1]);
    if n_err >= t {
        return Err(Error::config(format!("n_err {n_err} must be below trace length {t}")));
    }
    if b == 0 {
        return Err(Error::shape("empty batch"));
    }
    let tt = T::from_usize_lossy(t);
    let total = (0..b)
        .map(|j| {
            (n_err..t)
                .map(|i| {
                    let r = targets.get2(j, i) - q_pred.get2(j, i);
                    r * r
                })
                .sum::<T>()
                / tt
        })
        .sum::<T>();
    Ok(total / T::from_usize_lossy(b))
}
