use rand::Rng;

use super::config::sigmoid;
use super::layers::{dot, uniform_fan_in};
use crate::scalar::Scalar;

/// Hidden and cell vectors carried between LSTM steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> RecurrentState<T> {
    pub fn zeros(width: usize) -> Self {
        Self { h: vec![T::zero(); width], c: vec![T::zero(); width] }
    }

    pub fn width(&self) -> usize {
        self.h.len()
    }
}

/// LSTM cell. Gate rows are stacked `[input, forget, cell, output]`, each
/// `width` rows tall.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm<T> {
    /// `4·width × n_in`
    pub w_input: Vec<T>,
    /// `4·width × width`
    pub w_hidden: Vec<T>,
    pub bias: Vec<T>,
    pub n_in: usize,
    pub width: usize,
}

/// Activations of one LSTM step, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct LstmStepCache<T> {
    pub input_gate: Vec<T>,
    pub forget_gate: Vec<T>,
    pub candidate: Vec<T>,
    pub output_gate: Vec<T>,
    pub c_prev: Vec<T>,
    pub h_prev: Vec<T>,
    pub tanh_c: Vec<T>,
}

impl<T: Scalar> Lstm<T> {
    pub fn new<R: Rng>(n_in: usize, width: usize, rng: &mut R) -> Self {
        let fan_in = n_in + width;
        let mut bias = vec![T::zero(); 4 * width];
        // forget gate starts open
        for b in &mut bias[width..2 * width] {
            *b = T::one();
        }
        Self {
            w_input: uniform_fan_in(rng, 4 * width * n_in, fan_in),
            w_hidden: uniform_fan_in(rng, 4 * width * width, fan_in),
            bias,
            n_in,
            width,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w_input: vec![T::zero(); self.w_input.len()],
            w_hidden: vec![T::zero(); self.w_hidden.len()],
            bias: vec![T::zero(); self.bias.len()],
            n_in: self.n_in,
            width: self.width,
        }
    }

    fn preactivations(&self, x: &[T], h: &[T]) -> Vec<T> {
        (0..4 * self.width)
            .map(|r| {
                dot(&self.w_input[r * self.n_in..(r + 1) * self.n_in], x)
                    + dot(&self.w_hidden[r * self.width..(r + 1) * self.width], h)
                    + self.bias[r]
            })
            .collect()
    }

    /// One step: `c' = f⊙c + i⊙g`, `h' = o⊙tanh(c')`.
    pub fn step(&self, x: &[T], state: &RecurrentState<T>) -> RecurrentState<T> {
        self.step_cached(x, state).0
    }

    pub fn step_cached(
        &self,
        x: &[T],
        state: &RecurrentState<T>,
    ) -> (RecurrentState<T>, LstmStepCache<T>) {
        let w = self.width;
        let pre = self.preactivations(x, &state.h);
        let input_gate: Vec<T> = pre[..w].iter().map(|&v| sigmoid(v)).collect();
        let forget_gate: Vec<T> = pre[w..2 * w].iter().map(|&v| sigmoid(v)).collect();
        let candidate: Vec<T> = pre[2 * w..3 * w].iter().map(|&v| v.tanh()).collect();
        let output_gate: Vec<T> = pre[3 * w..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<T> = (0..w)
            .map(|k| forget_gate[k] * state.c[k] + input_gate[k] * candidate[k])
            .collect();
        let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
        let h = (0..w).map(|k| output_gate[k] * tanh_c[k]).collect();
        let cache = LstmStepCache {
            input_gate,
            forget_gate,
            candidate,
            output_gate,
            c_prev: state.c.clone(),
            h_prev: state.h.clone(),
            tanh_c,
        };
        (RecurrentState { h, c }, cache)
    }

    /// Backpropagates one step. `dh` is the total gradient reaching `h'`,
    /// `dc_next` the gradient flowing back into `c'` from the following step.
    /// Returns `(dx, dh_prev, dc_prev)`.
    pub fn backward_step(
        &self,
        x: &[T],
        cache: &LstmStepCache<T>,
        dh: &[T],
        dc_next: &[T],
        grad: &mut Lstm<T>,
    ) -> (Vec<T>, Vec<T>, Vec<T>) {
        let w = self.width;
        let one = T::one();
        let mut dpre = vec![T::zero(); 4 * w];
        let mut dc_prev = vec![T::zero(); w];
        for k in 0..w {
            let (i, f, g, o) = (
                cache.input_gate[k],
                cache.forget_gate[k],
                cache.candidate[k],
                cache.output_gate[k],
            );
            let tc = cache.tanh_c[k];
            let d_o = dh[k] * tc;
            let dc = dc_next[k] + dh[k] * o * (one - tc * tc);
            dpre[k] = dc * g * i * (one - i);
            dpre[w + k] = dc * cache.c_prev[k] * f * (one - f);
            dpre[2 * w + k] = dc * i * (one - g * g);
            dpre[3 * w + k] = d_o * o * (one - o);
            dc_prev[k] = dc * f;
        }
        let mut dx = vec![T::zero(); self.n_in];
        let mut dh_prev = vec![T::zero(); w];
        for (r, &dp) in dpre.iter().enumerate() {
            if dp == T::zero() {
                continue;
            }
            grad.bias[r] = grad.bias[r] + dp;
            let wi = r * self.n_in;
            for j in 0..self.n_in {
                grad.w_input[wi + j] = grad.w_input[wi + j] + dp * x[j];
                dx[j] = dx[j] + dp * self.w_input[wi + j];
            }
            let wh = r * w;
            for j in 0..w {
                grad.w_hidden[wh + j] = grad.w_hidden[wh + j] + dp * cache.h_prev[j];
                dh_prev[j] = dh_prev[j] + dp * self.w_hidden[wh + j];
            }
        }
        (dx, dh_prev, dc_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_cell(n_in: usize, width: usize) -> Lstm<f64> {
        Lstm {
            w_input: vec![0.0; 4 * width * n_in],
            w_hidden: vec![0.0; 4 * width * width],
            bias: vec![0.0; 4 * width],
            n_in,
            width,
        }
    }

    #[test]
    fn all_zero_cell_outputs_zero() {
        let cell = zero_cell(3, 2);
        let out = cell.step(&[0.3, -2.0, 7.0], &RecurrentState::zeros(2));
        assert_eq!(out.h, vec![0.0, 0.0]);
        assert_eq!(out.c, vec![0.0, 0.0]);
    }

    #[test]
    fn bias_only_gates_match_hand_evaluation() {
        // width 1, biases (i, f, g, o) = (0.5, -1, 0.8, 2); zero input and state.
        let mut cell = zero_cell(2, 1);
        cell.bias = vec![0.5, -1.0, 0.8, 2.0];
        let out = cell.step(&[0.0, 0.0], &RecurrentState::zeros(1));
        let i = 1.0 / (1.0 + (-0.5f64).exp());
        let g = 0.8f64.tanh();
        let o = 1.0 / (1.0 + (-2.0f64).exp());
        let c = i * g;
        assert!((out.c[0] - c).abs() < 1e-15);
        assert!((out.h[0] - o * c.tanh()).abs() < 1e-15);
        // frozen literal from the formulas above
        assert!((out.h[0] - 0.344_657_188_001_598_06).abs() < 1e-12, "{}", out.h[0]);
    }

    /// Gate equations written out independently, one scalar at a time.
    fn straight_line_step(cell: &Lstm<f64>, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let w = cell.width;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let gate = |row: usize| {
            let mut s = cell.bias[row];
            for j in 0..x.len() {
                s += cell.w_input[row * x.len() + j] * x[j];
            }
            for j in 0..w {
                s += cell.w_hidden[row * w + j] * h[j];
            }
            s
        };
        let mut h2 = vec![0.0; w];
        let mut c2 = vec![0.0; w];
        for k in 0..w {
            let i = sig(gate(k));
            let f = sig(gate(w + k));
            let g = gate(2 * w + k).tanh();
            let o = sig(gate(3 * w + k));
            c2[k] = f * c[k] + i * g;
            h2[k] = o * c2[k].tanh();
        }
        (h2, c2)
    }

    #[test]
    fn random_step_matches_straight_line_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let cell: Lstm<f64> = Lstm::new(4, 3, &mut rng);
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let state = RecurrentState {
                h: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                c: (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let out = cell.step(&x, &state);
            let (h, c) = straight_line_step(&cell, &x, &state.h, &state.c);
            for k in 0..3 {
                assert!((out.h[k] - h[k]).abs() < 1e-12);
                assert!((out.c[k] - c[k]).abs() < 1e-12);
            }
        }
    }
}
