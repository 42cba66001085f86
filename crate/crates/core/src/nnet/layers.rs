use rand::Rng;

use super::config::Activation;
use crate::scalar::Scalar;

pub(crate) fn uniform_fan_in<T: Scalar, R: Rng>(rng: &mut R, n: usize, fan_in: usize) -> Vec<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| T::lit(rng.gen_range(-bound..bound))).collect()
}

/// Fully connected layer `a = act(W x + b)`, `W` stored `out × in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub n_in: usize,
    pub n_out: usize,
    pub activation: Activation,
}

impl<T: Scalar> Dense<T> {
    pub fn new<R: Rng>(n_in: usize, n_out: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            weight: uniform_fan_in(rng, n_in * n_out, n_in),
            bias: vec![T::zero(); n_out],
            n_in,
            n_out,
            activation,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![T::zero(); self.weight.len()],
            bias: vec![T::zero(); self.bias.len()],
            ..*self
        }
    }

    /// Returns (pre-activation, activation).
    pub fn forward(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        debug_assert_eq!(x.len(), self.n_in);
        let z: Vec<T> = self
            .weight
            .chunks_exact(self.n_in)
            .zip(&self.bias)
            .map(|(row, &b)| dot(row, x) + b)
            .collect();
        let a = z.iter().map(|&v| self.activation.apply(v)).collect();
        (z, a)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[T], z: &[T], a: &[T], da: &[T], grad: &mut Dense<T>) -> Vec<T> {
        let mut dx = vec![T::zero(); self.n_in];
        for o in 0..self.n_out {
            let dz = da[o] * self.activation.derivative(z[o], a[o]);
            if dz == T::zero() {
                continue;
            }
            grad.bias[o] = grad.bias[o] + dz;
            let row = o * self.n_in;
            for i in 0..self.n_in {
                grad.weight[row + i] = grad.weight[row + i] + dz * x[i];
                dx[i] = dx[i] + dz * self.weight[row + i];
            }
        }
        dx
    }
}

/// Stride-1 valid convolution from a single-channel `h × w` grid to
/// `channels` feature maps, flattened channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
    pub channels: usize,
    pub kernel: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub activation: Activation,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new<R: Rng>(
        in_h: usize,
        in_w: usize,
        channels: usize,
        kernel: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Self {
            weight: uniform_fan_in(rng, channels * kernel * kernel, kernel * kernel),
            bias: vec![T::zero(); channels],
            channels,
            kernel,
            in_h,
            in_w,
            activation,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            weight: vec![T::zero(); self.weight.len()],
            bias: vec![T::zero(); self.bias.len()],
            ..*self
        }
    }

    pub fn out_h(&self) -> usize {
        self.in_h + 1 - self.kernel
    }

    pub fn out_w(&self) -> usize {
        self.in_w + 1 - self.kernel
    }

    pub fn out_len(&self) -> usize {
        self.channels * self.out_h() * self.out_w()
    }

    pub fn forward(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let (oh, ow, k) = (self.out_h(), self.out_w(), self.kernel);
        let mut z = Vec::with_capacity(self.out_len());
        for ch in 0..self.channels {
            let kern = &self.weight[ch * k * k..(ch + 1) * k * k];
            for r in 0..oh {
                for c in 0..ow {
                    let mut acc = self.bias[ch];
                    for kr in 0..k {
                        for kc in 0..k {
                            acc = acc + kern[kr * k + kc] * x[(r + kr) * self.in_w + c + kc];
                        }
                    }
                    z.push(acc);
                }
            }
        }
        let a = z.iter().map(|&v| self.activation.apply(v)).collect();
        (z, a)
    }

    /// Accumulates kernel gradients; the input gradient is not needed since
    /// the convolution always reads the raw observation.
    pub fn backward(&self, x: &[T], z: &[T], a: &[T], da: &[T], grad: &mut Conv2d<T>) {
        let (oh, ow, k) = (self.out_h(), self.out_w(), self.kernel);
        for ch in 0..self.channels {
            for r in 0..oh {
                for c in 0..ow {
                    let idx = (ch * oh + r) * ow + c;
                    let dz = da[idx] * self.activation.derivative(z[idx], a[idx]);
                    if dz == T::zero() {
                        continue;
                    }
                    grad.bias[ch] = grad.bias[ch] + dz;
                    for kr in 0..k {
                        for kc in 0..k {
                            let w = ch * k * k + kr * k + kc;
                            grad.weight[w] = grad.weight[w] + dz * x[(r + kr) * self.in_w + c + kc];
                        }
                    }
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_forward_matches_hand_evaluation() {
        let layer = Dense {
            weight: vec![1.0, 2.0, -1.0, 0.5],
            bias: vec![0.5, -3.0],
            n_in: 2,
            n_out: 2,
            activation: Activation::Relu,
        };
        let (z, a) = layer.forward(&[1.0, 1.0]);
        assert_eq!(z, vec![3.5, -3.5]);
        assert_eq!(a, vec![3.5, 0.0]);
    }

    #[test]
    fn conv_forward_matches_hand_evaluation() {
        // 3x3 input, one 2x2 kernel of ones: each output is a 2x2 window sum.
        let conv = Conv2d {
            weight: vec![1.0; 4],
            bias: vec![0.0],
            channels: 1,
            kernel: 2,
            in_h: 3,
            in_w: 3,
            activation: Activation::Identity,
        };
        let x: Vec<f64> = (1..=9).map(f64::from).collect();
        let (z, _) = conv.forward(&x);
        assert_eq!(z, vec![12.0, 16.0, 24.0, 28.0]);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d: Dense<f64> = Dense::new(16, 4, Activation::Tanh, &mut rng);
        assert!(d.weight.iter().all(|w| w.abs() < 0.25));
        assert!(d.bias.iter().all(|&b| b == 0.0));
    }
}
