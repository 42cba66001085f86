use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{argmax, Scalar};

/// Outcome of one action selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionChoice<T> {
    pub action: usize,
    /// True when the draw came from the exploratory branch (or, for pure
    /// Boltzmann sampling, when the sampled action is not the greedy one).
    pub exploring: bool,
    /// Full action distribution the choice was drawn from.
    pub probabilities: Option<Vec<T>>,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::config(format!("epsilon must lie in [0, 1], got {epsilon}")));
    }
    Ok(())
}

fn check_temperature(temperature: f64) -> Result<()> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::config(format!("temperature must be positive, got {temperature}")));
    }
    Ok(())
}

/// Boltzmann probabilities `exp(q/κ) / Σ exp(q/κ)`, shifted by the max first.
pub fn boltzmann<T: Scalar>(q: &[T], temperature: f64) -> Result<Vec<T>> {
    check_temperature(temperature)?;
    let kappa = T::lit(temperature);
    let top = q.iter().copied().fold(T::neg_infinity(), T::max);
    let weights: Vec<T> = q.iter().map(|&v| ((v - top) / kappa).exp()).collect();
    let total: T = weights.iter().copied().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

fn sample_from<T: Scalar, R: Rng>(probs: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.as_f64();
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the last partial sum
    probs.iter().rposition(|p| *p > T::zero()).unwrap_or(probs.len() - 1)
}

fn greedy_mixture<T: Scalar>(greedy: usize, epsilon: f64, explore: &[T]) -> Vec<T> {
    let eps = T::lit(epsilon);
    explore
        .iter()
        .enumerate()
        .map(|(i, &p)| eps * p + if i == greedy { T::one() - eps } else { T::zero() })
        .collect()
}

/// Greedy with probability `1 − ε`, otherwise uniform over all actions.
pub fn select_eps_greedy<T: Scalar, R: Rng>(q: &[T], epsilon: f64, rng: &mut R) -> Result<ActionChoice<T>> {
    check_epsilon(epsilon)?;
    let greedy = argmax(q);
    let uniform = vec![T::one() / T::from_usize_lossy(q.len()); q.len()];
    let probabilities = Some(greedy_mixture(greedy, epsilon, &uniform));
    if rng.gen::<f64>() < epsilon {
        Ok(ActionChoice { action: rng.gen_range(0..q.len()), exploring: true, probabilities })
    } else {
        Ok(ActionChoice { action: greedy, exploring: false, probabilities })
    }
}

/// Samples from the Boltzmann distribution at temperature `κ`.
pub fn select_softmax<T: Scalar, R: Rng>(q: &[T], temperature: f64, rng: &mut R) -> Result<ActionChoice<T>> {
    let probs = boltzmann(q, temperature)?;
    let action = sample_from(&probs, rng);
    Ok(ActionChoice { action, exploring: action != argmax(q), probabilities: Some(probs) })
}

/// Max-Boltzmann: greedy with probability `1 − ε`, otherwise a Boltzmann draw.
pub fn select_mbe<T: Scalar, R: Rng>(
    q: &[T],
    epsilon: f64,
    temperature: f64,
    rng: &mut R,
) -> Result<ActionChoice<T>> {
    check_epsilon(epsilon)?;
    let probs = boltzmann(q, temperature)?;
    let greedy = argmax(q);
    let mixture = greedy_mixture(greedy, epsilon, &probs);
    if rng.gen::<f64>() < epsilon {
        Ok(ActionChoice { action: sample_from(&probs, rng), exploring: true, probabilities: Some(mixture) })
    } else {
        Ok(ActionChoice { action: greedy, exploring: false, probabilities: Some(mixture) })
    }
}
