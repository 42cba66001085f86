use crate::scalar::Scalar;

/// `f = (1 − e^{−|Δ|/ν}) / (1 + e^{−|Δ|/ν})`, which lies in `[0, 1)`.
pub fn vdbe_f<T: Scalar>(delta: T, nu: f64) -> T {
    let e = (-delta.abs() / T::lit(nu)).exp();
    (T::one() - e) / (T::one() + e)
}

/// `ε′ = λ·f(Δ) + (1 − λ)·ε`.
pub fn vdbe_update<T: Scalar>(epsilon: T, delta: T, lambda: f64, nu: f64) -> T {
    let lambda = T::lit(lambda);
    lambda * vdbe_f(delta, nu) + (T::one() - lambda) * epsilon
}

/// Change of the chosen action's value across one agent update.
pub fn delta_err<T: Scalar>(q_after: &[T], q_before: &[T], action: usize) -> T {
    q_after[action] - q_before[action]
}
