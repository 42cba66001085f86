//! Bayesian model combination of the greedy and uniform return models.
//!
//! Returns are modelled as `N(G^m, 1/τ)` with a Normal-Gamma prior; the
//! precision marginal is `Gamma(a_t, b_t)` and each model's evidence is a
//! Student-t density. The mixing weight ε carries a Beta posterior that is
//! kept in closed form by moment matching.

use crate::scalar::Scalar;

/// Log-density of the location/precision Student-t distribution.
pub fn student_t_log_pdf(x: f64, location: f64, precision: f64, dof: f64) -> f64 {
    let z = x - location;
    libm::lgamma((dof + 1.0) / 2.0) - libm::lgamma(dof / 2.0)
        + 0.5 * (precision / (std::f64::consts::PI * dof)).ln()
        - (dof + 1.0) / 2.0 * (1.0 + precision * z * z / dof).ln()
}

pub fn student_t_pdf<T: Scalar>(x: T, location: T, precision: T, dof: T) -> T {
    T::lit(student_t_log_pdf(x.as_f64(), location.as_f64(), precision.as_f64(), dof.as_f64()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmcPrior {
    pub alpha0: f64,
    pub beta0: f64,
    pub a0: f64,
    pub b0: f64,
    pub mu0: f64,
    pub tau0: f64,
}

impl Default for BmcPrior {
    fn default() -> Self {
        Self { alpha0: 25.0, beta0: 25.0, a0: 250.0, b0: 250.0, mu0: 0.0, tau0: 1.0 }
    }
}

/// Result of one [`BmcState::observe`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmcStep<T> {
    pub evidence_greedy: T,
    pub evidence_uniform: T,
    /// True when the moment-matching variance was degenerate and (α, β) kept.
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmcState<T> {
    pub prior: BmcPrior,
    pub alpha: T,
    pub beta: T,
    count: usize,
    mean: T,
    m2: T,
}

const DEGENERATE_VARIANCE: f64 = 1e-12;

impl<T: Scalar> BmcState<T> {
    pub fn new(prior: BmcPrior) -> Self {
        Self {
            prior,
            alpha: T::lit(prior.alpha0),
            beta: T::lit(prior.beta0),
            count: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    pub fn epsilon(&self) -> T {
        self.alpha / (self.alpha + self.beta)
    }

    /// Number of returns absorbed so far.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn return_mean(&self) -> T {
        self.mean
    }

    /// Population variance of the returns absorbed so far.
    pub fn return_variance(&self) -> T {
        if self.count == 0 {
            T::zero()
        } else {
            self.m2 / T::from_usize_lossy(self.count)
        }
    }

    pub fn a(&self) -> T {
        T::lit(self.prior.a0) + T::from_usize_lossy(self.count) / T::lit(2.0)
    }

    pub fn b(&self) -> T {
        let t = T::from_usize_lossy(self.count);
        let tau0 = T::lit(self.prior.tau0);
        let shift = self.mean - T::lit(self.prior.mu0);
        T::lit(self.prior.b0)
            + t / T::lit(2.0) * (self.return_variance() + tau0 / (tau0 + t) * shift * shift)
    }

    /// Log-evidence of `observed` under the model centred at `model_return`.
    pub fn log_evidence(&self, observed: T, model_return: T) -> f64 {
        let a = self.a().as_f64();
        student_t_log_pdf(observed.as_f64(), model_return.as_f64(), a / self.b().as_f64(), 2.0 * a)
    }

    /// Moment-matched Beta update for evidences `(e^Q, e^U)`. Only their
    /// ratio matters, so callers may pass rescaled values.
    pub fn update_weights(&mut self, evidence_greedy: T, evidence_uniform: T) -> bool {
        let (a, b) = (self.alpha, self.beta);
        let (one, two) = (T::one(), T::lit(2.0));
        let (eq, eu) = (evidence_greedy, evidence_uniform);
        let denom = eu * a + eq * b;
        let m = a / (a + b + one) * (eu * (a + one) + eq * b) / denom;
        let v = a / (a + b + one) * (a + one) / (a + b + two) * (eu * (a + two) + eq * b) / denom;
        let spread = v - m * m;
        if !(spread > T::lit(DEGENERATE_VARIANCE)) || !m.is_finite() {
            return false;
        }
        let r = (m - v) / spread;
        let (alpha, beta) = (m * r, (one - m) * r);
        if !(alpha > T::zero() && beta > T::zero() && alpha.is_finite() && beta.is_finite()) {
            return false;
        }
        self.alpha = alpha;
        self.beta = beta;
        true
    }

    /// Absorbs one observed return given the greedy-model and uniform-model
    /// predictions for the same transition.
    ///
    /// The evidences use the posterior built from the returns seen before
    /// this one; the return is then added to the running moments.
    pub fn observe(&mut self, greedy_return: T, uniform_return: T, observed: T) -> BmcStep<T> {
        let lq = self.log_evidence(observed, greedy_return);
        let lu = self.log_evidence(observed, uniform_return);
        let top = lq.max(lu);
        let (eq, eu) = (T::lit((lq - top).exp()), T::lit((lu - top).exp()));
        let updated = self.update_weights(eq, eu);
        self.absorb(observed);
        BmcStep { evidence_greedy: T::lit(lq.exp()), evidence_uniform: T::lit(lu.exp()), skipped: !updated }
    }

    fn absorb(&mut self, x: T) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / T::from_usize_lossy(self.count);
        self.m2 = self.m2 + delta * (x - self.mean);
    }
}
