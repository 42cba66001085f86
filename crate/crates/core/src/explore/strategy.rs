use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::bmc::{BmcPrior, BmcState};
use super::schedule::DecreasingSchedule;
use super::select::{select_eps_greedy, select_mbe, select_softmax, ActionChoice};
use super::vdbe::vdbe_update;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    /// Constant ε-greedy.
    Constant,
    /// Two-slope decreasing ε-greedy.
    Decreasing,
    /// Value-difference based ε-greedy.
    Vdbe,
    /// ε-greedy with ε from Bayesian model combination.
    Bmc,
    /// Boltzmann sampling.
    Softmax,
    /// Max-Boltzmann with constant ε.
    Mbe,
    /// Max-Boltzmann with VDBE-driven ε.
    VdbeSoftmax,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Constant,
        StrategyKind::Decreasing,
        StrategyKind::Vdbe,
        StrategyKind::Bmc,
        StrategyKind::Softmax,
        StrategyKind::Mbe,
        StrategyKind::VdbeSoftmax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Constant => "constant",
            StrategyKind::Decreasing => "decreasing",
            StrategyKind::Vdbe => "vdbe",
            StrategyKind::Bmc => "bmc",
            StrategyKind::Softmax => "softmax",
            StrategyKind::Mbe => "mbe",
            StrategyKind::VdbeSoftmax => "vdbe_softmax",
        }
    }

    pub fn uses_vdbe(self) -> bool {
        matches!(self, StrategyKind::Vdbe | StrategyKind::VdbeSoftmax)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::config(format!("unknown strategy kind `{s}`")))
    }
}

/// Hyper-parameters for every strategy; each kind reads the fields it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyParams {
    /// Constant ε (constant ε-greedy and MBE).
    pub epsilon: f64,
    /// Boltzmann temperature κ.
    pub temperature: f64,
    pub schedule: DecreasingSchedule,
    pub lambda: f64,
    pub nu: f64,
    /// ε that VDBE starts from once updates begin.
    pub vdbe_epsilon0: f64,
    pub bmc: BmcPrior,
}

impl Default for StrategyParams {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            temperature: 0.1,
            schedule: DecreasingSchedule::full_scale(),
            lambda: 0.2,
            nu: 1.0,
            vdbe_epsilon0: 1.0,
            bmc: BmcPrior::default(),
        }
    }
}

impl StrategyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.vdbe_epsilon0) {
            return bad(format!("vdbe_epsilon0 must lie in [0, 1], got {}", self.vdbe_epsilon0));
        }
        if !(self.temperature > 0.0) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad(format!("lambda must lie in (0, 1), got {}", self.lambda));
        }
        if !(self.nu > 0.0) {
            return bad(format!("nu must be positive, got {}", self.nu));
        }
        let p = &self.bmc;
        for (name, v) in [("alpha0", p.alpha0), ("beta0", p.beta0), ("a0", p.a0), ("b0", p.b0), ("tau0", p.tau0)] {
            if !(v > 0.0) {
                return bad(format!("bmc {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// Mutable exploration state owned by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy<T> {
    kind: StrategyKind,
    params: StrategyParams,
    epsilon: T,
    bmc: BmcState<T>,
    warmup: bool,
}

impl<T: Scalar> Strategy<T> {
    pub fn new(kind: StrategyKind, params: StrategyParams) -> Result<Self> {
        params.validate()?;
        let bmc: BmcState<T> = BmcState::new(params.bmc);
        let epsilon = match kind {
            StrategyKind::Constant | StrategyKind::Mbe => params.epsilon,
            StrategyKind::Decreasing => params.schedule.epsilon(0),
            StrategyKind::Vdbe | StrategyKind::VdbeSoftmax => params.vdbe_epsilon0,
            StrategyKind::Bmc => bmc.epsilon().as_f64(),
            StrategyKind::Softmax => 0.0,
        };
        Ok(Self { kind, params, epsilon: T::lit(epsilon), bmc, warmup: false })
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn params(&self) -> &StrategyParams {
        &self.params
    }

    pub fn bmc(&self) -> &BmcState<T> {
        &self.bmc
    }

    /// While set, every strategy acts uniformly at random (ε forced to 1).
    pub fn set_warmup(&mut self, warmup: bool) {
        self.warmup = warmup;
    }

    pub fn in_warmup(&self) -> bool {
        self.warmup
    }

    /// The strategy's own ε, ignoring warmup. `None` for pure Boltzmann.
    pub fn epsilon(&self) -> Option<T> {
        (self.kind != StrategyKind::Softmax).then_some(self.epsilon)
    }

    /// ε actually used for the next selection.
    pub fn effective_epsilon(&self) -> Option<T> {
        if self.warmup {
            Some(T::one())
        } else {
            self.epsilon()
        }
    }

    pub fn select<R: Rng>(&self, q: &[T], rng: &mut R) -> Result<ActionChoice<T>> {
        if self.warmup {
            return select_eps_greedy(q, 1.0, rng);
        }
        let eps = self.epsilon.as_f64().clamp(0.0, 1.0);
        match self.kind {
            StrategyKind::Constant | StrategyKind::Decreasing | StrategyKind::Vdbe | StrategyKind::Bmc => {
                select_eps_greedy(q, eps, rng)
            }
            StrategyKind::Softmax => select_softmax(q, self.params.temperature, rng),
            StrategyKind::Mbe | StrategyKind::VdbeSoftmax => select_mbe(q, eps, self.params.temperature, rng),
        }
    }

    /// Per environment step hook (`step` counts all steps taken so far).
    pub fn on_step(&mut self, step: u64) {
        if self.kind == StrategyKind::Decreasing {
            self.epsilon = T::lit(self.params.schedule.epsilon(step));
        }
    }

    /// Per agent update hook with the value difference of the held action.
    pub fn on_update(&mut self, delta: T) {
        if self.kind.uses_vdbe() {
            self.epsilon = vdbe_update(self.epsilon, delta, self.params.lambda, self.params.nu)
                .max(T::zero())
                .min(T::one());
        }
    }

    /// Per observed return hook: greedy-model and uniform-model predictions
    /// plus the return actually used as the learning target.
    pub fn on_return(&mut self, greedy_return: T, uniform_return: T, observed: T) {
        if self.kind == StrategyKind::Bmc {
            self.bmc.observe(greedy_return, uniform_return, observed);
            self.epsilon = self.bmc.epsilon();
        }
    }

    pub fn wants_returns(&self) -> bool {
        self.kind == StrategyKind::Bmc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_kind_builds_from_defaults() {
        for kind in StrategyKind::ALL {
            let s: Strategy<f64> = Strategy::new(kind, StrategyParams::default()).unwrap();
            assert_eq!(s.kind(), kind);
            assert_eq!(kind.name().parse::<StrategyKind>().unwrap(), kind);
        }
        let bmc: Strategy<f64> = Strategy::new(StrategyKind::Bmc, StrategyParams::default()).unwrap();
        assert_eq!(bmc.epsilon(), Some(0.5));
        assert!("ucb".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn softmax_never_consults_epsilon() {
        let mut s: Strategy<f64> = Strategy::new(StrategyKind::Softmax, StrategyParams::default()).unwrap();
        s.on_update(5.0);
        s.on_step(10);
        s.on_return(1.0, 0.0, 1.0);
        assert_eq!(s.epsilon(), None);
        let q = [0.0, 1.0, 0.2, 0.1, 0.0];
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = s.select(&q, &mut r1).unwrap();
            let b = select_softmax(&q, 0.1, &mut r2).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn warmup_forces_full_exploration() {
        let q = [0.0, 0.0, 9.0, 0.0, 0.0];
        for kind in StrategyKind::ALL {
            let mut s: Strategy<f64> = Strategy::new(kind, StrategyParams::default()).unwrap();
            s.set_warmup(true);
            assert_eq!(s.effective_epsilon(), Some(1.0));
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let greedy = (0..2000).filter(|_| s.select(&q, &mut rng).unwrap().action == 2).count();
            assert!((greedy as f64 / 2000.0 - 0.2).abs() < 0.04, "{kind}: {greedy}");
        }
    }

    #[test]
    fn vdbe_softmax_decays_with_zero_delta() {
        let mut s: Strategy<f64> = Strategy::new(StrategyKind::VdbeSoftmax, StrategyParams::default()).unwrap();
        for k in 1..=60 {
            s.on_update(0.0);
            assert!((s.epsilon().unwrap() - 0.8f64.powi(k)).abs() < 1e-12);
        }
        assert!(s.epsilon().unwrap() < 1e-5);
    }

    #[test]
    fn decreasing_follows_schedule() {
        let mut s: Strategy<f64> = Strategy::new(StrategyKind::Decreasing, StrategyParams::default()).unwrap();
        s.on_step(250_000);
        assert!((s.epsilon().unwrap() - 0.55).abs() < 1e-12);
    }
}
