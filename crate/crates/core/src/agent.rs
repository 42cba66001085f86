//! Double dueling deep recurrent Q-network agent trained with bootstrapped
//! random updates over masked traces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::envsim::{RoadEnv, StartSet, StepOutcome};
use crate::error::{Error, Result};
use crate::explore::{delta_err, ActionChoice, Strategy};
use crate::nnet::{soft_update, Adam, AdamConfig, ParamSet, RecurrentState, Tensor};
use crate::replay::{ReplayBuffer, StartGate, Trace, Transition};
use crate::scalar::{argmax, mean, Scalar};

/// Anything the agent can drive: resettable to indexed start points and
/// stepped with an action index.
pub trait Environment {
    fn obs_len(&self) -> usize;
    fn start_count(&self, set: StartSet) -> usize;
    /// Reset to a start point; `rng` supplies any start perturbation.
    fn reset_with<R: Rng>(&mut self, start: usize, set: StartSet, rng: &mut R) -> Result<Vec<f64>>;
    fn step(&mut self, action: usize) -> Result<StepOutcome>;
}

impl Environment for RoadEnv {
    fn obs_len(&self) -> usize {
        RoadEnv::obs_len(self)
    }

    fn start_count(&self, set: StartSet) -> usize {
        RoadEnv::start_count(self, set)
    }

    fn reset_with<R: Rng>(&mut self, start: usize, set: StartSet, rng: &mut R) -> Result<Vec<f64>> {
        self.reset_jittered(start, set, rng)
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        RoadEnv::step(self, action)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    /// Discount γ in (0, 1).
    pub gamma: f64,
    /// Soft target update rate η in (0, 1].
    pub eta: f64,
    /// Environment steps between agent updates.
    pub update_rate: u64,
    pub trace_len: usize,
    /// Leading steps of every trace excluded from the loss.
    pub n_err: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    pub start_gate: StartGate,
    pub buffer_episodes: usize,
    /// Training step budget.
    pub max_steps: u64,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            eta: 0.001,
            update_rate: 4,
            trace_len: 10,
            n_err: 7,
            batch: 10,
            adam: AdamConfig::default(),
            start_gate: StartGate::Episodes(999),
            buffer_episodes: 1000,
            max_steps: 1_000_000,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if self.update_rate == 0 {
            return Err(Error::config("update_rate must be >= 1"));
        }
        if self.trace_len == 0 || self.batch == 0 {
            return Err(Error::config("trace_len and batch must be >= 1"));
        }
        if self.n_err >= self.trace_len {
            return Err(Error::config(format!(
                "n_err ({}) must be smaller than trace_len ({})",
                self.n_err, self.trace_len
            )));
        }
        if !(self.adam.lr >= 0.0) {
            return Err(Error::config(format!("lr must be non-negative, got {}", self.adam.lr)));
        }
        if self.buffer_episodes == 0 {
            return Err(Error::config("buffer_episodes must be >= 1"));
        }
        Ok(())
    }

    /// Trailing steps of each trace that carry loss.
    pub fn learned_steps(&self) -> usize {
        self.trace_len - self.n_err
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-episode summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: u64,
    pub start: usize,
    pub length: usize,
    pub cum_reward: f64,
    pub mean_reward: f64,
    /// Strategy ε when the episode ended (`None` for pure Boltzmann or eval).
    pub epsilon: Option<f64>,
    pub collided: bool,
    /// Per-step rewards in order.
    pub rewards: Vec<f64>,
}

/// Training-time notifications for logging.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentEvent {
    Step { step: u64, epsilon: Option<f64>, exploring: bool, action: usize },
    Update { step: u64, episode: u64, loss: f64, epsilon: Option<f64> },
}

/// Targets plus the greedy-model and uniform-model returns of the same
/// transitions, all `b × t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet<T> {
    pub targets: Tensor<T>,
    pub greedy_returns: Tensor<T>,
    pub uniform_returns: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct D3rqnAgent<T> {
    config: AgentConfig,
    main: ParamSet<T>,
    target: ParamSet<T>,
    optimizer: Adam<T>,
    buffer: ReplayBuffer<T>,
    strategy: Strategy<T>,
    rng: ChaCha8Rng,
    steps: u64,
    episodes: u64,
    updates: u64,
    /// Recurrent state and observation of the latest action, used to
    /// measure how an update moved the chosen action's value.
    held: Option<(RecurrentState<T>, Vec<T>)>,
}

fn to_scalars<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

impl<T: Scalar> D3rqnAgent<T> {
    pub fn new(config: AgentConfig, main: ParamSet<T>, strategy: Strategy<T>) -> Result<Self> {
        config.validate()?;
        let target = main.clone();
        let optimizer = Adam::new(&main, config.adam);
        let buffer = ReplayBuffer::new(config.buffer_episodes)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut agent = Self {
            config,
            main,
            target,
            optimizer,
            buffer,
            strategy,
            rng,
            steps: 0,
            episodes: 0,
            updates: 0,
            held: None,
        };
        agent.sync_warmup();
        Ok(agent)
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn main(&self) -> &ParamSet<T> {
        &self.main
    }

    pub fn target(&self) -> &ParamSet<T> {
        &self.target
    }

    /// Replaces both networks, e.g. after loading a checkpoint.
    pub fn load_params(&mut self, params: ParamSet<T>) -> Result<()> {
        if !params.same_shape(&self.main) {
            return Err(Error::config("checkpoint network does not match agent network"));
        }
        self.target = params.clone();
        self.optimizer = Adam::new(&params, self.config.adam);
        self.main = params;
        Ok(())
    }

    /// Overrides the target network alone.
    pub fn set_target(&mut self, target: ParamSet<T>) -> Result<()> {
        if !target.same_shape(&self.main) {
            return Err(Error::config("target network does not match main network"));
        }
        self.target = target;
        Ok(())
    }

    pub fn buffer(&self) -> &ReplayBuffer<T> {
        &self.buffer
    }

    pub fn strategy(&self) -> &Strategy<T> {
        &self.strategy
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn budget_exhausted(&self) -> bool {
        self.steps >= self.config.max_steps
    }

    fn sync_warmup(&mut self) {
        let ready = self.buffer.ready(self.config.start_gate);
        self.strategy.set_warmup(!ready);
    }

    /// One forward step on the main network, then the strategy's choice.
    pub fn act(
        &mut self,
        obs: &[T],
        hidden: &RecurrentState<T>,
    ) -> Result<(ActionChoice<T>, RecurrentState<T>, Vec<T>)> {
        let (q, next) = self.main.step(obs, hidden)?;
        let choice = self.strategy.select(&q, &mut self.rng)?;
        self.held = Some((hidden.clone(), obs.to_vec()));
        Ok((choice, next, q))
    }

    /// Greedy action from the main network; never touches agent state.
    pub fn act_greedy(&self, obs: &[T], hidden: &RecurrentState<T>) -> Result<(usize, RecurrentState<T>)> {
        let (q, next) = self.main.step(obs, hidden)?;
        Ok((argmax(&q), next))
    }

    fn next_obs_tensor(trace: &Trace<T>) -> Result<Tensor<T>> {
        Tensor::from_rows(trace.next_obs_rows())
    }

    /// Double-estimator targets `y = r + γ·Q_target(h′, argmax_a Q_main(h′, a))`,
    /// with `y = r` on terminal steps. Both networks read the next-observation
    /// trace from a zeroed recurrent state.
    pub fn compute_targets(&self, traces: &[Trace<T>]) -> Result<Tensor<T>> {
        Ok(self.compute_target_set(traces)?.targets)
    }

    pub fn compute_target_set(&self, traces: &[Trace<T>]) -> Result<TargetSet<T>> {
        let gamma = T::lit(self.config.gamma);
        let (b, t) = (traces.len(), traces.first().map_or(0, Trace::len));
        let mut targets = Vec::with_capacity(b * t);
        let mut greedy = Vec::with_capacity(b * t);
        let mut uniform = Vec::with_capacity(b * t);
        for trace in traces {
            if trace.len() != t {
                return Err(Error::shape("traces in a batch must share one length"));
            }
            let next = Self::next_obs_tensor(trace)?;
            let (q_main, _) = self.main.forward_trace(&next, &self.main.initial_state())?;
            let (q_target, _) = self.target.forward_trace(&next, &self.target.initial_state())?;
            for i in 0..t {
                let r = trace.rewards[i];
                if trace.terminals[i] {
                    targets.push(r);
                    greedy.push(r);
                    uniform.push(r);
                    continue;
                }
                let row = q_target.row(i);
                let chosen = argmax(q_main.row(i));
                targets.push(r + gamma * row[chosen]);
                greedy.push(r + gamma * crate::scalar::max_value(row));
                uniform.push(r + gamma * mean(row));
            }
        }
        Ok(TargetSet {
            targets: Tensor::new(vec![b, t], targets)?,
            greedy_returns: Tensor::new(vec![b, t], greedy)?,
            uniform_returns: Tensor::new(vec![b, t], uniform)?,
        })
    }

    /// Batch masked loss and its gradient w.r.t. the main network.
    pub fn loss_and_gradient(&self, traces: &[Trace<T>], targets: &Tensor<T>) -> Result<(T, ParamSet<T>)> {
        let mut grad = self.main.zeros_like();
        let weight = T::one() / T::from_usize_lossy(traces.len());
        let mut loss = T::zero();
        for (j, trace) in traces.iter().enumerate() {
            let obs = Tensor::from_rows(trace.obs_rows())?;
            loss = loss
                + self.main.accumulate_masked(
                    &obs,
                    &trace.actions,
                    targets.row(j),
                    self.config.n_err,
                    weight,
                    &mut grad,
                )?;
        }
        Ok((loss * weight, grad))
    }

    /// One update on a given batch: targets, masked-loss Adam step, soft
    /// target update and BMC return observations. Returns the loss.
    pub fn train_on_traces(&mut self, traces: &[Trace<T>]) -> Result<T> {
        if traces.is_empty() {
            return Err(Error::Sampling("empty batch".into()));
        }
        let set = self.compute_target_set(traces)?;
        let (loss, grad) = self.loss_and_gradient(traces, &set.targets)?;
        if !loss.is_finite() {
            return Err(Error::non_finite("loss"));
        }
        self.optimizer.step(&mut self.main, &grad)?;
        if !self.main.is_finite() {
            return Err(Error::non_finite("main network parameters"));
        }
        soft_update(&self.main, &mut self.target, self.config.eta)?;
        if self.strategy.wants_returns() {
            for j in 0..traces.len() {
                for i in self.config.n_err..traces[j].len() {
                    self.strategy.on_return(
                        set.greedy_returns.get2(j, i),
                        set.uniform_returns.get2(j, i),
                        set.targets.get2(j, i),
                    );
                }
            }
        }
        self.updates += 1;
        Ok(loss)
    }

    /// Samples a batch, updates, and feeds the value change of the held
    /// action to the strategy.
    pub fn train_step(&mut self) -> Result<T> {
        let traces = self.buffer.sample_traces(self.config.batch, self.config.trace_len, &mut self.rng)?;
        let before = match &self.held {
            Some((h, obs)) => Some(self.main.step(obs, h)?.0),
            None => None,
        };
        let loss = self.train_on_traces(&traces)?;
        if let (Some(q_before), Some((h, obs))) = (before, &self.held) {
            let q_after = self.main.step(obs, h)?.0;
            let delta = delta_err(&q_after, &q_before, argmax(&q_before));
            self.strategy.on_update(delta);
        }
        Ok(loss)
    }

    /// Runs one training episode from a random training start point,
    /// stopping at collision, the step cap or the step budget.
    pub fn run_episode<E: Environment>(
        &mut self,
        env: &mut E,
        mut on_event: impl FnMut(&AgentEvent),
    ) -> Result<EpisodeStats> {
        let start = self.rng.gen_range(0..env.start_count(StartSet::Train));
        let mut obs: Vec<T> = to_scalars(&env.reset_with(start, StartSet::Train, &mut self.rng)?);
        if obs.len() != self.main.config().obs_len() {
            return Err(Error::config("environment observation size does not match network"));
        }
        let mut hidden = self.main.initial_state();
        let mut rewards = Vec::new();
        let mut collided = false;
        self.sync_warmup();
        loop {
            let (choice, next_hidden, _) = self.act(&obs, &hidden)?;
            let out = env.step(choice.action)?;
            let next_obs: Vec<T> = to_scalars(&out.obs);
            self.buffer.push(Transition {
                obs: obs.clone(),
                action: choice.action,
                reward: T::lit(out.reward),
                next_obs: next_obs.clone(),
                terminal: out.terminal,
            })?;
            rewards.push(out.reward);
            self.steps += 1;
            self.strategy.on_step(self.steps);
            on_event(&AgentEvent::Step {
                step: self.steps,
                epsilon: self.strategy.effective_epsilon().map(Scalar::as_f64),
                exploring: choice.exploring,
                action: choice.action,
            });
            if !self.strategy.in_warmup() && self.steps % self.config.update_rate == 0 {
                let loss = self.train_step()?;
                on_event(&AgentEvent::Update {
                    step: self.steps,
                    episode: self.episodes,
                    loss: loss.as_f64(),
                    epsilon: self.strategy.effective_epsilon().map(Scalar::as_f64),
                });
            }
            obs = next_obs;
            hidden = next_hidden;
            if out.terminal {
                collided = true;
                break;
            }
            if out.truncated || self.budget_exhausted() {
                break;
            }
        }
        self.buffer.end_episode();
        self.sync_warmup();
        let stats = EpisodeStats {
            episode: self.episodes,
            start,
            length: rewards.len(),
            cum_reward: rewards.iter().sum(),
            mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
            epsilon: self.strategy.effective_epsilon().map(Scalar::as_f64),
            collided,
            rewards,
        };
        self.episodes += 1;
        Ok(stats)
    }

    /// Greedy evaluation episode; borrows the agent immutably, so neither
    /// parameters nor replay memory can change.
    pub fn evaluate_episode<E: Environment, R: Rng>(
        &self,
        env: &mut E,
        start: usize,
        set: StartSet,
        rng: &mut R,
    ) -> Result<EpisodeStats> {
        evaluate_policy(env, start, set, rng, |obs, hidden| {
            let obs: Vec<T> = to_scalars(obs);
            let (a, next) = self.act_greedy(&obs, hidden)?;
            Ok((a, next))
        }, self.main.initial_state())
    }
}

/// Runs one episode under an arbitrary stateful policy.
pub fn evaluate_policy<E: Environment, R: Rng, S>(
    env: &mut E,
    start: usize,
    set: StartSet,
    rng: &mut R,
    mut policy: impl FnMut(&[f64], &S) -> Result<(usize, S)>,
    init: S,
) -> Result<EpisodeStats> {
    let mut obs = env.reset_with(start, set, rng)?;
    let mut state = init;
    let mut rewards = Vec::new();
    let mut collided = false;
    loop {
        let (action, next) = policy(&obs, &state)?;
        let out = env.step(action)?;
        rewards.push(out.reward);
        obs = out.obs;
        state = next;
        if out.terminal {
            collided = true;
            break;
        }
        if out.truncated {
            break;
        }
    }
    Ok(EpisodeStats {
        episode: 0,
        start,
        length: rewards.len(),
        cum_reward: rewards.iter().sum(),
        mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
        epsilon: None,
        collided,
        rewards,
    })
}
