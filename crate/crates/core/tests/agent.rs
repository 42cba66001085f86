use d3rqn::agent::{evaluate_policy, AgentConfig, D3rqnAgent, Environment};
use d3rqn::envsim::{StartSet, StepOutcome};
use d3rqn::explore::{Strategy, StrategyKind, StrategyParams};
use d3rqn::nnet::{dueling_q, masked_loss, Activation, AdamConfig, LayerSpec, NetworkConfig, ParamSet, Tensor};
use d3rqn::replay::{StartGate, Trace};
use d3rqn::{argmax, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn net(obs: (usize, usize), seed: u64) -> ParamSet<f64> {
    ParamSet::new(NetworkConfig {
        obs_shape: obs,
        conv: None,
        encoder: vec![LayerSpec { width: 6, activation: Activation::Tanh }],
        lstm_width: 5,
        actions: 5,
        seed,
    })
    .unwrap()
}

fn strategy(kind: StrategyKind) -> Strategy<f64> {
    Strategy::new(kind, StrategyParams::default()).unwrap()
}

/// Zero weights, biases chosen so every input gives exactly `q`.
fn constant_q_net(q: &[f64]) -> ParamSet<f64> {
    let mut p = net((1, 2), 0);
    let mean = q.iter().sum::<f64>() / q.len() as f64;
    p.value.weight.iter_mut().for_each(|w| *w = 0.0);
    p.advantage.weight.iter_mut().for_each(|w| *w = 0.0);
    p.value.bias[0] = mean;
    p.advantage.bias.copy_from_slice(q);
    p
}

fn single_step_trace(reward: f64, terminal: bool) -> Trace<f64> {
    Trace {
        episode: 0,
        start: 0,
        observations: vec![vec![0.3, 0.7], vec![0.1, 0.2]],
        actions: vec![1],
        rewards: vec![reward],
        terminals: vec![terminal],
    }
}

#[test]
fn double_estimator_worked_example() {
    let main = constant_q_net(&[0.1, 0.9, 0.3, 0.0, 0.2]);
    let target = constant_q_net(&[0.5, 0.2, 0.1, 0.4, 0.3]);
    let cfg = AgentConfig { trace_len: 1, n_err: 0, batch: 1, ..Default::default() };
    let mut agent = D3rqnAgent::new(cfg, main, strategy(StrategyKind::Constant)).unwrap();
    agent.set_target(target).unwrap();
    let y = agent.compute_targets(&[single_step_trace(1.0, false)]).unwrap();
    assert!((y.get2(0, 0) - 1.198).abs() < 1e-12, "{}", y.get2(0, 0));
    let y = agent.compute_targets(&[single_step_trace(1.0, true)]).unwrap();
    assert_eq!(y.get2(0, 0), 1.0);
}

#[test]
fn dueling_constant_shift_keeps_argmax_and_zero_mean_advantage() {
    let adv = [0.3, -1.2, 2.5, 0.0, 0.7];
    let q = dueling_q(1.5, &adv);
    let shifted: Vec<f64> = adv.iter().map(|a| a + 17.25).collect();
    let q2 = dueling_q(1.5, &shifted);
    assert_eq!(argmax(&q), argmax(&q2));
    let centered: f64 = q.iter().map(|x| x - 1.5).sum();
    assert!(centered.abs() < 1e-12);
}

fn fixed_batch() -> Vec<Trace<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    (0..3)
        .map(|k| Trace {
            episode: k,
            start: 0,
            observations: (0..5).map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
            actions: (0..4).map(|_| rng.gen_range(0..5)).collect(),
            rewards: (0..4).map(|_| rng.gen_range(0.0..1.0)).collect(),
            terminals: vec![false, false, false, k == 1],
        })
        .collect()
}

/// Batch loss evaluated only through forward passes.
fn oracle_loss(p: &ParamSet<f64>, traces: &[Trace<f64>], targets: &Tensor<f64>, n_err: usize) -> f64 {
    let mut preds = Vec::new();
    for tr in traces {
        let obs = Tensor::from_rows(tr.obs_rows()).unwrap();
        let (q, _) = p.forward_trace(&obs, &p.initial_state()).unwrap();
        preds.extend(tr.actions.iter().enumerate().map(|(i, &a)| q.get2(i, a)));
    }
    let pred = Tensor::new(vec![traces.len(), traces[0].len()], preds).unwrap();
    masked_loss(&pred, targets, n_err).unwrap()
}

#[test]
fn one_update_matches_finite_difference_adam_step() {
    let traces = fixed_batch();
    let (lr, eta, n_err) = (1e-3, 0.05, 1);
    let cfg = AgentConfig {
        trace_len: 4,
        n_err,
        batch: 3,
        eta,
        adam: AdamConfig { lr, ..AdamConfig::default() },
        ..Default::default()
    };
    let init = net((1, 2), 4);
    let mut agent = D3rqnAgent::new(cfg, init.clone(), strategy(StrategyKind::Constant)).unwrap();
    let targets = agent.compute_targets(&traces).unwrap();

    let theta = init.to_flat();
    let h = 1e-5;
    let mut probe = init.clone();
    let mut expected = theta.clone();
    for k in 0..theta.len() {
        let mut v = theta.clone();
        v[k] = theta[k] + h;
        probe.set_flat(&v).unwrap();
        let up = oracle_loss(&probe, &traces, &targets, n_err);
        v[k] = theta[k] - h;
        probe.set_flat(&v).unwrap();
        let down = oracle_loss(&probe, &traces, &targets, n_err);
        let g = (up - down) / (2.0 * h);
        // First Adam step: bias-corrected moments are g and g².
        expected[k] = theta[k] - lr * g / (g.abs() + 1e-8);
    }

    let loss = agent.train_on_traces(&traces).unwrap();
    assert!((loss - oracle_loss(&init, &traces, &targets, n_err)).abs() < 1e-12);
    let got = agent.main().to_flat();
    let worst = got.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "worst parameter deviation {worst:e}");

    let target = agent.target().to_flat();
    for ((t, th), e) in target.iter().zip(&theta).zip(&expected) {
        assert!((t - (eta * e + (1.0 - eta) * th)).abs() < 1e-6);
    }
}

#[test]
fn final_step_mask_ignores_earlier_residuals() {
    let traces = fixed_batch();
    let cfg = AgentConfig { trace_len: 4, n_err: 3, batch: 3, ..Default::default() };
    let agent = D3rqnAgent::new(cfg, net((1, 2), 5), strategy(StrategyKind::Constant)).unwrap();
    let y = agent.compute_targets(&traces).unwrap();
    let (_, g1) = agent.loss_and_gradient(&traces, &y).unwrap();
    let mut perturbed = y.clone();
    for j in 0..3 {
        for i in 0..3 {
            perturbed.data_mut()[j * 4 + i] += 100.0 * (j + i + 1) as f64;
        }
    }
    let (_, g2) = agent.loss_and_gradient(&traces, &perturbed).unwrap();
    assert_eq!(g1, g2);
}

#[test]
fn hidden_state_threading_matches_prefix_forward() {
    let cfg = AgentConfig { trace_len: 2, n_err: 0, ..Default::default() };
    let mut agent = D3rqnAgent::new(cfg, net((1, 2), 6), strategy(StrategyKind::Constant)).unwrap();
    let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.1, -(i as f64) * 0.2]).collect();
    let mut h = agent.main().initial_state();
    for (k, row) in rows.iter().enumerate() {
        let (_, next, q) = agent.act(row, &h).unwrap();
        let prefix = Tensor::from_rows(&rows[..=k]).unwrap();
        let (qs, fin) = agent.main().forward_trace(&prefix, &agent.main().initial_state()).unwrap();
        assert_eq!(qs.row(k), q.as_slice());
        assert_eq!(fin, next);
        h = next;
    }
}

#[test]
fn greedy_act_with_zero_epsilon_is_argmax() {
    let cfg = AgentConfig { trace_len: 2, n_err: 0, start_gate: StartGate::Episodes(0), ..Default::default() };
    let params = StrategyParams { epsilon: 0.0, ..Default::default() };
    let mut agent = D3rqnAgent::new(cfg, net((1, 2), 7), Strategy::new(StrategyKind::Constant, params).unwrap()).unwrap();
    let h = agent.main().initial_state();
    for i in 0..20 {
        let obs = [i as f64 * 0.05, 1.0];
        let (choice, _, q) = agent.act(&obs, &h).unwrap();
        assert_eq!(choice.action, argmax(&q));
        assert!(!choice.exploring);
    }
}

/// Two hidden states; the cue identifying the state is only visible on the
/// first step and the rewarded action equals the state index.
struct CueMemory {
    state: usize,
    t: usize,
    len: usize,
}

impl CueMemory {
    fn obs(&self) -> Vec<f64> {
        if self.t == 0 {
            if self.state == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }
        } else {
            vec![0.0, 0.0]
        }
    }
}

impl Environment for CueMemory {
    fn obs_len(&self) -> usize {
        2
    }

    fn start_count(&self, _set: StartSet) -> usize {
        2
    }

    fn reset_with<R: Rng>(&mut self, start: usize, _set: StartSet, _rng: &mut R) -> Result<Vec<f64>> {
        self.state = start;
        self.t = 0;
        Ok(self.obs())
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let reward = if action == self.state { 1.0 } else { 0.0 };
        self.t += 1;
        Ok(StepOutcome { obs: self.obs(), reward, terminal: false, truncated: self.t >= self.len })
    }
}

fn toy_agent(seed: u64) -> D3rqnAgent<f64> {
    let cfg = AgentConfig {
        gamma: 0.5,
        eta: 0.05,
        update_rate: 1,
        trace_len: 4,
        n_err: 0,
        batch: 8,
        adam: AdamConfig { lr: 5e-3, ..AdamConfig::default() },
        start_gate: StartGate::Episodes(20),
        buffer_episodes: 200,
        max_steps: 6000,
        seed,
    };
    let params = StrategyParams { epsilon: 0.2, ..Default::default() };
    let mut config = net((1, 2), seed).config().clone();
    config.encoder = vec![LayerSpec { width: 16, activation: Activation::Tanh }];
    config.lstm_width = 12;
    D3rqnAgent::new(cfg, ParamSet::new(config).unwrap(), Strategy::new(StrategyKind::Constant, params).unwrap())
        .unwrap()
}

#[test]
fn learns_remembered_cue_on_toy_pomdp() {
    let mut agent = toy_agent(3);
    let mut env = CueMemory { state: 0, t: 0, len: 4 };
    while !agent.budget_exhausted() {
        agent.run_episode(&mut env, |_| {}).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for state in 0..2 {
        let stats = agent.evaluate_episode(&mut env, state, StartSet::Test, &mut rng).unwrap();
        assert_eq!(stats.cum_reward, 4.0, "state {state}: rewards {:?}", stats.rewards);
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let run = |seed| {
        let mut agent = toy_agent(seed);
        let mut env = CueMemory { state: 0, t: 0, len: 4 };
        let mut log = Vec::new();
        for _ in 0..60 {
            agent.run_episode(&mut env, |e| log.push(format!("{e:?}"))).unwrap();
        }
        (agent.main().to_flat(), log)
    };
    let (a, la) = run(11);
    let (b, lb) = run(11);
    assert_eq!(la, lb);
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_ne!(run(12).0, a);
}

#[test]
fn evaluation_leaves_agent_untouched() {
    let mut agent = toy_agent(2);
    let mut env = CueMemory { state: 0, t: 0, len: 4 };
    for _ in 0..30 {
        agent.run_episode(&mut env, |_| {}).unwrap();
    }
    let before = (agent.main().clone(), agent.buffer().len(), agent.steps());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for s in 0..2 {
        let stats = agent.evaluate_episode(&mut env, s, StartSet::Train, &mut rng).unwrap();
        assert!(stats.length >= 1 && stats.length <= 4);
        assert!(stats.cum_reward <= stats.length as f64);
    }
    assert_eq!(before, (agent.main().clone(), agent.buffer().len(), agent.steps()));
}

#[test]
fn stub_policy_episode_statistics() {
    let mut env = CueMemory { state: 0, t: 0, len: 7 };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let stats = evaluate_policy(&mut env, 1, StartSet::Test, &mut rng, |_, _: &()| Ok((1, ())), ()).unwrap();
    assert_eq!(stats.length, 7);
    assert!(!stats.collided);
    assert_eq!(stats.cum_reward, 7.0);
}
