//! Run configuration: a flat file of dotted `key = value` lines.
//!
//! Blank lines and lines starting with `#` are ignored; unknown keys are
//! errors. Any key can be overridden from the environment with the `APP_`
//! prefix, upper-casing the key and writing `.` as `__`, e.g.
//! `APP_AGENT__N_ERR=5` for `agent.n_err`.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use d3rqn::agent::AgentConfig;
use d3rqn::envsim::EnvConfig;
use d3rqn::explore::{DecreasingSchedule, StrategyKind, StrategyParams};
use d3rqn::nnet::NetworkConfig;
use d3rqn::replay::StartGate;

use crate::error::{HResult, HarnessError};

pub const ENV_PREFIX: &str = "APP_";

#[derive(Debug, Clone, PartialEq)]
pub struct LogConfig {
    /// Record every n-th environment step in `steps.csv`.
    pub step_every: u64,
    /// Steps between periodic checkpoints (0 disables them).
    pub checkpoint_every: u64,
    /// Write measured wall time into `metrics.csv`; off keeps files
    /// byte-reproducible.
    pub record_wall_ms: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub total_steps: u64,
    /// Stop after this many episodes even if steps remain (0 = no limit).
    pub max_episodes: u64,
    pub out_dir: PathBuf,
    pub log: LogConfig,
    pub agent: AgentConfig,
    pub net: NetworkConfig,
    /// `default` or a path to a track file.
    pub track: String,
    pub env: EnvConfig,
    pub strategy: StrategyKind,
    pub params: StrategyParams,
    pub eval_trials: usize,
    /// Updates start once the buffer is half full instead of after
    /// `start_episodes` episodes.
    pub start_half_capacity: bool,
    pub start_episodes: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            total_steps: 1_000_000,
            max_episodes: 0,
            out_dir: PathBuf::from("runs/default"),
            log: LogConfig { step_every: 100, checkpoint_every: 100_000, record_wall_ms: false },
            agent: AgentConfig::default(),
            net: NetworkConfig::default(),
            track: "default".into(),
            env: EnvConfig::default(),
            strategy: StrategyKind::Softmax,
            params: StrategyParams::default(),
            eval_trials: 30,
            start_half_capacity: false,
            start_episodes: 999,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> HResult<T> {
    value
        .parse()
        .map_err(|_| HarnessError::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> HResult<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(HarnessError::Config(format!("{key}: expected true or false, got `{value}`"))),
    }
}

fn pair(key: &str, value: impl Display) -> (String, String) {
    (key.to_string(), value.to_string())
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> HResult<()> {
        let v = value.trim();
        let s = &mut self.params.schedule;
        match key {
            "seed" => self.seed = parse(key, v)?,
            "total_steps" => self.total_steps = parse(key, v)?,
            "max_episodes" => self.max_episodes = parse(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "log.step_every" => self.log.step_every = parse(key, v)?,
            "log.checkpoint_every" => self.log.checkpoint_every = parse(key, v)?,
            "log.record_wall_ms" => self.log.record_wall_ms = parse_bool(key, v)?,
            "agent.gamma" => self.agent.gamma = parse(key, v)?,
            "agent.eta" => self.agent.eta = parse(key, v)?,
            "agent.update_rate" => self.agent.update_rate = parse(key, v)?,
            "agent.trace_len" => self.agent.trace_len = parse(key, v)?,
            "agent.n_err" => self.agent.n_err = parse(key, v)?,
            "agent.batch" => self.agent.batch = parse(key, v)?,
            "agent.lr" => self.agent.adam.lr = parse(key, v)?,
            "agent.beta1" => self.agent.adam.beta1 = parse(key, v)?,
            "agent.beta2" => self.agent.adam.beta2 = parse(key, v)?,
            "agent.adam_eps" => self.agent.adam.eps = parse(key, v)?,
            "agent.buffer_episodes" => self.agent.buffer_episodes = parse(key, v)?,
            "agent.start_rule" => {
                self.start_half_capacity = match v {
                    "fixed" => false,
                    "half_capacity" => true,
                    _ => {
                        return Err(HarnessError::Config(format!(
                            "{key}: expected fixed or half_capacity, got `{v}`"
                        )))
                    }
                }
            }
            "agent.start_episodes" => self.start_episodes = parse(key, v)?,
            "net.conv" | "net.encoder" | "net.lstm_width" => self.net.set(&key[4..], v)?,
            "env.track" => self.track = v.to_string(),
            "env.beta" => self.env.beta = parse(key, v)?,
            "env.dt" => self.env.dt = parse(key, v)?,
            "env.speed" => self.env.speed = parse(key, v)?,
            "env.steer_gain" => self.env.steer_gain = parse(key, v)?,
            "env.step_cap" => self.env.step_cap = parse(key, v)?,
            "env.window_depth" => self.env.window_depth = parse(key, v)?,
            "env.window_width" => self.env.window_width = parse(key, v)?,
            "env.start_jitter" => self.env.start_jitter = parse(key, v)?,
            "env.heading_jitter" => self.env.heading_jitter = parse(key, v)?,
            "strategy.kind" => self.strategy = parse(key, v)?,
            "strategy.epsilon" => self.params.epsilon = parse(key, v)?,
            "strategy.temperature" => self.params.temperature = parse(key, v)?,
            "strategy.eps_start" => s.eps_start = parse(key, v)?,
            "strategy.eps_last" => s.eps_last = parse(key, v)?,
            "strategy.eps_end" => s.eps_end = parse(key, v)?,
            "strategy.n_start" => s.n_start = parse(key, v)?,
            "strategy.eps_ann" => s.eps_ann = parse(key, v)?,
            "strategy.n_max" => s.n_max = parse(key, v)?,
            "strategy.lambda" => self.params.lambda = parse(key, v)?,
            "strategy.nu" => self.params.nu = parse(key, v)?,
            "strategy.vdbe_epsilon0" => self.params.vdbe_epsilon0 = parse(key, v)?,
            "strategy.alpha0" => self.params.bmc.alpha0 = parse(key, v)?,
            "strategy.beta0" => self.params.bmc.beta0 = parse(key, v)?,
            "strategy.a0" => self.params.bmc.a0 = parse(key, v)?,
            "strategy.b0" => self.params.bmc.b0 = parse(key, v)?,
            "strategy.mu0" => self.params.bmc.mu0 = parse(key, v)?,
            "strategy.tau0" => self.params.bmc.tau0 = parse(key, v)?,
            "eval.trials" => self.eval_trials = parse(key, v)?,
            _ => return Err(HarnessError::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }
}

impl RunConfig {
    /// Parses config text on top of the defaults.
    pub fn parse_str(text: &str) -> HResult<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |e: HarnessError| HarnessError::Config(format!("line {}: {e}", n + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(HarnessError::Config(format!("expected `key = value`, got `{line}`"))))?;
            cfg.set(key.trim(), value.trim()).map_err(at)?;
        }
        Ok(cfg)
    }

    /// Applies `APP_*` overrides from the given variables.
    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(&mut self, vars: I) -> HResult<()> {
        for (name, value) in vars {
            if let Some(rest) = name.strip_prefix(ENV_PREFIX) {
                let key = rest.to_ascii_lowercase().replace("__", ".");
                self.set(&key, &value)
                    .map_err(|e| HarnessError::Config(format!("environment variable {name}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let s = &self.params.schedule;
        let b = &self.params.bmc;
        let a = &self.agent;
        let e = &self.env;
        let net = self.net.to_text();
        let net_value = |k: &str| {
            net.lines()
                .find_map(|l| l.split_once('=').filter(|(key, _)| key.trim() == k).map(|(_, v)| v.trim().to_string()))
                .unwrap_or_default()
        };
        vec![
            pair("seed", self.seed),
            pair("total_steps", self.total_steps),
            pair("max_episodes", self.max_episodes),
            pair("out_dir", self.out_dir.display()),
            pair("log.step_every", self.log.step_every),
            pair("log.checkpoint_every", self.log.checkpoint_every),
            pair("log.record_wall_ms", self.log.record_wall_ms),
            pair("agent.gamma", a.gamma),
            pair("agent.eta", a.eta),
            pair("agent.update_rate", a.update_rate),
            pair("agent.trace_len", a.trace_len),
            pair("agent.n_err", a.n_err),
            pair("agent.batch", a.batch),
            pair("agent.lr", a.adam.lr),
            pair("agent.beta1", a.adam.beta1),
            pair("agent.beta2", a.adam.beta2),
            pair("agent.adam_eps", a.adam.eps),
            pair("agent.buffer_episodes", a.buffer_episodes),
            pair("agent.start_rule", if self.start_half_capacity { "half_capacity" } else { "fixed" }),
            pair("agent.start_episodes", self.start_episodes),
            pair("net.conv", net_value("conv")),
            pair("net.encoder", net_value("encoder")),
            pair("net.lstm_width", self.net.lstm_width),
            pair("env.track", &self.track),
            pair("env.beta", e.beta),
            pair("env.dt", e.dt),
            pair("env.speed", e.speed),
            pair("env.steer_gain", e.steer_gain),
            pair("env.step_cap", e.step_cap),
            pair("env.window_depth", e.window_depth),
            pair("env.window_width", e.window_width),
            pair("env.start_jitter", e.start_jitter),
            pair("env.heading_jitter", e.heading_jitter),
            pair("strategy.kind", self.strategy),
            pair("strategy.epsilon", self.params.epsilon),
            pair("strategy.temperature", self.params.temperature),
            pair("strategy.eps_start", s.eps_start),
            pair("strategy.eps_last", s.eps_last),
            pair("strategy.eps_end", s.eps_end),
            pair("strategy.n_start", s.n_start),
            pair("strategy.eps_ann", s.eps_ann),
            pair("strategy.n_max", s.n_max),
            pair("strategy.lambda", self.params.lambda),
            pair("strategy.nu", self.params.nu),
            pair("strategy.vdbe_epsilon0", self.params.vdbe_epsilon0),
            pair("strategy.alpha0", b.alpha0),
            pair("strategy.beta0", b.beta0),
            pair("strategy.a0", b.a0),
            pair("strategy.b0", b.b0),
            pair("strategy.mu0", b.mu0),
            pair("strategy.tau0", b.tau0),
            pair("eval.trials", self.eval_trials),
        ]
    }

    /// Full config text; parsing it yields an equal config.
    pub fn dump(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Network layout: observation window from the environment, one output
    /// per steering action, seeded by the run seed.
    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            obs_shape: (self.env.window_depth, self.env.window_width),
            actions: d3rqn::envsim::ACTIONS.len(),
            seed: self.seed,
            ..self.net.clone()
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            start_gate: if self.start_half_capacity {
                StartGate::HalfCapacity
            } else {
                StartGate::Episodes(self.start_episodes)
            },
            max_steps: self.total_steps,
            seed: self.seed,
            ..self.agent.clone()
        }
    }

    /// Strategy parameters with the decreasing schedule rebuilt from its
    /// (possibly edited) public fields.
    pub fn strategy_params(&self) -> HResult<StrategyParams> {
        let s = self.params.schedule;
        let schedule = DecreasingSchedule::new(s.eps_start, s.eps_last, s.eps_end, s.n_start, s.eps_ann, s.n_max)?;
        Ok(StrategyParams { schedule, ..self.params.clone() })
    }

    pub fn validate(&self) -> HResult<()> {
        self.agent_config().validate()?;
        self.network_config().validate()?;
        self.env.validate()?;
        let params = self.strategy_params()?;
        params.validate()?;
        if self.total_steps == 0 {
            return Err(HarnessError::Config("total_steps must be >= 1".into()));
        }
        if !self.start_half_capacity && self.start_episodes > self.agent.buffer_episodes {
            return Err(HarnessError::Config(format!(
                "agent.start_episodes ({}) exceeds agent.buffer_episodes ({}); updates would never start",
                self.start_episodes, self.agent.buffer_episodes
            )));
        }
        if self.strategy == StrategyKind::Decreasing && params.schedule.n_start >= self.total_steps {
            return Err(HarnessError::Config(format!(
                "strategy.n_start ({}) must be below total_steps ({})",
                params.schedule.n_start, self.total_steps
            )));
        }
        if self.log.step_every == 0 {
            return Err(HarnessError::Config("log.step_every must be >= 1".into()));
        }
        if self.eval_trials == 0 {
            return Err(HarnessError::Config("eval.trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// Reads, overrides from the process environment, and validates.
pub fn load_config(path: &Path) -> HResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = RunConfig::parse_str(&text)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    cfg.apply_env(std::env::vars())?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse_str("").unwrap(), RunConfig::default());
        assert_eq!(RunConfig::parse_str("# nothing\n\n").unwrap(), RunConfig::default());
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn bmc_priors_round_trip() {
        let text = "strategy.kind = bmc\nstrategy.alpha0 = 25\nstrategy.beta0 = 25\nstrategy.a0 = 250\n\
                    strategy.b0 = 250\nstrategy.mu0 = 0\nstrategy.tau0 = 1\n";
        let cfg = RunConfig::parse_str(text).unwrap();
        assert_eq!(cfg.strategy, StrategyKind::Bmc);
        let again = RunConfig::parse_str(&cfg.dump()).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.params.bmc, d3rqn::explore::BmcPrior::default());
    }

    #[test]
    fn dump_round_trips_edited_values() {
        let mut cfg = RunConfig::default();
        for (k, v) in [
            ("net.conv", "4x3:relu"),
            ("net.encoder", "48:tanh"),
            ("agent.lr", "0.00031"),
            ("agent.start_rule", "half_capacity"),
            ("env.track", "tracks/loop.track"),
            ("strategy.kind", "vdbe_softmax"),
            ("log.record_wall_ms", "true"),
        ] {
            cfg.set(k, v).unwrap();
        }
        assert_eq!(RunConfig::parse_str(&cfg.dump()).unwrap(), cfg);
    }

    #[test]
    fn mask_longer_than_trace_is_rejected() {
        let cfg = RunConfig::parse_str("agent.n_err = 12\nagent.trace_len = 10\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_and_bad_values_report_lines() {
        let err = RunConfig::parse_str("seed = 1\nagent.nerr = 3\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("agent.nerr"), "{err}");
        let err = RunConfig::parse_str("\nagent.gamma = fast\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(RunConfig::parse_str("just words").is_err());
    }

    #[test]
    fn environment_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_env(vec![
            ("APP_AGENT__N_ERR".to_string(), "5".to_string()),
            ("APP_SEED".to_string(), "9".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ])
        .unwrap();
        assert_eq!((cfg.agent.n_err, cfg.seed), (5, 9));
        assert!(cfg.apply_env(vec![("APP_NOPE".to_string(), "1".to_string())]).is_err());
    }

    #[test]
    fn schedule_and_gate_constraints() {
        let cfg = RunConfig::parse_str("strategy.n_start = 900000\nstrategy.eps_ann = 200000\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::parse_str("agent.start_episodes = 2000\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::parse_str("strategy.kind = decreasing\ntotal_steps = 40000\n").unwrap();
        assert!(cfg.validate().is_err());
    }
}
