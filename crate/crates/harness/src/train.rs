//! Training runs and their on-disk layout.
//!
//! A run directory holds:
//!
//! * `config.txt`: the full resolved configuration
//! * `metrics.csv`: one row per episode,
//!   `episode,steps,cum_reward,mean_reward,epsilon,loss_ma,wall_ms`
//! * `updates.csv`: one row per agent update, `step,episode,loss,epsilon`
//! * `steps.csv`: every `log.step_every`-th step, `step,epsilon,exploring`
//! * `checkpoint_<step>.ckpt` periodic and `final.ckpt` closing checkpoints
//!
//! `epsilon` is `NaN` for pure Boltzmann exploration, `loss_ma` is `NaN`
//! until the first update, and `wall_ms` is 0 unless `log.record_wall_ms`.

use std::collections::VecDeque;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use d3rqn::agent::{AgentEvent, D3rqnAgent};
use d3rqn::envsim::{RoadEnv, RoadWorld};
use d3rqn::explore::Strategy;
use d3rqn::nnet::{save, ParamSet};

use crate::config::RunConfig;
use crate::error::{HResult, HarnessError};

pub const METRICS_HEADER: [&str; 7] = ["episode", "steps", "cum_reward", "mean_reward", "epsilon", "loss_ma", "wall_ms"];
pub const UPDATES_HEADER: [&str; 4] = ["step", "episode", "loss", "epsilon"];
pub const STEPS_HEADER: [&str; 3] = ["step", "epsilon", "exploring"];
pub const FINAL_CHECKPOINT: &str = "final.ckpt";
pub const CONFIG_FILE: &str = "config.txt";

/// Trailing window of the `loss_ma` column.
const LOSS_WINDOW: usize = 100;

pub fn load_world(track: &str) -> HResult<RoadWorld> {
    if track == "default" {
        Ok(RoadWorld::default_track())
    } else {
        RoadWorld::load(Path::new(track))
            .map_err(|e| HarnessError::Config(format!("track {track}: {e}")))
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub episodes: u64,
    pub steps: u64,
    pub updates: u64,
    pub final_checkpoint: PathBuf,
}

fn checkpoint_path(dir: &Path, step: u64) -> PathBuf {
    dir.join(format!("checkpoint_{step:09}.ckpt"))
}

/// Trains per `cfg`, writing everything under `cfg.out_dir`.
pub fn cmd_train(cfg: &RunConfig) -> HResult<TrainSummary> {
    cfg.validate()?;
    let world = Arc::new(load_world(&cfg.track)?);
    let mut env = RoadEnv::new(world, cfg.env.clone())?;
    let params = ParamSet::<f64>::new(cfg.network_config())?;
    let strategy = Strategy::new(cfg.strategy, cfg.strategy_params()?)?;
    let mut agent = D3rqnAgent::new(cfg.agent_config(), params, strategy)?;

    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.dump())?;
    let mut metrics = csv::Writer::from_path(dir.join("metrics.csv"))?;
    metrics.write_record(METRICS_HEADER)?;
    let mut updates = BufWriter::new(File::create(dir.join("updates.csv"))?);
    writeln!(updates, "{}", UPDATES_HEADER.join(","))?;
    let mut steps = BufWriter::new(File::create(dir.join("steps.csv"))?);
    writeln!(steps, "{}", STEPS_HEADER.join(","))?;

    let started = Instant::now();
    let mut losses: VecDeque<f64> = VecDeque::with_capacity(LOSS_WINDOW);
    let mut next_checkpoint = cfg.log.checkpoint_every;
    let step_every = cfg.log.step_every;
    while !agent.budget_exhausted() && (cfg.max_episodes == 0 || agent.episodes() < cfg.max_episodes) {
        let mut io_error = None;
        let outcome = agent.run_episode(&mut env, |event| {
            let written = match event {
                AgentEvent::Step { step, epsilon, exploring, .. } if step % step_every == 0 => {
                    writeln!(steps, "{step},{},{}", fmt_opt(*epsilon), u8::from(*exploring))
                }
                AgentEvent::Step { .. } => Ok(()),
                AgentEvent::Update { step, episode, loss, epsilon } => {
                    if losses.len() == LOSS_WINDOW {
                        losses.pop_front();
                    }
                    losses.push_back(*loss);
                    writeln!(updates, "{step},{episode},{loss},{}", fmt_opt(*epsilon))
                }
            };
            if let Err(e) = written {
                io_error.get_or_insert(e);
            }
        });
        if let Some(e) = io_error {
            return Err(e.into());
        }
        let stats = match outcome {
            Ok(stats) => stats,
            Err(e) => {
                // Flush what we have; periodic checkpoints stay in place.
                metrics.flush()?;
                updates.flush()?;
                steps.flush()?;
                return Err(HarnessError::Runtime(format!(
                    "training stopped at step {}: {e}",
                    agent.steps()
                )));
            }
        };
        let loss_ma = (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64);
        let wall_ms = if cfg.log.record_wall_ms { started.elapsed().as_millis() } else { 0 };
        metrics.write_record([
            stats.episode.to_string(),
            stats.length.to_string(),
            stats.cum_reward.to_string(),
            stats.mean_reward.to_string(),
            fmt_opt(stats.epsilon),
            fmt_opt(loss_ma),
            wall_ms.to_string(),
        ])?;
        if cfg.log.checkpoint_every > 0 && agent.steps() >= next_checkpoint {
            save(agent.main(), &checkpoint_path(&dir, agent.steps()))?;
            while next_checkpoint <= agent.steps() {
                next_checkpoint += cfg.log.checkpoint_every;
            }
        }
    }
    metrics.flush()?;
    updates.flush()?;
    steps.flush()?;
    let final_checkpoint = dir.join(FINAL_CHECKPOINT);
    save(agent.main(), &final_checkpoint)?;
    Ok(TrainSummary {
        run_dir: dir,
        episodes: agent.episodes(),
        steps: agent.steps(),
        updates: agent.updates(),
        final_checkpoint,
    })
}
