//! Evaluation campaigns: greedy (or uniformly random) play from every start
//! point of a set, `trials` times each.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use d3rqn::agent::{evaluate_policy, EpisodeStats, Environment};
use d3rqn::envsim::{RoadEnv, StartSet, ACTIONS};
use d3rqn::nnet::{load, ParamSet};
use d3rqn::{argmax, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{HResult, HarnessError};
use crate::train::{load_world, CONFIG_FILE};

/// Upper edges of the reward bins `[0,.25) [.25,.5) [.5,.75) [.75,1]`.
pub const BIN_EDGES: [f64; 3] = [0.25, 0.5, 0.75];
pub const BIN_LABELS: [&str; 4] = ["[0,0.25)", "[0.25,0.5)", "[0.5,0.75)", "[0.75,1]"];
pub const EVAL_HEADER: [&str; 11] = [
    "trial",
    "start",
    "length",
    "cum_reward",
    "mean_reward",
    "collided",
    "reached_cap",
    "bin_0",
    "bin_1",
    "bin_2",
    "bin_3",
];

pub fn reward_bin(r: f64) -> usize {
    BIN_EDGES.iter().position(|&edge| r < edge).unwrap_or(3)
}

pub fn histogram(rewards: &[f64]) -> [usize; 4] {
    let mut bins = [0; 4];
    for &r in rewards {
        bins[reward_bin(r)] += 1;
    }
    bins
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalEpisode {
    pub trial: usize,
    pub start: usize,
    pub length: usize,
    pub cum_reward: f64,
    pub mean_reward: f64,
    pub collided: bool,
    pub reached_cap: bool,
    pub bins: [usize; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthSummary {
    pub average: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: usize,
    /// Percentage of episodes that reached the step cap without collision.
    pub cfr: f64,
}

impl LengthSummary {
    pub fn of(episodes: &[&EvalEpisode]) -> Self {
        let n = episodes.len().max(1) as f64;
        let average = episodes.iter().map(|e| e.length as f64).sum::<f64>() / n;
        let var = episodes.iter().map(|e| (e.length as f64 - average).powi(2)).sum::<f64>() / n;
        let min = episodes.iter().map(|e| e.length).min().unwrap_or(0);
        let cfr = 100.0 * episodes.iter().filter(|e| e.reached_cap).count() as f64 / n;
        Self { average, std: var.sqrt(), min, cfr }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub set: StartSet,
    pub trials: usize,
    pub overall: LengthSummary,
    pub per_start: Vec<(usize, LengthSummary)>,
    pub histogram: [usize; 4],
    pub total_steps: usize,
    pub episodes: Vec<EvalEpisode>,
}

impl EvalReport {
    pub fn from_episodes(set: StartSet, trials: usize, episodes: Vec<EvalEpisode>) -> Self {
        let all: Vec<&EvalEpisode> = episodes.iter().collect();
        let mut starts: Vec<usize> = episodes.iter().map(|e| e.start).collect();
        starts.sort_unstable();
        starts.dedup();
        let per_start = starts
            .iter()
            .map(|&s| {
                let sel: Vec<&EvalEpisode> = episodes.iter().filter(|e| e.start == s).collect();
                (s, LengthSummary::of(&sel))
            })
            .collect();
        let mut histogram = [0; 4];
        for e in &episodes {
            for (h, b) in histogram.iter_mut().zip(e.bins) {
                *h += b;
            }
        }
        Self {
            set,
            trials,
            overall: LengthSummary::of(&all),
            per_start,
            histogram,
            total_steps: episodes.iter().map(|e| e.length).sum(),
            episodes,
        }
    }

    /// Plain-text table with the average / std / min / CFR columns.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8} {:>10} {:>10} {:>8} {:>8}", "start", "average", "std", "min", "CFR %");
        for (start, r) in &self.per_start {
            let _ = writeln!(s, "{start:<8} {:>10.1} {:>10.1} {:>8} {:>8.1}", r.average, r.std, r.min, r.cfr);
        }
        let r = &self.overall;
        let _ = writeln!(s, "{:<8} {:>10.1} {:>10.1} {:>8} {:>8.1}", "all", r.average, r.std, r.min, r.cfr);
        let total = self.total_steps.max(1) as f64;
        let _ = writeln!(s, "\nreward histogram over {} steps:", self.total_steps);
        for (label, count) in BIN_LABELS.iter().zip(self.histogram) {
            let _ = writeln!(s, "  {label:<12} {count:>9} ({:.1}%)", 100.0 * count as f64 / total);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> HResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(EVAL_HEADER)?;
        for e in &self.episodes {
            let mut row = vec![
                e.trial.to_string(),
                e.start.to_string(),
                e.length.to_string(),
                e.cum_reward.to_string(),
                e.mean_reward.to_string(),
                u8::from(e.collided).to_string(),
                u8::from(e.reached_cap).to_string(),
            ];
            row.extend(e.bins.iter().map(usize::to_string));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aggregate rows: one per start point plus `all`, and the histogram.
    pub fn write_summary_csv(&self, path: &Path) -> HResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["start", "average", "std", "min", "cfr_percent"])?;
        let rows = self.per_start.iter().map(|(s, r)| (s.to_string(), r)).chain([("all".to_string(), &self.overall)]);
        for (label, r) in rows {
            w.write_record([label, r.average.to_string(), r.std.to_string(), r.min.to_string(), r.cfr.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Policy {
    Greedy(ParamSet<f64>),
    /// Uniform over the steering actions; the baseline.
    Random,
}

/// Independent, order-stable stream per (start, trial).
fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn play<E: Environment>(env: &mut E, policy: &Policy, start: usize, set: StartSet, mut rng: ChaCha8Rng) -> HResult<EpisodeStats> {
    let stats = match policy {
        Policy::Greedy(params) => {
            let init: State = params.initial_state();
            evaluate_policy(env, start, set, &mut rng, |obs, h| {
                let (q, next) = params.step(obs, h)?;
                Ok((argmax(&q), next))
            }, init)?
        }
        Policy::Random => {
            let mut action_rng = rng.clone();
            action_rng.set_stream(rng.get_stream() ^ (1 << 63));
            evaluate_policy(env, start, set, &mut rng, |_, _: &()| Ok((action_rng.gen_range(0..ACTIONS.len()), ())), ())?
        }
    };
    Ok(stats)
}

/// Runs `trials` episodes from each start point of `set`, fanning out over
/// the rayon pool. Episodes come back ordered by (start, trial).
pub fn run_campaign<E, F>(make_env: F, policy: &Policy, set: StartSet, trials: usize, seed: u64) -> HResult<EvalReport>
where
    E: Environment,
    F: Fn() -> HResult<E> + Sync,
{
    let starts = make_env()?.start_count(set);
    let jobs: Vec<(usize, usize)> = (0..starts).flat_map(|s| (0..trials).map(move |t| (s, t))).collect();
    let episodes = jobs
        .par_iter()
        .map(|&(start, trial)| {
            let mut env = make_env()?;
            let stats = play(&mut env, policy, start, set, trial_rng(seed, (start * trials + trial) as u64))?;
            Ok(EvalEpisode {
                trial,
                start,
                length: stats.length,
                cum_reward: stats.cum_reward,
                mean_reward: stats.mean_reward,
                collided: stats.collided,
                reached_cap: !stats.collided,
                bins: histogram(&stats.rewards),
            })
        })
        .collect::<HResult<Vec<_>>>()?;
    Ok(EvalReport::from_episodes(set, trials, episodes))
}

/// Road-environment campaign under a run configuration.
pub fn evaluate(cfg: &RunConfig, policy: &Policy, set: StartSet, trials: usize, seed: u64) -> HResult<EvalReport> {
    let world = Arc::new(load_world(&cfg.track)?);
    let env_cfg = cfg.env.clone();
    run_campaign(|| Ok(RoadEnv::new(world.clone(), env_cfg.clone())?), policy, set, trials, seed)
}

/// The run configuration stored next to a checkpoint, or defaults.
pub fn config_for_checkpoint(checkpoint: &Path) -> HResult<RunConfig> {
    let dir = checkpoint.parent().unwrap_or(Path::new("."));
    let path = dir.join(CONFIG_FILE);
    if path.exists() {
        let text = std::fs::read_to_string(&path)?;
        RunConfig::parse_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    } else {
        Ok(RunConfig::default())
    }
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub csv: PathBuf,
    pub summary_csv: PathBuf,
}

/// Loads a checkpoint and its run config, evaluates, and writes
/// `eval.csv` and `eval_summary.csv` (`eval_random*` for the baseline) into `out_dir`
/// (default: the checkpoint's directory).
pub fn cmd_eval(
    checkpoint: &Path,
    set: StartSet,
    trials: usize,
    random_baseline: bool,
    out_dir: Option<&Path>,
) -> HResult<EvalOutput> {
    if trials == 0 {
        return Err(HarnessError::Config("trials must be >= 1".into()));
    }
    let cfg = config_for_checkpoint(checkpoint)?;
    let params: ParamSet<f64> = load(checkpoint).map_err(|e| match e {
        d3rqn::Error::Io(io) => HarnessError::Config(format!("cannot read checkpoint {}: {io}", checkpoint.display())),
        other => HarnessError::Config(format!("checkpoint {}: {other}", checkpoint.display())),
    })?;
    if params.config() != &cfg.network_config() {
        return Err(HarnessError::Config(format!(
            "checkpoint {} does not match the network in its run config",
            checkpoint.display()
        )));
    }
    let policy = if random_baseline { Policy::Random } else { Policy::Greedy(params) };
    let report = evaluate(&cfg, &policy, set, trials, cfg.seed)?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| checkpoint.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&dir)?;
    let tag = if random_baseline { "eval_random" } else { "eval" };
    let csv = dir.join(format!("{tag}.csv"));
    let summary_csv = dir.join(format!("{tag}_summary.csv"));
    report.write_csv(&csv)?;
    report.write_summary_csv(&summary_csv)?;
    Ok(EvalOutput { report, csv, summary_csv })
}
