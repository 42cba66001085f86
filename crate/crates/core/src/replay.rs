//! Episodic replay memory with bootstrapped random trace sampling.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub obs: Vec<T>,
    pub action: usize,
    pub reward: T,
    pub next_obs: Vec<T>,
    pub terminal: bool,
}

/// A completed episode. Observations are stored once: `observations[i]` is
/// the observation before step `i`, so there are `len() + 1` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode<T> {
    observations: Vec<Vec<T>>,
    actions: Vec<usize>,
    rewards: Vec<T>,
    terminals: Vec<bool>,
}

impl<T: Scalar> Episode<T> {
    fn empty() -> Self {
        Self { observations: Vec::new(), actions: Vec::new(), rewards: Vec::new(), terminals: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn transition(&self, i: usize) -> Transition<T> {
        Transition {
            obs: self.observations[i].clone(),
            action: self.actions[i],
            reward: self.rewards[i],
            next_obs: self.observations[i + 1].clone(),
            terminal: self.terminals[i],
        }
    }

    pub fn rewards(&self) -> &[T] {
        &self.rewards
    }

    pub fn is_terminated(&self) -> bool {
        self.terminals.last().copied().unwrap_or(false)
    }

    fn push(&mut self, tr: Transition<T>) -> Result<()> {
        if self.is_terminated() {
            return Err(Error::Contract("transition pushed after a terminal transition".into()));
        }
        match self.observations.last() {
            None => self.observations.push(tr.obs),
            Some(last) if *last == tr.obs => {}
            Some(_) => {
                return Err(Error::Contract("transition does not continue from the previous next_obs".into()))
            }
        }
        self.observations.push(tr.next_obs);
        self.actions.push(tr.action);
        self.rewards.push(tr.reward);
        self.terminals.push(tr.terminal);
        Ok(())
    }
}

/// `t` consecutive transitions cut from one stored episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub episode: usize,
    pub start: usize,
    /// `t + 1` observations; rows `0..t` are inputs, rows `1..=t` next inputs.
    pub observations: Vec<Vec<T>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<T>,
    pub terminals: Vec<bool>,
}

impl<T: Scalar> Trace<T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_rows(&self) -> &[Vec<T>] {
        &self.observations[..self.len()]
    }

    pub fn next_obs_rows(&self) -> &[Vec<T>] {
        &self.observations[1..]
    }
}

/// When agent updates may begin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartGate {
    /// After this many completed episodes.
    Episodes(usize),
    /// Once the buffer is at least half full.
    HalfCapacity,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    episodes: VecDeque<Episode<T>>,
    current: Episode<T>,
    /// Index of `episodes[0]` among all episodes ever completed.
    evicted: usize,
}

const MAX_RESAMPLE_FACTOR: usize = 1000;

impl<T: Scalar> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay capacity must be at least one episode"));
        }
        Ok(Self { capacity, episodes: VecDeque::with_capacity(capacity), current: Episode::empty(), evicted: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Completed episodes currently stored.
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> impl Iterator<Item = &Episode<T>> {
        self.episodes.iter()
    }

    /// Global id of the oldest stored episode.
    pub fn first_episode_id(&self) -> usize {
        self.evicted
    }

    pub fn in_progress_len(&self) -> usize {
        self.current.len()
    }

    pub fn push(&mut self, transition: Transition<T>) -> Result<()> {
        self.current.push(transition)
    }

    /// Seals the in-progress episode; a no-op when it is empty.
    pub fn end_episode(&mut self) {
        if self.current.is_empty() {
            self.current = Episode::empty();
            return;
        }
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
            self.evicted += 1;
        }
        self.episodes.push_back(std::mem::replace(&mut self.current, Episode::empty()));
    }

    pub fn ready(&self, gate: StartGate) -> bool {
        match gate {
            StartGate::Episodes(n) => self.len() >= n,
            StartGate::HalfCapacity => 2 * self.len() >= self.capacity,
        }
    }

    /// Draws `batch` traces of length `t`: episodes uniformly with replacement,
    /// start offsets uniformly over `[0, len − t]`. Episodes shorter than `t`
    /// are rejected and redrawn.
    pub fn sample_traces<R: Rng>(&self, batch: usize, t: usize, rng: &mut R) -> Result<Vec<Trace<T>>> {
        if t == 0 {
            return Err(Error::config("trace length must be at least 1"));
        }
        if !self.episodes.iter().any(|e| e.len() >= t) {
            return Err(Error::Sampling(format!("no stored episode has length >= {t}")));
        }
        let mut traces = Vec::with_capacity(batch);
        let mut attempts = 0;
        while traces.len() < batch {
            attempts += 1;
            if attempts > MAX_RESAMPLE_FACTOR * batch.max(1) {
                return Err(Error::Sampling(format!("gave up finding episodes of length >= {t}")));
            }
            let idx = rng.gen_range(0..self.episodes.len());
            let ep = &self.episodes[idx];
            if ep.len() < t {
                continue;
            }
            let start = rng.gen_range(0..=ep.len() - t);
            traces.push(Trace {
                episode: self.evicted + idx,
                start,
                observations: ep.observations[start..=start + t].to_vec(),
                actions: ep.actions[start..start + t].to_vec(),
                rewards: ep.rewards[start..start + t].to_vec(),
                terminals: ep.terminals[start..start + t].to_vec(),
            });
        }
        Ok(traces)
    }

    /// Debug dump, one record per stored transition, all integers and floats
    /// little-endian:
    ///
    /// `u64 episode_id | u32 step | u32 action | f64 reward | u8 terminal |
    ///  u32 obs_len | obs_len × f64 obs | obs_len × f64 next_obs`
    pub fn dump<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, ep) in self.episodes.iter().enumerate() {
            for i in 0..ep.len() {
                let tr = ep.transition(i);
                out.write_all(&((self.evicted + k) as u64).to_le_bytes())?;
                out.write_all(&(i as u32).to_le_bytes())?;
                out.write_all(&(tr.action as u32).to_le_bytes())?;
                out.write_all(&tr.reward.as_f64().to_le_bytes())?;
                out.write_all(&[tr.terminal as u8])?;
                out.write_all(&(tr.obs.len() as u32).to_le_bytes())?;
                for v in tr.obs.iter().chain(&tr.next_obs) {
                    out.write_all(&v.as_f64().to_le_bytes())?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}
