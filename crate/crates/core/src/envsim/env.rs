use std::sync::Arc;

use rand::Rng;

use super::geometry::{distance_to_segments, Vec2};
use super::track::{Pose, RoadWorld, StartSet};
use crate::error::{Error, Result};

/// Steering values selectable by the agent: two levels left, straight, two
/// levels right.
pub const ACTIONS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Reward decay with distance from the road centre (1/m).
    pub beta: f64,
    /// Seconds per step.
    pub dt: f64,
    /// Constant forward speed (m/s).
    pub speed: f64,
    /// Heading rate per unit steering (rad/s).
    pub steer_gain: f64,
    pub step_cap: usize,
    /// Cells ahead of the car.
    pub window_depth: usize,
    /// Cells across.
    pub window_width: usize,
    /// Half-width of the uniform start position jitter (m), used by
    /// [`RoadEnv::reset_jittered`].
    pub start_jitter: f64,
    /// Half-width of the uniform start heading jitter (rad).
    pub heading_jitter: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            dt: 0.2,
            speed: 2.5,
            steer_gain: 1.25,
            step_cap: 2000,
            window_depth: 12,
            window_width: 8,
            start_jitter: 0.25,
            heading_jitter: 0.05,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("dt", self.dt), ("speed", self.speed), ("steer_gain", self.steer_gain)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("env {name} must be positive, got {v}")));
            }
        }
        if self.step_cap == 0 || self.window_depth == 0 || self.window_width == 0 {
            return Err(Error::config("env step_cap and window dimensions must be >= 1"));
        }
        if self.start_jitter < 0.0 || self.heading_jitter < 0.0 {
            return Err(Error::config("jitter must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Collision: the car entered an off-road or obstacle cell.
    pub terminal: bool,
    /// The step cap was reached without collision.
    pub truncated: bool,
}

/// `e^{−β·d}`.
pub fn reward(distance: f64, beta: f64) -> f64 {
    (-beta * distance).exp()
}

pub fn center_distance(world: &RoadWorld, p: Vec2) -> f64 {
    distance_to_segments(p, world.center()).expect("validated worlds have a center line")
}

/// Forward-facing occupancy window in the car frame, `depth × width`
/// row-major with row 0 nearest the car and column 0 on the car's right
/// (toward −perp of the heading).
pub fn render_observation(world: &RoadWorld, car: &CarState, depth: usize, width: usize) -> Vec<f64> {
    let s = world.cell_size;
    let fwd = Vec2::from_heading(car.heading);
    let side = fwd.perp();
    let half = (width as f64 - 1.0) / 2.0;
    let mut obs = Vec::with_capacity(depth * width);
    for k in 0..depth {
        let ahead = car.position + fwd * ((k as f64 + 0.5) * s);
        for j in 0..width {
            let p = ahead + side * ((j as f64 - half) * s);
            obs.push(world.cell_at(p).code());
        }
    }
    obs
}

/// Constant-speed car on a [`RoadWorld`].
#[derive(Debug, Clone)]
pub struct RoadEnv {
    world: Arc<RoadWorld>,
    config: EnvConfig,
    car: CarState,
    steps: usize,
    done: bool,
}

impl RoadEnv {
    pub fn new(world: Arc<RoadWorld>, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let pose = world.train_starts[0];
        let car = CarState { position: pose.position, heading: pose.heading, speed: config.speed };
        Ok(Self { world, config, car, steps: 0, done: true })
    }

    pub fn world(&self) -> &RoadWorld {
        &self.world
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn car(&self) -> &CarState {
        &self.car
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn obs_len(&self) -> usize {
        self.config.window_depth * self.config.window_width
    }

    pub fn start_count(&self, set: StartSet) -> usize {
        self.world.starts(set).len()
    }

    fn start_pose(&self, index: usize, set: StartSet) -> Result<Pose> {
        let starts = self.world.starts(set);
        starts.get(index).copied().ok_or_else(|| {
            Error::config(format!("start index {index} out of range for {} {set} starts", starts.len()))
        })
    }

    /// Places the car exactly at the indexed start pose.
    pub fn reset(&mut self, index: usize, set: StartSet) -> Result<Vec<f64>> {
        let pose = self.start_pose(index, set)?;
        Ok(self.place(pose.position, pose.heading))
    }

    /// As [`reset`](Self::reset) but perturbs the pose by the configured
    /// jitter; draws are retried until the perturbed position is on road.
    pub fn reset_jittered<R: Rng>(&mut self, index: usize, set: StartSet, rng: &mut R) -> Result<Vec<f64>> {
        let pose = self.start_pose(index, set)?;
        let (pj, hj) = (self.config.start_jitter, self.config.heading_jitter);
        let mut position = pose.position;
        for _ in 0..100 {
            let dx = if pj > 0.0 { rng.gen_range(-pj..=pj) } else { 0.0 };
            let dy = if pj > 0.0 { rng.gen_range(-pj..=pj) } else { 0.0 };
            let candidate = pose.position + Vec2::new(dx, dy);
            if self.world.cell_at(candidate) == super::track::Cell::Road {
                position = candidate;
                break;
            }
        }
        let dh = if hj > 0.0 { rng.gen_range(-hj..=hj) } else { 0.0 };
        Ok(self.place(position, pose.heading + dh))
    }

    /// Places the car at an arbitrary pose.
    pub fn place(&mut self, position: Vec2, heading: f64) -> Vec<f64> {
        self.car = CarState { position, heading, speed: self.config.speed };
        self.steps = 0;
        self.done = false;
        self.observe()
    }

    pub fn observe(&self) -> Vec<f64> {
        render_observation(&self.world, &self.car, self.config.window_depth, self.config.window_width)
    }

    pub fn distance_to_center(&self) -> f64 {
        center_distance(&self.world, self.car.position)
    }

    /// Advances by one action index into [`ACTIONS`].
    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let steer = *ACTIONS
            .get(action)
            .ok_or_else(|| Error::Contract(format!("action index {action} out of range")))?;
        self.step_steering(steer)
    }

    pub fn step_steering(&mut self, steer: f64) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Contract("step called on a finished episode; reset first".into()));
        }
        let dt = self.config.dt;
        self.car.heading += steer * self.config.steer_gain * dt;
        self.car.position = self.car.position + Vec2::from_heading(self.car.heading) * (self.car.speed * dt);
        self.steps += 1;
        let terminal = self.world.cell_at(self.car.position) != super::track::Cell::Road;
        let reward = if terminal { 0.0 } else { reward(self.distance_to_center(), self.config.beta) };
        let truncated = !terminal && self.steps >= self.config.step_cap;
        self.done = terminal || truncated;
        Ok(StepOutcome { obs: self.observe(), reward, terminal, truncated })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_examples() {
        assert_eq!(reward(0.0, 1.0), 1.0);
        assert!((reward(std::f64::consts::LN_2, 1.0) - 0.5).abs() < 1e-15);
        let mut last = 1.0;
        for k in 1..100 {
            let r = reward(k as f64 * 0.1, 1.0);
            assert!(r < last && r > 0.0);
            last = r;
        }
    }

    #[test]
    fn reset_validates_index_and_is_repeatable() {
        let mut env = RoadEnv::new(Arc::new(RoadWorld::default_track()), EnvConfig::default()).unwrap();
        let a = env.reset(3, StartSet::Train).unwrap();
        let b = env.reset(3, StartSet::Train).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12 * 8);
        assert!(env.reset(10, StartSet::Train).is_err());
    }

    #[test]
    fn step_after_collision_is_a_contract_violation() {
        let mut env = RoadEnv::new(Arc::new(RoadWorld::default_track()), EnvConfig::default()).unwrap();
        env.reset(0, StartSet::Train).unwrap();
        let mut out = env.step(4).unwrap();
        while !out.terminal {
            out = env.step(4).unwrap();
        }
        assert_eq!(out.reward, 0.0);
        assert!(matches!(env.step(2), Err(Error::Contract(_))));
    }
}
