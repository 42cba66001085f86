//! Synthetic partially observable road world: a constant-speed car steers
//! over an occupancy grid, sees only a window ahead of it and is rewarded
//! for staying near the road centre.

mod env;
mod geometry;
mod track;

pub use env::{center_distance, render_observation, reward, CarState, EnvConfig, RoadEnv, StepOutcome, ACTIONS};
pub use geometry::{distance_to_center, distance_to_segments, polyline_segments, Segment, Vec2};
pub use track::{Cell, Pose, RoadWorld, StartSet, DEFAULT_TRACK};
