//! Double dueling deep recurrent Q-learning with interchangeable exploration
//! strategies, plus a small partially observable road-driving simulator.
//!
//! The numeric core ([`nnet`], [`explore`], [`agent`]) is generic over
//! [`Scalar`]; the aliases below fix it to `f64`, which is what the
//! simulator, harness and all tolerance-sensitive tests use.

pub mod agent;
pub mod envsim;
pub mod error;
pub mod explore;
pub mod nnet;
pub mod replay;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{argmax, Scalar};

/// Default real type.
pub type Real = f64;

pub type Params = nnet::ParamSet<Real>;
pub type Params32 = nnet::ParamSet<f32>;
pub type State = nnet::RecurrentState<Real>;
pub type Matrix = nnet::Tensor<Real>;
