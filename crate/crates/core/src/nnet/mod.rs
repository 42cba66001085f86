//! Recurrent dueling Q-network with hand-written backpropagation through time.

mod checkpoint;
mod config;
mod layers;
mod lstm;
mod network;
mod optim;
mod tensor;

pub use checkpoint::{load, read_checkpoint, save, write_checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{sigmoid, Activation, ConvSpec, LayerSpec, NetworkConfig};
pub use layers::{Conv2d, Dense};
pub use lstm::{Lstm, LstmStepCache, RecurrentState};
pub use network::{dueling_q, masked_loss, ParamSet};
pub use optim::{soft_update, Adam, AdamConfig};
pub use tensor::Tensor;
