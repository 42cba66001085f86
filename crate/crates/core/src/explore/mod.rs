//! Exploration strategies: ε-greedy (constant, decreasing, VDBE, BMC),
//! Boltzmann softmax, Max-Boltzmann and VDBE-Softmax.

mod bmc;
mod schedule;
mod select;
mod strategy;
mod vdbe;

pub use bmc::{student_t_log_pdf, student_t_pdf, BmcPrior, BmcState, BmcStep};
pub use schedule::{eps_decreasing, DecreasingSchedule};
pub use select::{boltzmann, select_eps_greedy, select_mbe, select_softmax, ActionChoice};
pub use strategy::{Strategy, StrategyKind, StrategyParams};
pub use vdbe::{delta_err, vdbe_f, vdbe_update};
