//! Deep deterministic policy gradient learner: replay buffer, actor and
//! critic with soft-updated target copies.

mod agent;
mod replay;

pub use agent::{policy_gradient_step, ActionValue, DdpgAgent, DdpgConfig};
pub use replay::ReplayBuffer;
