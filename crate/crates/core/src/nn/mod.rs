//! Dense feed-forward networks with hand-written backpropagation, Adam, and a
//! flat parameter ("genome") view shared by the gradient learner and the
//! evolutionary operators.

mod adam;
pub mod checkpoint;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{ForwardCache, Genome, MlpNet, NetShape, OutputHead};
