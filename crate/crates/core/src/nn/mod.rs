//! Neural-network substrate: MLPs with exact gradients, Adam, checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
mod mlp;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use mlp::{Activation, Dense, ForwardCache, Gradients, Mlp};
