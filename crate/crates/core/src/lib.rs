pub mod action;
pub mod error;
pub mod handover;
pub mod nn;

pub use error::{Error, Result};
pub mod energy;
pub mod env;
pub mod experiment;
pub mod mdp;
pub mod sim;
pub mod td3;
pub mod transfer;
