//! Multi-cell, multi-slice radio environment advanced in fixed radio ticks.

mod alloc;
mod config;
pub mod radio;
mod world;

pub use alloc::{allocate_resources, CellAllocation, UserDemand, UserService};
pub use config::{
    AntennaConfig, GridConfig, LatencyConfig, PathlossConfig, Region, ScenarioConfig, SliceSpec,
    TrafficConfig, UserGroupSpec,
};
pub use radio::{compute_sinr, pathloss, pathloss_db};
pub use world::{build_boundaries, build_cells, on_probability, Cell, StepReport, User, World};
