//! Physical and game environment: demand, channel, SINR, rate, energy,
//! battery and reward, plus the population world that advances every cell
//! one slot at a time.

pub mod channel;
pub mod demand;
pub mod energy;
pub mod geometry;
pub mod params;
pub mod slot;
pub mod space;
pub mod world;

pub use channel::{elevation_deg, los_probability, path_loss, sample_link, ChannelParams, Fading, LinkSample};
pub use demand::{step_demand, DemandChain};
pub use energy::{
    harvest_energy, propulsion_power, step_battery, total_energy, EnergyParams, HarvestParams,
    PropulsionParams,
};
pub use geometry::Geometry;
pub use params::EnvParams;
pub use slot::{
    achievable_rate, compute_sinr, reward, Interferer, LinkParams, Mode, RewardParams, RewardTerms,
    SlotOutcome, SlotTiming,
};
pub use space::{ActionSpace, AgentAction, AgentState, IfLayout, StateSpace};
pub use world::{CellState, World};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("action rejected: {0}")]
    Action(String),
}

/// Decibels to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}
