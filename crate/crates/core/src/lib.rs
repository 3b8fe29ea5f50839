//! Simulator of an ultra-dense UAV downlink network with Markov user demand,
//! and a mean-field reinforcement-learning toolkit for the induced game.
//!
//! Module map:
//! - [`env`]: channels, SINR, rate, energy, battery and the population world.
//! - [`mfg`]: mean-field tables, the two-step fixed-point iteration and its
//!   convergence diagnostics.
//! - [`nn`]: a small dense network with Adam, enough for the Q-functions here.
//! - [`softq`]: the maximum-entropy mean-field DQN trainer and the tabular
//!   soft value iteration oracle.
//! - [`baselines`]: epsilon-greedy and Boltzmann benchmark trainers.
//! - [`pomfg`]: the partially observable variant (compressed history state).
//! - [`micro`]: a fully enumerable instance used as an exact oracle.

pub mod agent;
pub mod baselines;
pub mod env;
pub mod mfg;
pub mod micro;
pub mod nn;
pub mod pomfg;
pub mod rng;
pub mod softq;
pub mod view;
