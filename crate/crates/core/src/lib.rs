//! Multi-fleet truck platooning: road networks, scenario generation,
//! coordination programs and an event-driven simulator.

pub mod cli;
pub mod cover;
pub mod feasibility;
pub mod metrics;
pub mod network;
pub mod profit;
pub mod scenario;
pub mod sim;
pub mod strategies;
pub mod units;
pub mod verify;
