//! Agent-based market simulator with adaptive trust dynamics.
//!
//! Agents on a social graph trade one asset. Each step every agent forms an
//! opinion from three channels (trust-weighted neighbor actions, public news
//! scaled by an adaptive weight, private noise), trades when the opinion
//! clears a conviction threshold, and the aggregate order flow moves the
//! price. Trust in neighbors and the news weight are then updated from how
//! well each channel predicted the realized return. The feedback is
//! self-reinforcing, so strong enough imitation lets the market pull itself
//! into bubbles that end in crashes.
//!
//! The crate provides the simulation core ([`sim`]), news processes
//! ([`news`]), run statistics ([`analytics`]), ensemble sweeps and scenario
//! experiments ([`experiments`]), CSV input/output ([`io`]), and JSON run
//! configuration ([`config`]). Every run is fully determined by its
//! parameters and one root seed.

pub mod agent;
pub mod analytics;
pub mod config;
pub mod experiments;
pub mod io;
pub mod market;
pub mod network;
pub mod news;
pub mod params;
pub mod sim;
pub mod streams;

pub use config::{load_config, parse_config, ConfigError, RunConfig};
pub use params::{ClearingVariant, ModelParams, Topology};
pub use sim::{Simulation, StepRecord};
