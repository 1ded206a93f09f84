//! Frame-clocked simulator of a single-cell WiMAX uplink.
//!
//! Twenty subscriber stations upload constant-rate traffic over a simplified
//! reliable transport to one base station. Each 5 ms frame the engine steps
//! the fading channel, feeds delayed CQI to the AMC controller, allocates the
//! uplink data-burst budget, draws block errors, runs HARQ and transport
//! recovery, and emits one [`StatsRecord`] per frame.
//!
//! Four scenarios are built in: static QPSK 1/2, AMC table A, AMC table B and
//! AMC table A with HARQ chase combining.

pub mod amc;
pub mod channel;
pub mod config;
pub mod engine;
pub mod error;
pub mod harq;
pub mod mac;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod transport;

pub use amc::{AmcState, AmcTable, TableLabel};
pub use channel::{BlerModel, ChannelState, LinkBudget, McsProfile, MCS_PROFILES};
pub use config::{load_config, ScenarioId, SimConfig};
pub use engine::{run, SimClock, Simulation};
pub use error::{ConfigError, SimError};
pub use harq::{HarqProcess, HarqStatus};
pub use mac::{Allocation, BandwidthRequest, FrameBudget};
pub use rng::{RandomStream, StreamLabel};
pub use scenario::build_scenario;
pub use stats::{ScenarioSummary, StatsRecord};
pub use transport::{ReliableStream, TrafficSource};
