//! Zone-level ride-pooling dispatch: demand learning, direction-based
//! request pooling, supply-demand matching, idle relocation and a
//! cycle-driven simulator to compare dispatch pipelines.

pub mod config;
pub mod demand;
pub mod error;
pub mod events;
pub mod harness;
pub mod ingest;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod pooling;
pub mod relocation;
pub mod sim;
pub mod smw;

pub use config::{Pipeline, PipelineConfig, ScenarioConfig};
pub use demand::ValueTable;
pub use error::{Error, Result};
pub use events::Event;
pub use metrics::{MetricsLedger, MetricsSummary};
pub use model::{CityMap, RequestId, TaxiId, TripRequest, ZoneId, ZoneIx};
pub use sim::{run, RunOutput, Simulation};
