//! Transit network analytics for bus systems.
//!
//! The crate reconstructs rider origin–destination pairs from fare validations and
//! vehicle GPS pings, models bus supply as a weighted directed graph, finds
//! communities in that graph, overlays the demand on them, and simulates
//! express-link interventions between community centers.
//!
//! Modules follow the data flow:
//!
//! * [`ingest`]: CSV datasets, anomalous-day filtering, synthetic cities.
//! * [`odm`]: boarding resolution and daily trip chaining.
//! * [`stats`]: power-law fit, Nadaraya–Watson smoother, bootstrap bands.
//! * [`netcore`]: supply graph construction and structural metrics.
//! * [`communities`]: Louvain modularity optimization and per-community tables.
//! * [`flows`]: intra/inter community demand by day class.
//! * [`intervene`]: express-edge plans and metric trajectories.
//! * [`pipeline`]: the stages chained end to end.

pub mod calendar;
pub mod communities;
pub mod digest;
pub mod flows;
pub mod geo;
pub mod ingest;
pub mod intervene;
pub mod netcore;
pub mod odm;
pub mod pipeline;
pub mod stats;

pub use calendar::{Calendar, DayClass};
pub use ingest::{Id, Timestamp};
