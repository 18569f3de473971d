//! Raw transit datasets: stops, routes, terminals, GPS pings and fare validations.

mod days;
mod io;
pub mod synth;

use std::cmp::Ordering;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use chrono::{DateTime, FixedOffset, NaiveDate, SecondsFormat, TimeZone};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{BoundingBox, Coord};

pub use days::{day_counts, decide_days, filter_anomalous_days, DayFilterReport};
pub use io::{
    load_bundle, load_dataset, load_pings, load_routes, load_stops, load_terminals,
    load_validations, write_bundle, write_pings, write_routes, write_stops, write_terminals,
    write_validations, Bundle, Dataset, DatasetKind, LoadOptions, Loaded, RejectedRow,
};

/// Shared, cheaply clonable identifier.
pub type Id = Arc<str>;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}: malformed header, expected `{expected}`, found `{found}`")]
    MalformedHeader {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: {rejected} of {total} rows rejected, above the {threshold} reject-rate threshold")]
    RejectRate {
        path: PathBuf,
        rejected: usize,
        total: usize,
        threshold: f64,
    },
    #[error("{0}: {1}")]
    Csv(PathBuf, csv::Error),
    #[error("io error on {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("no validations to filter")]
    EmptyInput,
    #[error("validations span {0} calendar day(s); at least 3 are required")]
    TooFewDays(usize),
    #[error("invalid day filter factors low={low} high={high}")]
    InvalidFactors { low: f64, high: f64 },
    #[error("every day was dropped by the anomaly filter; the feed looks corrupt")]
    AllDaysDropped,
    #[error("infeasible synthetic config: {0}")]
    InfeasibleConfig(String),
}

/// Point in time with the UTC offset it was recorded in.
///
/// Ordering and equality of instants use the epoch; the offset is kept so that
/// local calendar dates and round trips through CSV stay exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Timestamp {
    pub epoch: i64,
    pub offset_secs: i32,
}

impl Timestamp {
    pub fn new(epoch: i64, offset_secs: i32) -> Self {
        Timestamp { epoch, offset_secs }
    }

    fn datetime(&self) -> DateTime<FixedOffset> {
        let off = FixedOffset::east_opt(self.offset_secs).unwrap_or(FixedOffset::east_opt(0).unwrap());
        off.timestamp_opt(self.epoch, 0)
            .single()
            .expect("epoch seconds within chrono range")
    }

    pub fn local_date(&self) -> NaiveDate {
        self.datetime().date_naive()
    }

    pub fn to_iso8601(&self) -> String {
        self.datetime().to_rfc3339_opts(SecondsFormat::Secs, false)
    }

    pub fn plus(&self, secs: i64) -> Timestamp {
        Timestamp::new(self.epoch + secs, self.offset_secs)
    }
}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        self.epoch
            .cmp(&other.epoch)
            .then(self.offset_secs.cmp(&other.offset_secs))
    }
}

impl FromStr for Timestamp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dt = DateTime::parse_from_rfc3339(s.trim())
            .map_err(|e| format!("timestamp {s:?} is not ISO-8601 with offset: {e}"))?;
        Ok(Timestamp::new(dt.timestamp(), dt.offset().local_minus_utc()))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso8601())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stop {
    pub stop_id: Id,
    pub lat: f64,
    pub lon: f64,
    pub is_terminal: bool,
}

impl Stop {
    pub fn coord(&self) -> Coord {
        Coord::new(self.lat, self.lon)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Outbound,
    Inbound,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Outbound => "outbound",
            Direction::Inbound => "inbound",
        }
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "outbound" | "out" | "0" => Ok(Direction::Outbound),
            "inbound" | "in" | "1" => Ok(Direction::Inbound),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RouteDef {
    pub route_id: Id,
    pub direction: Direction,
    pub itinerary: Vec<Id>,
}

impl RouteDef {
    /// First itinerary position of `stop`, if the route serves it.
    pub fn position(&self, stop: &str) -> Option<usize> {
        self.itinerary.iter().position(|s| &**s == stop)
    }

    /// True when `to` appears after position `from_pos` in the itinerary.
    pub fn reaches_after(&self, from_pos: usize, to: &str) -> bool {
        self.itinerary.iter().skip(from_pos + 1).any(|s| &**s == to)
    }

    pub(crate) fn shape_error(&self) -> Option<String> {
        if self.itinerary.len() < 2 {
            return Some("itinerary shorter than 2 stops".into());
        }
        if self.itinerary.windows(2).any(|w| w[0] == w[1]) {
            return Some("itinerary repeats a stop consecutively".into());
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Terminal {
    pub terminal_id: Id,
    pub stop_id: Id,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GpsPing {
    pub vehicle_id: Id,
    pub route_id: Id,
    pub timestamp: Timestamp,
    pub lat: f64,
    pub lon: f64,
}

impl GpsPing {
    pub fn coord(&self) -> Coord {
        Coord::new(self.lat, self.lon)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Validation {
    pub user_id: Id,
    pub timestamp: Timestamp,
    pub route_id: Option<Id>,
    pub vehicle_id: Option<Id>,
    pub terminal_id: Option<Id>,
}

impl Validation {
    pub fn is_terminal(&self) -> bool {
        self.terminal_id.is_some()
    }
}

pub(crate) fn check_lat_lon(lat: f64, lon: f64) -> Result<(), String> {
    if !(-90.0..=90.0).contains(&lat) {
        return Err("lat out of range".into());
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err("lon out of range".into());
    }
    Ok(())
}

pub(crate) fn check_in_box(bbox: Option<&BoundingBox>, lat: f64, lon: f64) -> Result<(), String> {
    match bbox {
        Some(b) if !b.contains(&Coord::new(lat, lon)) => Err("position outside bounding box".into()),
        _ => Ok(()),
    }
}
