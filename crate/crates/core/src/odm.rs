//! Origin–destination reconstruction from fare validations.
//!
//! Each on-bus validation is placed at the vehicle's GPS position nearest in
//! time and snapped to the closest stop of the boarded route; terminal
//! validations resolve to the terminal's stop. A rider's boardings on one day are
//! chained so that every boarding's destination is the next boarding stop and the
//! last leg returns to the first origin. Recurring riders get two corrections
//! before chaining: a missing intermediate boarding is restored when the route
//! taken reaches it, and origins of a recurring pattern are moved to the earliest
//! itinerary position seen for that boarding.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};
use std::ops::AddAssign;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::Calendar;
use crate::geo::Coord;
use crate::ingest::synth::GroundTruthLeg;
use crate::ingest::{GpsPing, Id, RouteDef, Stop, Terminal, Timestamp, Validation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdmConfig {
    /// Largest time gap between a validation and the matched ping.
    pub max_gap_secs: i64,
    /// Largest distance between the matched position and the snapped stop.
    pub snap_radius_m: f64,
    /// A pattern recurs when seen on at least this share of the rider's days in a class.
    pub recurrence_share: f64,
    pub min_recurrence: usize,
}

impl Default for OdmConfig {
    fn default() -> Self {
        OdmConfig {
            max_gap_secs: 120,
            snap_radius_m: 300.0,
            recurrence_share: 0.5,
            min_recurrence: 2,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OdmError {
    #[error("validation carries no vehicle id")]
    NoVehicle,
    #[error("no ping of vehicle {vehicle} within {max_gap} s of the validation")]
    Unlocatable { vehicle: Id, max_gap: i64 },
    #[error("route {0} is unknown")]
    UnknownRoute(Id),
    #[error("route itinerary is empty")]
    EmptyItinerary,
    #[error("nearest itinerary stop is {distance_m:.0} m away, beyond {max_radius_m} m")]
    Unsnappable { distance_m: f64, max_radius_m: f64 },
    #[error("terminal {0} is unknown")]
    UnknownTerminal(Id),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoardingSource {
    GpsMatch,
    Terminal,
    /// Restored by the missing-intermediate correction.
    Inferred,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Boarding {
    pub user_id: Id,
    pub timestamp: Timestamp,
    pub route_id: Option<Id>,
    pub stop_id: Id,
    pub source: BoardingSource,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OdPair {
    pub user_id: Id,
    pub day: NaiveDate,
    pub leg_index: usize,
    pub origin_stop_id: Id,
    pub destination_stop_id: Id,
    pub origin_time: Timestamp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Chained,
    DroppedSingleBoarding,
    DroppedUnreachable,
    CorrectedIntermediate,
    CorrectedOriginSnap,
    DroppedDegenerateLoop,
    Unlocatable,
    Unsnappable,
}

impl Outcome {
    pub const ALL: [Outcome; 8] = [
        Outcome::Chained,
        Outcome::DroppedSingleBoarding,
        Outcome::DroppedUnreachable,
        Outcome::CorrectedIntermediate,
        Outcome::CorrectedOriginSnap,
        Outcome::DroppedDegenerateLoop,
        Outcome::Unlocatable,
        Outcome::Unsnappable,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Chained => "chained",
            Outcome::DroppedSingleBoarding => "dropped_single_boarding",
            Outcome::DroppedUnreachable => "dropped_unreachable",
            Outcome::CorrectedIntermediate => "corrected_intermediate",
            Outcome::CorrectedOriginSnap => "corrected_origin_snap",
            Outcome::DroppedDegenerateLoop => "dropped_degenerate_loop",
            Outcome::Unlocatable => "unlocatable",
            Outcome::Unsnappable => "unsnappable",
        }
    }
}

/// Counter per outcome. Merging is commutative and associative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts([u64; 8]);

impl OutcomeCounts {
    pub fn one(o: Outcome) -> Self {
        let mut c = Self::default();
        c.add(o, 1);
        c
    }

    pub fn add(&mut self, o: Outcome, n: u64) {
        self.0[o as usize] += n;
    }

    pub fn get(&self, o: Outcome) -> u64 {
        self.0[o as usize]
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl AddAssign for OutcomeCounts {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

/// Outcome counters per (user, day) and in total.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainDiagnostics {
    pub per_user_day: BTreeMap<(Id, NaiveDate), OutcomeCounts>,
    pub totals: OutcomeCounts,
}

impl ChainDiagnostics {
    pub fn record(&mut self, user: &Id, day: NaiveDate, counts: OutcomeCounts) {
        if counts.is_empty() {
            return;
        }
        *self.per_user_day.entry((user.clone(), day)).or_default() += counts;
        self.totals += counts;
    }

    pub fn merge(&mut self, other: ChainDiagnostics) {
        for ((u, d), c) in other.per_user_day {
            *self.per_user_day.entry((u, d)).or_default() += c;
        }
        self.totals += other.totals;
    }

    pub fn is_empty(&self) -> bool {
        self.per_user_day.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
struct PingRec {
    epoch: i64,
    coord: Coord,
    route: usize,
}

/// Pings grouped by vehicle and sorted by time.
pub struct PingIndex {
    by_vehicle: HashMap<Id, Vec<PingRec>>,
    routes: Vec<Id>,
}

impl PingIndex {
    pub fn new(pings: &[GpsPing]) -> Self {
        let mut routes: Vec<Id> = Vec::new();
        let mut route_ix: HashMap<Id, usize> = HashMap::new();
        let mut by_vehicle: HashMap<Id, Vec<PingRec>> = HashMap::new();
        for p in pings {
            let route = *route_ix.entry(p.route_id.clone()).or_insert_with(|| {
                routes.push(p.route_id.clone());
                routes.len() - 1
            });
            by_vehicle.entry(p.vehicle_id.clone()).or_default().push(PingRec {
                epoch: p.timestamp.epoch,
                coord: p.coord(),
                route,
            });
        }
        by_vehicle
            .par_iter_mut()
            .for_each(|(_, v)| v.sort_by_key(|p| p.epoch));
        PingIndex { by_vehicle, routes }
    }

    /// Nearest ping in time, ties toward the earlier ping.
    fn nearest(&self, vehicle: &str, epoch: i64) -> Option<(i64, &PingRec)> {
        let v = self.by_vehicle.get(vehicle)?;
        let i = v.partition_point(|p| p.epoch < epoch);
        let after = v.get(i).map(|p| (p.epoch - epoch, p));
        let before = i.checked_sub(1).map(|j| (epoch - v[j].epoch, &v[j]));
        match (before, after) {
            (Some(b), Some(a)) => Some(if b.0 <= a.0 { b } else { a }),
            (b, a) => b.or(a),
        }
    }
}

/// A validation placed in space, with the route the vehicle was serving.
#[derive(Clone, Debug, PartialEq)]
pub struct Located {
    pub coord: Coord,
    pub route_id: Id,
    pub gap_secs: i64,
}

/// Position of the validating vehicle at validation time.
pub fn locate_validation(v: &Validation, pings: &PingIndex, max_gap_secs: i64) -> Result<Located, OdmError> {
    let vehicle = v.vehicle_id.as_ref().ok_or(OdmError::NoVehicle)?;
    match pings.nearest(vehicle, v.timestamp.epoch) {
        Some((gap, p)) if gap <= max_gap_secs => Ok(Located {
            coord: p.coord,
            route_id: pings.routes[p.route].clone(),
            gap_secs: gap,
        }),
        _ => Err(OdmError::Unlocatable {
            vehicle: vehicle.clone(),
            max_gap: max_gap_secs,
        }),
    }
}

/// Closest itinerary stop to `coord`; ties go to the earlier itinerary position.
/// Returns the stop and its itinerary position.
pub fn snap_to_stop(
    coord: &Coord,
    route: &RouteDef,
    stops: &HashMap<Id, Coord>,
    max_radius_m: f64,
) -> Result<(Id, usize), OdmError> {
    let mut best: Option<(f64, usize)> = None;
    for (pos, id) in route.itinerary.iter().enumerate() {
        let Some(c) = stops.get(id) else { continue };
        let d = coord.distance_m(c);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, pos));
        }
    }
    let (d, pos) = best.ok_or(OdmError::EmptyItinerary)?;
    if d > max_radius_m {
        return Err(OdmError::Unsnappable {
            distance_m: d,
            max_radius_m,
        });
    }
    Ok((route.itinerary[pos].clone(), pos))
}

/// Chains one rider's time-ordered boardings of one day.
///
/// With n >= 2 boardings at P1..Pn the legs are Pi -> Pi+1 and Pn -> P1. A single
/// boarding yields nothing. Legs whose origin equals their destination are
/// dropped; leg indices stay contiguous.
pub fn chain_daily_trips(boardings: &[Boarding]) -> (Vec<OdPair>, OutcomeCounts) {
    let mut counts = OutcomeCounts::default();
    let n = boardings.len();
    if n == 0 {
        return (Vec::new(), counts);
    }
    if n == 1 {
        counts.add(Outcome::DroppedSingleBoarding, 1);
        return (Vec::new(), counts);
    }
    let day = boardings[0].timestamp.local_date();
    let mut pairs = Vec::with_capacity(n);
    for i in 0..n {
        let o = &boardings[i];
        let d = &boardings[(i + 1) % n];
        if o.stop_id == d.stop_id {
            counts.add(Outcome::DroppedDegenerateLoop, 1);
            continue;
        }
        pairs.push(OdPair {
            user_id: o.user_id.clone(),
            day,
            leg_index: pairs.len() + 1,
            origin_stop_id: o.stop_id.clone(),
            destination_stop_id: d.stop_id.clone(),
            origin_time: o.timestamp,
        });
    }
    if !pairs.is_empty() {
        counts.add(Outcome::Chained, 1);
    }
    (pairs, counts)
}

fn route_key(b: &Boarding) -> String {
    match &b.route_id {
        Some(r) => r.to_string(),
        None => format!("@{}", b.stop_id),
    }
}

/// Applies the recurring-rider corrections to one rider's days in place and
/// returns the per-day outcomes. Days found unreachable are removed.
pub fn correct_user_history(
    days: &mut BTreeMap<NaiveDate, Vec<Boarding>>,
    routes: &HashMap<Id, RouteDef>,
    calendar: &Calendar,
    cfg: &OdmConfig,
) -> BTreeMap<NaiveDate, OutcomeCounts> {
    let mut outcomes: BTreeMap<NaiveDate, OutcomeCounts> = BTreeMap::new();
    let mut by_class: BTreeMap<_, Vec<NaiveDate>> = BTreeMap::new();
    for d in days.keys() {
        by_class.entry(calendar.day_class(*d)).or_default().push(*d);
    }

    for class_days in by_class.values() {
        if class_days.len() < 2 {
            continue;
        }
        let threshold = cfg
            .min_recurrence
            .max((cfg.recurrence_share * class_days.len() as f64).ceil() as usize);
        let key_of = |bs: &[Boarding]| bs.iter().map(route_key).collect::<Vec<_>>();

        let mut freq: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for d in class_days {
            *freq.entry(key_of(&days[d])).or_default() += 1;
        }
        let recurring: Vec<Vec<String>> = freq
            .iter()
            .filter(|(_, &c)| c >= threshold)
            .map(|(k, _)| k.clone())
            .collect();
        // Most frequent recurring pattern; BTreeMap order breaks ties.
        let modal = recurring
            .iter()
            .max_by(|a, b| freq[*a].cmp(&freq[*b]).then_with(|| b.cmp(a)))
            .cloned();

        let earliest_stops = |pattern: &[String], days: &BTreeMap<NaiveDate, Vec<Boarding>>| -> Vec<Option<Id>> {
            (0..pattern.len())
                .map(|i| {
                    let route = routes.get(pattern[i].as_str())?;
                    class_days
                        .iter()
                        .filter_map(|d| days.get(d))
                        .filter(|bs| key_of(bs) == pattern)
                        .filter_map(|bs| {
                            let s = &bs[i].stop_id;
                            route.position(s).map(|p| (p, s.clone()))
                        })
                        .min_by_key(|(p, _)| *p)
                        .map(|(_, s)| s)
                })
                .collect()
        };

        // Missing-intermediate repair against the modal pattern.
        if let Some(modal) = modal.as_ref().filter(|m| m.len() >= 3) {
            let reference = earliest_stops(modal, days);
            for d in class_days {
                let key = key_of(&days[d]);
                if key.len() + 1 != modal.len() {
                    continue;
                }
                let Some(j) = (1..modal.len() - 1).find(|&j| {
                    key[..j] == modal[..j] && key[j..] == modal[j + 1..]
                }) else {
                    continue;
                };
                let bs = &days[d];
                let prev = &bs[j - 1];
                let next = &bs[j];
                let route = prev.route_id.as_ref().and_then(|r| routes.get(r));
                let from = route.and_then(|r| r.position(&prev.stop_id));
                let outcome = match (route, from) {
                    (Some(r), Some(pos)) if r.reaches_after(pos, &next.stop_id) => None,
                    (Some(r), Some(pos)) => match &reference[j] {
                        Some(p2) if r.reaches_after(pos, p2) => Some(Outcome::CorrectedIntermediate),
                        _ => Some(Outcome::DroppedUnreachable),
                    },
                    _ => Some(Outcome::DroppedUnreachable),
                };
                match outcome {
                    Some(Outcome::CorrectedIntermediate) => {
                        let mid = Timestamp::new(
                            prev.timestamp.epoch + (next.timestamp.epoch - prev.timestamp.epoch) / 2,
                            prev.timestamp.offset_secs,
                        );
                        let inserted = Boarding {
                            user_id: prev.user_id.clone(),
                            timestamp: mid,
                            route_id: Some(Id::from(modal[j].as_str())),
                            stop_id: reference[j].clone().expect("reachable reference stop"),
                            source: BoardingSource::Inferred,
                        };
                        days.get_mut(d).unwrap().insert(j, inserted);
                        outcomes.entry(*d).or_default().add(Outcome::CorrectedIntermediate, 1);
                    }
                    Some(o) => {
                        outcomes.entry(*d).or_default().add(o, 1);
                    }
                    None => {}
                }
            }
            for (d, c) in &outcomes {
                if c.get(Outcome::DroppedUnreachable) > 0 {
                    days.remove(d);
                }
            }
        }

        // Origin snap for every recurring pattern (after repairs, which may
        // have completed more days of the modal pattern).
        let present: Vec<NaiveDate> = class_days.iter().copied().filter(|d| days.contains_key(d)).collect();
        let mut freq: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for d in &present {
            *freq.entry(key_of(&days[d])).or_default() += 1;
        }
        for (pattern, count) in freq {
            if count < threshold {
                continue;
            }
            let earliest = earliest_stops(&pattern, days);
            for d in &present {
                if key_of(&days[d]) != pattern {
                    continue;
                }
                let bs = days.get_mut(d).unwrap();
                for (i, target) in earliest.iter().enumerate() {
                    if let Some(t) = target {
                        if bs[i].stop_id != *t {
                            bs[i].stop_id = t.clone();
                            outcomes.entry(*d).or_default().add(Outcome::CorrectedOriginSnap, 1);
                        }
                    }
                }
            }
        }
    }
    outcomes
}

/// Corrects one rider's history, then chains each remaining day.
pub fn recurring_pattern_correction(
    mut days: BTreeMap<NaiveDate, Vec<Boarding>>,
    routes: &HashMap<Id, RouteDef>,
    calendar: &Calendar,
    cfg: &OdmConfig,
) -> (Vec<OdPair>, ChainDiagnostics) {
    let user = days.values().flatten().next().map(|b| b.user_id.clone());
    let outcomes = correct_user_history(&mut days, routes, calendar, cfg);
    let mut diag = ChainDiagnostics::default();
    let mut pairs = Vec::new();
    let Some(user) = user else {
        return (pairs, diag);
    };
    for (d, c) in &outcomes {
        diag.record(&user, *d, *c);
    }
    for (d, bs) in &days {
        let (p, c) = chain_daily_trips(bs);
        diag.record(&user, *d, c);
        pairs.extend(p);
    }
    (pairs, diag)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OdmOutput {
    pub pairs: Vec<OdPair>,
    pub diagnostics: ChainDiagnostics,
    /// Every validation that resolved to a stop, before corrections.
    pub boardings: Vec<Boarding>,
}

/// Resolves one validation to a boarding.
pub fn resolve_boarding(
    v: &Validation,
    pings: &PingIndex,
    routes: &HashMap<Id, RouteDef>,
    stops: &HashMap<Id, Coord>,
    terminals: &HashMap<Id, Id>,
    cfg: &OdmConfig,
) -> Result<Boarding, OdmError> {
    if let Some(t) = &v.terminal_id {
        let stop = terminals.get(t).ok_or_else(|| OdmError::UnknownTerminal(t.clone()))?;
        return Ok(Boarding {
            user_id: v.user_id.clone(),
            timestamp: v.timestamp,
            route_id: v.route_id.clone(),
            stop_id: stop.clone(),
            source: BoardingSource::Terminal,
        });
    }
    let located = locate_validation(v, pings, cfg.max_gap_secs)?;
    let route_id = v.route_id.clone().unwrap_or(located.route_id);
    let route = routes.get(&route_id).ok_or_else(|| OdmError::UnknownRoute(route_id.clone()))?;
    let (stop_id, _) = snap_to_stop(&located.coord, route, stops, cfg.snap_radius_m)?;
    Ok(Boarding {
        user_id: v.user_id.clone(),
        timestamp: v.timestamp,
        route_id: Some(route_id),
        stop_id,
        source: BoardingSource::GpsMatch,
    })
}

/// Full reconstruction: locate, snap, correct recurring riders, chain.
pub fn build_odm(
    validations: &[Validation],
    pings: &[GpsPing],
    routes: &[RouteDef],
    stops: &[Stop],
    terminals: &[Terminal],
    calendar: &Calendar,
    cfg: &OdmConfig,
) -> OdmOutput {
    if validations.is_empty() {
        return OdmOutput::default();
    }
    let index = PingIndex::new(pings);
    let route_map: HashMap<Id, RouteDef> = routes.iter().map(|r| (r.route_id.clone(), r.clone())).collect();
    let stop_map: HashMap<Id, Coord> = stops.iter().map(|s| (s.stop_id.clone(), s.coord())).collect();
    let terminal_map: HashMap<Id, Id> = terminals
        .iter()
        .map(|t| (t.terminal_id.clone(), t.stop_id.clone()))
        .collect();

    let resolved: Vec<Result<Boarding, OdmError>> = validations
        .par_iter()
        .map(|v| resolve_boarding(v, &index, &route_map, &stop_map, &terminal_map, cfg))
        .collect();

    let mut diagnostics = ChainDiagnostics::default();
    let mut per_user: BTreeMap<Id, BTreeMap<NaiveDate, Vec<Boarding>>> = BTreeMap::new();
    let mut boardings = Vec::with_capacity(validations.len());
    for (v, r) in validations.iter().zip(resolved) {
        match r {
            Ok(b) => {
                per_user
                    .entry(b.user_id.clone())
                    .or_default()
                    .entry(b.timestamp.local_date())
                    .or_default()
                    .push(b.clone());
                boardings.push(b);
            }
            Err(e) => {
                let o = match e {
                    OdmError::Unlocatable { .. } | OdmError::NoVehicle | OdmError::UnknownTerminal(_) => Outcome::Unlocatable,
                    _ => Outcome::Unsnappable,
                };
                diagnostics.record(&v.user_id, v.timestamp.local_date(), OutcomeCounts::one(o));
            }
        }
    }

    let results: Vec<(Vec<OdPair>, ChainDiagnostics)> = per_user
        .into_par_iter()
        .map(|(_, mut days)| {
            for bs in days.values_mut() {
                bs.sort_by(|a, b| a.timestamp.cmp(&b.timestamp));
            }
            recurring_pattern_correction(days, &route_map, calendar, cfg)
        })
        .collect();

    let mut pairs = Vec::new();
    for (p, d) in results {
        pairs.extend(p);
        diagnostics.merge(d);
    }
    OdmOutput {
        pairs,
        diagnostics,
        boardings,
    }
}

/// Per stop: (stop, all resolved boardings, boardings that became OD origins).
pub fn embarking_counts(boardings: &[Boarding], pairs: &[OdPair]) -> Vec<(Id, u64, u64)> {
    let mut m: BTreeMap<Id, (u64, u64)> = BTreeMap::new();
    for b in boardings {
        m.entry(b.stop_id.clone()).or_default().0 += 1;
    }
    for p in pairs {
        m.entry(p.origin_stop_id.clone()).or_default().1 += 1;
    }
    m.into_iter().map(|(s, (t, u))| (s, t, u)).collect()
}

/// Share of recovered pairs that match a ground-truth leg, as a multiset match
/// on (user, day, origin, destination). Only users for which `include` holds
/// are counted. Returns (matched, recovered).
pub fn precision_against(
    pairs: &[OdPair],
    truth: &[GroundTruthLeg],
    include: impl Fn(&GroundTruthLeg) -> bool,
) -> (usize, usize) {
    let mut allowed: HashMap<&str, bool> = HashMap::new();
    let mut pool: HashMap<(&str, NaiveDate, &str, &str), usize> = HashMap::new();
    for t in truth {
        let ok = include(t);
        let e = allowed.entry(&t.user_id).or_insert(true);
        *e &= ok;
        *pool
            .entry((&t.user_id, t.day, &t.origin_stop_id, &t.destination_stop_id))
            .or_default() += 1;
    }
    let mut matched = 0;
    let mut recovered = 0;
    for p in pairs {
        if !allowed.get(&*p.user_id).copied().unwrap_or(false) {
            continue;
        }
        recovered += 1;
        if let Some(c) = pool.get_mut(&(&*p.user_id, p.day, &*p.origin_stop_id, &*p.destination_stop_id)) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    (matched, recovered)
}

const ODPAIRS_HEADER: [&str; 6] = [
    "user_id",
    "day",
    "leg_index",
    "origin_stop_id",
    "destination_stop_id",
    "origin_time",
];

pub fn write_odpairs<W: Write>(w: W, pairs: &[OdPair]) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(ODPAIRS_HEADER).map_err(io::Error::other)?;
    for p in pairs {
        wr.write_record([
            &*p.user_id,
            &p.day.to_string(),
            &p.leg_index.to_string(),
            &*p.origin_stop_id,
            &*p.destination_stop_id,
            &p.origin_time.to_iso8601(),
        ])
        .map_err(io::Error::other)?;
    }
    wr.flush()
}

pub fn read_odpairs(path: &Path) -> io::Result<Vec<OdPair>> {
    let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
    let mut rdr = csv::Reader::from_path(path).map_err(io::Error::other)?;
    let header = rdr.headers().map_err(io::Error::other)?.clone();
    if header.iter().ne(ODPAIRS_HEADER) {
        return Err(bad(format!("{}: unexpected header", path.display())));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let r = rec.map_err(io::Error::other)?;
        out.push(OdPair {
            user_id: r[0].into(),
            day: r[1].parse().map_err(|e| bad(format!("day: {e}")))?,
            leg_index: r[2].parse().map_err(|e| bad(format!("leg_index: {e}")))?,
            origin_stop_id: r[3].into(),
            destination_stop_id: r[4].into(),
            origin_time: r[5].parse().map_err(bad)?,
        });
    }
    Ok(out)
}

pub fn write_embarkings<W: Write>(w: W, counts: &[(Id, u64, u64)]) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["stop_id", "total", "sampled"]).map_err(io::Error::other)?;
    for (s, t, u) in counts {
        wr.write_record([&**s, &t.to_string(), &u.to_string()])
            .map_err(io::Error::other)?;
    }
    wr.flush()
}

pub fn read_embarkings(path: &Path) -> io::Result<Vec<(Id, u64, u64)>> {
    let mut rd = csv::Reader::from_path(path).map_err(io::Error::other)?;
    rd.deserialize::<(String, u64, u64)>()
        .map(|r| r.map(|(s, t, u)| (Id::from(s), t, u)).map_err(io::Error::other))
        .collect()
}

pub fn write_diagnostics<W: Write>(w: W, diag: &ChainDiagnostics) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["user_id", "day"];
    header.extend(Outcome::ALL.iter().map(|o| o.as_str()));
    wr.write_record(&header).map_err(io::Error::other)?;
    for ((u, d), c) in &diag.per_user_day {
        let mut row = vec![u.to_string(), d.to_string()];
        row.extend(Outcome::ALL.iter().map(|o| c.get(*o).to_string()));
        wr.write_record(&row).map_err(io::Error::other)?;
    }
    wr.flush()
}
