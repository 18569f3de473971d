//! Reproducible synthetic cities.
//!
//! Stops are laid out in `communities` spatial clusters on jittered grids. Each
//! cluster is served by bidirectional lines that visit its stops in random order,
//! and a few trunk lines join pairs of clusters. Vehicles run their line back and
//! forth all day and ping at a fixed cadence. Riders follow fixed per-day-class
//! patterns (home, work, optionally a third activity, then home) so the true
//! origin–destination legs are known and written as ground truth.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use chrono::{Days, NaiveDate, NaiveTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    write_pings, write_routes, write_stops, write_terminals, write_validations, Bundle, Direction,
    GpsPing, Id, IngestError, RouteDef, Stop, Terminal, Timestamp, Validation,
};
use crate::calendar::{Calendar, DayClass};
use crate::digest::Digester;
use crate::geo::Coord;

/// Generator settings. Every key has a default, so a config file only needs
/// the keys it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Total number of stops.
    pub stops: usize,
    /// Number of planted spatial clusters (k).
    pub communities: usize,
    /// Route definitions per cluster. Lines come in outbound/inbound pairs.
    pub routes_per_community: usize,
    /// Route definitions joining two clusters.
    pub trunk_routes: usize,
    /// Stops per intra-cluster route.
    pub route_length: usize,
    /// Stops a trunk route visits in each of its two clusters.
    pub trunk_segment_length: usize,
    pub terminals: usize,
    pub vehicles_per_route: usize,
    pub users: usize,
    pub days: usize,
    pub start_date: NaiveDate,
    pub utc_offset_minutes: i32,
    pub pings_per_minute: f64,
    pub service_start_hour: f64,
    pub service_end_hour: f64,
    pub bus_speed_mps: f64,
    pub stop_spacing_m: f64,
    pub cluster_gap_m: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    /// Probability that a rider's pattern for the class crosses clusters.
    pub inter_share_weekday: f64,
    pub inter_share_saturday: f64,
    pub inter_share_sunday: f64,
    /// Probability of a three-boarding weekday pattern.
    pub three_leg_share: f64,
    pub active_weekday: f64,
    pub active_saturday: f64,
    pub active_sunday: f64,
    /// Per-boarding probability of validating one stop after boarding.
    pub late_validation_rate: f64,
    /// Share of three-boarding riders who sometimes skip the middle boarding.
    pub modal_gap_rate: f64,
    /// Probability of skipping it on a given weekday, for those riders.
    pub modal_gap_day_rate: f64,
    /// Probability of validating at the terminal gate when boarding at a terminal.
    pub terminal_validation_rate: f64,
    pub holidays: Vec<NaiveDate>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            stops: 400,
            communities: 4,
            routes_per_community: 20,
            trunk_routes: 6,
            route_length: 16,
            trunk_segment_length: 6,
            terminals: 3,
            vehicles_per_route: 2,
            users: 500,
            days: 7,
            start_date: NaiveDate::from_ymd_opt(2015, 3, 11).unwrap(),
            utc_offset_minutes: -180,
            pings_per_minute: 2.0,
            service_start_hour: 5.0,
            service_end_hour: 23.0,
            bus_speed_mps: 12.0,
            stop_spacing_m: 350.0,
            cluster_gap_m: 4000.0,
            center_lat: -3.7319,
            center_lon: -38.5267,
            inter_share_weekday: 0.6,
            inter_share_saturday: 0.55,
            inter_share_sunday: 0.45,
            three_leg_share: 0.25,
            active_weekday: 0.9,
            active_saturday: 0.6,
            active_sunday: 0.45,
            late_validation_rate: 0.05,
            modal_gap_rate: 0.0,
            modal_gap_day_rate: 0.3,
            terminal_validation_rate: 0.5,
            holidays: Vec::new(),
        }
    }
}

impl SynthConfig {
    /// Full-size network: 4783 stops, 359 routes, 7 terminals.
    pub fn full_scale() -> Self {
        SynthConfig {
            stops: 4783,
            communities: 10,
            routes_per_community: 34,
            trunk_routes: 19,
            route_length: 40,
            trunk_segment_length: 8,
            terminals: 7,
            ..Default::default()
        }
    }

    pub fn total_routes(&self) -> usize {
        self.communities * self.routes_per_community + self.trunk_routes
    }

    pub fn ping_interval_secs(&self) -> i64 {
        ((60.0 / self.pings_per_minute).round() as i64).max(1)
    }

    pub fn calendar(&self) -> Calendar {
        Calendar::with_holidays(self.holidays.iter().copied())
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: String| Err(IngestError::InfeasibleConfig(m));
        if self.communities == 0 || self.stops < self.communities {
            return bad("need at least one stop per community".into());
        }
        let smallest = self.stops / self.communities;
        if self.route_length < 3 {
            return bad("route_length must be at least 3".into());
        }
        if self.route_length > smallest {
            return bad(format!(
                "route_length {} exceeds the smallest cluster ({} stops)",
                self.route_length, smallest
            ));
        }
        if self.trunk_routes > 0 {
            if self.communities < 2 {
                return bad("trunk routes need at least two communities".into());
            }
            if self.trunk_segment_length < 2 || self.trunk_segment_length > smallest {
                return bad(format!(
                    "trunk_segment_length {} must be in 2..={}",
                    self.trunk_segment_length, smallest
                ));
            }
        }
        if self.routes_per_community < 2 {
            return bad("routes_per_community must be at least 2 (one bidirectional line)".into());
        }
        if self.vehicles_per_route == 0 {
            return bad("vehicles_per_route must be positive".into());
        }
        if self.days == 0 {
            return bad("days must be positive".into());
        }
        if !(self.pings_per_minute > 0.0) {
            return bad("pings_per_minute must be positive".into());
        }
        if !(self.bus_speed_mps > 0.0 && self.stop_spacing_m > 0.0) {
            return bad("speed and spacing must be positive".into());
        }
        if !(0.0 <= self.service_start_hour && self.service_start_hour < self.service_end_hour && self.service_end_hour <= 24.0) {
            return bad("service hours must satisfy 0 <= start < end <= 24".into());
        }
        for (name, p) in [
            ("inter_share_weekday", self.inter_share_weekday),
            ("inter_share_saturday", self.inter_share_saturday),
            ("inter_share_sunday", self.inter_share_sunday),
            ("three_leg_share", self.three_leg_share),
            ("active_weekday", self.active_weekday),
            ("active_saturday", self.active_saturday),
            ("active_sunday", self.active_sunday),
            ("late_validation_rate", self.late_validation_rate),
            ("modal_gap_rate", self.modal_gap_rate),
            ("modal_gap_day_rate", self.modal_gap_day_rate),
            ("terminal_validation_rate", self.terminal_validation_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability"));
            }
        }
        let inter = self.inter_share_weekday.max(self.inter_share_saturday).max(self.inter_share_sunday);
        if inter > 0.0 && self.trunk_routes < 2 {
            return bad("inter-community riders need at least one bidirectional trunk line".into());
        }
        Ok(())
    }
}

/// One true origin–destination leg of a rider.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthLeg {
    pub user_id: Id,
    pub day: NaiveDate,
    pub leg_index: usize,
    pub origin_stop_id: Id,
    pub destination_stop_id: Id,
    /// False for riders who sometimes complete a leg outside the bus system.
    pub fully_on_bus: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCity {
    pub config: SynthConfig,
    pub seed: u64,
    pub bundle: Bundle,
    pub ground_truth: Vec<GroundTruthLeg>,
    /// Planted community of every stop, in stop order.
    pub planted: Vec<(Id, usize)>,
}

impl SynthCity {
    /// Digest over every emitted file, in canonical CSV form.
    pub fn digest(&self) -> String {
        let mut d = Digester::new();
        let mut buf = Vec::new();
        let mut chunk = |f: &dyn Fn(&mut Vec<u8>) -> io::Result<()>| {
            buf.clear();
            f(&mut buf).expect("in-memory write");
            d.update(&buf);
        };
        chunk(&|b| write_stops(b, &self.bundle.stops));
        chunk(&|b| write_routes(b, &self.bundle.routes));
        chunk(&|b| write_terminals(b, &self.bundle.terminals));
        chunk(&|b| write_pings(b, &self.bundle.pings));
        chunk(&|b| write_validations(b, &self.bundle.validations));
        chunk(&|b| write_ground_truth(b, &self.ground_truth));
        chunk(&|b| write_planted(b, &self.planted));
        d.finish()
    }

    /// Writes the five datasets plus `ground_truth.csv` and `planted_communities.csv`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        super::write_bundle(dir, &self.bundle)?;
        let gt = io::BufWriter::new(std::fs::File::create(dir.join("ground_truth.csv"))?);
        write_ground_truth(gt, &self.ground_truth)?;
        let pc = io::BufWriter::new(std::fs::File::create(dir.join("planted_communities.csv"))?);
        write_planted(pc, &self.planted)?;
        if !self.config.holidays.is_empty() {
            let mut h = std::fs::File::create(dir.join("holidays.csv"))?;
            writeln!(h, "date")?;
            for d in &self.config.holidays {
                writeln!(h, "{d}")?;
            }
        }
        Ok(())
    }
}

pub fn write_ground_truth<W: Write>(w: W, legs: &[GroundTruthLeg]) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let e = io::Error::other;
    wr.write_record([
        "user_id",
        "day",
        "leg_index",
        "origin_stop_id",
        "destination_stop_id",
        "fully_on_bus",
    ])
    .map_err(e)?;
    for l in legs {
        wr.write_record([
            &*l.user_id,
            &l.day.to_string(),
            &l.leg_index.to_string(),
            &*l.origin_stop_id,
            &*l.destination_stop_id,
            if l.fully_on_bus { "true" } else { "false" },
        ])
        .map_err(e)?;
    }
    wr.flush()
}

pub fn write_planted<W: Write>(w: W, planted: &[(Id, usize)]) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let e = io::Error::other;
    wr.write_record(["stop_id", "community"]).map_err(e)?;
    for (s, c) in planted {
        wr.write_record([&**s, &c.to_string()]).map_err(e)?;
    }
    wr.flush()
}

pub fn read_ground_truth(path: &Path) -> io::Result<Vec<GroundTruthLeg>> {
    let mut rdr = csv::Reader::from_path(path).map_err(io::Error::other)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let r = rec.map_err(io::Error::other)?;
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        out.push(GroundTruthLeg {
            user_id: r[0].into(),
            day: r[1].parse().map_err(|_| bad("bad day"))?,
            leg_index: r[2].parse().map_err(|_| bad("bad leg_index"))?,
            origin_stop_id: r[3].into(),
            destination_stop_id: r[4].into(),
            fully_on_bus: &r[5] == "true",
        });
    }
    Ok(out)
}

pub fn read_planted(path: &Path) -> io::Result<Vec<(Id, usize)>> {
    let mut rdr = csv::Reader::from_path(path).map_err(io::Error::other)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let r = rec.map_err(io::Error::other)?;
        let c = r[1]
            .parse()
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, "bad community"))?;
        out.push((Id::from(&r[0]), c));
    }
    Ok(out)
}

/// A bidirectional (or outbound-only) line and its schedule.
struct Line {
    outbound: usize,
    inbound: Option<usize>,
    /// Index into `Line::segment_split` for trunks: positions before it lie in
    /// the first cluster.
    split: Option<usize>,
}

struct Schedule {
    /// Offset of the arrival at each itinerary position from the trip start.
    arrival: Vec<i64>,
    trip_secs: i64,
    cycle_secs: i64,
    /// Per vehicle: (vehicle id, first trip start offset from service start).
    vehicles: Vec<(Id, i64)>,
    trips_per_vehicle: Vec<i64>,
}

impl Schedule {
    /// Earliest (vehicle index, arrival offset from service start) at
    /// itinerary position `pos` no earlier than `not_before`.
    fn next_arrival(&self, pos: usize, not_before: i64) -> Option<(usize, i64)> {
        let mut best: Option<(usize, i64)> = None;
        for (vi, (_, start)) in self.vehicles.iter().enumerate() {
            let first = start + self.arrival[pos];
            let m = if not_before <= first {
                0
            } else {
                (not_before - first + self.cycle_secs - 1) / self.cycle_secs
            };
            if m >= self.trips_per_vehicle[vi] {
                continue;
            }
            let t = first + m * self.cycle_secs;
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((vi, t));
            }
        }
        best
    }
}

#[derive(Clone)]
struct Pattern {
    line: usize,
    /// Outbound itinerary positions of the activity stops, ascending.
    positions: Vec<usize>,
}

/// Builds a synthetic city. Identical `(config, seed)` give identical output.
pub fn generate_synthetic_city(config: &SynthConfig, seed: u64) -> Result<SynthCity, IngestError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = config.communities;

    // Stops, cluster by cluster.
    let sizes: Vec<usize> = (0..k)
        .map(|c| config.stops / k + usize::from(c < config.stops % k))
        .collect();
    let max_side = (sizes[0] as f64).sqrt().ceil() as usize;
    let cluster_width = max_side as f64 * config.stop_spacing_m + config.cluster_gap_m;
    let cluster_cols = (k as f64).sqrt().ceil() as usize;
    let origin = Coord::new(config.center_lat, config.center_lon)
        .offset_m(-(cluster_cols as f64) * cluster_width / 2.0, -(cluster_cols as f64) * cluster_width / 2.0);

    let mut stops: Vec<Stop> = Vec::with_capacity(config.stops);
    let mut planted = Vec::with_capacity(config.stops);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (c, &size) in sizes.iter().enumerate() {
        let side = (size as f64).sqrt().ceil() as usize;
        let (cx, cy) = ((c % cluster_cols) as f64, (c / cluster_cols) as f64);
        for j in 0..size {
            let jitter = 0.15 * config.stop_spacing_m;
            let east = cx * cluster_width + (j % side) as f64 * config.stop_spacing_m + rng.random_range(-jitter..=jitter);
            let north = cy * cluster_width + (j / side) as f64 * config.stop_spacing_m + rng.random_range(-jitter..=jitter);
            let p = origin.offset_m(east, north);
            let id: Id = format!("S{:05}", stops.len()).into();
            members[c].push(stops.len());
            planted.push((id.clone(), c));
            stops.push(Stop {
                stop_id: id,
                lat: p.lat,
                lon: p.lon,
                is_terminal: false,
            });
        }
    }
    let coords: Vec<Coord> = stops.iter().map(Stop::coord).collect();

    // Lines.
    let mut routes: Vec<RouteDef> = Vec::with_capacity(config.total_routes());
    let mut lines: Vec<Line> = Vec::new();
    let push_line = |itinerary: Vec<usize>, with_inbound: bool, split: Option<usize>, routes: &mut Vec<RouteDef>, lines: &mut Vec<Line>| {
        let n = lines.len();
        let ids: Vec<Id> = itinerary.iter().map(|&s| stops[s].stop_id.clone()).collect();
        routes.push(RouteDef {
            route_id: format!("R{n:03}O").into(),
            direction: Direction::Outbound,
            itinerary: ids.clone(),
        });
        let outbound = routes.len() - 1;
        let inbound = with_inbound.then(|| {
            routes.push(RouteDef {
                route_id: format!("R{n:03}I").into(),
                direction: Direction::Inbound,
                itinerary: ids.into_iter().rev().collect(),
            });
            routes.len() - 1
        });
        lines.push(Line { outbound, inbound, split });
    };

    let mut intra_lines: Vec<Vec<usize>> = vec![Vec::new(); k];
    for c in 0..k {
        let n_lines = config.routes_per_community.div_ceil(2);
        let mut uncovered = members[c].clone();
        uncovered.shuffle(&mut rng);
        let mut slots_left = n_lines * config.route_length;
        for l in 0..n_lines {
            let mut itin: Vec<usize> = Vec::with_capacity(config.route_length);
            while itin.len() < config.route_length {
                let take_uncovered = !uncovered.is_empty()
                    && (uncovered.len() >= slots_left || rng.random_bool(0.5));
                let pick = if take_uncovered {
                    uncovered.pop().unwrap()
                } else {
                    members[c][rng.random_range(0..members[c].len())]
                };
                slots_left = slots_left.saturating_sub(1);
                if itin.contains(&pick) {
                    continue;
                }
                uncovered.retain(|&s| s != pick);
                itin.push(pick);
            }
            let with_inbound = 2 * l + 1 < config.routes_per_community;
            intra_lines[c].push(lines.len());
            push_line(itin, with_inbound, None, &mut routes, &mut lines);
        }
    }

    let mut trunk_lines = Vec::new();
    let n_trunks = config.trunk_routes.div_ceil(2);
    for t in 0..n_trunks {
        let (a, b) = if t < k.saturating_sub(1) {
            (t, t + 1)
        } else {
            let a = rng.random_range(0..k);
            let mut b = rng.random_range(0..k - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        };
        let seg = |c: usize, rng: &mut ChaCha8Rng| {
            let mut pool = members[c].clone();
            pool.shuffle(rng);
            pool.truncate(config.trunk_segment_length);
            pool
        };
        let mut itin = seg(a, &mut rng);
        itin.extend(seg(b, &mut rng));
        let with_inbound = 2 * t + 1 < config.trunk_routes;
        trunk_lines.push(lines.len());
        push_line(itin, with_inbound, Some(config.trunk_segment_length), &mut routes, &mut lines);
    }

    // Terminals sit at the first stop of lines, trunks first.
    let mut terminals = Vec::new();
    let mut terminal_of_stop: BTreeMap<usize, Id> = BTreeMap::new();
    for &li in trunk_lines.iter().chain(intra_lines.iter().flatten()) {
        if terminals.len() >= config.terminals {
            break;
        }
        let first = &routes[lines[li].outbound].itinerary[0];
        let idx: usize = first[1..].parse().expect("generated stop id");
        if terminal_of_stop.contains_key(&idx) {
            continue;
        }
        let tid: Id = format!("T{:02}", terminals.len()).into();
        stops[idx].is_terminal = true;
        terminal_of_stop.insert(idx, tid.clone());
        terminals.push(Terminal {
            terminal_id: tid,
            stop_id: first.clone(),
        });
    }

    // Schedules.
    let ping_dt = config.ping_interval_secs();
    let dwell = 2 * ping_dt;
    let service_start = (config.service_start_hour * 3600.0).round() as i64;
    let service_end = (config.service_end_hour * 3600.0).round() as i64;
    let service_len = service_end - service_start;
    let stop_index = |id: &Id| -> usize { id[1..].parse().expect("generated stop id") };
    let travel = |a: usize, b: usize| ((coords[a].distance_m(&coords[b]) / config.bus_speed_mps).ceil() as i64).max(1);

    let mut vehicle_counter = 0usize;
    let schedules: Vec<Schedule> = routes
        .iter()
        .map(|r| {
            let idx: Vec<usize> = r.itinerary.iter().map(stop_index).collect();
            let mut arrival = vec![0i64; idx.len()];
            for p in 1..idx.len() {
                arrival[p] = arrival[p - 1] + dwell + travel(idx[p - 1], idx[p]);
            }
            let trip_secs = arrival[idx.len() - 1] + dwell;
            let cycle_secs = trip_secs + travel(idx[idx.len() - 1], idx[0]);
            let v = config.vehicles_per_route;
            let vehicles: Vec<(Id, i64)> = (0..v)
                .map(|j| {
                    vehicle_counter += 1;
                    (format!("V{:05}", vehicle_counter - 1).into(), j as i64 * cycle_secs / v as i64)
                })
                .collect();
            let trips_per_vehicle = vehicles
                .iter()
                .map(|(_, start)| {
                    if start + trip_secs > service_len {
                        0
                    } else {
                        (service_len - start - trip_secs) / cycle_secs + 1
                    }
                })
                .collect();
            Schedule {
                arrival,
                trip_secs,
                cycle_secs,
                vehicles,
                trips_per_vehicle,
            }
        })
        .collect();

    let offset_secs = config.utc_offset_minutes * 60;
    let dates: Vec<NaiveDate> = (0..config.days)
        .map(|d| config.start_date.checked_add_days(Days::new(d as u64)).expect("date in range"))
        .collect();
    let midnight = |date: NaiveDate| date.and_time(NaiveTime::MIN).and_utc().timestamp() - offset_secs as i64;
    let calendar = config.calendar();

    // Pings.
    let mut pings = Vec::new();
    for &date in &dates {
        let day0 = midnight(date) + service_start;
        for (ri, (route, sch)) in routes.iter().zip(&schedules).enumerate() {
            let idx: Vec<usize> = route.itinerary.iter().map(stop_index).collect();
            for (vi, (vid, start)) in sch.vehicles.iter().enumerate() {
                let trips = sch.trips_per_vehicle[vi];
                if trips == 0 {
                    continue;
                }
                let end = start + (trips - 1) * sch.cycle_secs + sch.trip_secs;
                let mut t = *start;
                while t <= end {
                    let tau = (t - start) % sch.cycle_secs;
                    let pos = position_at(tau, &idx, &sch.arrival, dwell, sch.trip_secs, sch.cycle_secs, &coords);
                    pings.push(GpsPing {
                        vehicle_id: vid.clone(),
                        route_id: routes[ri].route_id.clone(),
                        timestamp: Timestamp::new(day0 + t, offset_secs),
                        lat: pos.lat,
                        lon: pos.lon,
                    });
                    t += ping_dt;
                }
            }
        }
    }

    // Riders.
    let usable_intra: Vec<usize> = intra_lines.iter().flatten().copied().filter(|&l| lines[l].inbound.is_some()).collect();
    let usable_trunks: Vec<usize> = trunk_lines.iter().copied().filter(|&l| lines[l].inbound.is_some()).collect();
    let line_len = |l: usize| routes[lines[l].outbound].itinerary.len();

    let draw_pattern = |rng: &mut ChaCha8Rng, inter: bool, legs: usize| -> Pattern {
        if inter && !usable_trunks.is_empty() {
            let line = usable_trunks[rng.random_range(0..usable_trunks.len())];
            let split = lines[line].split.expect("trunk split");
            let len = line_len(line);
            let mut positions = vec![rng.random_range(0..split)];
            if legs == 3 {
                positions.push(rng.random_range(split..len - 1));
                positions.push(rng.random_range(positions[1] + 1..len));
            } else {
                positions.push(rng.random_range(split..len));
            }
            Pattern { line, positions }
        } else {
            let line = usable_intra[rng.random_range(0..usable_intra.len())];
            let len = line_len(line);
            let mut positions: Vec<usize> = (0..len).collect();
            positions.shuffle(rng);
            positions.truncate(legs);
            positions.sort_unstable();
            Pattern { line, positions }
        }
    };

    let mut validations = Vec::new();
    let mut ground_truth = Vec::new();
    for u in 0..config.users {
        let user_id: Id = format!("U{u:06}").into();
        let weekday_legs = if rng.random_bool(config.three_leg_share) { 3 } else { 2 };
        let inter = rng.random_bool(config.inter_share_weekday);
        let weekday = draw_pattern(&mut rng, inter, weekday_legs);
        let inter = rng.random_bool(config.inter_share_saturday);
        let saturday = draw_pattern(&mut rng, inter, 2);
        let inter = rng.random_bool(config.inter_share_sunday);
        let sunday = draw_pattern(&mut rng, inter, 2);
        let gap_prone = weekday_legs == 3 && rng.random_bool(config.modal_gap_rate);

        for &date in &dates {
            let class = calendar.day_class(date);
            let (pattern, active, depart, activity_ends) = match class {
                DayClass::Weekday => (&weekday, config.active_weekday, (6.0, 8.5), [(12.0, 13.5), (16.5, 18.5)]),
                DayClass::Saturday => (&saturday, config.active_saturday, (8.0, 11.0), [(13.0, 17.0), (13.0, 17.0)]),
                DayClass::SundayHoliday => (&sunday, config.active_sunday, (9.0, 12.0), [(14.0, 18.0), (14.0, 18.0)]),
            };
            if !rng.random_bool(active) {
                continue;
            }
            let n = pattern.positions.len();
            let skip_middle = gap_prone && class == DayClass::Weekday && rng.random_bool(config.modal_gap_day_rate);
            let line = &lines[pattern.line];
            let out = lines[pattern.line].outbound;
            let inb = line.inbound.expect("usable line");
            let len = line_len(pattern.line);

            // (route, board position, alight position) per leg.
            let mut legs: Vec<(usize, usize, usize)> = Vec::with_capacity(n);
            for i in 0..n - 1 {
                legs.push((out, pattern.positions[i], pattern.positions[i + 1]));
            }
            legs.push((inb, len - 1 - pattern.positions[n - 1], len - 1 - pattern.positions[0]));

            let hour = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| (rng.random_range(lo..hi) * 3600.0) as i64 - service_start;
            let mut desired = hour(&mut rng, depart);
            let ends: Vec<i64> = match n {
                3 => vec![hour(&mut rng, activity_ends[0]), hour(&mut rng, (activity_ends[1].0 + 1.0, activity_ends[1].1 + 1.0))],
                _ => vec![hour(&mut rng, activity_ends[1])],
            };
            let mut day_validations = Vec::with_capacity(n);
            let mut feasible = true;
            for (li, &(route, board, alight)) in legs.iter().enumerate() {
                let sch = &schedules[route];
                let Some((vi, arrive)) = sch.next_arrival(board, desired) else {
                    feasible = false;
                    break;
                };
                let trip_start = arrive - sch.arrival[board];
                let mut val_pos = board;
                if alight > board + 1 && rng.random_bool(config.late_validation_rate) {
                    val_pos = board + 1;
                }
                let at_stop = trip_start + sch.arrival[val_pos];
                let ts = at_stop + rng.random_range(ping_dt / 2..=dwell - ping_dt / 2);
                let alight_time = trip_start + sch.arrival[alight] + dwell;
                let skipped = skip_middle && li == 1;
                if !skipped {
                    let stop_idx = stop_index(&routes[route].itinerary[val_pos]);
                    let at_terminal = val_pos == board
                        && terminal_of_stop.contains_key(&stop_idx)
                        && rng.random_bool(config.terminal_validation_rate);
                    day_validations.push((ts, route, vi, at_terminal.then(|| terminal_of_stop[&stop_idx].clone())));
                }
                desired = alight_time + 60;
                if li < ends.len() {
                    desired = desired.max(ends[li]);
                }
            }
            if !feasible {
                continue;
            }
            let day0 = midnight(date) + service_start;
            for (ts, route, vi, terminal) in day_validations {
                let r = &routes[route];
                validations.push(Validation {
                    user_id: user_id.clone(),
                    timestamp: Timestamp::new(day0 + ts, offset_secs),
                    route_id: Some(r.route_id.clone()),
                    vehicle_id: terminal.is_none().then(|| schedules[route].vehicles[vi].0.clone()),
                    terminal_id: terminal,
                });
            }
            let out_itin = &routes[out].itinerary;
            for i in 0..n {
                ground_truth.push(GroundTruthLeg {
                    user_id: user_id.clone(),
                    day: date,
                    leg_index: i + 1,
                    origin_stop_id: out_itin[pattern.positions[i]].clone(),
                    destination_stop_id: out_itin[pattern.positions[(i + 1) % n]].clone(),
                    fully_on_bus: !gap_prone,
                });
            }
        }
    }
    validations.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.user_id.cmp(&b.user_id)));

    Ok(SynthCity {
        config: config.clone(),
        seed,
        bundle: Bundle {
            stops,
            routes,
            terminals,
            pings,
            validations,
            rejects: BTreeMap::new(),
        },
        ground_truth,
        planted,
    })
}

fn position_at(
    tau: i64,
    idx: &[usize],
    arrival: &[i64],
    dwell: i64,
    trip_secs: i64,
    cycle_secs: i64,
    coords: &[Coord],
) -> Coord {
    let last = idx.len() - 1;
    if tau >= trip_secs {
        let span = (cycle_secs - trip_secs).max(1) as f64;
        return coords[idx[last]].lerp(&coords[idx[0]], (tau - trip_secs) as f64 / span);
    }
    // Last position whose arrival is <= tau.
    let p = arrival.partition_point(|&a| a <= tau) - 1;
    let since = tau - arrival[p];
    if since < dwell || p == last {
        coords[idx[p]]
    } else {
        let span = (arrival[p + 1] - arrival[p] - dwell) as f64;
        coords[idx[p]].lerp(&coords[idx[p + 1]], (since - dwell) as f64 / span)
    }
}
