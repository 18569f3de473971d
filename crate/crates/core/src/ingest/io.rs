use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    check_in_box, check_lat_lon, Direction, GpsPing, Id, IngestError, RouteDef, Stop, Terminal,
    Timestamp, Validation,
};
use crate::geo::BoundingBox;

const STOPS_HEADER: &[&str] = &["stop_id", "lat", "lon", "is_terminal"];
const ROUTES_HEADER: &[&str] = &["route_id", "direction", "seq", "stop_id"];
const TERMINALS_HEADER: &[&str] = &["terminal_id", "stop_id"];
const PINGS_HEADER: &[&str] = &["vehicle_id", "route_id", "timestamp_iso8601", "lat", "lon"];
const VALIDATIONS_HEADER: &[&str] = &[
    "user_id",
    "timestamp_iso8601",
    "route_id",
    "vehicle_id",
    "terminal_id",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Stops,
    Routes,
    Terminals,
    Pings,
    Validations,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 5] = [
        DatasetKind::Stops,
        DatasetKind::Routes,
        DatasetKind::Terminals,
        DatasetKind::Pings,
        DatasetKind::Validations,
    ];

    pub fn file_name(&self) -> &'static str {
        match self {
            DatasetKind::Stops => "stops.csv",
            DatasetKind::Routes => "routes.csv",
            DatasetKind::Terminals => "terminals.csv",
            DatasetKind::Pings => "pings.csv",
            DatasetKind::Validations => "validations.csv",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::Stops => "stops",
            DatasetKind::Routes => "routes",
            DatasetKind::Terminals => "terminals",
            DatasetKind::Pings => "pings",
            DatasetKind::Validations => "validations",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    /// Fraction of rejected rows above which loading fails.
    pub reject_threshold: f64,
    /// Pings outside this box are rejected.
    pub bbox: Option<BoundingBox>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            reject_threshold: 0.01,
            bbox: None,
        }
    }
}

/// A row that failed validation, by 1-based line number (header is line 1).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub rejects: Vec<RejectedRow>,
    pub total_rows: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    Stops(Loaded<Stop>),
    Routes(Loaded<RouteDef>),
    Terminals(Loaded<Terminal>),
    Pings(Loaded<GpsPing>),
    Validations(Loaded<Validation>),
}

/// Loads one dataset of the given kind.
pub fn load_dataset(path: &Path, kind: DatasetKind, opts: &LoadOptions) -> Result<Dataset, IngestError> {
    Ok(match kind {
        DatasetKind::Stops => Dataset::Stops(load_stops(path, opts)?),
        DatasetKind::Routes => Dataset::Routes(load_routes(path, opts)?),
        DatasetKind::Terminals => Dataset::Terminals(load_terminals(path, opts)?),
        DatasetKind::Pings => Dataset::Pings(load_pings(path, opts)?),
        DatasetKind::Validations => Dataset::Validations(load_validations(path, opts)?),
    })
}

fn open_reader(path: &Path, header: &[&str]) -> Result<csv::Reader<BufReader<File>>, IngestError> {
    let file = File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => IngestError::MissingFile(path.to_path_buf()),
        _ => IngestError::Io(path.to_path_buf(), e),
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let found = rdr
        .headers()
        .map_err(|e| IngestError::Csv(path.to_path_buf(), e))?
        .clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(IngestError::MalformedHeader {
            path: path.to_path_buf(),
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(rdr)
}

/// Drives the per-row parser, collecting rejects instead of aborting.
fn read_rows<R: Read, T>(
    path: &Path,
    rdr: &mut csv::Reader<R>,
    width: usize,
    mut parse: impl FnMut(&csv::StringRecord) -> Result<T, String>,
) -> Result<(Vec<(usize, T)>, Vec<RejectedRow>, usize), IngestError> {
    let mut out = Vec::new();
    let mut rejects = Vec::new();
    let mut total = 0;
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                total += 1;
                let line = record.position().map(|p| p.line() as usize).unwrap_or(total + 1);
                if record.len() != width {
                    rejects.push(RejectedRow {
                        line,
                        reason: format!("expected {width} fields, found {}", record.len()),
                    });
                    continue;
                }
                match parse(&record) {
                    Ok(v) => out.push((line, v)),
                    Err(reason) => rejects.push(RejectedRow { line, reason }),
                }
            }
            Err(e) if e.is_io_error() => return Err(IngestError::Csv(path.to_path_buf(), e)),
            Err(e) => {
                total += 1;
                let line = e.position().map(|p| p.line() as usize).unwrap_or(total + 1);
                rejects.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok((out, rejects, total))
}

fn enforce_threshold<T>(path: &Path, loaded: Loaded<T>, opts: &LoadOptions) -> Result<Loaded<T>, IngestError> {
    let rejected = loaded.rejects.len();
    if loaded.total_rows > 0 && rejected as f64 / loaded.total_rows as f64 > opts.reject_threshold {
        return Err(IngestError::RejectRate {
            path: path.to_path_buf(),
            rejected,
            total: loaded.total_rows,
            threshold: opts.reject_threshold,
        });
    }
    Ok(loaded)
}

fn parse_f64(field: &str, name: &str) -> Result<f64, String> {
    let v: f64 = field.parse().map_err(|_| format!("{name} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{name} is not finite"));
    }
    Ok(v)
}

fn parse_id(field: &str, name: &str) -> Result<Id, String> {
    if field.is_empty() {
        Err(format!("{name} is empty"))
    } else {
        Ok(Id::from(field))
    }
}

fn parse_opt_id(field: &str) -> Option<Id> {
    (!field.is_empty()).then(|| Id::from(field))
}

fn parse_bool(field: &str, name: &str) -> Result<bool, String> {
    match field.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("{name} is not a boolean")),
    }
}

pub fn load_stops(path: &Path, opts: &LoadOptions) -> Result<Loaded<Stop>, IngestError> {
    let mut rdr = open_reader(path, STOPS_HEADER)?;
    let mut seen = HashSet::new();
    let (rows, rejects, total) = read_rows(path, &mut rdr, 4, |r| {
        let stop_id = parse_id(&r[0], "stop_id")?;
        let lat = parse_f64(&r[1], "lat")?;
        let lon = parse_f64(&r[2], "lon")?;
        check_lat_lon(lat, lon)?;
        let is_terminal = parse_bool(&r[3], "is_terminal")?;
        if !seen.insert(stop_id.clone()) {
            return Err(format!("duplicate stop_id {stop_id}"));
        }
        Ok(Stop {
            stop_id,
            lat,
            lon,
            is_terminal,
        })
    })?;
    let loaded = Loaded {
        records: rows.into_iter().map(|(_, s)| s).collect(),
        rejects,
        total_rows: total,
    };
    enforce_threshold(path, loaded, opts)
}

pub fn load_routes(path: &Path, opts: &LoadOptions) -> Result<Loaded<RouteDef>, IngestError> {
    struct Row {
        route_id: Id,
        direction: Direction,
        seq: usize,
        stop_id: Id,
    }
    let mut rdr = open_reader(path, ROUTES_HEADER)?;
    let (rows, mut rejects, total) = read_rows(path, &mut rdr, 4, |r| {
        Ok(Row {
            route_id: parse_id(&r[0], "route_id")?,
            direction: r[1].parse()?,
            seq: r[2].parse().map_err(|_| "seq is not a non-negative integer".to_string())?,
            stop_id: parse_id(&r[3], "stop_id")?,
        })
    })?;

    // Group by route, keeping first-appearance order of routes.
    let mut order: Vec<Id> = Vec::new();
    let mut groups: HashMap<Id, Vec<(usize, Row)>> = HashMap::new();
    for (line, row) in rows {
        let entry = groups.entry(row.route_id.clone()).or_insert_with(|| {
            order.push(row.route_id.clone());
            Vec::new()
        });
        entry.push((line, row));
    }

    let mut routes = Vec::with_capacity(order.len());
    for id in order {
        let mut group = groups.remove(&id).expect("grouped route");
        group.sort_by_key(|(_, r)| r.seq);
        let direction = group[0].1.direction;
        let problem = if group.iter().any(|(_, r)| r.direction != direction) {
            Some("route mixes directions".to_string())
        } else if group.iter().enumerate().any(|(i, (_, r))| r.seq != i) {
            Some("seq is not contiguous from 0".to_string())
        } else {
            let route = RouteDef {
                route_id: id.clone(),
                direction,
                itinerary: group.iter().map(|(_, r)| r.stop_id.clone()).collect(),
            };
            match route.shape_error() {
                Some(e) => Some(e),
                None => {
                    routes.push(route);
                    None
                }
            }
        };
        if let Some(reason) = problem {
            rejects.extend(group.iter().map(|(line, _)| RejectedRow {
                line: *line,
                reason: format!("route {id}: {reason}"),
            }));
        }
    }
    rejects.sort_by_key(|r| r.line);
    let loaded = Loaded {
        records: routes,
        rejects,
        total_rows: total,
    };
    enforce_threshold(path, loaded, opts)
}

pub fn load_terminals(path: &Path, opts: &LoadOptions) -> Result<Loaded<Terminal>, IngestError> {
    let mut rdr = open_reader(path, TERMINALS_HEADER)?;
    let mut seen = HashSet::new();
    let (rows, rejects, total) = read_rows(path, &mut rdr, 2, |r| {
        let terminal_id = parse_id(&r[0], "terminal_id")?;
        if !seen.insert(terminal_id.clone()) {
            return Err(format!("duplicate terminal_id {terminal_id}"));
        }
        Ok(Terminal {
            terminal_id,
            stop_id: parse_id(&r[1], "stop_id")?,
        })
    })?;
    let loaded = Loaded {
        records: rows.into_iter().map(|(_, t)| t).collect(),
        rejects,
        total_rows: total,
    };
    enforce_threshold(path, loaded, opts)
}

pub fn load_pings(path: &Path, opts: &LoadOptions) -> Result<Loaded<GpsPing>, IngestError> {
    let mut rdr = open_reader(path, PINGS_HEADER)?;
    let mut interner = Interner::default();
    let (rows, rejects, total) = read_rows(path, &mut rdr, 5, |r| {
        let vehicle_id = interner.get(parse_id(&r[0], "vehicle_id")?);
        let route_id = interner.get(parse_id(&r[1], "route_id")?);
        let timestamp: Timestamp = r[2].parse()?;
        if timestamp.epoch <= 0 {
            return Err("timestamp not strictly positive".into());
        }
        let lat = parse_f64(&r[3], "lat")?;
        let lon = parse_f64(&r[4], "lon")?;
        check_lat_lon(lat, lon)?;
        check_in_box(opts.bbox.as_ref(), lat, lon)?;
        Ok(GpsPing {
            vehicle_id,
            route_id,
            timestamp,
            lat,
            lon,
        })
    })?;
    let loaded = Loaded {
        records: rows.into_iter().map(|(_, p)| p).collect(),
        rejects,
        total_rows: total,
    };
    enforce_threshold(path, loaded, opts)
}

pub fn load_validations(path: &Path, opts: &LoadOptions) -> Result<Loaded<Validation>, IngestError> {
    let mut rdr = open_reader(path, VALIDATIONS_HEADER)?;
    let mut interner = Interner::default();
    let (rows, rejects, total) = read_rows(path, &mut rdr, 5, |r| {
        let user_id = interner.get(parse_id(&r[0], "user_id")?);
        let timestamp: Timestamp = r[1].parse()?;
        let route_id = parse_opt_id(&r[2]).map(|id| interner.get(id));
        let vehicle_id = parse_opt_id(&r[3]).map(|id| interner.get(id));
        let terminal_id = parse_opt_id(&r[4]).map(|id| interner.get(id));
        if vehicle_id.is_some() == terminal_id.is_some() {
            return Err("exactly one of vehicle_id and terminal_id must be present".into());
        }
        Ok(Validation {
            user_id,
            timestamp,
            route_id,
            vehicle_id,
            terminal_id,
        })
    })?;
    let loaded = Loaded {
        records: rows.into_iter().map(|(_, v)| v).collect(),
        rejects,
        total_rows: total,
    };
    enforce_threshold(path, loaded, opts)
}

/// Shares one allocation per distinct identifier.
#[derive(Default)]
struct Interner(HashSet<Id>);

impl Interner {
    fn get(&mut self, id: Id) -> Id {
        if let Some(existing) = self.0.get(&id) {
            return existing.clone();
        }
        self.0.insert(id.clone());
        id
    }
}

/// The five datasets of one analysis, with rejects per dataset.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bundle {
    pub stops: Vec<Stop>,
    pub routes: Vec<RouteDef>,
    pub terminals: Vec<Terminal>,
    pub pings: Vec<GpsPing>,
    pub validations: Vec<Validation>,
    pub rejects: BTreeMap<DatasetKind, Vec<RejectedRow>>,
}

/// Loads the five datasets from `dir` concurrently and checks cross-dataset
/// references (itinerary and terminal stops must be known stops).
pub fn load_bundle(dir: &Path, opts: &LoadOptions) -> Result<Bundle, IngestError> {
    let p = |k: DatasetKind| dir.join(k.file_name());
    let (stops, routes, terminals, pings, validations) = std::thread::scope(|s| {
        let stops = s.spawn(|| load_stops(&p(DatasetKind::Stops), opts));
        let routes = s.spawn(|| load_routes(&p(DatasetKind::Routes), opts));
        let terminals = s.spawn(|| load_terminals(&p(DatasetKind::Terminals), opts));
        let pings = s.spawn(|| load_pings(&p(DatasetKind::Pings), opts));
        let validations = s.spawn(|| load_validations(&p(DatasetKind::Validations), opts));
        (
            stops.join().expect("stops loader panicked"),
            routes.join().expect("routes loader panicked"),
            terminals.join().expect("terminals loader panicked"),
            pings.join().expect("pings loader panicked"),
            validations.join().expect("validations loader panicked"),
        )
    });
    let (stops, routes, terminals, pings, validations) = (stops?, routes?, terminals?, pings?, validations?);

    let known: HashSet<&str> = stops.records.iter().map(|s| &*s.stop_id).collect();
    let mut rejects = BTreeMap::new();

    let mut route_rejects = routes.rejects;
    let mut kept_routes = Vec::with_capacity(routes.records.len());
    for r in routes.records {
        match r.itinerary.iter().find(|s| !known.contains(&***s)) {
            Some(missing) => route_rejects.push(RejectedRow {
                line: 0,
                reason: format!("route {}: unknown stop {missing}", r.route_id),
            }),
            None => kept_routes.push(r),
        }
    }
    let mut terminal_rejects = terminals.rejects;
    let mut kept_terminals = Vec::with_capacity(terminals.records.len());
    for t in terminals.records {
        if known.contains(&*t.stop_id) {
            kept_terminals.push(t);
        } else {
            terminal_rejects.push(RejectedRow {
                line: 0,
                reason: format!("terminal {}: unknown stop {}", t.terminal_id, t.stop_id),
            });
        }
    }

    rejects.insert(DatasetKind::Stops, stops.rejects);
    rejects.insert(DatasetKind::Routes, route_rejects);
    rejects.insert(DatasetKind::Terminals, terminal_rejects);
    rejects.insert(DatasetKind::Pings, pings.rejects);
    rejects.insert(DatasetKind::Validations, validations.rejects);

    Ok(Bundle {
        stops: stops.records,
        routes: kept_routes,
        terminals: kept_terminals,
        pings: pings.records,
        validations: validations.records,
        rejects,
    })
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn io_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

fn opt(id: &Option<Id>) -> &str {
    id.as_deref().unwrap_or("")
}

pub fn write_stops<W: Write>(w: W, stops: &[Stop]) -> io::Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(STOPS_HEADER).map_err(io_err)?;
    for s in stops {
        wr.write_record([
            &*s.stop_id,
            &s.lat.to_string(),
            &s.lon.to_string(),
            if s.is_terminal { "true" } else { "false" },
        ])
        .map_err(io_err)?;
    }
    wr.flush()
}

pub fn write_routes<W: Write>(w: W, routes: &[RouteDef]) -> io::Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(ROUTES_HEADER).map_err(io_err)?;
    for r in routes {
        for (seq, stop) in r.itinerary.iter().enumerate() {
            wr.write_record([&*r.route_id, r.direction.as_str(), &seq.to_string(), stop])
                .map_err(io_err)?;
        }
    }
    wr.flush()
}

pub fn write_terminals<W: Write>(w: W, terminals: &[Terminal]) -> io::Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(TERMINALS_HEADER).map_err(io_err)?;
    for t in terminals {
        wr.write_record([&*t.terminal_id, &*t.stop_id]).map_err(io_err)?;
    }
    wr.flush()
}

pub fn write_pings<W: Write>(w: W, pings: &[GpsPing]) -> io::Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(PINGS_HEADER).map_err(io_err)?;
    for p in pings {
        wr.write_record([
            &*p.vehicle_id,
            &*p.route_id,
            &p.timestamp.to_iso8601(),
            &p.lat.to_string(),
            &p.lon.to_string(),
        ])
        .map_err(io_err)?;
    }
    wr.flush()
}

pub fn write_validations<W: Write>(w: W, validations: &[Validation]) -> io::Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(VALIDATIONS_HEADER).map_err(io_err)?;
    for v in validations {
        wr.write_record([
            &*v.user_id,
            &v.timestamp.to_iso8601(),
            opt(&v.route_id),
            opt(&v.vehicle_id),
            opt(&v.terminal_id),
        ])
        .map_err(io_err)?;
    }
    wr.flush()
}

fn create(path: PathBuf) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::with_capacity(1 << 20, File::create(path)?))
}

/// Writes the five datasets into `dir` using the canonical file names.
pub fn write_bundle(dir: &Path, bundle: &Bundle) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    write_stops(create(dir.join(DatasetKind::Stops.file_name()))?, &bundle.stops)?;
    write_routes(create(dir.join(DatasetKind::Routes.file_name()))?, &bundle.routes)?;
    write_terminals(create(dir.join(DatasetKind::Terminals.file_name()))?, &bundle.terminals)?;
    write_pings(create(dir.join(DatasetKind::Pings.file_name()))?, &bundle.pings)?;
    write_validations(create(dir.join(DatasetKind::Validations.file_name()))?, &bundle.validations)?;
    Ok(())
}
