//! OD demand over the community structure: intra/inter classification per day
//! class, flow matrices and rankings.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::calendar::{Calendar, DayClass};
use crate::ingest::Id;
use crate::odm::OdPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowClass {
    Intra,
    Inter,
    Unassigned,
}

/// Community per stop, for stops of the partitioned component.
pub type CommunityLookup = HashMap<Id, usize>;

pub fn classify_od(pair: &OdPair, lookup: &CommunityLookup) -> FlowClass {
    match (lookup.get(&pair.origin_stop_id), lookup.get(&pair.destination_stop_id)) {
        (Some(a), Some(b)) if a == b => FlowClass::Intra,
        (Some(_), Some(_)) => FlowClass::Inter,
        _ => FlowClass::Unassigned,
    }
}

/// OD counts by origin community (row) and destination community (column).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowMatrix {
    pub day_class: DayClass,
    pub counts: Vec<Vec<u64>>,
}

impl FlowMatrix {
    pub fn new(day_class: DayClass, size: usize) -> Self {
        FlowMatrix {
            day_class,
            counts: vec![vec![0; size]; size],
        }
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn intra_total(&self) -> u64 {
        (0..self.size()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFlow {
    pub a: usize,
    pub b: usize,
    /// counts[a][b] + counts[b][a]
    pub flow: u64,
    /// Share of all inter-community pairs.
    pub share: f64,
}

/// Unordered community pairs by symmetric flow, descending; ties by (a, b).
/// Pairs without flow are left out.
pub fn top_inter_pairs(matrix: &FlowMatrix, k: usize) -> Vec<PairFlow> {
    let n = matrix.size();
    let inter_total = matrix.total() - matrix.intra_total();
    let mut pairs = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let flow = matrix.counts[a][b] + matrix.counts[b][a];
            if flow > 0 {
                pairs.push(PairFlow {
                    a,
                    b,
                    flow,
                    share: flow as f64 / inter_total as f64,
                });
            }
        }
    }
    pairs.sort_by(|x, y| y.flow.cmp(&x.flow).then((x.a, x.b).cmp(&(y.a, y.b))));
    pairs.truncate(k);
    pairs
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityShare {
    pub community: usize,
    pub count: u64,
    pub share: f64,
}

/// Communities by intra flow, descending; ties by id.
pub fn top_intra_communities(matrix: &FlowMatrix, k: usize) -> Vec<CommunityShare> {
    let intra = matrix.intra_total();
    let mut out: Vec<CommunityShare> = (0..matrix.size())
        .filter(|&c| matrix.counts[c][c] > 0)
        .map(|c| CommunityShare {
            community: c,
            count: matrix.counts[c][c],
            share: matrix.counts[c][c] as f64 / intra as f64,
        })
        .collect();
    out.sort_by(|x, y| y.count.cmp(&x.count).then(x.community.cmp(&y.community)));
    out.truncate(k);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub day_class: DayClass,
    pub total: u64,
    pub intra: u64,
    pub inter: u64,
    pub unassigned: u64,
    /// Over assigned pairs only.
    pub pct_inter: f64,
    pub pct_intra: f64,
    pub top_intra_communities: Vec<CommunityShare>,
    pub top_inter_pairs: Vec<PairFlow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub summaries: Vec<FlowSummary>,
    pub matrices: Vec<FlowMatrix>,
    pub notes: Vec<String>,
    /// Counting unit of every figure.
    pub unit: String,
}

impl FlowReport {
    pub fn summary(&self, class: DayClass) -> Option<&FlowSummary> {
        self.summaries.iter().find(|s| s.day_class == class)
    }

    pub fn matrix(&self, class: DayClass) -> Option<&FlowMatrix> {
        self.matrices.iter().find(|m| m.day_class == class)
    }
}

/// Aggregates OD pairs by day class into matrices and summaries.
pub fn flow_summary(
    pairs: &[OdPair],
    lookup: &CommunityLookup,
    community_count: usize,
    calendar: &Calendar,
    top_k: usize,
) -> FlowReport {
    let mut matrices: BTreeMap<DayClass, FlowMatrix> = BTreeMap::new();
    let mut counts: BTreeMap<DayClass, [u64; 3]> = BTreeMap::new();
    for p in pairs {
        let class = calendar.day_class(p.day);
        let c = counts.entry(class).or_default();
        let m = matrices
            .entry(class)
            .or_insert_with(|| FlowMatrix::new(class, community_count));
        match classify_od(p, lookup) {
            FlowClass::Intra => c[0] += 1,
            FlowClass::Inter => c[1] += 1,
            FlowClass::Unassigned => {
                c[2] += 1;
                continue;
            }
        }
        m.counts[lookup[&p.origin_stop_id]][lookup[&p.destination_stop_id]] += 1;
    }

    let mut notes = Vec::new();
    let mut summaries = Vec::new();
    for class in DayClass::ALL {
        let Some(&[intra, inter, unassigned]) = counts.get(&class) else {
            notes.push(format!("no OD pairs on {class} days; class omitted"));
            continue;
        };
        let assigned = intra + inter;
        let (pct_intra, pct_inter) = if assigned == 0 {
            notes.push(format!("every {class} OD pair falls outside the partition"));
            (0.0, 0.0)
        } else {
            let pct_inter = 100.0 * inter as f64 / assigned as f64;
            (100.0 - pct_inter, pct_inter)
        };
        let m = &matrices[&class];
        summaries.push(FlowSummary {
            day_class: class,
            total: assigned + unassigned,
            intra,
            inter,
            unassigned,
            pct_inter,
            pct_intra,
            top_intra_communities: top_intra_communities(m, top_k),
            top_inter_pairs: top_inter_pairs(m, top_k),
        });
    }
    FlowReport {
        summaries,
        matrices: matrices.into_values().collect(),
        notes,
        unit: "od_pairs".into(),
    }
}

/// Long format: origin_community,destination_community,count.
pub fn write_matrix<W: Write>(w: W, m: &FlowMatrix) -> io::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["origin_community", "destination_community", "count"])
        .map_err(io::Error::other)?;
    for (a, row) in m.counts.iter().enumerate() {
        for (b, c) in row.iter().enumerate() {
            wr.write_record([a.to_string(), b.to_string(), c.to_string()])
                .map_err(io::Error::other)?;
        }
    }
    wr.flush()
}
