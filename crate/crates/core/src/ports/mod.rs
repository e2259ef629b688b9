//! Port calls, the directed port-connection graph and ego networks.
//!
//! An edge `src -> dst` collects the journeys that arrived at `dst` with
//! `src` as previous port; its visit count is the number of journeys.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{centroid, great_circle_nmi, LatLon};
use crate::tracks::{Activity, LabeledTrack};

pub mod sim;

pub use sim::{linear_fit, simulate, PeriodCnm, PeriodPv, Scenario, SimError, SimOutput};

#[derive(Debug, Error)]
pub enum PortError {
    #[error("unknown port {0:?}")]
    UnknownPort(String),
    #[error("invalid port {id:?}: {msg}")]
    InvalidPort { id: String, msg: String },
    #[error("duplicate port id {0:?}")]
    DuplicatePort(String),
    #[error("ports csv: {0}")]
    Csv(#[from] csv::Error),
}

fn default_radius() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Port {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub country: String,
    pub lat: f64,
    pub lon: f64,
    #[serde(default = "default_radius")]
    pub radius_nmi: f64,
}

impl Port {
    pub fn location(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }

    pub fn validate(&self) -> Result<(), PortError> {
        let bad = |msg: &str| Err(PortError::InvalidPort { id: self.id.clone(), msg: msg.to_string() });
        if self.id.is_empty() {
            return bad("empty id");
        }
        if !self.location().is_valid() {
            return bad("location out of range");
        }
        if !(self.radius_nmi > 0.0 && self.radius_nmi.is_finite()) {
            return bad("radius must be positive");
        }
        Ok(())
    }
}

/// Read and validate a ports CSV (`id,name,country,lat,lon,radius_nmi`).
pub fn read_ports<R: Read>(input: R) -> Result<Vec<Port>, PortError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut ports = Vec::new();
    let mut seen = BTreeSet::new();
    for row in rdr.deserialize::<Port>() {
        let port = row?;
        port.validate()?;
        if !seen.insert(port.id.clone()) {
            return Err(PortError::DuplicatePort(port.id));
        }
        ports.push(port);
    }
    Ok(ports)
}

pub fn write_ports<W: Write>(ports: &[Port], out: W) -> Result<(), PortError> {
    let mut w = csv::Writer::from_writer(out);
    for p in ports {
        w.serialize(p)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Nearest port whose disk contains `p`; ties go to the smaller id.
pub fn nearest_port(ports: &[Port], p: LatLon) -> Option<&Port> {
    ports
        .iter()
        .map(|port| (great_circle_nmi(port.location(), p), port))
        .filter(|(d, port)| *d <= port.radius_nmi)
        .min_by(|(da, a), (db, b)| da.total_cmp(db).then_with(|| a.id.cmp(&b.id)))
        .map(|(_, port)| port)
}

/// One port call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub mmsi: u32,
    pub port: String,
    pub arrival: i64,
    pub departure: i64,
    pub previous_port: Option<String>,
    /// Length navigated since leaving the previous port.
    pub distance_nmi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitConfig {
    pub min_dwell_s: i64,
}

impl Default for VisitConfig {
    fn default() -> Self {
        Self { min_dwell_s: 3600 }
    }
}

/// Port calls of every vessel, ordered by (mmsi, arrival).
///
/// A call is an idle episode lasting at least `min_dwell_s` whose fix
/// centroid lies inside a port disk. Consecutive calls at the same port are
/// merged. The journey distance is the length of all tracklets between the
/// previous departure and the arrival, or the port-to-port great circle
/// when nothing was observed in between.
pub fn detect_visits(tracks: &[LabeledTrack], ports: &[Port], cfg: &VisitConfig) -> Vec<Visit> {
    let mut by_vessel: BTreeMap<u32, Vec<&LabeledTrack>> = BTreeMap::new();
    for lt in tracks {
        by_vessel.entry(lt.track.mmsi).or_default().push(lt);
    }
    let port_by_id: BTreeMap<&str, &Port> = ports.iter().map(|p| (p.id.as_str(), p)).collect();

    let mut visits = Vec::new();
    for (mmsi, mut vessel_tracks) in by_vessel {
        vessel_tracks.sort_by_key(|lt| lt.track.start_epoch());
        let mut calls: Vec<Visit> = Vec::new();
        for lt in &vessel_tracks {
            for ep in lt.episodes.iter().filter(|e| e.status == Activity::Idle) {
                if ep.duration_s() < cfg.min_dwell_s {
                    continue;
                }
                let points: Vec<LatLon> = (ep.first_fix..=ep.last_fix).map(|i| lt.track.position_at(i)).collect();
                let Some(port) = centroid(&points).and_then(|c| nearest_port(ports, c)) else {
                    continue;
                };
                match calls.last_mut() {
                    Some(last) if last.port == port.id => last.departure = ep.end_epoch,
                    _ => calls.push(Visit {
                        mmsi,
                        port: port.id.clone(),
                        arrival: ep.start_epoch,
                        departure: ep.end_epoch,
                        previous_port: None,
                        distance_nmi: None,
                    }),
                }
            }
        }
        for i in 1..calls.len() {
            let (prev_port, prev_departure) = (calls[i - 1].port.clone(), calls[i - 1].departure);
            let arrival = calls[i].arrival;
            let navigated: f64 = vessel_tracks
                .iter()
                .flat_map(|lt| lt.track.tracklets())
                .filter(|t| t.start_epoch >= prev_departure && t.end_epoch <= arrival)
                .map(|t| t.length_nmi)
                .sum();
            let distance = if navigated > 0.0 {
                navigated
            } else {
                great_circle_nmi(
                    port_by_id[prev_port.as_str()].location(),
                    port_by_id[calls[i].port.as_str()].location(),
                )
            };
            calls[i].previous_port = Some(prev_port);
            calls[i].distance_nmi = Some(distance);
        }
        visits.extend(calls);
    }
    visits
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    /// Per-journey navigated distances.
    pub distances: Vec<f64>,
}

impl Edge {
    pub fn visits(&self) -> u64 {
        self.distances.len() as u64
    }

    pub fn total_nmi(&self) -> f64 {
        self.distances.iter().sum()
    }

    pub fn mean_distance_nmi(&self) -> f64 {
        if self.distances.is_empty() {
            0.0
        } else {
            self.total_nmi() / self.distances.len() as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PortGraph {
    pub ports: BTreeMap<String, Port>,
    /// Keyed by (src, dst) = (previous port, visited port).
    pub edges: BTreeMap<(String, String), Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub src: String,
    pub dst: String,
    pub visits: u64,
    pub mean_distance_nmi: f64,
}

impl PortGraph {
    pub fn new(ports: impl IntoIterator<Item = Port>) -> Self {
        Self { ports: ports.into_iter().map(|p| (p.id.clone(), p)).collect(), edges: BTreeMap::new() }
    }

    pub fn add_journey(&mut self, src: &str, dst: &str, distance_nmi: f64) {
        self.edges.entry((src.to_string(), dst.to_string())).or_default().distances.push(distance_nmi);
    }

    /// Fold visits with a previous port into edges.
    pub fn from_visits(ports: impl IntoIterator<Item = Port>, visits: &[Visit]) -> Self {
        let mut g = Self::new(ports);
        for v in visits {
            if let (Some(prev), Some(d)) = (&v.previous_port, v.distance_nmi) {
                g.add_journey(prev, &v.port, d);
            }
        }
        g
    }

    pub fn contains(&self, id: &str) -> bool {
        self.ports.contains_key(id)
    }

    pub fn total_visits(&self) -> u64 {
        self.edges.values().map(Edge::visits).sum()
    }

    pub fn out_neighbors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.keys().filter(move |(s, _)| s == id).map(|(_, d)| d.as_str())
    }

    pub fn in_neighbors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.edges.keys().filter(move |(_, d)| d == id).map(|(s, _)| s.as_str())
    }

    pub fn edge_rows(&self) -> Vec<EdgeRow> {
        self.edges
            .iter()
            .map(|((src, dst), e)| EdgeRow {
                src: src.clone(),
                dst: dst.clone(),
                visits: e.visits(),
                mean_distance_nmi: e.mean_distance_nmi(),
            })
            .collect()
    }

    /// Rebuild a graph from an edge list; each edge gets `visits` journeys
    /// of its mean distance.
    pub fn read_edges<R: Read>(ports: impl IntoIterator<Item = Port>, input: R) -> Result<Self, PortError> {
        let mut g = Self::new(ports);
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        for row in rdr.deserialize::<EdgeRow>() {
            let row = row?;
            for id in [&row.src, &row.dst] {
                if !g.contains(id) {
                    return Err(PortError::UnknownPort(id.clone()));
                }
            }
            for _ in 0..row.visits {
                g.add_journey(&row.src, &row.dst, row.mean_distance_nmi);
            }
        }
        Ok(g)
    }

    pub fn write_edges<W: Write>(&self, out: W) -> Result<(), PortError> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.edge_rows() {
            w.serialize(row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Visits to `port` summed over all previous ports.
pub fn port_visits(graph: &PortGraph, port: &str) -> Result<u64, PortError> {
    if !graph.contains(port) {
        return Err(PortError::UnknownPort(port.to_string()));
    }
    Ok(graph.edges.iter().filter(|((_, dst), _)| dst == port).map(|(_, e)| e.visits()).sum())
}

/// Navigated miles as the sum of every journey's distance.
pub fn cnm_from_graph(graph: &PortGraph) -> f64 {
    graph.edges.values().map(Edge::total_nmi).sum()
}

/// Navigated miles as Σ visits·distance, taking each edge's mean distance.
/// Agrees with [`cnm_from_graph`] when every journey on an edge has the
/// same length.
pub fn cnm_closed_form(graph: &PortGraph) -> f64 {
    graph.edges.values().map(|e| e.visits() as f64 * e.mean_distance_nmi()).sum()
}

/// Subgraph induced by the ports within `k` hops of `ego`. Hops follow
/// edge direction unless `undirected` is set.
pub fn ego_network(graph: &PortGraph, ego: &str, k: usize, undirected: bool) -> Result<PortGraph, PortError> {
    if !graph.contains(ego) {
        return Err(PortError::UnknownPort(ego.to_string()));
    }
    let mut depth: BTreeMap<&str, usize> = BTreeMap::from([(ego, 0)]);
    let mut queue = VecDeque::from([ego]);
    while let Some(node) = queue.pop_front() {
        let d = depth[node];
        if d == k {
            continue;
        }
        let mut next: Vec<&str> = graph.out_neighbors(node).collect();
        if undirected {
            next.extend(graph.in_neighbors(node));
        }
        for n in next {
            if !depth.contains_key(n) {
                depth.insert(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    let ports = graph.ports.values().filter(|p| depth.contains_key(p.id.as_str())).cloned();
    let mut sub = PortGraph::new(ports);
    sub.edges = graph
        .edges
        .iter()
        .filter(|((s, d), _)| depth.contains_key(s.as_str()) && depth.contains_key(d.as_str()))
        .map(|(k, e)| (k.clone(), e.clone()))
        .collect();
    Ok(sub)
}

pub fn write_visits<W: Write>(visits: &[Visit], out: W) -> Result<(), PortError> {
    let mut w = csv::Writer::from_writer(out);
    for v in visits {
        w.serialize(v)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
