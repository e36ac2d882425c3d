//! Multi-layer network: airports and en-route congestion points as queue
//! nodes, linked by mined routes and their point crossings.
//!
//! Times inside the network are minutes since the horizon start; schedule
//! records carry epoch seconds and are converted through [`Horizon`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::congestion::CongestionPoint;
use crate::error::{Error, Result};
use crate::geo::{LatLon, LocalProjection, point_segment};
use crate::ingest::{FlightRecord, Trajectory};
use crate::queue::{DemandProfile, QueueParams};
use crate::route_mining::Route;

const BUNDLED_AIRPORTS: &str = include_str!("../data/airports.csv");
const BUNDLED_ENROUTE: &str = include_str!("../data/enroute.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Airport,
    EnRoute,
}

/// Simulation window: `m` sub-periods of `dt` minutes from `t0` (epoch
/// seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub t0: f64,
    pub dt: f64,
    pub m: usize,
}

impl Horizon {
    pub fn new(t0: f64, dt: f64, m: usize) -> Result<Self> {
        if !(dt > 0.0) || m == 0 {
            return Err(Error::Param(format!("horizon needs dt > 0 and m >= 1, got dt={dt}, m={m}")));
        }
        Ok(Horizon { t0, dt, m })
    }

    pub fn minutes(&self, epoch: f64) -> f64 {
        (epoch - self.t0) / 60.0
    }

    pub fn end(&self) -> f64 {
        self.m as f64 * self.dt
    }

    /// Sub-period of a time in minutes, `None` outside `[0, end)`.
    pub fn slot(&self, t: f64) -> Option<usize> {
        if t < 0.0 || t >= self.end() {
            return None;
        }
        Some(((t / self.dt).floor() as usize).min(self.m - 1))
    }

    pub fn zeros(&self) -> DemandProfile {
        DemandProfile::zeros(self.m, self.dt, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkNode {
    pub node_id: String,
    pub kind: NodeKind,
    pub location: Option<LatLon>,
    pub params: QueueParams,
    pub demand: DemandProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteCrossing {
    pub route_id: String,
    pub point_id: String,
    /// Minutes from departure to passage.
    pub mean_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLayerNetwork {
    pub horizon: Horizon,
    pub airports: Vec<NetworkNode>,
    pub points: Vec<NetworkNode>,
    pub routes: Vec<Route>,
    pub crossings: Vec<RouteCrossing>,
}

impl MultiLayerNetwork {
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeMap::new();
        for n in self.airports.iter().chain(&self.points) {
            n.params.validate()?;
            if n.demand.rates.len() != self.horizon.m {
                return Err(Error::Format(format!(
                    "node {} demand has {} periods, horizon has {}",
                    n.node_id,
                    n.demand.rates.len(),
                    self.horizon.m
                )));
            }
            if ids.insert(n.node_id.as_str(), n.kind).is_some() {
                return Err(Error::Format(format!("duplicate node id {}", n.node_id)));
            }
        }
        let mut routes = BTreeMap::new();
        for r in &self.routes {
            for a in [&r.od_pair.0, &r.od_pair.1] {
                if ids.get(a.as_str()) != Some(&NodeKind::Airport) {
                    return Err(Error::Lookup(format!("route {} references unknown airport {a}", r.route_id)));
                }
            }
            routes.insert(r.route_id.as_str(), r);
        }
        for c in &self.crossings {
            if !routes.contains_key(c.route_id.as_str()) {
                return Err(Error::Lookup(format!("crossing references unknown route {}", c.route_id)));
            }
            if ids.get(c.point_id.as_str()) != Some(&NodeKind::EnRoute) {
                return Err(Error::Lookup(format!("crossing references unknown point {}", c.point_id)));
            }
            if !(c.mean_offset >= 0.0) {
                return Err(Error::Format(format!("crossing {}/{} has negative offset", c.route_id, c.point_id)));
            }
        }
        Ok(())
    }

    /// Airports then points, the node order used by the simulation.
    pub fn nodes(&self) -> impl Iterator<Item = &NetworkNode> {
        self.airports.iter().chain(&self.points)
    }

    pub fn node_index(&self) -> BTreeMap<String, usize> {
        self.nodes().enumerate().map(|(i, n)| (n.node_id.clone(), i)).collect()
    }

    pub fn airport_mut(&mut self, code: &str) -> Result<&mut NetworkNode> {
        self.airports.iter_mut().find(|n| n.node_id == code).ok_or_else(|| Error::Lookup(format!("unknown airport {code}")))
    }

    pub fn point_mut(&mut self, id: &str) -> Result<&mut NetworkNode> {
        self.points.iter_mut().find(|n| n.node_id == id).ok_or_else(|| Error::Lookup(format!("unknown en-route point {id}")))
    }

    /// Indices into `routes` per OD pair.
    pub fn od_routes(&self) -> BTreeMap<(String, String), Vec<usize>> {
        let mut m: BTreeMap<_, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.routes.iter().enumerate() {
            m.entry(r.od_pair.clone()).or_default().push(i);
        }
        m
    }

    /// Crossings of each route as (index into `crossings`), ordered by offset.
    pub fn route_crossings(&self) -> Vec<Vec<usize>> {
        let pos: BTreeMap<&str, usize> = self.routes.iter().enumerate().map(|(i, r)| (r.route_id.as_str(), i)).collect();
        let mut out = vec![Vec::new(); self.routes.len()];
        for (ci, c) in self.crossings.iter().enumerate() {
            if let Some(&r) = pos.get(c.route_id.as_str()) {
                out[r].push(ci);
            }
        }
        for v in &mut out {
            v.sort_by(|&a, &b| {
                let (a, b) = (&self.crossings[a], &self.crossings[b]);
                a.mean_offset.total_cmp(&b.mean_offset).then_with(|| a.point_id.cmp(&b.point_id))
            });
        }
        out
    }
}

/// Attach points to the routes passing near them. A route crosses a point
/// when its centroid polyline comes within `max(corridor, radius)` NM of the
/// point centroid; the offset is the route's mean elapsed time interpolated
/// at the closest approach.
pub fn attach_points_to_routes(routes: &[Route], points: &[CongestionPoint], corridor_nm: f64) -> Result<Vec<RouteCrossing>> {
    if !(corridor_nm > 0.0) {
        return Err(Error::Param(format!("corridor {corridor_nm} must be positive")));
    }
    let mut out = Vec::new();
    for r in routes {
        let mut found = Vec::new();
        for p in points {
            let Some((d, t)) = closest_approach(&r.centroid, &r.centroid_minutes, p.centroid) else {
                continue;
            };
            if d <= corridor_nm.max(p.radius) {
                found.push(RouteCrossing { route_id: r.route_id.clone(), point_id: p.point_id.clone(), mean_offset: t.max(0.0) });
            }
        }
        found.sort_by(|a, b| a.mean_offset.total_cmp(&b.mean_offset).then_with(|| a.point_id.cmp(&b.point_id)));
        out.extend(found);
    }
    Ok(out)
}

/// Closest distance from `target` to a timed polyline and the interpolated
/// time there. The earliest vertex wins ties.
fn closest_approach(line: &[LatLon], minutes: &[f64], target: LatLon) -> Option<(f64, f64)> {
    if line.is_empty() || line.len() != minutes.len() {
        return None;
    }
    let proj = LocalProjection::new(target);
    let xy: Vec<(f64, f64)> = line.iter().map(|&q| proj.project(q)).collect();
    if xy.len() == 1 {
        let (x, y) = xy[0];
        return Some(((x * x + y * y).sqrt(), minutes[0]));
    }
    let mut best: Option<(f64, f64)> = None;
    for i in 0..xy.len() - 1 {
        let (d, s) = point_segment((0.0, 0.0), xy[i], xy[i + 1]);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, minutes[i] + s * (minutes[i + 1] - minutes[i])));
        }
    }
    best
}

/// Scheduled departures plus scheduled arrivals of `airport` per sub-period.
/// Records outside the horizon are left out.
pub fn estimate_airport_demand(schedule: &[FlightRecord], airport: &str, horizon: &Horizon) -> DemandProfile {
    let mut d = horizon.zeros();
    for f in schedule {
        if f.origin == airport
            && let Some(j) = horizon.slot(horizon.minutes(f.sched_dep))
        {
            d.rates[j] += 1.0;
        }
        if f.destination == airport
            && let Some(j) = horizon.slot(horizon.minutes(f.sched_arr))
        {
            d.rates[j] += 1.0;
        }
    }
    d
}

/// Smallest integer `v` such that at least a `coverage` fraction of the
/// observed sub-periods served `v` or fewer operations.
pub fn estimate_service_rate(counts: &[u32], coverage: f64) -> Result<u32> {
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::Param(format!("coverage {coverage} must be in (0, 1)")));
    }
    if counts.is_empty() {
        return Err(Error::InsufficientData("no throughput observations".into()));
    }
    let mut s = counts.to_vec();
    s.sort_unstable();
    let n = s.len() as f64;
    let idx = (1..=s.len()).find(|&i| i as f64 / n >= coverage).unwrap_or(s.len());
    Ok(s[idx - 1])
}

/// Bin event times (epoch seconds) into consecutive `dt`-minute periods
/// starting at `start`, covering the span up to the last event. Periods whose
/// local start hour falls in `idle` (from, to, wrapping past midnight) are
/// dropped.
pub fn observed_counts(times: &[f64], start: f64, dt: f64, idle: Option<(f64, f64)>, tz_offset_hours: f64) -> Vec<u32> {
    let bin = dt * 60.0;
    let Some(last) = times.iter().copied().filter(|&t| t >= start).reduce(f64::max) else {
        return Vec::new();
    };
    let periods = ((last - start) / bin).floor() as usize + 1;
    let mut counts = vec![0u32; periods];
    for &t in times {
        if t >= start {
            counts[((t - start) / bin).floor() as usize] += 1;
        }
    }
    match idle {
        None => counts,
        Some((from, to)) => counts
            .into_iter()
            .enumerate()
            .filter(|(j, _)| {
                let secs = start + *j as f64 * bin + tz_offset_hours * 3600.0;
                let h = secs.rem_euclid(86400.0) / 3600.0;
                let inside = if from <= to { h >= from && h < to } else { h >= from || h < to };
                !inside
            })
            .map(|(_, c)| c)
            .collect(),
    }
}

/// Scheduled departures per OD pair and sub-period.
pub fn od_departures(schedule: &[FlightRecord], horizon: &Horizon) -> BTreeMap<(String, String), Vec<f64>> {
    let mut out: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for f in schedule {
        if let Some(j) = horizon.slot(horizon.minutes(f.sched_dep)) {
            out.entry((f.origin.clone(), f.destination.clone())).or_insert_with(|| vec![0.0; horizon.m])[j] += 1.0;
        }
    }
    out
}

/// Expected crossings per point and sub-period: departures of each OD are
/// split over its routes by usage probability and shifted by the crossing
/// offset. Mass shifted past the horizon lands in the final period.
pub fn derive_enroute_demand(
    network: &MultiLayerNetwork,
    departures: &BTreeMap<(String, String), Vec<f64>>,
) -> (BTreeMap<String, DemandProfile>, Vec<String>) {
    let h = &network.horizon;
    let mut out: BTreeMap<String, DemandProfile> = network.points.iter().map(|p| (p.node_id.clone(), h.zeros())).collect();
    let mut warnings = Vec::new();
    let per_route = network.route_crossings();
    for (ri, r) in network.routes.iter().enumerate() {
        let Some(dep) = departures.get(&r.od_pair) else { continue };
        for &ci in &per_route[ri] {
            let c = &network.crossings[ci];
            let Some(prof) = out.get_mut(&c.point_id) else { continue };
            let mut spilled = 0.0;
            for (i, &n) in dep.iter().enumerate() {
                if n == 0.0 {
                    continue;
                }
                let t = i as f64 * h.dt + c.mean_offset;
                let j = match h.slot(t) {
                    Some(j) => j,
                    None => {
                        spilled += n * r.usage_prob;
                        h.m - 1
                    }
                };
                prof.rates[j] += n * r.usage_prob;
            }
            if spilled > 0.0 {
                warnings.push(format!(
                    "{} crossings of {} by {} past the horizon end moved to the last period",
                    spilled, c.point_id, r.route_id
                ));
            }
        }
    }
    (out, warnings)
}

/// Published per-node queue parameters: service rate per sub-period and
/// Erlang order.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixtures {
    pub airports: BTreeMap<String, (f64, u32)>,
    pub enroute: BTreeMap<u32, (f64, u32)>,
}

impl Fixtures {
    /// The tables shipped in `data/`.
    pub fn bundled() -> Self {
        Fixtures::parse(BUNDLED_AIRPORTS, BUNDLED_ENROUTE).expect("bundled fixture tables parse")
    }

    /// Parse `code,rate,k` and `index,rate,k` tables, each with a header.
    pub fn parse(airports: &str, enroute: &str) -> Result<Self> {
        fn rows<K: Ord>(text: &str, what: &str, key: impl Fn(&str) -> Option<K>) -> Result<BTreeMap<K, (f64, u32)>> {
            let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
            let mut out = BTreeMap::new();
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let bad = || Error::Format(format!("{what} fixture line {}: malformed row", i + 2));
                if rec.len() != 3 {
                    return Err(bad());
                }
                let k = key(&rec[0]).ok_or_else(bad)?;
                let mu: f64 = rec[1].parse().map_err(|_| bad())?;
                let order: u32 = rec[2].parse().map_err(|_| bad())?;
                if !(mu > 0.0) || order == 0 || out.insert(k, (mu, order)).is_some() {
                    return Err(bad());
                }
            }
            Ok(out)
        }
        Ok(Fixtures {
            airports: rows(airports, "airport", |s| (!s.is_empty()).then(|| s.to_string()))?,
            enroute: rows(enroute, "en-route", |s| s.parse().ok())?,
        })
    }

    pub fn airport(&self, code: &str) -> Result<(f64, u32)> {
        self.airports.get(code).copied().ok_or_else(|| Error::Lookup(format!("no fixture for airport {code}")))
    }

    pub fn enroute(&self, index: u32) -> Result<(f64, u32)> {
        self.enroute.get(&index).copied().ok_or_else(|| Error::Lookup(format!("no fixture for en-route point {index}")))
    }

    /// Fixture for a point named `E<index>`.
    pub fn point(&self, point_id: &str) -> Result<(f64, u32)> {
        let idx = point_id
            .strip_prefix('E')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Lookup(format!("point id {point_id} has no fixture index")))?;
        self.enroute(idx)
    }
}

/// Parameter-only network from fixture tables: every airport and points
/// `E1..`, no routes, zero demand.
pub fn load_fixture_network(fx: &Fixtures, horizon: Horizon, n: usize) -> Result<MultiLayerNetwork> {
    let node = |id: String, kind, (mu, k): (f64, u32)| -> Result<NetworkNode> {
        Ok(NetworkNode { node_id: id, kind, location: None, params: QueueParams::new(k, mu, n)?, demand: horizon.zeros() })
    };
    let airports = fx.airports.iter().map(|(c, &p)| node(c.clone(), NodeKind::Airport, p)).collect::<Result<_>>()?;
    let points = fx.enroute.iter().map(|(i, &p)| node(format!("E{i}"), NodeKind::EnRoute, p)).collect::<Result<_>>()?;
    Ok(MultiLayerNetwork { horizon, airports, points, routes: Vec::new(), crossings: Vec::new() })
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub horizon: Horizon,
    pub n: usize,
    pub corridor_nm: f64,
    pub coverage: f64,
    /// Erlang order for nodes whose parameters are estimated.
    pub default_k: u32,
    /// Local-hour window left out of throughput statistics.
    pub idle_window: Option<(f64, f64)>,
    pub tz_offset_hours: f64,
}

impl BuildOptions {
    pub fn new(horizon: Horizon) -> Self {
        BuildOptions { horizon, n: 120, corridor_nm: 30.0, coverage: 0.9, default_k: 2, idle_window: None, tz_offset_hours: 8.0 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BuildInputs<'a> {
    pub routes: &'a [Route],
    pub points: &'a [CongestionPoint],
    pub schedule: &'a [FlightRecord],
    /// Parameter tables; nodes they cover take the published values.
    pub fixtures: Option<&'a Fixtures>,
    /// Tracks used to measure point passage throughput.
    pub trajectories: &'a [Trajectory],
}

/// Assemble the network. Airports are every code seen in the schedule or on
/// a route. Parameters come from the fixtures when they cover a node and are
/// otherwise estimated from observed throughput over the whole schedule (or
/// track) span.
pub fn build_network(inp: BuildInputs<'_>, opts: &BuildOptions) -> Result<(MultiLayerNetwork, Vec<String>)> {
    let h = opts.horizon;
    let mut warnings = Vec::new();
    let mut codes: BTreeMap<String, Option<LatLon>> = BTreeMap::new();
    for f in inp.schedule {
        codes.entry(f.origin.clone()).or_insert(None);
        codes.entry(f.destination.clone()).or_insert(None);
    }
    for r in inp.routes {
        if let (Some(a), Some(b)) = (r.centroid.first(), r.centroid.last()) {
            codes.entry(r.od_pair.0.clone()).or_insert(None).get_or_insert(*a);
            codes.entry(r.od_pair.1.clone()).or_insert(None).get_or_insert(*b);
        }
    }
    let span_start = inp.schedule.iter().map(|f| f.sched_dep.min(f.sched_arr)).fold(h.t0, f64::min);
    let start = h.t0 - ((h.t0 - span_start) / (h.dt * 60.0)).ceil() * h.dt * 60.0;
    let mut airports = Vec::new();
    for (code, loc) in codes {
        let (mu, k) = match inp.fixtures.map(|fx| fx.airport(&code)) {
            Some(Ok(p)) => p,
            _ => {
                let mut times = Vec::new();
                for f in inp.schedule {
                    if f.origin == code {
                        times.push(f.actual_dep.unwrap_or(f.sched_dep));
                    }
                    if f.destination == code {
                        times.push(f.actual_arr.unwrap_or(f.sched_arr));
                    }
                }
                let counts = observed_counts(&times, start, h.dt, opts.idle_window, opts.tz_offset_hours);
                let v = if counts.is_empty() { 1 } else { estimate_service_rate(&counts, opts.coverage)?.max(1) };
                (v as f64, opts.default_k)
            }
        };
        airports.push(NetworkNode {
            demand: estimate_airport_demand(inp.schedule, &code, &h),
            node_id: code,
            kind: NodeKind::Airport,
            location: loc,
            params: QueueParams::new(k, mu, opts.n)?,
        });
    }
    let crossings = attach_points_to_routes(inp.routes, inp.points, opts.corridor_nm)?;
    let mut net = MultiLayerNetwork { horizon: h, airports, points: Vec::new(), routes: inp.routes.to_vec(), crossings };
    // Placeholder parameters until demand is known.
    net.points = inp
        .points
        .iter()
        .map(|p| NetworkNode {
            node_id: p.point_id.clone(),
            kind: NodeKind::EnRoute,
            location: Some(p.centroid),
            params: QueueParams { k: 1, mu: 1.0, n: opts.n },
            demand: h.zeros(),
        })
        .collect();
    let (demand, w) = derive_enroute_demand(&net, &od_departures(inp.schedule, &h));
    warnings.extend(w);
    let track_start = inp.trajectories.iter().filter_map(|t| t.points.first()).map(|p| p.timestamp).fold(f64::INFINITY, f64::min);
    for (node, cp) in net.points.iter_mut().zip(inp.points) {
        node.demand = demand[&node.node_id].clone();
        let fixed = inp.fixtures.map(|fx| fx.point(&node.node_id));
        let (mu, k) = if !inp.trajectories.is_empty() {
            let times = passage_times(inp.trajectories, cp, opts.corridor_nm);
            let counts = observed_counts(&times, track_start, h.dt, opts.idle_window, opts.tz_offset_hours);
            let v = if counts.is_empty() { 1 } else { estimate_service_rate(&counts, opts.coverage)?.max(1) };
            (v as f64, opts.default_k)
        } else if let Some(Ok(p)) = fixed {
            p
        } else {
            let counts: Vec<u32> = node.demand.rates.iter().map(|r| r.ceil() as u32).collect();
            warnings.push(format!("{}: no tracks or fixture, service rate taken from derived demand", node.node_id));
            (estimate_service_rate(&counts, opts.coverage)?.max(1) as f64, opts.default_k)
        };
        node.params = QueueParams::new(k, mu, opts.n)?;
    }
    net.validate()?;
    Ok((net, warnings))
}

/// Epoch time of closest approach for each trajectory passing within the
/// point's corridor.
pub fn passage_times(trajs: &[Trajectory], point: &CongestionPoint, corridor_nm: f64) -> Vec<f64> {
    let reach = corridor_nm.max(point.radius);
    trajs
        .iter()
        .filter_map(|t| {
            let line: Vec<LatLon> = t.points.iter().map(|p| p.position()).collect();
            let secs: Vec<f64> = t.points.iter().map(|p| p.timestamp).collect();
            let (d, ts) = closest_approach(&line, &secs, point.centroid)?;
            (d <= reach).then_some(ts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::NM_PER_DEG;

    fn route_east(id: &str, speed_kn: f64, lat: f64, len_nm: f64, verts: usize) -> Route {
        let centroid: Vec<LatLon> = (0..verts).map(|i| LatLon::new(lat, len_nm * i as f64 / (verts - 1) as f64 / NM_PER_DEG)).collect();
        let minutes = (0..verts).map(|i| len_nm * i as f64 / (verts - 1) as f64 / speed_kn * 60.0).collect();
        Route {
            route_id: id.into(),
            od_pair: ("AAA".into(), "BBB".into()),
            centroid,
            centroid_minutes: minutes,
            usage_prob: 1.0,
            member_count: 10,
        }
    }

    fn point(id: &str, at: LatLon) -> CongestionPoint {
        CongestionPoint { point_id: id.into(), member_grids: vec![(0, 0)], centroid: at, radius: 0.0 }
    }

    #[test]
    fn crossing_at_vertex_and_far_point() {
        let r = route_east("R", 480.0, 0.0, 480.0, 5);
        let pts = [point("E1", r.centroid[2]), point("E2", LatLon::new(5.0, 4.0))];
        let c = attach_points_to_routes(std::slice::from_ref(&r), &pts, 30.0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].point_id, "E1");
        assert!((c[0].mean_offset - r.centroid_minutes[2]).abs() < 1e-9);
    }

    #[test]
    fn offset_is_distance_over_speed() {
        let r = route_east("R", 480.0, 0.0, 600.0, 7);
        let p = point("E1", LatLon::new(0.1, 240.0 / NM_PER_DEG));
        let c = attach_points_to_routes(&[r], &[p], 30.0).unwrap();
        assert!((c[0].mean_offset - 30.0).abs() < 1e-6, "{}", c[0].mean_offset);
    }

    #[test]
    fn airport_demand_counts_both_directions() {
        let h = Horizon::new(0.0, 15.0, 4).unwrap();
        let f = |o: &str, d: &str, dep: f64, arr: f64| FlightRecord {
            flight_id: "F".into(),
            origin: o.into(),
            destination: d.into(),
            sched_dep: dep * 60.0,
            sched_arr: arr * 60.0,
            actual_dep: None,
            actual_arr: None,
            registration: "R".into(),
        };
        let s = vec![f("A", "B", 1.0, 50.0), f("A", "B", 2.0, 50.0), f("A", "C", 3.0, 50.0), f("B", "A", 0.0, 4.0), f("C", "A", 0.0, 15.0)];
        let d = estimate_airport_demand(&s, "A", &h);
        assert_eq!(d.rates, vec![4.0, 1.0, 0.0, 0.0]);
        assert_eq!(estimate_airport_demand(&[], "A", &h).total(), 0.0);
    }

    #[test]
    fn service_rate_quantile() {
        let mut c = vec![5; 10];
        c.push(9);
        assert_eq!(estimate_service_rate(&c, 0.9).unwrap(), 5);
        assert_eq!(estimate_service_rate(&[7; 8], 0.3).unwrap(), 7);
        assert!(estimate_service_rate(&[], 0.9).is_err());
    }

    #[test]
    fn enroute_demand_shift_and_split() {
        let h = Horizon::new(0.0, 15.0, 8).unwrap();
        let mut r = route_east("R", 480.0, 0.0, 480.0, 3);
        r.usage_prob = 0.5;
        let net = MultiLayerNetwork {
            horizon: h,
            airports: Vec::new(),
            points: vec![NetworkNode {
                node_id: "E1".into(),
                kind: NodeKind::EnRoute,
                location: None,
                params: QueueParams { k: 1, mu: 5.0, n: 10 },
                demand: h.zeros(),
            }],
            routes: vec![r],
            crossings: vec![RouteCrossing { route_id: "R".into(), point_id: "E1".into(), mean_offset: 30.0 }],
        };
        let mut deps = BTreeMap::new();
        let mut v = vec![0.0; 8];
        v[1] = 4.0;
        deps.insert(("AAA".to_string(), "BBB".to_string()), v);
        let (d, w) = derive_enroute_demand(&net, &deps);
        assert!(w.is_empty());
        assert_eq!(d["E1"].rates[3], 2.0);
        assert_eq!(d["E1"].total(), 2.0);
    }

    #[test]
    fn fixture_lookups() {
        let fx = Fixtures::bundled();
        assert_eq!(fx.airports.len(), 56);
        assert_eq!(fx.enroute.len(), 30);
        assert_eq!(fx.airport("CAN").unwrap(), (14.0, 2));
        assert_eq!(fx.enroute(1).unwrap(), (9.0, 1));
        assert!(matches!(fx.airport("ZZZ"), Err(Error::Lookup(_))));
        assert!(Fixtures::parse("code,mu,k\nAAA,x,1\n", "index,mu,k\n").is_err());
    }

    #[test]
    fn fixture_network_validates() {
        let net = load_fixture_network(&Fixtures::bundled(), Horizon::new(0.0, 15.0, 96).unwrap(), 60).unwrap();
        net.validate().unwrap();
        assert_eq!(net.points[1].node_id, "E2");
    }
}
