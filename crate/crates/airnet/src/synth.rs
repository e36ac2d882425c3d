//! Seeded synthetic tracks, schedules and networks with known ground truth.
//!
//! Each OD bundle is a centerline bowed sideways by `lateral_nm * sin(πs)`
//! (s running 0..1 from origin to destination). A flight adds its own
//! Gaussian bow of `spread_nm` and small per-point jitter, so endpoints stay
//! on the airports. Outlier flights bow far outside every bundle.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{LatLon, LocalProjection};
use crate::ingest::{FlightRecord, Itinerary, TrackPoint, build_itineraries};
use crate::network::{
    Fixtures, Horizon, MultiLayerNetwork, NetworkNode, NodeKind, attach_points_to_routes, derive_enroute_demand, estimate_airport_demand,
    od_departures,
};
use crate::queue::QueueParams;
use crate::route_mining::Route;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSpec {
    pub origin: String,
    pub destination: String,
    /// Sideways bow of the centerline at mid-route, positive to the left.
    pub lateral_nm: f64,
    pub flights: usize,
    pub spread_nm: f64,
    pub speed_kn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    /// Epoch seconds of the horizon start.
    pub day_start: f64,
    pub dt: f64,
    pub m: usize,
    pub airports: Vec<(String, LatLon)>,
    pub bundles: Vec<BundleSpec>,
    /// Outlier flights per OD as (origin, destination, count).
    pub outliers: Vec<(String, String, usize)>,
    /// Scheduled departures are drawn uniformly in this window, minutes
    /// after `day_start`.
    pub dep_window: (f64, f64),
    pub sample_s: f64,
    pub jitter_nm: f64,
    /// Longest chain of flights one aircraft flies.
    pub max_chain: usize,
    pub turnaround: (f64, f64),
    /// Actual departure trails the schedule by up to this many minutes.
    pub dep_lag: f64,
    /// Reference locations whose crossing offsets go in the manifest.
    pub probes: Vec<(String, LatLon)>,
}

impl SynthSpec {
    /// Two bundles between a pair of airports 400 NM apart.
    pub fn two_bundle(seed: u64, gap_nm: f64, spread_nm: f64, per_bundle: usize, outliers: usize) -> Self {
        let bundle = |lateral| BundleSpec {
            origin: "AAA".into(),
            destination: "BBB".into(),
            lateral_nm: lateral,
            flights: per_bundle,
            spread_nm,
            speed_kn: 450.0,
        };
        SynthSpec {
            seed,
            day_start: 1_709_236_800.0,
            dt: 15.0,
            m: 96,
            airports: vec![("AAA".into(), LatLon::new(30.0, 110.0)), ("BBB".into(), LatLon::new(30.0, 117.7))],
            bundles: vec![bundle(gap_nm / 2.0), bundle(-gap_nm / 2.0)],
            outliers: vec![("AAA".into(), "BBB".into(), outliers)],
            dep_window: (60.0, 960.0),
            sample_s: 60.0,
            jitter_nm: 0.3,
            max_chain: 4,
            turnaround: (35.0, 90.0),
            dep_lag: 8.0,
            probes: vec![("P1".into(), LatLon::new(30.5, 113.85))],
        }
    }
}

impl SynthSpec {
    /// Five fixture airports with crossing flows, one or two bundles per OD.
    pub fn regional(seed: u64) -> Self {
        let mut bundles = Vec::new();
        let mut add = |o: &str, d: &str, laterals: &[f64], flights: usize| {
            for &l in laterals {
                bundles.push(BundleSpec {
                    origin: o.into(),
                    destination: d.into(),
                    lateral_nm: l,
                    flights,
                    spread_nm: 4.0,
                    speed_kn: 450.0,
                });
            }
        };
        add("PEK", "CTU", &[40.0, -40.0], 14);
        add("CTU", "PEK", &[0.0], 20);
        add("PEK", "CAN", &[35.0, -35.0], 14);
        add("CAN", "PEK", &[0.0], 20);
        add("SHA", "CTU", &[20.0], 16);
        add("CTU", "SHA", &[-20.0], 16);
        add("XIY", "SHA", &[0.0], 12);
        add("SHA", "XIY", &[0.0], 12);
        add("CAN", "CTU", &[0.0], 12);
        add("CTU", "CAN", &[0.0], 12);
        SynthSpec {
            seed,
            day_start: 1_709_236_800.0,
            dt: 15.0,
            m: 96,
            airports: vec![
                ("CAN".into(), LatLon::new(23.39, 113.30)),
                ("CTU".into(), LatLon::new(30.58, 103.95)),
                ("PEK".into(), LatLon::new(40.08, 116.59)),
                ("SHA".into(), LatLon::new(31.20, 121.34)),
                ("XIY".into(), LatLon::new(34.45, 108.75)),
            ],
            bundles,
            outliers: vec![("PEK".into(), "CTU".into(), 1), ("SHA".into(), "CTU".into(), 1)],
            dep_window: (60.0, 900.0),
            sample_s: 60.0,
            jitter_nm: 0.3,
            max_chain: 4,
            turnaround: (35.0, 90.0),
            dep_lag: 8.0,
            probes: vec![("P1".into(), LatLon::new(33.0, 110.5))],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleTruth {
    pub od: String,
    pub bundle: usize,
    pub lateral_nm: f64,
    pub flight_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeTruth {
    pub probe: String,
    pub od: String,
    pub bundle: usize,
    /// Closest distance of the centerline to the probe.
    pub distance_nm: f64,
    pub offset_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub bundle_counts: BTreeMap<String, usize>,
    pub bundles: Vec<BundleTruth>,
    pub outliers: Vec<String>,
    pub probes: Vec<ProbeTruth>,
    /// Scheduled departures plus arrivals per airport and sub-period.
    pub demand: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SynthDay {
    pub tracks: Vec<TrackPoint>,
    pub schedule: Vec<FlightRecord>,
    pub manifest: Manifest,
}

struct Geometry {
    proj: LocalProjection,
    o: (f64, f64),
    d: (f64, f64),
    normal: (f64, f64),
}

impl Geometry {
    fn new(o: LatLon, d: LatLon) -> Self {
        let proj = LocalProjection::new(LatLon::new((o.lat + d.lat) / 2.0, (o.lon + d.lon) / 2.0));
        let (o, d) = (proj.project(o), proj.project(d));
        let (dx, dy) = (d.0 - o.0, d.1 - o.1);
        let len = (dx * dx + dy * dy).sqrt();
        Geometry { proj, o, d, normal: (-dy / len, dx / len) }
    }

    fn at(&self, s: f64, bow: f64) -> (f64, f64) {
        let b = bow * (std::f64::consts::PI * s).sin();
        (self.o.0 + s * (self.d.0 - self.o.0) + b * self.normal.0, self.o.1 + s * (self.d.1 - self.o.1) + b * self.normal.1)
    }

    /// Polyline of `n` points and cumulative length.
    fn line(&self, bow: f64, n: usize) -> (Vec<(f64, f64)>, Vec<f64>) {
        let pts: Vec<(f64, f64)> = (0..n).map(|i| self.at(i as f64 / (n - 1) as f64, bow)).collect();
        let mut arc = vec![0.0];
        for w in pts.windows(2) {
            arc.push(arc.last().unwrap() + ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt());
        }
        (pts, arc)
    }
}

struct Draft {
    flight_id: String,
    od: (String, String),
    sched_dep: f64,
    sched_arr: f64,
    lag: f64,
    turn: f64,
    track: Vec<(LatLon, f64)>,
}

fn locate(spec: &SynthSpec, code: &str) -> Result<LatLon> {
    spec.airports
        .iter()
        .find(|(c, _)| c == code)
        .map(|(_, l)| *l)
        .ok_or_else(|| Error::Lookup(format!("synthetic airport {code} has no location")))
}

/// Generate tracks, schedule and manifest. The same spec always yields the
/// same bytes.
pub fn generate_day(spec: &SynthSpec) -> Result<SynthDay> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let jitter = Normal::new(0.0, spec.jitter_nm.max(0.0)).map_err(|e| Error::Param(e.to_string()))?;
    let mut drafts: Vec<Draft> = Vec::new();
    let mut manifest = Manifest {
        seed: spec.seed,
        bundle_counts: BTreeMap::new(),
        bundles: Vec::new(),
        outliers: Vec::new(),
        probes: Vec::new(),
        demand: BTreeMap::new(),
    };
    let mut serial = 0usize;
    let mut bundle_no: BTreeMap<String, usize> = BTreeMap::new();
    let mut speeds: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    for b in &spec.bundles {
        let od = format!("{}-{}", b.origin, b.destination);
        let geo = Geometry::new(locate(spec, &b.origin)?, locate(spec, &b.destination)?);
        let idx = *bundle_no.entry(od.clone()).and_modify(|n| *n += 1).or_insert(0);
        *manifest.bundle_counts.entry(od.clone()).or_insert(0) += 1;
        let e = speeds.entry(od.clone()).or_insert((b.speed_kn, b.spread_nm));
        e.1 = e.1.max(b.spread_nm);
        let spread = Normal::new(0.0, b.spread_nm.max(0.0)).map_err(|e| Error::Param(e.to_string()))?;
        let (cl, carc) = geo.line(b.lateral_nm, 801);
        for (pid, loc) in &spec.probes {
            let p = geo.proj.project(*loc);
            let (i, d) = cl
                .iter()
                .map(|q| ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt())
                .enumerate()
                .fold((0, f64::INFINITY), |a, (i, d)| if d < a.1 { (i, d) } else { a });
            manifest.probes.push(ProbeTruth {
                probe: pid.clone(),
                od: od.clone(),
                bundle: idx,
                distance_nm: d,
                offset_min: carc[i] / b.speed_kn * 60.0,
            });
        }
        let mut ids = Vec::new();
        for _ in 0..b.flights {
            serial += 1;
            let bow = b.lateral_nm + spread.sample(&mut rng);
            let id = format!("SY{serial:05}");
            drafts.push(draft(spec, &geo, &id, (&b.origin, &b.destination), bow, b.speed_kn, &jitter, &mut rng));
            ids.push(id);
        }
        manifest.bundles.push(BundleTruth { od, bundle: idx, lateral_nm: b.lateral_nm, flight_ids: ids });
    }
    for (o, d, n) in &spec.outliers {
        let od = format!("{o}-{d}");
        let geo = Geometry::new(locate(spec, o)?, locate(spec, d)?);
        let reach = spec
            .bundles
            .iter()
            .filter(|b| &b.origin == o && &b.destination == d)
            .map(|b| b.lateral_nm.abs() + 4.0 * b.spread_nm)
            .fold(0.0, f64::max);
        let speed = speeds.get(&od).map_or(450.0, |s| s.0);
        for _ in 0..*n {
            serial += 1;
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let bow = sign * (reach + rng.random_range(120.0..200.0));
            let id = format!("SY{serial:05}");
            drafts.push(draft(spec, &geo, &id, (o, d), bow, speed, &jitter, &mut rng));
            manifest.outliers.push(id);
        }
    }
    drafts.sort_by(|a, b| a.sched_dep.total_cmp(&b.sched_dep).then_with(|| a.flight_id.cmp(&b.flight_id)));
    let regs = chain(&drafts, spec.max_chain.max(1));
    let mut tracks = Vec::new();
    let mut schedule = Vec::new();
    let horizon = Horizon::new(spec.day_start, spec.dt, spec.m)?;
    for code in spec.airports.iter().map(|(c, _)| c) {
        manifest.demand.insert(code.clone(), vec![0.0; spec.m]);
    }
    for (dr, reg) in drafts.iter().zip(&regs) {
        let t0 = spec.day_start + (dr.sched_dep + dr.lag) * 60.0;
        let n = dr.track.len();
        for (i, (p, t)) in dr.track.iter().enumerate() {
            let s = i as f64 / (n - 1) as f64;
            tracks.push(TrackPoint {
                flight_id: dr.flight_id.clone(),
                timestamp: (t0 + t * 60.0).round(),
                latitude: p.lat,
                longitude: p.lon,
                altitude: (s.min(1.0 - s) * 8.0).min(1.0) * 32000.0,
                speed: 450.0,
                origin: dr.od.0.clone(),
                destination: dr.od.1.clone(),
                registration: reg.clone(),
            });
        }
        let dur = dr.track.last().unwrap().1;
        let rec = FlightRecord {
            flight_id: dr.flight_id.clone(),
            origin: dr.od.0.clone(),
            destination: dr.od.1.clone(),
            sched_dep: spec.day_start + dr.sched_dep * 60.0,
            sched_arr: spec.day_start + dr.sched_arr * 60.0,
            actual_dep: Some(t0.round()),
            actual_arr: Some((t0 + dur * 60.0).round()),
            registration: reg.clone(),
        };
        for (code, t) in [(&rec.origin, rec.sched_dep), (&rec.destination, rec.sched_arr)] {
            if let (Some(j), Some(v)) = (horizon.slot(horizon.minutes(t)), manifest.demand.get_mut(code)) {
                v[j] += 1.0;
            }
        }
        schedule.push(rec);
    }
    Ok(SynthDay { tracks, schedule, manifest })
}

#[allow(clippy::too_many_arguments)]
fn draft(
    spec: &SynthSpec,
    geo: &Geometry,
    id: &str,
    od: (&str, &str),
    bow: f64,
    speed: f64,
    jitter: &Normal<f64>,
    rng: &mut ChaCha8Rng,
) -> Draft {
    let (_, arc) = geo.line(bow, 401);
    let dur = arc.last().unwrap() / speed * 60.0;
    let n = ((dur * 60.0 / spec.sample_s).ceil() as usize + 1).max(2);
    let (pts, arc) = geo.line(bow, n);
    let track = pts
        .iter()
        .zip(&arc)
        .enumerate()
        .map(|(i, (p, a))| {
            let (jx, jy) = if i == 0 || i == n - 1 { (0.0, 0.0) } else { (jitter.sample(rng), jitter.sample(rng)) };
            (geo.proj.unproject(p.0 + jx, p.1 + jy), a / speed * 60.0)
        })
        .collect();
    let sched_dep = rng.random_range(spec.dep_window.0..spec.dep_window.1).floor();
    let lag = rng.random_range(0.0..spec.dep_lag.max(1e-9)).floor();
    let turn = rng.random_range(spec.turnaround.0..=spec.turnaround.1).round();
    Draft {
        flight_id: id.to_string(),
        od: (od.0.to_string(), od.1.to_string()),
        sched_dep,
        sched_arr: sched_dep + (dur + spec.dep_lag).ceil(),
        lag,
        turn,
        track,
    }
}

/// Greedy tail assignment in departure order: reuse the aircraft waiting at
/// the origin that became ready first, else start a new one.
fn chain(drafts: &[Draft], max_chain: usize) -> Vec<String> {
    struct Tail {
        at: String,
        ready: f64,
        legs: usize,
    }
    let mut tails: Vec<Tail> = Vec::new();
    let mut out = Vec::with_capacity(drafts.len());
    for d in drafts {
        let pick = tails
            .iter()
            .enumerate()
            .filter(|(_, t)| t.at == d.od.0 && t.ready <= d.sched_dep && t.legs < max_chain)
            .min_by(|a, b| a.1.ready.total_cmp(&b.1.ready).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i);
        let i = pick.unwrap_or_else(|| {
            tails.push(Tail { at: String::new(), ready: 0.0, legs: 0 });
            tails.len() - 1
        });
        tails[i] = Tail { at: d.od.1.clone(), ready: d.sched_arr + d.turn, legs: tails[i].legs + 1 };
        out.push(format!("B-{:04}", i + 1));
    }
    out
}

pub fn tracks_csv(points: &[TrackPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["flight_id", "timestamp", "lat", "lon", "alt", "speed", "origin", "destination", "registration"])?;
    for p in points {
        w.write_record([
            p.flight_id.clone(),
            format!("{:.0}", p.timestamp),
            format!("{:.6}", p.latitude),
            format!("{:.6}", p.longitude),
            format!("{:.0}", p.altitude),
            format!("{:.0}", p.speed),
            p.origin.clone(),
            p.destination.clone(),
            p.registration.clone(),
        ])?;
    }
    finish(w)
}

pub fn schedule_csv(records: &[FlightRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["flight_id", "origin", "destination", "sched_dep", "sched_arr", "actual_dep", "actual_arr", "registration"])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.0}"));
    for r in records {
        w.write_record([
            r.flight_id.clone(),
            r.origin.clone(),
            r.destination.clone(),
            format!("{:.0}", r.sched_dep),
            format!("{:.0}", r.sched_arr),
            opt(r.actual_dep),
            opt(r.actual_arr),
            r.registration.clone(),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkDaySpec {
    pub seed: u64,
    pub flights: usize,
    pub points: usize,
    pub n: usize,
}

impl Default for NetworkDaySpec {
    fn default() -> Self {
        NetworkDaySpec { seed: 7, flights: 5000, points: 30, n: 120 }
    }
}

/// A ready-built network and schedule at national scale: the 56 fixture
/// airports scattered over a 25°×25° box, up to two routes per OD, fixture
/// service parameters and `points` congestion points placed on busy routes.
/// Aircraft fly chains with traffic drawn in proportion to airport capacity.
pub fn generate_network_day(spec: &NetworkDaySpec) -> Result<(MultiLayerNetwork, Vec<Itinerary>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fx = Fixtures::bundled();
    let horizon = Horizon::new(0.0, 15.0, 96)?;
    let codes: Vec<String> = fx.airports.keys().cloned().collect();
    let locs: Vec<LatLon> = codes.iter().map(|_| LatLon::new(rng.random_range(20.0..45.0), rng.random_range(100.0..125.0))).collect();
    let weight: Vec<f64> = codes.iter().map(|c| fx.airports[c].0).collect();
    let wsum: f64 = weight.iter().sum();
    let pick = |rng: &mut ChaCha8Rng, skip: Option<usize>| -> usize {
        loop {
            let mut u = rng.random_range(0.0..wsum);
            let mut i = 0;
            while i + 1 < weight.len() && u >= weight[i] {
                u -= weight[i];
                i += 1;
            }
            if Some(i) != skip {
                return i;
            }
        }
    };
    let mut routes: BTreeMap<(usize, usize), Vec<Route>> = BTreeMap::new();
    let mut flights = Vec::with_capacity(spec.flights);
    let mut tail = 0;
    while flights.len() < spec.flights {
        tail += 1;
        let reg = format!("B-{tail:04}");
        let mut at = pick(&mut rng, None);
        let mut t = rng.random_range(0.0..180.0f64).floor();
        let legs = rng.random_range(2..=6);
        for _ in 0..legs {
            if flights.len() >= spec.flights || t > 18.0 * 60.0 {
                break;
            }
            let to = pick(&mut rng, Some(at));
            let rs = routes.entry((at, to)).or_insert_with(|| od_routes(&codes, &locs, at, to, &mut rng));
            let dur = rs[0].centroid_minutes.last().unwrap().ceil() + 10.0;
            flights.push(FlightRecord {
                flight_id: format!("N{:05}", flights.len() + 1),
                origin: codes[at].clone(),
                destination: codes[to].clone(),
                sched_dep: t * 60.0,
                sched_arr: (t + dur) * 60.0,
                actual_dep: None,
                actual_arr: None,
                registration: reg.clone(),
            });
            t += dur + rng.random_range(35.0..90.0f64).round();
            at = to;
        }
    }
    let mut used: Vec<(&(usize, usize), usize)> =
        routes.keys().map(|k| (k, flights.iter().filter(|f| f.origin == codes[k.0] && f.destination == codes[k.1]).count())).collect();
    used.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let all_routes: Vec<Route> = routes.values().flatten().cloned().collect();
    let mut points = Vec::new();
    for (i, (k, _)) in used.iter().take(spec.points).enumerate() {
        let r = &routes[k][0];
        let v = rng.random_range(8..r.centroid.len() - 8);
        let c = r.centroid[v];
        points.push(crate::congestion::CongestionPoint {
            point_id: format!("P{}", i + 1),
            member_grids: Vec::new(),
            centroid: LatLon::new(c.lat + rng.random_range(-0.05..0.05), c.lon + rng.random_range(-0.05..0.05)),
            radius: 0.0,
        });
    }
    let crossings = attach_points_to_routes(&all_routes, &points, 8.0)?;
    let node = |id: &str, kind, loc, (mu, k): (f64, u32)| -> Result<NetworkNode> {
        Ok(NetworkNode { node_id: id.to_string(), kind, location: loc, params: QueueParams::new(k, mu, spec.n)?, demand: horizon.zeros() })
    };
    let airports = codes
        .iter()
        .zip(&locs)
        .map(|(c, l)| {
            let mut n = node(c, NodeKind::Airport, Some(*l), fx.airports[c])?;
            n.demand = estimate_airport_demand(&flights, c, &horizon);
            Ok(n)
        })
        .collect::<Result<Vec<_>>>()?;
    let temp = points.iter().map(|p| node(&p.point_id, NodeKind::EnRoute, None, (1.0, 1))).collect::<Result<Vec<_>>>()?;
    let mut net = MultiLayerNetwork { horizon, airports, points: temp, routes: all_routes, crossings };
    let (demand, _) = derive_enroute_demand(&net, &od_departures(&flights, &horizon));
    // Busiest points take the largest published service rates.
    let mut by_load: Vec<usize> = (0..points.len()).collect();
    by_load.sort_by(|&a, &b| demand[&points[b].point_id].total().total_cmp(&demand[&points[a].point_id].total()).then(a.cmp(&b)));
    let mut by_rate: Vec<(u32, (f64, u32))> = fx.enroute.iter().map(|(i, p)| (*i, *p)).collect();
    by_rate.sort_by(|a, b| b.1.0.total_cmp(&a.1.0).then(a.0.cmp(&b.0)));
    let mut rename = BTreeMap::new();
    let mut pts = Vec::new();
    for (rank, &pi) in by_load.iter().enumerate() {
        let (idx, par) = by_rate[rank % by_rate.len()];
        let id = if rank < by_rate.len() { format!("E{idx}") } else { format!("E{}", rank + 1) };
        let mut n = node(&id, NodeKind::EnRoute, Some(points[pi].centroid), par)?;
        n.demand = demand[&points[pi].point_id].clone();
        rename.insert(points[pi].point_id.clone(), id);
        pts.push(n);
    }
    pts.sort_by(|a, b| a.node_id.len().cmp(&b.node_id.len()).then_with(|| a.node_id.cmp(&b.node_id)));
    for c in &mut net.crossings {
        c.point_id = rename[&c.point_id].clone();
    }
    net.points = pts;
    net.validate()?;
    Ok((net, build_itineraries(&flights)?))
}

fn od_routes(codes: &[String], locs: &[LatLon], a: usize, b: usize, rng: &mut ChaCha8Rng) -> Vec<Route> {
    let geo = Geometry::new(locs[a], locs[b]);
    let two = rng.random_bool(0.3);
    let base = rng.random_range(-20.0..20.0);
    let bows: Vec<(f64, f64)> = if two { vec![(base, 0.6), (base + 45.0, 0.4)] } else { vec![(base, 1.0)] };
    bows.iter()
        .enumerate()
        .map(|(i, &(bow, p))| {
            let (pts, arc) = geo.line(bow, 24);
            Route {
                route_id: format!("{}-{}-{i}", codes[a], codes[b]),
                od_pair: (codes[a].clone(), codes[b].clone()),
                centroid: pts.iter().map(|q| geo.proj.unproject(q.0, q.1)).collect(),
                centroid_minutes: arc.iter().map(|s| s / 450.0 * 60.0).collect(),
                usage_prob: p,
                member_count: 0,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_bytes() {
        let s = SynthSpec::two_bundle(3, 80.0, 5.0, 6, 1);
        let (a, b) = (generate_day(&s).unwrap(), generate_day(&s).unwrap());
        assert_eq!(tracks_csv(&a.tracks).unwrap(), tracks_csv(&b.tracks).unwrap());
        assert_eq!(schedule_csv(&a.schedule).unwrap(), schedule_csv(&b.schedule).unwrap());
        let c = generate_day(&SynthSpec::two_bundle(4, 80.0, 5.0, 6, 1)).unwrap();
        assert_ne!(tracks_csv(&a.tracks).unwrap(), tracks_csv(&c.tracks).unwrap());
    }

    #[test]
    fn zero_flights_gives_header_only_files() {
        let d = generate_day(&SynthSpec::two_bundle(1, 80.0, 5.0, 0, 0)).unwrap();
        assert!(d.tracks.is_empty() && d.schedule.is_empty());
        assert_eq!(schedule_csv(&d.schedule).unwrap().lines().count(), 1);
        assert_eq!(d.manifest.bundle_counts["AAA-BBB"], 2);
    }

    #[test]
    fn schedule_brackets_tracks() {
        let d = generate_day(&SynthSpec::two_bundle(9, 80.0, 5.0, 5, 2)).unwrap();
        assert_eq!(d.schedule.len(), 12);
        for f in &d.schedule {
            let pts: Vec<_> = d.tracks.iter().filter(|p| p.flight_id == f.flight_id).collect();
            assert!(pts.first().unwrap().timestamp >= f.sched_dep);
            assert!(pts.last().unwrap().timestamp <= f.sched_arr + 60.0);
        }
    }
}
