//! One-day delay simulation over the multi-layer network.
//!
//! Every flight becomes a chain of node operations: departure at the origin,
//! one crossing per congestion point on each of its OD's routes (weighted by
//! route usage), and arrival at the destination. The day is walked sub-period
//! by sub-period. Pending operations are taken in time order (ties by flight
//! then leg); each reads its queue wait, is frozen, and pushes the unfrozen
//! remainder of its itinerary. When a push moves demand into or out of the
//! current sub-period the affected queues are recomputed before the next
//! operation is read; each recomputation counts as a pass against the
//! iteration guard. The sub-period closes when no pending operation is left
//! inside it.
//!
//! Propagation rules:
//!
//! ```text
//! departure push  = max(0, AA(f') - SA(f') + W(f') - a_buffer)
//! crossing push   = exit delay of the previous operation on the same route
//! arrival push    = max(0, Σ_r p_r * exit delay after route r - e_buffer)
//! ```
//!
//! The exit delay of an operation is its push plus its own queue wait.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{FlightRecord, Itinerary};
use crate::network::{MultiLayerNetwork, NodeKind};
use crate::queue::{Advance, Checkpoint, DemandProfile, Stepper, TERMINAL_BOUND, interpolate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Buffers {
    pub a_buffer: f64,
    pub e_buffer: f64,
}

impl Default for Buffers {
    fn default() -> Self {
        Buffers { a_buffer: 15.0, e_buffer: 10.0 }
    }
}

impl Buffers {
    pub fn new(a_buffer: f64, e_buffer: f64) -> Result<Self> {
        if !(a_buffer >= 0.0 && e_buffer >= 0.0) {
            return Err(Error::Param(format!("buffers must be non-negative, got {a_buffer}/{e_buffer}")));
        }
        Ok(Buffers { a_buffer, e_buffer })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LegKind {
    Departure,
    /// Passage of a point on the OD's route `slot`.
    Crossing {
        slot: usize,
    },
    Arrival,
}

/// One node operation of a flight. Times are minutes from the horizon start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub node: usize,
    pub kind: LegKind,
    /// Probability that the flight performs this operation.
    pub weight: f64,
    pub scheduled: f64,
    /// Adjusted minus scheduled time.
    pub delay: f64,
    /// Queue wait read at the adjusted time.
    pub wait: f64,
    pub processed: bool,
}

impl Leg {
    pub fn adjusted(&self) -> f64 {
        self.scheduled + self.delay
    }

    pub fn exit(&self) -> f64 {
        self.adjusted() + self.wait
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightEvent {
    pub flight: FlightRecord,
    /// Departure, crossings by time, arrival.
    pub legs: Vec<Leg>,
    /// Usage probability of each route of the OD, indexed by route slot.
    pub route_weights: Vec<f64>,
}

impl FlightEvent {
    pub fn processed(&self) -> bool {
        self.legs.iter().all(|l| l.processed)
    }

    pub fn departure(&self) -> &Leg {
        &self.legs[0]
    }

    pub fn arrival(&self) -> &Leg {
        self.legs.last().unwrap()
    }

    /// Delay with which the aircraft is ready at the destination.
    pub fn arrival_delay(&self) -> f64 {
        let a = self.arrival();
        a.delay + a.wait
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    pub departure_push: f64,
    pub arrival_push: f64,
    pub significant: bool,
}

/// Push rules for a flight: ground coupling to the predecessor's arrival and
/// absorption of departure plus en-route delay by the flight-time buffer.
pub fn dpa_significant(prev_arrival_delay: Option<f64>, departure_delay: f64, enroute_wait: f64, b: &Buffers) -> Propagation {
    let departure_push = prev_arrival_delay.map_or(0.0, |d| (d - b.a_buffer).max(0.0));
    let arrival_push = (departure_delay + enroute_wait - b.e_buffer).max(0.0);
    Propagation { departure_push, arrival_push, significant: departure_push > 0.0 || arrival_push > 0.0 }
}

/// A change of an operation's adjusted time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegMove {
    pub flight: usize,
    pub leg: usize,
    pub node: usize,
    pub weight: f64,
    pub from: f64,
    pub to: f64,
}

/// Recompute the pushes of every unprocessed operation of the itinerary at
/// or after `t_star`, in flight order, from the current waits. The first
/// flight keeps its own departure push. Processed operations and those
/// before `t_star` are never changed. Returns the moves made; `flight` in a
/// move is the index within `flights`.
pub fn adjust_itinerary(flights: &mut [FlightEvent], t_star: f64, buffers: &Buffers) -> Vec<LegMove> {
    let mut moves = Vec::new();
    let mut prev_arrival: Option<f64> = None;
    for (fi, ev) in flights.iter_mut().enumerate() {
        let dep_push = match prev_arrival {
            Some(d) => dpa_significant(Some(d), 0.0, 0.0, buffers).departure_push,
            None => ev.legs[0].delay,
        };
        set_delay(ev, fi, 0, dep_push, t_star, &mut moves);
        let d_out = ev.legs[0].delay + ev.legs[0].wait;
        let mut carried = vec![d_out; ev.route_weights.len()];
        let last = ev.legs.len() - 1;
        for li in 1..last {
            if let LegKind::Crossing { slot } = ev.legs[li].kind {
                set_delay(ev, fi, li, carried[slot], t_star, &mut moves);
                carried[slot] = ev.legs[li].delay + ev.legs[li].wait;
            }
        }
        let reached = if carried.is_empty() { d_out } else { ev.route_weights.iter().zip(&carried).map(|(w, c)| w * c).sum() };
        let push = (reached - buffers.e_buffer).max(0.0);
        set_delay(ev, fi, last, push, t_star, &mut moves);
        prev_arrival = Some(ev.arrival_delay());
    }
    moves
}

const TOL: f64 = 1e-9;

fn set_delay(ev: &mut FlightEvent, fi: usize, li: usize, delay: f64, t_star: f64, moves: &mut Vec<LegMove>) {
    let leg = &mut ev.legs[li];
    if leg.processed || leg.adjusted() < t_star || (leg.delay - delay).abs() <= TOL {
        return;
    }
    let from = leg.adjusted();
    leg.delay = delay;
    moves.push(LegMove { flight: fi, leg: li, node: leg.node, weight: leg.weight, from, to: leg.adjusted() });
}

/// Move each operation's mass from the sub-period of its old time to that
/// of its new time. Times past the horizon count in the last sub-period.
/// Returns the nodes whose mass in sub-period `h` changed.
pub fn update_demand(profiles: &mut [DemandProfile], moves: &[LegMove], h: usize) -> Vec<usize> {
    let mut touched = Vec::new();
    for m in moves {
        let p = &mut profiles[m.node];
        let (a, b) = (p.index_clamped(m.from), p.index_clamped(m.to));
        if a == b {
            continue;
        }
        p.rates[a] = (p.rates[a] - m.weight).max(0.0);
        p.rates[b] += m.weight;
        if a == h || b == h {
            touched.push(m.node);
        }
    }
    touched.sort_unstable();
    touched.dedup();
    touched
}

/// Source of queue waits for the simulation loop.
pub trait WaitModel {
    /// Recompute sub-period `h` of the listed nodes with their current mass
    /// for that sub-period.
    fn refresh(&mut self, h: usize, nodes: &[usize], demand: &[DemandProfile]) -> Result<()>;
    /// Sub-period `h` is final.
    fn commit(&mut self, h: usize) -> Result<()>;
    /// Wait at `node` for an operation at time `t` within the current
    /// sub-period.
    fn wait(&self, node: usize, t: f64) -> f64;
}

/// Waits from a fixed function of (node, time), independent of demand.
pub struct FnWaits<F>(pub F);

impl<F: Fn(usize, f64) -> f64> WaitModel for FnWaits<F> {
    fn refresh(&mut self, _: usize, _: &[usize], _: &[DemandProfile]) -> Result<()> {
        Ok(())
    }
    fn commit(&mut self, _: usize) -> Result<()> {
        Ok(())
    }
    fn wait(&self, node: usize, t: f64) -> f64 {
        (self.0)(node, t)
    }
}

/// Queue-engine waits, advanced one sub-period at a time per node.
pub struct QueueWaits {
    steppers: Vec<Stepper>,
    checkpoints: Vec<Checkpoint>,
    current: Vec<Option<Advance>>,
    /// Largest terminal-state mass seen per node.
    pub max_terminal: Vec<f64>,
}

impl QueueWaits {
    pub fn new(net: &MultiLayerNetwork) -> Result<Self> {
        let steppers: Vec<Stepper> = net.nodes().map(|n| Stepper::new(n.params, net.horizon.dt, 0.0)).collect::<Result<_>>()?;
        let checkpoints = steppers.iter().map(|s| s.initial()).collect();
        let n = steppers.len();
        Ok(QueueWaits { steppers, checkpoints, current: vec![None; n], max_terminal: vec![0.0; n] })
    }
}

impl WaitModel for QueueWaits {
    fn refresh(&mut self, h: usize, nodes: &[usize], demand: &[DemandProfile]) -> Result<()> {
        let run = |i: usize| -> Result<Advance> {
            let d = &demand[i];
            let until = d.t0 + (h + 1) as f64 * d.dt;
            self.steppers[i].advance(&self.checkpoints[i], until, d.rates[h])
        };
        #[cfg(feature = "parallel")]
        let out: Vec<Result<Advance>> = {
            use rayon::prelude::*;
            nodes.par_iter().map(|&i| run(i)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let out: Vec<Result<Advance>> = nodes.iter().map(|&i| run(i)).collect();
        for (&i, a) in nodes.iter().zip(out) {
            self.current[i] = Some(a?);
        }
        Ok(())
    }

    fn commit(&mut self, _: usize) -> Result<()> {
        for (i, a) in self.current.iter_mut().enumerate() {
            if let Some(a) = a.take() {
                self.max_terminal[i] = self.max_terminal[i].max(a.max_terminal);
                self.checkpoints[i] = a.end;
            }
        }
        Ok(())
    }

    fn wait(&self, node: usize, t: f64) -> f64 {
        match &self.current[node] {
            Some(a) => interpolate(&a.samples, t).w,
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub buffers: Buffers,
    /// Passes allowed per sub-period.
    pub max_iter: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { buffers: Buffers::default(), max_iter: 50 }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub events: Vec<FlightEvent>,
    /// Flight ranges of each itinerary in `events`.
    pub itineraries: Vec<Range<usize>>,
    pub demand: Vec<DemandProfile>,
    pub passes: Vec<usize>,
    pub report: DelayReport,
    pub warnings: Vec<String>,
}

/// Build the operation chains. Itineraries keep their order; flights are
/// numbered consecutively through them.
pub fn build_events(net: &MultiLayerNetwork, itineraries: &[Itinerary]) -> Result<(Vec<FlightEvent>, Vec<Range<usize>>)> {
    let h = &net.horizon;
    let idx = net.node_index();
    let od_routes = net.od_routes();
    let per_route = net.route_crossings();
    let mut events = Vec::new();
    let mut ranges = Vec::new();
    for it in itineraries {
        let start = events.len();
        for f in &it.flights {
            let airport = |code: &str| -> Result<usize> {
                match idx.get(code) {
                    Some(&i) if i < net.airports.len() => Ok(i),
                    _ => Err(Error::Lookup(format!("flight {} uses unknown airport {code}", f.flight_id))),
                }
            };
            let (o, d) = (airport(&f.origin)?, airport(&f.destination)?);
            let sd = h.minutes(f.sched_dep);
            let sa = h.minutes(f.sched_arr);
            if h.slot(sd).is_none() {
                return Err(Error::Range(format!("flight {} departs outside the horizon", f.flight_id)));
            }
            if sa < sd {
                return Err(Error::Range(format!("flight {} arrives before it departs", f.flight_id)));
            }
            let leg = |node, kind, weight, scheduled| Leg { node, kind, weight, scheduled, delay: 0.0, wait: 0.0, processed: false };
            let mut legs = vec![leg(o, LegKind::Departure, 1.0, sd)];
            let routes = od_routes.get(&(f.origin.clone(), f.destination.clone())).cloned().unwrap_or_default();
            let mut crossings = Vec::new();
            for (slot, &ri) in routes.iter().enumerate() {
                for &ci in &per_route[ri] {
                    let c = &net.crossings[ci];
                    crossings.push(leg(idx[&c.point_id], LegKind::Crossing { slot }, net.routes[ri].usage_prob, sd + c.mean_offset));
                }
            }
            crossings.sort_by(|a, b| {
                let slot = |l: &Leg| match l.kind {
                    LegKind::Crossing { slot } => slot,
                    _ => 0,
                };
                a.scheduled.total_cmp(&b.scheduled).then(slot(a).cmp(&slot(b))).then(a.node.cmp(&b.node))
            });
            legs.extend(crossings);
            legs.push(leg(d, LegKind::Arrival, 1.0, sa));
            events.push(FlightEvent {
                flight: f.clone(),
                legs,
                route_weights: routes.iter().map(|&ri| net.routes[ri].usage_prob).collect(),
            });
        }
        ranges.push(start..events.len());
    }
    Ok((events, ranges))
}

/// Demand implied by the current operation times.
pub fn demand_from_events(net: &MultiLayerNetwork, events: &[FlightEvent]) -> Vec<DemandProfile> {
    let mut d: Vec<DemandProfile> = net.nodes().map(|_| net.horizon.zeros()).collect();
    for ev in events {
        for l in &ev.legs {
            let p = &mut d[l.node];
            let j = p.index_clamped(l.adjusted());
            p.rates[j] += l.weight;
        }
    }
    d
}

pub fn simulate_day(net: &MultiLayerNetwork, itineraries: &[Itinerary], opts: &SimOptions) -> Result<SimOutput> {
    let mut waits = QueueWaits::new(net)?;
    let mut out = simulate_day_with(net, itineraries, opts, &mut waits)?;
    for (n, &t) in net.nodes().zip(&waits.max_terminal) {
        if t > TERMINAL_BOUND {
            out.warnings.push(format!("{}: terminal state mass {t:.3e} exceeds {TERMINAL_BOUND:e}, raise N", n.node_id));
        }
    }
    Ok(out)
}

/// The day loop with an arbitrary wait source.
pub fn simulate_day_with<W: WaitModel>(
    net: &MultiLayerNetwork,
    itineraries: &[Itinerary],
    opts: &SimOptions,
    waits: &mut W,
) -> Result<SimOutput> {
    let h_count = net.horizon.m;
    let (mut events, ranges) = build_events(net, itineraries)?;
    let mut owner = vec![0usize; events.len()];
    for (i, r) in ranges.iter().enumerate() {
        for f in r.clone() {
            owner[f] = i;
        }
    }
    let mut demand = demand_from_events(net, &events);
    let all_nodes: Vec<usize> = (0..demand.len()).collect();
    let mut warnings = Vec::new();
    let mut passes = Vec::with_capacity(h_count);
    let end = net.horizon.end();
    let period = |t: f64| ((t / net.horizon.dt).floor().max(0.0) as usize).min(h_count - 1);
    // Times are never negative, so the bit pattern orders like the value.
    let key = |ev: &[FlightEvent], f: usize, l: usize| ((ev[f].legs[l].adjusted() + 0.0).to_bits(), f, l);
    let mut pending: BTreeSet<(u64, usize, usize)> = BTreeSet::new();
    for (f, e) in events.iter().enumerate() {
        for l in 0..e.legs.len() {
            pending.insert(key(&events, f, l));
        }
    }

    for h in 0..h_count {
        waits.refresh(h, &all_nodes, &demand)?;
        let mut pass = 1;
        while let Some(&(bits, f, l)) = pending.first() {
            let t = f64::from_bits(bits);
            if period(t) > h {
                break;
            }
            pending.pop_first();
            let leg = &mut events[f].legs[l];
            leg.wait = waits.wait(leg.node, t).max(0.0);
            leg.processed = true;
            let r = ranges[owner[f]].clone();
            let base = r.start;
            let mut moves = adjust_itinerary(&mut events[r], t, &opts.buffers);
            if moves.is_empty() {
                continue;
            }
            for m in &mut moves {
                m.flight += base;
                pending.remove(&((m.from + 0.0).to_bits(), m.flight, m.leg));
                pending.insert(key(&events, m.flight, m.leg));
            }
            let touched = update_demand(&mut demand, &moves, h);
            if !touched.is_empty() {
                pass += 1;
                if pass > opts.max_iter {
                    let left = pending.iter().filter(|k| period(f64::from_bits(k.0)) <= h).count();
                    return Err(Error::Divergence(format!(
                        "sub-period {h} did not settle within {} passes; {left} operations pending",
                        opts.max_iter
                    )));
                }
                waits.refresh(h, &touched, &demand)?;
            }
        }
        passes.push(pass);
        waits.commit(h)?;
    }
    if !pending.is_empty() {
        return Err(Error::Divergence(format!("{} operations left unprocessed at the horizon end", pending.len())));
    }
    let late = events.iter().flat_map(|e| &e.legs).filter(|l| l.adjusted() >= end).count();
    if late > 0 {
        warnings.push(format!("{late} operations fall after the horizon end and were served in the last sub-period"));
    }
    let report = decompose_delays(net, &events, &opts.buffers);
    Ok(SimOutput { events, itineraries: ranges, demand, passes, report, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegReport {
    pub node_id: String,
    pub kind: LegKind,
    pub weight: f64,
    pub scheduled: f64,
    pub adjusted: f64,
    pub local: f64,
    pub propagated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightReport {
    pub flight_id: String,
    pub registration: String,
    pub legs: Vec<LegReport>,
}

/// Node averages; `None` when no flight used the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub node_id: String,
    pub kind: NodeKind,
    pub local: Option<f64>,
    pub propagated: Option<f64>,
    /// Arrivals at an airport, expected crossings at a point.
    pub flights: f64,
}

impl NodeReport {
    pub fn total(&self) -> Option<f64> {
        Some(self.local? + self.propagated?)
    }
}

/// Averages over flights of the arrival queue wait (local), the adjusted
/// arrival delay AA - SA (propagated) and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub flights: usize,
    pub local: f64,
    pub propagated: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub flights: Vec<FlightReport>,
    pub nodes: Vec<NodeReport>,
    pub network: NetworkSummary,
}

pub fn summarize<'a>(events: impl IntoIterator<Item = &'a FlightEvent>) -> NetworkSummary {
    let (mut n, mut local, mut prop) = (0usize, 0.0, 0.0);
    for e in events {
        n += 1;
        local += e.arrival().wait;
        prop += e.arrival().delay;
    }
    if n == 0 {
        return NetworkSummary::default();
    }
    let (local, propagated) = (local / n as f64, prop / n as f64);
    NetworkSummary { flights: n, local, propagated, total: local + propagated }
}

/// Per-flight and per-node delay breakdown. Airports average over arriving
/// flights: local is the arrival wait, propagated is AA - SA. Points average
/// over crossings weighted by route usage: local is the mean wait less
/// `e_buffer`, floored at zero, propagated is AE - SE.
pub fn decompose_delays(net: &MultiLayerNetwork, events: &[FlightEvent], buffers: &Buffers) -> DelayReport {
    let nodes: Vec<_> = net.nodes().collect();
    let mut acc = vec![(0.0f64, 0.0f64, 0.0f64); nodes.len()];
    let mut flights = Vec::with_capacity(events.len());
    for e in events {
        let mut legs = Vec::with_capacity(e.legs.len());
        for l in &e.legs {
            match (nodes[l.node].kind, l.kind) {
                (NodeKind::Airport, LegKind::Arrival) => {
                    let a = &mut acc[l.node];
                    a.0 += 1.0;
                    a.1 += l.wait;
                    a.2 += l.delay;
                }
                (NodeKind::EnRoute, _) => {
                    let a = &mut acc[l.node];
                    a.0 += l.weight;
                    a.1 += l.weight * l.wait;
                    a.2 += l.weight * l.delay;
                }
                _ => {}
            }
            legs.push(LegReport {
                node_id: nodes[l.node].node_id.clone(),
                kind: l.kind,
                weight: l.weight,
                scheduled: l.scheduled,
                adjusted: l.adjusted(),
                local: l.wait,
                propagated: l.delay,
            });
        }
        flights.push(FlightReport { flight_id: e.flight.flight_id.clone(), registration: e.flight.registration.clone(), legs });
    }
    let nodes = nodes
        .iter()
        .zip(acc)
        .map(|(n, (c, w, d))| {
            let (local, propagated) = if c > 0.0 {
                let w = w / c;
                let w = if n.kind == NodeKind::EnRoute { (w - buffers.e_buffer).max(0.0) } else { w };
                (Some(w), Some(d / c))
            } else {
                (None, None)
            };
            NodeReport { node_id: n.node_id.clone(), kind: n.kind, local, propagated, flights: c }
        })
        .collect();
    DelayReport { flights, nodes, network: summarize(events) }
}

/// Flights grouped by the node ids they touch, for subset summaries.
pub fn flights_touching<'a>(events: &'a [FlightEvent], airport: &str) -> Vec<&'a FlightEvent> {
    events.iter().filter(|e| e.flight.origin == airport || e.flight.destination == airport).collect()
}

/// Top nodes by mean local delay, largest first, ties by id.
pub fn top_local(report: &DelayReport, n: usize) -> Vec<&NodeReport> {
    let mut v: Vec<&NodeReport> = report.nodes.iter().filter(|r| r.local.is_some()).collect();
    v.sort_by(|a, b| b.local.unwrap().total_cmp(&a.local.unwrap()).then_with(|| a.node_id.cmp(&b.node_id)));
    v.truncate(n);
    v
}

/// Count of operations per node and kind, used in summaries.
pub fn operation_counts(events: &[FlightEvent]) -> BTreeMap<usize, usize> {
    let mut m = BTreeMap::new();
    for e in events {
        for l in &e.legs {
            *m.entry(l.node).or_insert(0) += 1;
        }
    }
    m
}
