#![allow(dead_code)]

use airnet::geo::LatLon;
use airnet::ingest::{FlightRecord, Itinerary};
use airnet::network::{Horizon, MultiLayerNetwork, NetworkNode, NodeKind, RouteCrossing};
use airnet::queue::QueueParams;
use airnet::route_mining::Route;
use airnet::simulation::Buffers;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const AIRPORTS: [&str; 3] = ["AAA", "BBB", "CCC"];

fn route(id: &str, o: &str, d: &str, p: f64) -> Route {
    Route {
        route_id: id.into(),
        od_pair: (o.into(), d.into()),
        centroid: vec![LatLon::new(30.0, 110.0), LatLon::new(31.0, 112.0)],
        centroid_minutes: vec![0.0, 60.0],
        usage_prob: p,
        member_count: 10,
    }
}

/// Three airports and one point. AAA-BBB has two routes, one of them across
/// E1; BBB-CCC and BBB-AAA cross E1; the remaining ODs have no routes.
pub fn tiny_network() -> MultiLayerNetwork {
    let horizon = Horizon::new(0.0, 15.0, 96).unwrap();
    let node = |id: &str, kind, k, mu| NetworkNode {
        node_id: id.into(),
        kind,
        location: None,
        params: QueueParams::new(k, mu, 40).unwrap(),
        demand: horizon.zeros(),
    };
    let net = MultiLayerNetwork {
        horizon,
        airports: AIRPORTS.iter().map(|a| node(a, NodeKind::Airport, 1, 3.0)).collect(),
        points: vec![node("E1", NodeKind::EnRoute, 2, 2.0)],
        routes: vec![
            route("AAA-BBB-0", "AAA", "BBB", 0.5),
            route("AAA-BBB-1", "AAA", "BBB", 0.5),
            route("BBB-CCC-0", "BBB", "CCC", 1.0),
            route("BBB-AAA-0", "BBB", "AAA", 1.0),
        ],
        crossings: vec![
            RouteCrossing { route_id: "AAA-BBB-0".into(), point_id: "E1".into(), mean_offset: 20.0 },
            RouteCrossing { route_id: "BBB-CCC-0".into(), point_id: "E1".into(), mean_offset: 30.0 },
            RouteCrossing { route_id: "BBB-AAA-0".into(), point_id: "E1".into(), mean_offset: 25.0 },
        ],
    };
    net.validate().unwrap();
    net
}

/// Up to `max_flights` flights on whole-minute times, chained over at most
/// four aircraft.
pub fn random_itineraries(seed: u64, max_flights: usize) -> Vec<Itinerary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = rng.random_range(1..=max_flights);
    let aircraft = rng.random_range(1..=4usize.min(total));
    let mut its = Vec::new();
    let mut left = total;
    for a in 0..aircraft {
        let n = if a + 1 == aircraft { left } else { rng.random_range(1..=left - (aircraft - a - 1)) };
        left -= n;
        let mut at = rng.random_range(0..3usize);
        let mut t = rng.random_range(0..600u32) as f64;
        let mut flights = Vec::new();
        for i in 0..n {
            if t > 1300.0 {
                break;
            }
            let mut to = rng.random_range(0..3usize);
            while to == at {
                to = rng.random_range(0..3usize);
            }
            let dur = rng.random_range(40..120u32) as f64;
            flights.push(FlightRecord {
                flight_id: format!("F{a}{i:02}"),
                origin: AIRPORTS[at].into(),
                destination: AIRPORTS[to].into(),
                sched_dep: t * 60.0,
                sched_arr: (t + dur) * 60.0,
                actual_dep: None,
                actual_arr: None,
                registration: format!("R{a}"),
            });
            t += dur + rng.random_range(5..60u32) as f64;
            at = to;
        }
        its.push(Itinerary { registration: format!("R{a}"), flights });
    }
    its
}

/// Whole-minute waits that depend on node and time only.
pub fn step_wait(node: usize, t: f64) -> f64 {
    ((node as f64 * 3.0 + (t / 7.0).floor()) % 6.0).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpTimes {
    pub adjusted: f64,
    pub wait: f64,
}

#[derive(Clone)]
struct Op {
    node: usize,
    /// None for departure and arrival, route slot for a crossing.
    slot: Option<usize>,
    weight: f64,
    scheduled: f64,
    delay: f64,
    wait: f64,
    done: bool,
}

/// Brute-force re-scheduler: repeatedly serve the earliest open operation
/// anywhere in the network, then rebuild every open operation's delay from
/// scratch along its itinerary.
pub fn reschedule(net: &MultiLayerNetwork, its: &[Itinerary], b: &Buffers, wait: impl Fn(usize, f64) -> f64) -> Vec<Vec<OpTimes>> {
    let names: Vec<&str> = net.airports.iter().chain(&net.points).map(|n| n.node_id.as_str()).collect();
    let id = |s: &str| names.iter().position(|n| *n == s).unwrap();
    let mut flights: Vec<(Vec<Op>, Vec<f64>)> = Vec::new();
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for it in its {
        let mut chain = Vec::new();
        for f in &it.flights {
            let sd = f.sched_dep / 60.0;
            let op = |node, slot, weight, scheduled| Op { node, slot, weight, scheduled, delay: 0.0, wait: 0.0, done: false };
            let routes: Vec<&Route> = net.routes.iter().filter(|r| r.od_pair.0 == f.origin && r.od_pair.1 == f.destination).collect();
            let mut cross = Vec::new();
            for (slot, r) in routes.iter().enumerate() {
                for c in net.crossings.iter().filter(|c| c.route_id == r.route_id) {
                    cross.push(op(id(&c.point_id), Some(slot), r.usage_prob, sd + c.mean_offset));
                }
            }
            cross.sort_by(|a, b| a.scheduled.total_cmp(&b.scheduled).then(a.slot.cmp(&b.slot)).then(a.node.cmp(&b.node)));
            let mut ops = vec![op(id(&f.origin), None, 1.0, sd)];
            ops.extend(cross);
            ops.push(op(id(&f.destination), None, 1.0, f.sched_arr / 60.0));
            chain.push(flights.len());
            flights.push((ops, routes.iter().map(|r| r.usage_prob).collect()));
        }
        chains.push(chain);
    }
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (fi, (ops, _)) in flights.iter().enumerate() {
            for (li, o) in ops.iter().enumerate() {
                let t = o.scheduled + o.delay;
                if !o.done && best.is_none_or(|(bt, bf, bl)| (t, fi, li) < (bt, bf, bl)) {
                    best = Some((t, fi, li));
                }
            }
        }
        let Some((t, fi, li)) = best else { break };
        let o = &mut flights[fi].0[li];
        o.wait = wait(o.node, t).max(0.0);
        o.done = true;
        for chain in &chains {
            let mut prev_ready: Option<f64> = None;
            for &f in chain {
                let (ops, probs) = &mut flights[f];
                let set = |o: &mut Op, d: f64| {
                    if !o.done {
                        o.delay = d;
                    }
                };
                if let Some(r) = prev_ready {
                    set(&mut ops[0], (r - b.a_buffer).max(0.0));
                }
                let out = ops[0].delay + ops[0].wait;
                let mut exit = vec![out; probs.len()];
                let last = ops.len() - 1;
                for o in &mut ops[1..last] {
                    let s = o.slot.unwrap();
                    set(o, exit[s]);
                    exit[s] = o.delay + o.wait;
                }
                let reached = if probs.is_empty() { out } else { probs.iter().zip(&exit).map(|(p, e)| p * e).sum() };
                set(&mut ops[last], (reached - b.e_buffer).max(0.0));
                prev_ready = Some(ops[last].delay + ops[last].wait);
            }
        }
    }
    flights
        .into_iter()
        .map(|(ops, _)| ops.into_iter().map(|o| OpTimes { adjusted: o.scheduled + o.delay, wait: o.wait }).collect())
        .collect()
}
