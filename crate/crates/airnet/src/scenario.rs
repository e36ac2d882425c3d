//! What-if capacity edits and their delay deltas.
//!
//! Edits never touch the input network; each returns an edited copy.
//! Deltas are baseline minus scenario, so a positive value is a reduction.
//!
//! Scenario files are line oriented:
//!
//! ```text
//! # comment
//! scenario ctu-third-runway
//! runway CTU 2            # airport, existing runway count
//! enroute-scale E3 1.2    # point id or * for all points
//! eliminate-for PEK       # unconstrain points on PEK routes
//! rank PEK:3 CAN:2 CTU    # cumulative ranking; runway count defaults to 1
//! ```

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Itinerary;
use crate::network::MultiLayerNetwork;
use crate::simulation::{DelayReport, NetworkSummary, SimOptions, SimOutput, flights_touching, simulate_day, summarize};

/// Capacity multiplier standing in for an unconstrained point.
pub const ELIMINATION_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Edit {
    RunwayAddition {
        airport: String,
        existing: u32,
    },
    /// `point` of `None` scales every point.
    EnrouteScale {
        point: Option<String>,
        factor: f64,
    },
    EliminateFor {
        airport: String,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub edits: Vec<Edit>,
}

impl ScenarioSpec {
    /// Airports named by the edits, for subset reporting.
    pub fn airports(&self) -> Vec<String> {
        let mut s = BTreeSet::new();
        for e in &self.edits {
            match e {
                Edit::RunwayAddition { airport, .. } | Edit::EliminateFor { airport } => {
                    s.insert(airport.clone());
                }
                Edit::EnrouteScale { .. } => {}
            }
        }
        s.into_iter().collect()
    }
}

/// Parsed scenario file: named scenarios plus an optional ranking request.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioFile {
    pub scenarios: Vec<ScenarioSpec>,
    pub rank: Vec<(String, u32)>,
}

pub fn parse_scenarios(text: &str) -> Result<ScenarioFile> {
    let mut out = ScenarioFile::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::Format(format!("scenario line {}: {m}", i + 1));
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s}")));
        let edit = match (f[0], f.len()) {
            ("scenario", 2) => {
                out.scenarios.push(ScenarioSpec { id: f[1].to_string(), edits: Vec::new() });
                continue;
            }
            ("rank", n) if n >= 2 => {
                for c in &f[1..] {
                    let (code, n) = match c.split_once(':') {
                        Some((code, n)) => (code, n.parse::<u32>().map_err(|_| bad(&format!("bad runway count in {c}")))?),
                        None => (*c, 1),
                    };
                    out.rank.push((code.to_string(), n));
                }
                continue;
            }
            ("runway", 3) => {
                let n = f[2].parse::<u32>().map_err(|_| bad("runway count must be a positive integer"))?;
                Edit::RunwayAddition { airport: f[1].to_string(), existing: n }
            }
            ("enroute-scale", 3) => Edit::EnrouteScale { point: (f[1] != "*").then(|| f[1].to_string()), factor: num(f[2])? },
            ("eliminate-for", 2) => Edit::EliminateFor { airport: f[1].to_string() },
            _ => return Err(bad(&format!("unrecognised directive '{line}'"))),
        };
        match out.scenarios.last_mut() {
            Some(s) => s.edits.push(edit),
            None => return Err(bad("edit before any 'scenario' line")),
        }
    }
    Ok(out)
}

/// One more runway on top of `n` existing ones: μ·(n+1)/n.
pub fn apply_runway_addition(net: &MultiLayerNetwork, airport: &str, n: u32) -> Result<MultiLayerNetwork> {
    if n < 1 {
        return Err(Error::Param("existing runway count must be >= 1".into()));
    }
    let mut out = net.clone();
    let node = out.airport_mut(airport)?;
    node.params.mu = node.params.mu * (n + 1) as f64 / n as f64;
    Ok(out)
}

/// Multiply the service rate of one point, or of all when `point` is `None`.
pub fn apply_enroute_scale(net: &MultiLayerNetwork, point: Option<&str>, factor: f64) -> Result<MultiLayerNetwork> {
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::Param(format!("scale factor {factor} must be positive")));
    }
    let mut out = net.clone();
    match point {
        Some(id) => out.point_mut(id)?.params.mu *= factor,
        None => out.points.iter_mut().for_each(|p| p.params.mu *= factor),
    }
    Ok(out)
}

/// Points crossed by any route into or out of `airport`.
pub fn points_for_airport(net: &MultiLayerNetwork, airport: &str) -> BTreeSet<String> {
    let routes: BTreeSet<&str> =
        net.routes.iter().filter(|r| r.od_pair.0 == airport || r.od_pair.1 == airport).map(|r| r.route_id.as_str()).collect();
    net.crossings.iter().filter(|c| routes.contains(c.route_id.as_str())).map(|c| c.point_id.clone()).collect()
}

/// Scale every point on the airport's routes by [`ELIMINATION_FACTOR`]. A
/// shared point is relieved for all traffic through it.
pub fn eliminate_points_for_airport(net: &MultiLayerNetwork, airport: &str) -> Result<MultiLayerNetwork> {
    if !net.airports.iter().any(|a| a.node_id == airport) {
        return Err(Error::Lookup(format!("unknown airport {airport}")));
    }
    let targets = points_for_airport(net, airport);
    let mut out = net.clone();
    for p in out.points.iter_mut().filter(|p| targets.contains(&p.node_id)) {
        p.params.mu *= ELIMINATION_FACTOR;
    }
    Ok(out)
}

pub fn apply_spec(net: &MultiLayerNetwork, spec: &ScenarioSpec) -> Result<MultiLayerNetwork> {
    let mut cur = net.clone();
    for e in &spec.edits {
        cur = match e {
            Edit::RunwayAddition { airport, existing } => apply_runway_addition(&cur, airport, *existing)?,
            Edit::EnrouteScale { point, factor } => apply_enroute_scale(&cur, point.as_deref(), *factor)?,
            Edit::EliminateFor { airport } => eliminate_points_for_airport(&cur, airport)?,
        };
    }
    Ok(cur)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    /// Node id, `network`, or `flights:<airport>` for a flight subset.
    pub scope: String,
    pub metric: String,
    pub baseline: Option<f64>,
    pub scenario: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub id: String,
    pub baseline: DelayReport,
    pub scenario: DelayReport,
    pub rows: Vec<DeltaRow>,
    /// Service-rate changes as (node, before, after), per sub-period.
    pub capacity_changes: Vec<(String, f64, f64)>,
}

impl ScenarioResult {
    pub fn network_delta(&self) -> f64 {
        self.baseline.network.total - self.scenario.network.total
    }
}

fn row(scope: &str, metric: &str, b: Option<f64>, s: Option<f64>) -> DeltaRow {
    let delta = match (b, s) {
        (Some(b), Some(s)) => Some(b - s),
        _ => None,
    };
    DeltaRow { scope: scope.to_string(), metric: metric.to_string(), baseline: b, scenario: s, delta }
}

fn summary_rows(scope: &str, b: &NetworkSummary, s: &NetworkSummary, rows: &mut Vec<DeltaRow>) {
    rows.push(row(scope, "local", Some(b.local), Some(s.local)));
    rows.push(row(scope, "propagated", Some(b.propagated), Some(s.propagated)));
    rows.push(row(scope, "total", Some(b.total), Some(s.total)));
}

/// Compare a scenario run against a baseline run on the same inputs.
pub fn compare(
    id: &str,
    base_net: &MultiLayerNetwork,
    edited: &MultiLayerNetwork,
    base: &SimOutput,
    scen: &SimOutput,
    subsets: &[String],
) -> ScenarioResult {
    let mut rows = Vec::new();
    summary_rows("network", &base.report.network, &scen.report.network, &mut rows);
    for a in subsets {
        let b = summarize(flights_touching(&base.events, a));
        let s = summarize(flights_touching(&scen.events, a));
        summary_rows(&format!("flights:{a}"), &b, &s, &mut rows);
    }
    for (b, s) in base.report.nodes.iter().zip(&scen.report.nodes) {
        rows.push(row(&b.node_id, "local", b.local, s.local));
        rows.push(row(&b.node_id, "propagated", b.propagated, s.propagated));
        rows.push(row(&b.node_id, "total", b.total(), s.total()));
    }
    let capacity_changes = base_net
        .nodes()
        .zip(edited.nodes())
        .filter(|(a, b)| a.params.mu != b.params.mu)
        .map(|(a, b)| (a.node_id.clone(), a.params.mu, b.params.mu))
        .collect();
    ScenarioResult { id: id.to_string(), baseline: base.report.clone(), scenario: scen.report.clone(), rows, capacity_changes }
}

/// Simulate the baseline and the edited network with identical inputs.
pub fn run_scenario(net: &MultiLayerNetwork, itineraries: &[Itinerary], opts: &SimOptions, spec: &ScenarioSpec) -> Result<ScenarioResult> {
    let base = simulate_day(net, itineraries, opts)?;
    run_against(net, &base, itineraries, opts, spec)
}

/// As [`run_scenario`] with a precomputed baseline.
pub fn run_against(
    net: &MultiLayerNetwork,
    base: &SimOutput,
    itineraries: &[Itinerary],
    opts: &SimOptions,
    spec: &ScenarioSpec,
) -> Result<ScenarioResult> {
    let edited = apply_spec(net, spec)?;
    let scen = simulate_day(&edited, itineraries, opts)?;
    Ok(compare(&spec.id, net, &edited, base, &scen, &spec.airports()))
}

/// Run several scenarios against one baseline, in parallel when enabled.
pub fn run_scenarios(
    net: &MultiLayerNetwork,
    itineraries: &[Itinerary],
    opts: &SimOptions,
    specs: &[ScenarioSpec],
) -> Result<(SimOutput, Vec<ScenarioResult>)> {
    let base = simulate_day(net, itineraries, opts)?;
    #[cfg(feature = "parallel")]
    let res: Vec<Result<ScenarioResult>> = {
        use rayon::prelude::*;
        specs.par_iter().map(|s| run_against(net, &base, itineraries, opts, s)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let res: Vec<Result<ScenarioResult>> = specs.iter().map(|s| run_against(net, &base, itineraries, opts, s)).collect();
    let res = res.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((base, res))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankStep {
    pub rank: usize,
    pub airport: String,
    /// Network reduction of mean delay per flight from this airport alone.
    pub single: f64,
    /// Reduction with this and all higher-ranked expansions applied.
    pub cumulative: f64,
}

/// Rank candidates (airport, existing runways) by the reduction one added
/// runway gives alone, then add them cumulatively in that order. Ties keep
/// lexical airport order.
pub fn rank_cumulative_expansions(
    net: &MultiLayerNetwork,
    itineraries: &[Itinerary],
    opts: &SimOptions,
    candidates: &[(String, u32)],
) -> Result<Vec<RankStep>> {
    if candidates.is_empty() {
        return Err(Error::Param("ranking needs at least one candidate airport".into()));
    }
    let base = simulate_day(net, itineraries, opts)?.report.network.total;
    let single_run = |(a, n): &(String, u32)| -> Result<f64> {
        let edited = apply_runway_addition(net, a, *n)?;
        Ok(base - simulate_day(&edited, itineraries, opts)?.report.network.total)
    };
    #[cfg(feature = "parallel")]
    let singles: Vec<Result<f64>> = {
        use rayon::prelude::*;
        candidates.par_iter().map(single_run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let singles: Vec<Result<f64>> = candidates.iter().map(single_run).collect();
    let singles = singles.into_iter().collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| singles[b].total_cmp(&singles[a]).then_with(|| candidates[a].0.cmp(&candidates[b].0)));
    let mut cur = net.clone();
    let mut out = Vec::with_capacity(order.len());
    for (r, &i) in order.iter().enumerate() {
        let (a, n) = &candidates[i];
        cur = apply_runway_addition(&cur, a, *n)?;
        let cumulative = if r == 0 { singles[i] } else { base - simulate_day(&cur, itineraries, opts)?.report.network.total };
        out.push(RankStep { rank: r + 1, airport: a.clone(), single: singles[i], cumulative });
    }
    Ok(out)
}
