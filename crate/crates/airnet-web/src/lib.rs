//! Browser bindings for three small views of the model: a queue wait curve
//! against the reference integrator, a congestion heat map and two-bundle
//! route mining.
//!
//! Every export returns a JSON string; the page draws it on a canvas.

use std::cell::RefCell;

use airnet::congestion::{GridSpec, HotMode, TrafficLine, accumulate_grid_metrics, cluster_hot_grids, score_grids, select_hot_grids};
use airnet::ingest::assemble_trajectories;
use airnet::queue::{DemandProfile, QueueParams, ck_oracle, run_profile};
use airnet::route_mining::{MiningParams, Route, mine_routes};
use airnet::synth::{SynthSpec, generate_day};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
pub struct CurveView {
    pub t: Vec<f64>,
    pub engine: Vec<f64>,
    pub oracle: Vec<f64>,
    pub demand: Vec<f64>,
    pub mu: f64,
    pub max_deviation: f64,
}

/// Two-peak day of `m` quarter hours with peak load `peak`.
pub fn peak_profile(mu: f64, peak: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|h| {
            let x = h as f64 / m as f64;
            let bump = |c: f64| (-((x - c) / 0.08).powi(2)).exp();
            mu * (0.25 + (peak - 0.25).max(0.0) * bump(0.3).max(bump(0.7)))
        })
        .collect()
}

pub fn queue_curve_view(k: u32, mu: f64, peak: f64, n: usize) -> airnet::Result<CurveView> {
    let params = QueueParams::new(k, mu, n)?;
    let demand = DemandProfile::new(peak_profile(mu, peak, 48), 15.0, 0.0)?;
    let run = run_profile(&params, &demand)?;
    let ck = ck_oracle(&params, &demand, 0.05)?;
    let t: Vec<f64> = (0..=240).map(|i| demand.t_end() * i as f64 / 240.0).collect();
    let engine: Vec<f64> = t.iter().map(|&x| run.curve.wait_at(x)).collect();
    let oracle: Vec<f64> = t.iter().map(|&x| ck.curve.wait_at(x)).collect();
    let max_deviation = engine.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(CurveView { t, engine, oracle, demand: demand.rates, mu, max_deviation })
}

struct Regional {
    routes: Vec<Route>,
}

thread_local! {
    static REGIONAL: RefCell<Option<std::rc::Rc<Regional>>> = const { RefCell::new(None) };
}

fn regional() -> airnet::Result<std::rc::Rc<Regional>> {
    if let Some(r) = REGIONAL.with(|c| c.borrow().clone()) {
        return Ok(r);
    }
    let day = generate_day(&SynthSpec::regional(1))?;
    let trajectories = assemble_trajectories(&day.tracks, 10, 900.0);
    let routes = mine_routes(&trajectories, &MiningParams::default()).routes;
    let r = std::rc::Rc::new(Regional { routes });
    REGIONAL.with(|c| *c.borrow_mut() = Some(r.clone()));
    Ok(r)
}

#[derive(Serialize)]
pub struct HeatView {
    pub rows: usize,
    pub cols: usize,
    pub bounds: [f64; 4],
    /// (row, col, standardized score / Σω, hot)
    pub cells: Vec<(usize, usize, f64, bool)>,
    pub routes: Vec<Vec<(f64, f64)>>,
    pub points: Vec<(String, f64, f64, f64)>,
}

pub fn heat_map_view(omega: [f64; 3], top_n: usize, grid_nm: f64) -> airnet::Result<HeatView> {
    let reg = regional()?;
    let lines: Vec<TrafficLine> = reg.routes.iter().map(|r| TrafficLine::from_route(r, 1.0)).collect();
    let spec = GridSpec::covering(&lines, grid_nm)?;
    let (mut grids, _) = accumulate_grid_metrics(&lines, &spec);
    score_grids(&mut grids, omega);
    let hot = select_hot_grids(&grids, HotMode::TopN(top_n), omega);
    let points = if hot.is_empty() { Vec::new() } else { cluster_hot_grids(&hot, 50.0, 2)? };
    let wsum: f64 = omega.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let cells = grids
        .iter()
        .filter(|g| g.traffic_load > 0.0)
        .map(|g| (g.index.0, g.index.1, g.score / wsum, hot.iter().any(|h| h.index == g.index)))
        .collect();
    Ok(HeatView {
        rows: spec.rows,
        cols: spec.cols,
        bounds: [spec.south, spec.west, spec.north, spec.east],
        cells,
        routes: reg.routes.iter().map(|r| r.centroid.iter().map(|p| (p.lat, p.lon)).collect()).collect(),
        points: points.iter().map(|p| (p.point_id.clone(), p.centroid.lat, p.centroid.lon, p.radius)).collect(),
    })
}

type Polyline = Vec<(f64, f64)>;

#[derive(Serialize)]
pub struct MiningView {
    /// Track polylines with cluster label, `None` for noise.
    pub tracks: Vec<(Option<usize>, Polyline)>,
    pub centroids: Vec<(f64, Polyline)>,
    pub epsilon: f64,
    pub outliers: Vec<String>,
}

pub fn mining_view(seed: u64, gap_nm: f64, spread_nm: f64, outliers: usize) -> airnet::Result<MiningView> {
    let day = generate_day(&SynthSpec::two_bundle(seed, gap_nm, spread_nm, 20, outliers))?;
    let trajs = assemble_trajectories(&day.tracks, 10, 900.0);
    let res = mine_routes(&trajs, &MiningParams::default());
    let label_of =
        |id: &str| res.summaries.iter().flat_map(|s| &s.members).find(|(_, ids)| ids.iter().any(|x| x == id)).and_then(|(c, _)| *c);
    let tracks =
        trajs.iter().map(|t| (label_of(&t.flight_id), t.points.iter().step_by(4).map(|p| (p.latitude, p.longitude)).collect())).collect();
    Ok(MiningView {
        tracks,
        centroids: res.routes.iter().map(|r| (r.usage_prob, r.centroid.iter().map(|p| (p.lat, p.lon)).collect())).collect(),
        epsilon: res.summaries.first().map_or(0.0, |s| s.epsilon),
        outliers: day.manifest.outliers,
    })
}

fn to_js<T: Serialize>(r: airnet::Result<T>) -> Result<String, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn queue_curve(k: u32, mu: f64, peak: f64, n: usize) -> Result<String, JsValue> {
    to_js(queue_curve_view(k, mu, peak, n))
}

#[wasm_bindgen]
pub fn heat_map(w1: f64, w2: f64, w3: f64, top_n: usize, grid_nm: f64) -> Result<String, JsValue> {
    to_js(heat_map_view([w1, w2, w3], top_n, grid_nm))
}

#[wasm_bindgen]
pub fn mine_two_bundle(seed: u32, gap_nm: f64, spread_nm: f64, outliers: usize) -> Result<String, JsValue> {
    to_js(mining_view(seed as u64, gap_nm, spread_nm, outliers))
}
