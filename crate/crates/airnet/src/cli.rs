//! Command-line pipeline driver.
//!
//! Each subcommand reads its inputs from the config (and the artifacts of
//! earlier steps in the output directory), runs one stage, and writes its
//! own artifacts there.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Table, num, read_artifact, write_artifact};
use crate::congestion::{
    CongestionPoint, Grid, GridSpec, HotMode, TrafficLine, accumulate_grid_metrics, cluster_hot_grids, score_grids, select_hot_grids,
};
use crate::error::{Error, Result};
use crate::ingest::{
    FlightRecord, Itinerary, ParseOptions, ScheduleColumns, TrackColumns, Trajectory, assemble_trajectories, build_itineraries,
    parse_schedule, parse_tracks,
};
use crate::network::{BuildInputs, BuildOptions, Fixtures, Horizon, MultiLayerNetwork, build_network};
use crate::route_mining::{MiningParams, OdSummary, Route, mine_routes};
use crate::scenario::{DeltaRow, RankStep, parse_scenarios, rank_cumulative_expansions, run_scenarios};
use crate::simulation::{Buffers, DelayReport, SimOptions, simulate_day, top_local};
use crate::synth::{SynthSpec, generate_day, schedule_csv, tracks_csv};

#[derive(Debug, Parser)]
#[command(name = "airnet", version, about = "Air traffic network delay pipeline")]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for artifacts; upstream artifacts are read from here too.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for synthetic data; overrides the config key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Refuse defaults for required parameters and fail on hash mismatches.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Override a config key.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic tracks/schedule/manifest set.
    Synth {
        /// `regional` or `two-bundle`.
        #[arg(long, default_value = "regional")]
        preset: String,
    },
    /// Cluster trajectories into operational routes.
    MineRoutes {
        #[arg(long)]
        tracks: Option<String>,
        /// Drop OD pairs averaging fewer flights per day.
        #[arg(long)]
        min_traffic: Option<f64>,
        #[arg(long)]
        minpt: Option<usize>,
        /// Fixed DBSCAN radius for every OD instead of the k-distance knee.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Score airspace grids and cluster hot grids into congestion points.
    FindCongestion {
        #[arg(long, conflicts_with = "threshold")]
        top_n: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        grid_nm: Option<f64>,
        /// Three comma-separated weights.
        #[arg(long)]
        omega: Option<String>,
    },
    /// Assemble the queue network from routes, points and the schedule.
    BuildNetwork {
        #[arg(long)]
        schedule: Option<String>,
        /// `bundled`, `none`, or a directory with airports.csv and enroute.csv.
        #[arg(long)]
        fixtures: Option<String>,
    },
    /// Propagate delays through one operating day.
    Simulate {
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long)]
        a_buffer: Option<f64>,
        #[arg(long)]
        e_buffer: Option<f64>,
    },
    /// Compare capacity scenarios against the baseline day.
    Scenario {
        #[arg(long)]
        file: Option<String>,
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long)]
        a_buffer: Option<f64>,
        #[arg(long)]
        e_buffer: Option<f64>,
    },
    /// Re-read a simulation artifact and print its summary.
    Report {
        #[arg(long, default_value_t = 5)]
        top: usize,
    },
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    hash: String,
    out: PathBuf,
    strict: bool,
}

impl Ctx {
    fn warn(&self, msg: impl AsRef<str>) {
        eprintln!("warning: {}", msg.as_ref());
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn read<T: for<'de> Deserialize<'de>>(&self, name: &str, kind: &str) -> Result<T> {
        let p = self.path(name);
        if !p.exists() {
            return Err(Error::Path(format!("{} not found; run the step that writes it first", p.display())));
        }
        let (body, hash) = read_artifact(&p, kind)?;
        if hash != self.hash {
            let msg = format!("{name} was written under config {hash}, current config is {}", self.hash);
            if self.strict {
                return Err(Error::Param(msg));
            }
            self.warn(msg);
        }
        Ok(body)
    }

    fn write<T: Serialize>(&self, name: &str, kind: &str, body: &T) -> Result<()> {
        write_artifact(&self.path(name), kind, &self.hash, body)
    }

    fn table(&self, name: &str, t: &Table) -> Result<()> {
        t.write(&self.path(name), &self.hash)
    }

    fn parse_opts(&self) -> Result<ParseOptions> {
        Ok(ParseOptions { tz_offset_hours: self.cfg.parse_key("tz_offset")?, ..ParseOptions::default() })
    }

    fn buffers(&self) -> Result<Buffers> {
        let get = |key: &str, dflt: f64| -> Result<f64> {
            match self.cfg.parse_opt::<f64>(key)? {
                Some(v) => Ok(v),
                None if self.strict => Err(Error::Param(format!("{key} must be set in strict mode"))),
                None => {
                    self.warn(format!("{key} not set, using {dflt} min"));
                    Ok(dflt)
                }
            }
        };
        let d = Buffers::default();
        Buffers::new(get("a_buffer", d.a_buffer)?, get("e_buffer", d.e_buffer)?)
    }

    fn sim_options(&self) -> Result<SimOptions> {
        Ok(SimOptions { buffers: self.buffers()?, max_iter: self.cfg.parse_key("max_iter")? })
    }

    fn schedule(&self) -> Result<Vec<FlightRecord>> {
        let p = self.cfg.path("schedule")?;
        let parsed = parse_schedule(open(&p)?, &ScheduleColumns::default(), &self.parse_opts()?)?;
        self.row_errors(&p, parsed.errors.len(), parsed.errors.first().map(|e| format!("line {}: {}", e.line, e.message)))?;
        Ok(parsed.rows)
    }

    fn trajectories(&self) -> Result<Vec<Trajectory>> {
        let p = self.cfg.path("tracks")?;
        let parsed = parse_tracks(open(&p)?, &TrackColumns::default(), &self.parse_opts()?)?;
        self.row_errors(&p, parsed.errors.len(), parsed.errors.first().map(|e| format!("line {}: {}", e.line, e.message)))?;
        Ok(assemble_trajectories(&parsed.rows, self.cfg.parse_key("min_points")?, self.cfg.parse_key("max_gap_s")?))
    }

    fn row_errors(&self, p: &Path, n: usize, first: Option<String>) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        let msg = format!("{}: {n} rejected rows, first at {}", p.display(), first.unwrap_or_default());
        if self.strict {
            return Err(Error::Format(msg));
        }
        self.warn(msg);
        Ok(())
    }

    fn itineraries(&self) -> Result<Vec<Itinerary>> {
        build_itineraries(&self.schedule()?)
    }
}

fn open(p: &Path) -> Result<File> {
    File::open(p).map_err(|e| Error::Path(format!("{}: {e}", p.display())))
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    std::fs::write(p, text).map_err(|e| Error::Path(format!("{}: {e}", p.display())))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Param(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim());
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", s.to_string());
    }
    let mut set_opt = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            cfg.set(k, v);
        }
    };
    match &cli.command {
        Command::Synth { .. } | Command::Report { .. } => {}
        Command::MineRoutes { tracks, min_traffic, minpt, epsilon } => {
            set_opt("tracks", tracks.clone());
            set_opt("min_traffic", min_traffic.map(|v| v.to_string()));
            set_opt("minpt", minpt.map(|v| v.to_string()));
            set_opt("epsilon", epsilon.map(|v| v.to_string()));
        }
        Command::FindCongestion { top_n, threshold, grid_nm, omega } => {
            set_opt("hot", top_n.map(|n| format!("top:{n}")));
            set_opt("hot", threshold.map(|x| format!("threshold:{x}")));
            set_opt("grid_nm", grid_nm.map(|v| v.to_string()));
            set_opt("omega", omega.clone());
        }
        Command::BuildNetwork { schedule, fixtures } => {
            set_opt("schedule", schedule.clone());
            set_opt("fixtures", fixtures.clone());
        }
        Command::Simulate { schedule, a_buffer, e_buffer } => {
            set_opt("schedule", schedule.clone());
            set_opt("a_buffer", a_buffer.map(|v| v.to_string()));
            set_opt("e_buffer", e_buffer.map(|v| v.to_string()));
        }
        Command::Scenario { file, schedule, a_buffer, e_buffer } => {
            set_opt("scenarios", file.clone());
            set_opt("schedule", schedule.clone());
            set_opt("a_buffer", a_buffer.map(|v| v.to_string()));
            set_opt("e_buffer", e_buffer.map(|v| v.to_string()));
        }
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Path(format!("{}: {e}", cli.out.display())))?;
    let ctx = Ctx { hash: cfg.hash(), cfg, out: cli.out.clone(), strict: cli.strict };
    match &cli.command {
        Command::Synth { preset } => cmd_synth(&ctx, preset),
        Command::MineRoutes { .. } => cmd_mine_routes(&ctx),
        Command::FindCongestion { .. } => cmd_find_congestion(&ctx),
        Command::BuildNetwork { .. } => cmd_build_network(&ctx),
        Command::Simulate { .. } => cmd_simulate(&ctx),
        Command::Scenario { .. } => cmd_scenario(&ctx),
        Command::Report { top } => cmd_report(&ctx, *top),
    }
}

fn cmd_synth(ctx: &Ctx, preset: &str) -> Result<()> {
    let seed: u64 = ctx.cfg.parse_key("seed")?;
    let spec = match preset {
        "regional" => SynthSpec::regional(seed),
        "two-bundle" => SynthSpec::two_bundle(seed, 80.0, 5.0, 20, 2),
        other => return Err(Error::Param(format!("unknown synth preset '{other}'"))),
    };
    let day = generate_day(&spec)?;
    write_text(&ctx.path("tracks.csv"), &tracks_csv(&day.tracks)?)?;
    write_text(&ctx.path("schedule.csv"), &schedule_csv(&day.schedule)?)?;
    ctx.write("manifest.json", "manifest", &day.manifest)?;
    println!(
        "synth {preset}: {} flights, {} track points, {} OD pairs -> {}",
        day.schedule.len(),
        day.tracks.len(),
        day.manifest.bundle_counts.len(),
        ctx.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RouteArtifact {
    pub routes: Vec<Route>,
    pub summaries: Vec<OdSummary>,
    /// OD pairs left out by the traffic filter, with flights per day.
    pub excluded: Vec<((String, String), f64)>,
    pub warnings: Vec<String>,
}

fn cmd_mine_routes(ctx: &Ctx) -> Result<()> {
    let trajs = ctx.trajectories()?;
    let days: f64 = ctx.cfg.parse_key("days")?;
    let min_traffic: f64 = ctx.cfg.parse_opt("min_traffic")?.unwrap_or(1.0);
    let mut per_od: BTreeMap<(String, String), usize> = BTreeMap::new();
    for t in &trajs {
        *per_od.entry(t.od_pair.clone()).or_insert(0) += 1;
    }
    let excluded: Vec<((String, String), f64)> =
        per_od.iter().map(|(od, &n)| (od.clone(), n as f64 / days)).filter(|(_, r)| *r < min_traffic).collect();
    let kept: Vec<Trajectory> = trajs.into_iter().filter(|t| !excluded.iter().any(|(od, _)| *od == t.od_pair)).collect();
    let mut params = MiningParams { m: ctx.cfg.parse_key("resample")?, minpt: ctx.cfg.parse_key("minpt")?, ..MiningParams::default() };
    if let Some(eps) = ctx.cfg.parse_opt::<f64>("epsilon")? {
        for od in per_od.keys() {
            params.epsilon_override.insert(od.clone(), eps);
        }
    }
    let res = mine_routes(&kept, &params);
    let mut warnings = res.warnings;
    if !excluded.is_empty() {
        warnings.push(format!("{} OD pairs below {min_traffic} flights/day excluded", excluded.len()));
    }
    if kept.is_empty() {
        warnings.push("no OD pair passes the traffic filter; route set is empty".into());
    }
    for w in &warnings {
        ctx.warn(w);
    }
    let art = RouteArtifact { routes: res.routes, summaries: res.summaries, excluded, warnings };
    ctx.write("routes.json", "routes", &art)?;
    for s in &art.summaries {
        println!(
            "{}-{}: {} trajectories, {} routes, {} noise, eps {:.2}",
            s.od_pair.0, s.od_pair.1, s.trajectories, s.clusters, s.noise, s.epsilon
        );
    }
    println!("{} routes over {} OD pairs", art.routes.len(), art.summaries.len());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CongestionArtifact {
    pub omega: [f64; 3],
    pub hot: HotMode,
    pub grid: Option<GridSpec>,
    pub hot_grids: Vec<Grid>,
    pub points: Vec<CongestionPoint>,
    pub warnings: Vec<String>,
}

fn cmd_find_congestion(ctx: &Ctx) -> Result<()> {
    let routes: RouteArtifact = ctx.read("routes.json", "routes")?;
    let omega = ctx.cfg.omega()?;
    let mode = ctx.cfg.hot_mode()?;
    let days: f64 = ctx.cfg.parse_key("days")?;
    let lines: Vec<TrafficLine> = routes.routes.iter().map(|r| TrafficLine::from_route(r, days)).collect();
    let mut warnings = Vec::new();
    let mut heat = Table::new(&["row", "col", "traffic_load", "route_count", "entropy", "score", "hot"]);
    let (spec, hot, points) = if lines.is_empty() {
        warnings.push("no routes to grid; no congestion points".into());
        (None, Vec::new(), Vec::new())
    } else {
        let spec = GridSpec::covering(&lines, ctx.cfg.parse_key("grid_nm")?)?;
        let (mut grids, _) = accumulate_grid_metrics(&lines, &spec);
        score_grids(&mut grids, omega);
        let hot = select_hot_grids(&grids, mode, omega);
        if hot.is_empty() {
            warnings.push(format!("hot-grid selection {mode:?} is empty"));
        }
        for g in grids.iter().filter(|g| g.traffic_load > 0.0) {
            let is_hot = hot.iter().any(|h| h.index == g.index);
            heat.push(vec![
                g.index.0.to_string(),
                g.index.1.to_string(),
                num(Some(g.traffic_load)),
                g.route_count.to_string(),
                num(Some(g.entropy)),
                num(Some(g.score)),
                u8::from(is_hot).to_string(),
            ]);
        }
        let points = if hot.is_empty() {
            Vec::new()
        } else {
            cluster_hot_grids(&hot, ctx.cfg.parse_key("point_eps_nm")?, ctx.cfg.parse_key("point_minpt")?)?
        };
        (Some(spec), hot, points)
    };
    for w in &warnings {
        ctx.warn(w);
    }
    let art = CongestionArtifact { omega, hot: mode, grid: spec, hot_grids: hot, points, warnings };
    ctx.write("congestion.json", "congestion", &art)?;
    ctx.table("heatmap.csv", &heat)?;
    println!(
        "omega = ({}, {}, {}), {} hot grids, {} congestion points",
        omega[0],
        omega[1],
        omega[2],
        art.hot_grids.len(),
        art.points.len()
    );
    for p in &art.points {
        println!(
            "{}: {} grids at ({:.3}, {:.3}), radius {:.1} NM",
            p.point_id,
            p.member_grids.len(),
            p.centroid.lat,
            p.centroid.lon,
            p.radius
        );
    }
    Ok(())
}

/// Horizon start: the last local `t0_hour` at or before the earliest
/// scheduled time, unless `t0` is set.
fn horizon(ctx: &Ctx, schedule: &[FlightRecord]) -> Result<Horizon> {
    let dt: f64 = ctx.cfg.parse_key("dt")?;
    let m: usize = ctx.cfg.parse_key("m")?;
    let t0 = match ctx.cfg.parse_opt::<f64>("t0")? {
        Some(t) => t,
        None => {
            let first = schedule.iter().map(|f| f.sched_dep.min(f.sched_arr)).fold(f64::INFINITY, f64::min);
            if !first.is_finite() {
                return Err(Error::InsufficientData("empty schedule; set t0 explicitly".into()));
            }
            let tz: f64 = ctx.cfg.parse_key::<f64>("tz_offset")? * 3600.0;
            let h: f64 = ctx.cfg.parse_key::<f64>("t0_hour")? * 3600.0;
            ((first + tz - h) / 86400.0).floor() * 86400.0 + h - tz
        }
    };
    Horizon::new(t0, dt, m)
}

fn fixtures(ctx: &Ctx) -> Result<Option<Fixtures>> {
    match ctx.cfg.get("fixtures").unwrap_or("bundled") {
        "bundled" => Ok(Some(Fixtures::bundled())),
        "none" => Ok(None),
        dir => {
            let read = |f: &str| {
                let p = Path::new(dir).join(f);
                std::fs::read_to_string(&p).map_err(|e| Error::Path(format!("{}: {e}", p.display())))
            };
            Ok(Some(Fixtures::parse(&read("airports.csv")?, &read("enroute.csv")?)?))
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NetworkArtifact {
    pub network: MultiLayerNetwork,
    pub warnings: Vec<String>,
}

fn cmd_build_network(ctx: &Ctx) -> Result<()> {
    let routes: RouteArtifact = ctx.read("routes.json", "routes")?;
    let cong: CongestionArtifact = ctx.read("congestion.json", "congestion")?;
    let schedule = ctx.schedule()?;
    let fx = fixtures(ctx)?;
    let trajs = match ctx.cfg.get("point_params").unwrap_or("tracks") {
        "tracks" => ctx.trajectories()?,
        "fixtures" => Vec::new(),
        other => return Err(Error::Param(format!("point_params must be tracks or fixtures, got '{other}'"))),
    };
    let mut opts = BuildOptions::new(horizon(ctx, &schedule)?);
    opts.n = ctx.cfg.parse_key("n")?;
    opts.corridor_nm = ctx.cfg.parse_key("corridor_nm")?;
    opts.coverage = ctx.cfg.parse_key("coverage")?;
    opts.default_k = ctx.cfg.parse_key("default_k")?;
    opts.tz_offset_hours = ctx.cfg.parse_key("tz_offset")?;
    if let Some(w) = ctx.cfg.parse_opt::<String>("idle_window")? {
        let bad = || Error::Param(format!("idle_window '{w}' must be START-END local hours"));
        let (a, b) = w.split_once('-').ok_or_else(bad)?;
        opts.idle_window = Some((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?));
    }
    let inp =
        BuildInputs { routes: &routes.routes, points: &cong.points, schedule: &schedule, fixtures: fx.as_ref(), trajectories: &trajs };
    let (net, warnings) = build_network(inp, &opts)?;
    for w in &warnings {
        ctx.warn(w);
    }
    let per_hour = 60.0 / net.horizon.dt;
    println!(
        "{} airports, {} points, {} routes, {} crossings",
        net.airports.len(),
        net.points.len(),
        net.routes.len(),
        net.crossings.len()
    );
    for n in net.nodes() {
        println!("{}: mu {}/h, k {}, demand {:.1}", n.node_id, fmt_rate(n.params.mu * per_hour), n.params.k, n.demand.total());
    }
    ctx.write("network.json", "network", &NetworkArtifact { network: net, warnings })
}

fn fmt_rate(v: f64) -> String {
    if v.fract() == 0.0 { format!("{v:.0}") } else { format!("{v:.2}") }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulationArtifact {
    pub buffers: Buffers,
    pub report: DelayReport,
    pub passes: Vec<usize>,
    pub warnings: Vec<String>,
}

fn node_table(report: &DelayReport) -> Table {
    let mut t = Table::new(&["node_id", "kind", "flights", "local", "propagated", "total"]);
    for n in &report.nodes {
        let kind = match n.kind {
            crate::network::NodeKind::Airport => "airport",
            crate::network::NodeKind::EnRoute => "en_route",
        };
        t.push(vec![n.node_id.clone(), kind.into(), num(Some(n.flights)), num(n.local), num(n.propagated), num(n.total())]);
    }
    t
}

fn print_summary(report: &DelayReport, top: usize) {
    let s = &report.network;
    println!(
        "network: {} flights, average delay {:.3} min/flight (local {:.3}, propagated {:.3})",
        s.flights, s.total, s.local, s.propagated
    );
    let tops: Vec<String> = top_local(report, top).iter().map(|n| format!("{} {:.3}", n.node_id, n.local.unwrap_or(0.0))).collect();
    println!("top {} nodes by local delay: {}", top, tops.join(", "));
}

fn cmd_simulate(ctx: &Ctx) -> Result<()> {
    let net: NetworkArtifact = ctx.read("network.json", "network")?;
    let its = ctx.itineraries()?;
    let opts = ctx.sim_options()?;
    let out = simulate_day(&net.network, &its, &opts)?;
    for w in &out.warnings {
        ctx.warn(w);
    }
    let mut flights =
        Table::new(&["flight_id", "registration", "leg", "node_id", "kind", "weight", "scheduled", "adjusted", "local", "propagated"]);
    for f in &out.report.flights {
        for (i, l) in f.legs.iter().enumerate() {
            let kind = serde_json::to_value(l.kind)?.as_str().unwrap_or("").to_string();
            flights.push(vec![
                f.flight_id.clone(),
                f.registration.clone(),
                i.to_string(),
                l.node_id.clone(),
                kind,
                num(Some(l.weight)),
                num(Some(l.scheduled)),
                num(Some(l.adjusted)),
                num(Some(l.local)),
                num(Some(l.propagated)),
            ]);
        }
    }
    ctx.table("flights.csv", &flights)?;
    ctx.table("nodes.csv", &node_table(&out.report))?;
    print_summary(&out.report, 5);
    let art = SimulationArtifact { buffers: opts.buffers, report: out.report, passes: out.passes, warnings: out.warnings };
    ctx.write("simulation.json", "simulation", &art)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScenarioArtifact {
    pub scenarios: Vec<ScenarioEntry>,
    pub ranking: Vec<RankStep>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub id: String,
    /// (node, before, after) in operations per hour.
    pub capacity_changes: Vec<(String, f64, f64)>,
    pub rows: Vec<DeltaRow>,
}

fn cmd_scenario(ctx: &Ctx) -> Result<()> {
    let net: NetworkArtifact = ctx.read("network.json", "network")?;
    let net = net.network;
    let p = ctx.cfg.path("scenarios")?;
    let text = std::fs::read_to_string(&p).map_err(|e| Error::Path(format!("{}: {e}", p.display())))?;
    let file = parse_scenarios(&text)?;
    if file.scenarios.is_empty() && file.rank.is_empty() {
        return Err(Error::Format(format!("{}: no scenarios or rank request", p.display())));
    }
    let its = ctx.itineraries()?;
    let opts = ctx.sim_options()?;
    let (base, results) = run_scenarios(&net, &its, &opts, &file.scenarios)?;
    for w in &base.warnings {
        ctx.warn(w);
    }
    let per_hour = 60.0 / net.horizon.dt;
    let mut table = Table::new(&["scenario", "scope", "metric", "baseline", "scenario_value", "delta"]);
    let mut caps = Table::new(&["scenario", "node_id", "mu_before_per_h", "mu_after_per_h"]);
    let mut entries = Vec::new();
    println!("baseline average delay {:.3} min/flight", base.report.network.total);
    for r in &results {
        let changes: Vec<(String, f64, f64)> = r.capacity_changes.iter().map(|(n, a, b)| (n.clone(), a * per_hour, b * per_hour)).collect();
        let shown: Vec<String> = changes.iter().map(|(n, a, b)| format!("{n} mu {}->{}/h", fmt_rate(*a), fmt_rate(*b))).collect();
        println!("{}: {}; network delay reduced by {:.3} min/flight", r.id, shown.join(", "), r.network_delta());
        for (n, a, b) in &changes {
            caps.push(vec![r.id.clone(), n.clone(), num(Some(*a)), num(Some(*b))]);
        }
        for row in &r.rows {
            table.push(vec![r.id.clone(), row.scope.clone(), row.metric.clone(), num(row.baseline), num(row.scenario), num(row.delta)]);
        }
        entries.push(ScenarioEntry { id: r.id.clone(), capacity_changes: changes, rows: r.rows.clone() });
    }
    let ranking = if file.rank.is_empty() { Vec::new() } else { rank_cumulative_expansions(&net, &its, &opts, &file.rank)? };
    if !ranking.is_empty() {
        let mut rt = Table::new(&["rank", "airport", "single_reduction", "cumulative_reduction"]);
        for s in &ranking {
            println!("rank {}: {} single {:.3}, cumulative {:.3}", s.rank, s.airport, s.single, s.cumulative);
            rt.push(vec![s.rank.to_string(), s.airport.clone(), num(Some(s.single)), num(Some(s.cumulative))]);
        }
        ctx.table("ranking.csv", &rt)?;
    }
    ctx.table("scenario.csv", &table)?;
    ctx.table("capacity.csv", &caps)?;
    ctx.write("scenario.json", "scenario", &ScenarioArtifact { scenarios: entries, ranking })
}

fn cmd_report(ctx: &Ctx, top: usize) -> Result<()> {
    let sim: SimulationArtifact = ctx.read("simulation.json", "simulation")?;
    let mut t = node_table(&sim.report);
    let s = &sim.report.network;
    t.push(vec![
        "network".into(),
        "network".into(),
        s.flights.to_string(),
        num(Some(s.local)),
        num(Some(s.propagated)),
        num(Some(s.total)),
    ]);
    ctx.table("report.csv", &t)?;
    print_summary(&sim.report, top);
    let max_pass = sim.passes.iter().copied().max().unwrap_or(0);
    println!(
        "buffers a={} e={} min, at most {max_pass} passes per sub-period, {} warnings",
        sim.buffers.a_buffer,
        sim.buffers.e_buffer,
        sim.warnings.len()
    );
    Ok(())
}
