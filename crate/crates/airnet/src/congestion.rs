//! Grid scoring of airspace and extraction of en-route congestion points.
//!
//! Each grid is scored by traffic load, route count and the entropy of its
//! through-traffic directions. High scorers are clustered into conceptual
//! congestion points.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{LatLon, NM_PER_DEG, great_circle_nm};
use crate::route_mining::{Route, dbscan};

/// Regular lat/lon tiling with cells of `cell_nm` on a side, measured at the
/// box's mid latitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
    pub cell_nm: f64,
    pub dlat: f64,
    pub dlon: f64,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    N,
    E,
    S,
    W,
}

/// d_XY: the neighbour a route came from and the one it leaves to.
pub type DirLabel = (Side, Side);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DirectionHistogram {
    pub loads: BTreeMap<DirLabel, f64>,
}

impl DirectionHistogram {
    pub fn total(&self) -> f64 {
        self.loads.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub index: (usize, usize),
    pub south: f64,
    pub west: f64,
    pub north: f64,
    pub east: f64,
    pub traffic_load: f64,
    pub route_count: usize,
    pub entropy: f64,
    pub score: f64,
}

impl Grid {
    pub fn center(&self) -> LatLon {
        LatLon::new((self.south + self.north) / 2.0, (self.west + self.east) / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CongestionPoint {
    pub point_id: String,
    pub member_grids: Vec<(usize, usize)>,
    pub centroid: LatLon,
    pub radius: f64,
}

/// A polyline carrying traffic. Lines sharing a `route_key` count as one
/// route for R_i.
#[derive(Debug, Clone)]
pub struct TrafficLine {
    pub route_key: String,
    pub polyline: Vec<LatLon>,
    pub load: f64,
}

impl TrafficLine {
    /// Route centroid weighted by its members per observed day.
    pub fn from_route(r: &Route, days: f64) -> Self {
        TrafficLine { route_key: r.route_id.clone(), polyline: r.centroid.clone(), load: r.member_count as f64 / days }
    }
}

fn cells(extent: f64) -> usize {
    ((extent - 1e-9).ceil().max(1.0)) as usize
}

/// Lower-index rule: a coordinate on a boundary (to within 1e-9 of a cell)
/// belongs to the cell below it.
fn cell_coord(u: f64) -> i64 {
    let r = u.round();
    if (u - r).abs() < 1e-9 {
        return if r == 0.0 { 0 } else { r as i64 - 1 };
    }
    u.floor() as i64
}

impl GridSpec {
    pub fn new(south: f64, west: f64, north: f64, east: f64, cell_nm: f64) -> Result<Self> {
        if cell_nm <= 0.0 || !cell_nm.is_finite() {
            return Err(Error::Param(format!("grid size {cell_nm} must be positive")));
        }
        if !(north > south && east > west) {
            return Err(Error::Param("degenerate bounding box".into()));
        }
        let cos = ((south + north) / 2.0).to_radians().cos();
        let dlat = cell_nm / NM_PER_DEG;
        let dlon = cell_nm / (NM_PER_DEG * cos);
        let rows = cells((north - south) / dlat);
        let cols = cells((east - west) / dlon);
        Ok(GridSpec { south, west, north, east, cell_nm, dlat, dlon, rows, cols })
    }

    /// Smallest box holding every line, padded by one cell.
    pub fn covering(lines: &[TrafficLine], cell_nm: f64) -> Result<Self> {
        let mut it = lines.iter().flat_map(|l| l.polyline.iter());
        let first = it.next().ok_or_else(|| Error::InsufficientData("no traffic to grid".into()))?;
        let (mut s, mut w, mut n, mut e) = (first.lat, first.lon, first.lat, first.lon);
        for p in lines.iter().flat_map(|l| l.polyline.iter()) {
            s = s.min(p.lat);
            n = n.max(p.lat);
            w = w.min(p.lon);
            e = e.max(p.lon);
        }
        let pad_lat = cell_nm / NM_PER_DEG;
        let pad_lon = cell_nm / (NM_PER_DEG * ((s + n) / 2.0).to_radians().cos());
        GridSpec::new(s - pad_lat, w - pad_lon, n + pad_lat, e + pad_lon, cell_nm)
    }

    fn uv(&self, p: LatLon) -> (f64, f64) {
        ((p.lon - self.west) / self.dlon, (p.lat - self.south) / self.dlat)
    }

    /// Unbounded integer cell (row, col); may lie outside the box.
    fn raw_cell(&self, u: f64, v: f64) -> (i64, i64) {
        (cell_coord(v), cell_coord(u))
    }

    fn inside(&self, c: (i64, i64)) -> Option<(usize, usize)> {
        (c.0 >= 0 && c.1 >= 0 && (c.0 as usize) < self.rows && (c.1 as usize) < self.cols).then_some((c.0 as usize, c.1 as usize))
    }

    /// Grid owning `p`, if inside the box.
    pub fn locate(&self, p: LatLon) -> Option<(usize, usize)> {
        if p.lat < self.south || p.lat > self.north || p.lon < self.west || p.lon > self.east {
            return None;
        }
        let (u, v) = self.uv(p);
        let (r, c) = self.raw_cell(u, v);
        Some(((r.max(0) as usize).min(self.rows - 1), (c.max(0) as usize).min(self.cols - 1)))
    }

    pub fn flat(&self, idx: (usize, usize)) -> usize {
        idx.0 * self.cols + idx.1
    }

    /// Sequence of 4-connected cells a polyline passes through. A diagonal
    /// step through an exact grid corner is routed via the lower-index of
    /// the two side neighbours.
    pub fn cell_path(&self, polyline: &[LatLon]) -> Vec<(i64, i64)> {
        let mut path: Vec<(i64, i64)> = Vec::new();
        let push = |c: (i64, i64), path: &mut Vec<(i64, i64)>| {
            if let Some(&last) = path.last() {
                if last == c {
                    return;
                }
                if (last.0 - c.0).abs() == 1 && (last.1 - c.1).abs() == 1 {
                    let via = (last.0, c.1).min((c.0, last.1));
                    path.push(via);
                }
            }
            path.push(c);
        };
        if polyline.len() == 1 {
            let (u, v) = self.uv(polyline[0]);
            push(self.raw_cell(u, v), &mut path);
        }
        for w in polyline.windows(2) {
            let (a, b) = (self.uv(w[0]), self.uv(w[1]));
            let mut ts = vec![0.0, 1.0];
            for (p, q) in [(a.0, b.0), (a.1, b.1)] {
                if p == q {
                    continue;
                }
                let (lo, hi) = (p.min(q), p.max(q));
                let mut k = lo.floor() + 1.0;
                while k < hi {
                    ts.push((k - p) / (q - p));
                    k += 1.0;
                }
            }
            ts.sort_by(f64::total_cmp);
            ts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
            for s in ts.windows(2) {
                let m = (s[0] + s[1]) / 2.0;
                let (u, v) = (a.0 + m * (b.0 - a.0), a.1 + m * (b.1 - a.1));
                push(self.raw_cell(u, v), &mut path);
            }
        }
        path
    }

    pub fn empty_grids(&self) -> Vec<Grid> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(Grid {
                    index: (r, c),
                    south: self.south + r as f64 * self.dlat,
                    west: self.west + c as f64 * self.dlon,
                    north: (self.south + (r + 1) as f64 * self.dlat).min(self.north),
                    east: (self.west + (c + 1) as f64 * self.dlon).min(self.east),
                    traffic_load: 0.0,
                    route_count: 0,
                    entropy: 0.0,
                    score: 0.0,
                });
            }
        }
        out
    }
}

/// Tile the box. Edge cells may be partial.
pub fn grid_partition(south: f64, west: f64, north: f64, east: f64, cell_nm: f64) -> Result<(GridSpec, Vec<Grid>)> {
    let spec = GridSpec::new(south, west, north, east, cell_nm)?;
    let g = spec.empty_grids();
    Ok((spec, g))
}

fn side(from: (i64, i64), to: (i64, i64)) -> Side {
    match (to.0 - from.0, to.1 - from.1) {
        (1, 0) => Side::N,
        (-1, 0) => Side::S,
        (0, 1) => Side::E,
        _ => Side::W,
    }
}

/// Fill T_i, R_i and per-grid direction histograms, then entropies.
///
/// A line starting or ending in a grid counts towards its load and route
/// count but adds nothing to its histogram there.
pub fn accumulate_grid_metrics(lines: &[TrafficLine], spec: &GridSpec) -> (Vec<Grid>, Vec<DirectionHistogram>) {
    let mut grids = spec.empty_grids();
    let mut hists = vec![DirectionHistogram::default(); grids.len()];
    let mut routes: Vec<BTreeSet<&str>> = vec![BTreeSet::new(); grids.len()];
    for line in lines {
        let path = spec.cell_path(&line.polyline);
        let mut touched = BTreeSet::new();
        for (i, &c) in path.iter().enumerate() {
            let Some(idx) = spec.inside(c) else { continue };
            let f = spec.flat(idx);
            if touched.insert(f) {
                grids[f].traffic_load += line.load;
                routes[f].insert(&line.route_key);
            }
            if i > 0 && i + 1 < path.len() {
                let label = (side(c, path[i - 1]), side(c, path[i + 1]));
                *hists[f].loads.entry(label).or_insert(0.0) += line.load;
            }
        }
    }
    for (f, g) in grids.iter_mut().enumerate() {
        g.route_count = routes[f].len();
        g.entropy = grid_entropy(&hists[f]);
    }
    (grids, hists)
}

/// Base-2 Shannon entropy of the direction shares; zero when empty.
pub fn grid_entropy(h: &DirectionHistogram) -> f64 {
    let total = h.total();
    if total <= 0.0 {
        return 0.0;
    }
    let e: f64 = h
        .loads
        .values()
        .filter(|&&l| l > 0.0)
        .map(|&l| {
            let p = l / total;
            -p * p.log2()
        })
        .sum();
    e.max(0.0)
}

fn standardize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Min-max standardise each metric over all grids and combine with ω. A
/// metric that is constant across grids contributes zero.
pub fn score_grids(grids: &mut [Grid], omega: [f64; 3]) {
    let t = standardize(&grids.iter().map(|g| g.traffic_load).collect::<Vec<_>>());
    let r = standardize(&grids.iter().map(|g| g.route_count as f64).collect::<Vec<_>>());
    let e = standardize(&grids.iter().map(|g| g.entropy).collect::<Vec<_>>());
    for (i, g) in grids.iter_mut().enumerate() {
        g.score = omega[0] * t[i] + omega[1] * r[i] + omega[2] * e[i];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HotMode {
    /// Keep grids whose score / Σω exceeds the value.
    Threshold(f64),
    /// Keep the n best, plus any tied with the n-th.
    TopN(usize),
}

/// Hot grids, best first (ties by index).
pub fn select_hot_grids(grids: &[Grid], mode: HotMode, omega: [f64; 3]) -> Vec<Grid> {
    let mut sorted: Vec<&Grid> = grids.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    let wsum: f64 = omega.iter().sum();
    let keep: Vec<&Grid> = match mode {
        HotMode::Threshold(th) => sorted.into_iter().filter(|g| g.score / wsum > th).collect(),
        HotMode::TopN(0) => Vec::new(),
        HotMode::TopN(n) => {
            if sorted.len() <= n {
                sorted
            } else {
                let cut = sorted[n - 1].score;
                sorted.into_iter().filter(|g| g.score >= cut).collect()
            }
        }
    };
    keep.into_iter().cloned().collect()
}

/// Cluster hot grids by great-circle distance between centres. Noise grids
/// become single-grid points. Points are numbered E1, E2, ... in cluster
/// order, singletons last.
pub fn cluster_hot_grids(hot: &[Grid], epsilon_nm: f64, minpt: usize) -> Result<Vec<CongestionPoint>> {
    if epsilon_nm <= 0.0 {
        return Err(Error::Param(format!("clustering radius {epsilon_nm} must be positive")));
    }
    let centers: Vec<Vec<f64>> = hot.iter().map(|g| vec![g.center().lat, g.center().lon]).collect();
    let lab = dbscan(&centers, epsilon_nm, minpt, |a, b| great_circle_nm(LatLon::new(a[0], a[1]), LatLon::new(b[0], b[1])));
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); lab.cluster_count()];
    let mut singles = Vec::new();
    for (i, l) in lab.labels.iter().enumerate() {
        match l {
            Some(c) => groups[*c].push(i),
            None => singles.push(vec![i]),
        }
    }
    groups.extend(singles);
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(n, members)| {
            let wsum: f64 = members.iter().map(|&i| hot[i].traffic_load).sum();
            let weight = |i: usize| {
                if wsum > 0.0 { hot[i].traffic_load / wsum } else { 1.0 / members.len() as f64 }
            };
            let mut c = LatLon::new(0.0, 0.0);
            for &i in &members {
                c.lat += weight(i) * hot[i].center().lat;
                c.lon += weight(i) * hot[i].center().lon;
            }
            let radius = members.iter().map(|&i| great_circle_nm(c, hot[i].center())).fold(0.0, f64::max);
            CongestionPoint {
                point_id: format!("E{}", n + 1),
                member_grids: members.iter().map(|&i| hot[i].index).collect(),
                centroid: c,
                radius,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub omega3: Vec<f64>,
    pub selections: Vec<Vec<(usize, usize)>>,
    /// Pairwise Jaccard similarity, row-major over settings.
    pub jaccard: Vec<Vec<f64>>,
    pub intersection: Vec<(usize, usize)>,
    /// Grids selected under some setting but not all.
    pub weight_sensitive: Vec<(usize, usize)>,
}

/// Re-score under each ω₃ and compare hot-grid selections.
pub fn sensitivity_sweep(grids: &[Grid], omega: [f64; 3], omega3: &[f64], mode: HotMode) -> Result<SweepReport> {
    if omega3.len() < 2 {
        return Err(Error::Param("sensitivity sweep needs at least two weight settings".into()));
    }
    let mut sets: Vec<BTreeSet<(usize, usize)>> = Vec::new();
    for &w3 in omega3 {
        let mut g = grids.to_vec();
        let w = [omega[0], omega[1], w3];
        score_grids(&mut g, w);
        sets.push(select_hot_grids(&g, mode, w).iter().map(|g| g.index).collect());
    }
    let jac = |a: &BTreeSet<_>, b: &BTreeSet<_>| {
        let u = a.union(b).count();
        if u == 0 { 1.0 } else { a.intersection(b).count() as f64 / u as f64 }
    };
    let jaccard = sets.iter().map(|a| sets.iter().map(|b| jac(a, b)).collect()).collect();
    let mut inter = sets[0].clone();
    let mut union = BTreeSet::new();
    for s in &sets {
        inter = inter.intersection(s).copied().collect();
        union.extend(s.iter().copied());
    }
    Ok(SweepReport {
        omega3: omega3.to_vec(),
        selections: sets.iter().map(|s| s.iter().copied().collect()).collect(),
        jaccard,
        weight_sensitive: union.difference(&inter).copied().collect(),
        intersection: inter.into_iter().collect(),
    })
}
