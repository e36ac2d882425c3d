//! Operational route identification by density clustering of resampled
//! trajectories, one OD pair at a time.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{LatLon, LocalProjection};
use crate::ingest::{Trajectory, resample_with_time};

/// DBSCAN output. `labels[i]` is `Some(cluster)` or `None` for noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabeling {
    pub labels: Vec<Option<usize>>,
    pub epsilon: f64,
    pub minpt: usize,
}

impl ClusterLabeling {
    pub fn cluster_count(&self) -> usize {
        self.labels.iter().flatten().map(|c| c + 1).max().unwrap_or(0)
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub route_id: String,
    pub od_pair: (String, String),
    pub centroid: Vec<LatLon>,
    /// Mean minutes since departure at each centroid vertex.
    pub centroid_minutes: Vec<f64>,
    pub usage_prob: f64,
    pub member_count: usize,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Density-based clustering.
///
/// A point is core when at least `minpt` points (itself included) lie within
/// `epsilon`. Clusters are numbered in order of their lowest-index core
/// point. A border point reachable from several clusters joins the one with
/// the smallest number.
pub fn dbscan<F>(vectors: &[Vec<f64>], epsilon: f64, minpt: usize, metric: F) -> ClusterLabeling
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let n = vectors.len();
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| metric(&vectors[i], &vectors[j]) <= epsilon).collect()).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= minpt).collect();
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for seed in 0..n {
        if !core[seed] || labels[seed].is_some() {
            continue;
        }
        let id = next;
        next += 1;
        labels[seed] = Some(id);
        let mut stack = vec![seed];
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if labels[q].is_none() {
                    labels[q] = Some(id);
                    if core[q] {
                        stack.push(q);
                    }
                }
            }
        }
    }
    ClusterLabeling { labels, epsilon, minpt }
}

/// Sorted k-distance curve (descending, ties by input index) with the
/// original index of each entry.
pub fn kdistance_curve<F>(vectors: &[Vec<f64>], k: usize, metric: F) -> Result<Vec<(usize, f64)>>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let n = vectors.len();
    if k == 0 || n < k + 1 {
        return Err(Error::InsufficientData(format!("k-distance needs more than k={k} vectors, got {n}")));
    }
    let mut curve: Vec<(usize, f64)> = (0..n)
        .map(|i| {
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| metric(&vectors[i], &vectors[j])).collect();
            d.sort_by(f64::total_cmp);
            (i, d[k - 1])
        })
        .collect();
    curve.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(curve)
}

/// Index of the knee of a descending curve: the entry farthest from the chord
/// joining its ends, after scaling both axes to unit range. First maximum
/// wins.
pub fn knee_index(values: &[f64]) -> usize {
    let n = values.len();
    if n < 3 {
        return n.saturating_sub(1);
    }
    let (hi, lo) = (values[0], values[n - 1]);
    if hi == lo {
        return 0;
    }
    let xs = (n - 1) as f64;
    let span = hi - lo;
    // chord from (0, 1) to (1, 0) in scaled coordinates: x + y - 1 = 0
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.iter().enumerate() {
        let x = i as f64 / xs;
        let y = (v - lo) / span;
        let d = (1.0 - x - y) / 2f64.sqrt();
        if d > best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// Neighbourhood radius from the k-distance knee.
pub fn kdistance_epsilon<F>(vectors: &[Vec<f64>], k: usize, metric: F) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let curve = kdistance_curve(vectors, k, metric)?;
    let values: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let eps = values[knee_index(&values)];
    if eps <= 0.0 {
        return Err(Error::InsufficientData("k-distance knee at zero: points coincide".into()));
    }
    Ok(eps)
}

#[derive(Debug, Clone)]
pub struct MiningParams {
    pub m: usize,
    pub minpt: usize,
    /// Per-OD epsilon overrides in NM of vector distance.
    pub epsilon_override: BTreeMap<(String, String), f64>,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams { m: 50, minpt: 5, epsilon_override: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OdSummary {
    pub od_pair: (String, String),
    pub trajectories: usize,
    pub epsilon: f64,
    pub clusters: usize,
    pub noise: usize,
    /// Flight ids per cluster, noise last under key `None`.
    pub members: Vec<(Option<usize>, Vec<String>)>,
}

#[derive(Debug, Clone, Default)]
pub struct MiningResult {
    pub routes: Vec<Route>,
    pub summaries: Vec<OdSummary>,
    pub warnings: Vec<String>,
}

struct OdOutcome {
    routes: Vec<Route>,
    summary: Option<OdSummary>,
    warnings: Vec<String>,
}

fn mine_od(od: &(String, String), trajs: &[&Trajectory], params: &MiningParams) -> OdOutcome {
    let mut warnings = Vec::new();
    let mut kept = Vec::new();
    for t in trajs {
        match resample_with_time(t, params.m) {
            Ok(r) => kept.push((t.flight_id.clone(), r)),
            Err(e) => warnings.push(format!("{}-{}: skipping {}: {e}", od.0, od.1, t.flight_id)),
        }
    }
    if kept.len() < params.minpt {
        warnings.push(format!("{}-{}: {} usable trajectories below minpt {}", od.0, od.1, kept.len(), params.minpt));
        return OdOutcome { routes: Vec::new(), summary: None, warnings };
    }
    let m = params.m;
    let n = kept.len() as f64;
    let (mut a_lat, mut a_lon, mut b_lat, mut b_lon) = (0.0, 0.0, 0.0, 0.0);
    for (_, (lat, lon, _)) in &kept {
        a_lat += lat[0] / n;
        a_lon += lon[0] / n;
        b_lat += lat[m - 1] / n;
        b_lon += lon[m - 1] / n;
    }
    let proj = LocalProjection::new(LatLon::new((a_lat + b_lat) / 2.0, (a_lon + b_lon) / 2.0));
    let vectors: Vec<Vec<f64>> = kept
        .iter()
        .map(|(_, (lat, lon, _))| {
            (0..m)
                .flat_map(|i| {
                    let (x, y) = proj.project(LatLon::new(lat[i], lon[i]));
                    [x, y]
                })
                .collect()
        })
        .collect();
    let epsilon = match params.epsilon_override.get(od) {
        Some(&e) => e,
        None => match kdistance_epsilon(&vectors, params.minpt, euclidean) {
            Ok(e) => e,
            Err(e) => {
                warnings.push(format!("{}-{}: {e}", od.0, od.1));
                return OdOutcome { routes: Vec::new(), summary: None, warnings };
            }
        },
    };
    let lab = dbscan(&vectors, epsilon, params.minpt, euclidean);
    let clusters = lab.cluster_count();
    let clustered = kept.len() - lab.noise_count();
    let mut routes = Vec::new();
    let mut members = Vec::new();
    for c in 0..clusters {
        let idx: Vec<usize> = (0..kept.len()).filter(|&i| lab.labels[i] == Some(c)).collect();
        let cnt = idx.len() as f64;
        let mut centroid = vec![LatLon::new(0.0, 0.0); m];
        let mut minutes = vec![0.0; m];
        for &i in &idx {
            let (lat, lon, t) = &kept[i].1;
            for j in 0..m {
                centroid[j].lat += lat[j] / cnt;
                centroid[j].lon += lon[j] / cnt;
                minutes[j] += t[j] / cnt;
            }
        }
        routes.push(Route {
            route_id: format!("{}-{}-{}", od.0, od.1, c),
            od_pair: od.clone(),
            centroid,
            centroid_minutes: minutes,
            usage_prob: idx.len() as f64 / clustered as f64,
            member_count: idx.len(),
        });
        members.push((Some(c), idx.iter().map(|&i| kept[i].0.clone()).collect()));
    }
    let noise: Vec<String> = (0..kept.len()).filter(|&i| lab.labels[i].is_none()).map(|i| kept[i].0.clone()).collect();
    if !noise.is_empty() {
        members.push((None, noise));
    }
    let summary = OdSummary { od_pair: od.clone(), trajectories: kept.len(), epsilon, clusters, noise: lab.noise_count(), members };
    OdOutcome { routes, summary: Some(summary), warnings }
}

/// Mine routes for every OD pair present in `trajs`. OD pairs are processed
/// independently and emitted in lexical order.
pub fn mine_routes(trajs: &[Trajectory], params: &MiningParams) -> MiningResult {
    let mut groups: BTreeMap<(String, String), Vec<&Trajectory>> = BTreeMap::new();
    for t in trajs {
        groups.entry(t.od_pair.clone()).or_default().push(t);
    }
    let groups: Vec<_> = groups.into_iter().collect();
    #[cfg(feature = "parallel")]
    let outcomes: Vec<OdOutcome> = {
        use rayon::prelude::*;
        groups.par_iter().map(|(od, ts)| mine_od(od, ts, params)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<OdOutcome> = groups.iter().map(|(od, ts)| mine_od(od, ts, params)).collect();
    let mut res = MiningResult::default();
    for o in outcomes {
        res.routes.extend(o.routes);
        res.summaries.extend(o.summary);
        res.warnings.extend(o.warnings);
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, x0: f64, step: f64) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![x0 + i as f64 * step, 0.0]).collect()
    }

    #[test]
    fn separated_groups() {
        let mut v = line(10, 0.0, 1.0);
        v.extend(line(10, 109.0, 1.0));
        let lab = dbscan(&v, 2.0, 3, euclidean);
        assert_eq!((lab.cluster_count(), lab.noise_count()), (2, 0));
        v.push(vec![59.0, 100.0]);
        let lab = dbscan(&v, 2.0, 3, euclidean);
        assert_eq!(lab.labels[20], None);
        assert_eq!(lab.cluster_count(), 2);
    }

    #[test]
    fn knee_lands_in_gap() {
        let mut v = line(20, 0.0, 1.0);
        v.extend(line(5, 119.0, 100.0));
        let eps = kdistance_epsilon(&v, 3, euclidean).unwrap();
        assert!((3.0..100.0).contains(&eps), "{eps}");
    }

    #[test]
    fn coincident_points_rejected() {
        let v = vec![vec![1.0, 1.0]; 6];
        assert!(kdistance_epsilon(&v, 3, euclidean).is_err());
    }

    #[test]
    fn flat_curve_returns_common_value() {
        let v: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 12.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let eps = kdistance_epsilon(&v, 2, euclidean).unwrap();
        let expect = 2.0 * (std::f64::consts::PI / 12.0).sin();
        assert!((eps - expect).abs() < 1e-9, "{eps} {expect}");
    }

    #[test]
    fn too_few_vectors() {
        assert!(matches!(kdistance_epsilon(&line(3, 0.0, 1.0), 3, euclidean), Err(Error::InsufficientData(_))));
    }
}
