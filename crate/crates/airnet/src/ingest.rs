//! Track and schedule parsing, trajectory assembly, itinerary chaining.
//!
//! All times are normalised to seconds since the Unix epoch at parse time.
//! Naive ISO-8601 stamps are read in the configured reference offset.

use std::collections::BTreeMap;
use std::io::Read;

use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{LatLon, great_circle_nm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub flight_id: String,
    pub timestamp: f64,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
    pub speed: f64,
    pub origin: String,
    pub destination: String,
    pub registration: String,
}

impl TrackPoint {
    pub fn position(&self) -> LatLon {
        LatLon::new(self.latitude, self.longitude)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub flight_id: String,
    pub od_pair: (String, String),
    pub points: Vec<TrackPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightRecord {
    pub flight_id: String,
    pub origin: String,
    pub destination: String,
    pub sched_dep: f64,
    pub sched_arr: f64,
    pub actual_dep: Option<f64>,
    pub actual_arr: Option<f64>,
    pub registration: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itinerary {
    pub registration: String,
    pub flights: Vec<FlightRecord>,
}

/// A rejected input row. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub rows: Vec<T>,
    pub errors: Vec<RowError>,
}

/// Header names for the track file. Altitude, speed and registration may be
/// absent from the file; the rest are mandatory.
#[derive(Debug, Clone)]
pub struct TrackColumns {
    pub flight_id: String,
    pub timestamp: String,
    pub lat: String,
    pub lon: String,
    pub alt: String,
    pub speed: String,
    pub origin: String,
    pub destination: String,
    pub registration: String,
}

impl Default for TrackColumns {
    fn default() -> Self {
        TrackColumns {
            flight_id: "flight_id".into(),
            timestamp: "timestamp".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            alt: "alt".into(),
            speed: "speed".into(),
            origin: "origin".into(),
            destination: "destination".into(),
            registration: "registration".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScheduleColumns {
    pub flight_id: String,
    pub origin: String,
    pub destination: String,
    pub sched_dep: String,
    pub sched_arr: String,
    pub actual_dep: String,
    pub actual_arr: String,
    pub registration: String,
}

impl Default for ScheduleColumns {
    fn default() -> Self {
        ScheduleColumns {
            flight_id: "flight_id".into(),
            origin: "origin".into(),
            destination: "destination".into(),
            sched_dep: "sched_dep".into(),
            sched_arr: "sched_arr".into(),
            actual_dep: "actual_dep".into(),
            actual_arr: "actual_arr".into(),
            registration: "registration".into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub delimiter: u8,
    /// Offset applied to ISO stamps that carry no zone.
    pub tz_offset_hours: i32,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { delimiter: b',', tz_offset_hours: 8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TimeKind {
    Epoch,
    Iso,
}

/// Per-column time parser. The format is fixed by the first non-empty value.
struct TimeColumn {
    kind: Option<TimeKind>,
    offset: FixedOffset,
}

impl TimeColumn {
    fn new(opts: &ParseOptions) -> Self {
        TimeColumn { kind: None, offset: FixedOffset::east_opt(opts.tz_offset_hours * 3600).expect("offset within a day") }
    }

    fn parse(&mut self, raw: &str) -> std::result::Result<f64, String> {
        let raw = raw.trim();
        let kind = *self.kind.get_or_insert_with(|| if raw.parse::<f64>().is_ok() { TimeKind::Epoch } else { TimeKind::Iso });
        match kind {
            TimeKind::Epoch => match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("bad epoch time {raw:?}")),
            },
            TimeKind::Iso => parse_iso(raw, self.offset).ok_or_else(|| format!("bad ISO-8601 time {raw:?}")),
        }
    }
}

pub fn parse_iso(raw: &str, offset: FixedOffset) -> Option<f64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.timestamp() as f64 + dt.timestamp_subsec_millis() as f64 / 1000.0);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(n) = NaiveDateTime::parse_from_str(raw, fmt) {
            let dt = offset.from_local_datetime(&n).single()?;
            return Some(dt.timestamp() as f64 + dt.timestamp_subsec_millis() as f64 / 1000.0);
        }
    }
    None
}

fn column(headers: &csv::StringRecord, name: &str, mandatory: bool) -> Result<Option<usize>> {
    match headers.iter().position(|h| h.trim() == name) {
        Some(i) => Ok(Some(i)),
        None if mandatory => Err(Error::Format(format!("missing mandatory column {name:?}"))),
        None => Ok(None),
    }
}

fn field(rec: &csv::StringRecord, idx: Option<usize>) -> &str {
    idx.and_then(|i| rec.get(i)).map(str::trim).unwrap_or("")
}

fn number(rec: &csv::StringRecord, idx: Option<usize>, name: &str) -> std::result::Result<f64, String> {
    let raw = field(rec, idx);
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("unparseable {name} {raw:?}")),
    }
}

fn reader<R: Read>(source: R, opts: &ParseOptions) -> csv::Reader<R> {
    csv::ReaderBuilder::new().delimiter(opts.delimiter).flexible(true).from_reader(source)
}

/// Parse a delimited track file. Invalid rows are returned as errors rather
/// than dropped silently.
pub fn parse_tracks<R: Read>(source: R, cols: &TrackColumns, opts: &ParseOptions) -> Result<Parsed<TrackPoint>> {
    let mut rdr = reader(source, opts);
    let headers = rdr.headers()?.clone();
    let c_id = column(&headers, &cols.flight_id, true)?;
    let c_ts = column(&headers, &cols.timestamp, true)?;
    let c_lat = column(&headers, &cols.lat, true)?;
    let c_lon = column(&headers, &cols.lon, true)?;
    let c_alt = column(&headers, &cols.alt, false)?;
    let c_spd = column(&headers, &cols.speed, false)?;
    let c_o = column(&headers, &cols.origin, true)?;
    let c_d = column(&headers, &cols.destination, true)?;
    let c_reg = column(&headers, &cols.registration, false)?;
    let mut times = TimeColumn::new(opts);
    let mut out = Parsed { rows: Vec::new(), errors: Vec::new() };
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let row = (|| {
            let flight_id = field(&rec, c_id);
            if flight_id.is_empty() {
                return Err("empty flight_id".to_string());
            }
            let timestamp = times.parse(field(&rec, c_ts))?;
            let latitude = number(&rec, c_lat, "latitude")?;
            let longitude = number(&rec, c_lon, "longitude")?;
            if !(-90.0..=90.0).contains(&latitude) {
                return Err(format!("latitude {latitude} outside [-90, 90]"));
            }
            if !(-180.0..=180.0).contains(&longitude) {
                return Err(format!("longitude {longitude} outside [-180, 180]"));
            }
            let altitude = if c_alt.is_some() && !field(&rec, c_alt).is_empty() { number(&rec, c_alt, "altitude")? } else { 0.0 };
            let speed = if c_spd.is_some() && !field(&rec, c_spd).is_empty() { number(&rec, c_spd, "speed")? } else { 0.0 };
            Ok(TrackPoint {
                flight_id: flight_id.to_string(),
                timestamp,
                latitude,
                longitude,
                altitude,
                speed,
                origin: field(&rec, c_o).to_string(),
                destination: field(&rec, c_d).to_string(),
                registration: field(&rec, c_reg).to_string(),
            })
        })();
        match row {
            Ok(p) => out.rows.push(p),
            Err(message) => out.errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

pub fn parse_schedule<R: Read>(source: R, cols: &ScheduleColumns, opts: &ParseOptions) -> Result<Parsed<FlightRecord>> {
    let mut rdr = reader(source, opts);
    let headers = rdr.headers()?.clone();
    let c_id = column(&headers, &cols.flight_id, true)?;
    let c_o = column(&headers, &cols.origin, true)?;
    let c_d = column(&headers, &cols.destination, true)?;
    let c_sd = column(&headers, &cols.sched_dep, true)?;
    let c_sa = column(&headers, &cols.sched_arr, true)?;
    let c_ad = column(&headers, &cols.actual_dep, false)?;
    let c_aa = column(&headers, &cols.actual_arr, false)?;
    let c_reg = column(&headers, &cols.registration, true)?;
    let (mut t_sd, mut t_sa, mut t_ad, mut t_aa) =
        (TimeColumn::new(opts), TimeColumn::new(opts), TimeColumn::new(opts), TimeColumn::new(opts));
    let mut out = Parsed { rows: Vec::new(), errors: Vec::new() };
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                out.errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        };
        let row = (|| {
            let flight_id = field(&rec, c_id);
            if flight_id.is_empty() {
                return Err("empty flight_id".to_string());
            }
            let sched_dep = t_sd.parse(field(&rec, c_sd))?;
            let sched_arr = t_sa.parse(field(&rec, c_sa))?;
            if sched_dep >= sched_arr {
                return Err(format!("sched_dep {sched_dep} not before sched_arr {sched_arr}"));
            }
            let optional = |c: Option<usize>, t: &mut TimeColumn| -> std::result::Result<Option<f64>, String> {
                let raw = field(&rec, c);
                if raw.is_empty() { Ok(None) } else { t.parse(raw).map(Some) }
            };
            let actual_dep = optional(c_ad, &mut t_ad)?;
            let actual_arr = optional(c_aa, &mut t_aa)?;
            Ok(FlightRecord {
                flight_id: flight_id.to_string(),
                origin: field(&rec, c_o).to_string(),
                destination: field(&rec, c_d).to_string(),
                sched_dep,
                sched_arr,
                actual_dep,
                actual_arr,
                registration: field(&rec, c_reg).to_string(),
            })
        })();
        match row {
            Ok(r) => out.rows.push(r),
            Err(message) => out.errors.push(RowError { line, message }),
        }
    }
    Ok(out)
}

fn point_order(a: &TrackPoint, b: &TrackPoint) -> std::cmp::Ordering {
    a.timestamp
        .total_cmp(&b.timestamp)
        .then(a.latitude.total_cmp(&b.latitude))
        .then(a.longitude.total_cmp(&b.longitude))
        .then(a.altitude.total_cmp(&b.altitude))
        .then(a.speed.total_cmp(&b.speed))
        .then_with(|| a.registration.cmp(&b.registration))
}

/// Group points into per-flight trajectories.
///
/// Points are keyed by (flight_id, origin, destination) and time-sorted. Of
/// several points sharing a timestamp only the first in sort order is kept,
/// so the result does not depend on input row order. A gap longer than
/// `max_gap` seconds starts a new segment; segments with fewer than
/// `min_points` points are dropped.
pub fn assemble_trajectories(points: &[TrackPoint], min_points: usize, max_gap: f64) -> Vec<Trajectory> {
    let mut groups: BTreeMap<(&str, &str, &str), Vec<&TrackPoint>> = BTreeMap::new();
    for p in points {
        groups.entry((&p.flight_id, &p.origin, &p.destination)).or_default().push(p);
    }
    let mut out = Vec::new();
    for ((id, o, d), mut pts) in groups {
        pts.sort_by(|a, b| point_order(a, b));
        pts.dedup_by(|b, a| a.timestamp == b.timestamp);
        let mut segment: Vec<TrackPoint> = Vec::new();
        let mut flush = |seg: &mut Vec<TrackPoint>| {
            if seg.len() >= min_points.max(1) {
                out.push(Trajectory { flight_id: id.to_string(), od_pair: (o.to_string(), d.to_string()), points: std::mem::take(seg) });
            } else {
                seg.clear();
            }
        };
        for p in pts {
            if let Some(last) = segment.last()
                && p.timestamp - last.timestamp > max_gap
            {
                flush(&mut segment);
            }
            segment.push(p.clone());
        }
        flush(&mut segment);
    }
    out
}

/// Cumulative great-circle arc length along the points, in NM.
pub fn arc_lengths(points: &[LatLon]) -> Vec<f64> {
    let mut acc = Vec::with_capacity(points.len());
    let mut s = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            s += great_circle_nm(points[i - 1], *p);
        }
        acc.push(s);
    }
    acc
}

/// Resample `values` (one per vertex) at `m` equal arc-length fractions.
pub(crate) fn resample_along(arc: &[f64], m: usize, value: impl Fn(usize) -> f64) -> Vec<f64> {
    let total = *arc.last().unwrap();
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for i in 0..m {
        if i == m - 1 {
            out.push(value(arc.len() - 1));
            break;
        }
        let target = total * i as f64 / (m - 1) as f64;
        while seg + 2 < arc.len() && arc[seg + 1] < target {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let f = if len > 0.0 { ((target - arc[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(value(seg) + f * (value(seg + 1) - value(seg)));
    }
    out
}

/// Resample to `m` points equally spaced in arc length. Returns
/// `(lat1, lon1, ..., lat_m, lon_m)`.
pub fn resample_trajectory(traj: &Trajectory, m: usize) -> Result<Vec<f64>> {
    let (lat, lon, _) = resample_with_time(traj, m)?;
    Ok(lat.iter().zip(&lon).flat_map(|(a, b)| [*a, *b]).collect())
}

/// Like [`resample_trajectory`] but also returns minutes elapsed since the
/// first point at each resampled vertex.
pub fn resample_with_time(traj: &Trajectory, m: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if m < 2 {
        return Err(Error::Param(format!("resample count {m} < 2")));
    }
    if traj.points.len() < 2 {
        return Err(Error::InsufficientData(format!("trajectory {} has fewer than 2 points", traj.flight_id)));
    }
    let pos: Vec<LatLon> = traj.points.iter().map(TrackPoint::position).collect();
    let arc = arc_lengths(&pos);
    if *arc.last().unwrap() <= 0.0 {
        return Err(Error::DegenerateTrajectory(traj.flight_id.clone()));
    }
    let t0 = traj.points[0].timestamp;
    let lat = resample_along(&arc, m, |i| pos[i].lat);
    let lon = resample_along(&arc, m, |i| pos[i].lon);
    let time = resample_along(&arc, m, |i| (traj.points[i].timestamp - t0) / 60.0);
    Ok((lat, lon, time))
}

/// Chain flights of one aircraft. A chain breaks when the next origin is not
/// the previous destination or when the flights overlap in time.
pub fn build_itineraries(records: &[FlightRecord]) -> Result<Vec<Itinerary>> {
    let mut by_reg: BTreeMap<&str, Vec<&FlightRecord>> = BTreeMap::new();
    for r in records {
        by_reg.entry(&r.registration).or_default().push(r);
    }
    let mut dups = Vec::new();
    for (reg, fl) in by_reg.iter_mut() {
        fl.sort_by(|a, b| a.sched_dep.total_cmp(&b.sched_dep).then_with(|| a.flight_id.cmp(&b.flight_id)));
        for w in fl.windows(2) {
            if w[0].sched_dep == w[1].sched_dep {
                dups.push(format!("({reg}, {})", w[0].sched_dep));
            }
        }
    }
    if !dups.is_empty() {
        dups.dedup();
        return Err(Error::Ambiguous(dups));
    }
    let mut out = Vec::new();
    for (reg, fl) in by_reg {
        let mut cur: Vec<FlightRecord> = Vec::new();
        for f in fl {
            if let Some(prev) = cur.last()
                && (prev.destination != f.origin || prev.sched_arr > f.sched_dep)
            {
                out.push(Itinerary { registration: reg.to_string(), flights: std::mem::take(&mut cur) });
            }
            cur.push(f.clone());
        }
        if !cur.is_empty() {
            out.push(Itinerary { registration: reg.to_string(), flights: cur });
        }
    }
    Ok(out)
}
