//! Run configuration and artifact plumbing.
//!
//! A config file is flat `key = value` text; `#` starts a comment. Every
//! artifact records the hash of the effective configuration that produced
//! it, so downstream steps can tell when inputs were built under different
//! settings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde::de::DeserializeOwned;
use sha2::{Digest, Sha256};

use crate::congestion::HotMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

/// Keys understood by the pipeline with their defaults. Keys without a
/// default must be set when a command needs them.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("coverage", "0.9"),
    ("corridor_nm", "30"),
    ("default_k", "2"),
    ("days", "1"),
    ("dt", "15"),
    ("fixtures", "bundled"),
    ("grid_nm", "20"),
    ("hot", "top:75"),
    ("jump_nm", "0"),
    ("max_gap_s", "900"),
    ("max_iter", "50"),
    ("min_points", "10"),
    ("min_traffic", "1"),
    ("minpt", "5"),
    ("m", "96"),
    ("n", "120"),
    ("omega", "1,1,2"),
    ("point_eps_nm", "50"),
    ("point_minpt", "2"),
    ("point_params", "tracks"),
    ("resample", "50"),
    ("seed", "1"),
    ("t0_hour", "4"),
    ("tz_offset", "8"),
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format(format!("config line {}: expected key = value", i + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Format(format!("config line {}: empty key", i + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Path(format!("{}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.to_string(), value.into());
    }

    /// Value set explicitly, ignoring defaults.
    pub fn explicit(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.explicit(key).or_else(|| DEFAULTS.iter().find(|(k, _)| *k == key).map(|(_, v)| *v))
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Param(format!("config key '{key}' is required")))
    }

    pub fn parse_key<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| Error::Param(format!("config key '{key}': cannot parse '{raw}'")))
    }

    pub fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None | Some("") => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| Error::Param(format!("config key '{key}': cannot parse '{raw}'"))),
        }
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        let p = PathBuf::from(self.require(key)?);
        if !p.exists() {
            return Err(Error::Path(format!("{key}: {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn omega(&self) -> Result<[f64; 3]> {
        let raw = self.require("omega")?;
        let v: Vec<f64> = raw
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Param(format!("omega '{raw}' is not three numbers")))?;
        match v.as_slice() {
            [a, b, c] if v.iter().all(|x| *x >= 0.0) => Ok([*a, *b, *c]),
            _ => Err(Error::Param(format!("omega '{raw}' must be three non-negative numbers"))),
        }
    }

    /// `top:N` or `threshold:X`.
    pub fn hot_mode(&self) -> Result<HotMode> {
        let raw = self.require("hot")?;
        let bad = || Error::Param(format!("hot '{raw}' must be top:N or threshold:X"));
        match raw.split_once(':').ok_or_else(bad)? {
            ("top", n) => Ok(HotMode::TopN(n.trim().parse().map_err(|_| bad())?)),
            ("threshold", x) => Ok(HotMode::Threshold(x.trim().parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }

    /// Effective settings: defaults overlaid with explicit values.
    pub fn effective(&self) -> BTreeMap<String, String> {
        let mut m: BTreeMap<String, String> = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        m.extend(self.values.clone());
        m
    }

    pub fn canonical(&self) -> String {
        self.effective().iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k}={v}");
            s
        })
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let d = Sha256::digest(self.canonical().as_bytes());
        d.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    kind: &'a str,
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// JSON artifact with `kind` and `config_hash` fields next to the body.
pub fn write_artifact<T: Serialize>(path: &Path, kind: &str, hash: &str, body: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Envelope { kind, config_hash: hash, body })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Path(format!("{}: {e}", path.display())))
}

/// Read an artifact, returning its body and recorded hash.
pub fn read_artifact<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<(T, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Path(format!("{}: {e}", path.display())))?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let got = v.get("kind").and_then(|k| k.as_str()).unwrap_or("");
    if got != kind {
        return Err(Error::Format(format!("{}: expected a {kind} artifact, found '{got}'", path.display())));
    }
    let hash = v.get("config_hash").and_then(|h| h.as_str()).unwrap_or("").to_string();
    Ok((serde_json::from_value(v)?, hash))
}

/// Delimited table with a leading `# config_hash=` comment line.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self, hash: &str) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(format!("# config_hash={hash}\n{}", String::from_utf8_lossy(&body)))
    }

    pub fn write(&self, path: &Path, hash: &str) -> Result<()> {
        std::fs::write(path, self.render(hash)?).map_err(|e| Error::Path(format!("{}: {e}", path.display())))
    }
}

/// Fixed-precision number for tables; empty for absent values.
pub fn num(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.6}"))
}
