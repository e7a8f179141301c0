//! Run manifests: what was run, what it wrote, and the digests to check it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use merw::io::{write_atomic, Table};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Kind};
use crate::error::{LabError, LabResult};
use crate::experiments::{execute, Artifacts};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    /// Canonical config text; parses back to the same run.
    pub config: String,
    pub wall_time_seconds: f64,
    pub files: Vec<FileRecord>,
    pub metrics: BTreeMap<String, f64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn records(art: &Artifacts) -> Vec<FileRecord> {
    art.files
        .iter()
        .map(|(name, bytes)| FileRecord { path: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 })
        .collect()
}

impl RunManifest {
    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))
    }

    pub fn experiment(&self) -> LabResult<ExperimentConfig> {
        Ok(ExperimentConfig::parse(&self.config, Path::new("."))?)
    }
}

/// Executes `cfg`, writes every artifact into `out` and the manifest last.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>) -> LabResult<(PathBuf, RunManifest)> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.clone());
    let started = Instant::now();
    let art = execute(cfg)?;
    let elapsed = started.elapsed().as_secs_f64();
    std::fs::create_dir_all(&dir).map_err(|e| LabError::Config(format!("{}: {e}", dir.display())))?;
    for (name, bytes) in &art.files {
        write_atomic(&dir.join(name), bytes)?;
    }
    let canonical = cfg.canonical();
    let manifest = RunManifest {
        tool: "merw-lab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        kind: cfg.kind.to_string(),
        seed: cfg.seed,
        config_hash: sha256_hex(canonical.as_bytes()),
        config: canonical,
        wall_time_seconds: elapsed,
        files: records(&art),
        metrics: art.metrics.iter().filter(|(_, v)| v.is_finite()).map(|(k, v)| (k.clone(), *v)).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = dir.join(MANIFEST_NAME);
    write_atomic(&path, json.as_bytes())?;
    Ok((path, manifest))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub files_checked: usize,
    /// Files whose on-disk bytes no longer match the manifest.
    pub stale: Vec<String>,
    /// Files a fresh run produces differently.
    pub nondeterministic: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.stale.is_empty() && self.nondeterministic.is_empty()
    }
}

/// Re-hashes the files on disk and re-runs the experiment in memory.
pub fn verify(manifest_path: &Path) -> LabResult<VerifyReport> {
    let m = RunManifest::load(manifest_path)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let cfg = m.experiment()?;
    if sha256_hex(m.config.as_bytes()) != m.config_hash {
        return Err(LabError::Determinism("config text does not match its hash".into()));
    }
    let mut stale = Vec::new();
    for f in &m.files {
        match std::fs::read(dir.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
            _ => stale.push(f.path.clone()),
        }
    }
    let fresh = records(&execute(&cfg)?);
    let mut nondeterministic = Vec::new();
    let by_name: BTreeMap<&str, &FileRecord> = fresh.iter().map(|f| (f.path.as_str(), f)).collect();
    for f in &m.files {
        if by_name.get(f.path.as_str()).map(|r| &r.sha256) != Some(&f.sha256) {
            nondeterministic.push(f.path.clone());
        }
    }
    for f in &fresh {
        if !m.files.iter().any(|g| g.path == f.path) {
            nondeterministic.push(f.path.clone());
        }
    }
    Ok(VerifyReport { files_checked: m.files.len(), stale, nondeterministic })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDelta {
    pub name: String,
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub kind: String,
    pub metrics: Vec<MetricDelta>,
    /// L¹ distance between matching numeric field columns.
    pub field_distances: Vec<(String, f64)>,
    /// `right / left` for every mass-like metric present in both.
    pub mass_ratios: Vec<(String, f64)>,
}

impl CompareReport {
    pub fn identical(&self) -> bool {
        self.metrics.iter().all(|m| m.delta == Some(0.0)) && self.field_distances.iter().all(|f| f.1 == 0.0)
    }

    pub fn render(&self) -> String {
        let mut s = format!("kind {}\n", self.kind);
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.10e}"));
        for m in &self.metrics {
            s.push_str(&format!("metric {:<36} {:>18} {:>18} delta {}\n", m.name, show(m.left), show(m.right), show(m.delta)));
        }
        for (f, d) in &self.field_distances {
            s.push_str(&format!("field  {f:<36} l1 {d:.10e}\n"));
        }
        for (k, r) in &self.mass_ratios {
            s.push_str(&format!("ratio  {k:<36} {r:.10e}\n"));
        }
        s
    }
}

fn field_column(t: &Table) -> Option<&'static str> {
    ["value", "pi", "probability", "current"].into_iter().find(|c| t.column(c).is_some())
}

pub fn compare(left: &Path, right: &Path) -> LabResult<CompareReport> {
    let a = RunManifest::load(left)?;
    let b = RunManifest::load(right)?;
    if a.kind != b.kind {
        return Err(LabError::KindMismatch(a.kind, b.kind));
    }
    let names: std::collections::BTreeSet<&String> = a.metrics.keys().chain(b.metrics.keys()).collect();
    let metrics = names
        .into_iter()
        .map(|k| {
            let (l, r) = (a.metrics.get(k).copied(), b.metrics.get(k).copied());
            MetricDelta { name: k.clone(), left: l, right: r, delta: l.zip(r).map(|(x, y)| y - x) }
        })
        .collect();
    let mut field_distances = Vec::new();
    let (da, db) = (left.parent().unwrap_or(Path::new(".")), right.parent().unwrap_or(Path::new(".")));
    for f in a.files.iter().filter(|f| f.path.ends_with(".csv")) {
        if !b.files.iter().any(|g| g.path == f.path) {
            continue;
        }
        let load = |d: &Path| -> LabResult<Table> {
            let text = std::fs::read_to_string(d.join(&f.path))?;
            Ok(Table::from_csv(&text)?)
        };
        let (ta, tb) = (load(da)?, load(db)?);
        let Some(col) = field_column(&ta) else { continue };
        if tb.column(col).is_none() || ta.rows.len() != tb.rows.len() {
            continue;
        }
        let (va, vb) = (ta.numeric(col)?, tb.numeric(col)?);
        let d: f64 = va.iter().zip(&vb).filter(|(x, y)| x.is_finite() && y.is_finite()).map(|(x, y)| (x - y).abs()).sum();
        field_distances.push((f.path.clone(), d));
    }
    let mut mass_ratios = Vec::new();
    let ma: Vec<(&String, f64)> = a.metrics.iter().filter(|(k, _)| k.contains("mass")).map(|(k, v)| (k, *v)).collect();
    for (k, v) in &ma {
        if let Some(w) = b.metrics.get(*k) {
            mass_ratios.push(((*k).clone(), w / v));
        }
    }
    // A GRW run against a MERW run reports their walk-specific masses.
    if let (Some(g), Some(m)) = (a.metrics.get("grw_mass_in_region"), b.metrics.get("merw_mass_in_region")) {
        mass_ratios.push(("merw_over_grw_mass_in_region".into(), m / g));
    }
    Ok(CompareReport { kind: a.kind, metrics, field_distances, mass_ratios })
}

/// All kinds, for callers that sweep every pipeline.
pub fn kinds() -> &'static [Kind] {
    &Kind::ALL
}
