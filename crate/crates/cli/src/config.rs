//! Flat `key = value` experiment files with `[section]` headers.
//!
//! ```text
//! [experiment]
//! kind = lattice-1d
//! seed = 7
//! output = runs/l1d
//!
//! [params]
//! side = 1000
//! defect_probability = 0.01
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use merw::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    WalkCompare,
    Lattice1d,
    Lattice2d,
    Conduction,
    TimedepSwitch,
    TwoParticle,
    BoseHubbard,
    Refine,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::WalkCompare,
        Kind::Lattice1d,
        Kind::Lattice2d,
        Kind::Conduction,
        Kind::TimedepSwitch,
        Kind::TwoParticle,
        Kind::BoseHubbard,
        Kind::Refine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::WalkCompare => "walk-compare",
            Kind::Lattice1d => "lattice-1d",
            Kind::Lattice2d => "lattice-2d",
            Kind::Conduction => "conduction",
            Kind::TimedepSwitch => "timedep-switch",
            Kind::TwoParticle => "twoparticle",
            Kind::BoseHubbard => "bosehubbard",
            Kind::Refine => "refine",
        }
    }

    /// Keys accepted in `[params]`.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Kind::WalkCompare => &["graph", "beta"],
            Kind::Lattice1d | Kind::Lattice2d => {
                &["dimension", "side", "defect_probability", "steps", "beta", "alpha", "mode", "defect_potential", "walk"]
            }
            Kind::Conduction => &["side", "defect_probability"],
            Kind::TimedepSwitch => &["sites", "steps", "switch_start", "switch_end", "gap_stride", "beta", "alpha"],
            Kind::TwoParticle => &["side", "particles", "repulsion", "beta", "rule"],
            Kind::BoseHubbard => &["graph", "t_hop", "U", "n_max", "particles", "sector"],
            Kind::Refine => &["potential", "lo", "hi", "sizes", "beta", "alpha"],
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment kind `{s}`"))
    }
}

/// A value together with where it was written.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
    pub column: usize,
    pub key_column: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    /// Resolved against the config file's directory.
    pub output: PathBuf,
    pub params: BTreeMap<String, Entry>,
    /// Directory relative paths in `params` are resolved against.
    pub base_dir: PathBuf,
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> merw::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &dir)
    }

    pub fn parse(text: &str, base_dir: &Path) -> merw::Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<String> = None;
        let mut saw_content = false;
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let body = raw.split('#').next().unwrap_or("");
            let trimmed = body.trim();
            if trimmed.is_empty() {
                continue;
            }
            saw_content = true;
            let indent = body.len() - body.trim_start().len();
            if let Some(rest) = trimmed.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| perr(line, indent + 1, "unterminated section header"))?
                    .trim();
                if name != "experiment" && name != "params" {
                    return Err(perr(line, indent + 2, format!("unknown section `{name}`")));
                }
                if sections.contains_key(name) {
                    return Err(perr(line, indent + 2, format!("section `{name}` repeated")));
                }
                sections.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(perr(line, indent + 1, "expected `key = value`"));
            };
            let key = k.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(perr(line, indent + 1, format!("bad key `{key}`")));
            }
            let Some(sec) = &current else {
                return Err(perr(line, indent + 1, "key outside any section"));
            };
            let value = v.trim();
            let vcol = k.len() + 1 + (v.len() - v.trim_start().len()) + 1;
            if value.is_empty() {
                return Err(perr(line, vcol, format!("empty value for `{key}`")));
            }
            let map = sections.get_mut(sec).unwrap();
            if map.contains_key(key) {
                return Err(perr(line, indent + 1, format!("duplicate key `{key}`")));
            }
            map.insert(key.to_string(), Entry { value: value.to_string(), line, column: vcol, key_column: indent + 1 });
        }
        if !saw_content {
            return Err(perr(1, 1, "empty config"));
        }
        let mut exp = sections.remove("experiment").ok_or_else(|| perr(1, 1, "missing [experiment] section"))?;
        let params = sections.remove("params").unwrap_or_default();

        let kind_e = exp.remove("kind").ok_or_else(|| perr(1, 1, "[experiment] lacks `kind`"))?;
        let kind: Kind = kind_e.value.parse().map_err(|m: String| perr(kind_e.line, kind_e.column, m))?;
        let seed = match exp.remove("seed") {
            Some(e) => e.value.parse::<u64>().map_err(|_| perr(e.line, e.column, format!("seed `{}` is not a u64", e.value)))?,
            None => 0,
        };
        let output = match exp.remove("output") {
            Some(e) => base_dir.join(&e.value),
            None => base_dir.join(format!("{}-out", kind.name())),
        };
        if let Some((k, e)) = exp.into_iter().next() {
            return Err(perr(e.line, e.key_column, format!("unknown [experiment] key `{k}`")));
        }
        for (k, e) in &params {
            if !kind.keys().contains(&k.as_str()) {
                return Err(perr(e.line, e.key_column, format!("unknown key `{k}` for {}", kind.name())));
            }
        }
        Ok(ExperimentConfig { kind, seed, output, params, base_dir: base_dir.to_path_buf() })
    }

    /// Text that fixes the run: kind, seed and params, sorted, with no
    /// comments or output location. Parses back to the same experiment.
    pub fn canonical(&self) -> String {
        let mut s = format!("[experiment]\nkind = {}\nseed = {}\n", self.kind, self.seed);
        if !self.params.is_empty() {
            s.push_str("\n[params]\n");
            for (k, e) in &self.params {
                let v = if k == "graph" { self.resolve_graph_value(&e.value) } else { e.value.clone() };
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s
    }

    fn resolve_graph_value(&self, v: &str) -> String {
        if v.contains(':') && !Path::new(v).exists() {
            return v.to_string();
        }
        let p = self.base_dir.join(v);
        std::fs::canonicalize(&p).unwrap_or(p).display().to_string()
    }

    pub fn has(&self, key: &str) -> bool {
        self.params.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&Entry> {
        self.params.get(key)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> merw::Result<T> {
        match self.params.get(key) {
            None => Ok(default),
            Some(e) => e.value.parse().map_err(|_| perr(e.line, e.column, format!("cannot read `{key}` from `{}`", e.value))),
        }
    }

    pub fn get_str<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.params.get(key).map_or(default, |e| e.value.as_str())
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str, default: &[T]) -> merw::Result<Vec<T>>
    where
        T: Clone,
    {
        match self.params.get(key) {
            None => Ok(default.to_vec()),
            Some(e) => e
                .value
                .split(',')
                .map(|p| p.trim().parse().map_err(|_| perr(e.line, e.column, format!("cannot read `{key}` item `{}`", p.trim()))))
                .collect(),
        }
    }

    /// Error positioned at `key`'s value.
    pub fn invalid(&self, key: &str, message: impl Into<String>) -> Error {
        match self.params.get(key) {
            Some(e) => perr(e.line, e.column, message),
            None => perr(1, 1, message),
        }
    }
}
