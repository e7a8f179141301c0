//! Text formats: graph files, CSV tables, PGM heatmaps and SVG line plots.
//!
//! Every number written to CSV carries 17 significant digits, enough to
//! round-trip any `f64`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{GraphKind, WeightedGraph};
use crate::multiparticle::FockBasis;
use crate::spectral::EigenPair;
use crate::timedep::ObservableTrace;
use crate::walk::{EntropyReport, StochasticMatrix};

/// `d.dddddddddddddddde±x`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn graph_to_string(g: &WeightedGraph) -> String {
    let mut s = format!("merw-graph v1 n={} kind={}\n", g.n(), g.kind().name());
    for (i, j, w) in g.edges() {
        // Shortest decimal that parses back to the same bits.
        let _ = writeln!(s, "{i} {j} {w:?}");
    }
    s
}

fn perr(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, column, message: message.into() }
}

/// Inverse of [`graph_to_string`]. Blank lines and `#` comments are skipped.
pub fn parse_graph(text: &str) -> Result<WeightedGraph> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('#')
    });
    let Some((hl, header)) = lines.next() else {
        return Err(perr(1, 1, "empty graph file"));
    };
    let mut n = None;
    let mut kind = None;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("merw-graph") || fields.next() != Some("v1") {
        return Err(perr(hl + 1, 1, "expected header `merw-graph v1 n=<N> kind=<kind>`"));
    }
    for f in fields {
        let col = column_of(header, f);
        match f.split_once('=') {
            Some(("n", v)) => n = Some(v.parse::<usize>().map_err(|_| perr(hl + 1, col, format!("bad vertex count `{v}`")))?),
            Some(("kind", v)) => kind = Some(GraphKind::from_name(v).ok_or_else(|| perr(hl + 1, col, format!("unknown kind `{v}`")))?),
            _ => return Err(perr(hl + 1, col, format!("unexpected header field `{f}`"))),
        }
    }
    let n = n.ok_or_else(|| perr(hl + 1, 1, "header lacks n="))?;
    let kind = kind.ok_or_else(|| perr(hl + 1, 1, "header lacks kind="))?;
    let mut edges = Vec::new();
    for (ln, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(perr(ln + 1, 1, format!("expected `i j w`, found {} fields", toks.len())));
        }
        let idx = |k: usize| -> Result<usize> {
            let v: usize = toks[k].parse().map_err(|_| perr(ln + 1, column_of(line, toks[k]), format!("bad index `{}`", toks[k])))?;
            if v >= n {
                return Err(perr(ln + 1, column_of(line, toks[k]), format!("index {v} out of range for n={n}")));
            }
            Ok(v)
        };
        let (i, j) = (idx(0)?, idx(1)?);
        let w: f64 = toks[2].parse().map_err(|_| perr(ln + 1, column_of(line, toks[2]), format!("bad weight `{}`", toks[2])))?;
        edges.push((i, j, w));
    }
    WeightedGraph::new(n, kind, &edges)
}

fn column_of(line: &str, token: &str) -> usize {
    token.as_ptr() as usize - line.as_ptr() as usize + 1
}

pub fn read_graph(path: &Path) -> Result<WeightedGraph> {
    parse_graph(&std::fs::read_to_string(path)?)
}

pub fn write_graph(path: &Path, g: &WeightedGraph) -> Result<()> {
    std::fs::write(path, graph_to_string(g))?;
    Ok(())
}

/// A header plus string rows; numbers go through [`fmt17`].
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Column parsed as numbers; empty cells become NaN.
    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name).ok_or_else(|| Error::InvalidParameter(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                if row[c].is_empty() {
                    return Ok(f64::NAN);
                }
                row[c].parse().map_err(|_| perr(r + 2, c + 1, format!("not a number: `{}`", row[c])))
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let conv = |e: csv::Error| {
            let (line, column) = e.position().map_or((0, 0), |p| (p.line() as usize, 1));
            perr(line, column, e.to_string())
        };
        let header = r.headers().map_err(conv)?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec.map_err(conv)?.iter().map(String::from).collect());
        }
        Ok(Table { header, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }
}

pub fn eigenpair_table(pair: &EigenPair) -> Table {
    let mut t = Table::new(&["vertex", "psi", "phi", "pi"]);
    for (i, (p, f)) in pair.psi.iter().zip(&pair.phi).enumerate() {
        t.push(vec![i.to_string(), fmt17(*p), fmt17(*f), fmt17(p * f)]);
    }
    t
}

pub fn transition_table(s: &StochasticMatrix) -> Table {
    let mut t = Table::new(&["i", "j", "s_ij"]);
    for i in 0..s.n() {
        for (j, v) in s.matrix.row(i) {
            t.push(vec![i.to_string(), j.to_string(), fmt17(v)]);
        }
    }
    t
}

pub fn stationary_table(pi: &[f64]) -> Table {
    let mut t = Table::new(&["vertex", "pi"]);
    for (i, p) in pi.iter().enumerate() {
        t.push(vec![i.to_string(), fmt17(*p)]);
    }
    t
}

/// `metric,value` rows.
pub fn metric_table(metrics: &[(&str, f64)]) -> Table {
    let mut t = Table::new(&["metric", "value"]);
    for (k, v) in metrics {
        t.push(vec![k.to_string(), fmt17(*v)]);
    }
    t
}

pub fn entropy_table(prefix: &str, r: &EntropyReport) -> Vec<(String, f64)> {
    vec![
        (format!("{prefix}entropy_rate"), r.entropy_rate),
        (format!("{prefix}choice_entropy"), r.choice_entropy),
        (format!("{prefix}max_rate"), r.max_rate),
        (format!("{prefix}mean_energy"), r.mean_energy),
        (format!("{prefix}free_energy"), r.free_energy),
    ]
}

/// `x,value` for `width == 0`, else `x,y,value` with row-major `values`.
pub fn field_table(values: &[f64], width: usize) -> Table {
    if width == 0 {
        let mut t = Table::new(&["x", "value"]);
        for (i, v) in values.iter().enumerate() {
            t.push(vec![i.to_string(), fmt17(*v)]);
        }
        return t;
    }
    let mut t = Table::new(&["x", "y", "value"]);
    for (i, v) in values.iter().enumerate() {
        t.push(vec![(i % width).to_string(), (i / width).to_string(), fmt17(*v)]);
    }
    t
}

/// One row per time slice; the gap column is blank where not sampled.
pub fn trace_table(trace: &ObservableTrace, gaps: &[(usize, f64)]) -> Table {
    let mut t = Table::new(&["t", "mean_x", "mean_p", "mean_gradV", "var_x", "p_dag_p", "l1_adiabatic_gap"]);
    let mut gi = 0;
    for k in 0..trace.mean_x.len() {
        let gap = if gi < gaps.len() && gaps[gi].0 == k {
            gi += 1;
            fmt17(gaps[gi - 1].1)
        } else {
            String::new()
        };
        t.push(vec![
            fmt17(trace.time[k]),
            fmt17(trace.mean_x[k]),
            fmt17(trace.mean_p[k]),
            fmt17(trace.mean_grad_v[k]),
            fmt17(trace.var_x[k]),
            fmt17(trace.p_dag_p[k]),
            gap,
        ]);
    }
    t
}

/// Occupations joined by `;`, amplitude and its square.
pub fn fock_table(basis: &FockBasis, offset: usize, amplitudes: &[f64]) -> Table {
    let mut t = Table::new(&["occupation_vector", "amplitude", "probability"]);
    for (k, a) in amplitudes.iter().enumerate() {
        let occ = basis.unrank(offset + k);
        let label = occ.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";");
        t.push(vec![label, fmt17(*a), fmt17(a * a)]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    /// `log10`, with nonpositive values clamped to the smallest positive one.
    Log,
}

/// Plain PGM (`P2`) with maxval 65535, row-major, mapped from the data range.
pub fn pgm(width: usize, height: usize, values: &[f64], scale: Scale) -> Result<String> {
    if width * height != values.len() || width == 0 {
        return Err(Error::DimensionMismatch { expected: width * height, got: values.len() });
    }
    let mapped: Vec<f64> = match scale {
        Scale::Linear => values.to_vec(),
        Scale::Log => {
            let floor = values.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
            let floor = if floor.is_finite() { floor } else { 1.0 };
            values.iter().map(|v| v.max(floor).log10()).collect()
        }
    };
    let lo = mapped.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = mapped.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut s = format!("P2\n{width} {height}\n65535\n");
    for row in mapped.chunks(width) {
        let line: Vec<String> = row.iter().map(|v| (((v - lo) / span) * 65535.0).round().to_string()).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    Ok(s)
}

/// Parsed plain PGM.
#[derive(Debug, Clone, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub pixels: Vec<u32>,
}

pub fn parse_pgm(text: &str) -> Result<Pgm> {
    let mut tokens = text.lines().flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace());
    if tokens.next() != Some("P2") {
        return Err(perr(1, 1, "not a plain PGM"));
    }
    let mut num = |what: &str| -> Result<u32> {
        tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| perr(0, 0, format!("missing {what}")))
    };
    let width = num("width")? as usize;
    let height = num("height")? as usize;
    let maxval = num("maxval")?;
    let mut pixels = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let p = num("pixel")?;
        if p > maxval {
            return Err(perr(0, 0, format!("pixel {p} exceeds maxval")));
        }
        pixels.push(p);
    }
    Ok(Pgm { width, height, maxval, pixels })
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl LinePlot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        LinePlot { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), log_y: false, series: Vec::new() }
    }

    pub fn log_y(mut self, on: bool) -> Self {
        self.log_y = on;
        self
    }

    pub fn series(mut self, label: &str, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series { label: label.into(), points });
        self
    }

    /// Points with nonpositive `y` are dropped on a log axis.
    pub fn to_svg(&self) -> String {
        let (w, h, m) = (640.0, 400.0, 56.0);
        let ty = |y: f64| if self.log_y { y.log10() } else { y };
        let pts: Vec<Vec<(f64, f64)>> = self
            .series
            .iter()
            .map(|s| s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite() && (!self.log_y || p.1 > 0.0)).map(|&(x, y)| (x, ty(y))).collect())
            .collect();
        let all = pts.iter().flatten();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !(x1 > x0) {
            x0 -= 0.5;
            x1 = x0 + 1.0;
        }
        if !(y1 > y0) {
            y0 = if y0.is_finite() { y0 - 0.5 } else { 0.0 };
            y1 = y0 + 1.0;
        }
        let px = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let py = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, w / 2.0, escape(&self.title));
        let _ = writeln!(
            s,
            r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
            h - m,
            w - m
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let ylab = if self.log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
            let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle" font-size="11">{xv:.3}</text>"#, px(xv), h - m + 16.0);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="11">{ylab}</text>"#, m - 4.0, py(yv) + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, h - 12.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            escape(&self.y_label)
        );
        for (k, (series, p)) in self.series.iter().zip(&pts).enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            if !p.is_empty() {
                let d: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, d.join(" "));
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-size="12" fill="{colour}">{}</text>"#,
                w - m - 120.0,
                m + 16.0 * (k as f64 + 1.0),
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
