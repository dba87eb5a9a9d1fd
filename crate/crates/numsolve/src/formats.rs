//! Text formats: topology edge lists, flow lists, routing matrices, trace
//! CSV and flat `key = value` documents.

use std::collections::HashMap;
use std::fmt::Write as _;

use numsolve_core::solvers::TraceRecord;
use numsolve_core::{Flow, RoutingMatrix, Topology, TopologyError};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

fn syntax(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, message: message.into() }
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split_whitespace().collect()))
        }
    })
}

/// Decimal rendering with 17 significant digits, which round-trips every
/// `f64`.
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Parses `<src> <dst> <capacity>` lines. Node names may be arbitrary
/// tokens; they are numbered in order of first appearance.
pub fn parse_topology(text: &str) -> Result<Topology, FormatError> {
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut links = Vec::new();
    for (line, fields) in content_lines(text) {
        let [src, dst, cap] = fields[..] else {
            return Err(syntax(line, format!("expected `<src> <dst> <capacity>`, found {} fields", fields.len())));
        };
        let capacity: f64 =
            cap.parse().map_err(|_| syntax(line, format!("capacity `{cap}` is not a number")))?;
        if !(capacity.is_finite() && capacity >= 0.0) {
            return Err(syntax(line, format!("capacity {capacity} must be finite and nonnegative")));
        }
        if src == dst {
            return Err(syntax(line, format!("self-loop on node `{src}`")));
        }
        let mut id = |name: &str| {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let (s, d) = (id(src), id(dst));
        links.push((s, d, capacity));
    }
    Ok(Topology::with_names(names, &links)?)
}

/// Parses `<src> <dst>` lines against the topology's node names.
pub fn parse_flows(text: &str, topology: &Topology) -> Result<Vec<Flow>, FormatError> {
    let mut flows = Vec::new();
    for (line, fields) in content_lines(text) {
        let [src, dst] = fields[..] else {
            return Err(syntax(line, format!("expected `<src> <dst>`, found {} fields", fields.len())));
        };
        let node = |name: &str| {
            topology.node_by_name(name).ok_or_else(|| syntax(line, format!("unknown node `{name}`")))
        };
        let (s, d) = (node(src)?, node(dst)?);
        if s == d {
            return Err(syntax(line, "flow source equals destination"));
        }
        flows.push(Flow { id: flows.len(), src: s, dst: d });
    }
    Ok(flows)
}

/// Parses a header `E d` followed by `<e> <s> <value>` triples.
pub fn parse_routing_matrix(text: &str) -> Result<RoutingMatrix, FormatError> {
    let mut lines = content_lines(text);
    let (line, header) = lines.next().ok_or_else(|| syntax(1, "missing `E d` header"))?;
    let [rows, cols] = header[..] else {
        return Err(syntax(line, "header must be `E d`"));
    };
    let count = |tok: &str| tok.parse::<usize>().map_err(|_| syntax(line, format!("`{tok}` is not a count")));
    let (rows, cols) = (count(rows)?, count(cols)?);
    let mut entries = Vec::new();
    for (line, fields) in lines {
        let [e, s, v] = fields[..] else {
            return Err(syntax(line, "expected `<e> <s> <value>`"));
        };
        let e = e.parse().map_err(|_| syntax(line, format!("link index `{e}` is not an integer")))?;
        let s = s.parse().map_err(|_| syntax(line, format!("flow index `{s}` is not an integer")))?;
        let v = v.parse().map_err(|_| syntax(line, format!("value `{v}` is not a number")))?;
        entries.push((e, s, v));
    }
    Ok(RoutingMatrix::from_entries(rows, cols, &entries)?)
}

pub const TRACE_HEADER: &str = "iter,objective,error,utility,exact_penalty,restart,elapsed_ms";

/// Trace CSV with the error column measured against `reference`.
pub fn trace_csv(records: &[TraceRecord], reference: f64) -> String {
    let mut out = String::with_capacity(records.len() * 120);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.objective),
            fmt_f64(r.objective - reference),
            fmt_f64(r.utility),
            fmt_f64(r.exact_penalty),
            u8::from(r.restart),
            fmt_f64(r.elapsed_ms),
        );
    }
    out
}

/// Ordered `key = value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut kv = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| syntax(i + 1, "expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(syntax(i + 1, "empty key"));
            }
            if kv.get(key).is_some() {
                return Err(syntax(i + 1, format!("key `{key}` given twice")));
            }
            kv.push(key, value.trim());
        }
        Ok(kv)
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) {
        self.push(key, fmt_f64(value));
    }

    pub fn extend(&mut self, other: &KeyValues) {
        self.entries.extend(other.entries.iter().cloned());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
