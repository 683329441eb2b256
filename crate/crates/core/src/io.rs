//! Reading and writing networks, opinion states, schedules and trajectories.
//!
//! Network files number nodes from 1. Everything else (schedules,
//! trajectories, reports, DOT output) uses 0-based node indices.

use std::fmt::{Display, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::network::InfluenceNetwork;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkFormat {
    /// Dense row-major matrix. The first line holds `n`, optionally followed
    /// by `,normalize=true`; then `n` lines of `n` comma-separated weights.
    Csv,
    /// `{"n": .., "normalize": .., "edges": [[i, j, "p/q"], ..], "labels": [..]}`.
    Json,
}

impl FromStr for NetworkFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Parse(format!("unknown network format `{other}`"))),
        }
    }
}

impl NetworkFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

fn weight<W: Scalar>(token: &str) -> Result<W> {
    W::parse_exact(token.trim()).ok_or_else(|| Error::Parse(format!("`{}` is not an exact number", token.trim())))
}

pub fn parse_network_csv<W: Scalar>(text: &str) -> Result<InfluenceNetwork<W>> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Parse("empty network file".into()))?;
    let mut fields = header.split(',').map(str::trim);
    let n: usize = fields
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("header `{header}` must start with the node count")))?;
    let mut normalize = false;
    for f in fields {
        match f.replace(' ', "").as_str() {
            "normalize=true" => normalize = true,
            "normalize=false" => normalize = false,
            other => return Err(Error::Parse(format!("unknown header field `{other}`"))),
        }
    }
    let matrix: Vec<Vec<W>> = lines
        .map(|l| l.split(',').map(weight).collect::<Result<Vec<W>>>())
        .collect::<Result<_>>()?;
    if matrix.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: matrix.len(),
        });
    }
    InfluenceNetwork::from_dense(matrix, normalize)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeListIn {
    n: usize,
    #[serde(default)]
    normalize: bool,
    edges: Vec<(usize, usize, Value)>,
    #[serde(default)]
    labels: Option<Vec<String>>,
}

#[derive(Serialize)]
struct EdgeListOut {
    n: usize,
    normalize: bool,
    edges: Vec<(usize, usize, String)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

fn json_weight<W: Scalar>(v: &Value) -> Result<W> {
    match v {
        Value::String(s) => weight(s),
        Value::Number(num) => weight(&num.to_string()),
        other => Err(Error::Parse(format!("weight {other} must be a string or a number"))),
    }
}

pub fn parse_network_json<W: Scalar>(text: &str) -> Result<InfluenceNetwork<W>> {
    let doc: EdgeListIn = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut rows: Vec<Vec<(usize, W)>> = vec![Vec::new(); doc.n];
    for (i, j, w) in &doc.edges {
        for &v in [i, j] {
            if v == 0 || v > doc.n {
                return Err(Error::InvalidNode { node: v, n: doc.n });
            }
        }
        rows[i - 1].push((j - 1, json_weight(w)?));
    }
    let net = InfluenceNetwork::from_rows(rows, doc.normalize)?;
    match doc.labels {
        Some(labels) => net.with_labels(labels),
        None => Ok(net),
    }
}

pub fn parse_network<W: Scalar>(text: &str, format: NetworkFormat) -> Result<InfluenceNetwork<W>> {
    match format {
        NetworkFormat::Csv => parse_network_csv(text),
        NetworkFormat::Json => parse_network_json(text),
    }
}

/// Loads a network; without an explicit format the file extension decides.
pub fn load_network<W: Scalar>(path: &Path, format: Option<NetworkFormat>) -> Result<InfluenceNetwork<W>> {
    let format = format
        .or_else(|| NetworkFormat::from_path(path))
        .ok_or_else(|| Error::Parse(format!("cannot infer the format of {}", path.display())))?;
    parse_network(&fs::read_to_string(path)?, format)
}

pub fn network_to_json<W: Scalar>(net: &InfluenceNetwork<W>) -> String {
    let doc = EdgeListOut {
        n: net.n(),
        normalize: false,
        edges: net.edges().map(|(i, j, w)| (i + 1, j + 1, w.to_string())).collect(),
        labels: net.labels().map(<[String]>::to_vec),
    };
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}

pub fn network_to_csv<W: Scalar>(net: &InfluenceNetwork<W>) -> String {
    let mut out = format!("{}\n", net.n());
    for i in 0..net.n() {
        let row: Vec<String> = (0..net.n()).map(|j| net.weight(i, j).to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// DOT digraph; every edge carries its weight and whether it is decisive.
pub fn network_to_dot<W: Scalar>(net: &InfluenceNetwork<W>) -> String {
    let decisive = net.decisive_subgraph();
    let mut out = String::from("digraph influence {\n");
    if let Some(labels) = net.labels() {
        for (i, l) in labels.iter().enumerate() {
            let _ = writeln!(out, "  {i} [label=\"{}\"];", l.replace('"', "\\\""));
        }
    }
    for (i, j, w) in net.edges() {
        let _ = writeln!(
            out,
            "  {i} -> {j} [weight=\"{w}\", decisive={}];",
            decisive.is_decisive_edge(i, j)
        );
    }
    out.push_str("}\n");
    out
}

pub fn trajectory_to_csv<O: Display>(traj: &Trajectory<O>) -> String {
    let mut out = String::from("time,node,old,new\n");
    for s in &traj.steps {
        let _ = writeln!(out, "{},{},{},{}", s.time, s.node, s.old, s.new);
    }
    out
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty())
}

/// Opinion values from a JSON array (strings or numbers) or from comma or
/// whitespace separated tokens.
pub fn parse_opinions<W: Scalar>(text: &str) -> Result<Vec<W>> {
    let trimmed = text.trim();
    if trimmed.starts_with('[') {
        let values: Vec<Value> = serde_json::from_str(trimmed).map_err(|e| Error::Parse(e.to_string()))?;
        values.iter().map(json_weight).collect()
    } else {
        tokens(trimmed).map(weight).collect()
    }
}

/// A node sequence from a JSON array, a JSON object with a `sequence` field
/// (as in certificate files), or plain tokens.
pub fn parse_sequence(text: &str) -> Result<Vec<usize>> {
    let trimmed = text.trim();
    let parse_err = |e: serde_json::Error| Error::Parse(e.to_string());
    if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(parse_err)
    } else if trimmed.starts_with('{') {
        #[derive(Deserialize)]
        struct WithSequence {
            sequence: Vec<usize>,
        }
        Ok(serde_json::from_str::<WithSequence>(trimmed).map_err(parse_err)?.sequence)
    } else {
        tokens(trimmed)
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("`{t}` is not a node index"))))
            .collect()
    }
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Parse(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}
