//! On-disk formats: edge lists, attribute matrices, labels, splits,
//! checkpoints, and exported scores/embeddings.
//!
//! All text formats are line-oriented UTF-8; lines starting with `#` are
//! comments unless they carry a directive (`#nodes N`, `#shape N D`).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{build_graph, rescale_attributes, AttributedGraph, BuildReport};
use crate::labels::{GroundTruth, Label, LabelSplit};
use crate::model::{Activation, GcnModel};
use crate::objective::Center;
use crate::real::{Precision, Real};
use crate::trainer::TrainConfig;
use crate::datagen::binarize_labels;

pub const EDGES_FILE: &str = "edges.tsv";
pub const DENSE_ATTRIBUTES_FILE: &str = "attributes.csv";
pub const SPARSE_ATTRIBUTES_FILE: &str = "attributes.triplets";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLIT_FILE: &str = "split.json";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_usize(path: &Path, line: usize, field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("{what} '{field}' is not a non-negative integer")))
}

fn parse_finite(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("{what} '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{what} '{field}' is not finite")));
    }
    Ok(v)
}

/// Content lines as `(1-based line number, trimmed text)`, comments and blanks skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Value of a `#key ...` directive line, if present.
fn directive<'a>(text: &'a str, key: &str) -> Option<(usize, &'a str)> {
    text.lines().enumerate().find_map(|(i, l)| {
        let rest = l.trim().strip_prefix('#')?.trim_start();
        let rest = rest.strip_prefix(key)?;
        rest.starts_with(char::is_whitespace).then(|| (i + 1, rest.trim()))
    })
}

/// Parsed edge file.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    /// From a `#nodes N` directive, when present.
    pub declared_nodes: Option<usize>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl EdgeList {
    /// Smallest node count consistent with the edges.
    pub fn min_nodes(&self) -> usize {
        self.edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0)
    }
}

/// `u<TAB>v[<TAB>weight]` per line.
pub fn read_edges(path: &Path) -> Result<EdgeList> {
    let text = read_text(path)?;
    let declared_nodes = match directive(&text, "nodes") {
        Some((line, v)) => Some(parse_usize(path, line, v, "node count")?),
        None => None,
    };
    let mut edges = Vec::new();
    for (line, l) in content_lines(&text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(parse_err(path, line, format!("expected 'u v [weight]', got '{l}'")));
        }
        let u = parse_usize(path, line, fields[0], "node id")?;
        let v = parse_usize(path, line, fields[1], "node id")?;
        let w = match fields.get(2) {
            Some(f) => parse_finite(path, line, f, "weight")?,
            None => 1.0,
        };
        if w <= 0.0 {
            return Err(parse_err(path, line, format!("weight {w} must be positive")));
        }
        edges.push((u, v, w));
    }
    Ok(EdgeList {
        declared_nodes,
        edges,
    })
}

pub fn write_edges(path: &Path, graph: &AttributedGraph) -> Result<()> {
    let mut out = format!("#nodes {}\n", graph.n_nodes());
    for e in graph.edges() {
        if e.weight == 1.0 {
            writeln!(out, "{}\t{}", e.u, e.v).unwrap();
        } else {
            writeln!(out, "{}\t{}\t{}", e.u, e.v, e.weight).unwrap();
        }
    }
    write_text(path, &out)
}

/// Header-less CSV, one row per node.
pub fn read_dense_attributes(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in content_lines(&text) {
        let row = l
            .split(',')
            .map(|f| parse_finite(path, line, f, "attribute"))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    line,
                    format!("row has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    let d = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(Array2::from_shape_vec((rows.len(), d), flat).expect("rectangular rows"))
}

pub fn write_dense_attributes(path: &Path, x: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in x.rows() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    write_text(path, &out)
}

/// `node,dim,value` triplets under a `#shape N D` directive; absent entries are zero.
pub fn read_sparse_attributes(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let (line, shape) = directive(&text, "shape")
        .ok_or_else(|| parse_err(path, 1, "sparse attribute file needs a '#shape N D' line"))?;
    let dims: Vec<&str> = shape.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(parse_err(path, line, format!("bad shape directive '{shape}'")));
    }
    let n = parse_usize(path, line, dims[0], "row count")?;
    let d = parse_usize(path, line, dims[1], "column count")?;
    let mut x = Array2::zeros((n, d));
    let mut seen = std::collections::HashSet::new();
    for (line, l) in content_lines(&text) {
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(path, line, format!("expected 'node,dim,value', got '{l}'")));
        }
        let r = parse_usize(path, line, fields[0], "node id")?;
        let c = parse_usize(path, line, fields[1], "dimension")?;
        let v = parse_finite(path, line, fields[2], "value")?;
        if r >= n || c >= d {
            return Err(parse_err(path, line, format!("entry ({r}, {c}) outside shape {n}x{d}")));
        }
        if !seen.insert((r, c)) {
            return Err(parse_err(path, line, format!("entry ({r}, {c}) given twice")));
        }
        x[[r, c]] = v;
    }
    Ok(x)
}

pub fn write_sparse_attributes(path: &Path, x: &Array2<f64>) -> Result<()> {
    let mut out = format!("#shape {} {}\n", x.nrows(), x.ncols());
    for ((r, c), &v) in x.indexed_iter() {
        if v != 0.0 {
            writeln!(out, "{r},{c},{v}").unwrap();
        }
    }
    write_text(path, &out)
}

/// Dense CSV or sparse triplets, chosen by the presence of a `#shape` directive.
pub fn read_attributes(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    if directive(&text, "shape").is_some() {
        read_sparse_attributes(path)
    } else {
        read_dense_attributes(path)
    }
}

/// `node,label` with labels `anomalous` or `normal`, covering nodes `0..N` exactly once.
pub fn read_labels(path: &Path) -> Result<GroundTruth> {
    let text = read_text(path)?;
    let mut map: BTreeMap<usize, Label> = BTreeMap::new();
    for (line, l) in content_lines(&text) {
        if line == 1 && l == "node,label" {
            continue;
        }
        let (node, label) = l
            .split_once(',')
            .ok_or_else(|| parse_err(path, line, format!("expected 'node,label', got '{l}'")))?;
        let node = parse_usize(path, line, node, "node id")?;
        let label: Label = label.trim().parse().map_err(|e: String| parse_err(path, line, e))?;
        if map.insert(node, label).is_some() {
            return Err(parse_err(path, line, format!("node {node} labeled twice")));
        }
    }
    let n = map.len();
    if let Some((&last, _)) = map.iter().next_back() {
        if last + 1 != n {
            return Err(Error::Invalid(format!(
                "{}: labels must cover nodes 0..{n} without gaps (largest id {last})",
                path.display()
            )));
        }
    }
    Ok(GroundTruth(map.into_values().collect()))
}

pub fn write_labels(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut out = String::from("node,label\n");
    for (i, l) in truth.0.iter().enumerate() {
        writeln!(out, "{i},{l}").unwrap();
    }
    write_text(path, &out)
}

pub fn read_split(path: &Path) -> Result<LabelSplit> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

pub fn write_split(path: &Path, split: &LabelSplit) -> Result<()> {
    let mut text = serde_json::to_string(split)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// File locations of one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundlePaths {
    pub edges: PathBuf,
    /// `None` means the graph carries no attributes.
    pub attributes: Option<PathBuf>,
    pub labels: PathBuf,
    pub split: Option<PathBuf>,
}

impl BundlePaths {
    /// Standard file names inside `dir`; optional files are included when present.
    pub fn in_dir(dir: &Path) -> Self {
        let dense = dir.join(DENSE_ATTRIBUTES_FILE);
        let sparse = dir.join(SPARSE_ATTRIBUTES_FILE);
        let attributes = if dense.exists() {
            Some(dense)
        } else if sparse.exists() {
            Some(sparse)
        } else {
            None
        };
        let split = Some(dir.join(SPLIT_FILE)).filter(|p| p.exists());
        BundlePaths {
            edges: dir.join(EDGES_FILE),
            attributes,
            labels: dir.join(LABELS_FILE),
            split,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub graph: AttributedGraph,
    pub truth: GroundTruth,
    pub split: Option<LabelSplit>,
    pub report: BuildReport,
}

/// Parse and cross-check a dataset. Attributes are min-max rescaled when `rescale` is set.
pub fn load_bundle(paths: &BundlePaths, rescale: bool) -> Result<Bundle> {
    let edges = read_edges(&paths.edges)?;
    let truth = read_labels(&paths.labels)?;
    let n = truth.len();
    if let Some(declared) = edges.declared_nodes {
        if declared != n {
            return Err(Error::Invalid(format!(
                "edge file declares {declared} nodes but the label file has {n}"
            )));
        }
    }
    if edges.min_nodes() > n {
        return Err(Error::Invalid(format!(
            "edge file references node {} but the label file has only {n} nodes",
            edges.min_nodes() - 1
        )));
    }
    let x = match &paths.attributes {
        Some(p) => read_attributes(p)?,
        None => Array2::zeros((n, 0)),
    };
    if x.nrows() != n {
        let edge_nodes = edges.declared_nodes.unwrap_or(n);
        return Err(Error::Invalid(format!(
            "attribute file has {} rows but the graph has {edge_nodes} nodes",
            x.nrows()
        )));
    }
    let x = if rescale { rescale_attributes(&x)? } else { x };
    let (graph, report) = build_graph(n, edges.edges, x)?;
    let split = match &paths.split {
        Some(p) => {
            let s = read_split(p)?;
            s.validate(n, true)?;
            Some(s)
        }
        None => None,
    };
    Ok(Bundle {
        graph,
        truth,
        split,
        report,
    })
}

/// Write a bundle directory with dense attributes.
pub fn write_bundle(dir: &Path, graph: &AttributedGraph, truth: &GroundTruth, split: Option<&LabelSplit>) -> Result<BundlePaths> {
    let paths = BundlePaths {
        edges: dir.join(EDGES_FILE),
        attributes: (graph.n_attributes() > 0).then(|| dir.join(DENSE_ATTRIBUTES_FILE)),
        labels: dir.join(LABELS_FILE),
        split: split.map(|_| dir.join(SPLIT_FILE)),
    };
    write_edges(&paths.edges, graph)?;
    if let Some(p) = &paths.attributes {
        write_dense_attributes(p, graph.attributes())?;
    }
    write_labels(&paths.labels, truth)?;
    if let (Some(p), Some(s)) = (&paths.split, split) {
        write_split(p, s)?;
    }
    Ok(paths)
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

/// `node,score[,truth]` with a header row.
pub fn write_scores(path: &Path, ids: &[usize], scores: &[f64], truth: Option<&GroundTruth>) -> Result<()> {
    let mut out = String::from(if truth.is_some() { "node,score,truth\n" } else { "node,score\n" });
    for (&i, s) in ids.iter().zip(scores) {
        match truth {
            Some(t) => writeln!(out, "{i},{s},{}", t.get(i)).unwrap(),
            None => writeln!(out, "{i},{s}").unwrap(),
        }
    }
    write_text(path, &out)
}

/// Read back a score file as `(node, score)` pairs.
pub fn read_scores(path: &Path) -> Result<Vec<(usize, f64)>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (line, l) in content_lines(&text) {
        if line == 1 && l.starts_with("node,") {
            continue;
        }
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() < 2 {
            return Err(parse_err(path, line, format!("expected 'node,score', got '{l}'")));
        }
        out.push((
            parse_usize(path, line, fields[0], "node id")?,
            parse_finite(path, line, fields[1], "score")?,
        ));
    }
    Ok(out)
}

/// `node,h_1,...,h_K` with a header row.
pub fn write_embeddings<T: Real>(path: &Path, h: &Array2<T>) -> Result<()> {
    let mut out = String::from("node");
    for k in 1..=h.ncols() {
        write!(out, ",h_{k}").unwrap();
    }
    out.push('\n');
    for (i, row) in h.rows().into_iter().enumerate() {
        write!(out, "{i}").unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    write_text(path, &out)
}

// ---------------------------------------------------------------------------
// checkpoints

const CHECKPOINT_MAGIC: &[u8; 8] = b"GCNADCKP";
pub const CHECKPOINT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    layer_dims: Vec<usize>,
    final_activation: Activation,
    precision: Precision,
    center_guard_engaged: bool,
    config: TrainConfig,
}

/// Everything needed to score nodes again: weights, center, and the config that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T: Real = f64> {
    pub model: GcnModel<T>,
    pub center: Center<T>,
    pub config: TrainConfig,
}

/// Binary container:
///
/// ```text
/// magic "GCNADCKP" | version u32 | precision u8 | header_len u32 | header JSON
/// | weights (row-major, little endian) | center | SHA-256 of all preceding bytes
/// ```
pub fn encode_checkpoint<T: Real>(model: &GcnModel<T>, center: &Center<T>, config: &TrainConfig) -> Result<Vec<u8>> {
    if center.dim() != model.embedding_dim() {
        return Err(Error::Shape(format!(
            "center has {} entries but embeddings have width {}",
            center.dim(),
            model.embedding_dim()
        )));
    }
    let header = CheckpointHeader {
        layer_dims: model.layer_dims().to_vec(),
        final_activation: model.final_activation(),
        precision: T::PRECISION,
        center_guard_engaged: center.guard_engaged(),
        config: config.clone(),
    };
    let header = serde_json::to_vec(&header)?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.push(T::PRECISION.tag());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for w in model.weights() {
        for &v in w.iter() {
            v.write_le(&mut out);
        }
    }
    for &v in center.values().iter() {
        v.write_le(&mut out);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

/// Precision tag of an encoded checkpoint, after verifying its checksum.
pub fn checkpoint_precision(bytes: &[u8]) -> Result<Precision> {
    let body = verify_checksum(bytes)?;
    parse_preamble(body).map(|(p, _)| p)
}

fn verify_checksum(bytes: &[u8]) -> Result<&[u8]> {
    if bytes.len() < CHECKPOINT_MAGIC.len() + 9 + DIGEST_LEN {
        return Err(Error::Checkpoint(format!(
            "checksum missing: file is only {} bytes (truncated?)",
            bytes.len()
        )));
    }
    let (body, digest) = bytes.split_at(bytes.len() - DIGEST_LEN);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("checksum mismatch (file truncated or corrupted)".into()));
    }
    Ok(body)
}

fn parse_preamble(body: &[u8]) -> Result<(Precision, &[u8])> {
    if &body[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let precision = Precision::from_tag(body[12])
        .ok_or_else(|| Error::Checkpoint(format!("unknown precision tag {}", body[12])))?;
    Ok((precision, &body[13..]))
}

pub fn decode_checkpoint<T: Real>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    let body = verify_checksum(bytes)?;
    let (precision, rest) = parse_preamble(body)?;
    if precision != T::PRECISION {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {precision} weights but {} was requested; refusing to convert",
            T::PRECISION
        )));
    }
    let short = || Error::Checkpoint("payload shorter than its header describes".into());
    if rest.len() < 4 {
        return Err(short());
    }
    let header_len = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
    let rest = &rest[4..];
    let header: CheckpointHeader = serde_json::from_slice(rest.get(..header_len).ok_or_else(short)?)?;
    let mut data = &rest[header_len..];

    let mut take = |count: usize| -> Result<Vec<T>> {
        let len = count * T::BYTES;
        let chunk = data.get(..len).ok_or_else(short)?;
        data = &data[len..];
        Ok(chunk.chunks_exact(T::BYTES).map(T::read_le).collect())
    };
    let mut weights = Vec::new();
    for w in header.layer_dims.windows(2) {
        let values = take(w[0] * w[1])?;
        weights.push(Array2::from_shape_vec((w[0], w[1]), values).expect("sized"));
    }
    let k = *header.layer_dims.last().ok_or_else(short)?;
    let center = Array1::from_vec(take(k)?);
    if !data.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", data.len())));
    }
    let model = GcnModel::from_weights(weights, header.final_activation)?;
    Ok(Checkpoint {
        model,
        center: Center::from_parts(center, header.center_guard_engaged),
        config: header.config,
    })
}

pub fn save_checkpoint<T: Real>(path: &Path, model: &GcnModel<T>, center: &Center<T>, config: &TrainConfig) -> Result<()> {
    let bytes = encode_checkpoint(model, center, config)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Checkpoint<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| match e {
        Error::Checkpoint(msg) => Error::Checkpoint(format!("{}: {msg}", path.display())),
        other => other,
    })
}

// ---------------------------------------------------------------------------
// citation-network converter

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionReport {
    pub n_nodes: usize,
    pub n_attributes: usize,
    pub n_edges: usize,
    pub n_classes: usize,
    pub anomalous_class: String,
    pub anomaly_rate: f64,
    pub dangling_citations: usize,
    pub self_citations: usize,
    pub duplicate_citations: usize,
}

/// Convert the common raw citation layout into a bundle.
///
/// `content` lines are `<paper id> <attr_1> ... <attr_D> <class>`; `cites` lines
/// are `<cited id> <citing id>`. Paper ids are remapped to dense ids in order of
/// appearance. Citations to papers absent from `content` are dropped and
/// counted. The smallest class becomes the anomalous one.
pub fn convert_citation(content: &Path, cites: &Path, out_dir: &Path) -> Result<ConversionReport> {
    let text = read_text(content)?;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut original: Vec<String> = Vec::new();
    let mut classes: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in content_lines(&text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(parse_err(content, line, "expected '<id> <attributes...> <class>'"));
        }
        let id = fields[0].to_string();
        if ids.insert(id.clone(), original.len()).is_some() {
            return Err(parse_err(content, line, format!("paper '{id}' listed twice")));
        }
        let attrs = fields[1..fields.len() - 1]
            .iter()
            .map(|f| parse_finite(content, line, f, "attribute"))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != attrs.len() {
                return Err(parse_err(
                    content,
                    line,
                    format!("{} attributes, expected {}", attrs.len(), first.len()),
                ));
            }
        }
        rows.push(attrs);
        classes.push(fields[fields.len() - 1].to_string());
        original.push(id);
    }
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let x = Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect()).expect("rectangular");

    let text = read_text(cites)?;
    let mut raw = Vec::new();
    let mut dangling = 0;
    for (line, l) in content_lines(&text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(cites, line, format!("expected '<cited> <citing>', got '{l}'")));
        }
        match (ids.get(fields[0]), ids.get(fields[1])) {
            (Some(&u), Some(&v)) => raw.push((u, v, 1.0)),
            _ => dangling += 1,
        }
    }
    let (graph, report) = build_graph(n, raw, x)?;
    let (truth, anomalous_class) = binarize_labels(&classes)?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_edges(&out_dir.join(EDGES_FILE), &graph)?;
    write_sparse_attributes(&out_dir.join(SPARSE_ATTRIBUTES_FILE), graph.attributes())?;
    write_labels(&out_dir.join(LABELS_FILE), &truth)?;
    let mut map = String::from("node,original_id,class\n");
    for (i, (id, class)) in original.iter().zip(&classes).enumerate() {
        writeln!(map, "{i},{id},{class}").unwrap();
    }
    write_text(&out_dir.join("nodes.csv"), &map)?;

    let mut class_set: Vec<&String> = classes.iter().collect();
    class_set.sort();
    class_set.dedup();
    Ok(ConversionReport {
        n_nodes: n,
        n_attributes: d,
        n_edges: graph.n_edges(),
        n_classes: class_set.len(),
        anomalous_class,
        anomaly_rate: truth.anomaly_rate(),
        dangling_citations: dangling,
        self_citations: report.self_loops_dropped,
        duplicate_citations: report.duplicates_merged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_model;
    use ndarray::array;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn minimal_bundle_loads() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), EDGES_FILE, "# toy\n0\t1\n");
        write(dir.path(), DENSE_ATTRIBUTES_FILE, "0.5\n2.0\n");
        write(dir.path(), LABELS_FILE, "node,label\n0,normal\n1,anomalous\n");
        let b = load_bundle(&BundlePaths::in_dir(dir.path()), true).unwrap();
        assert_eq!(b.graph.n_nodes(), 2);
        assert_eq!(b.graph.n_edges(), 1);
        assert_eq!(b.graph.attributes(), &array![[0.0], [1.0]]);
        assert_eq!(b.truth.n_anomalous(), 1);
        assert!(b.split.is_none());
    }

    #[test]
    fn attribute_row_mismatch_names_both_counts() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), EDGES_FILE, "#nodes 2\n0\t1\n");
        write(dir.path(), DENSE_ATTRIBUTES_FILE, "1\n2\n3\n");
        write(dir.path(), LABELS_FILE, "0,normal\n1,anomalous\n");
        let err = load_bundle(&BundlePaths::in_dir(dir.path()), true).unwrap_err().to_string();
        assert!(err.contains('3') && err.contains('2'), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.tsv", "0\t1\n# c\n0\tx\n");
        let err = read_edges(&p).unwrap_err().to_string();
        assert!(err.contains(":3:"), "{err}");
        let p = write(dir.path(), "l.csv", "0,normal\n1,weird\n");
        let err = read_labels(&p).unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("weird"), "{err}");
        let p = write(dir.path(), "a.csv", "1,2\nNaN,1\n");
        assert!(read_dense_attributes(&p).is_err());
        let p = write(dir.path(), "a2.csv", "1,2\ninf,1\n");
        assert!(read_dense_attributes(&p).is_err());
        let p = write(dir.path(), "w.tsv", "0\t1\t-2\n");
        assert!(read_edges(&p).is_err());
    }

    #[test]
    fn weighted_edges_and_directive() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.tsv", "#nodes 5\n0\t1\t2.5\n3 4\n");
        let e = read_edges(&p).unwrap();
        assert_eq!(e.declared_nodes, Some(5));
        assert_eq!(e.edges, vec![(0, 1, 2.5), (3, 4, 1.0)]);
    }

    #[test]
    fn labels_need_full_coverage() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "l.csv", "0,normal\n2,normal\n");
        assert!(read_labels(&p).is_err());
        let p = write(dir.path(), "l2.csv", "0,normal\n0,anomalous\n");
        assert!(read_labels(&p).is_err());
    }

    #[test]
    fn checkpoint_round_trip_and_corruption() {
        let model: GcnModel = init_model(&[3, 4, 2], 1, Activation::Identity).unwrap();
        let center = Center::new(array![0.25, -1.5], 1e-3).unwrap();
        let cfg = TrainConfig::default();
        let bytes = encode_checkpoint(&model, &center, &cfg).unwrap();
        let back: Checkpoint = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.model.weights(), model.weights());
        assert_eq!(back.center, center);
        assert_eq!(back.config, cfg);

        let err = decode_checkpoint::<f64>(&bytes[..bytes.len() - 10]).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
        let mut flipped = bytes.clone();
        flipped[30] ^= 1;
        assert!(decode_checkpoint::<f64>(&flipped).unwrap_err().to_string().contains("checksum"));
        assert!(decode_checkpoint::<f64>(&bytes[..10]).unwrap_err().to_string().contains("checksum"));

        let err = decode_checkpoint::<f32>(&bytes).unwrap_err();
        assert!(err.to_string().contains("f64"), "{err}");
        assert_eq!(checkpoint_precision(&bytes).unwrap(), Precision::F64);
    }

    #[test]
    fn f32_checkpoint_refused_in_f64_context() {
        let model: GcnModel<f32> = init_model(&[2, 2], 1, Activation::Relu).unwrap();
        let center = Center::new(array![1.0f32, 1.0], 1e-3).unwrap();
        let cfg = TrainConfig {
            precision: Precision::F32,
            ..Default::default()
        };
        let bytes = encode_checkpoint(&model, &center, &cfg).unwrap();
        let err = decode_checkpoint::<f64>(&bytes).unwrap_err().to_string();
        assert!(err.contains("f32") && err.contains("refusing"), "{err}");
        let back: Checkpoint<f32> = decode_checkpoint(&bytes).unwrap();
        assert_eq!(back.model.weights(), model.weights());
    }

    #[test]
    fn citation_conversion() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(
            dir.path(),
            "toy.content",
            "p10\t1\t0\tA\np20\t0\t1\tA\np30\t1\t1\tB\np40\t0\t0\tA\n",
        );
        let cites = write(
            dir.path(),
            "toy.cites",
            "p10\tp20\np20\tp10\np30\tp40\np30\tp30\np99\tp10\n",
        );
        let out = dir.path().join("bundle");
        let rep = convert_citation(&content, &cites, &out).unwrap();
        assert_eq!(rep.n_nodes, 4);
        assert_eq!(rep.n_edges, 2);
        assert_eq!(rep.anomalous_class, "B");
        assert_eq!(rep.dangling_citations, 1);
        assert_eq!(rep.self_citations, 1);
        assert_eq!(rep.duplicate_citations, 1);
        let b = load_bundle(&BundlePaths::in_dir(&out), true).unwrap();
        assert_eq!(b.truth.get(2), Label::Anomalous);
        assert_eq!(b.graph.attributes()[[2, 1]], 1.0);
    }
}
