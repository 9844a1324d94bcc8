//! Plain-text formats.
//!
//! Dataset files are CSV: `#` lines carry free-form provenance, the first
//! data line is `dim,num_classes,count`, and each following line is
//! `x_1,…,x_dim,label`. Unlabelled clouds use the same layout with the
//! label column omitted and `num_classes` set to 0. Floats are written with
//! the shortest representation that round-trips.
//!
//! Network checkpoints start with `toponet-network 1`, then a `meta` line,
//! then per layer a `layer <activation> <in> <out>` line followed by `out`
//! weight rows and one bias row, all whitespace-separated.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cloud::PointCloud;
use crate::data::LabeledPointSet;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{Activation, Layer, Network};

pub const CHECKPOINT_HEADER: &str = "toponet-network 1";

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite value {s:?}")));
    }
    Ok(v)
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(line, format!("not a nonnegative integer: {s:?}")))
}

fn write_row(out: &mut String, values: &[f64], sep: &str) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        write!(out, "{v}").expect("write to string");
    }
}

fn write_comments(out: &mut String, comments: &[String]) {
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
}

pub fn dataset_to_string(data: &LabeledPointSet, comments: &[String]) -> String {
    let mut out = String::new();
    write_comments(&mut out, comments);
    writeln!(out, "{},{},{}", data.dim(), data.num_classes, data.len()).expect("write to string");
    for (p, l) in data.points.iter().zip(&data.labels) {
        write_row(&mut out, p, ",");
        writeln!(out, ",{l}").expect("write to string");
    }
    out
}

pub fn cloud_to_string(cloud: &PointCloud, comments: &[String]) -> String {
    let mut out = String::new();
    write_comments(&mut out, comments);
    writeln!(out, "{},0,{}", cloud.dim(), cloud.len()).expect("write to string");
    for p in cloud.iter() {
        write_row(&mut out, p, ",");
        out.push('\n');
    }
    out
}

struct Table {
    dim: usize,
    num_classes: usize,
    rows: Vec<(Vec<f64>, Option<usize>)>,
    comments: Vec<String>,
}

fn parse_table(text: &str) -> Result<Table> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut rows = Vec::new();
    let mut comments = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            comments.push(c.trim().to_string());
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let Some((dim, classes, _)) = header else {
            if fields.len() != 3 {
                return Err(parse_err(lineno, "expected header `dim,num_classes,count`"));
            }
            let h = (
                parse_usize(fields[0], lineno)?,
                parse_usize(fields[1], lineno)?,
                parse_usize(fields[2], lineno)?,
            );
            if h.0 == 0 {
                return Err(parse_err(lineno, "dimension must be positive"));
            }
            header = Some(h);
            continue;
        };
        let labelled = classes > 0;
        let expected = dim + usize::from(labelled);
        if fields.len() != expected {
            return Err(parse_err(
                lineno,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let coords = fields[..dim]
            .iter()
            .map(|f| parse_f64(f, lineno))
            .collect::<Result<Vec<_>>>()?;
        let label = if labelled {
            let l = parse_usize(fields[dim], lineno)?;
            if l >= classes {
                return Err(parse_err(lineno, format!("label {l} out of range for {classes} classes")));
            }
            Some(l)
        } else {
            None
        };
        rows.push((coords, label));
    }
    let (dim, num_classes, count) = header.ok_or_else(|| parse_err(0, "missing header"))?;
    if rows.len() != count {
        return Err(parse_err(0, format!("header announces {count} rows, found {}", rows.len())));
    }
    Ok(Table {
        dim,
        num_classes,
        rows,
        comments,
    })
}

/// Parses a dataset file; `shape_tag` is taken from a `shape=<tag>` comment when present.
pub fn parse_dataset(text: &str) -> Result<LabeledPointSet> {
    let table = parse_table(text)?;
    if table.num_classes == 0 {
        return Err(parse_err(0, "file holds an unlabelled cloud, not a dataset"));
    }
    let mut points = PointCloud::with_capacity(table.dim, table.rows.len());
    let mut labels = Vec::with_capacity(table.rows.len());
    for (p, l) in &table.rows {
        points.push(p)?;
        labels.push(l.expect("labelled table"));
    }
    let tag = table
        .comments
        .iter()
        .find_map(|c| c.strip_prefix("shape="))
        .unwrap_or("dataset")
        .to_string();
    LabeledPointSet::new(points, labels, table.num_classes, tag)
}

pub fn parse_cloud(text: &str) -> Result<PointCloud> {
    let table = parse_table(text)?;
    let mut points = PointCloud::with_capacity(table.dim, table.rows.len());
    for (p, _) in &table.rows {
        points.push(p)?;
    }
    Ok(points)
}

pub fn write_dataset(path: &Path, data: &LabeledPointSet, comments: &[String]) -> Result<()> {
    fs::write(path, dataset_to_string(data, comments))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<LabeledPointSet> {
    parse_dataset(&fs::read_to_string(path)?)
}

pub fn write_cloud(path: &Path, cloud: &PointCloud, comments: &[String]) -> Result<()> {
    fs::write(path, cloud_to_string(cloud, comments))?;
    Ok(())
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    parse_cloud(&fs::read_to_string(path)?)
}

pub fn network_to_string(net: &Network) -> String {
    let mut out = String::new();
    writeln!(out, "{CHECKPOINT_HEADER}").expect("write to string");
    writeln!(out, "meta seed {} epochs {}", net.seed, net.epochs_run).expect("write to string");
    for layer in &net.layers {
        writeln!(
            out,
            "layer {} {} {}",
            layer.activation.name(),
            layer.in_dim(),
            layer.out_dim()
        )
        .expect("write to string");
        for r in 0..layer.out_dim() {
            write_row(&mut out, layer.weights.row(r), " ");
            out.push('\n');
        }
        write_row(&mut out, &layer.bias, " ");
        out.push('\n');
    }
    out
}

pub fn parse_network(text: &str) -> Result<Network> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (n, first) = lines.next().ok_or_else(|| parse_err(0, "empty checkpoint"))?;
    if first != CHECKPOINT_HEADER {
        return Err(parse_err(n, format!("expected header `{CHECKPOINT_HEADER}`")));
    }
    let (n, meta) = lines.next().ok_or_else(|| parse_err(n, "missing meta line"))?;
    let m: Vec<&str> = meta.split_whitespace().collect();
    if m.len() != 5 || m[0] != "meta" || m[1] != "seed" || m[3] != "epochs" {
        return Err(parse_err(n, "expected `meta seed <u64> epochs <n>`"));
    }
    let seed: u64 = m[2].parse().map_err(|_| parse_err(n, "bad seed"))?;
    let epochs_run = parse_usize(m[4], n)?;

    let row = |line: (usize, &str), len: usize| -> Result<Vec<f64>> {
        let v = line
            .1
            .split_whitespace()
            .map(|f| parse_f64(f, line.0))
            .collect::<Result<Vec<_>>>()?;
        if v.len() != len {
            return Err(parse_err(line.0, format!("expected {len} values, found {}", v.len())));
        }
        Ok(v)
    };

    let mut layers = Vec::new();
    while let Some((n, head)) = lines.next() {
        let h: Vec<&str> = head.split_whitespace().collect();
        if h.len() != 4 || h[0] != "layer" {
            return Err(parse_err(n, "expected `layer <activation> <in> <out>`"));
        }
        let act = Activation::from_name(h[1]).ok_or_else(|| parse_err(n, format!("unknown activation {:?}", h[1])))?;
        let (in_dim, out_dim) = (parse_usize(h[2], n)?, parse_usize(h[3], n)?);
        let mut data = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..out_dim {
            let line = lines.next().ok_or_else(|| parse_err(n, "truncated weight rows"))?;
            data.extend(row(line, in_dim)?);
        }
        let line = lines.next().ok_or_else(|| parse_err(n, "missing bias row"))?;
        let bias = row(line, out_dim)?;
        layers.push(Layer::new(Matrix::from_row_major(out_dim, in_dim, data)?, bias, act)?);
    }
    let mut net = Network::from_layers(layers)?;
    net.seed = seed;
    net.epochs_run = epochs_run;
    Ok(net)
}

pub fn write_network(path: &Path, net: &Network) -> Result<()> {
    fs::write(path, network_to_string(net))?;
    Ok(())
}

pub fn read_network(path: &Path) -> Result<Network> {
    parse_network(&fs::read_to_string(path)?)
}
