//! File formats for networks.
//!
//! Edge file: one `i<TAB>j` pair per line (any whitespace accepted),
//! 0-based node indices, `#` starts a comment line; a third column (edge
//! weight) is tolerated and ignored. The node count comes from the
//! attribute file, so an empty edge file is a valid edgeless graph.
//!
//! Attribute file, two encodings distinguished by sniffing the first
//! significant line:
//! * sparse triplets: a `n w` header line followed by
//!   `node<TAB>attr_index<TAB>value` lines (`#` comments allowed);
//! * dense CSV: one comma-separated row per node, with an optional
//!   leading header row of attribute names (detected by any field not
//!   parsing as a number, so purely numeric names are not supported).
//!
//! Label file: `node<TAB>k1[,k2,...]` with 0-based class indices, one
//! line per labeled node, `#` comments allowed.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::sparse::SparseRowMatrix;

use super::{AttributedNetwork, LabelMode, Labels};

/// Loads a network from an edge file, an attribute file, and an optional
/// label file.
pub fn load_network(
    edge_path: &Path,
    attr_path: &Path,
    label_path: Option<&Path>,
    mode: LabelMode,
) -> Result<AttributedNetwork> {
    let (attrs, names) = read_attr_file(attr_path)?;
    let n = attrs.nrows();
    let edges = read_edge_file(edge_path, n)?;
    let labels = match label_path {
        Some(p) => Some(load_labels(p, n, mode)?),
        None => None,
    };
    AttributedNetwork::new(edges, attrs, names, labels, mode)
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CoreError::io(path, e))
}

/// Significant lines of a text file: (1-based line number, trimmed text),
/// skipping blanks and `#` comments.
fn significant_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn read_edge_file(path: &Path, n: usize) -> Result<Vec<(u32, u32)>> {
    let text = read_file(path)?;
    let mut edges = Vec::new();
    for (line_no, line) in significant_lines(&text) {
        let mut fields = line.split_whitespace();
        let (a, b) = match (fields.next(), fields.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(CoreError::parse(
                    path,
                    line_no,
                    format!("expected \"i<TAB>j\", got {line:?}"),
                ))
            }
        };
        let parse = |s: &str| -> Result<u32> {
            s.parse::<u32>().map_err(|_| {
                CoreError::parse(path, line_no, format!("{s:?} is not a node index"))
            })
        };
        let (a, b) = (parse(a)?, parse(b)?);
        for v in [a, b] {
            if v as usize >= n {
                return Err(CoreError::parse(
                    path,
                    line_no,
                    format!("node index {v} >= node count {n}"),
                ));
            }
        }
        edges.push((a, b));
    }
    Ok(edges)
}

/// Reads an attribute file, returning the matrix and the column names
/// when the dense encoding carried a header row.
fn read_attr_file(path: &Path) -> Result<(SparseRowMatrix, Option<Vec<String>>)> {
    let text = read_file(path)?;
    let first = significant_lines(&text).next();
    let sparse = match first {
        Some((_, line)) => {
            let fields: Vec<&str> = line.split_whitespace().collect();
            !line.contains(',')
                && fields.len() == 2
                && fields.iter().all(|f| f.parse::<usize>().is_ok())
        }
        None => {
            return Err(CoreError::parse(
                path,
                1,
                "attribute file is empty".to_string(),
            ))
        }
    };
    if sparse {
        read_attrs_sparse(path, &text).map(|m| (m, None))
    } else {
        read_attrs_dense(path, &text)
    }
}

fn read_attrs_sparse(path: &Path, text: &str) -> Result<SparseRowMatrix> {
    let mut lines = significant_lines(text);
    let (header_no, header) = lines.next().expect("caller checked a first line exists");
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|f| f.parse::<usize>().expect("caller checked the header"))
        .collect();
    let (n, w) = (dims[0], dims[1]);
    if w == 0 {
        return Err(CoreError::parse(
            path,
            header_no,
            "attribute width must be at least 1".to_string(),
        ));
    }
    // (col, value, line) per row; sorted later to detect duplicates.
    let mut rows: Vec<Vec<(u32, f64, usize)>> = vec![Vec::new(); n];
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(CoreError::parse(
                path,
                line_no,
                format!("expected \"node<TAB>attr_index<TAB>value\", got {line:?}"),
            ));
        }
        let node: usize = fields[0].parse().map_err(|_| {
            CoreError::parse(path, line_no, format!("{:?} is not a node index", fields[0]))
        })?;
        let attr: usize = fields[1].parse().map_err(|_| {
            CoreError::parse(
                path,
                line_no,
                format!("{:?} is not an attribute index", fields[1]),
            )
        })?;
        let value: f64 = fields[2].parse().map_err(|_| {
            CoreError::parse(path, line_no, format!("{:?} is not a number", fields[2]))
        })?;
        if node >= n {
            return Err(CoreError::parse(
                path,
                line_no,
                format!("node index {node} >= declared node count {n}"),
            ));
        }
        if attr >= w {
            return Err(CoreError::parse(
                path,
                line_no,
                format!("attribute index {attr} >= declared width {w}"),
            ));
        }
        if !value.is_finite() || value < 0.0 {
            return Err(CoreError::parse(
                path,
                line_no,
                format!("attribute values must be finite and nonnegative, got {value}"),
            ));
        }
        if value != 0.0 {
            rows[node].push((attr as u32, value, line_no));
        }
    }
    let mut out = Vec::with_capacity(n);
    for row in rows {
        let mut row = row;
        row.sort_unstable_by_key(|&(j, _, _)| j);
        for pair in row.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(CoreError::parse(
                    path,
                    pair[1].2,
                    format!("duplicate entry for attribute {}", pair[1].0),
                ));
            }
        }
        out.push(row.into_iter().map(|(j, v, _)| (j, v)).collect());
    }
    SparseRowMatrix::from_rows(w, out)
}

fn read_attrs_dense(path: &Path, text: &str) -> Result<(SparseRowMatrix, Option<Vec<String>>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (first_no, first) = match lines.next() {
        Some(x) => x,
        None => return Err(CoreError::parse(path, 1, "attribute file is empty".to_string())),
    };
    let first_fields: Vec<&str> = first.split(',').map(str::trim).collect();
    let w = first_fields.len();
    if w == 0 || (w == 1 && first_fields[0].is_empty()) {
        return Err(CoreError::parse(
            path,
            first_no,
            "attribute rows must have at least one column".to_string(),
        ));
    }
    let header = first_fields.iter().any(|f| f.parse::<f64>().is_err());
    let names = if header {
        Some(first_fields.iter().map(|s| s.to_string()).collect())
    } else {
        None
    };
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::new();
    let data_lines: Vec<(usize, &str)> = if header {
        lines.collect()
    } else {
        std::iter::once((first_no, first)).chain(lines).collect()
    };
    for (line_no, line) in data_lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != w {
            return Err(CoreError::parse(
                path,
                line_no,
                format!("row has {} columns, expected {w}", fields.len()),
            ));
        }
        let mut row = Vec::new();
        for (j, f) in fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                CoreError::parse(path, line_no, format!("{f:?} is not a number"))
            })?;
            if !v.is_finite() || v < 0.0 {
                return Err(CoreError::parse(
                    path,
                    line_no,
                    format!("attribute values must be finite and nonnegative, got {v}"),
                ));
            }
            if v != 0.0 {
                row.push((j as u32, v));
            }
        }
        rows.push(row);
    }
    Ok((SparseRowMatrix::from_rows(w, rows)?, names))
}

/// Reads a label file for a network of `n` nodes. The class count is
/// inferred as one past the highest class index in the file.
pub fn load_labels(path: &Path, n: usize, mode: LabelMode) -> Result<Labels> {
    let text = read_file(path)?;
    let mut assignments: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut max_class = None::<usize>;
    for (line_no, line) in significant_lines(&text) {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(CoreError::parse(
                path,
                line_no,
                format!("expected \"node<TAB>k1[,k2,...]\", got {line:?}"),
            ));
        }
        let node: usize = fields[0].parse().map_err(|_| {
            CoreError::parse(path, line_no, format!("{:?} is not a node index", fields[0]))
        })?;
        if node >= n {
            return Err(CoreError::parse(
                path,
                line_no,
                format!("node index {node} >= node count {n}"),
            ));
        }
        let mut classes = Vec::new();
        for part in fields[1].split(',') {
            let k: usize = part.parse().map_err(|_| {
                CoreError::parse(path, line_no, format!("{part:?} is not a class index"))
            })?;
            classes.push(k);
            max_class = Some(max_class.map_or(k, |m: usize| m.max(k)));
        }
        if mode == LabelMode::Multiclass && classes.len() != 1 {
            return Err(CoreError::parse(
                path,
                line_no,
                format!(
                    "multiclass nodes carry exactly one class, node {node} lists {}",
                    classes.len()
                ),
            ));
        }
        assignments.push((node, classes));
    }
    let c = match max_class {
        Some(m) => m + 1,
        None => {
            return Err(CoreError::parse(
                path,
                1,
                "label file contains no labels".to_string(),
            ))
        }
    };
    Labels::from_assignments(n, c, &assignments, mode)
}

/// Writes a network under `dir` as `<prefix>.edges`, `<prefix>.attrs`
/// (sparse triplet encoding), and `<prefix>.labels` when labels exist.
/// Output is deterministic for a given network.
pub fn write_network_files(dir: &Path, prefix: &str, net: &AttributedNetwork) -> Result<()> {
    let write = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| CoreError::io(&path, e))?;
        f.write_all(body.as_bytes())
            .map_err(|e| CoreError::io(&path, e))
    };

    let mut edges = String::new();
    for &(a, b) in net.edges() {
        edges.push_str(&format!("{a}\t{b}\n"));
    }
    write(format!("{prefix}.edges"), edges)?;

    let mut attrs = format!("{} {}\n", net.node_count(), net.attr_dim());
    for (i, row) in net.attrs().iter_rows().enumerate() {
        for &(j, v) in row {
            attrs.push_str(&format!("{i}\t{j}\t{v}\n"));
        }
    }
    write(format!("{prefix}.attrs"), attrs)?;

    if let Some(labels) = net.labels() {
        let mut body = String::new();
        for i in 0..net.node_count() {
            if !labels.is_labeled(i) {
                continue;
            }
            let row = labels.matrix().row(i);
            let ks: Vec<String> = row
                .iter()
                .enumerate()
                .filter(|&(_, &v)| v != 0.0)
                .map(|(k, _)| k.to_string())
                .collect();
            if ks.is_empty() {
                continue;
            }
            body.push_str(&format!("{i}\t{}\n", ks.join(",")));
        }
        write(format!("{prefix}.labels"), body)?;
    }
    Ok(())
}
