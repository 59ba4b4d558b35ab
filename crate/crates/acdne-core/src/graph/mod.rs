//! Attributed networks: undirected graphs whose nodes carry attribute
//! vectors and, optionally, labels.
//!
//! A [`NetworkPair`] holds the labeled source network and the target
//! network after their attribute spaces have been aligned onto a common
//! set of columns, which is the shape every downstream stage assumes.

pub mod io;

pub use io::{load_labels, load_network, write_network_files};

use ndarray::Array2;

use crate::error::{CoreError, Result};
use crate::sparse::SparseRowMatrix;

/// How label rows are interpreted: exactly one class per node, or any
/// subset of classes per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    Multiclass,
    Multilabel,
}

impl LabelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            LabelMode::Multiclass => "multiclass",
            LabelMode::Multilabel => "multilabel",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "multiclass" => Ok(LabelMode::Multiclass),
            "multilabel" => Ok(LabelMode::Multilabel),
            other => Err(CoreError::Argument(format!(
                "unknown label mode {other:?} (expected \"multiclass\" or \"multilabel\")"
            ))),
        }
    }
}

/// Node labels as an `n x c` 0/1 indicator matrix plus a per-node mask of
/// which rows actually carry ground truth.
///
/// The mask exists because a valid multilabel row can be all zeros, so
/// "row is zero" cannot double as "node is unlabeled".
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    classes: usize,
    matrix: Array2<f64>,
    mask: Vec<bool>,
}

impl Labels {
    /// Builds labels for `n` nodes from `(node, classes)` assignments.
    pub fn from_assignments(
        n: usize,
        classes: usize,
        assignments: &[(usize, Vec<usize>)],
        mode: LabelMode,
    ) -> Result<Self> {
        if classes == 0 {
            return Err(CoreError::Validation("label set has zero classes".into()));
        }
        let mut matrix = Array2::zeros((n, classes));
        let mut mask = vec![false; n];
        for (node, ks) in assignments {
            if *node >= n {
                return Err(CoreError::Validation(format!(
                    "labeled node {node} out of range (n = {n})"
                )));
            }
            if mask[*node] {
                return Err(CoreError::Validation(format!(
                    "node {node} labeled more than once"
                )));
            }
            if mode == LabelMode::Multiclass && ks.len() != 1 {
                return Err(CoreError::Validation(format!(
                    "node {node}: multiclass rows must carry exactly one class, got {}",
                    ks.len()
                )));
            }
            for &k in ks {
                if k >= classes {
                    return Err(CoreError::Validation(format!(
                        "node {node}: class {k} out of range (c = {classes})"
                    )));
                }
                if matrix[[*node, k]] != 0.0 {
                    return Err(CoreError::Validation(format!(
                        "node {node}: class {k} listed twice"
                    )));
                }
                matrix[[*node, k]] = 1.0;
            }
            mask[*node] = true;
        }
        Ok(Labels {
            classes,
            matrix,
            mask,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// The full `n x c` indicator matrix; unlabeled rows are zero.
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn is_labeled(&self, node: usize) -> bool {
        self.mask[node]
    }

    pub fn labeled_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn all_labeled(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// Widens the indicator matrix to `classes` columns by zero-padding.
    pub fn pad_classes(&mut self, classes: usize) {
        if classes <= self.classes {
            return;
        }
        let mut wider = Array2::zeros((self.matrix.nrows(), classes));
        wider
            .slice_mut(ndarray::s![.., ..self.classes])
            .assign(&self.matrix);
        self.matrix = wider;
        self.classes = classes;
    }
}

/// An undirected graph with node attributes and optional labels.
///
/// Edges are normalized on construction: direction and duplicates are
/// collapsed and self-loops are removed, so the stored list is a set of
/// unordered pairs `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedNetwork {
    n: usize,
    edges: Vec<(u32, u32)>,
    attrs: SparseRowMatrix,
    attr_names: Option<Vec<String>>,
    labels: Option<Labels>,
    label_mode: LabelMode,
}

impl AttributedNetwork {
    pub fn new(
        edges: Vec<(u32, u32)>,
        attrs: SparseRowMatrix,
        attr_names: Option<Vec<String>>,
        labels: Option<Labels>,
        label_mode: LabelMode,
    ) -> Result<Self> {
        let n = attrs.nrows();
        if let Some(names) = &attr_names {
            if names.len() != attrs.ncols() {
                return Err(CoreError::Validation(format!(
                    "{} attribute names for {} columns",
                    names.len(),
                    attrs.ncols()
                )));
            }
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a as usize >= n || b as usize >= n {
                return Err(CoreError::Validation(format!(
                    "edge ({a}, {b}) references a node >= node count {n}"
                )));
            }
            if a == b {
                continue;
            }
            canonical.push((a.min(b), a.max(b)));
        }
        canonical.sort_unstable();
        canonical.dedup();
        if let Some(l) = &labels {
            if l.matrix().nrows() != n {
                return Err(CoreError::Validation(format!(
                    "label matrix has {} rows for {} nodes",
                    l.matrix().nrows(),
                    n
                )));
            }
            if label_mode == LabelMode::Multiclass {
                for (i, row) in l.matrix().rows().into_iter().enumerate() {
                    let sum: f64 = row.sum();
                    if l.is_labeled(i) && sum != 1.0 {
                        return Err(CoreError::Validation(format!(
                            "multiclass label row {i} sums to {sum}, expected exactly 1"
                        )));
                    }
                }
            }
        }
        Ok(AttributedNetwork {
            n,
            edges: canonical,
            attrs,
            attr_names,
            labels,
            label_mode,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Canonical undirected edge list: `(i, j)` with `i < j`, sorted, unique.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn attrs(&self) -> &SparseRowMatrix {
        &self.attrs
    }

    pub fn attr_dim(&self) -> usize {
        self.attrs.ncols()
    }

    pub fn attr_names(&self) -> Option<&[String]> {
        self.attr_names.as_deref()
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn label_mode(&self) -> LabelMode {
        self.label_mode
    }

    /// Per-node sorted neighbor lists derived from the edge set.
    pub fn adjacency_lists(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Replaces the attribute matrix, e.g. after perturbation. The new
    /// matrix must keep the node count.
    pub fn with_attrs(mut self, attrs: SparseRowMatrix, names: Option<Vec<String>>) -> Result<Self> {
        if attrs.nrows() != self.n {
            return Err(CoreError::Validation(format!(
                "replacement attributes have {} rows for {} nodes",
                attrs.nrows(),
                self.n
            )));
        }
        if let Some(ns) = &names {
            if ns.len() != attrs.ncols() {
                return Err(CoreError::Validation(format!(
                    "{} attribute names for {} columns",
                    ns.len(),
                    attrs.ncols()
                )));
            }
        }
        self.attrs = attrs;
        self.attr_names = names;
        Ok(self)
    }
}

/// A source network (labels required) and a target network sharing one
/// attribute space. Construct through [`align_attributes`].
#[derive(Debug, Clone)]
pub struct NetworkPair {
    pub source: AttributedNetwork,
    pub target: AttributedNetwork,
    attribute_dim: usize,
}

impl NetworkPair {
    pub fn attribute_dim(&self) -> usize {
        self.attribute_dim
    }

    /// Number of label classes shared by the pair.
    pub fn classes(&self) -> usize {
        self.source
            .labels()
            .map(Labels::classes)
            .expect("pair invariant: source is labeled")
    }
}

/// Brings two networks onto a shared attribute space and packages them as
/// a [`NetworkPair`].
///
/// With attribute names on both sides the shared space is the sorted
/// union of the two name sets and absent columns are zero-filled; when the
/// two name vectors are identical the matrices pass through untouched.
/// Without names on either side, alignment is positional and requires
/// equal attribute counts. Naming only one side is rejected rather than
/// guessed at.
///
/// Label class counts are unified by zero-padding the narrower side, and
/// the two networks must use the same label mode. The source must carry
/// labels.
pub fn align_attributes(
    source: AttributedNetwork,
    target: AttributedNetwork,
) -> Result<NetworkPair> {
    if source.labels().is_none() {
        return Err(CoreError::Validation(
            "source network must carry labels".into(),
        ));
    }
    if source.label_mode() != target.label_mode() {
        return Err(CoreError::Validation(format!(
            "label mode mismatch: source is {}, target is {}",
            source.label_mode().as_str(),
            target.label_mode().as_str()
        )));
    }
    let (mut source, mut target) = (source, target);
    match (&source.attr_names, &target.attr_names) {
        (Some(sn), Some(tn)) => {
            check_unique(sn, "source")?;
            check_unique(tn, "target")?;
            if sn != tn {
                let mut union: Vec<String> = sn.iter().chain(tn.iter()).cloned().collect();
                union.sort_unstable();
                union.dedup();
                source = reindex_onto(source, &union)?;
                target = reindex_onto(target, &union)?;
            }
        }
        (None, None) => {
            if source.attr_dim() != target.attr_dim() {
                return Err(CoreError::Validation(format!(
                    "positional alignment requires equal attribute counts, got {} and {}",
                    source.attr_dim(),
                    target.attr_dim()
                )));
            }
        }
        _ => {
            return Err(CoreError::Validation(
                "attribute names present on only one network; name both or neither".into(),
            ));
        }
    }
    if let (Some(_), Some(tl)) = (&source.labels, &target.labels) {
        let c = source.labels.as_ref().unwrap().classes().max(tl.classes());
        source.labels.as_mut().unwrap().pad_classes(c);
        target.labels.as_mut().unwrap().pad_classes(c);
    }
    let attribute_dim = source.attr_dim();
    Ok(NetworkPair {
        source,
        target,
        attribute_dim,
    })
}

fn check_unique(names: &[String], which: &str) -> Result<()> {
    let mut sorted: Vec<&String> = names.iter().collect();
    sorted.sort_unstable();
    for pair in sorted.windows(2) {
        if pair[0] == pair[1] {
            return Err(CoreError::Validation(format!(
                "{which} network has duplicate attribute name {:?}",
                pair[0]
            )));
        }
    }
    Ok(())
}

/// Rebuilds a network's attribute matrix on the given (sorted, unique)
/// column name list. Columns absent from the network become zeros.
fn reindex_onto(net: AttributedNetwork, union: &[String]) -> Result<AttributedNetwork> {
    let old_names = net
        .attr_names
        .clone()
        .expect("reindex requires named attributes");
    let mut col_map = vec![0u32; old_names.len()];
    for (old_idx, name) in old_names.iter().enumerate() {
        let new_idx = union
            .binary_search(name)
            .expect("union contains every input name");
        col_map[old_idx] = new_idx as u32;
    }
    let mut rows = Vec::with_capacity(net.attrs.nrows());
    for row in net.attrs.iter_rows() {
        let mut mapped: Vec<(u32, f64)> =
            row.iter().map(|&(j, v)| (col_map[j as usize], v)).collect();
        mapped.sort_unstable_by_key(|&(j, _)| j);
        rows.push(mapped);
    }
    let attrs = SparseRowMatrix::from_rows(union.len(), rows)?;
    net.with_attrs(attrs, Some(union.to_vec()))
}
