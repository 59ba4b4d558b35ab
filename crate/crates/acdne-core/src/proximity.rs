//! High-order node proximity from random-walk statistics, and
//! proximity-weighted neighbor feature aggregation.
//!
//! The proximity between two nodes is the positive pointwise mutual
//! information of their co-occurrence under random walks of up to
//! `k_steps` steps: walks start from the degree-weighted stationary
//! distribution, the k-step co-occurrence matrices are averaged over
//! k = 1..=k_steps, and each cell is scored against the product of its
//! marginals. Undirected graphs make the co-occurrence matrix symmetric,
//! so the result is symmetric as well. Entries on the diagonal, with
//! non-positive PMI, or below the storage threshold are dropped.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::graph::AttributedNetwork;
use crate::sparse::SparseRowMatrix;

/// Stored proximity entries below this value are dropped.
const STORE_THRESHOLD: f64 = 1e-12;

/// Symmetric nonnegative node-proximity matrix with a zero diagonal,
/// stored sparsely as sorted `(column, value)` lists per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityMatrix {
    n: usize,
    k_steps: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl ProximityMatrix {
    /// Builds from per-row entry lists; used by tests and external
    /// tooling. Entries must be sorted, positive, off-diagonal, in range.
    pub fn from_rows(n: usize, k_steps: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(CoreError::Validation(format!(
                "{} rows for {n} nodes",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            let mut prev: Option<u32> = None;
            for &(j, v) in row {
                if (j as usize) >= n {
                    return Err(CoreError::Validation(format!(
                        "proximity row {i}: column {j} out of range"
                    )));
                }
                if j as usize == i {
                    return Err(CoreError::Validation(format!(
                        "proximity row {i} stores a diagonal entry"
                    )));
                }
                if prev.is_some() && Some(j) <= prev {
                    return Err(CoreError::Validation(format!(
                        "proximity row {i}: columns not strictly increasing at {j}"
                    )));
                }
                if !(v.is_finite() && v > 0.0) {
                    return Err(CoreError::Validation(format!(
                        "proximity row {i}, column {j}: value {v} must be finite and positive"
                    )));
                }
                prev = Some(j);
            }
        }
        Ok(ProximityMatrix { n, k_steps, rows })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn k_steps(&self) -> usize {
        self.k_steps
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    /// The proximity of nodes `i` and `j`; zero for unstored cells and
    /// the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.rows[i].binary_search_by_key(&(j as u32), |e| e.0) {
            Ok(pos) => self.rows[i][pos].1,
            Err(_) => 0.0,
        }
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, v)| (i, j as usize, v)))
    }

    /// Debug export as `i<TAB>j<TAB>value` triplet lines.
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        let mut body = String::new();
        for (i, j, v) in self.iter_entries() {
            body.push_str(&format!("{i}\t{j}\t{v}\n"));
        }
        let mut f = fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
        f.write_all(body.as_bytes())
            .map_err(|e| CoreError::io(path, e))
    }
}

/// Computes the PPMI proximity matrix of a network from walks of length
/// 1..=`k_steps`.
///
/// Work per row is proportional to the touched neighborhood, so the whole
/// computation stays near-linear on sparse graphs and never materializes
/// an `n x n` dense matrix. Isolated nodes have zero walk mass and end up
/// with empty rows.
pub fn ppmi_matrix(net: &AttributedNetwork, k_steps: usize) -> Result<ProximityMatrix> {
    if k_steps < 1 {
        return Err(CoreError::Argument(format!(
            "k_steps must be at least 1, got {k_steps}"
        )));
    }
    let n = net.node_count();
    let adj = net.adjacency_lists();
    let inv_deg: Vec<f64> = adj
        .iter()
        .map(|a| if a.is_empty() { 0.0 } else { 1.0 / a.len() as f64 })
        .collect();
    let total_degree: f64 = adj.iter().map(|a| a.len() as f64).sum();
    if total_degree == 0.0 {
        return Ok(ProximityMatrix {
            n,
            k_steps,
            rows: vec![Vec::new(); n],
        });
    }

    // Joint co-occurrence rows: start mass (degree / total degree) times
    // the average of the k-step transition rows. All contributions are
    // positive, so a zero scratch cell means "untouched".
    let mut cur = vec![0.0f64; n];
    let mut next = vec![0.0f64; n];
    let mut acc = vec![0.0f64; n];
    let mut cur_idx: Vec<u32> = Vec::new();
    let mut next_idx: Vec<u32> = Vec::new();
    let mut acc_idx: Vec<u32> = Vec::new();

    let mut joint: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        cur_idx.clear();
        acc_idx.clear();
        for &g in &adj[i] {
            cur[g as usize] = inv_deg[i];
            cur_idx.push(g);
        }
        for &g in &cur_idx {
            acc[g as usize] = cur[g as usize];
            acc_idx.push(g);
        }
        for _step in 2..=k_steps {
            next_idx.clear();
            for &j in &cur_idx {
                let v = cur[j as usize] * inv_deg[j as usize];
                for &g in &adj[j as usize] {
                    if next[g as usize] == 0.0 {
                        next_idx.push(g);
                    }
                    next[g as usize] += v;
                }
            }
            next_idx.sort_unstable();
            for &g in &next_idx {
                if acc[g as usize] == 0.0 {
                    acc_idx.push(g);
                }
                acc[g as usize] += next[g as usize];
            }
            std::mem::swap(&mut cur, &mut next);
            std::mem::swap(&mut cur_idx, &mut next_idx);
            for &g in &next_idx {
                next[g as usize] = 0.0;
            }
        }
        acc_idx.sort_unstable();
        let start_mass = adj[i].len() as f64 / total_degree;
        let scale = start_mass / k_steps as f64;
        let row: Vec<(u32, f64)> = acc_idx
            .iter()
            .map(|&j| (j, acc[j as usize] * scale))
            .collect();
        for &j in &acc_idx {
            acc[j as usize] = 0.0;
        }
        for &j in &cur_idx {
            cur[j as usize] = 0.0;
        }
        joint.push(row);
    }

    // PMI of each cell against its marginals, computed in fixed row-major
    // order so results are bit-reproducible.
    let mut row_sum = vec![0.0f64; n];
    let mut col_sum = vec![0.0f64; n];
    let mut total = 0.0f64;
    for (i, row) in joint.iter().enumerate() {
        let mut s = 0.0;
        for &(j, v) in row {
            s += v;
            col_sum[j as usize] += v;
        }
        row_sum[i] = s;
        total += s;
    }

    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
    for (i, row) in joint.iter().enumerate() {
        let mut out = Vec::new();
        for &(j, v) in row {
            if j as usize == i {
                continue;
            }
            let pmi = (v * total / (row_sum[i] * col_sum[j as usize])).ln();
            if pmi >= STORE_THRESHOLD {
                out.push((j, pmi));
            }
        }
        rows.push(out);
    }
    Ok(ProximityMatrix { n, k_steps, rows })
}

/// Proximity-weighted neighbor features.
///
/// Row i is the average of all other nodes' attribute vectors weighted by
/// their normalized proximity to i, so it summarizes what i's (possibly
/// multi-hop) neighborhood looks like. Rows with zero proximity mass stay
/// zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborFeatures {
    matrix: SparseRowMatrix,
}

impl NeighborFeatures {
    pub fn matrix(&self) -> &SparseRowMatrix {
        &self.matrix
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn gather_dense(&self, indices: &[usize]) -> ndarray::Array2<f64> {
        self.matrix.gather_dense(indices)
    }
}

/// Aggregates node attributes over proximity neighborhoods:
/// `n_i = sum_j (a_ij / sum_g a_ig) * x_j`.
pub fn neighbor_aggregate(
    prox: &ProximityMatrix,
    attrs: &SparseRowMatrix,
) -> Result<NeighborFeatures> {
    if prox.node_count() != attrs.nrows() {
        return Err(CoreError::Validation(format!(
            "proximity is over {} nodes but attributes have {} rows",
            prox.node_count(),
            attrs.nrows()
        )));
    }
    let w = attrs.ncols();
    let mut scratch = vec![0.0f64; w];
    let mut touched: Vec<u32> = Vec::new();
    let mut rows = Vec::with_capacity(attrs.nrows());
    for i in 0..prox.node_count() {
        let prow = prox.row(i);
        let mass: f64 = prow.iter().map(|&(_, a)| a).sum();
        if mass == 0.0 {
            rows.push(Vec::new());
            continue;
        }
        touched.clear();
        for &(j, a) in prow {
            let weight = a / mass;
            for &(k, x) in attrs.row(j as usize) {
                if scratch[k as usize] == 0.0 {
                    touched.push(k);
                }
                scratch[k as usize] += weight * x;
            }
        }
        touched.sort_unstable();
        let row: Vec<(u32, f64)> = touched
            .iter()
            .filter(|&&k| scratch[k as usize] != 0.0)
            .map(|&k| (k, scratch[k as usize]))
            .collect();
        for &k in &touched {
            scratch[k as usize] = 0.0;
        }
        rows.push(row);
    }
    Ok(NeighborFeatures {
        matrix: SparseRowMatrix::from_rows(w, rows)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LabelMode;
    use ndarray::array;

    fn net(n: usize, edges: &[(u32, u32)]) -> AttributedNetwork {
        let attrs = SparseRowMatrix::from_rows(1, vec![vec![(0, 1.0)]; n]).unwrap();
        AttributedNetwork::new(edges.to_vec(), attrs, None, None, LabelMode::Multiclass).unwrap()
    }

    fn assert_close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn k_zero_is_rejected() {
        assert!(ppmi_matrix(&net(2, &[(0, 1)]), 0).is_err());
    }

    #[test]
    fn edgeless_graph_has_empty_proximity() {
        let p = ppmi_matrix(&net(3, &[]), 2).unwrap();
        assert_eq!(p.nnz(), 0);
    }

    #[test]
    fn single_edge_pair_scores_log_two() {
        // Each endpoint reaches the other with probability 1 against a
        // marginal mass of 1/2.
        let p = ppmi_matrix(&net(2, &[(0, 1)]), 1).unwrap();
        assert_close(p.get(0, 1), 2.0f64.ln());
        assert_close(p.get(1, 0), 2.0f64.ln());
        assert_eq!(p.nnz(), 2);
    }

    #[test]
    fn path_graph_one_step_is_symmetric_despite_unequal_degrees() {
        let p = ppmi_matrix(&net(3, &[(0, 1), (1, 2)]), 1).unwrap();
        assert_close(p.get(0, 1), 2.0f64.ln());
        assert_close(p.get(1, 0), 2.0f64.ln());
        assert_close(p.get(1, 2), 2.0f64.ln());
        assert_close(p.get(2, 1), 2.0f64.ln());
        assert_eq!(p.get(0, 2), 0.0);
    }

    #[test]
    fn path_graph_two_step_mixture_is_uninformative() {
        // On the 3-path the average of the first two walk steps reaches
        // the stationary distribution from every start node, so every PMI
        // cell is exactly log 1 and nothing is stored.
        let p = ppmi_matrix(&net(3, &[(0, 1), (1, 2)]), 2).unwrap();
        assert_eq!(p.nnz(), 0);
    }

    #[test]
    fn two_step_reach_creates_positive_proximity() {
        // Path 0-1-2 plus a disjoint 4-cycle: the cycle adds stationary
        // mass, so the concentrated 2-step walk 0->1->2 scores above
        // baseline. By hand: P(0 reaches 2) = 1/2 * 1/2 = 1/4, target
        // marginal 1/12, PMI = ln 3.
        let g = net(
            7,
            &[(0, 1), (1, 2), (3, 4), (4, 5), (5, 6), (6, 3)],
        );
        let p = ppmi_matrix(&g, 2).unwrap();
        assert_close(p.get(0, 2), 3.0f64.ln());
        assert_close(p.get(2, 0), 3.0f64.ln());
        assert!(p.get(0, 1) > 0.0);
    }

    #[test]
    fn diagonal_is_dropped_even_when_informative() {
        // Leaf node 0 returns to itself in two steps with probability
        // 1/2, well above its stationary mass, yet the diagonal must
        // stay empty.
        let g = net(
            7,
            &[(0, 1), (1, 2), (3, 4), (4, 5), (5, 6), (6, 3)],
        );
        let p = ppmi_matrix(&g, 2).unwrap();
        assert_eq!(p.get(0, 0), 0.0);
        for (i, j, _) in p.iter_entries() {
            assert_ne!(i, j);
        }
    }

    #[test]
    fn isolated_node_has_empty_row_and_no_marginal_effect() {
        let p = ppmi_matrix(&net(3, &[(0, 1)]), 1).unwrap();
        assert_eq!(p.row(2), &[]);
        assert_close(p.get(0, 1), 2.0f64.ln());
    }

    #[test]
    fn from_rows_validates() {
        assert!(ProximityMatrix::from_rows(2, 1, vec![vec![(0, 1.0)], vec![]]).is_err());
        assert!(ProximityMatrix::from_rows(2, 1, vec![vec![(1, -1.0)], vec![]]).is_err());
        assert!(ProximityMatrix::from_rows(2, 1, vec![vec![(1, 1.0)]]).is_err());
        assert!(ProximityMatrix::from_rows(2, 1, vec![vec![(1, 1.0)], vec![(0, 0.5)]]).is_ok());
    }

    #[test]
    fn aggregate_single_neighbor_copies_its_attributes() {
        let prox = ProximityMatrix::from_rows(2, 1, vec![vec![(1, 0.7)], vec![(0, 0.7)]]).unwrap();
        let x = SparseRowMatrix::from_dense(&array![[1.0, 2.0], [3.0, 0.0]]).unwrap();
        let n = neighbor_aggregate(&prox, &x).unwrap();
        assert_eq!(n.matrix().to_dense(), array![[3.0, 0.0], [1.0, 2.0]]);
    }

    #[test]
    fn aggregate_weights_are_proximity_proportional() {
        // Node 0 sees node 1 with weight 2/3 and node 2 with weight 1/3.
        let prox = ProximityMatrix::from_rows(
            3,
            1,
            vec![
                vec![(1, 2.0), (2, 1.0)],
                vec![(0, 2.0)],
                vec![(0, 1.0)],
            ],
        )
        .unwrap();
        let x = SparseRowMatrix::from_dense(&array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let n = neighbor_aggregate(&prox, &x).unwrap();
        let row = n.matrix().to_dense();
        assert!((row[[0, 0]] - 2.0 / 3.0).abs() < 1e-12);
        assert!((row[[0, 1]] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_zero_mass_row_stays_zero() {
        let prox = ProximityMatrix::from_rows(2, 1, vec![Vec::new(), Vec::new()]).unwrap();
        let x = SparseRowMatrix::from_dense(&array![[1.0], [1.0]]).unwrap();
        let n = neighbor_aggregate(&prox, &x).unwrap();
        assert_eq!(n.matrix().nnz(), 0);
    }

    #[test]
    fn aggregate_zero_attributes_stay_zero() {
        let prox = ProximityMatrix::from_rows(2, 1, vec![vec![(1, 1.0)], vec![(0, 1.0)]]).unwrap();
        let x = SparseRowMatrix::zeros(2, 3);
        let n = neighbor_aggregate(&prox, &x).unwrap();
        assert_eq!(n.matrix().nnz(), 0);
        assert_eq!(n.ncols(), 3);
    }

    #[test]
    fn aggregate_shape_mismatch_is_rejected() {
        let prox = ProximityMatrix::from_rows(2, 1, vec![Vec::new(), Vec::new()]).unwrap();
        let x = SparseRowMatrix::zeros(3, 1);
        assert!(neighbor_aggregate(&prox, &x).is_err());
    }

    #[test]
    fn aggregate_is_invariant_to_global_proximity_scale() {
        let x = SparseRowMatrix::from_dense(&array![[1.0, 0.0], [0.0, 2.0], [3.0, 1.0]]).unwrap();
        let base = vec![
            vec![(1, 0.4), (2, 1.2)],
            vec![(0, 0.4)],
            vec![(0, 1.2)],
        ];
        let scaled: Vec<Vec<(u32, f64)>> = base
            .iter()
            .map(|r| r.iter().map(|&(j, v)| (j, v * 5.0)).collect())
            .collect();
        let p1 = ProximityMatrix::from_rows(3, 1, base).unwrap();
        let p2 = ProximityMatrix::from_rows(3, 1, scaled).unwrap();
        let n1 = neighbor_aggregate(&p1, &x).unwrap().matrix().to_dense();
        let n2 = neighbor_aggregate(&p2, &x).unwrap().matrix().to_dense();
        for (a, b) in n1.iter().zip(n2.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn triplet_export_is_deterministic() {
        let dir = tempfile::TempDir::new().unwrap();
        let p = ppmi_matrix(&net(3, &[(0, 1), (1, 2)]), 1).unwrap();
        let f1 = dir.path().join("a.tsv");
        let f2 = dir.path().join("b.tsv");
        p.write_triplets(&f1).unwrap();
        p.write_triplets(&f2).unwrap();
        assert_eq!(std::fs::read(&f1).unwrap(), std::fs::read(&f2).unwrap());
        let text = std::fs::read_to_string(&f1).unwrap();
        assert_eq!(text.lines().count(), p.nnz());
    }
}
