//! Synthetic cross-network benchmark pairs.
//!
//! Both networks share one generative recipe: nodes split into equal-size
//! classes, attribute columns split into equal-size blocks (one per
//! class), a cell turns on with probability [`SynthSpec::signal`] when its
//! column block matches the node's class and [`BACKGROUND_RATE`]
//! otherwise, and edges follow a stochastic block model with
//! within-class rate `p_in` and cross-class rate `p_out`. The domain
//! shift comes from the target side alone: after drawing, a `flip_rate`
//! share of the target's set attribute cells is cleared and the same
//! share of its clear cells is set (so a rate of 1 complements the
//! matrix, and the class signal survives in attenuated form). Target
//! labels are attached so the result can be scored, but nothing in
//! training reads them.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::graph::{align_attributes, AttributedNetwork, LabelMode, Labels, NetworkPair};
use crate::sparse::SparseRowMatrix;

/// On-rate of attribute cells outside a node's own block.
pub const BACKGROUND_RATE: f64 = 0.02;

/// Parameters of one source/target benchmark pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub attr_dim: usize,
    /// Edge probability between same-class nodes.
    pub p_in: f64,
    /// Edge probability between different-class nodes.
    pub p_out: f64,
    /// On-rate of attribute cells inside a node's own block.
    pub signal: f64,
    /// Share of the target's set cells cleared, and of its clear cells
    /// set, after drawing.
    pub flip_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            classes: 3,
            n_source: 500,
            n_target: 500,
            attr_dim: 200,
            p_in: 0.05,
            p_out: 0.005,
            signal: 0.3,
            flip_rate: 0.3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(CoreError::Argument("need at least 2 classes".into()));
        }
        if self.n_source < self.classes || self.n_target < self.classes {
            return Err(CoreError::Argument(
                "each network needs at least one node per class".into(),
            ));
        }
        if self.attr_dim < self.classes {
            return Err(CoreError::Argument(
                "need at least one attribute column per class".into(),
            ));
        }
        for (name, p) in [
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("signal", self.signal),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CoreError::Argument(format!(
                    "{name} must lie in [0, 1], got {p}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.flip_rate) {
            return Err(CoreError::Argument(format!(
                "flip_rate must lie in [0, 1], got {}",
                self.flip_rate
            )));
        }
        Ok(())
    }
}

/// Class of node `i` out of `n`: contiguous, near-equal slices.
fn class_of(i: usize, classes: usize, n: usize) -> usize {
    i * classes / n
}

/// Block of attribute column `j`: contiguous, near-equal slices.
fn block_of(j: usize, classes: usize, attr_dim: usize) -> usize {
    j * classes / attr_dim
}

/// Draws attributes (row-major, before any edge draws), then edges over
/// ordered pairs i < j, from `rng`.
fn draw_network(spec: &SynthSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<AttributedNetwork> {
    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let class = class_of(i, spec.classes, n);
        let mut row = Vec::new();
        for j in 0..spec.attr_dim {
            let rate = if block_of(j, spec.classes, spec.attr_dim) == class {
                spec.signal
            } else {
                BACKGROUND_RATE
            };
            if rng.random_bool(rate) {
                row.push((j as u32, 1.0));
            }
        }
        rows.push(row);
    }
    let attrs = SparseRowMatrix::from_rows(spec.attr_dim, rows)?;

    let mut edges = Vec::new();
    for i in 0..n {
        let ci = class_of(i, spec.classes, n);
        for j in (i + 1)..n {
            let p = if class_of(j, spec.classes, n) == ci {
                spec.p_in
            } else {
                spec.p_out
            };
            if rng.random_bool(p) {
                edges.push((i as u32, j as u32));
            }
        }
    }

    let assignments: Vec<(usize, Vec<usize>)> = (0..n)
        .map(|i| (i, vec![class_of(i, spec.classes, n)]))
        .collect();
    let labels = Labels::from_assignments(n, spec.classes, &assignments, LabelMode::Multiclass)?;
    AttributedNetwork::new(edges, attrs, None, Some(labels), LabelMode::Multiclass)
}

/// Returns a copy of `attrs` with `floor(flip_rate * ones)` set cells
/// cleared and `floor(flip_rate * zeros)` clear cells set, each group
/// chosen uniformly without replacement (ones first, then zeros). A rate
/// of 1 therefore produces the exact bitwise complement.
pub fn perturb_attributes(
    attrs: &SparseRowMatrix,
    flip_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<SparseRowMatrix> {
    if !attrs.is_binary() {
        return Err(CoreError::Argument(
            "can only toggle cells of a 0/1 attribute matrix".into(),
        ));
    }
    if !(0.0..=1.0).contains(&flip_rate) {
        return Err(CoreError::Argument(format!(
            "flip_rate must lie in [0, 1], got {flip_rate}"
        )));
    }
    let cells = attrs.nrows() * attrs.ncols();
    let mut dense = vec![false; cells];
    for (i, row) in attrs.iter_rows().enumerate() {
        for &(j, _) in row {
            dense[i * attrs.ncols() + j as usize] = true;
        }
    }
    let ones: Vec<usize> = (0..cells).filter(|&c| dense[c]).collect();
    let zeros: Vec<usize> = (0..cells).filter(|&c| !dense[c]).collect();
    let drop = (flip_rate * ones.len() as f64).floor() as usize;
    let add = (flip_rate * zeros.len() as f64).floor() as usize;
    for idx in rand::seq::index::sample(rng, ones.len(), drop) {
        dense[ones[idx]] = false;
    }
    for idx in rand::seq::index::sample(rng, zeros.len(), add) {
        dense[zeros[idx]] = true;
    }
    let rows: Vec<Vec<(u32, f64)>> = (0..attrs.nrows())
        .map(|i| {
            (0..attrs.ncols())
                .filter(|&j| dense[i * attrs.ncols() + j])
                .map(|j| (j as u32, 1.0))
                .collect()
        })
        .collect();
    SparseRowMatrix::from_rows(attrs.ncols(), rows)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates a source/target pair from `spec`. The three random stages
/// (source network, target network, target perturbation) run on separate
/// streams of one seeded generator, so each stage is reproducible on its
/// own and insensitive to how much randomness the others consume.
pub fn generate_pair(spec: &SynthSpec) -> Result<NetworkPair> {
    spec.validate()?;
    let source = draw_network(spec, spec.n_source, &mut stream_rng(spec.seed, 1))?;
    let target = draw_network(spec, spec.n_target, &mut stream_rng(spec.seed, 2))?;
    let perturbed =
        perturb_attributes(target.attrs(), spec.flip_rate, &mut stream_rng(spec.seed, 3))?;
    let target = target.with_attrs(perturbed, None)?;
    align_attributes(source, target)
}
