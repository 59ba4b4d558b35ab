//! Shared machinery for the oracle test targets: dense reference
//! implementations and random small-instance generators, kept apart
//! from the code under test.

#![allow(dead_code)] // each test target uses a different subset

use acdne_core::graph::{align_attributes, AttributedNetwork, LabelMode, Labels, NetworkPair};
use acdne_core::model::batch::MiniBatch;
use acdne_core::model::losses::domain_loss;
use acdne_core::model::train::{compute_gradients, PreparedPair};
use acdne_core::model::{
    embed_backward, embed_forward, ModelGrads, ModelParams, ModelVariant, TrainConfig,
};
use acdne_core::nn::{backward, forward, Activation, DenseLayer, GradPair};
use acdne_core::proximity::ppmi_matrix;
use acdne_core::sparse::SparseRowMatrix;
use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------
// Proximity oracle

/// A graph whose nodes all carry the same single attribute; proximity
/// only looks at edges.
pub fn attr_free_network(n: usize, edges: Vec<(u32, u32)>) -> AttributedNetwork {
    let attrs = SparseRowMatrix::from_rows(1, vec![vec![(0, 1.0)]; n]).unwrap();
    AttributedNetwork::new(edges, attrs, None, None, LabelMode::Multiclass).unwrap()
}

/// Dense reference: average the first `k` powers of the row-normalized
/// adjacency, weight rows by the degree distribution to get a joint, and
/// clamp the log ratio against the column marginal at zero.
pub fn dense_ppmi(n: usize, edges: &[(u32, u32)], k: usize) -> Array2<f64> {
    let mut adj = Array2::<f64>::zeros((n, n));
    for &(u, v) in edges {
        adj[[u as usize, v as usize]] = 1.0;
        adj[[v as usize, u as usize]] = 1.0;
    }
    let deg: Vec<f64> = adj.rows().into_iter().map(|r| r.sum()).collect();
    let total: f64 = deg.iter().sum();
    let mut out = Array2::<f64>::zeros((n, n));
    if total == 0.0 {
        return out;
    }
    let mut t = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        if deg[i] > 0.0 {
            for j in 0..n {
                t[[i, j]] = adj[[i, j]] / deg[i];
            }
        }
    }
    let mut power = Array2::<f64>::eye(n);
    let mut sum = Array2::<f64>::zeros((n, n));
    for _ in 0..k {
        power = power.dot(&t);
        sum += &power;
    }
    let avg = sum / k as f64;
    for i in 0..n {
        for j in 0..n {
            if i == j || avg[[i, j]] <= 0.0 {
                continue;
            }
            let marginal = deg[j] / total;
            let value = (avg[[i, j]] / marginal).ln();
            if value > 0.0 {
                out[[i, j]] = value;
            }
        }
    }
    out
}

pub fn random_edges(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    for i in 0..n as u32 {
        for j in (i + 1)..n as u32 {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    edges
}

/// Outcome of sweeping the sparse proximity builder against the dense
/// reference over 50 random graphs (n ≤ 12, K ∈ {1,2,3}).
pub struct PpmiSweep {
    pub max_entry_error: f64,
    pub max_asymmetry: f64,
    /// Nonzero reference entries compared, to prove the sweep had teeth.
    pub nonzero_entries: usize,
}

pub fn ppmi_oracle_sweep() -> PpmiSweep {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9b1f);
    let mut sweep = PpmiSweep {
        max_entry_error: 0.0,
        max_asymmetry: 0.0,
        nonzero_entries: 0,
    };
    for case in 0..50 {
        let n = rng.random_range(2..=12);
        let p = [0.15, 0.3, 0.5][case % 3];
        let k = case % 3 + 1;
        let edges = random_edges(&mut rng, n, p);
        let net = attr_free_network(n, edges.clone());
        let prox = ppmi_matrix(&net, k).unwrap();
        let reference = dense_ppmi(n, &edges, k);
        for i in 0..n {
            for j in 0..n {
                let got = prox.get(i, j);
                let want = reference[[i, j]];
                sweep.max_entry_error = sweep.max_entry_error.max((got - want).abs());
                sweep.max_asymmetry = sweep
                    .max_asymmetry
                    .max((prox.get(i, j) - prox.get(j, i)).abs());
                if want > 0.0 {
                    sweep.nonzero_entries += 1;
                }
            }
        }
    }
    sweep
}

// ---------------------------------------------------------------------
// Gradient oracle

pub fn random_network(
    rng: &mut ChaCha8Rng,
    n: usize,
    attr_dim: usize,
    labeled: bool,
) -> AttributedNetwork {
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .map(|_| {
            (0..attr_dim as u32)
                .filter(|_| rng.random_bool(0.5))
                .map(|j| (j, 1.0))
                .collect()
        })
        .collect();
    let attrs = SparseRowMatrix::from_rows(attr_dim, rows).unwrap();
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for i in 0..n as u32 {
        for j in (i + 1)..n as u32 {
            if rng.random_bool(0.35) {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    let labels = labeled.then(|| {
        let assignments: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i % 2])).collect();
        Labels::from_assignments(n, 2, &assignments, LabelMode::Multiclass).unwrap()
    });
    AttributedNetwork::new(edges, attrs, None, labels, LabelMode::Multiclass).unwrap()
}

pub fn random_pair(rng: &mut ChaCha8Rng, n: usize, attr_dim: usize) -> NetworkPair {
    let source = random_network(rng, n, attr_dim, true);
    let target = random_network(rng, n, attr_dim, false);
    align_attributes(source, target).unwrap()
}

pub fn random_batch(rng: &mut ChaCha8Rng, n: usize, half: usize) -> MiniBatch {
    MiniBatch {
        source: rand::seq::index::sample(rng, n, half).into_iter().collect(),
        target: rand::seq::index::sample(rng, n, half).into_iter().collect(),
    }
}

pub fn batch_inputs(prep: &PreparedPair, batch: &MiniBatch) -> (Array2<f64>, Array2<f64>) {
    let own = concatenate![
        Axis(0),
        prep.source_attrs.gather_dense(&batch.source),
        prep.target_attrs.gather_dense(&batch.target)
    ];
    let nbr = concatenate![
        Axis(0),
        prep.source_nbr.gather_dense(&batch.source),
        prep.target_nbr.gather_dense(&batch.target)
    ];
    (own, nbr)
}

/// Smallest |pre-activation| across every rectified unit the batch
/// touches. Finite differencing is only trustworthy when no unit sits
/// close enough to its kink for the probe step to cross it.
pub fn relu_margin(params: &ModelParams, own: &Array2<f64>, nbr: &Array2<f64>) -> f64 {
    let mut margin = f64::INFINITY;
    let mut track = |layers: &[DenseLayer], input: &Array2<f64>| -> Array2<f64> {
        let (out, caches) = forward(layers, input).unwrap();
        for (layer, cache) in layers.iter().zip(&caches) {
            if layer.activation == Activation::Relu {
                for &v in cache.pre.iter() {
                    margin = margin.min(v.abs());
                }
            }
        }
        out
    };
    let h1 = track(params.fe1.as_ref().expect("both branches present"), own);
    let h2 = track(params.fe2.as_ref().expect("both branches present"), nbr);
    let joint = concatenate![Axis(1), h1, h2];
    let embed = track(std::slice::from_ref(&params.concat), &joint);
    track(&params.disc, &embed);
    margin
}

/// Addresses one trainable layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Slot {
    Fe1(usize),
    Fe2(usize),
    Concat,
    Classifier,
    Disc(usize),
}

pub fn slots(p: &ModelParams) -> Vec<Slot> {
    let mut v = Vec::new();
    if let Some(b) = &p.fe1 {
        v.extend((0..b.len()).map(Slot::Fe1));
    }
    if let Some(b) = &p.fe2 {
        v.extend((0..b.len()).map(Slot::Fe2));
    }
    v.push(Slot::Concat);
    v.push(Slot::Classifier);
    v.extend((0..p.disc.len()).map(Slot::Disc));
    v
}

pub fn layer_mut(p: &mut ModelParams, s: Slot) -> &mut DenseLayer {
    match s {
        Slot::Fe1(i) => &mut p.fe1.as_mut().unwrap()[i],
        Slot::Fe2(i) => &mut p.fe2.as_mut().unwrap()[i],
        Slot::Concat => &mut p.concat,
        Slot::Classifier => &mut p.classifier,
        Slot::Disc(i) => &mut p.disc[i],
    }
}

pub fn grad_of(g: &ModelGrads, s: Slot) -> &GradPair {
    match s {
        Slot::Fe1(i) => &g.embed.fe1[i],
        Slot::Fe2(i) => &g.embed.fe2[i],
        Slot::Concat => &g.embed.concat,
        Slot::Classifier => &g.classifier,
        Slot::Disc(i) => &g.disc[i],
    }
}

pub struct Toy {
    pub prep: PreparedPair,
    pub params: ModelParams,
    pub batch: MiniBatch,
    pub lambda: f64,
    pub pair_weight: f64,
}

/// Builds a random toy setup, redrawing until every rectified unit
/// clears the kink margin so finite differences are valid.
pub fn sample_toy(rng: &mut ChaCha8Rng, config: &TrainConfig) -> Toy {
    const MARGIN: f64 = 1e-3;
    for _ in 0..200 {
        let attr_dim = rng.random_range(2..=6);
        let pair = random_pair(rng, 8, attr_dim);
        let prep = PreparedPair::prepare(&pair, config.k_steps).unwrap();
        let mut init_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let params =
            ModelParams::init(config, attr_dim, 2, LabelMode::Multiclass, &mut init_rng).unwrap();
        let batch = random_batch(rng, 8, config.batch_size / 2);
        let lambda = rng.random_range(0.3..1.5);
        let pair_weight = rng.random_range(0.05..0.5);
        let (own, nbr) = batch_inputs(&prep, &batch);
        if relu_margin(&params, &own, &nbr) > MARGIN {
            return Toy {
                prep,
                params,
                batch,
                lambda,
                pair_weight,
            };
        }
    }
    panic!("no toy with clear kink margins found in 200 draws");
}

/// Sweeps 25 random toy instances and returns the worst relative error
/// between every analytic parameter gradient and a central finite
/// difference of the objective each parameter group descends: the
/// combined `L_class + w * L_pair - lambda * L_domain` for embedder and
/// classifier parameters, plain `L_domain` for discriminator parameters.
pub fn gradient_oracle_sweep() -> f64 {
    let config = TrainConfig {
        k_steps: 2,
        fe_hidden: vec![4, 3],
        embed_dim: 3,
        disc_hidden: vec![3],
        batch_size: 6,
        ..TrainConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x6fd2);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let toy = sample_toy(&mut rng, &config);
        let (grads, _) = compute_gradients(
            &toy.params,
            &toy.prep,
            &toy.batch,
            toy.lambda,
            toy.pair_weight,
        )
        .unwrap();
        let scalar = |params: &ModelParams, disc_path: bool| -> f64 {
            let (_, losses) = compute_gradients(
                params,
                &toy.prep,
                &toy.batch,
                toy.lambda,
                toy.pair_weight,
            )
            .unwrap();
            if disc_path {
                losses.domain_loss
            } else {
                losses.class_loss + toy.pair_weight * losses.pair_loss
                    - toy.lambda * losses.domain_loss
            }
        };
        for slot in slots(&toy.params) {
            let disc_path = matches!(slot, Slot::Disc(_));
            let grad = grad_of(&grads, slot);
            let (rows, cols) = grad.dw.dim();
            for r in 0..rows {
                for c in 0..cols {
                    let mut plus = toy.params.clone();
                    layer_mut(&mut plus, slot).w[[r, c]] += h;
                    let mut minus = toy.params.clone();
                    layer_mut(&mut minus, slot).w[[r, c]] -= h;
                    let fd = (scalar(&plus, disc_path) - scalar(&minus, disc_path)) / (2.0 * h);
                    let rel = (grad.dw[[r, c]] - fd).abs() / fd.abs().max(1e-6);
                    worst = worst.max(rel);
                }
            }
            for k in 0..grad.db.len() {
                let mut plus = toy.params.clone();
                layer_mut(&mut plus, slot).b[k] += h;
                let mut minus = toy.params.clone();
                layer_mut(&mut minus, slot).b[k] -= h;
                let fd = (scalar(&plus, disc_path) - scalar(&minus, disc_path)) / (2.0 * h);
                let rel = (grad.db[k] - fd).abs() / fd.abs().max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    worst
}

/// Across 10 random configurations, compares the embedder gradient of
/// the reversed domain path against `-lambda` times a plain
/// backpropagation of the domain loss, and returns the largest
/// per-element absolute difference.
pub fn reversal_identity_sweep() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51c3);
    let mut worst = 0.0f64;
    for case in 0..10 {
        let attr_dim = rng.random_range(3..=8);
        let fe_hidden = [vec![4], vec![5, 4], vec![6, 3]][case % 3].clone();
        let embed_dim = rng.random_range(3..=5);
        let disc_hidden = [vec![4], vec![3, 3]][case % 2].clone();
        let half = rng.random_range(2..=4);
        let lambda = rng.random_range(0.25..1.4);
        let config = TrainConfig {
            k_steps: 2,
            fe_hidden,
            embed_dim,
            disc_hidden,
            batch_size: 2 * half,
            // Silence the classification path so the embedder gradient
            // is the reversed domain path alone.
            variant: ModelVariant::WithoutClassifier,
            ..TrainConfig::default()
        };
        let pair = random_pair(&mut rng, 9, attr_dim);
        let prep = PreparedPair::prepare(&pair, config.k_steps).unwrap();
        let mut init_rng = ChaCha8Rng::seed_from_u64(rng.random());
        let params =
            ModelParams::init(&config, attr_dim, 2, LabelMode::Multiclass, &mut init_rng).unwrap();
        let batch = random_batch(&mut rng, 9, half);

        // Training-step gradient with the pairwise path weighted to zero.
        let (grads, _) = compute_gradients(&params, &prep, &batch, lambda, 0.0).unwrap();

        // Plain backpropagation of the domain loss into the embedder.
        let (own, nbr) = batch_inputs(&prep, &batch);
        let (embed, cache) = embed_forward(&params, &own, &nbr).unwrap();
        let is_target: Vec<bool> = (0..2 * half).map(|i| i >= half).collect();
        let (logits, dcache) = forward(&params.disc, &embed).unwrap();
        let dl = domain_loss(&logits, &is_target).unwrap();
        let (d_embed, _) = backward(&params.disc, &dcache, &dl.d_logits).unwrap();
        let plain = embed_backward(&params, &cache, &d_embed).unwrap();

        let mut check = |got: &GradPair, plain: &GradPair| {
            for (g, p) in got.dw.iter().zip(plain.dw.iter()) {
                worst = worst.max((g - (-lambda) * p).abs());
            }
            for (g, p) in got.db.iter().zip(plain.db.iter()) {
                worst = worst.max((g - (-lambda) * p).abs());
            }
        };
        for (g, p) in grads.embed.fe1.iter().zip(plain.fe1.iter()) {
            check(g, p);
        }
        for (g, p) in grads.embed.fe2.iter().zip(plain.fe2.iter()) {
            check(g, p);
        }
        check(&grads.embed.concat, &plain.concat);
    }
    worst
}
