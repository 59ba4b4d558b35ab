//! Small fixtures shared by the model tests.

use ndarray::Array2;

use crate::graph::{align_attributes, AttributedNetwork, LabelMode, Labels, NetworkPair};
use crate::sparse::SparseRowMatrix;

use super::{ModelVariant, TrainConfig};

/// Two small two-cluster networks with attributes that separate the
/// clusters, the target differing by a couple of bridge edges and a
/// widened attribute pattern. With `named`, columns carry names
/// `a0..a3` so alignment paths get exercised.
pub(crate) fn toy_pair(named: bool) -> NetworkPair {
    let cluster_edges = |offset: u32| {
        vec![
            (offset, offset + 1),
            (offset + 1, offset + 2),
            (offset, offset + 2),
            (offset + 2, offset + 3),
            (offset + 3, offset),
        ]
    };
    let mut s_edges = cluster_edges(0);
    s_edges.extend(cluster_edges(4));
    s_edges.push((3, 4));
    let mut t_edges = cluster_edges(0);
    t_edges.extend(cluster_edges(4));
    t_edges.push((0, 7));
    t_edges.push((2, 5));
    let attrs = |flip: bool| {
        let mut dense = Array2::zeros((8, 4));
        for i in 0..8usize {
            let cls = usize::from(i >= 4);
            dense[[i, 2 * cls]] = 1.0;
            dense[[i, 2 * cls + usize::from(flip)]] = 1.0;
        }
        SparseRowMatrix::from_dense(&dense).unwrap()
    };
    let names = named.then(|| (0..4).map(|i| format!("a{i}")).collect::<Vec<_>>());
    let labels = Labels::from_assignments(
        8,
        2,
        &(0..8)
            .map(|i| (i, vec![usize::from(i >= 4)]))
            .collect::<Vec<_>>(),
        LabelMode::Multiclass,
    )
    .unwrap();
    let source = AttributedNetwork::new(
        s_edges,
        attrs(false),
        names.clone(),
        Some(labels),
        LabelMode::Multiclass,
    )
    .unwrap();
    let target =
        AttributedNetwork::new(t_edges, attrs(true), names, None, LabelMode::Multiclass).unwrap();
    align_attributes(source, target).unwrap()
}

/// A multilabel counterpart of [`toy_pair`]: same graphs, each node
/// tagged with its cluster and the middle nodes tagged with both.
pub(crate) fn toy_pair_multilabel() -> NetworkPair {
    let base = toy_pair(false);
    let assignments: Vec<(usize, Vec<usize>)> = (0..8)
        .map(|i| {
            let mut ks = vec![usize::from(i >= 4)];
            if (3..=4).contains(&i) {
                ks = vec![0, 1];
            }
            (i, ks)
        })
        .collect();
    let labels = Labels::from_assignments(8, 2, &assignments, LabelMode::Multilabel).unwrap();
    let rebuild = |net: &NetworkPair| {
        let s = &net.source;
        let t = &net.target;
        let source = AttributedNetwork::new(
            s.edges().to_vec(),
            s.attrs().clone(),
            None,
            Some(labels.clone()),
            LabelMode::Multilabel,
        )
        .unwrap();
        let target = AttributedNetwork::new(
            t.edges().to_vec(),
            t.attrs().clone(),
            None,
            None,
            LabelMode::Multilabel,
        )
        .unwrap();
        align_attributes(source, target).unwrap()
    };
    rebuild(&base)
}

/// A configuration small and short enough for unit tests.
pub(crate) fn tiny_config() -> TrainConfig {
    TrainConfig {
        k_steps: 2,
        fe_hidden: vec![6],
        embed_dim: 5,
        disc_hidden: vec![4],
        batch_size: 8,
        epochs: 3,
        seed: 42,
        variant: ModelVariant::Full,
        ..TrainConfig::default()
    }
}
