//! Minibatch sampling: each batch takes half its rows from the source
//! network and half from the target network.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{CoreError, Result};

/// One training batch. Source rows always precede target rows when the
/// two halves are stacked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

/// A shuffled pass over one network's nodes that reshuffles and
/// continues whenever it runs out, so every node is visited once per
/// permutation regardless of batch size.
#[derive(Debug, Clone)]
struct NodeStream {
    order: Vec<usize>,
    pos: usize,
}

impl NodeStream {
    fn new(n: usize, rng: &mut impl Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        NodeStream { order, pos: 0 }
    }

    fn draw(&mut self, count: usize, rng: &mut impl Rng, out: &mut Vec<usize>) {
        out.clear();
        while out.len() < count {
            if self.pos == self.order.len() {
                self.order.shuffle(rng);
                self.pos = 0;
            }
            let take = (count - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + take]);
            self.pos += take;
        }
    }
}

/// Draws [`MiniBatch`]es, always source half first so a shared RNG
/// yields one deterministic sequence.
#[derive(Debug, Clone)]
pub struct MiniBatchSampler {
    source: NodeStream,
    target: NodeStream,
    half: usize,
}

impl MiniBatchSampler {
    pub fn new(
        n_source: usize,
        n_target: usize,
        batch_size: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if batch_size < 2 || batch_size % 2 != 0 {
            return Err(CoreError::Argument(format!(
                "batch_size must be even and at least 2, got {batch_size}"
            )));
        }
        if n_source == 0 || n_target == 0 {
            return Err(CoreError::Validation(
                "cannot sample batches from an empty network".into(),
            ));
        }
        let source = NodeStream::new(n_source, rng);
        let target = NodeStream::new(n_target, rng);
        Ok(MiniBatchSampler {
            source,
            target,
            half: batch_size / 2,
        })
    }

    pub fn half(&self) -> usize {
        self.half
    }

    pub fn next_batch(&mut self, rng: &mut impl Rng) -> MiniBatch {
        let mut source = Vec::with_capacity(self.half);
        let mut target = Vec::with_capacity(self.half);
        self.source.draw(self.half, rng, &mut source);
        self.target.draw(self.half, rng, &mut target);
        MiniBatch { source, target }
    }
}

/// Batches per epoch: enough for the larger network to be visited about
/// once, each batch carrying `batch_size / 2` of its nodes.
pub fn batches_per_epoch(n_source: usize, n_target: usize, batch_size: usize) -> usize {
    let half = (batch_size / 2).max(1);
    n_source.max(n_target).div_ceil(half).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn halves_come_from_their_own_networks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = MiniBatchSampler::new(30, 20, 10, &mut rng).unwrap();
        for _ in 0..50 {
            let b = s.next_batch(&mut rng);
            assert_eq!(b.source.len(), 5);
            assert_eq!(b.target.len(), 5);
            assert!(b.source.iter().all(|&i| i < 30));
            assert!(b.target.iter().all(|&i| i < 20));
        }
    }

    #[test]
    fn one_permutation_covers_every_node_exactly_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = MiniBatchSampler::new(12, 12, 8, &mut rng).unwrap();
        let mut seen = vec![0usize; 12];
        for _ in 0..3 {
            let b = s.next_batch(&mut rng);
            for &i in &b.source {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "first 12 draws: {seen:?}");
    }

    #[test]
    fn sampling_is_deterministic_for_a_seed() {
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut s = MiniBatchSampler::new(50, 40, 12, &mut rng).unwrap();
            (0..20).map(|_| s.next_batch(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn tiny_networks_wrap_within_a_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = MiniBatchSampler::new(2, 3, 8, &mut rng).unwrap();
        let b = s.next_batch(&mut rng);
        assert_eq!(b.source.len(), 4);
        assert!(b.source.iter().all(|&i| i < 2));
    }

    #[test]
    fn epoch_length_tracks_the_larger_network() {
        assert_eq!(batches_per_epoch(600, 600, 100), 12);
        assert_eq!(batches_per_epoch(10, 95, 20), 10);
        assert_eq!(batches_per_epoch(3, 3, 100), 1);
    }

    #[test]
    fn empty_networks_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(MiniBatchSampler::new(0, 5, 4, &mut rng).is_err());
        assert!(MiniBatchSampler::new(5, 5, 7, &mut rng).is_err());
    }
}
