use std::collections::BTreeMap;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FewShotError, Result};
use crate::io::EmbeddingDataset;

/// One N-way K-shot task as item indices into a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub n_way: usize,
    pub k_shot: usize,
    pub q_queries: usize,
    /// Sampled class labels, in sampling order.
    pub classes: Vec<u32>,
    /// `k_shot` indices per class, grouped in `classes` order.
    pub support: Vec<usize>,
    /// `q_queries` indices per class, grouped in `classes` order.
    pub queries: Vec<usize>,
}

impl Episode {
    pub fn support_items<'a>(&'a self, ds: &'a EmbeddingDataset) -> Vec<(u32, &'a [f32])> {
        self.support
            .iter()
            .map(|&i| (ds.labels()[i], ds.vector(i)))
            .collect()
    }

    pub fn query_items<'a>(&'a self, ds: &'a EmbeddingDataset) -> Vec<(u32, &'a [f32])> {
        self.queries
            .iter()
            .map(|&i| (ds.labels()[i], ds.vector(i)))
            .collect()
    }
}

/// RNG for episode `index` under `seed`: the ChaCha8 generator seeded with
/// `seed`, on stream `index`. Episodes are thereby independent of how they
/// are distributed over workers.
pub fn episode_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Per-class item lists of a dataset, validated once for repeated sampling.
#[derive(Debug, Clone)]
pub struct EpisodeSampler {
    classes: Vec<(u32, Vec<usize>)>,
    n_way: usize,
    k_shot: usize,
    q_queries: usize,
}

impl EpisodeSampler {
    pub fn new(
        ds: &EmbeddingDataset,
        n_way: usize,
        k_shot: usize,
        q_queries: usize,
    ) -> Result<Self> {
        if n_way == 0 || k_shot == 0 {
            return Err(FewShotError::InvalidParameter {
                name: "protocol",
                reason: format!("n_way {n_way} and k_shot {k_shot} must be positive"),
            });
        }
        let by_class: BTreeMap<u32, Vec<usize>> = ds.by_class();
        if by_class.len() < n_way {
            return Err(FewShotError::InsufficientClasses {
                have: by_class.len(),
                need: n_way,
            });
        }
        let need = k_shot + q_queries;
        if let Some((&class, items)) = by_class.iter().find(|(_, v)| v.len() < need) {
            return Err(FewShotError::InsufficientData {
                class,
                have: items.len(),
                need,
            });
        }
        Ok(Self {
            classes: by_class.into_iter().collect(),
            n_way,
            k_shot,
            q_queries,
        })
    }

    /// Classes without replacement, then items without replacement within
    /// each chosen class; the first `k_shot` go to the support set.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Episode {
        let chosen = index::sample(rng, self.classes.len(), self.n_way);
        let mut ep = Episode {
            n_way: self.n_way,
            k_shot: self.k_shot,
            q_queries: self.q_queries,
            classes: Vec::with_capacity(self.n_way),
            support: Vec::with_capacity(self.n_way * self.k_shot),
            queries: Vec::with_capacity(self.n_way * self.q_queries),
        };
        for c in chosen.iter() {
            let (label, items) = &self.classes[c];
            ep.classes.push(*label);
            let picks = index::sample(rng, items.len(), self.k_shot + self.q_queries);
            for (i, p) in picks.iter().enumerate() {
                if i < self.k_shot {
                    ep.support.push(items[p]);
                } else {
                    ep.queries.push(items[p]);
                }
            }
        }
        ep
    }
}

/// Samples one episode from `ds` with `rng_seed` (stream 0).
pub fn sample_episode(
    ds: &EmbeddingDataset,
    n_way: usize,
    k_shot: usize,
    q_queries: usize,
    rng_seed: u64,
) -> Result<Episode> {
    let sampler = EpisodeSampler::new(ds, n_way, k_shot, q_queries)?;
    Ok(sampler.sample(&mut episode_rng(rng_seed, 0)))
}
