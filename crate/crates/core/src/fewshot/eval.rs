use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{episode_rng, Episode, EpisodeSampler};
use super::ncm::{ncm_classify, ncm_fit, preprocess_one};
use super::soft_kmeans::{soft_kmeans_transductive, SoftKMeans};
use super::{FewShotError, Result};
use crate::io::EmbeddingDataset;
use crate::seed;

/// Episodic evaluation protocol. Defaults: 5-way 1-shot, 15 queries per
/// class, 10,000 episodes for each of 5 seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Protocol {
    pub n_way: usize,
    pub k_shot: usize,
    pub q_queries: usize,
    pub episodes: usize,
    pub seeds: usize,
    /// The per-seed episode seeds are `seed::split(root_seed, 0..seeds)`.
    pub root_seed: u64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            n_way: 5,
            k_shot: 1,
            q_queries: 15,
            episodes: 10_000,
            seeds: 5,
            root_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Center and L2-normalize every vector before fitting and classifying.
    pub preprocess: bool,
    /// Base-split mean used for centering. `None` centers on zero.
    #[serde(skip)]
    pub base_mean: Option<Vec<f32>>,
    /// Refine prototypes with soft k-means over the episode's queries.
    pub transductive: Option<SoftKMeans>,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            preprocess: true,
            base_mean: None,
            transductive: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub classifier: ClassifierConfig,
    pub centered_on_base_mean: bool,
    pub seeds: Vec<u64>,
    pub episodes_per_seed: usize,
    pub per_seed_mean: Vec<f64>,
    /// Mean accuracy over all pooled episodes.
    pub grand_mean: f64,
    /// Sample standard deviation of pooled episode accuracies.
    pub std: f64,
    /// `1.96 * std / sqrt(pooled episodes)`.
    pub ci95_half_width: f64,
}

fn episode_accuracy(ds: &EmbeddingDataset, ep: &Episode, cfg: &ClassifierConfig) -> Result<f64> {
    let zeros;
    let base_mean = match (&cfg.base_mean, cfg.preprocess) {
        (_, false) => None,
        (Some(m), true) => Some(&m[..]),
        (None, true) => {
            zeros = vec![0.0f32; ds.dim()];
            Some(&zeros[..])
        }
    };
    let protos = ncm_fit(&ep.support_items(ds), &ep.classes, base_mean)?;
    let queries = ep.query_items(ds);
    let pre: Vec<Vec<f32>> = match base_mean {
        Some(m) => queries
            .iter()
            .map(|(_, v)| preprocess_one(v, m))
            .collect::<Result<_>>()?,
        None => queries.iter().map(|(_, v)| v.to_vec()).collect(),
    };
    let views: Vec<&[f32]> = pre.iter().map(|v| &v[..]).collect();
    let predictions: Vec<u32> = match cfg.transductive {
        Some(sk) => soft_kmeans_transductive(&protos, &views, sk)?.predictions,
        None => views
            .iter()
            .map(|q| ncm_classify(&protos, q).map(|(c, _)| c))
            .collect::<Result<_>>()?,
    };
    let correct = predictions
        .iter()
        .zip(&queries)
        .filter(|(p, (l, _))| *p == l)
        .count();
    Ok(correct as f64 / queries.len().max(1) as f64)
}

/// Runs `protocol.seeds x protocol.episodes` episodes. Episode `e` of seed
/// `s` draws from `episode_rng(s, e)`, so results do not depend on
/// `workers` (`None` runs on the calling thread).
pub fn evaluate(
    ds: &EmbeddingDataset,
    protocol: &Protocol,
    classifier: &ClassifierConfig,
    workers: Option<usize>,
) -> Result<EvalReport> {
    if protocol.episodes == 0 || protocol.seeds == 0 || protocol.q_queries == 0 {
        return Err(FewShotError::InvalidParameter {
            name: "protocol",
            reason: "episodes, seeds and q_queries must be positive".into(),
        });
    }
    if let Some(m) = &classifier.base_mean {
        if m.len() != ds.dim() {
            return Err(FewShotError::DimensionMismatch {
                expected: ds.dim(),
                got: m.len(),
            });
        }
    }
    let sampler = EpisodeSampler::new(ds, protocol.n_way, protocol.k_shot, protocol.q_queries)?;
    let seeds = seed::split_n(protocol.root_seed, protocol.seeds);
    let n = protocol.episodes;
    let run = |i: usize| -> Result<f64> {
        let ep = sampler.sample(&mut episode_rng(seeds[i / n], (i % n) as u64));
        episode_accuracy(ds, &ep, classifier)
    };
    let total = seeds.len() * n;
    let acc: Vec<f64> = match workers {
        None => (0..total).map(run).collect::<Result<_>>()?,
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| FewShotError::Pool(e.to_string()))?;
            pool.install(|| (0..total).into_par_iter().map(run).collect::<Result<_>>())?
        }
    };
    let per_seed_mean = acc
        .chunks(n)
        .map(|c| c.iter().sum::<f64>() / n as f64)
        .collect();
    let grand_mean = acc.iter().sum::<f64>() / total as f64;
    let std = if total > 1 {
        (acc.iter().map(|a| (a - grand_mean).powi(2)).sum::<f64>() / (total - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(EvalReport {
        protocol: protocol.clone(),
        classifier: classifier.clone(),
        centered_on_base_mean: classifier.preprocess && classifier.base_mean.is_some(),
        seeds,
        episodes_per_seed: n,
        per_seed_mean,
        grand_mean,
        std,
        ci95_half_width: 1.96 * std / (total as f64).sqrt(),
    })
}
