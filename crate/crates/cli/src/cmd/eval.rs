use std::path::Path;

use fsle::fewshot::evaluate;
use fsle::io::{load_embeddings, EmbeddingDataset};
use fsle::seed::{self, purpose};
use serde::Serialize;

use super::{emit, required, Model};
use crate::error::Result;
use crate::settings::{EvalSettings, FileConfig};
use crate::EvalArgs;

#[derive(Serialize)]
struct Resolved {
    #[serde(flatten)]
    settings: EvalSettings,
    workers: Option<usize>,
}

fn resolve(args: EvalArgs, file: &FileConfig, seed: u64) -> Resolved {
    let mut s = file.eval.clone();
    s.embeddings = args.embeddings.or(s.embeddings);
    s.model = args.model.or(s.model);
    s.base = args.base.or(s.base);
    let p = &mut s.protocol;
    p.n_way = args.way.unwrap_or(p.n_way);
    p.k_shot = args.shot.unwrap_or(p.k_shot);
    p.q_queries = args.queries.unwrap_or(p.q_queries);
    p.episodes = args.episodes.unwrap_or(p.episodes);
    p.seeds = args.seeds.unwrap_or(p.seeds);
    p.root_seed = seed::split(seed, purpose::EVAL);
    let c = &mut s.classifier;
    if args.no_preprocess {
        c.preprocess = false;
    }
    if args.transductive || args.iterations.is_some() || args.temperature.is_some() {
        let mut t = c.transductive.unwrap_or_default();
        t.iterations = args.iterations.unwrap_or(t.iterations);
        t.temperature = args.temperature.unwrap_or(t.temperature);
        c.transductive = Some(t);
    }
    Resolved {
        settings: s,
        workers: args.workers.or(file.workers),
    }
}

fn mean_vector(ds: &EmbeddingDataset) -> Vec<f32> {
    let mut acc = vec![0.0f64; ds.dim()];
    for (_, v) in ds.iter() {
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x as f64;
        }
    }
    let n = ds.len().max(1) as f64;
    acc.iter().map(|a| (a / n) as f32).collect()
}

pub fn run(args: EvalArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> Result<()> {
    let resolved = resolve(args, file, seed);
    let s = &resolved.settings;
    let path = required(s.embeddings.as_deref(), "--embeddings", "eval")?;
    let model = s.model.as_deref().map(Model::load).transpose()?;
    let prepare = |path: &Path| -> Result<EmbeddingDataset> {
        let ds = load_embeddings(path)?;
        match &model {
            Some(m) => m.embed(&ds),
            None => Ok(ds),
        }
    };
    let ds = prepare(path)?;
    let mut classifier = s.classifier.clone();
    if let Some(base) = s.base.as_deref() {
        classifier.base_mean = Some(mean_vector(&prepare(base)?));
    }
    let report = evaluate(&ds, &s.protocol, &classifier, resolved.workers)?;
    emit(out, "eval", seed, &resolved, report)
}
