use std::path::Path;

use fsle::backbone::{random_weights, ArchConfig, ModelGraph};
use fsle::energy::bench_inference;
use fsle::seed::{self, purpose};
use fsle::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use super::{emit, Model};
use crate::error::{CliError, Result};
use crate::settings::{BenchSettings, FileConfig};
use crate::BenchArgs;

pub fn run(args: BenchArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut s: BenchSettings = file.bench.clone();
    s.model = args.model.or(s.model);
    s.resolution = args.resolution.or(s.resolution);
    s.repetitions = args.repetitions.unwrap_or(s.repetitions);
    s.warmup = args.warmup.unwrap_or(s.warmup);
    s.images = args.images.unwrap_or(s.images);
    if s.images == 0 {
        return Err(CliError::config("images must be at least 1"));
    }

    let model = match s.model.as_deref().map(Model::load).transpose()? {
        Some(Model::Backbone(g)) => match s.resolution {
            Some(r) if (r, r) != g.config().input_resolution => {
                let weights = g.weights().expect("bundle weights are loaded");
                let mut rebuilt = ModelGraph::build(&g.config().with_resolution((r, r)))?;
                rebuilt.load_weights(weights)?;
                Model::Backbone(rebuilt)
            }
            _ => Model::Backbone(g),
        },
        Some(student) => student,
        None => {
            let r = s.resolution.unwrap_or(84);
            let mut g = ModelGraph::build(&ArchConfig::mobilevit_xxs((r, r)))?;
            let w = random_weights(&g, seed::split(seed, purpose::WEIGHTS));
            g.load_weights(w)?;
            Model::Backbone(g)
        }
    };
    let shape = model.input_shape();
    if let Model::Backbone(g) = &model {
        s.resolution = Some(g.config().input_resolution.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed::split(seed, purpose::GEN));
    let inputs: Vec<Tensor<f32>> = (0..s.images)
        .map(|_| Tensor::from_fn(&shape, |_| StandardNormal.sample(&mut rng)))
        .collect::<Result<_, _>>()
        .map_err(fsle::backbone::BackboneError::from)?;

    let mut i = 0;
    let report = bench_inference(
        || {
            let r = model.forward(&inputs[i % inputs.len()]).map(|_| ());
            i += 1;
            r
        },
        s.repetitions,
        s.warmup,
    )?;
    let result = json!({
        "input_shape": shape,
        "param_count": model.param_count(),
        "benchmark": report,
    });
    emit(out, "bench", seed, &s, result)
}
