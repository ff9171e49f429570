use std::path::{Path, PathBuf};

use fsle::backbone::{complexity_of_config, random_weights, ArchConfig, ModelGraph};
use fsle::energy::{synthetic_trace, write_trace};
use fsle::io::{save_bundle, save_embeddings};
use fsle::seed::{self, purpose};
use fsle::synth::{gaussian_classes, teacher_task};
use serde_json::{json, Value};

use super::emit;
use crate::error::{CliError, Result};
use crate::settings::FileConfig;
use crate::GenCommand;

pub fn run(cmd: GenCommand, file: &FileConfig, seed: u64, out: Option<&Path>) -> Result<()> {
    let gen_seed = seed::split(seed, purpose::GEN);
    let (kind, config, written, result): (&str, Value, Vec<PathBuf>, Value) = match cmd {
        GenCommand::Embeddings {
            out: path,
            classes,
            per_class,
            dim,
            separation,
            noise,
        } => {
            let mut spec = file.gen.embeddings.clone();
            spec.classes = classes.unwrap_or(spec.classes);
            spec.per_class = per_class.unwrap_or(spec.per_class);
            spec.dim = dim.unwrap_or(spec.dim);
            spec.separation = separation.unwrap_or(spec.separation);
            spec.noise = noise.unwrap_or(spec.noise);
            let (ds, _) = gaussian_classes(&spec, gen_seed);
            save_embeddings(&path, &ds)?;
            let result =
                json!({ "items": ds.len(), "classes": ds.classes().len(), "dim": ds.dim() });
            ("embeddings", json!(spec), vec![path], result)
        }
        GenCommand::Teacher {
            inputs,
            targets,
            split,
            classes,
            per_class,
        } => {
            let mut spec = file.gen.teacher.clone();
            spec.classes = classes.unwrap_or(spec.classes);
            spec.per_class = per_class.unwrap_or(spec.per_class);
            let (xs, ts) = teacher_task(&spec, gen_seed, seed::split(gen_seed, 1 + split));
            save_embeddings(&inputs, &xs)?;
            save_embeddings(&targets, &ts)?;
            let result = json!({
                "items": xs.len(),
                "input_dim": xs.dim(),
                "teacher_dim": ts.dim(),
            });
            let mut config = json!(spec);
            config["split"] = json!(split);
            ("teacher", config, vec![inputs, targets], result)
        }
        GenCommand::Bundle {
            out: path,
            resolution,
        } => {
            let config = ArchConfig::mobilevit_xxs((resolution, resolution));
            let mut g = ModelGraph::build(&config)?;
            let w = random_weights(&g, seed::split(seed, purpose::WEIGHTS));
            g.load_weights(w)?;
            save_bundle(&path, &g.to_bundle()?)?;
            let params = complexity_of_config(&config)?.param_count;
            (
                "bundle",
                json!({ "arch": "mobilevit_xxs", "resolution": resolution }),
                vec![path],
                json!({ "param_count": params }),
            )
        }
        GenCommand::Trace {
            out: path,
            mean_power_w,
            duration_s,
            rate_hz,
            voltage_v,
            ripple_w,
            noise_w,
        } => {
            let mut spec = file.gen.trace.clone();
            spec.mean_power_w = mean_power_w.unwrap_or(spec.mean_power_w);
            spec.duration_s = duration_s.unwrap_or(spec.duration_s);
            spec.rate_hz = rate_hz.unwrap_or(spec.rate_hz);
            spec.voltage_v = voltage_v.unwrap_or(spec.voltage_v);
            spec.ripple_w = ripple_w.unwrap_or(spec.ripple_w);
            spec.noise_w = noise_w.unwrap_or(spec.noise_w);
            let trace = synthetic_trace(&spec, gen_seed)?;
            std::fs::write(&path, write_trace(&trace)).map_err(|e| CliError::io(&path, e))?;
            (
                "trace",
                json!(spec),
                vec![path],
                json!({ "samples": trace.samples.len() }),
            )
        }
    };
    let config = json!({ "kind": kind, "spec": config, "written": written });
    emit(out, "gen", seed, config, result)
}
