use std::path::Path;

use fsle::backbone::{complexity_of_config, ArchConfig};
use serde_json::json;

use super::Model;
use crate::error::{CliError, Result};
use crate::settings::{FileConfig, InspectSettings};
use crate::InspectArgs;

/// Square side used when neither a flag nor a bundle gives one.
const DEFAULT_RESOLUTION: usize = 84;

pub fn run(args: InspectArgs, file: &FileConfig, seed: u64, out: Option<&Path>) -> Result<()> {
    let mut s: InspectSettings = file.inspect.clone();
    s.model = args.model.or(s.model);
    s.resolution = args.resolution.or(s.resolution);
    s.reference_flops = args.reference_flops.or(s.reference_flops);
    s.per_layer |= args.per_layer;
    if let Some(f) = s.reference_flops {
        if !(f > 0.0 && f.is_finite()) {
            return Err(CliError::config(format!(
                "reference FLOPs {f} must be positive"
            )));
        }
    }

    let config = match s.model.as_deref().map(Model::load).transpose()? {
        Some(Model::Student(student, arch)) => {
            let result = json!({
                "model": "student",
                "param_count": student.param_count(),
                "input_shape": arch.input_shape,
                "teacher_dim": arch.teacher_dim,
            });
            return super::emit(out, "inspect", seed, &s, result);
        }
        Some(Model::Backbone(g)) => g.config().clone(),
        None => ArchConfig::mobilevit_xxs((DEFAULT_RESOLUTION, DEFAULT_RESOLUTION)),
    };
    let config = match s.resolution {
        Some(r) => config.with_resolution((r, r)),
        None => config,
    };
    s.resolution.get_or_insert(config.input_resolution.0);
    let mut report = complexity_of_config(&config)?;
    report.reference = s.reference_flops.map(|f| report.compare_to(f));
    if !s.per_layer {
        report.per_layer.clear();
    }
    super::emit(out, "inspect", seed, &s, report)
}
