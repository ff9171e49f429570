use serde::{Deserialize, Serialize};

use super::ncm::{ncm_classify, squared_distance, Prototype};
use super::{FewShotError, Result};

/// Transductive refinement settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftKMeans {
    pub iterations: usize,
    pub temperature: f64,
}

impl Default for SoftKMeans {
    fn default() -> Self {
        Self {
            iterations: 10,
            temperature: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transductive {
    pub prototypes: Vec<Prototype>,
    /// Per query, soft assignment weights over `prototypes` (each row sums to 1).
    pub assignments: Vec<Vec<f64>>,
    /// Nearest refined prototype per query.
    pub predictions: Vec<u32>,
}

fn weights(prototypes: &[Prototype], q: &[f32], temperature: f64) -> Vec<f64> {
    let logits: Vec<f64> = prototypes
        .iter()
        .map(|p| -squared_distance(&p.vector, q) / temperature)
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.iter().map(|e| e / total).collect()
}

/// Refines prototypes with the unlabelled queries. Each iteration sets
///
/// `w_qj = softmax_j(-|q - c_j|^2 / T)` and
/// `c_j = (n_j c_j^0 + sum_q w_qj q) / (n_j + sum_q w_qj)`,
///
/// where `c_j^0` is the support mean over `n_j` support vectors. Support
/// labels never change. With zero iterations the prototypes are returned
/// unchanged and predictions equal plain nearest-class-mean.
pub fn soft_kmeans_transductive(
    prototypes: &[Prototype],
    queries: &[&[f32]],
    config: SoftKMeans,
) -> Result<Transductive> {
    if !(config.temperature > 0.0 && config.temperature.is_finite()) {
        return Err(FewShotError::InvalidParameter {
            name: "temperature",
            reason: format!("{} is not a positive finite number", config.temperature),
        });
    }
    if prototypes.is_empty() {
        return Err(FewShotError::NoPrototypes);
    }
    let dim = prototypes[0].vector.len();
    for v in prototypes
        .iter()
        .map(|p| &p.vector[..])
        .chain(queries.iter().copied())
    {
        if v.len() != dim {
            return Err(FewShotError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let mut current = prototypes.to_vec();
    for _ in 0..config.iterations {
        let mut sums: Vec<Vec<f64>> = prototypes
            .iter()
            .map(|p| {
                p.vector
                    .iter()
                    .map(|&x| x as f64 * p.support_count as f64)
                    .collect()
            })
            .collect();
        let mut mass: Vec<f64> = prototypes.iter().map(|p| p.support_count as f64).collect();
        for q in queries {
            let w = weights(&current, q, config.temperature);
            for (j, &wj) in w.iter().enumerate() {
                mass[j] += wj;
                for (s, &x) in sums[j].iter_mut().zip(q.iter()) {
                    *s += wj * x as f64;
                }
            }
        }
        for ((p, s), m) in current.iter_mut().zip(&sums).zip(&mass) {
            if *m > 0.0 {
                p.vector = s.iter().map(|v| (v / m) as f32).collect();
            }
        }
    }
    let assignments = queries
        .iter()
        .map(|q| weights(&current, q, config.temperature))
        .collect();
    let predictions = queries
        .iter()
        .map(|q| ncm_classify(&current, q).map(|(c, _)| c))
        .collect::<Result<_>>()?;
    Ok(Transductive {
        prototypes: current,
        assignments,
        predictions,
    })
}
