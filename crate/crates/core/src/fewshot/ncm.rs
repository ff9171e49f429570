use serde::{Deserialize, Serialize};

use super::{FewShotError, Result};

/// Mean of one class's support vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub class_id: u32,
    pub vector: Vec<f32>,
    /// Number of support vectors averaged into `vector`.
    pub support_count: usize,
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(FewShotError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Centers `x` by `base_mean` and scales it to unit L2 norm. A vector that
/// centers to exactly zero stays zero.
pub fn preprocess_one(x: &[f32], base_mean: &[f32]) -> Result<Vec<f32>> {
    check_dim(base_mean.len(), x.len())?;
    let centered: Vec<f64> = x
        .iter()
        .zip(base_mean)
        .map(|(&a, &m)| a as f64 - m as f64)
        .collect();
    let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    Ok(centered.iter().map(|v| (v / norm) as f32).collect())
}

pub fn preprocess(features: &[Vec<f32>], base_mean: &[f32]) -> Result<Vec<Vec<f32>>> {
    features
        .iter()
        .map(|x| preprocess_one(x, base_mean))
        .collect()
}

pub fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// One prototype per entry of `classes` (in that order), each the mean of
/// the support vectors carrying that label. With `base_mean` set, vectors are
/// preprocessed before averaging.
pub fn ncm_fit(
    support: &[(u32, &[f32])],
    classes: &[u32],
    base_mean: Option<&[f32]>,
) -> Result<Vec<Prototype>> {
    let dim = support
        .first()
        .map(|(_, v)| v.len())
        .or(base_mean.map(|m| m.len()))
        .unwrap_or(0);
    let mut sums = vec![vec![0.0f64; dim]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    for &(label, v) in support {
        check_dim(dim, v.len())?;
        let Some(j) = classes.iter().position(|&c| c == label) else {
            continue;
        };
        let pre;
        let v = match base_mean {
            Some(m) => {
                pre = preprocess_one(v, m)?;
                &pre[..]
            }
            None => v,
        };
        for (s, &x) in sums[j].iter_mut().zip(v) {
            *s += x as f64;
        }
        counts[j] += 1;
    }
    classes
        .iter()
        .zip(sums)
        .zip(counts)
        .map(|((&class_id, sum), n)| {
            if n == 0 {
                return Err(FewShotError::EmptyClass { class: class_id });
            }
            Ok(Prototype {
                class_id,
                vector: sum.iter().map(|s| (s / n as f64) as f32).collect(),
                support_count: n,
            })
        })
        .collect()
}

/// Nearest prototype by Euclidean distance; ties go to the lowest class id.
/// Returns the winning class and the distance to every prototype, in
/// prototype order.
pub fn ncm_classify(prototypes: &[Prototype], query: &[f32]) -> Result<(u32, Vec<f64>)> {
    if prototypes.is_empty() {
        return Err(FewShotError::NoPrototypes);
    }
    let mut distances = Vec::with_capacity(prototypes.len());
    let mut best: Option<(f64, u32)> = None;
    for p in prototypes {
        check_dim(p.vector.len(), query.len())?;
        let d = squared_distance(&p.vector, query).sqrt();
        distances.push(d);
        let better = match best {
            None => true,
            Some((bd, bc)) => d < bd || (d == bd && p.class_id < bc),
        };
        if better {
            best = Some((d, p.class_id));
        }
    }
    Ok((best.expect("non-empty").1, distances))
}
