use fsle::fewshot::{
    episode_rng, evaluate, ncm_classify, ncm_fit, preprocess, preprocess_one, sample_episode,
    soft_kmeans_transductive, ClassifierConfig, EpisodeSampler, FewShotError, Protocol, Prototype,
    SoftKMeans,
};
use fsle::io::EmbeddingDataset;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

mod oracles;

fn gaussian_dataset(
    classes: u32,
    per_class: usize,
    dim: usize,
    delta: f32,
    seed: u64,
) -> EmbeddingDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ds = EmbeddingDataset::new(dim);
    for c in 0..classes {
        for _ in 0..per_class {
            let v: Vec<f32> = (0..dim)
                .map(|d| {
                    let noise: f32 = StandardNormal.sample(&mut rng);
                    noise + if d == c as usize { delta } else { 0.0 }
                })
                .collect();
            ds.push(c, &v).unwrap();
        }
    }
    ds
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    shots: usize,
    dim: usize,
) -> (Vec<u32>, Vec<(u32, Vec<f32>)>) {
    let mut classes: Vec<u32> = (0..5).map(|_| rng.random_range(0..1000)).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut support = Vec::new();
    for &c in &classes {
        for _ in 0..shots {
            support.push((c, (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()));
        }
    }
    // Interleave classes so grouping is exercised.
    for i in (1..support.len()).rev() {
        let j = rng.random_range(0..=i);
        support.swap(i, j);
    }
    (classes, support)
}

fn views(s: &[(u32, Vec<f32>)]) -> Vec<(u32, &[f32])> {
    s.iter().map(|(l, v)| (*l, &v[..])).collect()
}

#[test]
fn ncm_matches_brute_force_on_1000_instances() {
    assert_eq!(oracles::ncm_mismatches(77, 1000, 10), 0);
}

#[test]
fn one_shot_prototype_is_the_support_vector() {
    let v = [0.25f32, -7.0, 3.5];
    let p = ncm_fit(&[(4, &v[..])], &[4], None).unwrap();
    assert_eq!(p[0].vector, v.to_vec());
}

#[test]
fn preprocessed_norms_are_zero_or_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mean: Vec<f32> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut batch: Vec<Vec<f32>> = (0..500)
        .map(|_| (0..64).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    batch.push(mean.clone());
    for v in preprocess(&batch, &mean).unwrap() {
        let n = v.iter().map(|x| (*x as f64).powi(2)).sum::<f64>().sqrt();
        assert!(n == 0.0 || (n - 1.0).abs() <= 1e-6, "{n}");
    }
}

#[test]
fn preprocessing_applies_to_fit() {
    let a = [3.0f32, 4.0];
    let p = ncm_fit(&[(0, &a[..])], &[0], Some(&[0.0, 0.0])).unwrap();
    assert!((p[0].vector[0] - 0.6).abs() < 1e-7);
}

#[test]
fn soft_kmeans_without_iterations_is_ncm() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (classes, support) = random_instance(&mut rng, 2, 6);
        let protos = ncm_fit(&views(&support), &classes, None).unwrap();
        let queries: Vec<Vec<f32>> = (0..20)
            .map(|_| (0..6).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let qv: Vec<&[f32]> = queries.iter().map(|q| &q[..]).collect();
        let r = soft_kmeans_transductive(
            &protos,
            &qv,
            SoftKMeans {
                iterations: 0,
                temperature: 1.0,
            },
        )
        .unwrap();
        assert_eq!(r.prototypes, protos);
        for (q, pred) in qv.iter().zip(&r.predictions) {
            assert_eq!(ncm_classify(&protos, q).unwrap().0, *pred);
        }
        for w in &r.assignments {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

/// Hard k-means with fixed support labels: each query joins its nearest
/// centre, centres are means of support plus joined queries.
fn hard_kmeans(
    protos: &[Prototype],
    queries: &[Vec<f32>],
    iterations: usize,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = protos[0].vector.len();
    let mut centres: Vec<Vec<f64>> = protos
        .iter()
        .map(|p| p.vector.iter().map(|&x| x as f64).collect())
        .collect();
    let assign = |centres: &Vec<Vec<f64>>| -> Vec<usize> {
        queries
            .iter()
            .map(|q| {
                (0..centres.len())
                    .min_by(|&a, &b| {
                        let da: f64 = (0..dim)
                            .map(|k| (centres[a][k] - q[k] as f64).powi(2))
                            .sum();
                        let db: f64 = (0..dim)
                            .map(|k| (centres[b][k] - q[k] as f64).powi(2))
                            .sum();
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap()
            })
            .collect()
    };
    for _ in 0..iterations {
        let a = assign(&centres);
        for (j, p) in protos.iter().enumerate() {
            let n = p.support_count as f64;
            let mut sum: Vec<f64> = p.vector.iter().map(|&x| x as f64 * n).collect();
            let mut count = n;
            for (q, &aj) in queries.iter().zip(&a) {
                if aj == j {
                    for k in 0..dim {
                        sum[k] += q[k] as f64;
                    }
                    count += 1.0;
                }
            }
            centres[j] = sum.iter().map(|s| s / count).collect();
        }
    }
    let a = assign(&centres);
    (centres, a)
}

#[test]
fn low_temperature_matches_hard_kmeans() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let centres = [[0.0f32, 0.0], [10.0, 0.0], [0.0, 10.0]];
    let mut support = Vec::new();
    let mut queries = Vec::new();
    for (c, m) in centres.iter().enumerate() {
        for _ in 0..2 {
            support.push((
                c as u32,
                vec![
                    m[0] + rng.random_range(-1.0..1.0),
                    m[1] + rng.random_range(-1.0..1.0),
                ],
            ));
        }
        for _ in 0..6 {
            queries.push(vec![
                m[0] + rng.random_range(-1.5..1.5),
                m[1] + rng.random_range(-1.5..1.5),
            ]);
        }
    }
    let protos = ncm_fit(&views(&support), &[0, 1, 2], None).unwrap();
    let qv: Vec<&[f32]> = queries.iter().map(|q| &q[..]).collect();
    let soft = soft_kmeans_transductive(
        &protos,
        &qv,
        SoftKMeans {
            iterations: 5,
            temperature: 1e-3,
        },
    )
    .unwrap();
    let (hard_centres, hard_assign) = hard_kmeans(&protos, &queries, 5);
    for (p, h) in soft.prototypes.iter().zip(&hard_centres) {
        for (a, b) in p.vector.iter().zip(h) {
            assert!((*a as f64 - b).abs() < 1e-5, "{a} vs {b}");
        }
    }
    for (w, &h) in soft.assignments.iter().zip(&hard_assign) {
        assert!(w[h] > 1.0 - 1e-9);
    }
}

#[test]
fn sampling_is_deterministic_and_disjoint() {
    let ds = gaussian_dataset(10, 30, 4, 1.0, 1);
    let a = sample_episode(&ds, 5, 3, 15, 99).unwrap();
    let b = sample_episode(&ds, 5, 3, 15, 99).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.support.len(), 15);
    assert_eq!(a.queries.len(), 75);
    let mut all: Vec<usize> = a.support.iter().chain(&a.queries).copied().collect();
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), 90);
    for (ci, &c) in a.classes.iter().enumerate() {
        assert!(a.support[ci * 3..ci * 3 + 3]
            .iter()
            .all(|&i| ds.labels()[i] == c));
        assert!(a.queries[ci * 15..ci * 15 + 15]
            .iter()
            .all(|&i| ds.labels()[i] == c));
    }
}

#[test]
fn exact_size_dataset_uses_every_item_once() {
    let ds = gaussian_dataset(5, 6, 2, 1.0, 2);
    let ep = sample_episode(&ds, 5, 2, 4, 3).unwrap();
    let mut all: Vec<usize> = ep.support.iter().chain(&ep.queries).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..30).collect::<Vec<_>>());
}

#[test]
fn class_selection_is_uniform() {
    let ds = gaussian_dataset(10, 20, 2, 1.0, 3);
    let sampler = EpisodeSampler::new(&ds, 5, 1, 15).unwrap();
    let draws = 10_000;
    let mut counts = [0usize; 10];
    let mut first = [0usize; 10];
    for e in 0..draws {
        let ep = sampler.sample(&mut episode_rng(1234, e));
        for &c in &ep.classes {
            counts[c as usize] += 1;
        }
        first[ep.classes[0] as usize] += 1;
    }
    // Each class appears with probability 1/2.
    let sigma = (draws as f64 * 0.25).sqrt();
    for c in counts {
        assert!(
            (c as f64 - draws as f64 * 0.5).abs() < 3.0 * sigma,
            "{counts:?}"
        );
    }
    // Chi-square on which class is drawn first: 9 dof, 99.9% quantile 27.88.
    let expect = draws as f64 / 10.0;
    let chi2: f64 = first
        .iter()
        .map(|&o| (o as f64 - expect).powi(2) / expect)
        .sum();
    assert!(chi2 < 27.88, "chi2 {chi2}");
}

#[test]
fn insufficient_data_names_class() {
    let mut ds = gaussian_dataset(5, 10, 2, 1.0, 4);
    ds.push(9, &[0.0, 0.0]).unwrap();
    assert_eq!(
        sample_episode(&ds, 5, 1, 15, 0).unwrap_err(),
        FewShotError::InsufficientData {
            class: 0,
            have: 10,
            need: 16
        }
    );
    assert_eq!(
        sample_episode(&ds, 5, 1, 5, 0).unwrap_err(),
        FewShotError::InsufficientData {
            class: 9,
            have: 1,
            need: 6
        }
    );
    let small = gaussian_dataset(3, 20, 2, 1.0, 4);
    assert_eq!(
        sample_episode(&small, 5, 1, 5, 0).unwrap_err(),
        FewShotError::InsufficientClasses { have: 3, need: 5 }
    );
}

fn protocol(episodes: usize, seeds: usize) -> Protocol {
    Protocol {
        episodes,
        seeds,
        ..Protocol::default()
    }
}

#[test]
fn collapsed_classes_are_perfectly_separable() {
    let mut ds = EmbeddingDataset::new(3);
    for c in 0..8u32 {
        for _ in 0..20 {
            ds.push(c, &[c as f32, (c * c) as f32, 1.0]).unwrap();
        }
    }
    let r = evaluate(
        &ds,
        &protocol(200, 2),
        &ClassifierConfig {
            preprocess: false,
            ..Default::default()
        },
        None,
    )
    .unwrap();
    assert_eq!(r.grand_mean, 1.0);
    assert_eq!(r.ci95_half_width, 0.0);
}

#[test]
fn chance_level_and_ci_scaling() {
    let ds = gaussian_dataset(20, 40, 8, 0.0, 6);
    let cfg = ClassifierConfig::default();
    let small = evaluate(&ds, &protocol(500, 2), &cfg, Some(4)).unwrap();
    assert!(
        (small.grand_mean - 0.2).abs() <= 3.0 * small.ci95_half_width,
        "{small:?}"
    );
    let big = evaluate(&ds, &protocol(2000, 2), &cfg, Some(4)).unwrap();
    assert!((big.grand_mean - 0.2).abs() <= 3.0 * big.ci95_half_width);
    let ratio = big.ci95_half_width / small.ci95_half_width;
    assert!((ratio - 0.5).abs() <= 0.05, "ratio {ratio}");
}

#[test]
fn results_independent_of_worker_count() {
    let ds = gaussian_dataset(12, 25, 6, 1.5, 7);
    let cfg = ClassifierConfig {
        transductive: Some(SoftKMeans::default()),
        ..Default::default()
    };
    let p = protocol(300, 3);
    let base = evaluate(&ds, &p, &cfg, None).unwrap();
    for w in [1, 2, 3, 8] {
        let r = evaluate(&ds, &p, &cfg, Some(w)).unwrap();
        assert_eq!(r.grand_mean.to_bits(), base.grand_mean.to_bits());
        assert_eq!(r.per_seed_mean, base.per_seed_mean);
        assert_eq!(r.ci95_half_width.to_bits(), base.ci95_half_width.to_bits());
    }
    assert_eq!(base.per_seed_mean.len(), 3);
    let pooled = base.per_seed_mean.iter().sum::<f64>() / 3.0;
    assert!((pooled - base.grand_mean).abs() < 1e-12);
}

// Monte-Carlo population accuracy of 5-way 1-shot NCM, 15 queries, for
// isotropic unit Gaussians in 32 dims with means 2.0 * e_c, from 400,000
// episodes of an independent numpy simulation.
const GAUSS_ORACLE: f64 = 0.343_72;

#[test]
fn gaussian_clusters_match_monte_carlo_oracle() {
    let ds = gaussian_dataset(20, 500, 32, 2.0, 8);
    let cfg = ClassifierConfig {
        preprocess: false,
        ..Default::default()
    };
    let r = evaluate(&ds, &protocol(4000, 1), &cfg, Some(4)).unwrap();
    assert!(
        (r.grand_mean - GAUSS_ORACLE).abs() <= 3.0 * r.ci95_half_width,
        "{} vs {GAUSS_ORACLE} (ci {})",
        r.grand_mean,
        r.ci95_half_width
    );
}

#[test]
fn accuracy_invariant_under_relabeling() {
    let ds = gaussian_dataset(8, 20, 4, 1.5, 9);
    // Order-preserving relabel keeps the sampler's class order, so episodes
    // pick the same items.
    let relabeled = EmbeddingDataset::from_parts(
        ds.dim(),
        ds.labels().iter().map(|l| l * 7 + 100).collect(),
        ds.data().to_vec(),
    )
    .unwrap();
    let p = protocol(200, 1);
    let cfg = ClassifierConfig::default();
    let a = evaluate(&ds, &p, &cfg, None).unwrap();
    let b = evaluate(&relabeled, &p, &cfg, None).unwrap();
    assert_eq!(a.grand_mean, b.grand_mean);
}

proptest! {
    #[test]
    fn classify_invariant_to_power_of_two_scaling(
        seed in any::<u64>(),
        exp in -8i32..8,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (classes, support) = random_instance(&mut rng, 2, 5);
        let protos = ncm_fit(&views(&support), &classes, None).unwrap();
        let q: Vec<f32> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s = 2f32.powi(exp);
        let scaled: Vec<Prototype> = protos
            .iter()
            .map(|p| Prototype { vector: p.vector.iter().map(|x| x * s).collect(), ..p.clone() })
            .collect();
        let qs: Vec<f32> = q.iter().map(|x| x * s).collect();
        prop_assert_eq!(ncm_classify(&protos, &q).unwrap().0, ncm_classify(&scaled, &qs).unwrap().0);
    }

    #[test]
    fn classify_invariant_to_prototype_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (classes, support) = random_instance(&mut rng, 1, 3);
        let protos = ncm_fit(&views(&support), &classes, None).unwrap();
        let mut rev = protos.clone();
        rev.reverse();
        let q: Vec<f32> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        prop_assert_eq!(ncm_classify(&protos, &q).unwrap().0, ncm_classify(&rev, &q).unwrap().0);
    }

    #[test]
    fn preprocess_idempotent_on_unit_vectors(v in proptest::collection::vec(-5.0f32..5.0, 1..16)) {
        let zero = vec![0.0f32; v.len()];
        let once = preprocess_one(&v, &zero).unwrap();
        let twice = preprocess_one(&once, &zero).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }
}
