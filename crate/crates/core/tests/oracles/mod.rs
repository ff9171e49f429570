#![allow(dead_code)]
//! Independent reference implementations and random case generators shared
//! by the integration tests and the acceptance suite.

use fsle::distill::{Layer, LayerSpec};
use fsle::fewshot::{ncm_classify, ncm_fit};
use fsle::io::{EmbeddingDataset, WeightBundle};
use fsle::tensor::{
    conv2d_grouped, conv_output_dim, multi_head_attention, AttentionParams, Conv2dParams,
};
use fsle::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rand_t(rng: &mut ChaCha8Rng, shape: &[usize], scale: f32) -> Tensor<f32> {
    Tensor::from_fn(shape, |_| scale * rng.random_range(-1.0f32..1.0)).unwrap()
}

pub struct ConvCase {
    pub c_in: usize,
    pub c_out: usize,
    pub groups: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
}

/// Seven nested loops in f64 with explicit bounds checks for padding.
pub fn naive_conv(
    x: &Tensor<f32>,
    k: &Tensor<f32>,
    b: Option<&Tensor<f32>>,
    c: &ConvCase,
) -> (Vec<usize>, Vec<f64>) {
    let oh = (c.h + 2 * c.padding - c.kh) / c.stride + 1;
    let ow = (c.w + 2 * c.padding - c.kw) / c.stride + 1;
    let cig = c.c_in / c.groups;
    let cog = c.c_out / c.groups;
    let xd = x.data();
    let kd = k.data();
    let mut out = vec![0.0f64; c.c_out * oh * ow];
    for o in 0..c.c_out {
        let g = o / cog;
        for i in 0..oh {
            for j in 0..ow {
                let mut acc = b.map_or(0.0, |b| b.data()[o] as f64);
                for ci in 0..cig {
                    let cin = g * cig + ci;
                    for u in 0..c.kh {
                        for v in 0..c.kw {
                            let y = (i * c.stride + u) as isize - c.padding as isize;
                            let z = (j * c.stride + v) as isize - c.padding as isize;
                            if y < 0 || z < 0 || y >= c.h as isize || z >= c.w as isize {
                                continue;
                            }
                            let xv = xd[(cin * c.h + y as usize) * c.w + z as usize] as f64;
                            let kv = kd[((o * cig + ci) * c.kh + u) * c.kw + v] as f64;
                            acc += xv * kv;
                        }
                    }
                }
                out[(o * oh + i) * ow + j] = acc;
            }
        }
    }
    (vec![c.c_out, oh, ow], out)
}

pub fn random_conv_case(rng: &mut ChaCha8Rng) -> ConvCase {
    loop {
        let groups = [1, 1, 2, 3, 4][rng.random_range(0..5)];
        let depthwise = rng.random_bool(0.2);
        let c = ConvCase {
            c_in: if depthwise {
                groups
            } else {
                groups * rng.random_range(1..5)
            },
            c_out: groups * rng.random_range(1..5),
            groups,
            h: rng.random_range(1..14),
            w: rng.random_range(1..14),
            kh: rng.random_range(1..6),
            kw: rng.random_range(1..6),
            stride: rng.random_range(1..4),
            padding: rng.random_range(0..3),
        };
        let p = Conv2dParams::new(c.stride, c.padding);
        if conv_output_dim(c.h, c.kh, p).is_some() && conv_output_dim(c.w, c.kw, p).is_some() {
            return c;
        }
    }
}

/// Largest absolute difference between `conv2d_grouped` and
/// [`naive_conv`] over `cases` random shapes, groups, strides and paddings.
pub fn conv_max_error(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let c = random_conv_case(&mut rng);
        let fan_in = (c.c_in / c.groups * c.kh * c.kw) as f32;
        let x = rand_t(&mut rng, &[c.c_in, c.h, c.w], 1.0);
        let k = rand_t(
            &mut rng,
            &[c.c_out, c.c_in / c.groups, c.kh, c.kw],
            fan_in.sqrt().recip(),
        );
        let b = rng
            .random_bool(0.5)
            .then(|| rand_t(&mut rng, &[c.c_out], 1.0));
        let got = conv2d_grouped(
            &x,
            &k,
            b.as_ref(),
            Conv2dParams::new(c.stride, c.padding),
            c.groups,
        )
        .unwrap();
        let (shape, want) = naive_conv(&x, &k, b.as_ref(), &c);
        assert_eq!(got.shape(), &shape[..]);
        for (g, w) in got.data().iter().zip(&want) {
            worst = worst.max((*g as f64 - w).abs());
        }
    }
    worst
}

/// Attention written out per head with explicit softmax in f64.
pub fn naive_attention(
    x: &Tensor<f32>,
    w: [&Tensor<f32>; 4],
    b: [Option<&Tensor<f32>>; 4],
    heads: usize,
) -> Vec<f64> {
    let [n, d] = x.shape()[..] else {
        panic!("rank")
    };
    let xd = x.data();
    let project = |input: &[f64], m: &Tensor<f32>, bias: Option<&Tensor<f32>>| -> Vec<f64> {
        let mut out = vec![0.0; n * d];
        for t in 0..n {
            for o in 0..d {
                let mut acc = bias.map_or(0.0, |b| b.data()[o] as f64);
                for i in 0..d {
                    acc += m.data()[o * d + i] as f64 * input[t * d + i];
                }
                out[t * d + o] = acc;
            }
        }
        out
    };
    let x64: Vec<f64> = xd.iter().map(|&v| v as f64).collect();
    let q = project(&x64, w[0], b[0]);
    let k = project(&x64, w[1], b[1]);
    let v = project(&x64, w[2], b[2]);
    let hd = d / heads;
    let mut ctx = vec![0.0; n * d];
    for h in 0..heads {
        for i in 0..n {
            let scores: Vec<f64> = (0..n)
                .map(|j| {
                    (0..hd)
                        .map(|e| q[i * d + h * hd + e] * k[j * d + h * hd + e])
                        .sum::<f64>()
                        / (hd as f64).sqrt()
                })
                .collect();
            let z: f64 = scores.iter().map(|s| s.exp()).sum();
            for j in 0..n {
                let a = scores[j].exp() / z;
                for e in 0..hd {
                    ctx[i * d + h * hd + e] += a * v[j * d + h * hd + e];
                }
            }
        }
    }
    project(&ctx, w[3], b[3])
}

/// Largest absolute difference between `multi_head_attention` and
/// [`naive_attention`] over `cases` random token counts, widths and heads.
pub fn attention_max_error(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let heads = rng.random_range(1..5);
        let d = heads * rng.random_range(1..9);
        let n = rng.random_range(1..20);
        let s = (d as f32).sqrt().recip();
        let x = rand_t(&mut rng, &[n, d], 1.0);
        let ws: Vec<Tensor<f32>> = (0..4).map(|_| rand_t(&mut rng, &[d, d], s)).collect();
        let with_bias = rng.random_bool(0.5);
        let bs: Vec<Tensor<f32>> = (0..4).map(|_| rand_t(&mut rng, &[d], 0.5)).collect();
        let bias = |i: usize| with_bias.then(|| &bs[i]);
        let params = AttentionParams {
            wq: &ws[0],
            wk: &ws[1],
            wv: &ws[2],
            wo: &ws[3],
            bq: bias(0),
            bk: bias(1),
            bv: bias(2),
            bo: bias(3),
        };
        let got = multi_head_attention(&x, params, heads).unwrap();
        let want = naive_attention(
            &x,
            [&ws[0], &ws[1], &ws[2], &ws[3]],
            [bias(0), bias(1), bias(2), bias(3)],
            heads,
        );
        assert_eq!(got.shape(), &[n, d]);
        for (g, w) in got.data().iter().zip(&want) {
            worst = worst.max((*g as f64 - w).abs());
        }
    }
    worst
}

/// Five distinct classes with `shots` support vectors each, shuffled.
pub fn five_way_instance(
    rng: &mut ChaCha8Rng,
    shots: usize,
    dim: usize,
) -> (Vec<u32>, Vec<(u32, Vec<f32>)>) {
    let mut classes: Vec<u32> = Vec::new();
    while classes.len() < 5 {
        let c = rng.random_range(0..1000);
        if !classes.contains(&c) {
            classes.push(c);
        }
    }
    classes.sort_unstable();
    let mut support = Vec::new();
    for &c in &classes {
        for _ in 0..shots {
            support.push((c, (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()));
        }
    }
    for i in (1..support.len()).rev() {
        let j = rng.random_range(0..=i);
        support.swap(i, j);
    }
    (classes, support)
}

/// Number of disagreements between `ncm_fit`/`ncm_classify` and plain loops
/// (per-class averaging, exhaustive nearest search with lowest-id ties) on
/// `instances` random 5-way problems with `queries` queries each.
pub fn ncm_mismatches(seed: u64, instances: usize, queries: usize) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    for _ in 0..instances {
        let shots = rng.random_range(1..6);
        let dim = rng.random_range(1..12);
        let (classes, support) = five_way_instance(&mut rng, shots, dim);
        let views: Vec<(u32, &[f32])> = support.iter().map(|(l, v)| (*l, &v[..])).collect();
        let protos = ncm_fit(&views, &classes, None).unwrap();
        for (p, &c) in protos.iter().zip(&classes) {
            let mut sum = vec![0.0f64; dim];
            let mut n = 0;
            for (l, v) in &support {
                if *l == c {
                    for d in 0..dim {
                        sum[d] += v[d] as f64;
                    }
                    n += 1;
                }
            }
            let mean: Vec<f32> = sum.iter().map(|s| (s / n as f64) as f32).collect();
            if p.class_id != c || p.vector != mean {
                mismatches += 1;
            }
        }
        for _ in 0..queries {
            let q: Vec<f32> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (got, dists) = ncm_classify(&protos, &q).unwrap();
            let mut best = (f64::INFINITY, u32::MAX);
            for p in &protos {
                let d2: f64 = p
                    .vector
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
                    .sum();
                let d = d2.sqrt();
                if d < best.0 || (d == best.0 && p.class_id < best.1) {
                    best = (d, p.class_id);
                }
            }
            if got != best.1 || dists.iter().cloned().fold(f64::INFINITY, f64::min) != best.0 {
                mismatches += 1;
            }
        }
    }
    mismatches
}

/// Hand-assembled container, written from the documented layout rather than
/// through the library writer.
pub fn seal(tag: &[u8; 4], version: &[u8; 4], meta: &str, payload: &[u8]) -> Vec<u8> {
    let meta = meta.as_bytes();
    let mut out = Vec::new();
    out.extend_from_slice(tag);
    out.extend_from_slice(version);
    let len = (meta.len() as u64).to_le_bytes();
    out.extend_from_slice(&len);
    let mut crc_input = len.to_vec();
    crc_input.extend_from_slice(meta);
    out.extend_from_slice(&crc32fast::hash(&crc_input).to_le_bytes());
    out.extend_from_slice(meta);
    while out.len() % 64 != 0 {
        out.push(0);
    }
    out.extend_from_slice(payload);
    out
}

pub fn le(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn bits(t: &Tensor<f32>) -> Vec<u32> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

pub fn random_f32(rng: &mut ChaCha8Rng) -> f32 {
    // Arbitrary bit patterns, NaN payloads and infinities included.
    f32::from_bits(rng.random())
}

pub fn random_bundle(rng: &mut ChaCha8Rng) -> WeightBundle {
    let n = rng.random_range(0..6);
    let tensors = (0..n)
        .map(|i| {
            let rank = rng.random_range(0..4);
            let shape: Vec<usize> = (0..rank).map(|_| rng.random_range(1..5)).collect();
            let t = Tensor::from_fn(&shape, |_| random_f32(rng)).unwrap();
            (format!("t{i}.{}", rng.random::<u16>()), t)
        })
        .collect();
    let arch = serde_json::json!({ "seed": rng.random::<u32>(), "name": "x\u{e9}\"\n" });
    WeightBundle::new(arch, tensors)
}

pub fn random_dataset(rng: &mut ChaCha8Rng) -> EmbeddingDataset {
    let dim = rng.random_range(1..9);
    let mut ds = EmbeddingDataset::new(dim);
    for _ in 0..rng.random_range(0..8) {
        let v: Vec<f32> = (0..dim).map(|_| random_f32(rng)).collect();
        ds.push(rng.random(), &v).unwrap();
    }
    if rng.random_bool(0.5) {
        ds.attrs
            .insert("teacher".into(), format!("{}", rng.random::<u8>()));
    }
    ds
}

pub fn same_bundle(a: &WeightBundle, b: &WeightBundle) -> bool {
    a.arch == b.arch
        && a.format_version == b.format_version
        && a.tensors.len() == b.tensors.len()
        && a.tensors
            .iter()
            .zip(&b.tensors)
            .all(|((na, ta), (nb, tb))| {
                na == nb && ta.shape() == tb.shape() && bits(ta) == bits(tb)
            })
}

pub fn same_dataset(a: &EmbeddingDataset, b: &EmbeddingDataset) -> bool {
    a.dim() == b.dim()
        && a.labels() == b.labels()
        && a.attrs == b.attrs
        && a.data()
            .iter()
            .map(|v| v.to_bits())
            .eq(b.data().iter().map(|v| v.to_bits()))
}

pub fn header_end(bytes: &[u8]) -> usize {
    let meta_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    (20 + meta_len).div_ceil(64) * 64
}

/// Uniform on [-1, 1) in f64.
pub fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0)).unwrap()
}

/// Freshly initialized layer with norm scales moved off their identity init.
pub fn layer(spec: LayerSpec, shape: &[usize], seed: u64) -> Layer<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut l, _) = Layer::init(&spec, shape, &mut rng).unwrap();
    if let Layer::LayerNorm { gamma, beta, .. } = &mut l {
        *gamma = rand_tensor(gamma.shape(), seed + 1);
        *beta = rand_tensor(beta.shape(), seed + 2);
    }
    l
}

/// One case per differentiable layer kind, with a matching input shape.
pub fn op_cases() -> Vec<(&'static str, LayerSpec, Vec<usize>)> {
    vec![
        (
            "conv3x3 s1 p1",
            LayerSpec::Conv2d {
                out_channels: 4,
                kernel: 3,
                stride: 1,
                padding: 1,
                bias: true,
            },
            vec![3, 6, 5],
        ),
        (
            "conv3x3 s2 p0",
            LayerSpec::Conv2d {
                out_channels: 2,
                kernel: 3,
                stride: 2,
                padding: 0,
                bias: false,
            },
            vec![2, 7, 7],
        ),
        (
            "conv1x1",
            LayerSpec::Conv2d {
                out_channels: 5,
                kernel: 1,
                stride: 1,
                padding: 0,
                bias: true,
            },
            vec![3, 4, 4],
        ),
        (
            "depthwise s1 p1",
            LayerSpec::Depthwise {
                kernel: 3,
                stride: 1,
                padding: 1,
                bias: true,
            },
            vec![4, 5, 6],
        ),
        (
            "depthwise s2 p1",
            LayerSpec::Depthwise {
                kernel: 3,
                stride: 2,
                padding: 1,
                bias: false,
            },
            vec![3, 7, 7],
        ),
        (
            "linear vector",
            LayerSpec::Linear {
                out_features: 7,
                bias: true,
            },
            vec![9],
        ),
        (
            "linear rows",
            LayerSpec::Linear {
                out_features: 3,
                bias: true,
            },
            vec![4, 6],
        ),
        ("silu", LayerSpec::Silu, vec![2, 3, 4]),
        ("layer_norm", LayerSpec::LayerNorm, vec![3, 8]),
        ("global_avg_pool", LayerSpec::GlobalAvgPool, vec![4, 3, 5]),
        ("flatten", LayerSpec::Flatten, vec![2, 3, 2]),
    ]
}
