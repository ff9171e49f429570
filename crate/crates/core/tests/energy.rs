use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use fsle::energy::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/power")
        .join(name)
}

/// Checked-in 5 kHz traces: 5 V supply, 50 Hz ripple of 0.5 W, 0.2 s.
fn fixture_trace(name: &str, mean_power_w: f64) -> PowerTrace {
    let spec = TraceSpec {
        mean_power_w,
        duration_s: 0.2,
        voltage_v: 5.0,
        ripple_w: 0.5,
        ..TraceSpec::default()
    };
    let text = write_trace(&synthetic_trace(&spec, 0).unwrap());
    let path = fixture(name);
    if std::env::var_os("FSLE_REGEN_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
    }
    let stored =
        std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(stored, text, "{name} differs from checked-in fixture");
    parse_trace(&stored).unwrap()
}

fn random_trace(rng: &mut impl Rng, n: usize) -> Vec<(f64, f64)> {
    let mut t = rng.random_range(-5.0..5.0);
    (0..n)
        .map(|_| {
            t += rng.random_range(1e-5..2e-3);
            (t, rng.random_range(0.0..30.0))
        })
        .collect()
}

/// Linear interpolation found by bisection, then Simpson's rule on a dense
/// grid that contains every sample inside the window.
fn dense_oracle(points: &[(f64, f64)], start: f64, end: f64) -> f64 {
    let value = |t: f64| {
        let j = points
            .partition_point(|p| p.0 <= t)
            .clamp(1, points.len() - 1);
        let (t0, p0) = points[j - 1];
        let (t1, p1) = points[j];
        p0 + (p1 - p0) * (t - t0) / (t1 - t0)
    };
    let mut knots = vec![start];
    knots.extend(points.iter().map(|p| p.0).filter(|&t| t > start && t < end));
    knots.push(end);
    let mut total = 0.0;
    for w in knots.windows(2) {
        let sub = 16;
        let h = (w[1] - w[0]) / sub as f64;
        for k in 0..sub {
            let a = w[0] + k as f64 * h;
            let b = a + h;
            total += h / 6.0 * (value(a) + 4.0 * value(0.5 * (a + b)) + value(b));
        }
    }
    total / (end - start)
}

#[test]
fn dense_resampling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(2..400);
        let points = random_trace(&mut rng, n);
        let trace = PowerTrace::from_power(&points).unwrap();
        let (first, last) = trace.span().unwrap();
        let a = rng.random_range(first..last);
        let b = rng.random_range(first..last);
        let (start, end) = if a < b { (a, b) } else { (b, a) };
        for window in [None, Some((start, end))] {
            let (s, e) = window.unwrap_or((first, last));
            let got = average_power(&trace, window).unwrap();
            let want = dense_oracle(&points, s, e);
            assert!(((got - want) / want).abs() < 1e-9, "{got} vs {want}");
        }
    }
}

#[test]
fn translation_and_refinement_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let n = rng.random_range(2..200);
        let points = random_trace(&mut rng, n);
        let base = average_power(&PowerTrace::from_power(&points).unwrap(), None).unwrap();

        let shift = rng.random_range(-100.0..100.0);
        let shifted: Vec<_> = points.iter().map(|&(t, p)| (t + shift, p)).collect();
        let moved = average_power(&PowerTrace::from_power(&shifted).unwrap(), None).unwrap();
        assert!(((moved - base) / base).abs() < 1e-9);

        let mut refined = Vec::new();
        for w in points.windows(2) {
            refined.push(w[0]);
            for k in 1..4 {
                let f = k as f64 / 4.0;
                refined.push((
                    w[0].0 + f * (w[1].0 - w[0].0),
                    w[0].1 + f * (w[1].1 - w[0].1),
                ));
            }
        }
        refined.push(*points.last().unwrap());
        let fine = average_power(&PowerTrace::from_power(&refined).unwrap(), None).unwrap();
        assert!(((fine - base) / base).abs() < 1e-12);
    }
}

#[test]
fn reference_energy_rows() {
    let idle = fixture_trace("idle_4w.csv", 4.0);
    let resnet = fixture_trace("load_19w9.csv", 19.9);
    let vit = fixture_trace("load_14w0.csv", 14.0);
    assert_eq!(idle.samples.len(), 1001);
    assert!(idle.is_electrical());

    let r = energy_report(&resnet, &idle, 3.6, None, None).unwrap();
    let v = energy_report(&vit, &idle, 2.6, None, None).unwrap();
    assert!((r.idle_power_w - 4.0).abs() < 1e-9);
    assert!((r.avg_power_w - 19.9).abs() < 1e-9);
    assert!((v.avg_power_w - 14.0).abs() < 1e-9);
    assert!((r.energy_per_inference_j - 0.07164).abs() < 1e-9);
    assert!((v.energy_per_inference_j - 0.0364).abs() < 1e-9);
    assert!((r.energy_per_inference_j - 0.072).abs() <= 0.0005);
    assert!((v.energy_per_inference_j - 0.036).abs() <= 0.0005);
    assert!((r.dynamic_power_w - 15.9).abs() < 1e-9);
    assert!((v.dynamic_power_w - 10.0).abs() < 1e-9);

    let reduction = dynamic_power_reduction(&r, &v).unwrap();
    assert!((reduction - (1.0 - 10.0 / 15.9)).abs() < 1e-9);
    assert!((reduction * 100.0 - 37.1).abs() < 0.05);
    assert!(r.warnings.is_empty() && v.warnings.is_empty());
}

#[test]
fn formula_is_exact_and_fields_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..500 {
        let load = PowerTrace::from_power(&random_trace(&mut rng, 50)).unwrap();
        let idle = PowerTrace::from_power(&random_trace(&mut rng, 50)).unwrap();
        let latency = rng.random_range(0.01..100.0);
        let r = energy_report(&load, &idle, latency, Some(7), None).unwrap();
        assert_eq!(r.energy_per_inference_j, r.avg_power_w * latency / 1000.0);
        assert_eq!(r.energy_formula_j, r.energy_per_inference_j);
        assert_eq!(r.dynamic_power_w, r.avg_power_w - r.idle_power_w);
        let integrated = r.avg_power_w * load.duration_s() / 7.0;
        assert!((r.energy_integrated_j.unwrap() - integrated).abs() <= 1e-12 * integrated.abs());
        assert_eq!(r.throughput_source.as_deref(), Some("trace"));
        assert_eq!(r.throughput_ips, Some(7.0 / load.duration_s()));
    }
}

#[test]
fn idle_equal_and_above_load() {
    let flat = PowerTrace::from_power(&[(0.0, 6.0), (1.0, 6.0)]).unwrap();
    let r = energy_report(&flat, &flat, 2.0, None, None).unwrap();
    assert_eq!(r.dynamic_power_w, 0.0);
    assert!(r.warnings.is_empty());

    let high = PowerTrace::from_power(&[(0.0, 9.0), (1.0, 9.0)]).unwrap();
    let r = energy_report(&flat, &high, 2.0, None, None).unwrap();
    assert_eq!(r.dynamic_power_w, -3.0);
    assert_eq!(r.warnings.len(), 1);

    assert!(matches!(
        energy_report(&flat, &flat, 0.0, None, None),
        Err(EnergyError::InvalidArgument(_))
    ));
    assert!(dynamic_power_reduction(&r, &r).is_err());
}

#[test]
fn reference_throughput_consistency() {
    // Latency and throughput are separate measurements in the table.
    let resnet = 1000.0f64 / 3.6;
    assert!((resnet - 280.0).abs() / 280.0 < 0.02);
    let vit = 1000.0f64 / 2.6;
    assert!((vit - 392.0).abs() / 392.0 < 0.03);
    assert!((vit - 392.0).abs() / 392.0 > 0.015);

    let idle = PowerTrace::from_power(&[(0.0, 4.0), (1.0, 4.0)]).unwrap();
    let load = PowerTrace::from_power(&[(0.0, 14.0), (1.0, 14.0)]).unwrap();
    let r = energy_report(&load, &idle, 2.6, Some(100), Some(392.0)).unwrap();
    assert_eq!(r.throughput_ips, Some(392.0));
    assert_eq!(r.throughput_source.as_deref(), Some("measured"));
    let r = energy_report(&load, &idle, 2.6, None, None).unwrap();
    assert_eq!(r.throughput_ips, None);
}

#[test]
fn controlled_delay_stub() {
    let r = bench_inference(
        || {
            std::thread::sleep(Duration::from_millis(10));
            Ok::<(), String>(())
        },
        20,
        2,
    )
    .unwrap();
    assert_eq!(r.latencies_ms.len(), 20);
    assert!((r.mean_ms - 10.0).abs() <= 2.0, "mean {}", r.mean_ms);
    assert!(r.median_ms >= 10.0 && r.p95_ms >= r.median_ms);
    assert!((r.throughput_ips - 1000.0 / r.mean_ms).abs() < 1e-9 * r.throughput_ips);
}

#[test]
fn warmup_is_discarded_exactly() {
    let calls = AtomicUsize::new(0);
    let r = bench_inference(
        || {
            let i = calls.fetch_add(1, Ordering::SeqCst);
            // Warmup calls are slow; timed ones are not.
            if i < 3 {
                std::thread::sleep(Duration::from_millis(30));
            }
            Ok::<(), String>(())
        },
        7,
        3,
    )
    .unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 10);
    assert_eq!(r.latencies_ms.len(), 7);
    assert!(r.latencies_ms.iter().all(|&ms| ms < 20.0));
}

#[test]
fn single_repetition_throughput() {
    let r = bench_inference(
        || {
            std::thread::sleep(Duration::from_millis(1));
            Ok::<(), String>(())
        },
        1,
        0,
    )
    .unwrap();
    assert_eq!(r.throughput_ips, 1000.0 / r.latencies_ms[0]);
    assert_eq!(r.mean_ms, r.latencies_ms[0]);
    assert_eq!(r.p95_ms, r.latencies_ms[0]);
}

#[test]
fn bench_errors() {
    assert!(matches!(
        bench_inference(|| Ok::<(), String>(()), 0, 0),
        Err(EnergyError::InvalidArgument(_))
    ));
    let e = bench_inference(|| Err::<(), _>("boom"), 3, 0).unwrap_err();
    assert_eq!(e, EnergyError::Inference("boom".into()));
}

#[test]
fn overlapping_benchmarks_are_flagged() {
    let holder = std::thread::spawn(|| {
        bench_inference(
            || {
                std::thread::sleep(Duration::from_millis(20));
                Ok::<(), String>(())
            },
            10,
            0,
        )
        .unwrap()
    });
    std::thread::sleep(Duration::from_millis(50));
    let late = bench_inference(|| Ok::<(), String>(()), 1, 0).unwrap();
    holder.join().unwrap();
    assert!(late.contaminated);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
    ]
}

fn trace_strategy() -> impl Strategy<Value = PowerTrace> {
    (
        any::<bool>(),
        -1e3f64..1e3,
        prop::collection::vec((1e-9f64..1.0, finite(), finite()), 0..40),
    )
        .prop_map(|(electrical, t0, rows)| {
            let mut t = t0;
            let samples = rows
                .into_iter()
                .map(|(dt, a, b)| {
                    t += dt;
                    if electrical {
                        Sample {
                            timestamp_s: t,
                            voltage_v: Some(a),
                            current_a: Some(b),
                            power_w: a * b,
                        }
                    } else {
                        Sample {
                            timestamp_s: t,
                            voltage_v: None,
                            current_a: None,
                            power_w: a,
                        }
                    }
                })
                .collect();
            PowerTrace {
                nominal_rate_hz: NOMINAL_RATE_HZ,
                samples,
            }
        })
        .prop_filter("strictly increasing", |tr| {
            tr.samples
                .windows(2)
                .all(|w| w[1].timestamp_s > w[0].timestamp_s)
                && tr.samples.iter().all(|s| s.power_w.is_finite())
        })
}

fn bits(s: &Sample) -> (u64, Option<u64>, Option<u64>, u64) {
    (
        s.timestamp_s.to_bits(),
        s.voltage_v.map(f64::to_bits),
        s.current_a.map(f64::to_bits),
        s.power_w.to_bits(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn parse_serialize_round_trip(trace in trace_strategy()) {
        let text = write_trace(&trace);
        let back = parse_trace(&text).unwrap();
        prop_assert_eq!(back.samples.len(), trace.samples.len());
        for (a, b) in trace.samples.iter().zip(&back.samples) {
            prop_assert_eq!(bits(a), bits(b));
        }
        prop_assert_eq!(write_trace(&back), text);
    }

    #[test]
    fn parser_never_panics(text in "[-0-9a-z_.,e\n ]{0,200}") {
        let _ = parse_trace(&text);
    }

    #[test]
    fn constant_trace_average(p in -50.0f64..50.0, n in 2usize..300, rate in 10.0f64..10_000.0) {
        let points: Vec<_> = (0..n).map(|k| (k as f64 / rate, p)).collect();
        let avg = average_power(&PowerTrace::from_power(&points).unwrap(), None).unwrap();
        prop_assert!((avg - p).abs() <= 1e-12 * p.abs().max(1.0));
    }
}
