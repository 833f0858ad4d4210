mod common;

use common::naive_volatility;
use drivevol::ingest::{DrivingCycle, SpeedSample};
use drivevol::volatility::{
    log_returns, sample_std, sample_std_streaming, trip_volatilities, volatility, ExclusionReason,
    ZeroSpeedMode, ZeroSpeedPolicy,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn measure(speeds: &[f64]) -> Option<f64> {
    let s = log_returns(speeds, &ZeroSpeedPolicy::default()).ok()?;
    volatility(&s, 2).ok()
}

fn random_trace(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(0.1..100.0)).collect()
}

#[test]
fn matches_naive_transcription_on_random_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    for case in 0..1000 {
        let len = if case == 0 { 2 } else { rng.random_range(2..=10_000) };
        let trace = random_trace(&mut rng, len);
        match (measure(&trace), naive_volatility(&trace)) {
            (Some(got), Some(want)) => {
                assert!((got - want).abs() <= 1e-9 * want.abs(), "case {case}: {got} vs {want}")
            }
            (None, None) => {}
            other => panic!("case {case}: defined-ness differs {other:?}"),
        }
    }
}

#[test]
fn invariant_to_units() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let len = rng.random_range(3..2000);
        let trace = random_trace(&mut rng, len);
        let c = 10f64.powf(rng.random_range(-2.0..2.0));
        let scaled: Vec<f64> = trace.iter().map(|v| v * c).collect();
        let (a, b) = (measure(&trace).unwrap(), measure(&scaled).unwrap());
        assert!((a - b).abs() <= 1e-10 * a, "c={c}: {a} vs {b}");
    }
}

#[test]
fn drop_pair_only_removes_pairs_touching_zero() {
    let speeds = [10.0, 12.0, 0.0, 0.0, 8.0, 9.0, 9.5];
    let s = log_returns(&speeds, &ZeroSpeedPolicy::default()).unwrap();
    assert_eq!(s.n_dropped_zero, 3);
    assert_eq!(s.returns.len(), 3);
    let floor = ZeroSpeedPolicy::new(ZeroSpeedMode::FloorEpsilon, 0.1).unwrap();
    assert_eq!(log_returns(&speeds, &floor).unwrap().returns.len(), 6);
    let strict = ZeroSpeedPolicy::new(ZeroSpeedMode::Error, 0.1).unwrap();
    assert!(log_returns(&speeds, &strict).is_err());
}

#[test]
fn per_trip_batch_matches_single_trace_and_reports_exclusions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cycles = Vec::new();
    for i in 0..50 {
        let len = if i % 10 == 0 { 5 } else { 200 };
        let samples = random_trace(&mut rng, len)
            .into_iter()
            .enumerate()
            .map(|(t, speed)| SpeedSample { t: t as u64, speed })
            .collect();
        cycles.push(DrivingCycle {
            trip_id: format!("T{i:03}"),
            samples,
        });
    }
    cycles.push(DrivingCycle {
        trip_id: "Zeros".into(),
        samples: (0..30).map(|t| SpeedSample { t, speed: 0.0 }).collect(),
    });
    let (vols, excl) = trip_volatilities(&cycles, &ZeroSpeedPolicy::default(), 10).unwrap();
    assert_eq!(vols.len(), 45);
    assert_eq!(excl.excluded.len(), 6);
    assert!(excl
        .excluded
        .iter()
        .any(|e| e.trip_id == "Zeros" && e.reason == ExclusionReason::AllZeroDropped));
    for c in &cycles {
        if let Some(v) = vols.get(&c.trip_id) {
            let want = naive_volatility(&c.speeds()).unwrap();
            assert!((v.volatility_pct - want).abs() <= 1e-9 * want);
        }
    }
}

proptest! {
    #[test]
    fn streaming_and_two_pass_agree(values in prop::collection::vec(-1e3f64..1e3, 2..500)) {
        let a = sample_std(&values);
        let b = sample_std_streaming(values.iter().copied());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn volatility_is_non_negative_and_zero_for_constant_traces(
        speed in 0.5f64..90.0,
        len in 11usize..300,
    ) {
        let trace = vec![speed; len];
        prop_assert_eq!(measure(&trace), Some(0.0));
    }

    #[test]
    fn reversal_preserves_volatility(trace in prop::collection::vec(0.1f64..100.0, 3..400)) {
        let mut rev = trace.clone();
        rev.reverse();
        let (a, b) = (measure(&trace).unwrap(), measure(&rev).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }
}
