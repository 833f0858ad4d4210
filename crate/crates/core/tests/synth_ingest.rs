mod common;

use common::z_quantile;
use drivevol::ingest::{
    impute_means, join_dataset, parse_cycles, parse_persons, parse_trips, parse_vehicles, AnalysisRow, SchemaMap,
};
use drivevol::model::{build_design, fit_ols, fit_quantile, DesignMatrix, ModelSpec, QuantileConfig};
use drivevol::synth::{gen_cycle, gen_dataset, CycleParams, DatasetParams, NoiseModel, SynthDataset};
use drivevol::volatility::{log_returns, trip_volatilities, volatility, ZeroSpeedPolicy};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Writes the dataset's files, parses them back and joins them, asserting
/// that nothing is rejected along the way.
fn round_trip(ds: &SynthDataset) -> Vec<AnalysisRow> {
    let files: BTreeMap<&str, String> = ds.files().unwrap().into_iter().collect();
    let schema = SchemaMap::new();
    let cycles = parse_cycles(files["cycles.csv"].as_bytes(), &schema).unwrap();
    let (trips, tr) = parse_trips(files["trips.csv"].as_bytes(), &schema).unwrap();
    let (vehicles, vr) = parse_vehicles(files["vehicles.csv"].as_bytes(), &schema).unwrap();
    let (persons, pr) = parse_persons(files["persons.csv"].as_bytes(), &schema).unwrap();
    for r in [&cycles.rejects, &tr, &vr, &pr] {
        assert!(r.is_empty(), "{:?}", r.rejects);
    }
    assert_eq!(cycles.cycles, ds.cycles);
    assert_eq!(trips, ds.trips);
    assert_eq!(vehicles, ds.vehicles);
    assert_eq!(persons, ds.persons);

    let (vols, excluded) = trip_volatilities(&cycles.cycles, &ZeroSpeedPolicy::default(), 10).unwrap();
    assert!(excluded.excluded.is_empty(), "{:?}", excluded.excluded);
    let vols: BTreeMap<String, f64> = vols.into_iter().map(|(k, v)| (k, v.volatility_pct)).collect();
    let (rows, report) = join_dataset(&vols, &trips, &vehicles, &persons);
    assert_eq!(report.total_unmatched(), 0);
    let (rows, imputed) = impute_means(&rows).unwrap();
    assert_eq!(imputed.total_imputed(), 0);
    rows
}

fn measured_volatility(params: &CycleParams) -> f64 {
    let c = gen_cycle("T", params).unwrap();
    volatility(&log_returns(&c.speeds(), &ZeroSpeedPolicy::default()).unwrap(), 10).unwrap()
}

#[test]
fn target_13_is_met_within_3_percent_over_100_seeds() {
    let estimates: Vec<f64> = (0..100)
        .map(|seed| {
            measured_volatility(&CycleParams {
                n_seconds: 5000,
                base_speed_mph: 30.0,
                target_volatility_pct: 13.0,
                n_stops: 0,
                seed,
            })
        })
        .collect();
    let worst = estimates.iter().map(|v| (v / 13.0 - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst <= 0.03, "worst relative error {worst}");
    // the spread should match sigma / sqrt(2 (n - 1)) for normal returns
    let mean = estimates.iter().sum::<f64>() / 100.0;
    let sd = (estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
    let want = 13.0 / (2.0 * 4999.0f64).sqrt();
    assert!((sd / want - 1.0).abs() < 0.25, "spread {sd} vs {want}");
    assert!((mean / 13.0 - 1.0).abs() < 0.005);
}

#[test]
fn noiseless_dataset_recovers_coefficients() {
    let mut params = DatasetParams::volatility_default(6000, 21);
    params.noise = NoiseModel::None;
    let ds = gen_dataset(&params).unwrap();
    let rows = round_trip(&ds);
    let d = build_design(&rows, &params.spec).unwrap();
    let fit = fit_ols(&d).unwrap();
    for (j, name) in fit.column_names.iter().enumerate() {
        let (Some(b), Some(se)) = (fit.coefficients[j], fit.std_errors[j]) else {
            continue;
        };
        let truth = params.coefficients[j];
        assert!((b - truth).abs() <= 4.0 * se, "{name}: {b} vs {truth} (se {se})");
    }
    // only levels that never occur may be aliased
    for name in &fit.aliased {
        let j = d.column_index(name).unwrap();
        assert!(d.x.column(j).iter().all(|&v| v == 0.0), "{name} aliased but observed");
    }
}

fn grade_spec() -> ModelSpec {
    ModelSpec {
        continuous: vec!["grade_sd".to_owned()],
        categorical: vec![],
        ..ModelSpec::volatility_model()
    }
}

#[test]
fn heteroskedastic_dataset_gives_increasing_slopes() {
    let sd = 1.5;
    let params = DatasetParams {
        n_trips: 3000,
        trips_per_vehicle: 1,
        coefficients: vec![10.0, 3.0],
        spec: grade_spec(),
        noise: NoiseModel::Heteroskedastic {
            sd,
            column: "grade_sd".to_owned(),
        },
        dwell_stops: false,
        ..DatasetParams::volatility_default(0, 8)
    };
    let rows = round_trip(&gen_dataset(&params).unwrap());
    let d: DesignMatrix = build_design(&rows, &params.spec).unwrap();
    let cfg = QuantileConfig {
        bootstrap_reps: 0,
        ..Default::default()
    };
    let slopes: Vec<f64> = [0.1, 0.25, 0.5, 0.75, 0.9]
        .iter()
        .map(|&q| fit_quantile(&d, q, &cfg).unwrap().coefficients[1].unwrap())
        .collect();
    assert!(slopes.windows(2).all(|w| w[0] < w[1]), "{slopes:?}");
    // true slope 3 + sd z_q, blurred by the volatility estimator
    for (s, q) in slopes.iter().zip([0.1, 0.25, 0.5, 0.75, 0.9]) {
        assert!((s - (3.0 + sd * z_quantile(q))).abs() < 0.5, "q={q}: {s}");
    }
}

#[test]
fn empty_dataset_round_trips() {
    let ds = gen_dataset(&DatasetParams::volatility_default(0, 1)).unwrap();
    let files: BTreeMap<&str, String> = ds.files().unwrap().into_iter().collect();
    let schema = SchemaMap::new();
    assert!(parse_cycles(files["cycles.csv"].as_bytes(), &schema).unwrap().cycles.is_empty());
    assert!(parse_trips(files["trips.csv"].as_bytes(), &schema).unwrap().0.is_empty());
}

#[test]
fn generation_is_schedule_independent() {
    let params = DatasetParams::volatility_default(120, 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| gen_dataset(&params).unwrap())
    };
    assert_eq!(run(1), run(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn row_order_does_not_change_parsed_tables(seed in any::<u64>()) {
        let ds = gen_dataset(&DatasetParams::volatility_default(40, seed)).unwrap();
        let files: BTreeMap<&str, String> = ds.files().unwrap().into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shuffle = |text: &str, rng: &mut ChaCha8Rng| {
            let mut lines: Vec<&str> = text.lines().collect();
            lines[1..].shuffle(rng);
            lines.join("\n") + "\n"
        };
        let schema = SchemaMap::new();
        let cycles = parse_cycles(shuffle(&files["cycles.csv"], &mut rng).as_bytes(), &schema).unwrap();
        prop_assert_eq!(&cycles.cycles, &ds.cycles);
        let trips = parse_trips(shuffle(&files["trips.csv"], &mut rng).as_bytes(), &schema).unwrap().0;
        let vehicles = parse_vehicles(shuffle(&files["vehicles.csv"], &mut rng).as_bytes(), &schema).unwrap().0;
        let persons = parse_persons(shuffle(&files["persons.csv"], &mut rng).as_bytes(), &schema).unwrap().0;
        let vols: BTreeMap<String, f64> = ds.trips.iter().map(|t| (t.trip_id.clone(), 1.0)).collect();
        let shuffled = join_dataset(&vols, &trips, &vehicles, &persons);
        let ordered = join_dataset(&vols, &ds.trips, &ds.vehicles, &ds.persons);
        prop_assert_eq!(shuffled, ordered);
    }
}
