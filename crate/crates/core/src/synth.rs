//! Seeded synthetic fixtures with known ground truth.
//!
//! [`gen_cycle`] produces a speed trace whose percent log returns are iid
//! `Normal(0, target)`, so the measured volatility estimates the target.
//! [`gen_dataset`] draws trip, vehicle and driver covariates, sets each trip's
//! target volatility to `x'b + noise` and realises it through [`gen_cycle`].

use crate::ingest::{
    write_cycles, write_persons, write_trips, write_vehicles, AgeBand, AnalysisRow, BodyType,
    Category, DrivingCycle, IngestError, PersonRecord, Powertrain, SpeedSample, Transmission,
    TripSummary, VehicleRecord,
};
use crate::model::{build_design, DesignMatrix, ModelError, ModelSpec};
use crate::rng::{bernoulli, categorical, derive_seed, standard_normal, stream_rng, uniform_index, uniform_open};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Length of one zero-speed dwell, seconds.
pub const DWELL_SECONDS: usize = 5;

/// Dataset cycles keep at least this many walk returns, so every generated
/// trip stays measurable at the default `min_returns`.
pub const MIN_CYCLE_RETURNS: usize = 20;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("coefficient vector has {got} entries but the design has {expected} columns")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("manifest serialisation failed: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleParams {
    /// Number of one-second samples, dwells included.
    pub n_seconds: usize,
    pub base_speed_mph: f64,
    pub target_volatility_pct: f64,
    pub n_stops: usize,
    pub seed: u64,
}

impl CycleParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidParameter(m));
        if self.n_seconds < 2 {
            return bad(format!("n_seconds {} must be at least 2", self.n_seconds));
        }
        if !(self.base_speed_mph > 0.0 && self.base_speed_mph.is_finite()) {
            return bad(format!("base speed {} must be positive", self.base_speed_mph));
        }
        if !(self.target_volatility_pct >= 0.0 && self.target_volatility_pct.is_finite()) {
            return bad(format!("target volatility {} must be >= 0", self.target_volatility_pct));
        }
        Ok(())
    }
}

/// Geometric random walk `x_t = x_{t-1} exp(sigma z_t)` with
/// `sigma = target / 100`, starting at the base speed, with `n_stops`
/// zero-speed dwells spliced in between walk samples. Dwells take seconds
/// from the walk so the trace is always `n_seconds` long; stops that would
/// leave fewer than two walk samples are dropped.
pub fn gen_cycle(trip_id: &str, params: &CycleParams) -> Result<DrivingCycle, SynthError> {
    params.validate()?;
    let max_stops = (params.n_seconds - 2) / DWELL_SECONDS;
    let n_stops = params.n_stops.min(max_stops);
    let walk_len = params.n_seconds - n_stops * DWELL_SECONDS;

    let sigma = params.target_volatility_pct / 100.0;
    let mut rng = stream_rng(params.seed, 0);
    let mut walk = Vec::with_capacity(walk_len);
    let mut x = params.base_speed_mph;
    walk.push(x);
    for _ in 1..walk_len {
        x *= (sigma * standard_normal(&mut rng)).exp();
        walk.push(x);
    }

    // a stop at gap g sits between walk[g - 1] and walk[g]
    let mut stop_rng = stream_rng(params.seed, 1);
    let mut gaps: Vec<usize> = (0..n_stops).map(|_| 1 + uniform_index(&mut stop_rng, walk_len - 1)).collect();
    gaps.sort_unstable();

    let mut speeds = Vec::with_capacity(params.n_seconds);
    let mut next = gaps.iter().peekable();
    for (i, &v) in walk.iter().enumerate() {
        while next.peek() == Some(&&i) {
            speeds.extend(std::iter::repeat(0.0).take(DWELL_SECONDS));
            next.next();
        }
        speeds.push(v);
    }
    Ok(DrivingCycle {
        trip_id: trip_id.to_owned(),
        samples: speeds
            .into_iter()
            .enumerate()
            .map(|(t, speed)| SpeedSample { t: t as u64, speed })
            .collect(),
    })
}

/// Error term added to each trip's target volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    /// `sd * e`.
    Gaussian { sd: f64 },
    /// `sd * (1 + x) * e` for the design column `column`.
    Heteroskedastic { sd: f64, column: String },
}

/// Cycle length rule: `clamp(travel_time_min * 60, min, max)` seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleLength {
    pub min_seconds: usize,
    pub max_seconds: usize,
}

impl Default for CycleLength {
    fn default() -> Self {
        Self {
            min_seconds: 30,
            max_seconds: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub n_trips: usize,
    /// Average trips per vehicle; each vehicle has one driver in its own
    /// household.
    pub trips_per_vehicle: usize,
    /// Ground-truth coefficients in `spec.column_names()` order.
    pub coefficients: Vec<f64>,
    pub spec: ModelSpec,
    pub noise: NoiseModel,
    pub cycle_length: CycleLength,
    /// Whether driving cycles carry zero-speed dwells for each stop.
    pub dwell_stops: bool,
    pub seed: u64,
}

impl DatasetParams {
    /// The volatility model with its OLS column from the published table as
    /// ground truth, and residual noise of matching size.
    pub fn volatility_default(n_trips: usize, seed: u64) -> Self {
        Self {
            n_trips,
            trips_per_vehicle: 20,
            coefficients: published_ols_coefficients(),
            spec: ModelSpec::volatility_model(),
            noise: NoiseModel::Gaussian { sd: 2.8 },
            cycle_length: CycleLength::default(),
            dwell_stops: true,
            seed,
        }
    }
}

/// OLS estimates reported for the volatility model, in
/// `ModelSpec::volatility_model().column_names()` order.
pub fn published_ols_coefficients() -> Vec<f64> {
    vec![
        14.844, // intercept
        -0.328, -0.008, 0.001, -0.139, 0.280, -0.704, 0.070, 0.342, 0.154,
        // body: suv pickup coupe convertible hatchback wagon minivan van other
        0.031, -0.668, 0.225, -0.074, -0.184, 0.319, -0.171, -0.252, -0.399,
        // transmission: manual both
        -0.304, 0.097,
        // powertrain: rwd 4wd
        -0.004, -0.424,
        // age bands 20-29 .. 80-89
        -0.132, -0.225, -0.214, -0.392, -0.586, -0.599, -0.987,
    ]
}

/// Ground truth and settings written next to the generated tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub seed: u64,
    pub n_trips: usize,
    pub n_vehicles: usize,
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub noise: NoiseModel,
    pub cycle_length: CycleLength,
    pub dwell_seconds: usize,
    pub dwell_stops: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub cycles: Vec<DrivingCycle>,
    pub trips: Vec<TripSummary>,
    pub vehicles: Vec<VehicleRecord>,
    pub persons: Vec<PersonRecord>,
    /// Target volatility of each trip, in trip order.
    pub targets: Vec<f64>,
    pub manifest: SynthManifest,
}

impl SynthDataset {
    /// `(file name, contents)` in the ingest schemas plus `manifest.json`.
    pub fn files(&self) -> Result<Vec<(&'static str, String)>, SynthError> {
        Ok(vec![
            ("cycles.csv", write_cycles(&self.cycles)?),
            ("trips.csv", write_trips(&self.trips)?),
            ("vehicles.csv", write_vehicles(&self.vehicles)?),
            ("persons.csv", write_persons(&self.persons)?),
            ("manifest.json", serde_json::to_string_pretty(&self.manifest)? + "\n"),
        ])
    }
}

// Stream families, so that adding draws to one table never shifts another.
const VEHICLE_STREAM: u64 = 1;
const PERSON_STREAM: u64 = 2;
const TRIP_STREAM: u64 = 3;
const NOISE_STREAM: u64 = 4;
const CYCLE_STREAM: u64 = 5;

/// Rounds to `d` decimals so generated tables stay readable.
fn round(x: f64, d: i32) -> f64 {
    let s = 10f64.powi(d);
    (x * s).round() / s
}

fn pick<C: Category>(rng: &mut impl rand::RngCore, weights: &[f64]) -> C {
    C::ALL[categorical(rng, weights)]
}

fn gen_vehicle(i: usize, seed: u64) -> VehicleRecord {
    let mut rng = stream_rng(derive_seed(seed, VEHICLE_STREAM), i as u64);
    let body_w = [0.435, 0.194, 0.122, 0.057, 0.014, 0.08, 0.039, 0.047, 0.012, 0.001];
    let cylinders = [4u32, 6, 8][categorical(&mut rng, &[0.45, 0.35, 0.2])];
    VehicleRecord {
        vehicle_id: format!("V{:05}", i + 1),
        household_id: format!("H{:05}", i + 1),
        driver_person_id: Some("1".to_owned()),
        is_afv: Some(bernoulli(&mut rng, 0.22)),
        body_type: Some(pick::<BodyType>(&mut rng, &body_w)),
        transmission: Some(pick::<Transmission>(&mut rng, &[0.866, 0.1, 0.035])),
        vehicle_age_years: Some(uniform_index(&mut rng, 21) as f64),
        n_cylinders: Some(cylinders),
        powertrain: Some(pick::<Powertrain>(&mut rng, &[0.538, 0.275, 0.186])),
        ownership_nonowned: Some(bernoulli(&mut rng, 0.05)),
    }
}

fn gen_person(i: usize, seed: u64) -> PersonRecord {
    let mut rng = stream_rng(derive_seed(seed, PERSON_STREAM), i as u64);
    let age_w = [0.023, 0.071, 0.144, 0.217, 0.316, 0.192, 0.034, 0.004];
    PersonRecord {
        person_id: "1".to_owned(),
        household_id: format!("H{:05}", i + 1),
        is_female: Some(bernoulli(&mut rng, 0.55)),
        age_band: Some(pick::<AgeBand>(&mut rng, &age_w)),
        not_employed: Some(bernoulli(&mut rng, 0.27)),
    }
}

fn gen_trip(i: usize, vehicle: &VehicleRecord, seed: u64) -> TripSummary {
    let mut rng = stream_rng(derive_seed(seed, TRIP_STREAM), i as u64);
    let distance = round((1.4 + 0.9 * standard_normal(&mut rng)).exp(), 3).max(0.01);
    let speed = round((27.6 + 12.0 * standard_normal(&mut rng)).clamp(5.0, 75.0), 3);
    // the trip end counts as a stop; only loosely tied to distance
    let stops = 1 + (0.06 * distance + 5.0 * uniform_open(&mut rng)).floor() as u32;
    let grade = round((1.5 + 1.1 * standard_normal(&mut rng)).abs(), 3);
    TripSummary {
        trip_id: format!("T{:06}", i + 1),
        household_id: vehicle.household_id.clone(),
        vehicle_id: vehicle.vehicle_id.clone(),
        distance_mi: Some(distance),
        travel_time_min: Some(round(distance / speed * 60.0, 3).max(0.001)),
        avg_speed_mph: Some(speed),
        n_stops: Some(stops),
        grade_sd: Some(grade),
    }
}

fn analysis_row(t: &TripSummary, v: &VehicleRecord, p: &PersonRecord) -> AnalysisRow {
    AnalysisRow {
        trip_id: t.trip_id.clone(),
        household_id: t.household_id.clone(),
        vehicle_id: t.vehicle_id.clone(),
        person_id: p.person_id.clone(),
        volatility_pct: 0.0,
        distance_mi: t.distance_mi,
        travel_time_min: t.travel_time_min,
        avg_speed_mph: t.avg_speed_mph,
        n_stops: t.n_stops.map(f64::from),
        grade_sd: t.grade_sd,
        is_afv: v.is_afv,
        body_type: v.body_type,
        transmission: v.transmission,
        vehicle_age_years: v.vehicle_age_years,
        n_cylinders: v.n_cylinders.map(f64::from),
        powertrain: v.powertrain,
        ownership_nonowned: v.ownership_nonowned,
        is_female: p.is_female,
        age_band: p.age_band,
        not_employed: p.not_employed,
        imputed: BTreeSet::new(),
    }
}

/// Draws a full synthetic dataset. Every table row and every cycle uses its
/// own index-derived stream, so the output is independent of thread count.
pub fn gen_dataset(params: &DatasetParams) -> Result<SynthDataset, SynthError> {
    params.spec.validate()?;
    let names = params.spec.column_names();
    if params.coefficients.len() != names.len() {
        return Err(SynthError::DimensionMismatch {
            expected: names.len(),
            got: params.coefficients.len(),
        });
    }
    if params.trips_per_vehicle == 0 {
        return Err(SynthError::InvalidParameter("trips_per_vehicle must be at least 1".into()));
    }
    let CycleLength {
        min_seconds,
        max_seconds,
    } = params.cycle_length;
    if min_seconds < 2 || min_seconds > max_seconds {
        return Err(SynthError::InvalidParameter(format!(
            "cycle length bounds [{min_seconds}, {max_seconds}] need 2 <= min <= max"
        )));
    }
    let noise_column = match &params.noise {
        NoiseModel::None => None,
        NoiseModel::Gaussian { sd } | NoiseModel::Heteroskedastic { sd, .. } if !(*sd >= 0.0 && sd.is_finite()) => {
            return Err(SynthError::InvalidParameter(format!("noise sd {sd} must be >= 0")))
        }
        NoiseModel::Gaussian { .. } => None,
        NoiseModel::Heteroskedastic { column, .. } => Some(
            names
                .iter()
                .position(|c| c == column)
                .ok_or_else(|| ModelError::UnknownColumn(column.clone()))?,
        ),
    };

    let seed = params.seed;
    let n_vehicles = if params.n_trips == 0 {
        0
    } else {
        params.n_trips.div_ceil(params.trips_per_vehicle)
    };
    let vehicles: Vec<VehicleRecord> = (0..n_vehicles).into_par_iter().map(|i| gen_vehicle(i, seed)).collect();
    let persons: Vec<PersonRecord> = (0..n_vehicles).into_par_iter().map(|i| gen_person(i, seed)).collect();
    let trips: Vec<TripSummary> = (0..params.n_trips)
        .into_par_iter()
        .map(|i| gen_trip(i, &vehicles[i % n_vehicles], seed))
        .collect();

    let manifest = SynthManifest {
        seed,
        n_trips: params.n_trips,
        n_vehicles,
        column_names: names,
        coefficients: params.coefficients.clone(),
        noise: params.noise.clone(),
        cycle_length: params.cycle_length,
        dwell_seconds: DWELL_SECONDS,
        dwell_stops: params.dwell_stops,
    };
    if trips.is_empty() {
        return Ok(SynthDataset {
            cycles: vec![],
            trips,
            vehicles,
            persons,
            targets: vec![],
            manifest,
        });
    }

    let rows: Vec<AnalysisRow> = trips
        .iter()
        .enumerate()
        .map(|(i, t)| analysis_row(t, &vehicles[i % n_vehicles], &persons[i % n_vehicles]))
        .collect();
    let design = build_design(&rows, &params.spec)?;
    let mean = &design.x * DVector::from_column_slice(&params.coefficients);

    let targets: Vec<f64> = (0..trips.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(derive_seed(seed, NOISE_STREAM), i as u64);
            let e = match &params.noise {
                NoiseModel::None => 0.0,
                NoiseModel::Gaussian { sd } => sd * standard_normal(&mut rng),
                NoiseModel::Heteroskedastic { sd, .. } => {
                    let x = design.x[(i, noise_column.expect("resolved above"))];
                    sd * (1.0 + x) * standard_normal(&mut rng)
                }
            };
            (mean[i] + e).max(0.0)
        })
        .collect();

    let cycles: Vec<DrivingCycle> = trips
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let minutes = t.travel_time_min.unwrap_or(0.0);
            let n_seconds = ((minutes * 60.0).round() as usize).clamp(min_seconds, max_seconds);
            // each dwell costs its seconds plus the walk return it splits
            let room = n_seconds.saturating_sub(1 + MIN_CYCLE_RETURNS) / (DWELL_SECONDS + 1);
            let stops = if params.dwell_stops { (t.n_stops.unwrap_or(0) as usize).min(room) } else { 0 };
            gen_cycle(
                &t.trip_id,
                &CycleParams {
                    n_seconds,
                    base_speed_mph: t.avg_speed_mph.unwrap_or(25.0),
                    target_volatility_pct: targets[i],
                    n_stops: stops,
                    seed: derive_seed(derive_seed(seed, CYCLE_STREAM), i as u64),
                },
            )
        })
        .collect::<Result<_, _>>()?;

    Ok(SynthDataset {
        cycles,
        trips,
        vehicles,
        persons,
        targets,
        manifest,
    })
}

/// `y = 2 + 3x + (1 + x) e` with `x ~ U(0, 2)` and standard normal `e`. The
/// true `q`-quantile slope is `3 + z_q`.
pub fn heteroskedastic_design(n: usize, seed: u64) -> Result<DesignMatrix, ModelError> {
    let mut rng = stream_rng(seed, 0);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = 2.0 * uniform_open(&mut rng);
        let e = standard_normal(&mut rng);
        x.push(xi);
        y.push(2.0 + 3.0 * xi + (1.0 + xi) * e);
    }
    let m = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    DesignMatrix::new(
        vec![crate::model::INTERCEPT.to_owned(), "x".to_owned()],
        m,
        DVector::from_vec(y),
        (0..n).map(|i| i.to_string()).collect(),
    )
}
