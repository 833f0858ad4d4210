//! Parsing and joining of the four input tables.
//!
//! Driving cycles arrive as long-format `trip_id, t_sec, speed_mph` rows. The
//! trip, vehicle and person tables carry the covariates. Column names can be
//! remapped with a [`SchemaMap`] so survey extracts with other headers can be
//! read without rewriting them.

mod categories;
mod csvio;
mod cycles;
mod impute;
mod join;
mod tables;

pub use categories::{AgeBand, BodyType, Category, Powertrain, Transmission};
pub use cycles::{parse_cycles, write_cycles, ParsedCycles};
pub use impute::{impute_means, ColumnImputation, FillRule, FillValue, ImputationReport};
pub use join::{join_dataset, JoinReport};
pub use tables::{
    parse_persons, parse_table, parse_trips, parse_vehicles, write_persons, write_trips,
    write_vehicles, Table, TableKind,
};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{table}: column `{column}` not found in header")]
    MissingColumn { table: &'static str, column: String },
    #[error("{table}: duplicate key `{key}`")]
    DuplicateKey { table: &'static str, key: String },
    #[error("column `{column}` has no observed values to impute from")]
    EntirelyMissing { column: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Logical column name to header name overrides. Unmapped logical names are
/// looked up verbatim.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchemaMap(pub BTreeMap<String, String>);

impl SchemaMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, logical: &str, header: &str) -> Self {
        self.0.insert(logical.to_owned(), header.to_owned());
        self
    }

    pub fn resolve<'a>(&'a self, logical: &'a str) -> &'a str {
        self.0.get(logical).map(String::as_str).unwrap_or(logical)
    }
}

/// One row that could not be used, with its 1-based line number in the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: u64,
    pub reason: String,
    pub raw: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectsReport {
    pub rejects: Vec<Reject>,
}

impl RejectsReport {
    pub fn len(&self) -> usize {
        self.rejects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rejects.is_empty()
    }

    /// CSV with columns `row, reason, raw_line`.
    pub fn to_csv(&self) -> Result<String, IngestError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["row", "reason", "raw_line"])?;
        for r in &self.rejects {
            w.write_record([r.line.to_string().as_str(), &r.reason, &r.raw])?;
        }
        Ok(csvio::into_string(w)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSample {
    /// Elapsed seconds.
    pub t: u64,
    /// Miles per hour.
    pub speed: f64,
}

/// A trip's speed trace, sorted by time with unique timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingCycle {
    pub trip_id: String,
    pub samples: Vec<SpeedSample>,
}

impl DrivingCycle {
    pub fn speeds(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.speed).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripSummary {
    pub trip_id: String,
    pub household_id: String,
    pub vehicle_id: String,
    pub distance_mi: Option<f64>,
    pub travel_time_min: Option<f64>,
    pub avg_speed_mph: Option<f64>,
    pub n_stops: Option<u32>,
    /// Standard deviation of road grade, percent.
    pub grade_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub vehicle_id: String,
    pub household_id: String,
    /// Person assumed to have driven every trip made with this vehicle.
    pub driver_person_id: Option<String>,
    pub is_afv: Option<bool>,
    pub body_type: Option<BodyType>,
    pub transmission: Option<Transmission>,
    pub vehicle_age_years: Option<f64>,
    pub n_cylinders: Option<u32>,
    pub powertrain: Option<Powertrain>,
    pub ownership_nonowned: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonRecord {
    pub person_id: String,
    pub household_id: String,
    pub is_female: Option<bool>,
    pub age_band: Option<AgeBand>,
    pub not_employed: Option<bool>,
}

/// Covariate columns of an [`AnalysisRow`], in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    DistanceMi,
    TravelTimeMin,
    AvgSpeedMph,
    NStops,
    GradeSd,
    Afv,
    Body,
    Transmission,
    VehAge,
    Cylinders,
    Powertrain,
    Nonowned,
    Female,
    AgeBand,
    NotEmployed,
}

/// How a field enters models and descriptive tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Continuous,
    Indicator,
    Categorical,
}

/// Unit of observation a field varies over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Trip,
    Vehicle,
    Person,
}

impl Field {
    pub const ALL: [Field; 15] = [
        Field::DistanceMi,
        Field::TravelTimeMin,
        Field::AvgSpeedMph,
        Field::NStops,
        Field::GradeSd,
        Field::Afv,
        Field::Body,
        Field::Transmission,
        Field::VehAge,
        Field::Cylinders,
        Field::Powertrain,
        Field::Nonowned,
        Field::Female,
        Field::AgeBand,
        Field::NotEmployed,
    ];

    /// Column name used in model specifications and reports.
    pub fn name(self) -> &'static str {
        match self {
            Field::DistanceMi => "distance_mi",
            Field::TravelTimeMin => "travel_time_min",
            Field::AvgSpeedMph => "avg_speed_mph",
            Field::NStops => "n_stops",
            Field::GradeSd => "grade_sd",
            Field::Afv => "afv",
            Field::Body => "body",
            Field::Transmission => "transmission",
            Field::VehAge => "veh_age",
            Field::Cylinders => "cylinders",
            Field::Powertrain => "powertrain",
            Field::Nonowned => "nonowned",
            Field::Female => "female",
            Field::AgeBand => "age_band",
            Field::NotEmployed => "not_employed",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn kind(self) -> FieldKind {
        match self {
            Field::DistanceMi
            | Field::TravelTimeMin
            | Field::AvgSpeedMph
            | Field::NStops
            | Field::GradeSd
            | Field::VehAge
            | Field::Cylinders => FieldKind::Continuous,
            Field::Afv | Field::Nonowned | Field::Female | Field::NotEmployed => {
                FieldKind::Indicator
            }
            Field::Body | Field::Transmission | Field::Powertrain | Field::AgeBand => {
                FieldKind::Categorical
            }
        }
    }

    pub fn level(self) -> Level {
        match self {
            Field::DistanceMi
            | Field::TravelTimeMin
            | Field::AvgSpeedMph
            | Field::NStops
            | Field::GradeSd => Level::Trip,
            Field::Afv
            | Field::Body
            | Field::Transmission
            | Field::VehAge
            | Field::Cylinders
            | Field::Powertrain
            | Field::Nonowned => Level::Vehicle,
            Field::Female | Field::AgeBand | Field::NotEmployed => Level::Person,
        }
    }

    /// Category codes in declaration order, for categorical and indicator fields.
    pub fn categories(self) -> Option<Vec<&'static str>> {
        match self {
            Field::Body => Some(BodyType::ALL.iter().map(|c| c.code()).collect()),
            Field::Transmission => Some(Transmission::ALL.iter().map(|c| c.code()).collect()),
            Field::Powertrain => Some(Powertrain::ALL.iter().map(|c| c.code()).collect()),
            Field::AgeBand => Some(AgeBand::ALL.iter().map(|c| c.code()).collect()),
            f if f.kind() == FieldKind::Indicator => Some(vec!["0", "1"]),
            _ => None,
        }
    }
}

impl Field {
    /// Row label in descriptive tables.
    pub fn label(self) -> &'static str {
        match self {
            Field::DistanceMi => "Distance traveled (miles)",
            Field::TravelTimeMin => "Travel time (min)",
            Field::AvgSpeedMph => "Average speed (mph)",
            Field::NStops => "Number of stops",
            Field::GradeSd => "Std. dev. of road grade",
            Field::Afv => "AFV (No=0, Yes=1)",
            Field::Body => "Body type",
            Field::Transmission => "Transmission",
            Field::VehAge => "Vehicle Age (years)",
            Field::Cylinders => "Number of cylinders",
            Field::Powertrain => "Power train",
            Field::Nonowned => "Ownership (owned=0, non-owned=1)",
            Field::Female => "Gender (male=0, female=1)",
            Field::AgeBand => "Age (years)",
            Field::NotEmployed => "Employment (Yes=0, No=1)",
        }
    }

    /// Row or group label in coefficient tables.
    pub fn model_label(self) -> &'static str {
        match self {
            Field::DistanceMi => "Distance traveled (miles)",
            Field::TravelTimeMin => "Travel time (min)",
            Field::AvgSpeedMph => "Average speed (mph)",
            Field::NStops => "No. of stops",
            Field::GradeSd => "Std. dev. of road grade",
            Field::Afv => "AFV",
            Field::Body => "Body type",
            Field::Transmission => "Transmission",
            Field::VehAge => "Vehicle age",
            Field::Cylinders => "No. of cylinders",
            Field::Powertrain => "Power train",
            Field::Nonowned => "Ownership (non-owned=1)",
            Field::Female => "Gender (Female=1)",
            Field::AgeBand => "Age",
            Field::NotEmployed => "Employment (no=1)",
        }
    }

    /// Display label of one category code, `None` for unknown codes or
    /// non-categorical fields.
    pub fn category_label(self, code: &str) -> Option<&'static str> {
        match self {
            Field::Body => BodyType::from_code(code).map(Category::label),
            Field::Transmission => Transmission::from_code(code).map(Category::label),
            Field::Powertrain => Powertrain::from_code(code).map(Category::label),
            Field::AgeBand => AgeBand::from_code(code).map(Category::label),
            _ => None,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single cell of an [`AnalysisRow`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Number(f64),
    /// Category code; indicators use `"0"` / `"1"`.
    Category(&'static str),
}

/// One trip joined with its vehicle and driver. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRow {
    pub trip_id: String,
    pub household_id: String,
    pub vehicle_id: String,
    pub person_id: String,
    /// Dependent variable, percent.
    pub volatility_pct: f64,
    pub distance_mi: Option<f64>,
    pub travel_time_min: Option<f64>,
    pub avg_speed_mph: Option<f64>,
    pub n_stops: Option<f64>,
    pub grade_sd: Option<f64>,
    pub is_afv: Option<bool>,
    pub body_type: Option<BodyType>,
    pub transmission: Option<Transmission>,
    pub vehicle_age_years: Option<f64>,
    pub n_cylinders: Option<f64>,
    pub powertrain: Option<Powertrain>,
    pub ownership_nonowned: Option<bool>,
    pub is_female: Option<bool>,
    pub age_band: Option<AgeBand>,
    pub not_employed: Option<bool>,
    /// Fields whose value was filled by imputation.
    pub imputed: BTreeSet<Field>,
}

fn indicator(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

impl AnalysisRow {
    /// Cell value of a covariate, `None` when missing.
    pub fn get(&self, field: Field) -> Option<Value> {
        use Value::{Category as C, Number as N};
        match field {
            Field::DistanceMi => self.distance_mi.map(N),
            Field::TravelTimeMin => self.travel_time_min.map(N),
            Field::AvgSpeedMph => self.avg_speed_mph.map(N),
            Field::NStops => self.n_stops.map(N),
            Field::GradeSd => self.grade_sd.map(N),
            Field::Afv => self.is_afv.map(|b| C(indicator(b))),
            Field::Body => self.body_type.map(|c| C(c.code())),
            Field::Transmission => self.transmission.map(|c| C(c.code())),
            Field::VehAge => self.vehicle_age_years.map(N),
            Field::Cylinders => self.n_cylinders.map(N),
            Field::Powertrain => self.powertrain.map(|c| C(c.code())),
            Field::Nonowned => self.ownership_nonowned.map(|b| C(indicator(b))),
            Field::Female => self.is_female.map(|b| C(indicator(b))),
            Field::AgeBand => self.age_band.map(|c| C(c.code())),
            Field::NotEmployed => self.not_employed.map(|b| C(indicator(b))),
        }
    }

    /// Numeric view: continuous fields as-is, indicators as 0/1.
    pub fn numeric(&self, field: Field) -> Option<f64> {
        match self.get(field)? {
            Value::Number(x) => Some(x),
            Value::Category(code) if field.kind() == FieldKind::Indicator => {
                Some(if code == "1" { 1.0 } else { 0.0 })
            }
            Value::Category(_) => None,
        }
    }

    pub fn is_missing(&self, field: Field) -> bool {
        self.get(field).is_none()
    }

    /// Stores `value` into `field`. Returns false when the value does not fit
    /// the field's type.
    pub(crate) fn set(&mut self, field: Field, value: Value) -> bool {
        match (field.kind(), value) {
            (FieldKind::Continuous, Value::Number(x)) => {
                let slot = match field {
                    Field::DistanceMi => &mut self.distance_mi,
                    Field::TravelTimeMin => &mut self.travel_time_min,
                    Field::AvgSpeedMph => &mut self.avg_speed_mph,
                    Field::NStops => &mut self.n_stops,
                    Field::GradeSd => &mut self.grade_sd,
                    Field::VehAge => &mut self.vehicle_age_years,
                    Field::Cylinders => &mut self.n_cylinders,
                    _ => unreachable!(),
                };
                *slot = Some(x);
                true
            }
            (FieldKind::Indicator, Value::Category(code)) => {
                let b = match code {
                    "0" => false,
                    "1" => true,
                    _ => return false,
                };
                let slot = match field {
                    Field::Afv => &mut self.is_afv,
                    Field::Nonowned => &mut self.ownership_nonowned,
                    Field::Female => &mut self.is_female,
                    Field::NotEmployed => &mut self.not_employed,
                    _ => unreachable!(),
                };
                *slot = Some(b);
                true
            }
            (FieldKind::Categorical, Value::Category(code)) => match field {
                Field::Body => BodyType::from_code(code)
                    .map(|c| self.body_type = Some(c))
                    .is_some(),
                Field::Transmission => Transmission::from_code(code)
                    .map(|c| self.transmission = Some(c))
                    .is_some(),
                Field::Powertrain => Powertrain::from_code(code)
                    .map(|c| self.powertrain = Some(c))
                    .is_some(),
                Field::AgeBand => AgeBand::from_code(code)
                    .map(|c| self.age_band = Some(c))
                    .is_some(),
                _ => unreachable!(),
            },
            _ => false,
        }
    }
}
