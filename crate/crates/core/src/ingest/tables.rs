use super::csvio::{self, fmt_flag, fmt_opt, Source};
use super::{
    AgeBand, BodyType, Category, IngestError, PersonRecord, Powertrain, Reject, RejectsReport,
    SchemaMap, Transmission, TripSummary, VehicleRecord,
};
use std::collections::HashSet;
use std::io::Read;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Trip,
    Vehicle,
    Person,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Trips(Vec<TripSummary>),
    Vehicles(Vec<VehicleRecord>),
    Persons(Vec<PersonRecord>),
}

/// Parses any of the three covariate tables. Rows with malformed or
/// out-of-range values go to the rejects report; unknown category codes
/// become missing cells.
pub fn parse_table(
    source: impl Read,
    kind: TableKind,
    schema: &SchemaMap,
) -> Result<(Table, RejectsReport), IngestError> {
    Ok(match kind {
        TableKind::Trip => {
            let (t, r) = parse_trips(source, schema)?;
            (Table::Trips(t), r)
        }
        TableKind::Vehicle => {
            let (t, r) = parse_vehicles(source, schema)?;
            (Table::Vehicles(t), r)
        }
        TableKind::Person => {
            let (t, r) = parse_persons(source, schema)?;
            (Table::Persons(t), r)
        }
    })
}

/// Drives the row loop shared by the three tables: resolves columns, turns
/// each record into `T` or a reject, and enforces key uniqueness.
fn read_rows<T, const N: usize>(
    source: impl Read,
    schema: &SchemaMap,
    table: &'static str,
    columns: [&str; N],
    mut parse_row: impl for<'a> FnMut(&'a dyn Fn(usize) -> &'a str) -> Result<T, String>,
    key: impl Fn(&T) -> String,
) -> Result<(Vec<T>, RejectsReport), IngestError> {
    let src = Source::read(source)?;
    if src.is_blank() {
        return Ok((Vec::new(), RejectsReport::default()));
    }
    let mut rdr = src.reader();
    let headers = rdr.headers()?.clone();
    let idx = csvio::column_indices(&headers, schema, table, columns)?;

    let mut rows = Vec::new();
    let mut rejects = RejectsReport::default();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize| record.get(idx[i]).unwrap_or("");
        match parse_row(&cell) {
            Ok(row) => {
                let k = key(&row);
                if !seen.insert(k.clone()) {
                    return Err(IngestError::DuplicateKey { table, key: k });
                }
                rows.push(row);
            }
            Err(reason) => rejects.rejects.push(Reject {
                line,
                reason,
                raw: src.raw_line(line),
            }),
        }
    }
    Ok((rows, rejects))
}

fn check(value: Option<f64>, column: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Result<Option<f64>, String> {
    match value {
        Some(x) if !ok(x) => Err(format!("{column}: {x} must be {rule}")),
        v => Ok(v),
    }
}

fn count(value: Option<i64>, column: &str, min: i64) -> Result<Option<u32>, String> {
    match value {
        None => Ok(None),
        Some(v) if v >= min && v <= u32::MAX as i64 => Ok(Some(v as u32)),
        Some(v) => Err(format!("{column}: {v} must be an integer >= {min}")),
    }
}

const TRIP_COLUMNS: [&str; 8] = [
    "trip_id",
    "household_id",
    "vehicle_id",
    "distance_mi",
    "travel_time_min",
    "avg_speed_mph",
    "n_stops",
    "grade_sd",
];

pub fn parse_trips(
    source: impl Read,
    schema: &SchemaMap,
) -> Result<(Vec<TripSummary>, RejectsReport), IngestError> {
    read_rows(
        source,
        schema,
        "trips",
        TRIP_COLUMNS,
        |cell| {
            let c = TRIP_COLUMNS;
            Ok(TripSummary {
                trip_id: csvio::required_id(cell(0), c[0])?,
                household_id: csvio::required_id(cell(1), c[1])?,
                vehicle_id: csvio::required_id(cell(2), c[2])?,
                distance_mi: check(csvio::opt_f64(cell(3), c[3])?, c[3], |x| x >= 0.0, ">= 0")?,
                travel_time_min: check(csvio::opt_f64(cell(4), c[4])?, c[4], |x| x > 0.0, "> 0")?,
                avg_speed_mph: check(csvio::opt_f64(cell(5), c[5])?, c[5], |x| x > 0.0, "> 0")?,
                n_stops: count(csvio::opt_int(cell(6), c[6])?, c[6], 1)?,
                grade_sd: check(csvio::opt_f64(cell(7), c[7])?, c[7], |x| x >= 0.0, ">= 0")?,
            })
        },
        |t| t.trip_id.clone(),
    )
}

const VEHICLE_COLUMNS: [&str; 10] = [
    "vehicle_id",
    "household_id",
    "driver_person_id",
    "afv",
    "body",
    "transmission",
    "veh_age",
    "cylinders",
    "powertrain",
    "nonowned",
];

pub fn parse_vehicles(
    source: impl Read,
    schema: &SchemaMap,
) -> Result<(Vec<VehicleRecord>, RejectsReport), IngestError> {
    read_rows(
        source,
        schema,
        "vehicles",
        VEHICLE_COLUMNS,
        |cell| {
            let c = VEHICLE_COLUMNS;
            let driver = cell(2);
            Ok(VehicleRecord {
                vehicle_id: csvio::required_id(cell(0), c[0])?,
                household_id: csvio::required_id(cell(1), c[1])?,
                driver_person_id: (!csvio::is_missing_token(driver)).then(|| driver.to_owned()),
                is_afv: csvio::opt_flag(cell(3)),
                body_type: BodyType::from_code(cell(4)),
                transmission: Transmission::from_code(cell(5)),
                vehicle_age_years: check(csvio::opt_f64(cell(6), c[6])?, c[6], |x| x >= 0.0, ">= 0")?,
                n_cylinders: count(csvio::opt_int(cell(7), c[7])?, c[7], 0)?,
                powertrain: Powertrain::from_code(cell(8)),
                ownership_nonowned: csvio::opt_flag(cell(9)),
            })
        },
        |v| v.vehicle_id.clone(),
    )
}

const PERSON_COLUMNS: [&str; 5] = ["person_id", "household_id", "female", "age_years", "not_employed"];

/// Persons are keyed by `(household_id, person_id)`, since survey person
/// numbers usually restart in every household.
pub fn parse_persons(
    source: impl Read,
    schema: &SchemaMap,
) -> Result<(Vec<PersonRecord>, RejectsReport), IngestError> {
    read_rows(
        source,
        schema,
        "persons",
        PERSON_COLUMNS,
        |cell| {
            let c = PERSON_COLUMNS;
            Ok(PersonRecord {
                person_id: csvio::required_id(cell(0), c[0])?,
                household_id: csvio::required_id(cell(1), c[1])?,
                is_female: csvio::opt_flag(cell(2)),
                age_band: csvio::opt_int(cell(3), c[3])?.and_then(AgeBand::from_age),
                not_employed: csvio::opt_flag(cell(4)),
            })
        },
        |p| format!("{}/{}", p.household_id, p.person_id),
    )
}

fn code<C: Category>(c: Option<C>) -> String {
    c.map(|c| c.code().to_owned()).unwrap_or_default()
}

pub fn write_trips(trips: &[TripSummary]) -> Result<String, IngestError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIP_COLUMNS)?;
    for t in trips {
        w.write_record([
            t.trip_id.clone(),
            t.household_id.clone(),
            t.vehicle_id.clone(),
            fmt_opt(&t.distance_mi),
            fmt_opt(&t.travel_time_min),
            fmt_opt(&t.avg_speed_mph),
            fmt_opt(&t.n_stops),
            fmt_opt(&t.grade_sd),
        ])?;
    }
    csvio::into_string(w)
}

pub fn write_vehicles(vehicles: &[VehicleRecord]) -> Result<String, IngestError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(VEHICLE_COLUMNS)?;
    for v in vehicles {
        w.write_record([
            v.vehicle_id.clone(),
            v.household_id.clone(),
            v.driver_person_id.clone().unwrap_or_default(),
            fmt_flag(v.is_afv),
            code(v.body_type),
            code(v.transmission),
            fmt_opt(&v.vehicle_age_years),
            fmt_opt(&v.n_cylinders),
            code(v.powertrain),
            fmt_flag(v.ownership_nonowned),
        ])?;
    }
    csvio::into_string(w)
}

/// Ages are written as the lower bound of their band.
pub fn write_persons(persons: &[PersonRecord]) -> Result<String, IngestError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PERSON_COLUMNS)?;
    for p in persons {
        w.write_record([
            p.person_id.clone(),
            p.household_id.clone(),
            fmt_flag(p.is_female),
            fmt_opt(&p.age_band.map(AgeBand::lower_age)),
            fmt_flag(p.not_employed),
        ])?;
    }
    csvio::into_string(w)
}
