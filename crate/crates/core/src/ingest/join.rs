use super::{AnalysisRow, PersonRecord, TripSummary, VehicleRecord};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Trips that did not make it into the analysis set, by the first link that
/// failed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinReport {
    /// Volatility computed but no trip summary row.
    pub missing_trip: usize,
    /// Trip summary row but no volatility (trip excluded or absent from cycles).
    pub missing_volatility: usize,
    pub missing_vehicle: usize,
    /// Vehicle found but registered to another household.
    pub household_mismatch: usize,
    /// No assigned driver, or the driver is not a person of the household.
    pub missing_person: usize,
}

impl JoinReport {
    pub fn total_unmatched(&self) -> usize {
        self.missing_trip
            + self.missing_volatility
            + self.missing_vehicle
            + self.household_mismatch
            + self.missing_person
    }
}

/// Links each trip to its vehicle by `vehicle_id` and to the person assigned
/// to drive that vehicle within the household. Output is sorted by trip id.
pub fn join_dataset(
    volatilities: &BTreeMap<String, f64>,
    trips: &[TripSummary],
    vehicles: &[VehicleRecord],
    persons: &[PersonRecord],
) -> (Vec<AnalysisRow>, JoinReport) {
    let trips: HashMap<&str, &TripSummary> = trips.iter().map(|t| (t.trip_id.as_str(), t)).collect();
    let vehicles: HashMap<&str, &VehicleRecord> =
        vehicles.iter().map(|v| (v.vehicle_id.as_str(), v)).collect();
    let persons: HashMap<(&str, &str), &PersonRecord> = persons
        .iter()
        .map(|p| ((p.household_id.as_str(), p.person_id.as_str()), p))
        .collect();

    let mut report = JoinReport::default();
    let mut rows = Vec::new();
    let ids: BTreeSet<&str> = volatilities
        .keys()
        .map(String::as_str)
        .chain(trips.keys().copied())
        .collect();

    for id in ids {
        let Some(trip) = trips.get(id) else {
            report.missing_trip += 1;
            continue;
        };
        let Some(&volatility_pct) = volatilities.get(id) else {
            report.missing_volatility += 1;
            continue;
        };
        let Some(vehicle) = vehicles.get(trip.vehicle_id.as_str()) else {
            report.missing_vehicle += 1;
            continue;
        };
        if vehicle.household_id != trip.household_id {
            report.household_mismatch += 1;
            continue;
        }
        let person = vehicle
            .driver_person_id
            .as_deref()
            .and_then(|pid| persons.get(&(vehicle.household_id.as_str(), pid)));
        let Some(person) = person else {
            report.missing_person += 1;
            continue;
        };
        rows.push(AnalysisRow {
            trip_id: trip.trip_id.clone(),
            household_id: trip.household_id.clone(),
            vehicle_id: vehicle.vehicle_id.clone(),
            person_id: person.person_id.clone(),
            volatility_pct,
            distance_mi: trip.distance_mi,
            travel_time_min: trip.travel_time_min,
            avg_speed_mph: trip.avg_speed_mph,
            n_stops: trip.n_stops.map(f64::from),
            grade_sd: trip.grade_sd,
            is_afv: vehicle.is_afv,
            body_type: vehicle.body_type,
            transmission: vehicle.transmission,
            vehicle_age_years: vehicle.vehicle_age_years,
            n_cylinders: vehicle.n_cylinders.map(f64::from),
            powertrain: vehicle.powertrain,
            ownership_nonowned: vehicle.ownership_nonowned,
            is_female: person.is_female,
            age_band: person.age_band,
            not_employed: person.not_employed,
            imputed: BTreeSet::new(),
        });
    }
    (rows, report)
}
