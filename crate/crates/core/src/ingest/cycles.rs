use super::csvio::{self, Source};
use super::{DrivingCycle, IngestError, Reject, RejectsReport, SchemaMap, SpeedSample};
use std::collections::BTreeMap;
use std::io::Read;

const TABLE: &str = "cycles";

/// Output of [`parse_cycles`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedCycles {
    /// One cycle per trip, sorted by trip id.
    pub cycles: Vec<DrivingCycle>,
    /// Every dropped row, sorted by line.
    pub rejects: RejectsReport,
    /// Rows dropped for a negative or non-finite speed.
    pub n_invalid_speed: usize,
    /// Rows dropped because their trip already had a sample at that second.
    pub n_duplicate_time: usize,
}

/// Reads long-format speed traces (`trip_id, t_sec, speed_mph` by default).
///
/// Bad rows are dropped into the rejects report and parsing continues. Only a
/// missing column aborts.
pub fn parse_cycles(source: impl Read, schema: &SchemaMap) -> Result<ParsedCycles, IngestError> {
    let src = Source::read(source)?;
    if src.is_blank() {
        return Ok(ParsedCycles::default());
    }
    let mut rdr = src.reader();
    let headers = rdr.headers()?.clone();
    let [i_trip, i_t, i_speed] =
        csvio::column_indices(&headers, schema, TABLE, ["trip_id", "t_sec", "speed_mph"])?;

    let mut out = ParsedCycles::default();
    // trip -> (t, speed, line) in file order
    let mut by_trip: BTreeMap<String, Vec<(u64, f64, u64)>> = BTreeMap::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |i: usize| record.get(i).unwrap_or("");
        let parsed = (|| {
            let trip = csvio::required_id(cell(i_trip), schema.resolve("trip_id"))?;
            let t = match csvio::opt_int(cell(i_t), schema.resolve("t_sec"))? {
                Some(t) if t >= 0 => t as u64,
                Some(t) => return Err(format!("negative time {t}")),
                None => return Err("missing time".to_owned()),
            };
            let raw = cell(i_speed);
            let speed = raw
                .parse::<f64>()
                .map_err(|_| format!("cannot parse speed `{raw}`"))?;
            Ok((trip, t, speed))
        })();
        match parsed {
            Ok((_, _, speed)) if !(speed.is_finite() && speed >= 0.0) => {
                out.n_invalid_speed += 1;
                out.rejects.rejects.push(Reject {
                    line,
                    reason: format!("invalid speed {speed}"),
                    raw: src.raw_line(line),
                });
            }
            Ok((trip, t, speed)) => by_trip.entry(trip).or_default().push((t, speed, line)),
            Err(reason) => out.rejects.rejects.push(Reject {
                line,
                reason,
                raw: src.raw_line(line),
            }),
        }
    }

    for (trip_id, mut rows) in by_trip {
        // stable: among equal timestamps the first in file order wins
        rows.sort_by_key(|r| r.0);
        let mut samples: Vec<SpeedSample> = Vec::with_capacity(rows.len());
        for (t, speed, line) in rows {
            if samples.last().is_some_and(|s| s.t == t) {
                out.n_duplicate_time += 1;
                out.rejects.rejects.push(Reject {
                    line,
                    reason: format!("duplicate timestamp {t} for trip {trip_id}"),
                    raw: src.raw_line(line),
                });
                continue;
            }
            samples.push(SpeedSample { t, speed });
        }
        out.cycles.push(DrivingCycle { trip_id, samples });
    }
    out.rejects.rejects.sort_by_key(|r| r.line);
    Ok(out)
}

/// Writes cycles in the default `trip_id, t_sec, speed_mph` layout.
pub fn write_cycles(cycles: &[DrivingCycle]) -> Result<String, IngestError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trip_id", "t_sec", "speed_mph"])?;
    for c in cycles {
        for s in &c.samples {
            w.write_record([c.trip_id.as_str(), &s.t.to_string(), &s.speed.to_string()])?;
        }
    }
    csvio::into_string(w)
}
