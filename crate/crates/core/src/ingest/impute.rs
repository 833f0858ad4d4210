use super::{AnalysisRow, Field, FieldKind, IngestError, Value};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillRule {
    Mean,
    Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FillValue {
    Number(f64),
    Category(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnImputation {
    pub column: String,
    pub rule: FillRule,
    pub count: usize,
    /// `None` when nothing in the column needed filling.
    pub fill: Option<FillValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputationReport {
    pub columns: Vec<ColumnImputation>,
}

impl ImputationReport {
    pub fn total_imputed(&self) -> usize {
        self.columns.iter().map(|c| c.count).sum()
    }
}

/// Fills missing covariates: continuous columns with the mean of their
/// observed values, categorical and 0/1 columns with their mode (ties go to
/// the category declared first). Observed cells are left untouched.
pub fn impute_means(
    rows: &[AnalysisRow],
) -> Result<(Vec<AnalysisRow>, ImputationReport), IngestError> {
    let mut out = rows.to_vec();
    let mut report = ImputationReport::default();

    for field in Field::ALL {
        let missing: Vec<usize> = (0..out.len()).filter(|&i| out[i].is_missing(field)).collect();
        let rule = match field.kind() {
            FieldKind::Continuous => FillRule::Mean,
            FieldKind::Indicator | FieldKind::Categorical => FillRule::Mode,
        };
        if missing.is_empty() {
            report.columns.push(ColumnImputation {
                column: field.name().to_owned(),
                rule,
                count: 0,
                fill: None,
            });
            continue;
        }
        let observed: Vec<Value> = out.iter().filter_map(|r| r.get(field)).collect();
        if observed.is_empty() {
            return Err(IngestError::EntirelyMissing {
                column: field.name().to_owned(),
            });
        }
        let (value, fill) = match rule {
            FillRule::Mean => {
                let sum: f64 = observed
                    .iter()
                    .map(|v| match v {
                        Value::Number(x) => *x,
                        Value::Category(_) => unreachable!("continuous field"),
                    })
                    .sum();
                let mean = sum / observed.len() as f64;
                (Value::Number(mean), FillValue::Number(mean))
            }
            FillRule::Mode => {
                let categories = field.categories().expect("categorical field");
                let counts: Vec<usize> = categories
                    .iter()
                    .map(|c| observed.iter().filter(|v| **v == Value::Category(c)).count())
                    .collect();
                let best = counts.iter().copied().max().unwrap_or(0);
                // first category reaching the max count
                let pos = counts.iter().position(|&n| n == best).unwrap_or(0);
                let code = categories[pos];
                (Value::Category(code), FillValue::Category(code.to_owned()))
            }
        };
        for &i in &missing {
            let stored = out[i].set(field, value);
            debug_assert!(stored);
            out[i].imputed.insert(field);
        }
        report.columns.push(ColumnImputation {
            column: field.name().to_owned(),
            rule,
            count: missing.len(),
            fill: Some(fill),
        });
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{AgeBand, BodyType, Powertrain, Transmission};
    use std::collections::BTreeSet;

    fn row(id: &str) -> AnalysisRow {
        AnalysisRow {
            trip_id: id.into(),
            household_id: "H".into(),
            vehicle_id: "V".into(),
            person_id: "P".into(),
            volatility_pct: 10.0,
            distance_mi: Some(1.0),
            travel_time_min: Some(2.0),
            avg_speed_mph: Some(3.0),
            n_stops: Some(1.0),
            grade_sd: Some(0.5),
            is_afv: Some(false),
            body_type: Some(BodyType::Sedan),
            transmission: Some(Transmission::Automatic),
            vehicle_age_years: Some(4.0),
            n_cylinders: Some(4.0),
            powertrain: Some(Powertrain::FrontWheel),
            ownership_nonowned: Some(false),
            is_female: Some(true),
            age_band: Some(AgeBand::A40_49),
            not_employed: Some(false),
            imputed: BTreeSet::new(),
        }
    }

    #[test]
    fn continuous_mean() {
        let mut rows = vec![row("a"), row("b"), row("c")];
        rows[1].distance_mi = None;
        rows[2].distance_mi = Some(3.0);
        let (out, report) = impute_means(&rows).unwrap();
        assert_eq!(out[1].distance_mi, Some(2.0));
        assert!(out[1].imputed.contains(&Field::DistanceMi));
        assert!(out[0].imputed.is_empty());
        assert_eq!(report.total_imputed(), 1);
        let col = report.columns.iter().find(|c| c.column == "distance_mi").unwrap();
        assert_eq!(col.fill, Some(FillValue::Number(2.0)));
        assert_eq!(col.rule, FillRule::Mean);
    }

    #[test]
    fn no_missing_is_identity() {
        let rows = vec![row("a"), row("b")];
        let (out, report) = impute_means(&rows).unwrap();
        assert_eq!(out, rows);
        assert_eq!(report.total_imputed(), 0);
        assert_eq!(report.columns.len(), Field::ALL.len());
    }

    #[test]
    fn categorical_mode() {
        let mut rows = vec![row("a"), row("b"), row("c"), row("d")];
        rows[2].body_type = None;
        rows[3].body_type = Some(BodyType::Pickup);
        let (out, _) = impute_means(&rows).unwrap();
        assert_eq!(out[2].body_type, Some(BodyType::Sedan));
    }

    #[test]
    fn mode_ties_follow_declaration_order() {
        let mut rows = vec![row("a"), row("b"), row("c")];
        rows[0].body_type = Some(BodyType::Wagon);
        rows[1].body_type = Some(BodyType::Suv);
        rows[2].body_type = None;
        rows[0].is_female = Some(true);
        rows[1].is_female = Some(false);
        rows[2].is_female = None;
        let (out, _) = impute_means(&rows).unwrap();
        assert_eq!(out[2].body_type, Some(BodyType::Suv));
        assert_eq!(out[2].is_female, Some(false));
    }

    #[test]
    fn entirely_missing_column_is_an_error() {
        let mut rows = vec![row("a"), row("b")];
        rows[0].grade_sd = None;
        rows[1].grade_sd = None;
        match impute_means(&rows).unwrap_err() {
            IngestError::EntirelyMissing { column } => assert_eq!(column, "grade_sd"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn idempotent() {
        let mut rows = vec![row("a"), row("b"), row("c")];
        rows[0].n_cylinders = None;
        rows[1].age_band = None;
        rows[2].avg_speed_mph = None;
        let (once, first) = impute_means(&rows).unwrap();
        let (twice, second) = impute_means(&once).unwrap();
        assert_eq!(first.total_imputed(), 3);
        assert_eq!(once, twice);
        assert_eq!(second.total_imputed(), 0);
    }
}
