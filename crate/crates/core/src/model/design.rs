use super::ModelError;
use crate::ingest::{AnalysisRow, Field, FieldKind, Value};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const INTERCEPT: &str = "intercept";

/// Name of the dependent variable computed from driving cycles.
const VOLATILITY: &str = "volatility_pct";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalSpec {
    pub column: String,
    /// Category codes in column order. Every observed value must be listed.
    pub categories: Vec<String>,
    /// Reference category; gets no dummy column.
    pub base: String,
}

/// Declarative model: response, continuous regressors, dummy-coded factors,
/// and the quantile grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dependent: String,
    #[serde(default)]
    pub continuous: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<CategoricalSpec>,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
}

fn default_quantiles() -> Vec<f64> {
    vec![0.1, 0.25, 0.5, 0.75, 0.9]
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::volatility_model()
    }
}

impl ModelSpec {
    /// Trip volatility on vehicle, trip and driver covariates, with sedans,
    /// automatics, front-wheel drive and the youngest age band as references.
    pub fn volatility_model() -> Self {
        let factor = |field: Field, base: &str| CategoricalSpec {
            column: field.name().to_owned(),
            categories: field
                .categories()
                .expect("categorical field")
                .into_iter()
                .map(str::to_owned)
                .collect(),
            base: base.to_owned(),
        };
        Self {
            dependent: VOLATILITY.to_owned(),
            continuous: [
                Field::Afv,
                Field::VehAge,
                Field::Cylinders,
                Field::DistanceMi,
                Field::NStops,
                Field::GradeSd,
                Field::Female,
                Field::Nonowned,
                Field::NotEmployed,
            ]
            .iter()
            .map(|f| f.name().to_owned())
            .collect(),
            categorical: vec![
                factor(Field::Body, "sedan"),
                factor(Field::Transmission, "auto"),
                factor(Field::Powertrain, "fwd"),
                factor(Field::AgeBand, "10-19"),
            ],
            quantiles: default_quantiles(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidSpec(m));
        for c in &self.categorical {
            if c.categories.is_empty() {
                return bad(format!("`{}` has no categories", c.column));
            }
            if !c.categories.contains(&c.base) {
                return bad(format!("base `{}` is not a category of `{}`", c.base, c.column));
            }
            for (i, a) in c.categories.iter().enumerate() {
                if c.categories[..i].contains(a) {
                    return bad(format!("`{}` lists category `{a}` twice", c.column));
                }
            }
        }
        let mut names: Vec<&str> = self.continuous.iter().map(String::as_str).collect();
        names.extend(self.categorical.iter().map(|c| c.column.as_str()));
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return bad(format!("column `{a}` appears twice"));
            }
            if *a == self.dependent {
                return bad(format!("`{a}` is both response and regressor"));
            }
        }
        validate_quantile_grid(&self.quantiles)
    }

    /// Design column names in order: intercept, continuous, then each factor's
    /// non-base levels as `column[level]`.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![INTERCEPT.to_owned()];
        names.extend(self.continuous.iter().cloned());
        for c in &self.categorical {
            names.extend(
                c.categories
                    .iter()
                    .filter(|l| **l != c.base)
                    .map(|l| dummy_column_name(&c.column, l)),
            );
        }
        names
    }
}

/// Design column name of one dummy level, `column[level]`.
pub fn dummy_column_name(column: &str, level: &str) -> String {
    format!("{column}[{level}]")
}

pub(crate) fn validate_quantile_grid(qs: &[f64]) -> Result<(), ModelError> {
    if qs.is_empty() {
        return Err(ModelError::InvalidSpec("empty quantile grid".into()));
    }
    for &q in qs {
        if !(q > 0.0 && q < 1.0) {
            return Err(ModelError::InvalidQuantile(q));
        }
    }
    if qs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ModelError::InvalidSpec(
            "quantiles must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Numeric regression problem with named columns. Column 0 is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub column_names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub row_keys: Vec<String>,
}

impl DesignMatrix {
    /// Checks shapes, the leading column of ones and finiteness.
    pub fn new(
        column_names: Vec<String>,
        x: DMatrix<f64>,
        y: DVector<f64>,
        row_keys: Vec<String>,
    ) -> Result<Self, ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidDesign(m.to_owned()));
        if x.ncols() != column_names.len() {
            return bad("column name count differs from matrix width");
        }
        if x.nrows() != y.len() || row_keys.len() != y.len() {
            return bad("row counts of X, y and keys differ");
        }
        if column_names.first().map(String::as_str) != Some(INTERCEPT) {
            return bad("first column must be the intercept");
        }
        if x.column(0).iter().any(|&v| v != 1.0) {
            return bad("intercept column must be all ones");
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return bad("non-finite entry");
        }
        Ok(Self {
            column_names,
            x,
            y,
            row_keys,
        })
    }

    /// Convenience constructor from row-major regressors (without intercept).
    pub fn from_rows(names: &[&str], rows: &[Vec<f64>], y: &[f64]) -> Result<Self, ModelError> {
        let p = names.len() + 1;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(ModelError::InvalidDesign("ragged rows".into()));
        }
        let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
        let mut column_names = vec![INTERCEPT.to_owned()];
        column_names.extend(names.iter().map(|s| s.to_string()));
        Self::new(
            column_names,
            x,
            DVector::from_column_slice(y),
            (0..n).map(|i| i.to_string()).collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Rows at `indices` (repeats allowed), in that order.
    pub fn select_rows(&self, indices: &[usize]) -> DesignMatrix {
        DesignMatrix {
            column_names: self.column_names.clone(),
            x: self.x.select_rows(indices),
            y: self.y.select_rows(indices),
            row_keys: indices.iter().map(|&i| self.row_keys[i].clone()).collect(),
        }
    }

    pub fn with_response(&self, y: DVector<f64>) -> Result<DesignMatrix, ModelError> {
        Self::new(self.column_names.clone(), self.x.clone(), y, self.row_keys.clone())
    }
}

fn response(row: &AnalysisRow, name: &str) -> Result<f64, ModelError> {
    if name == VOLATILITY {
        return Ok(row.volatility_pct);
    }
    let field = Field::from_name(name).ok_or_else(|| ModelError::UnknownColumn(name.to_owned()))?;
    if field.kind() == FieldKind::Categorical {
        return Err(ModelError::InvalidSpec(format!("response `{name}` is categorical")));
    }
    row.numeric(field).ok_or_else(|| ModelError::MissingValue {
        row: row.trip_id.clone(),
        column: name.to_owned(),
    })
}

/// Builds the dummy-coded design for `rows`. Missing cells are an error, so
/// impute first.
pub fn build_design(rows: &[AnalysisRow], spec: &ModelSpec) -> Result<DesignMatrix, ModelError> {
    spec.validate()?;
    if rows.is_empty() {
        return Err(ModelError::EmptyRows);
    }
    let lookup = |name: &str| {
        Field::from_name(name).ok_or_else(|| ModelError::UnknownColumn(name.to_owned()))
    };
    let continuous: Vec<Field> = spec
        .continuous
        .iter()
        .map(|c| {
            let f = lookup(c)?;
            if f.kind() == FieldKind::Categorical {
                return Err(ModelError::InvalidSpec(format!(
                    "`{c}` is categorical; list it under categorical"
                )));
            }
            Ok(f)
        })
        .collect::<Result<_, _>>()?;
    let factors: Vec<(Field, &CategoricalSpec)> = spec
        .categorical
        .iter()
        .map(|c| Ok((lookup(&c.column)?, c)))
        .collect::<Result<_, ModelError>>()?;

    let names = spec.column_names();
    let (n, p) = (rows.len(), names.len());
    let mut x = DMatrix::zeros(n, p);
    let mut y = DVector::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        y[i] = response(row, &spec.dependent)?;
        x[(i, 0)] = 1.0;
        let mut j = 1;
        for (&field, name) in continuous.iter().zip(&spec.continuous) {
            x[(i, j)] = row.numeric(field).ok_or_else(|| ModelError::MissingValue {
                row: row.trip_id.clone(),
                column: name.clone(),
            })?;
            j += 1;
        }
        for &(field, factor) in &factors {
            let code = match row.get(field) {
                Some(Value::Category(code)) => code,
                Some(Value::Number(_)) => {
                    return Err(ModelError::InvalidSpec(format!(
                        "`{}` is continuous; list it under continuous",
                        factor.column
                    )))
                }
                None => {
                    return Err(ModelError::MissingValue {
                        row: row.trip_id.clone(),
                        column: factor.column.clone(),
                    })
                }
            };
            if !factor.categories.iter().any(|c| c.eq_ignore_ascii_case(code)) {
                return Err(ModelError::UnknownCategory {
                    row: row.trip_id.clone(),
                    column: factor.column.clone(),
                    value: code.to_owned(),
                });
            }
            for level in factor.categories.iter().filter(|l| **l != factor.base) {
                x[(i, j)] = if level.eq_ignore_ascii_case(code) { 1.0 } else { 0.0 };
                j += 1;
            }
        }
    }
    DesignMatrix::new(names, x, y, rows.iter().map(|r| r.trip_id.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{AgeBand, BodyType, Powertrain, Transmission};
    use std::collections::BTreeSet;

    fn row(body: BodyType, age: AgeBand) -> AnalysisRow {
        AnalysisRow {
            trip_id: "T".into(),
            household_id: "H".into(),
            vehicle_id: "V".into(),
            person_id: "P".into(),
            volatility_pct: 12.5,
            distance_mi: Some(3.0),
            travel_time_min: Some(9.0),
            avg_speed_mph: Some(20.0),
            n_stops: Some(2.0),
            grade_sd: Some(1.5),
            is_afv: Some(true),
            body_type: Some(body),
            transmission: Some(Transmission::Manual),
            vehicle_age_years: Some(6.0),
            n_cylinders: Some(4.0),
            powertrain: Some(Powertrain::RearWheel),
            ownership_nonowned: Some(false),
            is_female: Some(true),
            age_band: Some(age),
            not_employed: Some(false),
            imputed: BTreeSet::new(),
        }
    }

    fn dummies<'a>(d: &'a DesignMatrix, prefix: &str) -> Vec<(&'a str, f64)> {
        d.column_names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with(prefix))
            .map(|(j, n)| (n.as_str(), d.x[(0, j)]))
            .collect()
    }

    #[test]
    fn column_layout() {
        let spec = ModelSpec::volatility_model();
        let names = spec.column_names();
        // 1 + 9 continuous + (10-1) + (3-1) + (3-1) + (8-1)
        assert_eq!(names.len(), 30);
        assert_eq!(names[0], INTERCEPT);
        assert_eq!(names[1], "afv");
        assert_eq!(names[10], "body[suv]");
        assert_eq!(names[29], "age_band[80-89]");
    }

    #[test]
    fn base_category_has_all_zero_dummies() {
        let d = build_design(&[row(BodyType::Sedan, AgeBand::A10_19)], &ModelSpec::default()).unwrap();
        let body = dummies(&d, "body[");
        assert_eq!(body.len(), 9);
        assert!(body.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn pickup_and_age_dummies() {
        let d = build_design(&[row(BodyType::Pickup, AgeBand::A50_59)], &ModelSpec::default()).unwrap();
        for (name, v) in dummies(&d, "body[") {
            assert_eq!(v, if name == "body[pickup]" { 1.0 } else { 0.0 }, "{name}");
        }
        let age = dummies(&d, "age_band[");
        assert_eq!(age.len(), 7);
        for (name, v) in age {
            assert_eq!(v, if name == "age_band[50-59]" { 1.0 } else { 0.0 }, "{name}");
        }
        assert_eq!(d.y[0], 12.5);
        assert_eq!(d.x[(0, d.column_index("afv").unwrap())], 1.0);
        assert_eq!(d.x[(0, d.column_index("distance_mi").unwrap())], 3.0);
        assert_eq!(d.x[(0, d.column_index("transmission[manual]").unwrap())], 1.0);
        assert_eq!(d.x[(0, d.column_index("powertrain[rwd]").unwrap())], 1.0);
    }

    #[test]
    fn unknown_category_names_row_and_column() {
        let mut spec = ModelSpec::default();
        spec.categorical[0].categories.retain(|c| c != "van");
        let mut r = row(BodyType::Van, AgeBand::A20_29);
        r.trip_id = "T42".into();
        match build_design(&[r], &spec).unwrap_err() {
            ModelError::UnknownCategory { row, column, value } => {
                assert_eq!((row.as_str(), column.as_str(), value.as_str()), ("T42", "body", "van"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_rows_and_missing_cells() {
        assert!(matches!(build_design(&[], &ModelSpec::default()), Err(ModelError::EmptyRows)));
        let mut r = row(BodyType::Sedan, AgeBand::A20_29);
        r.grade_sd = None;
        assert!(matches!(
            build_design(&[r], &ModelSpec::default()),
            Err(ModelError::MissingValue { .. })
        ));
    }

    #[test]
    fn spec_validation() {
        let mut spec = ModelSpec::default();
        spec.quantiles = vec![0.5, 0.25];
        assert!(spec.validate().is_err());
        spec.quantiles = vec![0.0, 0.5];
        assert!(spec.validate().is_err());
        let mut spec = ModelSpec::default();
        spec.categorical[1].base = "cvt".into();
        assert!(spec.validate().is_err());
        let mut spec = ModelSpec::default();
        spec.continuous.push("afv".into());
        assert!(spec.validate().is_err());
    }

    #[test]
    fn design_constructor_checks_intercept() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 1.0]);
        let r = DesignMatrix::new(
            vec![INTERCEPT.into(), "x".into()],
            x,
            DVector::from_vec(vec![1.0, 2.0]),
            vec!["a".into(), "b".into()],
        );
        assert!(r.is_err());
    }
}
