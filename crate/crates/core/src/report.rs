//! Table rendering and plot-ready exports.
//!
//! Every renderer builds a [`Table`] and writes it as aligned text, CSV or
//! JSON. A single metadata line (tool version, config hash, timestamp) heads
//! each file; [`strip_metadata`] removes it for byte comparisons.

use crate::ingest::Field;
use crate::model::{FitKind, FitRecord, FitResult, ModelSpec, QuantileProfile, INTERCEPT};
use crate::stats::{DescriptiveRow, Histogram};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("nothing to render: {0}")]
    Empty(&'static str),
    #[error("fits do not share one design: {0}")]
    MismatchedDesign(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected text, csv or json)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Text => "text",
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Provenance stamped on every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub config_hash: String,
    pub generated: String,
}

impl Metadata {
    pub const PREFIX: &'static str = "# drivevol ";

    /// The header line, without a trailing newline.
    pub fn line(&self) -> String {
        format!(
            "{}{} config={} generated={}",
            Self::PREFIX,
            self.version,
            self.config_hash,
            self.generated
        )
    }
}

const JSON_METADATA_PREFIX: &str = "  \"metadata\": ";

/// Drops metadata lines so outputs from different runs compare equal.
pub fn strip_metadata(text: &str) -> String {
    text.split_inclusive('\n')
        .filter(|l| !l.starts_with(Metadata::PREFIX) && !l.starts_with(JSON_METADATA_PREFIX))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Decimals for table statistics and coefficients.
    pub decimals: usize,
    /// Decimals for t-values in coefficient cells.
    pub t_decimals: usize,
    /// Decimals for long-format exports meant for plotting.
    pub data_decimals: usize,
    pub metadata: Option<Metadata>,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            decimals: 3,
            t_decimals: 2,
            data_decimals: 6,
            metadata: None,
        }
    }
}

/// Fixed-point with `decimals` places, trailing zeros trimmed and `-0`
/// printed as `0`. Non-finite values print as `NA`.
pub fn format_number(x: f64, decimals: usize) -> String {
    if !x.is_finite() {
        return "NA".to_owned();
    }
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".to_owned();
    }
    s
}

fn format_opt(x: Option<f64>, decimals: usize) -> String {
    x.map_or_else(|| "NA".to_owned(), |v| format_number(v, decimals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum RowKind {
    Heading,
    Data,
    Footer,
}

#[derive(Debug, Clone, Serialize)]
struct Row {
    kind: RowKind,
    cells: Vec<String>,
}

/// A rectangular table of preformatted cells.
#[derive(Debug, Clone, Serialize)]
struct Table {
    columns: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    subheader: Option<Vec<String>>,
    rows: Vec<Row>,
}

impl Table {
    fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            subheader: None,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, kind: RowKind, mut cells: Vec<String>) {
        cells.resize(self.columns.len(), String::new());
        self.rows.push(Row { kind, cells });
    }

    fn render(&self, format: Format, opts: &RenderOptions) -> Result<String, ReportError> {
        let mut out = String::new();
        if format != Format::Json {
            if let Some(m) = &opts.metadata {
                out.push_str(&m.line());
                out.push('\n');
            }
        }
        match format {
            Format::Text => out.push_str(&self.text()),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns)?;
                if let Some(sub) = &self.subheader {
                    w.write_record(sub)?;
                }
                for r in &self.rows {
                    w.write_record(&r.cells)?;
                }
                out.push_str(&csv_string(w)?);
            }
            Format::Json => out.push_str(&json_with_metadata(self, opts.metadata.as_ref())?),
        }
        Ok(out)
    }

    fn text(&self) -> String {
        let ncol = self.columns.len();
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.chars().count()).collect();
        let all_rows = self
            .subheader
            .iter()
            .chain(self.rows.iter().filter(|r| r.kind != RowKind::Heading).map(|r| &r.cells));
        for cells in all_rows {
            for (w, c) in widths.iter_mut().zip(cells) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (j, c) in cells.iter().enumerate() {
                let pad = widths[j].saturating_sub(c.chars().count());
                if j == 0 {
                    s.push_str(c);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str("  ");
                    s.push_str(&" ".repeat(pad));
                    s.push_str(c);
                }
            }
            s.trim_end().to_owned() + "\n"
        };
        let total: usize = widths.iter().sum::<usize>() + 2 * ncol.saturating_sub(1);
        let rule = "-".repeat(total) + "\n";
        let mut out = line(&self.columns);
        if let Some(sub) = &self.subheader {
            out.push_str(&line(sub));
        }
        out.push_str(&rule);
        let mut in_footer = false;
        for r in &self.rows {
            if r.kind == RowKind::Footer && !in_footer {
                out.push_str(&rule);
                in_footer = true;
            }
            if r.kind == RowKind::Heading {
                out.push_str(r.cells[0].trim_end());
                out.push('\n');
            } else {
                out.push_str(&line(&r.cells));
            }
        }
        out
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, ReportError> {
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}

/// Pretty JSON of `value` with a one-line `"metadata"` member first.
/// Pretty JSON with `metadata` as a one-line first member, so that
/// [`strip_metadata`] can drop it.
pub fn json_with_metadata<T: Serialize>(value: &T, metadata: Option<&Metadata>) -> Result<String, ReportError> {
    let body = serde_json::to_string_pretty(value)?;
    let Some(m) = metadata else {
        return Ok(body + "\n");
    };
    let meta = serde_json::to_string(m)?;
    match body.strip_prefix("{\n") {
        Some(rest) => Ok(format!("{{\n{JSON_METADATA_PREFIX}{meta},\n{rest}\n")),
        // empty object or non-object body
        None => Ok(format!(
            "{{\n{JSON_METADATA_PREFIX}{meta},\n  \"data\": {}\n}}\n",
            serde_json::to_string(value)?
        )),
    }
}

/// Table 1 layout: Variable, N, Mean, Std. Dev., Min, Max. Category rows sit
/// under a heading row naming their group.
pub fn render_descriptive(rows: &[DescriptiveRow], format: Format, opts: &RenderOptions) -> Result<String, ReportError> {
    if rows.is_empty() {
        return Err(ReportError::Empty("descriptive table has no variables"));
    }
    if format == Format::Json {
        #[derive(Serialize)]
        struct Out<'a> {
            variables: &'a [DescriptiveRow],
        }
        return json_with_metadata(&Out { variables: rows }, opts.metadata.as_ref());
    }
    let columns = ["Variable", "N", "Mean", "Std. Dev.", "Min", "Max"];
    let mut t = Table::new(columns.iter().map(|s| s.to_string()).collect());
    let mut group: Option<&str> = None;
    for r in rows {
        if r.group.as_deref() != group {
            group = r.group.as_deref();
            if let Some(g) = group {
                t.push(RowKind::Heading, vec![g.to_owned()]);
            }
        }
        let d = opts.decimals;
        t.push(
            RowKind::Data,
            vec![
                r.variable.clone(),
                r.stats.n.to_string(),
                format_number(r.stats.mean, d),
                format_number(r.stats.std, d),
                format_number(r.stats.min, d),
                format_number(r.stats.max, d),
            ],
        );
    }
    t.render(format, opts)
}

/// Long-format histogram: bin_left, bin_right, count.
pub fn export_histogram(hist: &Histogram, format: Format, opts: &RenderOptions) -> Result<String, ReportError> {
    if hist.counts.is_empty() {
        return Err(ReportError::Empty("histogram has no bins"));
    }
    let mut t = Table::new(vec!["bin_left".into(), "bin_right".into(), "count".into()]);
    for (i, c) in hist.counts.iter().enumerate() {
        t.push(
            RowKind::Data,
            vec![
                format_number(hist.bin_edges[i], opts.data_decimals),
                format_number(hist.bin_edges[i + 1], opts.data_decimals),
                c.to_string(),
            ],
        );
    }
    t.render(format, opts)
}

/// Column header for a model: `OLS (mean)` or `90th Percentile`.
pub fn model_header(kind: FitKind) -> String {
    match kind {
        FitKind::Ols => "OLS (mean)".to_owned(),
        FitKind::Quantile { q } => {
            let pct = q * 100.0;
            let rounded = pct.round();
            if (pct - rounded).abs() < 1e-9 {
                let k = rounded as u64;
                let suffix = match (k % 10, k % 100) {
                    (_, 11..=13) => "th",
                    (1, _) => "st",
                    (2, _) => "nd",
                    (3, _) => "rd",
                    _ => "th",
                };
                format!("{k}{suffix} Percentile")
            } else {
                format!("{} Percentile", format_number(pct, 6))
            }
        }
    }
}

/// Row order of coefficient tables: vehicle, then trip, then driver variables.
const COEFFICIENT_ORDER: [Field; 15] = [
    Field::Afv,
    Field::Body,
    Field::Transmission,
    Field::VehAge,
    Field::Cylinders,
    Field::Powertrain,
    Field::DistanceMi,
    Field::TravelTimeMin,
    Field::AvgSpeedMph,
    Field::NStops,
    Field::GradeSd,
    Field::Female,
    Field::AgeBand,
    Field::Nonowned,
    Field::NotEmployed,
];

fn category_label(field: Option<Field>, code: &str) -> String {
    field
        .and_then(|f| f.category_label(code))
        .unwrap_or(code)
        .to_owned()
}

fn base_label(field: Option<Field>, code: &str) -> String {
    match field {
        Some(Field::Powertrain) => format!("{} drive", category_label(field, code)),
        Some(Field::AgeBand) => format!("{} years", category_label(field, code)),
        _ => category_label(field, code),
    }
}

/// Table 2 layout: one "coef (t)" column per fit, factor levels grouped under
/// "Group (base: ...)" headings, the constant last, then R², raw and
/// minimised deviations (NA for OLS).
pub fn render_coefficients(
    fits: &[FitResult],
    spec: &ModelSpec,
    format: Format,
    opts: &RenderOptions,
) -> Result<String, ReportError> {
    if fits.is_empty() {
        return Err(ReportError::Empty("no fits to tabulate"));
    }
    let names = spec.column_names();
    for f in fits {
        if f.column_names != names {
            return Err(ReportError::MismatchedDesign(format!(
                "{} has columns [{}], specification expects [{}]",
                model_header(f.kind),
                f.column_names.join(", "),
                names.join(", ")
            )));
        }
        if f.n_obs != fits[0].n_obs {
            return Err(ReportError::MismatchedDesign(format!(
                "{} used {} rows, {} used {}",
                model_header(f.kind),
                f.n_obs,
                model_header(fits[0].kind),
                fits[0].n_obs
            )));
        }
    }
    if format == Format::Json {
        #[derive(Serialize)]
        struct Out {
            models: Vec<FitRecord>,
        }
        let out = Out {
            models: fits.iter().map(FitResult::to_record).collect(),
        };
        return json_with_metadata(&out, opts.metadata.as_ref());
    }

    let cell = |f: &FitResult, j: usize| -> String {
        match (f.coefficients[j], f.t_values[j]) {
            (None, _) => "aliased".to_owned(),
            (Some(c), Some(t)) => format!("{} ({})", format_number(c, opts.decimals), format_number(t, opts.t_decimals)),
            (Some(c), None) => format_number(c, opts.decimals),
        }
    };
    let data_row = |label: String, column: &str| -> Vec<String> {
        let j = names.iter().position(|n| n == column).expect("column from spec");
        std::iter::once(label).chain(fits.iter().map(|f| cell(f, j))).collect()
    };

    let mut columns = vec!["Variable".to_owned()];
    columns.extend(fits.iter().map(|f| model_header(f.kind)));
    let mut t = Table::new(columns);
    let mut sub = vec![String::new()];
    sub.extend(fits.iter().map(|_| "Coef. (t-value)".to_owned()));
    t.subheader = Some(sub);

    // known fields in display order, then anything else in spec order
    let mut order: Vec<&str> = COEFFICIENT_ORDER
        .iter()
        .map(|f| f.name())
        .filter(|n| spec.continuous.iter().any(|c| c == n) || spec.categorical.iter().any(|c| c.column == *n))
        .collect();
    for n in spec.continuous.iter().chain(spec.categorical.iter().map(|c| &c.column)) {
        if !order.contains(&n.as_str()) {
            order.push(n);
        }
    }

    for name in order {
        let field = Field::from_name(name);
        if let Some(factor) = spec.categorical.iter().find(|c| c.column == name) {
            let group = match field {
                Some(f) => f.model_label(),
                None => name,
            };
            t.push(
                RowKind::Heading,
                vec![format!("{group} (base: {})", base_label(field, &factor.base))],
            );
            for level in factor.categories.iter().filter(|l| **l != factor.base) {
                let column = crate::model::dummy_column_name(&factor.column, level);
                t.push(RowKind::Data, data_row(category_label(field, level), &column));
            }
        } else {
            let label = match field {
                Some(f) => f.model_label().to_owned(),
                None => name.to_owned(),
            };
            t.push(RowKind::Data, data_row(label, name));
        }
    }
    t.push(RowKind::Data, data_row("Constant".to_owned(), INTERCEPT));

    let footer = |label: &str, f: &dyn Fn(&FitResult) -> Option<f64>| -> Vec<String> {
        std::iter::once(label.to_owned())
            .chain(fits.iter().map(|fit| format_opt(f(fit), opts.decimals)))
            .collect()
    };
    t.push(RowKind::Footer, footer("R²", &|f| Some(f.fit_measure)));
    t.push(RowKind::Footer, footer("Raw sum of deviations", &|f| f.raw_deviation));
    t.push(
        RowKind::Footer,
        footer("Min. sum of deviations", &|f| f.raw_deviation.map(|_| f.objective)),
    );
    t.push(RowKind::Footer, footer("N", &|f| Some(f.n_obs as f64)));
    t.render(format, opts)
}

/// Fit results as JSON, one record per model.
pub fn fits_json(fits: &[FitResult], opts: &RenderOptions) -> Result<String, ReportError> {
    if fits.is_empty() {
        return Err(ReportError::Empty("no fits to serialise"));
    }
    #[derive(Serialize)]
    struct Out {
        fits: Vec<FitRecord>,
    }
    json_with_metadata(
        &Out {
            fits: fits.iter().map(FitResult::to_record).collect(),
        },
        opts.metadata.as_ref(),
    )
}

/// Long-format profile rows `variable, q, coef, lo, hi, ols_ref`, sorted by
/// variable name then quantile. Aliased cells print as `NA`.
pub fn export_profile(profile: &QuantileProfile, format: Format, opts: &RenderOptions) -> Result<String, ReportError> {
    if profile.columns.is_empty() || profile.quantiles.is_empty() {
        return Err(ReportError::Empty("profile has no entries"));
    }
    let mut entries: Vec<(&str, f64, [String; 4])> = Vec::new();
    let d = opts.data_decimals;
    for col in &profile.columns {
        for p in &col.points {
            entries.push((
                &col.name,
                p.q,
                [
                    format_opt(p.coefficient, d),
                    format_opt(p.lower, d),
                    format_opt(p.upper, d),
                    format_opt(col.ols_reference, d),
                ],
            ));
        }
    }
    entries.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)));
    let mut t = Table::new(["variable", "q", "coef", "lo", "hi", "ols_ref"].iter().map(|s| s.to_string()).collect());
    for (name, q, [c, lo, hi, ols]) in entries {
        t.push(RowKind::Data, vec![name.to_owned(), format_number(q, 6), c, lo, hi, ols]);
    }
    t.render(format, opts)
}

/// Variance inflation factors, one row per predictor.
pub fn render_vif(vifs: &[(String, f64)], format: Format, opts: &RenderOptions) -> Result<String, ReportError> {
    if vifs.is_empty() {
        return Err(ReportError::Empty("no VIF values"));
    }
    let mut t = Table::new(vec!["variable".into(), "vif".into()]);
    for (name, v) in vifs {
        t.push(RowKind::Data, vec![name.clone(), format_number(*v, opts.decimals)]);
    }
    t.render(format, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Level;
    use crate::model::{fit_ols, DesignMatrix};
    use crate::stats::SummaryStats;

    #[test]
    fn number_format() {
        assert_eq!(format_number(13.0814, 3), "13.081");
        assert_eq!(format_number(1.69, 3), "1.69");
        assert_eq!(format_number(39.694, 3), "39.694");
        assert_eq!(format_number(-0.0001, 3), "0");
        assert_eq!(format_number(2.0, 3), "2");
        assert_eq!(format_number(-10.94, 1), "-10.9");
        assert_eq!(format_number(f64::NAN, 3), "NA");
        assert_eq!(format_number(1500.0, 3), "1500");
    }

    fn vol_row() -> DescriptiveRow {
        DescriptiveRow {
            variable: "Driving Volatility".into(),
            group: None,
            level: Level::Trip,
            stats: SummaryStats {
                n: 62839,
                mean: 13.081,
                std: 3.644,
                min: 1.69,
                max: 39.694,
            },
        }
    }

    #[test]
    fn descriptive_csv_row() {
        let out = render_descriptive(&[vol_row()], Format::Csv, &RenderOptions::default()).unwrap();
        assert_eq!(
            out,
            "Variable,N,Mean,Std. Dev.,Min,Max\nDriving Volatility,62839,13.081,3.644,1.69,39.694\n"
        );
        assert!(render_descriptive(&[], Format::Csv, &RenderOptions::default()).is_err());
    }

    #[test]
    fn metadata_is_strippable() {
        let opts = RenderOptions {
            metadata: Some(Metadata {
                version: "0.1.0".into(),
                config_hash: "abc".into(),
                generated: "2026-01-01T00:00:00Z".into(),
            }),
            ..Default::default()
        };
        for format in [Format::Text, Format::Csv, Format::Json] {
            let with = render_descriptive(&[vol_row()], format, &opts).unwrap();
            let without = render_descriptive(&[vol_row()], format, &RenderOptions::default()).unwrap();
            assert_ne!(with, without);
            assert_eq!(strip_metadata(&with), strip_metadata(&without), "{format}");
            if format == Format::Json {
                let v: serde_json::Value = serde_json::from_str(&with).unwrap();
                assert_eq!(v["metadata"]["config_hash"], "abc");
            }
        }
    }

    #[test]
    fn headers() {
        assert_eq!(model_header(FitKind::Ols), "OLS (mean)");
        assert_eq!(model_header(FitKind::Quantile { q: 0.1 }), "10th Percentile");
        assert_eq!(model_header(FitKind::Quantile { q: 0.25 }), "25th Percentile");
        assert_eq!(model_header(FitKind::Quantile { q: 0.01 }), "1st Percentile");
        assert_eq!(model_header(FitKind::Quantile { q: 0.12 }), "12th Percentile");
        assert_eq!(model_header(FitKind::Quantile { q: 0.125 }), "12.5 Percentile");
    }

    #[test]
    fn single_ols_column() {
        let spec = ModelSpec {
            dependent: "volatility_pct".into(),
            continuous: vec!["afv".into()],
            categorical: vec![],
            quantiles: vec![0.5],
        };
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![(i % 2) as f64]).collect();
        let y = [1.0, 2.0, 1.5, 2.5, 0.5, 3.0];
        let d = DesignMatrix::from_rows(&["afv"], &rows, &y).unwrap();
        let fit = fit_ols(&d).unwrap();
        let out = render_coefficients(&[fit.clone()], &spec, Format::Csv, &RenderOptions::default()).unwrap();
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "Variable,OLS (mean)");
        assert!(lines.iter().any(|l| l.starts_with("AFV,")));
        assert!(lines.iter().any(|l| l.starts_with("Raw sum of deviations,NA")));

        let mut other = fit;
        other.n_obs = 7;
        assert!(render_coefficients(&[other.clone(), other.clone()], &spec, Format::Csv, &RenderOptions::default()).is_ok());
        other.column_names[1] = "x".into();
        assert!(matches!(
            render_coefficients(&[other], &spec, Format::Csv, &RenderOptions::default()),
            Err(ReportError::MismatchedDesign(_))
        ));
    }
}
