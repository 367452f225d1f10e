//! Report records and their byte-stable serializations.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64`. Non-finite values are written as `null`
//! in the structured format and as an empty field in CSV. Keys appear in the
//! fixed order listed by [`RECORD_FIELDS`].

use std::fmt::Write as _;

use cr_toeplitz::Complex64;

use crate::config::Tolerance;
use crate::error::RunError;

/// Per-check record fields in canonical order; also the CSV header.
pub const RECORD_FIELDS: [&str; 14] = [
    "scenario",
    "check",
    "route_a_re",
    "route_a_im",
    "route_b_re",
    "route_b_im",
    "abs_deviation",
    "rel_deviation",
    "tol_absolute",
    "tol_relative",
    "pass",
    "wall_time_s",
    "error",
    "jet_order",
];

/// One evaluated invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub check: String,
    pub route_a: Complex64,
    pub route_b: Complex64,
    /// `|route_a - route_b|`.
    pub abs_deviation: f64,
    /// `abs_deviation / |route_b|`, or `abs_deviation` when `route_b = 0`.
    pub rel_deviation: f64,
    pub tolerance: Tolerance,
    pub pass: bool,
    /// Seconds spent on the check; recorded only when timings are requested.
    pub wall_time: Option<f64>,
    /// Message of a numerical failure; the record then fails.
    pub error: Option<String>,
}

impl CheckRecord {
    pub fn compare(check: &str, a: Complex64, b: Complex64, tol: Tolerance) -> Self {
        let abs_deviation = (a - b).norm();
        let reference = b.norm();
        let rel_deviation = if reference > 0.0 {
            abs_deviation / reference
        } else {
            abs_deviation
        };
        CheckRecord {
            check: check.to_string(),
            route_a: a,
            route_b: b,
            abs_deviation,
            rel_deviation,
            tolerance: tol,
            pass: abs_deviation.is_finite() && tol.accepts(abs_deviation, reference),
            wall_time: None,
            error: None,
        }
    }

    pub fn failed(check: &str, tol: Tolerance, message: String) -> Self {
        let nan = Complex64::new(f64::NAN, f64::NAN);
        CheckRecord {
            check: check.to_string(),
            route_a: nan,
            route_b: nan,
            abs_deviation: f64::NAN,
            rel_deviation: f64::NAN,
            tolerance: tol,
            pass: false,
            wall_time: None,
            error: Some(message),
        }
    }
}

/// Environment stamp attached to each report.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    pub version: String,
    pub run_seed: u64,
    pub scenario_seed: u64,
    pub jet_order: usize,
}

/// All records of one scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionReport {
    pub scenario: String,
    pub records: Vec<CheckRecord>,
    pub environment: Environment,
}

impl ExpansionReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn has_error(&self) -> bool {
        self.records.iter().any(|r| r.error.is_some())
    }
}

/// Output format of [`emit_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Structured,
    Csv,
}

fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

fn json_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_opt_float(x: Option<f64>) -> String {
    x.map_or_else(|| "null".into(), json_float)
}

fn write_json(reports: &[ExpansionReport]) -> String {
    let mut out = String::from("{\n  \"reports\": [");
    for (i, rep) in reports.iter().enumerate() {
        out.push_str(if i == 0 { "\n" } else { ",\n" });
        let env = &rep.environment;
        let _ = write!(
            out,
            "    {{\n      \"scenario\": {},\n      \"environment\": {{\"version\": {}, \"run_seed\": {}, \"scenario_seed\": {}, \"jet_order\": {}}},\n      \"records\": [",
            json_string(&rep.scenario),
            json_string(&env.version),
            env.run_seed,
            env.scenario_seed,
            env.jet_order,
        );
        for (j, r) in rep.records.iter().enumerate() {
            out.push_str(if j == 0 { "\n" } else { ",\n" });
            let _ = write!(
                out,
                "        {{\"check\": {}, \"route_a\": [{}, {}], \"route_b\": [{}, {}], \"abs_deviation\": {}, \"rel_deviation\": {}, \"tolerance\": {{\"absolute\": {}, \"relative\": {}}}, \"pass\": {}, \"wall_time_s\": {}, \"error\": {}}}",
                json_string(&r.check),
                json_float(r.route_a.re),
                json_float(r.route_a.im),
                json_float(r.route_b.re),
                json_float(r.route_b.im),
                json_float(r.abs_deviation),
                json_float(r.rel_deviation),
                json_float(r.tolerance.absolute),
                json_float(r.tolerance.relative),
                r.pass,
                json_opt_float(r.wall_time),
                r.error.as_deref().map_or_else(|| "null".into(), json_string),
            );
        }
        if !rep.records.is_empty() {
            out.push_str("\n      ");
        }
        out.push_str("]\n    }");
    }
    if !reports.is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    out
}

fn write_csv(reports: &[ExpansionReport]) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| RunError::Report(e.to_string());
    w.write_record(RECORD_FIELDS).map_err(err)?;
    for rep in reports {
        for r in &rep.records {
            w.write_record([
                rep.scenario.clone(),
                r.check.clone(),
                float(r.route_a.re),
                float(r.route_a.im),
                float(r.route_b.re),
                float(r.route_b.im),
                float(r.abs_deviation),
                float(r.rel_deviation),
                float(r.tolerance.absolute),
                float(r.tolerance.relative),
                r.pass.to_string(),
                r.wall_time.map_or_else(String::new, float),
                r.error.clone().unwrap_or_default(),
                rep.environment.jet_order.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.into_inner().map_err(|e| RunError::Report(e.to_string()))
}

/// Serializes reports in the requested format.
pub fn emit_report(reports: &[ExpansionReport], format: Format) -> Result<Vec<u8>, RunError> {
    match format {
        Format::Structured => Ok(write_json(reports).into_bytes()),
        Format::Csv => write_csv(reports),
    }
}
