//! Convergence sweeps, slope fits, the conjecture check and CSV output.

use std::io::{self, Write};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::integrators::{CfCoefficients, Family, IntegrationError, StepperConfig};
use crate::problems::{AnyCase, Case};
use crate::tableau::Scheme;

/// Fitted slope must reach `declared order - CONJECTURE_MARGIN`.
pub const CONJECTURE_MARGIN: f64 = 0.2;

/// Rows with `d <= FLOOR_FACTOR * floor` are left out of fits.
pub const FLOOR_FACTOR: f64 = 10.0;

pub const CSV_HEADER: &str = "case,scheme,family,h,d,seconds";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("only {admissible} admissible rows, need at least 3")]
    InsufficientData { admissible: usize },
    #[error("step list must be nonempty with every h > 0")]
    BadSteps,
    #[error("{case}: {source}")]
    Integration {
        case: String,
        #[source]
        source: IntegrationError,
    },
    #[error("malformed CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

/// One `(h, d(h))` measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub h: f64,
    /// `f64::INFINITY` if the integration diverged.
    pub d: f64,
    pub seconds: f64,
    /// Largest invariant drift over the trajectory; not written to CSV.
    pub max_drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub case_name: String,
    pub scheme_name: String,
    pub family: Family,
    /// Sorted by `h` ascending.
    pub rows: Vec<Row>,
    /// NaN when fewer than three rows are admissible.
    pub fitted_slope: f64,
    /// Smallest and largest `h` that entered the fit.
    pub fit_range: Option<(f64, f64)>,
    pub nominal_order: u32,
}

impl ConvergenceReport {
    pub fn max_drift(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter_map(|r| r.max_drift)
            .reduce(f64::max)
    }

    pub fn diverged(&self) -> bool {
        self.rows.iter().any(|r| r.d.is_infinite())
    }
}

fn admissible(rows: &[(f64, f64)], floor: f64) -> Vec<(f64, f64)> {
    rows.iter()
        .copied()
        .filter(|&(h, d)| d.is_finite() && h > 0.0 && d > FLOOR_FACTOR * floor)
        .collect()
}

/// Least-squares slope of `log2 d` against `log2 h` over rows with finite
/// `d > 10 floor`.
pub fn fit_slope(rows: &[(f64, f64)], floor: f64) -> Result<f64, HarnessError> {
    let pts = admissible(rows, floor);
    if pts.len() < 3 {
        return Err(HarnessError::InsufficientData {
            admissible: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.log2()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.log2()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// `h = 2^-n` for `n` in `nmin..=nmax`, coarsest first.
pub fn power_of_two_grid(nmin: u32, nmax: u32) -> Vec<f64> {
    (nmin..=nmax).map(|n| 0.5f64.powi(n as i32)).collect()
}

/// Exponent range `(nmin, nmax)` of the standard grid for a case and order.
/// Higher orders stop earlier where roundoff takes over.
pub fn standard_exponents(case: &str, order: u32) -> (u32, u32) {
    let (nmin, nmax, p4, p5) = match case {
        "rigid" => (3, 11, 8, 6),
        "so5" => (1, 10, 7, 5),
        "su3" => (1, 10, 7, 6),
        "vdp" => (7, 12, 12, 11),
        "so3t" => (1, 10, 8, 6),
        _ => (3, 10, 10, 10),
    };
    let cap = match order {
        0..=3 => nmax,
        4 => p4,
        _ => p5,
    };
    (nmin, nmax.min(cap))
}

pub fn standard_grid(case: &str, order: u32) -> Vec<f64> {
    let (nmin, nmax) = standard_exponents(case, order);
    power_of_two_grid(nmin, nmax)
}

fn measure(case: &dyn Case, cfg: &StepperConfig, h: f64) -> Result<Row, HarnessError> {
    let start = Instant::now();
    let outcome = case.evaluate(cfg, h);
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok(ev) => Ok(Row {
            h,
            d: ev.distance,
            seconds,
            max_drift: ev.max_drift,
        }),
        Err(IntegrationError::Divergence { .. }) => Ok(Row {
            h,
            d: f64::INFINITY,
            seconds,
            max_drift: None,
        }),
        Err(source) => Err(HarnessError::Integration {
            case: case.name().to_string(),
            source,
        }),
    }
}

/// Runs one `(case, stepper)` pair over `h_list`, the step sizes in parallel.
pub fn run_convergence(
    case: &dyn Case,
    cfg: &StepperConfig,
    h_list: &[f64],
) -> Result<ConvergenceReport, HarnessError> {
    run_convergence_with(case, cfg, h_list, true)
}

/// As [`run_convergence`], optionally on the calling thread only.
pub fn run_convergence_with(
    case: &dyn Case,
    cfg: &StepperConfig,
    h_list: &[f64],
    parallel: bool,
) -> Result<ConvergenceReport, HarnessError> {
    if h_list.is_empty() || h_list.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        return Err(HarnessError::BadSteps);
    }
    let floor = case
        .reference_floor()
        .map_err(|source| HarnessError::Integration {
            case: case.name().to_string(),
            source,
        })?;
    let mut rows: Vec<Row> = if parallel {
        h_list
            .par_iter()
            .map(|&h| measure(case, cfg, h))
            .collect::<Result<_, _>>()?
    } else {
        h_list
            .iter()
            .map(|&h| measure(case, cfg, h))
            .collect::<Result<_, _>>()?
    };
    rows.sort_by(|a, b| a.h.total_cmp(&b.h));
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.d)).collect();
    let used = admissible(&pairs, floor);
    let fitted_slope = fit_slope(&pairs, floor).unwrap_or(f64::NAN);
    let fit_range = (used.len() >= 3).then(|| (used[0].0, used[used.len() - 1].0));
    Ok(ConvergenceReport {
        case_name: case.name().to_string(),
        scheme_name: cfg.scheme_name().to_string(),
        family: cfg.family(),
        rows,
        fitted_slope,
        fit_range,
        nominal_order: cfg.declared_order(),
    })
}

/// Stepper used to test the conjecture: the 2N commutator-free method for
/// 2N schemes, and the low-storage exponential layout through the general
/// executor for anything else.
pub fn conjecture_stepper(scheme: &Scheme) -> StepperConfig {
    match scheme {
        Scheme::TwoN(s) => StepperConfig::LieCf2N(s.clone()),
        Scheme::Butcher(t) => StepperConfig::GenericCf(CfCoefficients::low_storage(t)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjectureOutcome {
    pub case_name: String,
    pub slope: f64,
    pub required: f64,
    pub passed: bool,
    pub report: ConvergenceReport,
}

/// Runs the scheme on each case's standard grid and checks that the fitted
/// slope reaches the declared order.
pub fn verify_conjecture(
    scheme: &Scheme,
    cases: &[AnyCase],
) -> Result<Vec<ConjectureOutcome>, HarnessError> {
    let cfg = conjecture_stepper(scheme);
    let order = scheme.declared_order();
    let required = order as f64 - CONJECTURE_MARGIN;
    cases
        .par_iter()
        .map(|case| {
            let case = case.as_case();
            let report = run_convergence(case, &cfg, &standard_grid(case.name(), order))?;
            let pairs: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.h, r.d)).collect();
            let floor = case.reference_floor().map_err(|source| HarnessError::Integration {
                case: case.name().to_string(),
                source,
            })?;
            let slope = fit_slope(&pairs, floor)?;
            Ok(ConjectureOutcome {
                case_name: case.name().to_string(),
                slope,
                required,
                passed: slope >= required,
                report,
            })
        })
        .collect()
}

fn format_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:?}")
    }
}

/// Writes the header, one line per row and the slope comment.
pub fn emit_csv(report: &ConvergenceReport, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    emit_csv_body(report, out)
}

/// Writes several reports under a single header.
pub fn emit_csv_all(reports: &[ConvergenceReport], out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in reports {
        emit_csv_body(r, out)?;
    }
    Ok(())
}

fn emit_csv_body(report: &ConvergenceReport, out: &mut dyn Write) -> io::Result<()> {
    for row in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            report.case_name,
            report.scheme_name,
            report.family,
            format_real(row.h),
            format_real(row.d),
            format_real(row.seconds)
        )?;
    }
    writeln!(
        out,
        "# slope={} nominal={}",
        format_real(report.fitted_slope),
        report.nominal_order
    )
}

/// A report as recovered from CSV text.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub case_name: String,
    pub scheme_name: String,
    pub family: String,
    /// `(h, d, seconds)`.
    pub rows: Vec<(f64, f64, f64)>,
    pub slope: f64,
    pub nominal_order: u32,
}

/// Reads back the output of [`emit_csv`] / [`emit_csv_all`].
pub fn parse_csv(text: &str) -> Result<Vec<ParsedReport>, HarnessError> {
    let err = |line: usize, reason: &str| HarnessError::Csv {
        line: line + 1,
        reason: reason.to_string(),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(err(0, "missing header")),
    }
    let mut out = Vec::new();
    let mut current: Option<ParsedReport> = None;
    for (i, line) in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            let mut slope = None;
            let mut nominal = None;
            for kv in rest.split_whitespace() {
                match kv.split_once('=') {
                    Some(("slope", v)) => slope = v.parse::<f64>().ok(),
                    Some(("nominal", v)) => nominal = v.parse::<u32>().ok(),
                    _ => return Err(err(i, "unexpected comment field")),
                }
            }
            let (Some(slope), Some(nominal)) = (slope, nominal) else {
                return Err(err(i, "slope comment needs slope and nominal"));
            };
            let mut rep = current.take().unwrap_or(ParsedReport {
                case_name: String::new(),
                scheme_name: String::new(),
                family: String::new(),
                rows: Vec::new(),
                slope: f64::NAN,
                nominal_order: 0,
            });
            rep.slope = slope;
            rep.nominal_order = nominal;
            out.push(rep);
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(err(i, "expected 6 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(i, "bad number"));
        let row = (num(fields[3])?, num(fields[4])?, num(fields[5])?);
        let rep = current.get_or_insert_with(|| ParsedReport {
            case_name: fields[0].into(),
            scheme_name: fields[1].into(),
            family: fields[2].into(),
            rows: Vec::new(),
            slope: f64::NAN,
            nominal_order: 0,
        });
        if rep.case_name != fields[0] || rep.scheme_name != fields[1] || rep.family != fields[2] {
            return Err(err(i, "row belongs to a different report"));
        }
        rep.rows.push(row);
    }
    if current.is_some() {
        return Err(err(text.lines().count(), "missing slope comment"));
    }
    Ok(out)
}
