use std::io::Write;

use serde::Serialize;

use super::estimation::EstimatorReport;
use super::lq::ErrorReport;
use crate::error::Result;

pub const LQ_STUDY: &str = "lq-convergence";
pub const ESTIMATOR_STUDY: &str = "estimator-convergence";

/// One line of the long-format results table.
///
/// `sigma` is the spread across blocks (L^q study only); `std_error` is the
/// standard error of `estimate`. Confidence bounds are `estimate ± 1.96 sigma`
/// for the L^q study and `estimate ± 1.96 std_error` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub study: &'static str,
    pub beta: f64,
    pub j_rule: String,
    pub j: u64,
    pub eps: f64,
    pub quantity: String,
    pub estimate: f64,
    pub sigma: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_error: f64,
    /// Log-log slope of this quantity's series, if one was fitted.
    pub slope: Option<f64>,
    /// Whether this `eps` entered the slope fit.
    pub in_fit: bool,
}

pub const CSV_HEADER: &str = "study,beta,j_rule,j,eps,quantity,estimate,sigma,ci_low,ci_high,std_error,slope,in_fit";

pub fn lq_rows(report: &ErrorReport) -> Vec<ResultRow> {
    let beta = report.config.params.beta;
    report
        .entries
        .iter()
        .map(|e| {
            let slope = report.slope(e.j_rule, e.q);
            ResultRow {
                study: LQ_STUDY,
                beta,
                j_rule: e.j_rule.to_string(),
                j: e.j,
                eps: e.epsilon,
                quantity: format!("L{}", e.q),
                estimate: e.estimate,
                sigma: Some(e.sigma),
                ci_low: e.ci_low,
                ci_high: e.ci_high,
                std_error: e.std_error,
                slope: slope.map(|s| s.fit.slope),
                in_fit: slope.is_some_and(|s| s.eps_used.contains(&e.epsilon)),
            }
        })
        .collect()
}

pub fn estimator_rows(report: &EstimatorReport) -> Vec<ResultRow> {
    let beta = report.config.params.beta;
    let mut rows = Vec::new();
    for e in &report.entries {
        for q in e.quantities() {
            let Some(stat) = e.stat(&q) else { continue };
            let slope = report.slope(&q);
            rows.push(ResultRow {
                study: ESTIMATOR_STUDY,
                beta,
                j_rule: report.config.j_rule.to_string(),
                j: e.j,
                eps: e.epsilon,
                estimate: stat.l2,
                sigma: None,
                ci_low: stat.l2 - 1.96 * stat.std_error,
                ci_high: stat.l2 + 1.96 * stat.std_error,
                std_error: stat.std_error,
                slope: slope.map(|s| s.fit.slope),
                in_fit: slope.is_some_and(|s| s.eps_used.contains(&e.epsilon)),
                quantity: q,
            });
        }
    }
    rows
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.study,
            r.beta,
            r.j_rule,
            r.j,
            r.eps,
            r.quantity,
            r.estimate,
            opt(r.sigma),
            r.ci_low,
            r.ci_high,
            r.std_error,
            opt(r.slope),
            r.in_fit
        )?;
    }
    Ok(())
}
