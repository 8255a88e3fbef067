//! Pass/fail checks over a diagnostics time series.
//!
//! The trace envelopes are maximum-principle bounds for the unnormalized flow
//! `∂_s ω = −ρ_B^{1,1}`, so they are evaluated in its time `s = e^t − 1` on the
//! unnormalized metric `ω(s) = e^t ω̃(t)`, whose traces are `e^{−t}` times the
//! normalized ones.

use serde::Serialize;

use super::DiagnosticsRow;
use crate::error::{Error, Result};

/// Relative slack on the trace envelopes.
pub const TRACE_TOL: f64 = 0.05;
/// Absolute slack added to the monotonicity bound for discretization error.
pub const MONOTONICITY_ALLOWANCE: f64 = 0.05;
/// Collapse thresholds checked on the final row.
pub const COLLAPSE_WARN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
    /// Time of the tightest (or violating) sample.
    pub worst_t: Option<f64>,
    pub worst_value: Option<f64>,
}

impl Report {
    fn new(name: &str, pass: bool, detail: String, worst: Option<(f64, f64)>) -> Self {
        Report {
            name: name.into(),
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            detail,
            worst_t: worst.map(|w| w.0),
            worst_value: worst.map(|w| w.1),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

fn max_by_value(items: impl Iterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    items.fold(None, |acc: Option<(f64, f64)>, (t, v)| match acc {
        Some((_, best)) if best >= v => acc,
        _ => Some((t, v)),
    })
}

fn min_by_value(items: impl Iterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    max_by_value(items.map(|(t, v)| (t, -v))).map(|(t, v)| (t, -v))
}

/// Bounded normalized envelope `m(t) = sup|φ| e^t/(1 + t)`.
pub fn c0_envelope(rows: &[DiagnosticsRow]) -> Result<Report> {
    let t_max = rows.last().map(|r| r.t).unwrap_or(0.0);
    if rows.len() < 10 || t_max < 5.0 {
        return Err(Error::InsufficientSamples(format!(
            "c0 envelope needs >= 10 rows spanning t >= 5 (got {} rows, T = {t_max})",
            rows.len()
        )));
    }
    let m = |r: &DiagnosticsRow| r.sup_abs_phi() * r.t.exp() / (1.0 + r.t);
    let m1 = rows
        .iter()
        .find(|r| r.t >= 1.0 - 1e-9)
        .map(m)
        .expect("T >= 5 implies a row past t = 1");
    let bound = 3.0 * m1.max(1e-12);
    let worst = max_by_value(rows.iter().filter(|r| r.t >= 1.0 - 1e-9).map(|r| (r.t, m(r)))).expect("nonempty");
    Ok(Report::new(
        "c0_envelope",
        worst.1 <= bound,
        format!("max m(t) on [1,T] = {:.6e} at t = {}, bound 3·m(1) = {:.6e}", worst.1, worst.0, bound),
        Some(worst),
    ))
}

/// No late growth of `sup|φ̇|`.
pub fn phidot_bounds(rows: &[DiagnosticsRow]) -> Result<Report> {
    let early = max_by_value(rows.iter().filter(|r| r.t <= 2.0 + 1e-9).map(|r| (r.t, r.sup_abs_phidot())));
    let late = max_by_value(rows.iter().filter(|r| r.t >= 2.0 - 1e-9).map(|r| (r.t, r.sup_abs_phidot())));
    let (Some(early), Some(late)) = (early, late) else {
        return Err(Error::InsufficientSamples("phidot bounds need rows on [0,2] and [2,T]".into()));
    };
    let bound = 1.5 * early.1 + 0.1;
    Ok(Report::new(
        "phidot_bounds",
        late.1 <= bound,
        format!("max sup|φ̇| on [2,T] = {:.6e} at t = {}, bound {:.6e}", late.1, late.0, bound),
        Some(late),
    ))
}

/// Maximum-principle envelopes for `tr_{g_ℍ} h_ℍ` and `tr_g h`.
pub fn trace_envelopes(rows: &[DiagnosticsRow]) -> Result<Vec<Report>> {
    let first = rows
        .first()
        .filter(|r| r.t == 0.0)
        .ok_or_else(|| Error::InsufficientSamples("trace envelopes need a row at t = 0".into()))?;
    let u0 = first.sup_tr_gh_hh;
    let v0 = first.sup_tr_g_h;
    // tightest sample: largest value/bound ratio
    let ratio_h = max_by_value(rows.iter().map(|r| {
        let s = r.t.exp_m1();
        let bound = 1.0 / (1.0 / u0 + 0.5 * s);
        (r.t, (-r.t).exp() * r.sup_tr_gh_hh / bound)
    }))
    .expect("nonempty");
    let ratio_g = max_by_value(rows.iter().map(|r| {
        let s = r.t.exp_m1();
        let bound = v0 * (1.0 + 0.5 * s * u0).sqrt();
        (r.t, (-r.t).exp() * r.sup_tr_g_h / bound)
    }))
    .expect("nonempty");
    Ok(vec![
        Report::new(
            "trace_gH_hH",
            ratio_h.1 <= 1.0 + TRACE_TOL,
            format!(
                "max of sup tr/(1/(1/u0 + s/2)) = {:.6} at t = {} (u0 = {u0:.6}, tolerance {TRACE_TOL})",
                ratio_h.1, ratio_h.0
            ),
            Some(ratio_h),
        ),
        Report::new(
            "trace_g_h",
            ratio_g.1 <= 1.0 + TRACE_TOL,
            format!(
                "max of sup tr/(sup_0 tr·(1 + s·u0/2)^(1/2)) = {:.6} at t = {} (tolerance {TRACE_TOL})",
                ratio_g.1, ratio_g.0
            ),
            Some(ratio_g),
        ),
    ])
}

/// `c_min = min(min_ratio_H, min_ratio_C)` must not fall below half its early value.
pub fn metric_lower_bound(rows: &[DiagnosticsRow]) -> Result<Report> {
    let c = |r: &DiagnosticsRow| r.min_ratio_h.min(r.min_ratio_c);
    let early = min_by_value(rows.iter().filter(|r| r.t <= 1.0 + 1e-9).map(|r| (r.t, c(r))));
    let all = min_by_value(rows.iter().map(|r| (r.t, c(r))));
    let (Some(early), Some(all)) = (early, all) else {
        return Err(Error::InsufficientSamples("metric lower bound needs rows on [0,1]".into()));
    };
    Ok(Report::new(
        "metric_lower_bound",
        all.1 >= 0.5 * early.1,
        format!("c_min on [0,T] = {:.6} at t = {}, c_min on [0,1] = {:.6}", all.1, all.0, early.1),
        Some(all),
    ))
}

/// `min R^{H,ψ}(t) ≥ inf_0 e^t − (0.05|inf_0| + allowance)`.
pub fn monotonicity_check(rows: &[DiagnosticsRow], allowance: f64) -> Result<Report> {
    let samples: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.r_weighted_min.map(|v| (r.t, v))).collect();
    if samples.len() < 2 || samples[0].0 != 0.0 {
        return Err(Error::InsufficientSamples(
            "monotonicity check needs weighted curvature at t = 0 and later".into(),
        ));
    }
    let inf0 = samples[0].1;
    let slack = 0.05 * inf0.abs() + allowance;
    let worst = min_by_value(samples.iter().map(|&(t, v)| (t, v - (inf0 * t.exp() - slack)))).expect("nonempty");
    Ok(Report::new(
        "monotonicity",
        worst.1 >= 0.0,
        format!(
            "inf_0 = {inf0:.6}; smallest margin min R(t) − (inf_0 e^t − {slack:.3}) = {:.6e} at t = {}",
            worst.1, worst.0
        ),
        Some(worst),
    ))
}

/// All reports for a run plus collapse warnings.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub reports: Vec<Report>,
    pub warnings: Vec<String>,
}

impl Summary {
    pub fn red_flags(&self) -> Vec<&Report> {
        self.reports.iter().filter(|r| r.verdict == Verdict::Fail).collect()
    }
}

fn or_skipped(name: &str, r: Result<Report>) -> Result<Report> {
    match r {
        Ok(r) => Ok(r),
        Err(Error::InsufficientSamples(msg)) => Ok(Report {
            name: name.into(),
            verdict: Verdict::Skipped,
            detail: msg,
            worst_t: None,
            worst_value: None,
        }),
        Err(e) => Err(e),
    }
}

pub fn summarize(rows: &[DiagnosticsRow]) -> Result<Summary> {
    let mut reports = Vec::new();
    match trace_envelopes(rows) {
        Ok(v) => reports.extend(v),
        Err(e) => reports.push(or_skipped("trace_envelopes", Err(e))?),
    }
    reports.push(or_skipped("c0_envelope", c0_envelope(rows))?);
    reports.push(or_skipped("phidot_bounds", phidot_bounds(rows))?);
    reports.push(or_skipped("metric_lower_bound", metric_lower_bound(rows))?);
    if rows.iter().any(|r| r.r_weighted_min.is_some()) {
        reports.push(or_skipped("monotonicity", monotonicity_check(rows, MONOTONICITY_ALLOWANCE))?);
    }
    let mut warnings = Vec::new();
    if let Some(last) = rows.last() {
        if last.collapse_w > COLLAPSE_WARN {
            warnings.push(format!(
                "collapse_w({}) = {:.4e} exceeds {COLLAPSE_WARN}",
                last.t, last.collapse_w
            ));
        }
        if last.osc_trace > COLLAPSE_WARN {
            warnings.push(format!(
                "osc_trace({}) = {:.4e} exceeds {COLLAPSE_WARN}",
                last.t, last.osc_trace
            ));
        }
    }
    Ok(Summary { reports, warnings })
}
