//! Monitored quantities along a run and the estimate checks built on them.
//!
//! Two comparison metrics appear: the static `h = ω_h` (`a = b = 1`) used by
//! the trace estimates and the dilaton, and the moving model `h(t)` through the
//! run's own `(a, b)` used by the metric lower bound and the collapse traces.

mod table;
mod curvature;
mod reports;

use crate::construct::GridChart;
use crate::error::{Error, Result};
use crate::modelgeom::model_beta;
use crate::solver::{PotentialState, SplitMetricField, Stencil};

pub use table::{format_row, parse_csv, write_csv, CSV_HEADER};
pub use curvature::{scalar_curvature, weighted_scalar, WeightedScalar, MIN_CURVATURE_RESOLUTION};
pub use reports::{
    c0_envelope, metric_lower_bound, monotonicity_check, phidot_bounds, summarize, trace_envelopes, Report,
    Summary, Verdict, MONOTONICITY_ALLOWANCE,
};

/// One line of the diagnostics time series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub sup_phi: f64,
    pub inf_phi: f64,
    pub sup_phidot: f64,
    pub inf_phidot: f64,
    /// `sup tr_{g_ℍ} h_ℍ`.
    pub sup_tr_gh_hh: f64,
    /// `inf tr_{h_ℍ} g_ℍ`.
    pub inf_tr_hh_gh: f64,
    /// `sup tr_g h`.
    pub sup_tr_g_h: f64,
    pub min_ratio_h: f64,
    pub min_ratio_c: f64,
    pub osc_trace: f64,
    pub collapse_w: f64,
    pub collapse_z: f64,
    pub flow_residual: Option<f64>,
    pub psi_min: f64,
    pub psi_max: f64,
    pub r_weighted_min: Option<f64>,
}

impl DiagnosticsRow {
    pub fn sup_abs_phi(&self) -> f64 {
        self.sup_phi.abs().max(self.inf_phi.abs())
    }

    pub fn sup_abs_phidot(&self) -> f64 {
        self.sup_phidot.abs().max(self.inf_phidot.abs())
    }
}

/// Per-point traces of a state.
#[derive(Debug, Clone)]
pub struct TraceFields {
    /// `tr_{g_ℍ} h_ℍ = 1/(y² g_{ww̄})`.
    pub tr_gh_hh: Vec<f64>,
    /// `tr_{h_ℍ} g_ℍ = y² g_{ww̄}`.
    pub tr_hh_gh: Vec<f64>,
    /// `tr_g h = 1/(y² g_{ww̄}) + y/g_{zz̄}`.
    pub tr_g_h: Vec<f64>,
    /// `tr_ω ω_h(t)` against the moving model.
    pub tr_moving: Vec<f64>,
    pub ratio_h: Vec<f64>,
    pub ratio_c: Vec<f64>,
}

fn heights(chart: &GridChart) -> Vec<f64> {
    let nf3 = chart.fiber_len();
    (0..chart.len()).map(|k| chart.height(k / nf3)).collect()
}

fn check_len(chart: &GridChart, metric: &SplitMetricField) -> Result<()> {
    if metric.g_ww.len() != chart.len() || metric.g_zz.len() != chart.len() {
        return Err(Error::ResolutionMismatch {
            expected: chart.len(),
            got: metric.g_ww.len(),
        });
    }
    Ok(())
}

pub fn trace_fields_of(chart: &GridChart, a: f64, b: f64, t: f64, metric: &SplitMetricField) -> Result<TraceFields> {
    check_len(chart, metric)?;
    let y = heights(chart);
    let beta = model_beta(a, t);
    let ez = (-t).exp() * b;
    let n = chart.len();
    let mut tf = TraceFields {
        tr_gh_hh: Vec::with_capacity(n),
        tr_hh_gh: Vec::with_capacity(n),
        tr_g_h: Vec::with_capacity(n),
        tr_moving: Vec::with_capacity(n),
        ratio_h: Vec::with_capacity(n),
        ratio_c: Vec::with_capacity(n),
    };
    for k in 0..n {
        let (w, z, y) = (metric.g_ww[k], metric.g_zz[k], y[k]);
        let wy = w * y * y;
        tf.tr_gh_hh.push(1.0 / wy);
        tf.tr_hh_gh.push(wy);
        tf.tr_g_h.push(1.0 / wy + y / z);
        let (hw, hz) = (beta / (y * y), ez * y);
        tf.tr_moving.push(hw / w + hz / z);
        tf.ratio_h.push(w / hw);
        tf.ratio_c.push(z / hz);
    }
    Ok(tf)
}

pub fn trace_fields(state: &PotentialState) -> Result<TraceFields> {
    let m = crate::solver::reconstruct_metric(state)?;
    trace_fields_of(&state.chart, state.a(), state.b(), state.t, &m)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn inf(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `(collapse_w, collapse_z, osc_trace)`.
pub fn collapse_indicators_of(chart: &GridChart, a: f64, b: f64, t: f64, metric: &SplitMetricField) -> Result<(f64, f64, f64)> {
    let tf = trace_fields_of(chart, a, b, t, metric)?;
    let et = t.exp();
    let cw = tf.tr_hh_gh.iter().map(|v| (v - 0.75).abs()).fold(0.0, f64::max);
    let cz = metric.g_zz.iter().map(|z| z * et).fold(f64::NEG_INFINITY, f64::max);
    Ok((cw, cz, sup(&tf.tr_moving) - inf(&tf.tr_moving)))
}

pub fn collapse_indicators(state: &PotentialState) -> Result<(f64, f64, f64)> {
    let m = crate::solver::reconstruct_metric(state)?;
    collapse_indicators_of(&state.chart, state.a(), state.b(), state.t, &m)
}

/// `ψ = (1/9)(log(g_{ww̄} y²) + 2 log(g_{zz̄}/(e^{−t} y)))`.
pub fn dilaton_of(chart: &GridChart, t: f64, metric: &SplitMetricField) -> Result<Vec<f64>> {
    check_len(chart, metric)?;
    let y = heights(chart);
    let et = t.exp();
    Ok((0..chart.len())
        .map(|k| ((metric.g_ww[k] * y[k] * y[k]).ln() + 2.0 * (metric.g_zz[k] * et / y[k]).ln()) / 9.0)
        .collect())
}

pub fn dilaton(state: &PotentialState) -> Result<Vec<f64>> {
    let m = crate::solver::reconstruct_metric(state)?;
    dilaton_of(&state.chart, state.t, &m)
}

/// Assemble a row from a state, its reconstructed metric and `∂_t φ`.
pub fn diagnostics_row(
    state: &PotentialState,
    metric: &SplitMetricField,
    phidot: &[f64],
    stretch: bool,
) -> Result<DiagnosticsRow> {
    let chart = &state.chart;
    let (a, b, t) = (state.a(), state.b(), state.t);
    let tf = trace_fields_of(chart, a, b, t, metric)?;
    let (collapse_w, collapse_z, osc_trace) = collapse_indicators_of(chart, a, b, t, metric)?;
    let psi = dilaton_of(chart, t, metric)?;
    let r_weighted_min = if stretch {
        let ws = weighted_scalar(chart, metric, &psi)?;
        Some(inf(&ws.r_weighted))
    } else {
        None
    };
    Ok(DiagnosticsRow {
        t,
        sup_phi: sup(&state.phi),
        inf_phi: inf(&state.phi),
        sup_phidot: sup(phidot),
        inf_phidot: inf(phidot),
        sup_tr_gh_hh: sup(&tf.tr_gh_hh),
        inf_tr_hh_gh: inf(&tf.tr_hh_gh),
        sup_tr_g_h: sup(&tf.tr_g_h),
        min_ratio_h: inf(&tf.ratio_h),
        min_ratio_c: inf(&tf.ratio_c),
        osc_trace,
        collapse_w,
        collapse_z,
        flow_residual: None,
        psi_min: inf(&psi),
        psi_max: sup(&psi),
        r_weighted_min,
    })
}

/// Derivative at node `at` of the quadratic through three samples.
pub fn three_point_derivative(times: [f64; 3], values: [f64; 3], at: usize) -> f64 {
    let x = times[at];
    let [t0, t1, t2] = times;
    let d0 = ((x - t1) + (x - t2)) / ((t0 - t1) * (t0 - t2));
    let d1 = ((x - t0) + (x - t2)) / ((t1 - t0) * (t1 - t2));
    let d2 = ((x - t0) + (x - t1)) / ((t2 - t0) * (t2 - t1));
    d0 * values[0] + d1 * values[1] + d2 * values[2]
}

/// `‖∂_t ω + ρ_B^{1,1}(ω) + ω‖_∞` at `times[at]`, with the Bismut–Ricci form from
/// the transgression `ρ_B^{1,1}(ω) = P − √−1(∂_z∂_z̄ − ∂_w∂_w̄) L`,
/// `L = log g_{zz̄} − log g_{ww̄} − 3 log y`.
pub fn flow_residual(
    chart: &GridChart,
    stencil: &Stencil,
    times: [f64; 3],
    metrics: [&SplitMetricField; 3],
    at: usize,
) -> Result<f64> {
    for m in metrics {
        check_len(chart, m)?;
    }
    if !(times[0] < times[1] && times[1] < times[2]) || at > 2 {
        return Err(Error::InsufficientSamples("flow residual needs three increasing times".into()));
    }
    let y = heights(chart);
    let g = metrics[at];
    let l: Vec<f64> = (0..chart.len())
        .map(|k| (g.g_zz[k] / (g.g_ww[k] * y[k] * y[k] * y[k])).ln())
        .collect();
    let th = stencil.apply(&l)?;
    let mut worst: f64 = 0.0;
    for k in 0..chart.len() {
        let dw = three_point_derivative(times, [metrics[0].g_ww[k], metrics[1].g_ww[k], metrics[2].g_ww[k]], at);
        let dz = three_point_derivative(times, [metrics[0].g_zz[k], metrics[1].g_zz[k], metrics[2].g_zz[k]], at);
        let rw = dw - 0.75 / (y[k] * y[k]) + th.phi_ww[k] + g.g_ww[k];
        let rz = dz - th.phi_zz[k] + g.g_zz[k];
        worst = worst.max(rw.abs()).max(rz.abs());
    }
    Ok(worst)
}
