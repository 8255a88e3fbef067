//! Self-checks behind `otflow verify`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{AutoOr, InitConfig, InitKind, MatrixEntries, OutputConfig, RunConfig};
use crate::construct::{analyze_matrix, lattice_chart};
use crate::error::{Error, Result};
use crate::modelgeom::{
    as_hermitian, bismut_ricci_model, chern_curvature_model, gk_residual, observed_order, pluriclosed_residual,
    ChartedModel, ModelParams,
};
use crate::run::run_observed;
use crate::solver::NormMode;

pub const PLASTIC: [i64; 9] = [0, 1, 0, 0, 0, 1, 1, 1, 0];
const SEED: u64 = 2024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Formulas,
    Flow,
    Estimates,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formulas" => Ok(Suite::Formulas),
            "flow" => Ok(Suite::Flow),
            "estimates" => Ok(Suite::Estimates),
            "all" => Ok(Suite::All),
            other => Err(Error::Config(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Runs a suite, calling `report` as each check finishes.
pub fn run_suite(suite: Suite, mut report: impl FnMut(&Check)) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut push = |c: Check| {
        report(&c);
        out.push(c);
    };
    if matches!(suite, Suite::Formulas | Suite::All) {
        formulas().into_iter().for_each(&mut push);
    }
    if matches!(suite, Suite::Flow | Suite::All) {
        for c in flow()? {
            push(c);
        }
    }
    if matches!(suite, Suite::Estimates | Suite::All) {
        for c in estimates()? {
            push(c);
        }
    }
    Ok(out)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// `Ω = −∂∂̄ g + g⁻¹|∂g|²` for metrics depending on `y = Im w` only, by differences in `y`.
fn chern_by_differences(g: impl Fn(f64) -> f64, g_self: impl Fn(f64) -> f64, y: f64) -> f64 {
    let h = 1e-3 * y;
    let d1 = (-g(y + 2.0 * h) + 8.0 * g(y + h) - 8.0 * g(y - h) + g(y - 2.0 * h)) / (12.0 * h);
    let d2 = (-g(y + 2.0 * h) + 16.0 * g(y + h) - 30.0 * g(y) + 16.0 * g(y - h) - g(y - 2.0 * h)) / (12.0 * h * h);
    -0.25 * d2 + 0.25 * d1 * d1 / g_self(y)
}

pub fn formulas() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (a, b, y) = (rng.gen_range(0.2..5.0), rng.gen_range(0.2..5.0), rng.gen_range(0.2..5.0));
        let p = ModelParams::single(a, b).expect("positive");
        let c = chern_curvature_model(&p, &[Complex64::new(rng.gen_range(-3.0..3.0), y)]).expect("valid");
        let ww = chern_by_differences(|y| a / (y * y), |y| a / (y * y), y);
        let wz = chern_by_differences(|y| b * y, |y| b * y, y);
        worst = worst.max(rel(c.ww_ww[0], ww)).max(rel(c.ww_zz[0], wz));
    }
    out.push(check(
        "chern_curvature",
        worst < 1e-6,
        format!("max relative deviation from difference quotients {worst:.2e}"),
    ));

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let y = rng.gen_range(0.2..5.0);
        let v = bismut_ricci_model(&[Complex64::new(0.0, y)]).expect("valid")[0];
        worst = worst.max(rel(v, -0.75 / (y * y)));
    }
    out.push(check(
        "bismut_ricci",
        worst < 1e-14,
        format!("max relative deviation from -3/(4y²) {worst:.2e}"),
    ));

    let steps = [4e-3, 2e-3, 1e-3];
    let (mut pc, mut gk) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..20 {
        let cm = ChartedModel {
            params: ModelParams::single(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)).expect("positive"),
            eps: 0.3,
        };
        let x = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.5..2.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let view = as_hermitian(&cm);
        let r: Vec<f64> = steps.iter().map(|&h| pluriclosed_residual(&view, &x, h).unwrap_or(f64::NAN)).collect();
        pc = pc.min(observed_order(&steps, &r));
        let r: Vec<f64> = steps.iter().map(|&h| gk_residual(&cm, &x, h).unwrap_or(f64::NAN)).collect();
        gk = gk.min(observed_order(&steps, &r));
    }
    out.push(check("pluriclosed_order", pc >= 1.8, format!("min observed order {pc:.3}")));
    out.push(check("gk_order", gk >= 1.8, format!("min observed order {gk:.3}")));

    let m = MatrixEntries(PLASTIC).to_mat();
    match analyze_matrix(&m) {
        Ok(s) => {
            let mut x: f64 = 1.3;
            for _ in 0..50 {
                x -= (x * x * x - x - 1.0) / (3.0 * x * x - 1.0);
            }
            let prod = s.lambda * s.mu.norm_sqr();
            let chart = lattice_chart(&s, 1.0, 4, 4);
            out.push(check(
                "eigen_structure",
                (s.lambda - x).abs() < 1e-12 && (prod - 1.0).abs() < 1e-12 && chart.is_ok(),
                format!("lambda = {:.12}, |lambda - root| = {:.1e}, lambda|mu|^2 - 1 = {:.1e}", s.lambda, (s.lambda - x).abs(), prod - 1.0),
            ));
        }
        Err(e) => out.push(check("eigen_structure", false, e.to_string())),
    }
    out
}

fn model_config(norm_mode: NormMode) -> RunConfig {
    RunConfig {
        matrix: MatrixEntries(PLASTIC),
        y0: 1.0,
        n_u: 16,
        n_f: 8,
        a: 1.0,
        b: 1.0,
        norm_mode,
        c1_policy: AutoOr::Auto,
        init: InitConfig {
            mode: InitKind::Zero,
            amplitude: AutoOr::Auto,
            seed: 0,
            path: None,
        },
        t_end: 5.0,
        dt_max: 0.01,
        snapshot_dt: None,
        diag_dt: 0.25,
        stretch_tier: false,
        output: OutputConfig::default(),
    }
}

/// Noise run used by the estimate suite (the `noise.json` preset without output files).
pub fn noise_config() -> RunConfig {
    RunConfig {
        n_u: 8,
        n_f: 4,
        init: InitConfig {
            mode: InitKind::Noise,
            amplitude: AutoOr::Auto,
            seed: 42,
            path: None,
        },
        t_end: 8.0,
        ..model_config(NormMode::Improved)
    }
}

/// RK4 solution of `φ' = −φ − log(1 + e^{−t}/3)`, `φ(0) = 0`.
fn ode_oracle(t_end: f64, dt: f64) -> impl Fn(f64) -> f64 {
    let f = |t: f64, p: f64| -p - (1.0 + (-t).exp() / 3.0).ln();
    let n = (t_end / dt).ceil() as usize;
    let mut vals = Vec::with_capacity(n + 1);
    let mut p = 0.0;
    vals.push(p);
    for k in 0..n {
        let t = k as f64 * dt;
        let k1 = f(t, p);
        let k2 = f(t + 0.5 * dt, p + 0.5 * dt * k1);
        let k3 = f(t + 0.5 * dt, p + 0.5 * dt * k2);
        let k4 = f(t + dt, p + dt * k3);
        p += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        vals.push(p);
    }
    // cubic Hermite between nodes
    move |t: f64| {
        let k = ((t / dt).floor() as usize).min(n - 1);
        let (t0, p0, p1) = (k as f64 * dt, vals[k], vals[k + 1]);
        let (m0, m1) = (f(t0, p0) * dt, f(t0 + dt, p1) * dt);
        let s = (t - t0) / dt;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
    }
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn osc(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));
    hi - lo
}

/// Flow residual at `t = 1` of the seed-42 noise run on `(n_u, n_f)` with fixed step `dt`.
pub fn residual_at_one(n_u: usize, n_f: usize, dt: f64, amplitude: AutoOr) -> Result<(f64, usize)> {
    let mut init = noise_config().init;
    init.amplitude = amplitude;
    let cfg = RunConfig {
        n_u,
        n_f,
        init,
        dt_max: dt,
        t_end: 1.0 + 2.0 * dt,
        diag_dt: 0.5,
        ..noise_config()
    };
    let out = run_observed(&cfg, |_| {})?;
    let row = out
        .rows
        .iter()
        .find(|r| r.t == 1.0)
        .ok_or_else(|| Error::InsufficientSamples("no row at t = 1".into()))?;
    let r = row
        .flow_residual
        .ok_or_else(|| Error::InsufficientSamples("no flow residual at t = 1".into()))?;
    Ok((r, out.steps))
}

pub const ORDER_DT: f64 = 1.0 / 16000.0;

pub fn flow() -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    run_observed(&model_config(NormMode::MovingModel), |s| worst = worst.max(sup_abs(&s.phi)))?;
    out.push(check(
        "model_exact_moving",
        worst <= 1e-10,
        format!("sup_t sup_x |phi| = {worst:.2e}"),
    ));

    let oracle = ode_oracle(5.0, 1e-4);
    let (mut worst_osc, mut worst_dev): (f64, f64) = (0.0, 0.0);
    run_observed(&model_config(NormMode::Improved), |s| {
        worst_osc = worst_osc.max(osc(&s.phi));
        worst_dev = worst_dev.max((s.phi[0] - oracle(s.t)).abs());
    })?;
    out.push(check(
        "model_improved_ode",
        worst_osc <= 1e-12 && worst_dev <= 1e-6,
        format!("max oscillation {worst_osc:.2e}, max |phi - phi_ODE| {worst_dev:.2e}"),
    ));

    let (coarse, n_c) = residual_at_one(8, 4, 2.0 * ORDER_DT, AutoOr::Auto)?;
    let (fine, n_f) = residual_at_one(16, 8, ORDER_DT, AutoOr::Auto)?;
    let fixed = n_c == (1.0 / (2.0 * ORDER_DT)).round() as usize + 2 && n_f == (1.0 / ORDER_DT).round() as usize + 2;
    let ratio = coarse / fine;
    out.push(check(
        "flow_residual_order",
        ratio >= 2.5 && fixed,
        format!("residual at t=1: {coarse:.3e} (8x4) -> {fine:.3e} (16x8), ratio {ratio:.2}"),
    ));
    Ok(out)
}

pub fn estimates() -> Result<Vec<Check>> {
    let out = run_observed(&noise_config(), |_| {})?;
    let mut checks: Vec<Check> = out
        .summary
        .reports
        .iter()
        .map(|r| check(&r.name, r.passed(), r.detail.clone()))
        .collect();
    let last = out.rows.last().expect("at least one row");
    checks.push(check(
        "collapse_indicators",
        true,
        format!(
            "collapse_w(T) = {:.3e}, osc_trace(T) = {:.3e}{}",
            last.collapse_w,
            last.osc_trace,
            if out.summary.warnings.is_empty() { String::new() } else { format!(" (warning: {})", out.summary.warnings.join("; ")) }
        ),
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas_pass() {
        let checks = formulas();
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }

    #[test]
    fn ode_oracle_is_accurate() {
        let o = ode_oracle(1.0, 1e-3);
        // φ(t) ≈ −(t/3)(1 − t/2 + …) near 0
        assert!(o(0.0).abs() < 1e-15);
        let fine = ode_oracle(1.0, 1e-4);
        for t in [0.1, 0.5, 0.77, 1.0] {
            assert!((o(t) - fine(t)).abs() < 1e-11);
        }
        let h = 1e-6;
        assert!(((o(h) - o(0.0)) / h + (4.0f64 / 3.0).ln()).abs() < 1e-5);
    }

    #[test]
    fn suite_names() {
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
        assert!("everything".parse::<Suite>().is_err());
    }
}
