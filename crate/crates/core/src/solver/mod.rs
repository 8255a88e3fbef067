//! Scalar reduction of the normalized flow on `S_M`.
//!
//! The evolving metric is `ω(t) = ω̃(t) + √−1(∂_z∂_z̄ − ∂_w∂_w̄)φ` with background
//! `ω̃(t) = e^{−t} ω_h^{a,b} − (1 − e^{−t}) P`, and the potential solves
//!
//! `∂_t φ = −φ + log(g_{zz̄}/h_{zz̄}) − log(g_{ww̄}/h_{ww̄}) + c(t)`.

mod hessian;
mod init;
mod snapshot;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::GridChart;
use crate::error::{Block, Error, Result};
use crate::modelgeom::{model_beta, ModelParams};

pub use hessian::{twisted_hessian, Stencil, TwistedHessian};
pub use init::{initial_potential, noise_field, InitMode, NOISE_HALVINGS, POSITIVITY_MARGIN};
pub use snapshot::{
    decode_snapshot, encode_snapshot, read_snapshot, write_snapshot, GridSpec, ParamsAB, Snapshot, SnapshotHeader,
};

/// Blocks at or below this value count as degenerate.
pub const POSITIVITY_EPS: f64 = 1e-10;
/// Safety factor of the explicit step bound.
pub const STABILITY_SAFETY: f64 = 0.2;

/// Choice of the normalizing constant `c(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// `c(t) = t + log(3/4) − log c₁`.
    StaticC1,
    /// `c(t) = t + log(3/4)`.
    #[default]
    Improved,
    /// Volume ratios against the moving model `h(t)`, `c(t) = 0`.
    MovingModel,
}

impl NormMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormMode::StaticC1 => "static_c1",
            NormMode::Improved => "improved",
            NormMode::MovingModel => "moving_model",
        }
    }
}

impl std::str::FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static_c1" => Ok(NormMode::StaticC1),
            "improved" => Ok(NormMode::Improved),
            "moving_model" => Ok(NormMode::MovingModel),
            other => Err(Error::Config(format!("unknown norm_mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PotentialState {
    pub chart: GridChart,
    pub t: f64,
    pub phi: Vec<f64>,
    /// Background class coefficients, `s = 1`.
    pub params: ModelParams,
    pub norm_mode: NormMode,
    /// Only used by [`NormMode::StaticC1`].
    pub c1: f64,
}

impl PotentialState {
    pub fn new(
        chart: GridChart,
        t: f64,
        phi: Vec<f64>,
        params: ModelParams,
        norm_mode: NormMode,
        c1: f64,
    ) -> Result<Self> {
        params.validate()?;
        if params.s() != 1 {
            return Err(Error::InvalidParams(format!(
                "the solver needs s = 1, got s = {}",
                params.s()
            )));
        }
        if phi.len() != chart.len() {
            return Err(Error::ResolutionMismatch {
                expected: chart.len(),
                got: phi.len(),
            });
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidParams(format!("t must be >= 0, got {t}")));
        }
        if !(c1 > 0.0) || !c1.is_finite() {
            return Err(Error::InvalidParams(format!("c1 must be > 0, got {c1}")));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::UnstableStep {
                t,
                reason: "non-finite potential".into(),
            });
        }
        Ok(PotentialState {
            chart,
            t,
            phi,
            params,
            norm_mode,
            c1,
        })
    }

    pub fn a(&self) -> f64 {
        self.params.a[0]
    }

    pub fn b(&self) -> f64 {
        self.params.b[0]
    }
}

/// `(g_{ww̄}, g_{zz̄})` at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMetricField {
    pub g_ww: Vec<f64>,
    pub g_zz: Vec<f64>,
}

/// Background coefficients `(β(t), e^{−t} b)` with `ω̃ = β/y² ⊕ e^{−t} b y`.
fn background(a: f64, b: f64, t: f64) -> (f64, f64) {
    (model_beta(a, t), (-t).exp() * b)
}

fn norm_constant(state: &PotentialState, t: f64) -> f64 {
    match state.norm_mode {
        NormMode::Improved => t + 0.75f64.ln(),
        NormMode::StaticC1 => t + 0.75f64.ln() - state.c1.ln(),
        NormMode::MovingModel => 0.0,
    }
}

/// Result of one fused pass over the grid.
#[derive(Debug, Clone)]
pub struct KernelEval {
    pub t: f64,
    pub metric: SplitMetricField,
    pub rhs: Vec<f64>,
    /// Explicit step bound for this metric, already including the safety factor.
    pub stable_dt: f64,
}

#[derive(Clone, Copy)]
struct Worst {
    value: f64,
    index: usize,
    block: Block,
}

impl Worst {
    fn pick(a: Option<Worst>, b: Option<Worst>) -> Option<Worst> {
        match (a, b) {
            (Some(x), Some(y)) => Some(if y.value < x.value || (y.value == x.value && y.index < x.index) {
                y
            } else {
                x
            }),
            (x, None) => x,
            (None, y) => y,
        }
    }
}

struct LayerOut {
    worst: Option<Worst>,
    nonfinite: bool,
    max_rate: f64,
}

/// Evaluate metric, `∂_t φ` and the step bound for `phi` at time `t`.
pub(crate) fn evaluate(
    stencil: &Stencil,
    state: &PotentialState,
    phi: &[f64],
    t: f64,
) -> Result<KernelEval> {
    let n = phi.len();
    let (beta, bz) = background(state.a(), state.b(), t);
    let c = norm_constant(state, t);
    let moving = state.norm_mode == NormMode::MovingModel;
    let tr_w = stencil.cw[0][0] + stencil.cw[1][1] + stencil.cw[2][2];
    let tr_z = stencil.cz[0][0] + stencil.cz[1][1] + stencil.cz[2][2];
    let nf3 = stencil.nf3;

    let mut g_ww = vec![0.0; n];
    let mut g_zz = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let outs: Vec<LayerOut> = g_ww
        .par_chunks_mut(nf3)
        .zip(g_zz.par_chunks_mut(nf3))
        .zip(rhs.par_chunks_mut(nf3))
        .enumerate()
        .map(|(iu, ((gw, gz), r))| {
            let y = stencil.y[iu];
            let hw = beta / (y * y);
            let hz = bz * y;
            // y-dependence of the volume ratios against the static h = ω_h^{1,1} or the moving model
            let (sw, sz) = if moving { (y * y / beta, 1.0 / hz) } else { (y * y, 1.0 / y) };
            let coef_u = 0.25 * stencil.coef_uu[iu] * stencil.inv_du2;
            let fiber_k = 0.25 * stencil.inv_dth2;
            let mut out = LayerOut {
                worst: None,
                nonfinite: false,
                max_rate: 0.0,
            };
            stencil.layer(phi, iu, gw, gz);
            for f in 0..nf3 {
                let w = hw - gw[f];
                let z = hz + gz[f];
                gw[f] = w;
                gz[f] = z;
                let index = iu * nf3 + f;
                if !(w.is_finite() && z.is_finite()) {
                    out.nonfinite = true;
                    continue;
                }
                if w <= POSITIVITY_EPS {
                    out.worst = Worst::pick(
                        out.worst,
                        Some(Worst {
                            value: w,
                            index,
                            block: Block::Hyperbolic,
                        }),
                    );
                }
                if z <= POSITIVITY_EPS {
                    out.worst = Worst::pick(
                        out.worst,
                        Some(Worst {
                            value: z,
                            index,
                            block: Block::Fiber,
                        }),
                    );
                }
                if out.worst.is_some() {
                    continue;
                }
                let (iw, iz) = (1.0 / w, 1.0 / z);
                r[f] = -phi[index] + (z * sz * iw / sw).ln() + c;
                let rate = (tr_w * iw + tr_z * iz) * fiber_k + coef_u * iw;
                out.max_rate = out.max_rate.max(rate);
            }
            out
        })
        .collect();

    let mut worst = None;
    let mut nonfinite = false;
    let mut max_rate: f64 = 0.0;
    for o in outs {
        worst = Worst::pick(worst, o.worst);
        nonfinite |= o.nonfinite;
        max_rate = max_rate.max(o.max_rate);
    }
    if nonfinite {
        return Err(Error::UnstableStep {
            t,
            reason: "non-finite metric".into(),
        });
    }
    if let Some(w) = worst {
        let (iu, j) = state.chart.unflat(w.index);
        return Err(Error::NotPositive {
            t,
            index: [iu, j[0], j[1], j[2]],
            block: w.block,
            value: w.value,
        });
    }
    Ok(KernelEval {
        t,
        metric: SplitMetricField { g_ww, g_zz },
        rhs,
        stable_dt: STABILITY_SAFETY / max_rate,
    })
}

pub fn reconstruct_metric(state: &PotentialState) -> Result<SplitMetricField> {
    let st = Stencil::new(&state.chart);
    Ok(evaluate(&st, state, &state.phi, state.t)?.metric)
}

/// `∂φ/∂t` at every grid point.
pub fn rhs(state: &PotentialState) -> Result<Vec<f64>> {
    let st = Stencil::new(&state.chart);
    Ok(evaluate(&st, state, &state.phi, state.t)?.rhs)
}

pub fn stable_dt(state: &PotentialState) -> Result<f64> {
    let st = Stencil::new(&state.chart);
    Ok(evaluate(&st, state, &state.phi, state.t)?.stable_dt)
}

/// Explicit step bound `σ / max_x Σ D/Δ²` for a given metric field on a chart.
pub fn stable_dt_for_metric(chart: &GridChart, metric: &SplitMetricField) -> Result<f64> {
    if metric.g_ww.len() != chart.len() || metric.g_zz.len() != chart.len() {
        return Err(Error::ResolutionMismatch {
            expected: chart.len(),
            got: metric.g_ww.len().min(metric.g_zz.len()),
        });
    }
    let st = Stencil::new(chart);
    let tr_w = st.cw[0][0] + st.cw[1][1] + st.cw[2][2];
    let tr_z = st.cz[0][0] + st.cz[1][1] + st.cz[2][2];
    let mut max_rate: f64 = 0.0;
    for k in 0..chart.len() {
        let iu = k / st.nf3;
        let (w, z) = (metric.g_ww[k], metric.g_zz[k]);
        if !(w > POSITIVITY_EPS && z > POSITIVITY_EPS) {
            let (iu, j) = chart.unflat(k);
            let (block, value) = if w <= z { (Block::Hyperbolic, w) } else { (Block::Fiber, z) };
            return Err(Error::NotPositive {
                t: f64::NAN,
                index: [iu, j[0], j[1], j[2]],
                block,
                value,
            });
        }
        let rate = (tr_w / w + tr_z / z) * 0.25 * st.inv_dth2 + st.coef_uu[iu] * st.inv_du2 / (4.0 * w);
        max_rate = max_rate.max(rate);
    }
    Ok(STABILITY_SAFETY / max_rate)
}

/// `max_x g_{zz̄}(0)/y`, the default `c₁` for [`NormMode::StaticC1`].
pub fn auto_c1(chart: &GridChart, phi: &[f64], params: &ModelParams) -> Result<f64> {
    let probe = PotentialState::new(chart.clone(), 0.0, phi.to_vec(), params.clone(), NormMode::Improved, 1.0)?;
    let m = reconstruct_metric(&probe)?;
    let nf3 = chart.fiber_len();
    Ok(m.g_zz
        .iter()
        .enumerate()
        .map(|(k, z)| z / chart.height(k / nf3))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Time stepper holding the current state together with its fused evaluation.
#[derive(Debug, Clone)]
pub struct Integrator {
    stencil: Stencil,
    state: PotentialState,
    current: KernelEval,
}

impl Integrator {
    pub fn new(state: PotentialState) -> Result<Self> {
        let stencil = Stencil::new(&state.chart);
        let current = evaluate(&stencil, &state, &state.phi, state.t)?;
        Ok(Integrator {
            stencil,
            state,
            current,
        })
    }

    pub fn state(&self) -> &PotentialState {
        &self.state
    }

    pub fn into_state(self) -> PotentialState {
        self.state
    }

    pub fn stencil(&self) -> &Stencil {
        &self.stencil
    }

    pub fn current(&self) -> &KernelEval {
        &self.current
    }

    pub fn stable_dt(&self) -> f64 {
        self.current.stable_dt
    }

    /// One explicit midpoint step. The caller is responsible for `dt` not
    /// exceeding [`Integrator::stable_dt`]; [`step`] enforces it.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        self.advance_to(self.state.t + dt)
    }

    /// Step from the current time to exactly `t1`.
    pub fn advance_to(&mut self, t1: f64) -> Result<()> {
        let t0 = self.state.t;
        let dt = t1 - t0;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::UnstableStep {
                t: t0,
                reason: format!("invalid step {dt}"),
            });
        }
        let mid: Vec<f64> = self
            .state
            .phi
            .iter()
            .zip(&self.current.rhs)
            .map(|(p, r)| p + 0.5 * dt * r)
            .collect();
        let k2 = evaluate(&self.stencil, &self.state, &mid, t0 + 0.5 * dt).map_err(|e| match e {
            Error::NotPositive { .. } | Error::UnstableStep { .. } => Error::UnstableStep {
                t: t0,
                reason: format!("midpoint stage failed: {e}"),
            },
            other => other,
        })?;
        let next: Vec<f64> = self
            .state
            .phi
            .iter()
            .zip(&k2.rhs)
            .map(|(p, r)| p + dt * r)
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::UnstableStep {
                t: t1,
                reason: "non-finite potential".into(),
            });
        }
        let eval = evaluate(&self.stencil, &self.state, &next, t1)?;
        self.state.phi = next;
        self.state.t = t1;
        self.current = eval;
        Ok(())
    }
}

/// Single RK2 step with the stability precondition checked.
pub fn step(state: &PotentialState, dt: f64) -> Result<PotentialState> {
    let mut it = Integrator::new(state.clone())?;
    let bound = it.stable_dt();
    if dt > bound * (1.0 + 1e-12) {
        return Err(Error::UnstableStep {
            t: state.t,
            reason: format!("dt = {dt:e} exceeds the stability bound {bound:e}"),
        });
    }
    it.advance(dt)?;
    Ok(it.into_state())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{analyze_matrix, lattice_chart};
    use crate::modelgeom::model_flow;
    use num_complex::Complex64;

    fn chart(n_u: usize, n_f: usize) -> GridChart {
        let s = analyze_matrix(&[[0, 1, 0], [0, 0, 1], [1, 1, 0]]).unwrap();
        lattice_chart(&s, 1.0, n_u, n_f).unwrap()
    }

    fn state(c: &GridChart, phi: Vec<f64>, a: f64, b: f64, t: f64, mode: NormMode) -> PotentialState {
        PotentialState::new(c.clone(), t, phi, ModelParams::single(a, b).unwrap(), mode, 1.0).unwrap()
    }

    #[test]
    fn zero_potential_reconstructs_model() {
        let c = chart(4, 4);
        for &(a, b, t) in &[(1.0, 1.0, 0.0), (1.0, 1.0, 2f64.ln()), (2.0, 0.5, 1.3)] {
            let st = state(&c, vec![0.0; c.len()], a, b, t, NormMode::Improved);
            let m = reconstruct_metric(&st).unwrap();
            let p = ModelParams::single(a, b).unwrap();
            for k in 0..c.len() {
                let y = c.height(k / c.fiber_len());
                let exact = model_flow(&p, t, &[Complex64::new(0.0, y)]).unwrap();
                assert!((m.g_ww[k] - exact.g_h[0]).abs() <= 1e-15 * exact.g_h[0]);
                assert!((m.g_zz[k] - exact.g_c[0]).abs() <= 1e-15 * exact.g_c[0]);
            }
        }
        let st = state(&c, vec![0.0; c.len()], 1.0, 1.0, 2f64.ln(), NormMode::Improved);
        let m = reconstruct_metric(&st).unwrap();
        assert!((m.g_ww[0] - 0.875).abs() < 1e-15 && (m.g_zz[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn spike_is_not_positive() {
        let c = chart(4, 4);
        let mut phi = vec![0.0; c.len()];
        phi[c.flat(1, [2, 2, 2])] = 10.0;
        let st = state(&c, phi, 1.0, 1.0, 0.0, NormMode::Improved);
        match reconstruct_metric(&st) {
            Err(Error::NotPositive { index, value, .. }) => {
                assert!(index[0] <= 2);
                assert!(value <= POSITIVITY_EPS);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rhs_examples() {
        let c = chart(4, 4);
        let st = state(&c, vec![0.0; c.len()], 1.0, 1.0, 0.0, NormMode::Improved);
        for r in rhs(&st).unwrap() {
            assert!((r + (4.0f64 / 3.0).ln()).abs() < 1e-14);
        }
        let st = state(&c, vec![0.0; c.len()], 1.0, 1.0, 0.0, NormMode::MovingModel);
        for r in rhs(&st).unwrap() {
            assert!(r.abs() < 1e-14);
        }
        let c1 = auto_c1(&c, &vec![0.0; c.len()], &ModelParams::single(1.0, 1.0).unwrap()).unwrap();
        assert!((c1 - 1.0).abs() < 1e-14);
        let mut st = state(&c, vec![0.0; c.len()], 1.0, 2.0, 0.7, NormMode::Improved);
        let r_imp = rhs(&st).unwrap();
        st.norm_mode = NormMode::StaticC1;
        st.c1 = 3.0;
        let r_static = rhs(&st).unwrap();
        for (a, b) in r_imp.iter().zip(&r_static) {
            assert!((a - 3f64.ln() - b).abs() < 1e-14);
        }
    }

    #[test]
    fn moving_model_stays_zero() {
        let c = chart(4, 4);
        let mut st = state(&c, vec![0.0; c.len()], 1.0, 1.0, 0.0, NormMode::MovingModel);
        for _ in 0..20 {
            let dt = stable_dt(&st).unwrap();
            st = step(&st, dt).unwrap();
        }
        assert!(st.phi.iter().all(|p| p.abs() < 1e-14));
    }

    #[test]
    fn improved_mode_stays_constant() {
        let c = chart(4, 4);
        let mut st = state(&c, vec![0.0; c.len()], 1.0, 1.0, 0.0, NormMode::Improved);
        for _ in 0..50 {
            let dt = stable_dt(&st).unwrap();
            st = step(&st, dt).unwrap();
        }
        let max = st.phi.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = st.phi.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max - min <= 1e-12);
        assert!(max < 0.0);
    }

    #[test]
    fn oversized_step_rejected() {
        let c = chart(4, 4);
        let st = state(&c, vec![0.0; c.len()], 1.0, 1.0, 0.0, NormMode::Improved);
        let dt = stable_dt(&st).unwrap();
        assert!(matches!(step(&st, 1.5 * dt), Err(Error::UnstableStep { .. })));
    }

    #[test]
    fn rough_data_blows_up_without_the_bound() {
        let c = chart(4, 6);
        let noise = noise_field(&c, 3);
        let phi: Vec<f64> = noise.iter().map(|v| 1e-3 * v).collect();
        let st = state(&c, phi, 1.0, 1.0, 0.0, NormMode::Improved);
        let dt = 20.0 * stable_dt(&st).unwrap();
        let mut it = Integrator::new(st).unwrap();
        let mut failed = false;
        for _ in 0..200 {
            if let Err(e) = it.advance(dt) {
                assert!(matches!(e, Error::UnstableStep { .. } | Error::NotPositive { .. }), "{e}");
                failed = true;
                break;
            }
        }
        assert!(failed);
    }

    #[test]
    fn stable_dt_scaling() {
        let p = ModelParams::single(1.0, 1.0).unwrap();
        // fiber-dominated regime: coarse in u, refine the fiber
        let dt_f = |n_f: usize| {
            let c = chart(4, n_f);
            stable_dt(&PotentialState::new(c.clone(), 0.0, vec![0.0; c.len()], p.clone(), NormMode::Improved, 1.0).unwrap())
                .unwrap()
        };
        let ratio = dt_f(16) / dt_f(32);
        assert!((3.6..=4.0).contains(&ratio), "{ratio}");

        let c = chart(4, 8);
        let st = state(&c, vec![0.0; c.len()], 1.0, 1.0, 0.0, NormMode::Improved);
        let m = reconstruct_metric(&st).unwrap();
        let doubled = SplitMetricField {
            g_ww: m.g_ww.iter().map(|v| 2.0 * v).collect(),
            g_zz: m.g_zz.iter().map(|v| 2.0 * v).collect(),
        };
        let r = stable_dt_for_metric(&c, &doubled).unwrap() / stable_dt_for_metric(&c, &m).unwrap();
        assert!((r - 2.0).abs() < 1e-12);

        let mut prev = f64::INFINITY;
        for &t in &[0.0, 1.0, 2.0, 4.0] {
            let d = stable_dt(&state(&c, vec![0.0; c.len()], 1.0, 1.0, t, NormMode::Improved)).unwrap();
            assert!(d < prev);
            prev = d;
        }
        let d4 = stable_dt(&state(&c, vec![0.0; c.len()], 1.0, 1.0, 4.0, NormMode::Improved)).unwrap();
        let d6 = stable_dt(&state(&c, vec![0.0; c.len()], 1.0, 1.0, 6.0, NormMode::Improved)).unwrap();
        assert!((d4 / d6 - 2f64.exp()).abs() < 0.1 * 2f64.exp());
    }
}
