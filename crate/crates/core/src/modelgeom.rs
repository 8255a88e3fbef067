//! Model metrics `ω_h^{a,b}` on `ℍ^s × ℂ^s` and their closed-form geometry.
//!
//! Convention: a (1,1)-form `√−1 α dw∧dw̄` has metric coefficient `g_{ww̄} = α`.
//! The model metric has `g_{w_i w̄_i} = a_i / (Im w_i)²` and
//! `g_{z_i z̄_i} = b_i Im w_i`; the Bismut–Ricci form of every member of the family
//! is `P = −(3/4) (Im w_i)^{−2} √−1 dw_i∧dw̄_i`.
//!
//! The residual operators take metrics through sampler traits so that any
//! coordinate expression can be checked, not just the model.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default finite-difference step relative to `Im w`.
pub const DEFAULT_STEP_FACTOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ModelParams {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ModelParams {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let p = ModelParams { a, b };
        p.validate()?;
        Ok(p)
    }

    /// `s = 1` parameters.
    pub fn single(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a], vec![b])
    }

    pub fn s(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.is_empty() || self.a.len() != self.b.len() {
            return Err(Error::InvalidParams(format!(
                "a and b must be nonempty and of equal length (got {} and {})",
                self.a.len(),
                self.b.len()
            )));
        }
        if self
            .a
            .iter()
            .chain(self.b.iter())
            .any(|v| !(*v > 0.0) || !v.is_finite())
        {
            return Err(Error::InvalidParams("all a_i and b_i must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Diagonal coefficients of a split metric: `g_{w_i w̄_i}` and `g_{z_i z̄_i}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockMetric {
    #[serde(rename = "gH")]
    pub g_h: Vec<f64>,
    #[serde(rename = "gC")]
    pub g_c: Vec<f64>,
}

/// Nonvanishing Chern curvature components of the model metric, per factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelCurvature {
    /// `Ω_{w_i w̄_i w_i w̄_i}`.
    pub ww_ww: Vec<f64>,
    /// `Ω_{w_i w̄_i z_i z̄_i}`.
    pub ww_zz: Vec<f64>,
}

fn heights(params: Option<&ModelParams>, point: &[Complex64]) -> Result<Vec<f64>> {
    if let Some(p) = params {
        p.validate()?;
        if p.s() != point.len() {
            return Err(Error::InvalidParams(format!(
                "point has {} factors, parameters have {}",
                point.len(),
                p.s()
            )));
        }
    }
    point
        .iter()
        .map(|w| {
            if w.im > 0.0 && w.im.is_finite() {
                Ok(w.im)
            } else {
                Err(Error::NonPositiveHeight(w.im))
            }
        })
        .collect()
}

pub fn model_metric(params: &ModelParams, point: &[Complex64]) -> Result<BlockMetric> {
    model_flow(params, 0.0, point)
}

pub fn chern_curvature_model(params: &ModelParams, point: &[Complex64]) -> Result<ModelCurvature> {
    let y = heights(Some(params), point)?;
    Ok(ModelCurvature {
        ww_ww: y.iter().zip(&params.a).map(|(y, a)| -a / (2.0 * y.powi(4))).collect(),
        ww_zz: y.iter().zip(&params.b).map(|(y, b)| b / (4.0 * y)).collect(),
    })
}

/// Coefficient of `√−1 dw_i∧dw̄_i` in the Bismut–Ricci form. Independent of `(a, b)`.
pub fn bismut_ricci_model(point: &[Complex64]) -> Result<Vec<f64>> {
    let y = heights(None, point)?;
    Ok(y.iter().map(|y| -3.0 / (4.0 * y * y)).collect())
}

/// `β_i(t) = e^{−t} a_i + (3/4)(1 − e^{−t})`, the `ww̄` coefficient of the model flow times `y²`.
pub fn model_beta(a: f64, t: f64) -> f64 {
    let e = (-t).exp();
    e * a + 0.75 * (1.0 - e)
}

/// Exact normalized flow through `ω_h^{a,b}`.
pub fn model_flow(params: &ModelParams, t: f64, point: &[Complex64]) -> Result<BlockMetric> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParams(format!("t must be >= 0, got {t}")));
    }
    let y = heights(Some(params), point)?;
    let e = (-t).exp();
    Ok(BlockMetric {
        g_h: y
            .iter()
            .zip(&params.a)
            .map(|(y, a)| model_beta(*a, t) / (y * y))
            .collect(),
        g_c: y.iter().zip(&params.b).map(|(y, b)| e * b * y).collect(),
    })
}

/// Normalized time `t` to pluriclosed-flow time `s = e^t − 1` and the blow-down scale `1/(s + 1)`.
pub fn unnormalize_time(t: f64) -> (f64, f64) {
    let s = t.exp_m1();
    (s, 1.0 / (s + 1.0))
}

// ---------------------------------------------------------------------------
// Samplers

/// A Hermitian (1,1)-form on an open set of `ℍ^s × ℂ^s`, `n = 2s` complex dimensions.
///
/// Real coordinates are laid out as `(Re c_0, Im c_0, Re c_1, Im c_1, …)` for the
/// complex coordinates `(w_1, …, w_s, z_1, …, z_s)`.
pub trait HermitianSampler {
    /// Number of `ℍ` factors; the first `upper_half()` coordinates must stay in `ℍ`.
    fn upper_half(&self) -> usize;
    fn dim(&self) -> usize;
    /// Row-major `n × n` matrix `g_{jk̄}` at `x`.
    fn sample(&self, x: &[f64]) -> Vec<Complex64>;
}

/// A metric compatible with the splitting `E_ℍ ⊕ E_ℂ`: two `s × s` Hermitian blocks.
pub trait SplitSampler {
    fn s(&self) -> usize;
    /// `(g_{w_i w̄_j}, g_{z_i z̄_j})`, both row-major `s × s`.
    fn blocks(&self, x: &[f64]) -> (Vec<Complex64>, Vec<Complex64>);
}

/// Full Hermitian view of a split metric, optionally in the `J`-holomorphic
/// coordinates `(w, z̄)` where the fiber block enters as `ω_J = ω_ℍ − ω_ℂ`.
struct SplitView<'a> {
    inner: &'a dyn SplitSampler,
    j_coords: bool,
}

impl HermitianSampler for SplitView<'_> {
    fn upper_half(&self) -> usize {
        self.inner.s()
    }

    fn dim(&self) -> usize {
        2 * self.inner.s()
    }

    fn sample(&self, x: &[f64]) -> Vec<Complex64> {
        let s = self.inner.s();
        let n = 2 * s;
        let (h, c) = if self.j_coords {
            // ζ = z̄: flip Im z back to I-coordinates before sampling
            let mut xi = x.to_vec();
            for k in s..n {
                xi[2 * k + 1] = -xi[2 * k + 1];
            }
            let (h, c) = self.inner.blocks(&xi);
            // −√−1 g_{zz̄} dz∧dz̄ = √−1 g_{zz̄} dζ∧dζ̄ with indices transposed
            let mut ct = vec![Complex64::new(0.0, 0.0); s * s];
            for i in 0..s {
                for j in 0..s {
                    ct[i * s + j] = c[j * s + i];
                }
            }
            (h, ct)
        } else {
            self.inner.blocks(x)
        };
        let mut g = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..s {
            for j in 0..s {
                g[i * n + j] = h[i * s + j];
                g[(s + i) * n + (s + j)] = c[i * s + j];
            }
        }
        g
    }
}

/// `ω_h^{a,b}` in the standard coordinates.
#[derive(Debug, Clone)]
pub struct ModelSampler {
    pub params: ModelParams,
}

impl SplitSampler for ModelSampler {
    fn s(&self) -> usize {
        self.params.s()
    }

    fn blocks(&self, x: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let s = self.s();
        let mut h = vec![Complex64::new(0.0, 0.0); s * s];
        let mut c = h.clone();
        for i in 0..s {
            let y = x[2 * i + 1];
            h[i * s + i] = Complex64::new(self.params.a[i] / (y * y), 0.0);
            c[i * s + i] = Complex64::new(self.params.b[i] * y, 0.0);
        }
        (h, c)
    }
}

/// `ω_h^{a,b}` pulled back by the local biholomorphism `w = ŵ + ε e^ŵ`,
/// `z = ẑ + ε e^ẑ` (factorwise). Still pluriclosed and generalized Kähler, but
/// its coefficients are transcendental, so finite differences carry a genuine
/// `O(h²)` truncation error.
#[derive(Debug, Clone)]
pub struct ChartedModel {
    pub params: ModelParams,
    pub eps: f64,
}

impl ChartedModel {
    fn map(&self, v: Complex64) -> (Complex64, Complex64) {
        let e = v.exp() * self.eps;
        (v + e, Complex64::new(1.0, 0.0) + e)
    }
}

impl SplitSampler for ChartedModel {
    fn s(&self) -> usize {
        self.params.s()
    }

    fn blocks(&self, x: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let s = self.s();
        let mut h = vec![Complex64::new(0.0, 0.0); s * s];
        let mut c = h.clone();
        for i in 0..s {
            let (w, dw) = self.map(Complex64::new(x[2 * i], x[2 * i + 1]));
            let (_, dz) = self.map(Complex64::new(x[2 * (s + i)], x[2 * (s + i) + 1]));
            h[i * s + i] = Complex64::new(self.params.a[i] * dw.norm_sqr() / (w.im * w.im), 0.0);
            c[i * s + i] = Complex64::new(self.params.b[i] * dz.norm_sqr() * w.im, 0.0);
        }
        (h, c)
    }
}

/// Adapter turning a closure into a split sampler.
pub struct FnSplitSampler<F> {
    pub s: usize,
    pub f: F,
}

impl<F> SplitSampler for FnSplitSampler<F>
where
    F: Fn(&[f64]) -> (Vec<Complex64>, Vec<Complex64>),
{
    fn s(&self) -> usize {
        self.s
    }

    fn blocks(&self, x: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        (self.f)(x)
    }
}

/// Full Hermitian view (in `I`-coordinates) of a split sampler.
pub fn as_hermitian(s: &dyn SplitSampler) -> impl HermitianSampler + '_ {
    SplitView {
        inner: s,
        j_coords: false,
    }
}

// ---------------------------------------------------------------------------
// Finite-difference residuals

fn check_domain(upper_half: usize, x: &[f64], h: f64) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::InvalidParams(format!("step must be positive, got {h}")));
    }
    for i in 0..upper_half {
        let imw = x[2 * i + 1];
        if imw - 4.0 * h <= 0.0 {
            return Err(Error::StencilOutOfDomain { imw, h });
        }
    }
    Ok(())
}

fn shifted(x: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut y = x.to_vec();
    for &(k, d) in moves {
        y[k] += d;
    }
    y
}

/// Real Hessian of every component: `d2[a][b][comp]`.
fn real_hessian(
    f: &dyn Fn(&[f64]) -> Vec<Complex64>,
    x: &[f64],
    h: f64,
) -> Vec<Vec<Vec<Complex64>>> {
    let m = x.len();
    let centre = f(x);
    let ncomp = centre.len();
    let mut d2 = vec![vec![vec![Complex64::new(0.0, 0.0); ncomp]; m]; m];
    for a in 0..m {
        let p = f(&shifted(x, &[(a, h)]));
        let q = f(&shifted(x, &[(a, -h)]));
        for c in 0..ncomp {
            d2[a][a][c] = (p[c] - centre[c] * 2.0 + q[c]) / (h * h);
        }
        for b in (a + 1)..m {
            let pp = f(&shifted(x, &[(a, h), (b, h)]));
            let pm = f(&shifted(x, &[(a, h), (b, -h)]));
            let mp = f(&shifted(x, &[(a, -h), (b, h)]));
            let mm = f(&shifted(x, &[(a, -h), (b, -h)]));
            for c in 0..ncomp {
                let v = (pp[c] - pm[c] - mp[c] + mm[c]) / (4.0 * h * h);
                d2[a][b][c] = v;
                d2[b][a][c] = v;
            }
        }
    }
    d2
}

fn real_gradient(
    f: &dyn Fn(&[f64]) -> Vec<Complex64>,
    x: &[f64],
    h: f64,
) -> Vec<Vec<Complex64>> {
    (0..x.len())
        .map(|a| {
            let p = f(&shifted(x, &[(a, h)]));
            let q = f(&shifted(x, &[(a, -h)]));
            p.iter().zip(&q).map(|(p, q)| (p - q) / (2.0 * h)).collect()
        })
        .collect()
}

/// Max-norm of `∂∂̄ω` by centered second-order differences.
///
/// Component `(pj, q̄k̄)` of `∂∂̄ω` is
/// `∂_p∂_q̄ g_{jk̄} − ∂_j∂_q̄ g_{pk̄} − ∂_p∂_k̄ g_{jq̄} + ∂_j∂_k̄ g_{pq̄}`.
pub fn pluriclosed_residual(sampler: &dyn HermitianSampler, x: &[f64], h: f64) -> Result<f64> {
    let n = sampler.dim();
    if x.len() != 2 * n {
        return Err(Error::InvalidParams(format!(
            "point has {} real coordinates, expected {}",
            x.len(),
            2 * n
        )));
    }
    check_domain(sampler.upper_half(), x, h)?;
    let f = |p: &[f64]| sampler.sample(p);
    let d2 = real_hessian(&f, x, h);
    let i = Complex64::new(0.0, 1.0);
    // ∂_p ∂_q̄ of component c
    let ddbar = |p: usize, q: usize, c: usize| -> Complex64 {
        let (xp, yp, xq, yq) = (2 * p, 2 * p + 1, 2 * q, 2 * q + 1);
        (d2[xp][xq][c] + d2[yp][yq][c] + i * (d2[xp][yq][c] - d2[yp][xq][c])) * 0.25
    };
    let comp = |j: usize, k: usize| j * n + k;
    let mut worst = 0.0f64;
    for p in 0..n {
        for j in (p + 1)..n {
            for q in 0..n {
                for k in (q + 1)..n {
                    let r = ddbar(p, q, comp(j, k)) - ddbar(j, q, comp(p, k))
                        - ddbar(p, k, comp(j, q))
                        + ddbar(j, k, comp(p, q));
                    worst = worst.max(r.norm());
                }
            }
        }
    }
    Ok(worst)
}

/// Residual of the commuting generalized Kähler conditions for a split metric:
/// the max-norm of the 3-form `d^c_I ω_I + d^c_J ω_J` together with
/// `dd^c_I ω_I` and `dd^c_J ω_J` (each of which is `2√−1 ∂∂̄` in its own
/// complex structure).
pub fn gk_residual(sampler: &dyn SplitSampler, x: &[f64], h: f64) -> Result<f64> {
    let s = sampler.s();
    let n = 2 * s;
    if x.len() != 2 * n {
        return Err(Error::InvalidParams(format!(
            "point has {} real coordinates, expected {}",
            x.len(),
            2 * n
        )));
    }
    check_domain(s, x, h)?;

    // d^c_I ω_I + d^c_J ω_J = 2√−1 [(∂̄_ℍ − ∂_ℍ) ω_ℍ + (∂̄_ℂ − ∂_ℂ) ω_ℂ]
    let f = |p: &[f64]| {
        let (mut hb, cb) = sampler.blocks(p);
        hb.extend(cb);
        hb
    };
    let grad = real_gradient(&f, x, h);
    let i = Complex64::new(0.0, 1.0);
    let d = |coord: usize, c: usize| -> Complex64 {
        (grad[2 * coord][c] - i * grad[2 * coord + 1][c]) * 0.5
    };
    let dbar = |coord: usize, c: usize| -> Complex64 {
        (grad[2 * coord][c] + i * grad[2 * coord + 1][c]) * 0.5
    };
    let mut worst = 0.0f64;
    for (offset, coord0) in [(0usize, 0usize), (s * s, s)] {
        let comp = |a: usize, b: usize| offset + a * s + b;
        for k in 0..s {
            for a in (k + 1)..s {
                for b in 0..s {
                    let t = d(coord0 + k, comp(a, b)) - d(coord0 + a, comp(k, b));
                    worst = worst.max(2.0 * t.norm());
                    let t = dbar(coord0 + k, comp(b, a)) - dbar(coord0 + a, comp(b, k));
                    worst = worst.max(2.0 * t.norm());
                }
            }
        }
    }

    let vi = SplitView {
        inner: sampler,
        j_coords: false,
    };
    worst = worst.max(2.0 * pluriclosed_residual(&vi, x, h)?);
    let mut xj = x.to_vec();
    for k in s..n {
        xj[2 * k + 1] = -xj[2 * k + 1];
    }
    let vj = SplitView {
        inner: sampler,
        j_coords: true,
    };
    worst = worst.max(2.0 * pluriclosed_residual(&vj, &xj, h)?);
    Ok(worst)
}

fn model_point(w: &[Complex64], z: &[Complex64]) -> Vec<f64> {
    w.iter()
        .chain(z.iter())
        .flat_map(|c| [c.re, c.im])
        .collect()
}

/// `∂∂̄ω_h^{a,b}` residual at `(w, z)`.
pub fn pluriclosed_residual_model(
    params: &ModelParams,
    w: &[Complex64],
    z: &[Complex64],
    h: f64,
) -> Result<f64> {
    heights(Some(params), w)?;
    let sampler = ModelSampler {
        params: params.clone(),
    };
    let view = as_hermitian(&sampler);
    pluriclosed_residual(&view, &model_point(w, z), h)
}

/// Generalized Kähler residual of `(ω_h^{a,b}, I, J)` at `(w, z)`.
pub fn gk_residual_model(
    params: &ModelParams,
    w: &[Complex64],
    z: &[Complex64],
    h: f64,
) -> Result<f64> {
    heights(Some(params), w)?;
    let sampler = ModelSampler {
        params: params.clone(),
    };
    gk_residual(&sampler, &model_point(w, z), h)
}

/// Smallest pairwise slope `log(r_i / r_{i+1}) / log(h_i / h_{i+1})`.
pub fn observed_order(steps: &[f64], residuals: &[f64]) -> f64 {
    steps
        .windows(2)
        .zip(residuals.windows(2))
        .map(|(h, r)| (r[0] / r[1]).ln() / (h[0] / h[1]).ln())
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(y: f64) -> Vec<Complex64> {
        vec![Complex64::new(0.3, y)]
    }

    #[test]
    fn model_metric_examples() {
        let p = ModelParams::single(1.0, 1.0).unwrap();
        let m = model_metric(&p, &w(1.0)).unwrap();
        assert_eq!((m.g_h[0], m.g_c[0]), (1.0, 1.0));
        let m = model_metric(&p, &w(2.0)).unwrap();
        assert_eq!((m.g_h[0], m.g_c[0]), (0.25, 2.0));
        let p2 = ModelParams::new(vec![2.0, 3.0], vec![5.0, 7.0]).unwrap();
        let pt = vec![Complex64::new(0.0, 1.0); 2];
        let m = model_metric(&p2, &pt).unwrap();
        assert_eq!(m.g_h, vec![2.0, 3.0]);
        assert_eq!(m.g_c, vec![5.0, 7.0]);
        assert!(matches!(
            model_metric(&p, &w(0.0)),
            Err(Error::NonPositiveHeight(_))
        ));
        assert!(model_metric(&p, &w(-1.0)).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::single(0.0, 1.0).is_err());
        assert!(ModelParams::single(1.0, -1.0).is_err());
        assert!(ModelParams::new(vec![1.0], vec![]).is_err());
        assert!(ModelParams::single(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn curvature_examples() {
        let p = ModelParams::single(1.0, 1.0).unwrap();
        let c = chern_curvature_model(&p, &w(1.0)).unwrap();
        assert_eq!(c.ww_ww[0], -0.5);
        assert_eq!(c.ww_zz[0], 0.25);
        let c = chern_curvature_model(&p, &w(2.0)).unwrap();
        assert_eq!(c.ww_ww[0], -1.0 / 32.0);
        assert_eq!(bismut_ricci_model(&w(1.0)).unwrap()[0], -0.75);
        assert_eq!(bismut_ricci_model(&w(2.0)).unwrap()[0], -3.0 / 16.0);
        assert!(bismut_ricci_model(&w(0.0)).is_err());
    }

    #[test]
    fn flow_examples() {
        let p = ModelParams::single(1.0, 1.0).unwrap();
        assert_eq!(
            model_flow(&p, 0.0, &w(1.7)).unwrap(),
            model_metric(&p, &w(1.7)).unwrap()
        );
        let m = model_flow(&p, 2f64.ln(), &w(1.0)).unwrap();
        assert!((m.g_h[0] - 0.875).abs() < 1e-15);
        assert!((m.g_c[0] - 0.5).abs() < 1e-15);
        let m = model_flow(&p, 60.0, &w(2.0)).unwrap();
        assert!((m.g_h[0] - 0.75 / 4.0).abs() < 1e-15);
        assert!(m.g_c[0] < 1e-25);
        assert!(model_flow(&p, -1.0, &w(1.0)).is_err());
    }

    #[test]
    fn flow_satisfies_normalized_ode() {
        let p = ModelParams::single(2.5, 0.7).unwrap();
        let pt = w(1.3);
        let dt = 1e-4;
        for &t in &[0.1, 1.0, 3.0] {
            let plus = model_flow(&p, t + dt, &pt).unwrap();
            let minus = model_flow(&p, t - dt, &pt).unwrap();
            let mid = model_flow(&p, t, &pt).unwrap();
            let dh = (plus.g_h[0] - minus.g_h[0]) / (2.0 * dt);
            let dc = (plus.g_c[0] - minus.g_c[0]) / (2.0 * dt);
            let rho = bismut_ricci_model(&pt).unwrap()[0];
            assert!((dh - (-mid.g_h[0] - rho)).abs() < 1e-8);
            assert!((dc + mid.g_c[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn unnormalize_examples() {
        assert_eq!(unnormalize_time(0.0), (0.0, 1.0));
        let (s, k) = unnormalize_time(2f64.ln());
        assert!((s - 1.0).abs() < 1e-15 && (k - 0.5).abs() < 1e-15);
        for &t in &[0.0, 1e-9, 0.3, 4.0, 20.0] {
            let (s, _) = unnormalize_time(t);
            assert!((s.ln_1p() - t).abs() <= 1e-14 * t.max(1.0));
        }
    }

    #[test]
    fn model_residuals_vanish() {
        let p = ModelParams::single(1.0, 1.0).unwrap();
        let z = [Complex64::new(0.2, -0.4)];
        let r = pluriclosed_residual_model(&p, &w(1.0), &z, 1e-3).unwrap();
        assert!(r <= 1e-4, "{r}");
        let r = gk_residual_model(&p, &w(1.0), &z, 1e-3).unwrap();
        assert!(r <= 1e-6, "{r}");
    }

    #[test]
    fn constant_metric_is_pluriclosed() {
        let flat = FnSplitSampler {
            s: 1,
            f: |_: &[f64]| (vec![Complex64::new(2.0, 0.0)], vec![Complex64::new(3.0, 0.0)]),
        };
        let x = [0.0, 1.0, 0.5, 0.5];
        assert!(pluriclosed_residual(&as_hermitian(&flat), &x, 1e-3).unwrap() <= 1e-12);
        assert!(gk_residual(&flat, &x, 1e-3).unwrap() <= 1e-12);
    }

    #[test]
    fn perturbed_metric_is_not_pluriclosed() {
        // g_zz = y + y³: ∂_w∂_w̄ y³ = (3/2) y
        let pert = FnSplitSampler {
            s: 1,
            f: |x: &[f64]| {
                let y = x[1];
                (
                    vec![Complex64::new(1.0 / (y * y), 0.0)],
                    vec![Complex64::new(y + y * y * y, 0.0)],
                )
            },
        };
        let x = [0.0, 1.0, 0.0, 0.0];
        for &h in &[1e-2, 1e-3, 1e-4] {
            let r = pluriclosed_residual(&as_hermitian(&pert), &x, h).unwrap();
            assert!((r - 1.5).abs() < 1e-3, "{r}");
        }
    }

    #[test]
    fn gk_detects_incompatible_fiber_block() {
        // g_zz = y²: ∂_w∂_w̄ y² = 1/2, so dd^c ω = 2√−1 ∂∂̄ω has size 1
        let bad = FnSplitSampler {
            s: 1,
            f: |x: &[f64]| {
                let y = x[1];
                (vec![Complex64::new(1.0 / (y * y), 0.0)], vec![Complex64::new(y * y, 0.0)])
            },
        };
        let x = [0.1, 1.2, 0.3, 0.0];
        for &h in &[1e-2, 1e-3] {
            let r = gk_residual(&bad, &x, h).unwrap();
            assert!((r - 1.0).abs() < 1e-4, "{r}");
        }
    }

    #[test]
    fn stencil_domain_checked() {
        let p = ModelParams::single(1.0, 1.0).unwrap();
        let z = [Complex64::new(0.0, 0.0)];
        assert!(matches!(
            pluriclosed_residual_model(&p, &w(0.01), &z, 0.01),
            Err(Error::StencilOutOfDomain { .. })
        ));
        assert!(gk_residual_model(&p, &w(0.01), &z, 0.0025).is_err());
    }

    #[test]
    fn charted_model_converges_at_second_order() {
        let cm = ChartedModel {
            params: ModelParams::single(1.3, 0.8).unwrap(),
            eps: 0.3,
        };
        let x = [0.2, 1.1, -0.3, 0.4];
        let steps = [4e-3, 2e-3, 1e-3];
        let r: Vec<f64> = steps
            .iter()
            .map(|&h| pluriclosed_residual(&as_hermitian(&cm), &x, h).unwrap())
            .collect();
        assert!(observed_order(&steps, &r) >= 1.8, "{r:?}");
        let r: Vec<f64> = steps.iter().map(|&h| gk_residual(&cm, &x, h).unwrap()).collect();
        assert!(observed_order(&steps, &r) >= 1.8, "{r:?}");
    }

    #[test]
    fn two_factor_model_is_gk() {
        let p = ModelParams::new(vec![1.0, 2.0], vec![0.5, 3.0]).unwrap();
        let w = [Complex64::new(0.1, 1.0), Complex64::new(-0.2, 1.5)];
        let z = [Complex64::new(0.0, 0.3), Complex64::new(1.0, 0.0)];
        assert!(pluriclosed_residual_model(&p, &w, &z, 1e-3).unwrap() < 1e-4);
        assert!(gk_residual_model(&p, &w, &z, 1e-3).unwrap() < 1e-6);
    }
}
