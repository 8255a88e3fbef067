//! Weighted scalar curvature `R^{H,ψ} = R − |H|²/12 + 2Δψ − |∇ψ|²` of a split metric.
//!
//! Real coordinates are `X = (x, y, p, q)` with `w = x + iy`, `z = p + iq`, and the
//! Riemannian metric is `2G(dx² + dy²) + 2F(dp² + dq²)` for `G = g_{ww̄}`,
//! `F = g_{zz̄}`. `|H|²` is the full sum over ordered index triples.

use crate::construct::GridChart;
use crate::error::{Error, Result};
use crate::solver::SplitMetricField;

pub const MIN_CURVATURE_RESOLUTION: usize = 8;

/// Value, gradient and Hessian of a function in the `X` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub d: [f64; 4],
    pub dd: [[f64; 4]; 4],
}

fn invert(g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = g.len();
    let mut a: Vec<Vec<f64>> = g
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .expect("nonempty");
        a.swap(c, p);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        a[r][k] -= f * a[c][k];
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Scalar curvature from `g_ab`, `dg[a][b][c] = ∂_c g_ab` and
/// `ddg[a][b][c][d] = ∂_c ∂_d g_ab` in any dimension.
pub fn scalar_curvature(g: &[Vec<f64>], dg: &[Vec<Vec<f64>>], ddg: &[Vec<Vec<Vec<f64>>>]) -> f64 {
    let n = g.len();
    let gi = invert(g);
    // Γ_{lij} and Γ^k_{ij}
    let mut g1 = vec![vec![vec![0.0; n]; n]; n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                g1[l][i][j] = 0.5 * (dg[l][j][i] + dg[l][i][j] - dg[i][j][l]);
            }
        }
    }
    let mut gam = vec![vec![vec![0.0; n]; n]; n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                gam[k][i][j] = (0..n).map(|l| gi[k][l] * g1[l][i][j]).sum();
            }
        }
    }
    // ∂_m g^{kl}
    let mut dgi = vec![vec![vec![0.0; n]; n]; n];
    for m in 0..n {
        for k in 0..n {
            for l in 0..n {
                let mut s = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        s -= gi[k][a] * dg[a][b][m] * gi[b][l];
                    }
                }
                dgi[m][k][l] = s;
            }
        }
    }
    // ∂_m Γ^k_{ij}
    let dgam = |m: usize, k: usize, i: usize, j: usize| -> f64 {
        (0..n)
            .map(|l| {
                let d1 = 0.5 * (ddg[l][j][m][i] + ddg[l][i][m][j] - ddg[i][j][m][l]);
                dgi[m][k][l] * g1[l][i][j] + gi[k][l] * d1
            })
            .sum()
    };
    let mut r = 0.0;
    for i in 0..n {
        for j in 0..n {
            if gi[i][j] == 0.0 {
                continue;
            }
            let mut ric = 0.0;
            for k in 0..n {
                ric += dgam(k, k, i, j) - dgam(j, k, i, k);
                for l in 0..n {
                    ric += gam[k][k][l] * gam[l][i][j] - gam[k][j][l] * gam[l][i][k];
                }
            }
            r += gi[i][j] * ric;
        }
    }
    r
}

/// Components of the weighted scalar curvature at every grid point.
#[derive(Debug, Clone)]
pub struct WeightedScalar {
    pub r: Vec<f64>,
    pub h_norm2: Vec<f64>,
    pub lap_psi: Vec<f64>,
    pub grad_psi2: Vec<f64>,
    pub r_weighted: Vec<f64>,
}

/// Pointwise `(R, |H|², Δψ, |∇ψ|², R^{H,ψ})` from jets of `G`, `F`, `ψ`.
pub fn weighted_scalar_point(gj: &Jet, fj: &Jet, pj: &Jet) -> (f64, f64, f64, f64, f64) {
    let jets = [gj, gj, fj, fj];
    let g: Vec<Vec<f64>> = (0..4)
        .map(|a| (0..4).map(|b| if a == b { 2.0 * jets[a].v } else { 0.0 }).collect())
        .collect();
    let dg: Vec<Vec<Vec<f64>>> = (0..4)
        .map(|a| {
            (0..4)
                .map(|b| (0..4).map(|c| if a == b { 2.0 * jets[a].d[c] } else { 0.0 }).collect())
                .collect()
        })
        .collect();
    let ddg: Vec<Vec<Vec<Vec<f64>>>> = (0..4)
        .map(|a| {
            (0..4)
                .map(|b| {
                    (0..4)
                        .map(|c| (0..4).map(|d| if a == b { 2.0 * jets[a].dd[c][d] } else { 0.0 }).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let r = scalar_curvature(&g, &dg, &ddg);

    let (gv, fv) = (gj.v, fj.v);
    let (gp, gq) = (gj.d[2], gj.d[3]);
    let (fx, fy) = (fj.d[0], fj.d[1]);
    let h2 = 3.0 * ((gp * gp + gq * gq) / (gv * gv * fv) + (fx * fx + fy * fy) / (gv * fv * fv));

    let ginv = [1.0 / (2.0 * gv), 1.0 / (2.0 * gv), 1.0 / (2.0 * fv), 1.0 / (2.0 * fv)];
    let mut lap = 0.0;
    let mut grad2 = 0.0;
    for a in 0..4 {
        // Γ^c_{aa} ψ_c for a diagonal metric
        let mut gamma_term = 0.0;
        for c in 0..4 {
            let d = if c == a {
                0.5 * ginv[c] * dg[a][a][c]
            } else {
                -0.5 * ginv[c] * dg[a][a][c]
            };
            gamma_term += d * pj.d[c];
        }
        lap += ginv[a] * (pj.dd[a][a] - gamma_term);
        grad2 += ginv[a] * pj.d[a] * pj.d[a];
    }
    (r, h2, lap, grad2, r - h2 / 12.0 + 2.0 * lap - grad2)
}

/// Samples a grid field on the universal cover: crossing the `u`-boundary `k`
/// times multiplies by `λ^{k·weight}`.
struct Lifted<'a> {
    chart: &'a GridChart,
    field: &'a [f64],
    weight: f64,
}

impl Lifted<'_> {
    fn at(&self, iu: i64, j: [i64; 3]) -> f64 {
        let k = iu.div_euclid(self.chart.n_u as i64);
        let (iu, j) = self.chart.glue_index(iu, j);
        let v = self.field[self.chart.flat(iu, j)];
        if k == 0 {
            v
        } else {
            v * self.chart.structure.lambda.powf(self.weight * k as f64)
        }
    }

    /// Cartesian jet at grid point `(iu, j)`.
    fn jet(&self, iu: usize, j: [usize; 3]) -> Jet {
        let c = self.chart;
        let (iu, j) = (iu as i64, j.map(|v| v as i64));
        let du = c.du();
        let dth = c.dtheta();
        let s = |du_: i64, dj: [i64; 3]| self.at(iu + du_, [j[0] + dj[0], j[1] + dj[1], j[2] + dj[2]]);
        let e = |k: usize, sgn: i64| {
            let mut d = [0i64; 3];
            d[k] = sgn;
            d
        };
        let v = s(0, [0; 3]);
        let f_u = (s(1, [0; 3]) - s(-1, [0; 3])) / (2.0 * du);
        let f_uu = (s(1, [0; 3]) - 2.0 * v + s(-1, [0; 3])) / (du * du);
        let mut f_t = [0.0; 3];
        let mut f_tt = [[0.0; 3]; 3];
        let mut f_ut = [0.0; 3];
        for k in 0..3 {
            f_t[k] = (s(0, e(k, 1)) - s(0, e(k, -1))) / (2.0 * dth);
            f_tt[k][k] = (s(0, e(k, 1)) - 2.0 * v + s(0, e(k, -1))) / (dth * dth);
            f_ut[k] = (s(1, e(k, 1)) - s(1, e(k, -1)) - s(-1, e(k, 1)) + s(-1, e(k, -1))) / (4.0 * du * dth);
            for l in (k + 1)..3 {
                let mut pp = [0i64; 3];
                pp[k] = 1;
                pp[l] = 1;
                let mut pm = pp;
                pm[l] = -1;
                let mut mp = pp;
                mp[k] = -1;
                let mm = [-pp[0], -pp[1], -pp[2]];
                let h = (s(0, pp) - s(0, pm) - s(0, mp) + s(0, mm)) / (4.0 * dth * dth);
                f_tt[k][l] = h;
                f_tt[l][k] = h;
            }
        }
        let w = &c.v_inv;
        let y = c.height(iu as usize);
        let ll = c.ln_lambda;
        // X index of fiber coordinate a: x → 0, p → 2, q → 3
        const XI: [usize; 3] = [0, 2, 3];
        let mut d = [0.0; 4];
        let mut dd = [[0.0; 4]; 4];
        d[1] = f_u / (y * ll);
        dd[1][1] = f_uu / (y * ll).powi(2) - f_u / (y * y * ll);
        for a in 0..3 {
            d[XI[a]] = (0..3).map(|k| w[k][a] * f_t[k]).sum();
            let mixed: f64 = (0..3).map(|k| w[k][a] * f_ut[k]).sum::<f64>() / (y * ll);
            dd[1][XI[a]] = mixed;
            dd[XI[a]][1] = mixed;
            for b in 0..3 {
                let mut h = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        h += w[k][a] * w[l][b] * f_tt[k][l];
                    }
                }
                dd[XI[a]][XI[b]] = h;
            }
        }
        Jet { v, d, dd }
    }
}

/// `R^{H,ψ}` and its ingredients at every grid point, by centered differences
/// through the glued chart.
pub fn weighted_scalar(chart: &GridChart, metric: &SplitMetricField, psi: &[f64]) -> Result<WeightedScalar> {
    if chart.n_u < MIN_CURVATURE_RESOLUTION || chart.n_f < MIN_CURVATURE_RESOLUTION {
        return Err(Error::ResolutionTooCoarse(format!(
            "weighted scalar curvature needs N_u, N_f >= {MIN_CURVATURE_RESOLUTION}, got {} and {}",
            chart.n_u, chart.n_f
        )));
    }
    let n = chart.len();
    if metric.g_ww.len() != n || metric.g_zz.len() != n || psi.len() != n {
        return Err(Error::ResolutionMismatch {
            expected: n,
            got: metric.g_ww.len().min(metric.g_zz.len()).min(psi.len()),
        });
    }
    let gf = Lifted {
        chart,
        field: &metric.g_ww,
        weight: -2.0,
    };
    let ff = Lifted {
        chart,
        field: &metric.g_zz,
        weight: 1.0,
    };
    let pf = Lifted {
        chart,
        field: psi,
        weight: 0.0,
    };
    let mut out = WeightedScalar {
        r: Vec::with_capacity(n),
        h_norm2: Vec::with_capacity(n),
        lap_psi: Vec::with_capacity(n),
        grad_psi2: Vec::with_capacity(n),
        r_weighted: Vec::with_capacity(n),
    };
    for k in 0..n {
        let (iu, j) = chart.unflat(k);
        let (r, h2, lap, g2, rw) = weighted_scalar_point(&gf.jet(iu, j), &ff.jet(iu, j), &pf.jet(iu, j));
        out.r.push(r);
        out.h_norm2.push(h2);
        out.lap_psi.push(lap);
        out.grad_psi2.push(g2);
        out.r_weighted.push(rw);
    }
    Ok(out)
}
