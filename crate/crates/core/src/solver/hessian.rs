//! Discrete twisted Hessian `φ_{zz̄}`, `φ_{ww̄}` on the grid chart.

use rayon::prelude::*;

use crate::construct::GridChart;
use crate::error::{Error, Result};

/// `φ_{ww̄}` and `φ_{zz̄}` per grid point, flat row-major like the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistedHessian {
    pub phi_ww: Vec<f64>,
    pub phi_zz: Vec<f64>,
}

/// Precomputed gluing tables and chain-rule coefficients for one chart.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub(crate) n_u: usize,
    n_f: usize,
    pub(crate) nf3: usize,
    /// `fiber_flat(A j)`, used when stepping above the top layer.
    up: Vec<u32>,
    /// `fiber_flat(A⁻¹ j)`, used when stepping below layer 0.
    down: Vec<u32>,
    /// `∂²_x = Σ cw[k][l] ∂_{θk}∂_{θl}`.
    pub(crate) cw: [[f64; 3]; 3],
    /// `∂²_{Re z} + ∂²_{Im z} = Σ cz[k][l] ∂_{θk}∂_{θl}`.
    pub(crate) cz: [[f64; 3]; 3],
    pub(crate) inv_dth2: f64,
    pub(crate) inv_du2: f64,
    inv_2du: f64,
    /// Per layer: `y`, `(y ln λ)^{−2}`, `(y² ln λ)^{−1}`.
    pub(crate) y: Vec<f64>,
    pub(crate) coef_uu: Vec<f64>,
    coef_u: Vec<f64>,
}

impl Stencil {
    pub fn new(chart: &GridChart) -> Self {
        let nf3 = chart.fiber_len();
        let mut up = Vec::with_capacity(nf3);
        let mut down = Vec::with_capacity(nf3);
        for f in 0..nf3 {
            let ji = chart.unflat(f).1.map(|v| v as i64);
            up.push(chart.fiber_flat(chart.glue_fiber(1, ji)) as u32);
            down.push(chart.fiber_flat(chart.glue_fiber(-1, ji)) as u32);
        }
        let w = &chart.v_inv;
        let mut cw = [[0.0; 3]; 3];
        let mut cz = [[0.0; 3]; 3];
        for k in 0..3 {
            for l in 0..3 {
                cw[k][l] = w[k][0] * w[l][0];
                cz[k][l] = w[k][1] * w[l][1] + w[k][2] * w[l][2];
            }
        }
        let ll = chart.ln_lambda;
        let y: Vec<f64> = (0..chart.n_u).map(|i| chart.height(i)).collect();
        let coef_uu = y.iter().map(|y| 1.0 / (y * ll).powi(2)).collect();
        let coef_u = y.iter().map(|y| 1.0 / (y * y * ll)).collect();
        let du = chart.du();
        let dth = chart.dtheta();
        Stencil {
            n_u: chart.n_u,
            n_f: chart.n_f,
            nf3,
            up,
            down,
            cw,
            cz,
            inv_dth2: 1.0 / (dth * dth),
            inv_du2: 1.0 / (du * du),
            inv_2du: 0.5 / du,
            y,
            coef_uu,
            coef_u,
        }
    }

    pub fn len(&self) -> usize {
        self.n_u * self.nf3
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `φ_{ww̄}` and `φ_{zz̄}` along the fiber row `(iu, j1, j2, ·)`.
    pub fn row(&self, phi: &[f64], iu: usize, j1: usize, j2: usize, ww: &mut [f64], zz: &mut [f64]) {
        let n = self.n_f;
        let nf3 = self.nf3;
        let layer = &phi[iu * nf3..(iu + 1) * nf3];
        let (j1p, j1m) = ((j1 + 1) % n, (j1 + n - 1) % n);
        let (j2p, j2m) = ((j2 + 1) % n, (j2 + n - 1) % n);
        let row = |a: usize, b: usize| &layer[(a * n + b) * n..(a * n + b + 1) * n];
        let r00 = row(j1, j2);
        let (rp0, rm0, r0p, r0m) = (row(j1p, j2), row(j1m, j2), row(j1, j2p), row(j1, j2m));
        let (rpp, rpm, rmp, rmm) = (row(j1p, j2p), row(j1p, j2m), row(j1m, j2p), row(j1m, j2m));
        let base = iu * nf3 + (j1 * n + j2) * n;
        let (above, below): (Option<&[f64]>, Option<&[f64]>) = (
            (iu + 1 < self.n_u).then(|| &phi[base + nf3..base + nf3 + n]),
            (iu > 0).then(|| &phi[base - nf3..base - nf3 + n]),
        );
        let q = 0.25 * self.inv_dth2;
        let (cw, cz) = (&self.cw, &self.cz);
        let (cuu, cu) = (self.coef_uu[iu], self.coef_u[iu]);
        for j3 in 0..n {
            let (p, m) = (if j3 + 1 == n { 0 } else { j3 + 1 }, if j3 == 0 { n - 1 } else { j3 - 1 });
            let c = r00[j3];
            let h00 = (rp0[j3] - 2.0 * c + rm0[j3]) * self.inv_dth2;
            let h11 = (r0p[j3] - 2.0 * c + r0m[j3]) * self.inv_dth2;
            let h22 = (r00[p] - 2.0 * c + r00[m]) * self.inv_dth2;
            let h01 = (rpp[j3] - rpm[j3] - rmp[j3] + rmm[j3]) * q;
            let h02 = (rp0[p] - rp0[m] - rm0[p] + rm0[m]) * q;
            let h12 = (r0p[p] - r0p[m] - r0m[p] + r0m[m]) * q;
            let contract = |k: &[[f64; 3]; 3]| {
                k[0][0] * h00 + k[1][1] * h11 + k[2][2] * h22 + 2.0 * (k[0][1] * h01 + k[0][2] * h02 + k[1][2] * h12)
            };
            let xx = contract(cw);
            let z2 = contract(cz);
            let f = (j1 * n + j2) * n + j3;
            let a = match above {
                Some(r) => r[j3],
                None => phi[self.up[f] as usize],
            };
            let b = match below {
                Some(r) => r[j3],
                None => phi[(self.n_u - 1) * nf3 + self.down[f] as usize],
            };
            let uu = (a - 2.0 * c + b) * self.inv_du2;
            let u1 = (a - b) * self.inv_2du;
            let yy = uu * cuu - u1 * cu;
            ww[j3] = 0.25 * (xx + yy);
            zz[j3] = 0.25 * z2;
        }
    }

    /// Fill one layer of `φ_{ww̄}`, `φ_{zz̄}`.
    pub fn layer(&self, phi: &[f64], iu: usize, ww: &mut [f64], zz: &mut [f64]) {
        let n = self.n_f;
        for j1 in 0..n {
            for j2 in 0..n {
                let r = (j1 * n + j2) * n;
                self.row(phi, iu, j1, j2, &mut ww[r..r + n], &mut zz[r..r + n]);
            }
        }
    }

    pub fn apply(&self, phi: &[f64]) -> Result<TwistedHessian> {
        if phi.len() != self.len() {
            return Err(Error::ResolutionMismatch {
                expected: self.len(),
                got: phi.len(),
            });
        }
        let mut phi_ww = vec![0.0; phi.len()];
        let mut phi_zz = vec![0.0; phi.len()];
        phi_ww
            .par_chunks_mut(self.nf3)
            .zip(phi_zz.par_chunks_mut(self.nf3))
            .enumerate()
            .for_each(|(iu, (ww, zz))| self.layer(phi, iu, ww, zz));
        Ok(TwistedHessian { phi_ww, phi_zz })
    }
}

/// Twisted Hessian of a grid function through the glued chart.
pub fn twisted_hessian(phi: &[f64], chart: &GridChart) -> Result<TwistedHessian> {
    if phi.len() != chart.len() {
        return Err(Error::ResolutionMismatch {
            expected: chart.len(),
            got: phi.len(),
        });
    }
    Stencil::new(chart).apply(phi)
}
