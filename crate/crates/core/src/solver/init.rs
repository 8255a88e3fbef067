//! Initial potentials.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{reconstruct_metric, read_snapshot, NormMode, PotentialState};
use crate::construct::GridChart;
use crate::error::{Error, Result};
use crate::linalg;
use crate::modelgeom::ModelParams;

/// Each block must stay above this fraction of the model block at `t = 0`.
pub const POSITIVITY_MARGIN: f64 = 0.1;
/// Amplitude halvings before giving up.
pub const NOISE_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    Zero,
    /// `amplitude = None` starts the halving search at 1.
    Noise { amplitude: Option<f64>, seed: u64 },
    File(PathBuf),
}

/// Blending profile `cos⁶(πv/2)` on `|v| < 1`.
fn chi(v: f64) -> f64 {
    if v.abs() >= 1.0 {
        0.0
    } else {
        (0.5 * PI * v).cos().powi(6)
    }
}

struct Mode {
    m: f64,
    k: [i64; 3],
    coef: f64,
    phase: f64,
}

/// Smooth random function on the quotient with sup-norm 1 on the grid.
///
/// A random trigonometric polynomial `g(v, θ)` on `ℝ × T³` is wrapped around the
/// mapping torus as `Φ(u, θ) = χ(u) g(u, θ) + χ(u − 1) g(u − 1, Aθ)`, which
/// satisfies `Φ(u + 1, θ) = Φ(u, Aθ)` identically, so the grid function is
/// smooth across the glued boundary.
pub fn noise_field(chart: &GridChart, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for m in 0..3 {
        for k0 in -1..=1 {
            for k1 in -1..=1 {
                for k2 in -1..=1 {
                    let k = [k0, k1, k2];
                    let norm2 = (k0 * k0 + k1 * k1 + k2 * k2 + m * m) as f64;
                    modes.push(Mode {
                        m: m as f64,
                        k,
                        coef: rng.gen_range(-1.0..1.0) / (1.0 + norm2),
                        phase: rng.gen_range(0.0..2.0 * PI),
                    });
                }
            }
        }
    }
    let n = chart.n_f as i64;
    let g = |v: f64, j: [i64; 3]| -> f64 {
        modes
            .iter()
            .map(|md| {
                let kj = (md.k[0] * j[0] + md.k[1] * j[1] + md.k[2] * j[2]).rem_euclid(n) as f64;
                md.coef * (PI * md.m * v + 2.0 * PI * kj / n as f64 + md.phase).cos()
            })
            .sum()
    };
    let mut out = Vec::with_capacity(chart.len());
    for k in 0..chart.len() {
        let (iu, j) = chart.unflat(k);
        let u = iu as f64 / chart.n_u as f64;
        let ji = j.map(|v| v as i64);
        let aj = linalg::matvec_int(&chart.glue, &ji);
        out.push(chi(u) * g(u, ji) + chi(u - 1.0) * g(u - 1.0, aj));
    }
    let sup = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup > 0.0 {
        for v in &mut out {
            *v /= sup;
        }
    }
    out
}

fn has_margin(chart: &GridChart, phi: &[f64], params: &ModelParams) -> Result<bool> {
    let st = PotentialState::new(chart.clone(), 0.0, phi.to_vec(), params.clone(), NormMode::Improved, 1.0)?;
    let m = match reconstruct_metric(&st) {
        Ok(m) => m,
        Err(Error::NotPositive { .. }) => return Ok(false),
        Err(e) => return Err(e),
    };
    let nf3 = chart.fiber_len();
    let (a, b) = (params.a[0], params.b[0]);
    Ok((0..chart.len()).all(|k| {
        let y = chart.height(k / nf3);
        m.g_ww[k] >= POSITIVITY_MARGIN * a / (y * y) && m.g_zz[k] >= POSITIVITY_MARGIN * b * y
    }))
}

pub fn initial_potential(chart: &GridChart, mode: &InitMode, params: &ModelParams) -> Result<Vec<f64>> {
    match mode {
        InitMode::Zero => Ok(vec![0.0; chart.len()]),
        InitMode::Noise { amplitude, seed } => {
            let mut amp = amplitude.unwrap_or(1.0);
            if !(amp > 0.0) || !amp.is_finite() {
                return Err(Error::Config(format!("noise amplitude must be > 0, got {amp}")));
            }
            let base = noise_field(chart, *seed);
            for _ in 0..=NOISE_HALVINGS {
                let phi: Vec<f64> = base.iter().map(|v| amp * v).collect();
                if has_margin(chart, &phi, params)? {
                    return Ok(phi);
                }
                amp *= 0.5;
            }
            Err(Error::CannotSatisfyPositivity(NOISE_HALVINGS))
        }
        InitMode::File(path) => {
            let snap = read_snapshot(path)?;
            if snap.header.grid.n_u != chart.n_u || snap.header.grid.n_f != chart.n_f {
                return Err(Error::ResolutionMismatch {
                    expected: chart.len(),
                    got: snap.phi.len(),
                });
            }
            Ok(snap.phi)
        }
    }
}
