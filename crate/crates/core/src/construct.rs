//! Inoue surfaces `S_M` from integer matrices.
//!
//! A matrix `M ∈ SL(3, ℤ)` with one real eigenvalue `λ > 1` and a non-real pair
//! `μ, μ̄` defines the quotient of `ℍ × ℂ` by the translations
//! `(w, z) ↦ (w + a_i, z + b_i)` and the dilation `(w, z) ↦ (λ w, μ z)`, where
//! `a` and `b` are eigenvectors of `M` for `λ` and `μ`.
//!
//! The compact quotient is charted by `(u, θ) ∈ [0, 1) × [0, 1)³` with
//! `Im w = y0 · λ^u` and `(Re w, Re z, Im z) = V θ`. Crossing `u = 1` glues the
//! fiber through the integer matrix `A = (M⁻¹)ᵀ`, so samples on a grid with equal
//! fiber resolution map onto grid samples exactly.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, IMat3, Mat3};

/// Tolerance on the eigen-relations and on `λ|μ|² = 1`.
pub const EIGEN_TOL: f64 = 1e-10;
/// Minimum `|det V|` for a usable lattice basis.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Eigen-data of an Inoue-type matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InoueStructure {
    pub matrix: IMat3,
    /// Real eigenvalue, `> 1`.
    pub lambda: f64,
    /// Complex eigenvalue with positive imaginary part.
    pub mu: Complex64,
    /// Unit eigenvector for `lambda`, first nonzero component positive.
    pub a_vec: [f64; 3],
    /// Unit (Hermitian norm) eigenvector for `mu`, first nonzero component real positive.
    pub b_vec: [Complex64; 3],
    /// Column `i` is `(a_i, Re b_i, Im b_i)`.
    pub v: Mat3,
}

/// Parse `"m11,m12,m13;m21,m22,m23;m31,m32,m33"`.
pub fn parse_matrix(s: &str) -> Result<IMat3> {
    let rows: Vec<&str> = s.trim().split(';').collect();
    if rows.len() != 3 {
        return Err(Error::Parse(format!("expected 3 rows, found {}", rows.len())));
    }
    let mut m = [[0i64; 3]; 3];
    for (i, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::Parse(format!(
                "row {} has {} entries, expected 3",
                i + 1,
                cols.len()
            )));
        }
        for (j, c) in cols.iter().enumerate() {
            let v: i64 = c
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("entry ({},{}) {:?}: {e}", i + 1, j + 1, c)))?;
            // keeps every later integer product (det, discriminant) inside i64/i128
            if v.abs() > 1_000_000 {
                return Err(Error::Parse(format!("entry ({},{}) too large", i + 1, j + 1)));
            }
            m[i][j] = v;
        }
    }
    Ok(m)
}

pub fn format_matrix(m: &IMat3) -> String {
    m.iter()
        .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join(";")
}

/// Monic characteristic polynomial `x³ + c[2] x² + c[1] x + c[0]`.
fn char_poly(m: &IMat3) -> [i64; 3] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    [-linalg::det3_int(m), minors, -tr]
}

/// Discriminant of the monic cubic; negative iff there is exactly one real root.
fn cubic_discriminant(c: &[i64; 3]) -> i128 {
    let (b, cc, d) = (c[2] as i128, c[1] as i128, c[0] as i128);
    18 * b * cc * d - 4 * b * b * b * d + b * b * cc * cc - 4 * cc * cc * cc - 27 * d * d
}

fn eval_cubic(c: &[f64; 3], x: f64) -> (f64, f64) {
    let f = ((x + c[2]) * x + c[1]) * x + c[0];
    let df = (3.0 * x + 2.0 * c[2]) * x + c[1];
    (f, df)
}

fn eval_cubic_c(c: &[f64; 3], x: Complex64) -> (Complex64, Complex64) {
    let f = ((x + c[2]) * x + c[1]) * x + c[0];
    let df = (x * 3.0 + 2.0 * c[2]) * x + c[1];
    (f, df)
}

/// The unique real root of a cubic with negative discriminant: bisection on the
/// Cauchy interval, then Newton polish.
fn real_root(c: &[f64; 3]) -> f64 {
    let bound = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval_cubic(c, mid).0 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-3 * (1.0 + mid.abs()) {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..60 {
        let (f, df) = eval_cubic(c, x);
        if df == 0.0 {
            break;
        }
        let dx = f / df;
        x -= dx;
        if dx.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

fn polish_complex(c: &[f64; 3], mut z: Complex64) -> Complex64 {
    for _ in 0..60 {
        let (f, df) = eval_cubic_c(c, z);
        if df.norm() == 0.0 {
            break;
        }
        let dz = f / df;
        z -= dz;
        if dz.norm() <= 1e-16 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

fn cross<T>(a: &[T; 3], b: &[T; 3]) -> [T; 3]
where
    T: Copy + std::ops::Mul<Output = T> + std::ops::Sub<Output = T>,
{
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Null vector of a rank-2 complex matrix, from the best-conditioned row cross product.
fn null_vector(rows: [[Complex64; 3]; 3]) -> [Complex64; 3] {
    let candidates = [
        cross(&rows[0], &rows[1]),
        cross(&rows[0], &rows[2]),
        cross(&rows[1], &rows[2]),
    ];
    let norm = |v: &[Complex64; 3]| v.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if norm(c) > norm(&best) {
            best = *c;
        }
    }
    best
}

fn first_significant(v: &[Complex64; 3]) -> usize {
    let scale = v.iter().fold(0.0f64, |m, c| m.max(c.norm()));
    v.iter()
        .position(|c| c.norm() > 1e-12 * scale)
        .unwrap_or(0)
}

fn eigenvector(m: &IMat3, ev: Complex64) -> [Complex64; 3] {
    let mut rows = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            rows[i][j] = Complex64::new(m[i][j] as f64, 0.0);
        }
        rows[i][i] -= ev;
    }
    let mut v = null_vector(rows);
    // phase: first significant component real positive, then unit Hermitian norm
    let k = first_significant(&v);
    let phase = v[k].conj() / v[k].norm();
    for c in v.iter_mut() {
        *c *= phase;
    }
    let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in v.iter_mut() {
        *c /= n;
    }
    v[k] = Complex64::new(v[k].re, 0.0);
    v
}

fn eigen_residual(m: &IMat3, ev: Complex64, v: &[Complex64; 3]) -> f64 {
    (0..3)
        .map(|i| {
            let mv: Complex64 = (0..3).map(|k| v[k] * m[i][k] as f64).sum();
            (mv - ev * v[i]).norm()
        })
        .fold(0.0, f64::max)
}

/// Eigen-data and validation of an integer matrix as Inoue-surface input.
pub fn analyze_matrix(m: &IMat3) -> Result<InoueStructure> {
    let det = linalg::det3_int(m);
    if det != 1 {
        return Err(Error::DetNotOne(det));
    }
    let ci = char_poly(m);
    if cubic_discriminant(&ci) >= 0 {
        return Err(Error::RealSpectrum);
    }
    let c = [ci[0] as f64, ci[1] as f64, ci[2] as f64];
    let lambda = real_root(&c);
    if lambda <= 1.0 {
        return Err(Error::LambdaNotExpanding(lambda));
    }
    // deflate: (x - λ)(x² + p x + q)
    let p = c[2] + lambda;
    let q = c[1] + lambda * p;
    let disc = 4.0 * q - p * p;
    let mu0 = Complex64::new(-0.5 * p, 0.5 * disc.max(0.0).sqrt());
    let mut mu = polish_complex(&c, mu0);
    if mu.im < 0.0 {
        mu = mu.conj();
    }
    if mu.im == 0.0 {
        return Err(Error::RealSpectrum);
    }

    let a_c = eigenvector(m, Complex64::new(lambda, 0.0));
    let a_vec = [a_c[0].re, a_c[1].re, a_c[2].re];
    let b_vec = eigenvector(m, mu);

    let mut v = [[0.0; 3]; 3];
    for i in 0..3 {
        v[0][i] = a_vec[i];
        v[1][i] = b_vec[i].re;
        v[2][i] = b_vec[i].im;
    }
    let det_v = linalg::det3(&v);
    if !(det_v.abs() > DEGENERACY_TOL) {
        return Err(Error::DegenerateEigenvectors(det_v.abs()));
    }

    let s = InoueStructure {
        matrix: *m,
        lambda,
        mu,
        a_vec,
        b_vec,
        v,
    };
    let res_a = eigen_residual(m, Complex64::new(lambda, 0.0), &a_c);
    let res_b = eigen_residual(m, mu, &b_vec);
    if res_a > EIGEN_TOL || res_b > EIGEN_TOL || !admissibility_check(lambda, mu).0 {
        // det M = 1 with a polished root makes this unreachable short of overflow
        return Err(Error::DegenerateEigenvectors(det_v.abs()));
    }
    Ok(s)
}

impl InoueStructure {
    pub fn det_v(&self) -> f64 {
        linalg::det3(&self.v)
    }

    /// `max(|M a − λ a|, |M b − μ b|)`.
    pub fn eigen_residual(&self) -> f64 {
        let a = self.a_vec.map(|x| Complex64::new(x, 0.0));
        eigen_residual(&self.matrix, Complex64::new(self.lambda, 0.0), &a)
            .max(eigen_residual(&self.matrix, self.mu, &self.b_vec))
    }
}

/// Pluriclosed admissibility for `s = t = 1`: `λ |μ|² = 1`.
pub fn admissibility_check(lambda: f64, mu: Complex64) -> (bool, f64) {
    let residual = (lambda * mu.norm_sqr() - 1.0).abs();
    (residual <= EIGEN_TOL, residual)
}

/// Grid discretization of the compact quotient.
#[derive(Debug, Clone)]
pub struct GridChart {
    pub structure: InoueStructure,
    pub y0: f64,
    pub n_u: usize,
    pub n_f: usize,
    /// Fiber gluing map `(M⁻¹)ᵀ`: `φ(u + 1, θ) = φ(u, A θ)`.
    pub glue: IMat3,
    /// `A⁻¹ = Mᵀ`.
    pub glue_inv: IMat3,
    /// `V⁻¹`, mapping `(Re w, Re z, Im z)` back to `θ`.
    pub v_inv: Mat3,
    pub ln_lambda: f64,
}

pub fn lattice_chart(structure: &InoueStructure, y0: f64, n_u: usize, n_f: usize) -> Result<GridChart> {
    if !(y0 > 0.0) || !y0.is_finite() {
        return Err(Error::InvalidChart(format!("y0 must be > 0, got {y0}")));
    }
    if n_u < 4 || n_f < 4 {
        return Err(Error::InvalidChart(format!(
            "resolutions must be >= 4, got N_u = {n_u}, N_f = {n_f}"
        )));
    }
    let m = &structure.matrix;
    if linalg::det3_int(m) != 1 {
        return Err(Error::DetNotOne(linalg::det3_int(m)));
    }
    let glue = linalg::cofactor_int(m);
    let glue_inv = linalg::transpose_int(m);
    let v_inv = linalg::inv3(&structure.v)
        .filter(|_| structure.det_v().abs() > DEGENERACY_TOL)
        .ok_or(Error::DegenerateEigenvectors(structure.det_v().abs()))?;
    Ok(GridChart {
        structure: structure.clone(),
        y0,
        n_u,
        n_f,
        glue,
        glue_inv,
        v_inv,
        ln_lambda: structure.lambda.ln(),
    })
}

impl GridChart {
    pub fn shape(&self) -> [usize; 4] {
        [self.n_u, self.n_f, self.n_f, self.n_f]
    }

    pub fn len(&self) -> usize {
        self.n_u * self.fiber_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn fiber_len(&self) -> usize {
        self.n_f * self.n_f * self.n_f
    }

    pub fn du(&self) -> f64 {
        1.0 / self.n_u as f64
    }

    pub fn dtheta(&self) -> f64 {
        1.0 / self.n_f as f64
    }

    /// `Im w` on layer `i_u`.
    pub fn height(&self, i_u: usize) -> f64 {
        self.y0 * (self.ln_lambda * i_u as f64 / self.n_u as f64).exp()
    }

    /// Row-major flat index of `(i_u, j1, j2, j3)`.
    #[inline]
    pub fn flat(&self, i_u: usize, j: [usize; 3]) -> usize {
        ((i_u * self.n_f + j[0]) * self.n_f + j[1]) * self.n_f + j[2]
    }

    #[inline]
    pub fn fiber_flat(&self, j: [usize; 3]) -> usize {
        (j[0] * self.n_f + j[1]) * self.n_f + j[2]
    }

    pub fn unflat(&self, k: usize) -> (usize, [usize; 3]) {
        let n = self.n_f;
        let j3 = k % n;
        let j2 = (k / n) % n;
        let j1 = (k / (n * n)) % n;
        (k / (n * n * n), [j1, j2, j3])
    }

    /// Point of `ℍ × ℂ` for a valid grid index, returned as `(w, z)`.
    pub fn point_of_index(&self, idx: [usize; 4]) -> Result<(Complex64, Complex64)> {
        let shape = self.shape();
        if idx.iter().zip(shape.iter()).any(|(i, n)| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: idx.map(|i| i as i64),
                shape,
            });
        }
        Ok(self.lift_point(idx[0] as i64, [idx[1] as i64, idx[2] as i64, idx[3] as i64]))
    }

    /// Point on the universal cover for an unreduced integer index.
    pub fn lift_point(&self, i_u: i64, j: [i64; 3]) -> (Complex64, Complex64) {
        let theta = j.map(|v| v as f64 / self.n_f as f64);
        let xz = linalg::matvec(&self.structure.v, &theta);
        let u = i_u as f64 / self.n_u as f64;
        let y = self.y0 * (self.ln_lambda * u).exp();
        (Complex64::new(xz[0], y), Complex64::new(xz[1], xz[2]))
    }

    /// Fiber index after crossing the `u`-boundary `k` times (negative `k` goes down).
    pub fn glue_fiber(&self, k: i64, j: [i64; 3]) -> [usize; 3] {
        let n = self.n_f as i64;
        let map = if k >= 0 { &self.glue } else { &self.glue_inv };
        let mut v = j.map(|x| x.rem_euclid(n));
        for _ in 0..k.unsigned_abs() {
            v = linalg::matvec_int(map, &v).map(|x| x.rem_euclid(n));
        }
        v.map(|x| x as usize)
    }

    /// Wrap an arbitrary integer index into the fundamental domain.
    pub fn glue_index(&self, i_u: i64, j: [i64; 3]) -> (usize, [usize; 3]) {
        let n_u = self.n_u as i64;
        let k = i_u.div_euclid(n_u);
        (i_u.rem_euclid(n_u) as usize, self.glue_fiber(k, j))
    }
}
