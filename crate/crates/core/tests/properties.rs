#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;

use otflow::config::{AutoOr, InitConfig, InitKind, MatrixEntries, OutputConfig, RunConfig};
use otflow::construct::{analyze_matrix, lattice_chart};
use otflow::linalg::{det3_int, matmul_int, IMat3};
use otflow::modelgeom::ModelParams;
use otflow::solver::{
    decode_snapshot, encode_snapshot, noise_field, twisted_hessian, GridSpec, Integrator, NormMode, ParamsAB,
    PotentialState, Snapshot, SnapshotHeader,
};

const PLASTIC: IMat3 = [[0, 1, 0], [0, 0, 1], [1, 1, 0]];

fn adjugate(p: &IMat3) -> IMat3 {
    let mut out = [[0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
            let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
            out[i][j] = p[r0][c0] * p[r1][c1] - p[r0][c1] * p[r1][c0];
        }
    }
    out
}

fn unimodular() -> impl Strategy<Value = IMat3> {
    prop::array::uniform3(prop::array::uniform3(-2i64..=2)).prop_filter("det ±1", |p| det3_int(p).abs() == 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_invariant_under_conjugation(p in unimodular()) {
        let det = det3_int(&p);
        let inv = adjugate(&p).map(|r| r.map(|v| v * det));
        let conj = matmul_int(&matmul_int(&p, &PLASTIC), &inv);
        let a = analyze_matrix(&PLASTIC).unwrap();
        let b = analyze_matrix(&conj).unwrap();
        prop_assert!((a.lambda - b.lambda).abs() < 1e-12);
        prop_assert!((a.mu.norm() - b.mu.norm()).abs() < 1e-12);
        prop_assert!((b.lambda * b.mu.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn glue_round_trip(iu in 0i64..8, j in prop::array::uniform3(-20i64..20), k in -3i64..=3) {
        let s = analyze_matrix(&PLASTIC).unwrap();
        let c = lattice_chart(&s, 1.0, 8, 6).unwrap();
        let up = c.glue_index(iu + 8 * k, j);
        let back = c.glue_index(up.0 as i64 - 8 * k, up.1.map(|v| v as i64));
        prop_assert_eq!(back, c.glue_index(iu, j));
    }

    #[test]
    fn config_round_trip(
        n_u in 4usize..40,
        n_f in 4usize..20,
        a in 0.01f64..10.0,
        t_end in 0.0f64..100.0,
        dt in 1e-6f64..1.0,
        seed in any::<u64>(),
        amp in prop::option::of(1e-6f64..10.0),
        snap in prop::option::of(0.1f64..10.0),
        mode in 0usize..3,
    ) {
        let cfg = RunConfig {
            matrix: MatrixEntries([0, 1, 0, 0, 0, 1, 1, 1, 0]),
            y0: 1.5,
            n_u,
            n_f,
            a,
            b: 1.0 / a,
            norm_mode: [NormMode::StaticC1, NormMode::Improved, NormMode::MovingModel][mode],
            c1_policy: amp.map(AutoOr::Value).unwrap_or_default(),
            init: InitConfig {
                mode: [InitKind::Zero, InitKind::Noise, InitKind::File][mode],
                amplitude: amp.map(AutoOr::Value).unwrap_or_default(),
                seed,
                path: Some("init.bin".into()),
            },
            t_end,
            dt_max: dt,
            snapshot_dt: snap,
            diag_dt: 0.25,
            stretch_tier: false,
            output: OutputConfig { csv_path: Some("x.csv".into()), snapshot_dir: None },
        };
        cfg.validate().unwrap();
        let text = cfg.to_json().unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn snapshot_bytes_round_trip(
        t in 0.0f64..1e3,
        c1 in 1e-3f64..1e3,
        bits in prop::collection::vec(any::<u64>(), 4 * 64),
    ) {
        let phi: Vec<f64> = bits.into_iter().map(f64::from_bits).collect();
        let snap = Snapshot {
            header: SnapshotHeader {
                version: 1,
                t,
                grid: GridSpec { n_u: 4, n_f: 4, y0: 1.0 },
                matrix: [0, 1, 0, 0, 0, 1, 1, 1, 0],
                params: ParamsAB { a: 1.0, b: 2.0 },
                norm_mode: NormMode::StaticC1,
                c1,
            },
            phi,
        };
        let bytes = encode_snapshot(&snap).unwrap();
        let back = decode_snapshot(&bytes).unwrap();
        prop_assert_eq!(encode_snapshot(&back).unwrap(), bytes);
        prop_assert_eq!(back.header, snap.header);
    }
}

/// `Φ(u, θ) = χ(u) g(θ) + χ(u − 1) g(Aθ)` with `χ = cos⁶(πv/2)` satisfies
/// `Φ(u + 1, θ) = Φ(u, Aθ)` across the seam; its twisted Hessian is known in
/// closed form through `∂_x = Σ_k W_{k0} ∂_{θ_k}` and the `y = y0 λ^u` chain rule.
#[test]
fn twisted_hessian_manufactured_order() {
    use std::f64::consts::PI;
    let s = analyze_matrix(&PLASTIC).unwrap();
    let chi = |v: f64| if v.abs() >= 1.0 { [0.0; 3] } else {
        let (c, sn) = ((0.5 * PI * v).cos(), (0.5 * PI * v).sin());
        [c.powi(6), -3.0 * PI * c.powi(5) * sn, 1.5 * PI * PI * (5.0 * c.powi(4) * sn * sn - c.powi(6))]
    };
    // value and Hessian in θ of g(θ) = cos 2πθ₁ + ½ sin 2π(θ₂ − θ₃)
    let g = |th: [f64; 3]| -> (f64, [[f64; 3]; 3]) {
        let (c1, s23) = ((2.0 * PI * th[0]).cos(), (2.0 * PI * (th[1] - th[2])).sin());
        let q = 4.0 * PI * PI;
        let h = 0.5 * q * s23;
        (c1 + 0.5 * s23, [[-q * c1, 0.0, 0.0], [0.0, -h, h], [0.0, h, -h]])
    };
    let mut errs = Vec::new();
    for (n_u, n_f) in [(8usize, 8usize), (16, 16), (32, 32)] {
        let c = lattice_chart(&s, 1.0, n_u, n_f).unwrap();
        let a = c.glue;
        let w = c.v_inv;
        let mut phi = Vec::with_capacity(c.len());
        let mut exact = Vec::with_capacity(c.len());
        for k in 0..c.len() {
            let (iu, j) = c.unflat(k);
            let u = iu as f64 / n_u as f64;
            let th = j.map(|v| v as f64 / n_f as f64);
            let ath = [0, 1, 2].map(|r| (0..3).map(|q| a[r][q] as f64 * th[q]).sum::<f64>());
            let (g0, h0) = g(th);
            let (g1, h1a) = g(ath);
            let (x0, x1) = (chi(u), chi(u - 1.0));
            let mut hess = [[0.0; 3]; 3];
            for p in 0..3 {
                for q in 0..3 {
                    let mut pulled = 0.0;
                    for r in 0..3 {
                        for t in 0..3 {
                            pulled += a[r][p] as f64 * a[t][q] as f64 * h1a[r][t];
                        }
                    }
                    hess[p][q] = x0[0] * h0[p][q] + x1[0] * pulled;
                }
            }
            let (fu, fuu) = (x0[1] * g0 + x1[1] * g1, x0[2] * g0 + x1[2] * g1);
            let y = c.height(iu);
            let fyy = fuu / (y * c.ln_lambda).powi(2) - fu / (y * y * c.ln_lambda);
            let contract = |col: usize| -> f64 {
                let mut acc = 0.0;
                for p in 0..3 {
                    for q in 0..3 {
                        acc += w[p][col] * w[q][col] * hess[p][q];
                    }
                }
                acc
            };
            phi.push(x0[0] * g0 + x1[0] * g1);
            exact.push((0.25 * (contract(0) + fyy), 0.25 * (contract(1) + contract(2))));
        }
        let h = twisted_hessian(&phi, &c).unwrap();
        let e = (0..c.len())
            .map(|k| (h.phi_ww[k] - exact[k].0).abs().max((h.phi_zz[k] - exact[k].1).abs()))
            .fold(0.0, f64::max);
        errs.push(e);
    }
    for pair in errs.windows(2) {
        let order = (pair[0] / pair[1]).log2();
        assert!(order >= 1.8, "errors {errs:?}");
    }
}

/// Ordered initial data stay ordered along the discrete flow.
#[test]
fn comparison_principle() {
    let s = analyze_matrix(&PLASTIC).unwrap();
    let c = lattice_chart(&s, 1.0, 8, 4).unwrap();
    let base = noise_field(&c, 5);
    let bump = noise_field(&c, 6);
    let lo: Vec<f64> = base.iter().map(|v| 2e-3 * v).collect();
    let hi: Vec<f64> = lo.iter().zip(&bump).map(|(v, b)| v + 2e-3 * (1.0 + b)).collect();
    let params = ModelParams::single(1.0, 1.0).unwrap();
    let mut a = Integrator::new(PotentialState::new(c.clone(), 0.0, lo, params.clone(), NormMode::Improved, 1.0).unwrap())
        .unwrap();
    let mut b = Integrator::new(PotentialState::new(c, 0.0, hi, params, NormMode::Improved, 1.0).unwrap()).unwrap();
    for _ in 0..2000 {
        let dt = a.stable_dt().min(b.stable_dt());
        a.advance(dt).unwrap();
        b.advance(dt).unwrap();
        let gap = a
            .state()
            .phi
            .iter()
            .zip(&b.state().phi)
            .map(|(x, y)| y - x)
            .fold(f64::INFINITY, f64::min);
        assert!(gap >= -1e-12, "order lost at t = {}: {gap:e}", a.state().t);
    }
}
