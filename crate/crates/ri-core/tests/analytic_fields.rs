use num_complex::Complex64;
use proptest::prelude::*;
use ri_core::analytic::grid::{rel_dev, sup_norm};
use ri_core::analytic::noise::{mollifier, shell_energy, truncate_modes, Law, NoiseKind};
use ri_core::analytic::operator::{dyadic_blocks, time_integral_closed, time_integral_dyadic, Term};
use ri_core::analytic::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn grid2(n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(vec![n, n], vec![1.0, 1.0]).unwrap())
}

fn heat(g: &Arc<Grid>) -> Operator {
    Operator::new(OperatorSpec::heat(2), g.clone()).unwrap()
}

fn white(seed: u64) -> NoiseSpec {
    NoiseSpec { kind: NoiseKind::GaussianWhite, seed }
}

fn smooth_field(g: &Grid, seed: u64) -> Field {
    let ns = NoiseSpec { kind: NoiseKind::RandomFourierSeries { law: Law::Gauss { width: 4.0, amplitude: 1.0 }, cutoff: None }, seed };
    sample_noise(&ns, g, 0)
}

fn cos_mode(g: &Grid, m: [f64; 2]) -> Field {
    (0..g.len()).map(|i| {
        let x = g.coords(i);
        (2.0 * PI * (m[0] * x[0] + m[1] * x[1])).cos()
    }).collect()
}

#[test]
fn grid_validation_and_modes() {
    assert!(Grid::new(vec![2, 8], vec![1.0, 1.0]).is_err());
    assert!(Grid::new(vec![12, 8], vec![1.0, 1.0]).is_err());
    let g = grid2(16);
    assert_eq!(g.len(), 256);
    assert_eq!(g.mode(0, 15), -1);
    assert_eq!(g.mode(0, 7), 7);
    for i in 0..g.len() {
        assert_eq!(g.conj_index(g.conj_index(i)), i);
        assert_eq!(g.index(&g.multi(i)), i);
    }
    assert_eq!(g.nearest(&[0.5, 0.25]), g.index(&[8, 4]));
}

#[test]
fn fft_round_trip() {
    let g = grid2(32);
    let f = sample_noise(&white(4), &g, 0);
    assert!(rel_dev(&g.ifft_real(g.fft(&f)), &f) < 1e-13);
    let s = g.fft(&f);
    let one = vec![Complex64::new(1.0, 0.0); g.len()];
    for x in [0, 17, 1000] {
        assert!((g.eval_at(&s, &one, x) - f[x]).abs() < 1e-12);
    }
    assert_eq!(sup_norm(&[1.0, -3.0, 2.0]), 3.0);
}

#[test]
fn heat_semigroup() {
    let g = grid2(64);
    let op = heat(&g);
    let z = [0, 0];
    for seed in 0..4 {
        let f = sample_noise(&white(seed), &g, 0);
        for t in [1e-4, 1e-3, 2e-2] {
            let twice = op.heat_apply(&op.heat_apply(&f, t, &z).unwrap(), t, &z).unwrap();
            assert!(rel_dev(&twice, &op.heat_apply(&f, 2.0 * t, &z).unwrap()) <= 1e-12);
        }
    }
    assert!(op.heat_apply(&vec![0.0; g.len()], 0.0, &z).is_err());
}

#[test]
fn constants() {
    let g = grid2(32);
    let op = heat(&g);
    let c = vec![2.5; g.len()];
    let q = op.heat_apply(&c, 0.1, &[0, 0]).unwrap();
    assert!(q.iter().all(|v| (v - 2.5).abs() < 1e-12));
    assert!(sup_norm(&op.kernel_apply(&c, &[0, 0])) < 1e-12);
    assert!(sup_norm(&op.deriv_apply(&c, &[1, 0])) < 1e-12);
}

#[test]
fn single_mode_kernel() {
    let g = grid2(32);
    let closed = heat(&g);
    let mut spec = OperatorSpec::heat(2);
    spec.quadrature = Quadrature::Dyadic { points: 64, blocks: None, tol: 1e-9 };
    let dyadic = Operator::new(spec, g.clone()).unwrap();
    assert!(dyadic.quadrature_defect <= 1e-9);
    let m = [3.0, -2.0];
    let lam = [2.0 * PI * m[0], 2.0 * PI * m[1]];
    let p = -(lam[0] * lam[0] + lam[1] * lam[1]);
    let tint = (p.exp() - 1.0) / p;
    let f = cos_mode(&g, m);
    for op in [&closed, &dyadic] {
        let k0 = op.kernel_apply(&f, &[0, 0]);
        let want: Vec<f64> = f.iter().map(|v| v * tint).collect();
        assert!(rel_dev(&k0, &want) < 1e-9);
        // d/dx1 cos(theta) = -lambda_1 sin(theta).
        let k1 = op.kernel_apply(&f, &[1, 0]);
        let want: Vec<f64> = (0..g.len()).map(|i| {
            let x = g.coords(i);
            -lam[0] * tint * (2.0 * PI * (m[0] * x[0] + m[1] * x[1])).sin()
        }).collect();
        assert!(rel_dev(&k1, &want) < 1e-9);
    }
    for i in 0..g.len() {
        let (a, b) = (closed.kernel_multiplier(&[1, 1])[i], dyadic.kernel_multiplier(&[1, 1])[i]);
        assert!((a - b).norm() <= 1e-9 * a.norm().max(1e-300) + 1e-300);
    }
}

#[test]
fn time_integrals_agree() {
    for z in [Complex64::new(-1e-10, 0.0), Complex64::new(-3.0, 1.0), Complex64::new(-4000.0, 0.0), Complex64::new(-9.6e8, 0.0)] {
        let (v, defect) = time_integral_dyadic(z, 64, dyadic_blocks(z, 12));
        assert!((v - time_integral_closed(z)).norm() <= 1e-9 * v.norm());
        assert!(defect < 1e-9);
    }
    let (_, coarse) = time_integral_dyadic(Complex64::new(-4000.0, 0.0), 4, 12);
    assert!(coarse > 1e-9);
}

#[test]
fn coarse_quadrature_is_reported() {
    let mut spec = OperatorSpec::heat(2);
    spec.quadrature = Quadrature::Dyadic { points: 4, blocks: None, tol: 1e-9 };
    assert!(matches!(Operator::new(spec, grid2(16)), Err(ri_core::Error::Quadrature(_))));
}

#[test]
fn first_shell_damping() {
    let g = grid2(16);
    let mut spec = OperatorSpec::heat(2);
    spec.first_shell_damping = 1.0;
    let op = Operator::new(spec, g.clone()).unwrap();
    let f = cos_mode(&g, [1.0, 1.0]);
    assert!(sup_norm(&op.kernel_apply(&f, &[0, 0])) < 1e-14);
    assert!(sup_norm(&op.kernel_apply(&cos_mode(&g, [2.0, 1.0]), &[0, 0])) > 1e-4);
}

#[test]
fn ellipticity() {
    let g = grid2(16);
    assert!(heat(&g).ellipticity_delta > 0.0);
    let g3 = Arc::new(Grid::new(vec![8, 8, 8], vec![1.0; 3]).unwrap());
    assert!(Operator::new(OperatorSpec::biharmonic(3), g3.clone()).unwrap().ellipticity_delta > 0.0);
    let mut bad = OperatorSpec::heat(2);
    for t in bad.symbol.iter_mut() {
        t.c = -t.c;
    }
    assert!(Operator::new(bad, g.clone()).is_err());
    let mut aniso = OperatorSpec::heat(2);
    aniso.symbol = vec![Term { k: vec![2, 0], c: 1.0 }];
    assert!(Operator::new(aniso, g.clone()).is_err());
    let mut wrong = OperatorSpec::heat(2);
    wrong.kernel = vec![Term { k: vec![0, 0, 0], c: 1.0 }];
    assert!(Operator::new(wrong, g).is_err());
}

#[test]
fn noise_is_deterministic() {
    let g = grid2(32);
    for ns in [white(9), NoiseSpec { kind: NoiseKind::RandomFourierSeries { law: Law::Power { alpha: 2.0, amplitude: 1.0 }, cutoff: Some(5.0) }, seed: 9 }] {
        assert_eq!(sample_noise(&ns, &g, 3), sample_noise(&ns, &g, 3));
        assert_ne!(sample_noise(&ns, &g, 3), sample_noise(&ns, &g, 4));
    }
}

#[test]
fn white_noise_spectrum_is_flat() {
    let g = grid2(64);
    let n = 64;
    let shells: Vec<Vec<(f64, usize)>> = (0..n).map(|s| shell_energy(&g, &sample_noise(&white(21), &g, s))).collect();
    let expected = g.len() as f64 / g.cell_volume();
    for r in 1..shells[0].len() {
        if shells[0][r].1 == 0 {
            continue;
        }
        let v: Vec<f64> = shells.iter().map(|s| s[r].0).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - expected).abs() <= 5.0 * se, "shell {r}: {mean} vs {expected} +- {se}");
    }
}

#[test]
fn fourier_series_truncation() {
    let g = grid2(32);
    let law = Law::Gauss { width: 6.0, amplitude: 1.0 };
    let full = NoiseSpec { kind: NoiseKind::RandomFourierSeries { law: law.clone(), cutoff: None }, seed: 5 };
    let cut = NoiseSpec { kind: NoiseKind::RandomFourierSeries { law, cutoff: Some(4.0) }, seed: 5 };
    for s in 0..3 {
        let a = truncate_modes(&g, &sample_noise(&full, &g, s), 4.0);
        assert!(rel_dev(&a, &sample_noise(&cut, &g, s)) < 1e-12);
    }
}

#[test]
fn mollifier_scales_modes() {
    let g = grid2(32);
    let m = [2.0, 1.0];
    let f = cos_mode(&g, m);
    let n = 3;
    let delta = 2f64.powi(-n);
    let l2 = 4.0 * PI * PI * (m[0] * m[0] + m[1] * m[1]);
    let want: Vec<f64> = f.iter().map(|v| v * (-0.5 * delta * delta * l2).exp()).collect();
    assert!(rel_dev(&mollify(&g, &f, n as u32), &want) < 1e-12);
    assert!(mollifier(&g, 40).iter().all(|z| (z.re - 1.0).abs() < 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn kernel_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s1 in 0u64..1000, s2 in 0u64..1000, k in 0u32..3) {
        let g = grid2(16);
        let op = heat(&g);
        let (f, h) = (smooth_field(&g, s1), smooth_field(&g, s2));
        let comb: Vec<f64> = f.iter().zip(&h).map(|(x, y)| a * x + b * y).collect();
        let lhs = op.kernel_apply(&comb, &[k, 0]);
        let (kf, kh) = (op.kernel_apply(&f, &[k, 0]), op.kernel_apply(&h, &[k, 0]));
        let rhs: Vec<f64> = kf.iter().zip(&kh).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(sup_norm(&lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect::<Vec<_>>()) <= 1e-12 * (1.0 + sup_norm(&rhs)));
    }

    #[test]
    fn heat_contracts(seed in 0u64..1000, t in 1e-5f64..1e-1) {
        let g = grid2(16);
        let op = heat(&g);
        let f = sample_noise(&white(seed), &g, 0);
        let q = op.heat_apply(&f, t, &[0, 0]).unwrap();
        let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        prop_assert!(l2(&q) <= l2(&f) * (1.0 + 1e-12));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        prop_assert!((mean(&q) - mean(&f)).abs() < 1e-10);
    }
}
