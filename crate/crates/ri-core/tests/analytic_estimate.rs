mod common;

use ri_core::analytic::config::NumericConfig;
use ri_core::analytic::estimate::*;
use ri_core::grading::Exponent;
use ri_core::renorm::PreparationMap;
use ri_core::{MultiIndex, Tree};
use std::path::PathBuf;
use std::sync::Arc;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn small(edit: impl FnOnce(&mut serde_json::Value)) -> ri_core::Result<ri_core::analytic::config::Loaded> {
    let mut v = serde_json::json!({
        "rule": "rule2d.json",
        "grid": {"sizes": [32, 32], "period": [1.0, 1.0]},
        "operator": {"preset": "heat"},
        "noise": {"kind": "gaussian-white", "seed": 11},
        "eps": "0",
        "basePoints": [[0, 0], [13, 21]],
        "mollify": 4,
        "samples": 128
    });
    edit(&mut v);
    NumericConfig::from_json(&v.to_string())?.resolve(configs())
}

#[test]
fn noise_mean_vanishes() {
    let l = small(|_| {}).unwrap();
    let e = l.ensemble();
    let prep = Arc::new(PreparationMap::identity(&l.sector));
    let est = e.estimate(&prep, &[Tree::noise(2)]).unwrap().remove(0);
    assert!(est.mean.abs() <= 3.0 * est.stderr, "{est:?}");
    assert_eq!(est.samples, 128);
    assert_eq!(est.n, Some(4));
}

#[test]
fn estimates_are_deterministic_and_stationary() {
    let l = small(|_| {}).unwrap();
    let prep = Arc::new(PreparationMap::identity(&l.sector));
    let t = ri_core::Tree::parse("(O() K(O()))", 2).unwrap();
    let e = l.ensemble();
    let a = e.estimate(&prep, std::slice::from_ref(&t)).unwrap();
    let b = e.estimate(&prep, std::slice::from_ref(&t)).unwrap();
    assert_eq!(a, b);
    let mut e2 = e.clone();
    e2.base_point = l.base_points()[1];
    let c = e2.estimate(&prep, std::slice::from_ref(&t)).unwrap();
    let (x, y) = (&a[0], &c[0]);
    let tol = 3.0 * (x.stderr.powi(2) + y.stderr.powi(2)).sqrt();
    assert!((x.mean - y.mean).abs() <= tol, "{x:?} vs {y:?}");
    assert!(x.mean > 0.0);
}

#[test]
fn values_reject_bad_trees() {
    let l = small(|_| {}).unwrap();
    let prep = Arc::new(PreparationMap::identity(&l.sector));
    let e = l.ensemble();
    let x1 = Tree::poly(MultiIndex::unit(2, 0));
    assert!(matches!(e.values(&prep, &[x1], None), Err(ri_core::Error::Precondition(_))));
    let h = Tree::parse("(H())", 2).unwrap();
    assert!(matches!(e.values(&prep, &[h], None), Err(ri_core::Error::Precondition(_))));
}

#[test]
fn solver_zeroes_expectations() {
    let l = small(|v| v["samples"] = 64.into()).unwrap();
    let e = l.ensemble();
    let (c, report) = solve_bphz_c(&e, None).unwrap();
    assert_eq!(report.len(), l.sector.b_minus().len());
    let prep = Arc::new(ri_core::renorm::make_rc(&c, &l.sector).unwrap());
    for est in e.estimate(&prep, &l.sector.b_minus()).unwrap() {
        assert!(est.mean.abs() <= 1e-9 * (1.0 + est.stderr), "{est:?}");
    }
    assert!(matches!(solve_bphz_c(&e, Some(1e-30)), Err(ri_core::Error::NonConvergent(_))));
}

#[test]
fn levels_share_samples() {
    let l = small(|v| v["samples"] = 32.into()).unwrap();
    let e = l.ensemble();
    let prep = Arc::new(PreparationMap::identity(&l.sector));
    let t = Tree::parse("(O() K(O()))", 2).unwrap();
    let s = level_study(&e, &prep, &[t], &[2, 3, 4]).unwrap().remove(0);
    assert_eq!(s.means.len(), 3);
    assert_eq!(s.increments.len(), 2);
    assert_eq!(s.increment_changes.len(), 1);
    assert!((s.increments[0].0 - (s.means[1].0 - s.means[0].0)).abs() < 1e-12);
}

#[test]
fn scaling_fit_rejects_bad_ranges() {
    let l = small(|_| {}).unwrap();
    let prep = Arc::new(PreparationMap::identity(&l.sector));
    let e = l.ensemble();
    let o = Tree::noise(2);
    let pts = l.base_points();
    let inf = Exponent::infinity();
    assert!(scaling_fit(&e, &prep, &o, &inf, &pts, &[0.1], 0, 0).is_err());
    assert!(scaling_fit(&e, &prep, &o, &inf, &pts, &[1e-6, 0.1], 0, 0).is_err());
    assert!(scaling_fit(&e, &prep, &o, &inf, &pts, &[0.1, 0.5], 0, 0).is_err());
    let f = scaling_fit(&e, &prep, &o, &inf, &pts, &[1.0 / 16.0, 1.0 / 8.0, 0.25], 50, 1).unwrap();
    assert!((f.expected + 0.525).abs() < 1e-12);
    assert!(f.ci.0 <= f.ci.1);
    assert_eq!(f.series.len(), 3);
}

#[test]
fn mean_stderr_edge_cases() {
    assert!(mean_stderr(&[]).0.is_nan());
    assert_eq!(mean_stderr(&[2.0]), (2.0, f64::INFINITY));
    let (m, s) = mean_stderr(&[1.0, 3.0]);
    assert_eq!(m, 2.0);
    assert!((s - 1.0).abs() < 1e-15);
    assert_eq!("qbar".parse::<Mode>().unwrap(), Mode::Qbar);
    assert!("mean".parse::<Mode>().is_err());
}

#[test]
fn config_resolve_errors() {
    assert!(small(|v| v["grid"]["sizes"] = serde_json::json!([8, 8])).is_err());
    assert!(small(|v| v["grid"]["sizes"] = serde_json::json!([32, 32, 32])).is_err());
    assert!(small(|v| v["operator"] = serde_json::json!({"preset": "biharmonic"})).is_err());
    assert!(small(|v| v["operator"] = serde_json::json!({"preset": "wave"})).is_err());
    assert!(small(|v| v["basePoints"] = serde_json::json!([[40, 0]])).is_err());
    assert!(small(|v| v["rule"] = "missing.json".into()).is_err());
    assert!(NumericConfig::from_json("{").is_err());
    for f in ["numeric_2d.json", "numeric_3d.json", "scaling_2d.json"] {
        NumericConfig::load(&configs().join(f)).unwrap();
    }
}
