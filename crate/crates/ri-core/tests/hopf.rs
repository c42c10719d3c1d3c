mod common;

use common::{pam, t3};
use proptest::prelude::*;
use ri_core::grading::{Exponent, Params};
use ri_core::hopf::{tensor_from_json, tensor_to_json, Character, Hopf};
use ri_core::lincomb::{LinComb, TensorSum};
use ri_core::rational::{binomial, q, qi, Q};
use ri_core::{Label, MultiIndex, Tree};

fn pam_hopf(p: &str) -> Hopf {
    Hopf::new(Params::pam3d(), q(1, 100), Exponent::parse(p).unwrap())
}

fn one() -> Tree {
    Tree::one(3)
}

fn x(j: usize) -> Tree {
    Tree::poly(MultiIndex::unit(3, j))
}

#[test]
fn polynomial_coproduct_is_binomial() {
    let h = pam_hopf("inf");
    let k = MultiIndex(vec![2, 1, 0]);
    let mut want = TensorSum::zero();
    for l in k.below() {
        let c: Q = l.0.iter().zip(&k.0).map(|(&a, &b)| Q::from_integer(binomial(b, a))).product();
        want.add_term((Tree::poly(l.clone()), Tree::poly(k.checked_sub(&l).unwrap())), c);
    }
    assert_eq!(h.coproduct(&Tree::poly(k.clone())).unwrap(), want);
    assert_eq!(Hopf::poly_delta(&k), want);
}

#[test]
fn noise_coproduct() {
    for p in ["2", "5", "inf"] {
        let h = pam_hopf(p);
        let o = Tree::noise(3);
        assert_eq!(h.coproduct(&o).unwrap(), TensorSum::single((o, one()), qi(1)));
    }
}

#[test]
fn worked_example_terms() {
    let t = t3("(O() K(H()))");
    for (p, n) in [("inf", 2), ("6", 2), ("5", 5), ("2", 5)] {
        let h = pam_hopf(p);
        let r = h.coproduct(&t).unwrap();
        assert_eq!(r, h.coproduct_graphical(&t).unwrap());
        assert_eq!(r.len(), n, "p = {p}");
        assert!(r.iter().all(|(_, c)| *c == qi(1)));
        assert!(r.contains(&(Tree::noise(3), t3("(K(H()))"))));
        assert!(r.contains(&(t.clone(), one())));
    }
}

#[test]
fn plus_coproducts() {
    let h = pam_hopf("inf");
    for j in 0..3 {
        let mut want = TensorSum::zero();
        want.add_term((x(j), one()), qi(1));
        want.add_term((one(), x(j)), qi(1));
        assert_eq!(h.coproduct_plus(&x(j)).unwrap(), want);
    }
    let g = t3("(K(O()))");
    let mut want = TensorSum::zero();
    want.add_term((g.clone(), one()), qi(1));
    want.add_term((one(), g.clone()), qi(1));
    assert_eq!(h.coproduct_plus(&g).unwrap(), want);
}

#[test]
fn plus_projection() {
    let h = pam_hopf("2");
    for l in MultiIndex(vec![2, 2, 2]).below() {
        let f = Tree::planted_raw(Label::Omega, l, one());
        assert!(!h.forest_survives(&f).unwrap());
        assert!(h.project_plus(&LinComb::basis(f)).unwrap().is_empty());
    }
    let g = LinComb::basis(t3("(K(O()))"));
    assert_eq!(h.project_plus(&g).unwrap(), g);
}

#[test]
fn antipode_values() {
    let h = pam_hopf("inf");
    for j in 0..3 {
        assert_eq!(h.antipode(&x(j)).unwrap(), LinComb::single(x(j), qi(-1)));
    }
    let g = t3("(K(O()))");
    assert_eq!(h.antipode(&g).unwrap(), LinComb::single(g, qi(-1)));
    assert!(h.antipode_generator(&t3("(O())")).is_err());
}

#[test]
fn graphical_matches_recursive_on_sector() {
    let s = pam();
    for p in ["2", "5", "6", "inf"] {
        let h = pam_hopf(p);
        for t in s.all() {
            assert_eq!(h.coproduct(&t).unwrap(), h.coproduct_graphical(&t).unwrap(), "{t} at p = {p}");
        }
    }
}

#[test]
fn hopf_identities_on_generators() {
    let s = pam();
    for p in ["2", "5", "inf"] {
        let h = pam_hopf(p);
        let ex = Exponent::parse(p).unwrap();
        for g in s.w_generators(&s.all(), &s.eps_ref, &ex).unwrap() {
            assert!(h.coassociativity_defect(&g).unwrap().is_empty(), "{g}");
            let (l, r) = h.antipode_defects(&g).unwrap();
            assert!(l.is_empty() && r.is_empty(), "{g}");
        }
        for t in s.all() {
            assert!(h.comodule_defect(&t).unwrap().is_empty(), "{t}");
        }
    }
}

#[test]
fn tensor_json_round_trip() {
    let r = pam_hopf("5").coproduct(&t3("(O() K(H()))")).unwrap();
    assert_eq!(tensor_from_json(&tensor_to_json(&r), 3).unwrap(), r);
}

fn generators(h: &Hopf) -> Vec<Tree> {
    let s = pam();
    let mut g = s.w_generators(&s.all(), &s.eps_ref, &h.dm.p).unwrap();
    g.extend((0..3).map(x));
    g
}

fn character(gens: &[Tree], seed: u64) -> Character<Q> {
    let mut c = Character::new();
    for (i, g) in gens.iter().enumerate() {
        let v = (seed.wrapping_mul(2654435761).wrapping_add(i as u64 * 40503) % 23) as i64 - 11;
        c.set(g.clone(), q(v, 1 + (i as i64 % 5)));
    }
    c
}

#[test]
fn recentering_polynomials() {
    let h = pam_hopf("inf");
    let (mut gy, mut gx) = (Character::<Q>::new(), Character::<Q>::new());
    let (y, xv) = ([q(1, 2), qi(3), q(-1, 3)], [qi(2), q(1, 5), qi(1)]);
    for j in 0..3 {
        gy.set_x(3, j, y[j].clone());
        gx.set_x(3, j, xv[j].clone());
        assert_eq!(h.char_recenter(&gy, &gx, &x(j)).unwrap(), &y[j] - &xv[j]);
    }
    let k = MultiIndex(vec![2, 1, 0]);
    let gyx = |f: &Tree| h.char_recenter(&gy, &gx, f);
    let got = h.gamma(&gyx, &Tree::poly(k.clone())).unwrap();
    let mut want = LinComb::zero();
    for l in k.below() {
        let mut c = Q::from_integer(1.into());
        for j in 0..3 {
            c *= Q::from_integer(binomial(k.0[j], l.0[j]));
            for _ in 0..l.0[j] {
                c *= &y[j] - &xv[j];
            }
        }
        want.add_term(Tree::poly(k.checked_sub(&l).unwrap()), c);
    }
    assert_eq!(got, want);
    assert_eq!(h.gamma(&gyx, &Tree::noise(3)).unwrap(), LinComb::basis(Tree::noise(3)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn recentering_is_a_cocycle(a in any::<u64>(), b in any::<u64>(), c in any::<u64>(), p in 0usize..3) {
        let h = pam_hopf(["2", "5", "inf"][p]);
        let gens = generators(&h);
        let (gz, gy, gx) = (character(&gens, a), character(&gens, b), character(&gens, c));
        let zy = |f: &Tree| h.char_recenter(&gz, &gy, f);
        let yx = |f: &Tree| h.char_recenter(&gy, &gx, f);
        for mu in &gens {
            prop_assert_eq!(h.convolve(&zy, &yx, mu).unwrap(), h.char_recenter(&gz, &gx, mu).unwrap());
            prop_assert_eq!(h.char_recenter(&gx, &gx, mu).unwrap(), Hopf::counit(mu));
        }
        for t in pam().all().iter().filter(|t| t.omega_count() <= 2) {
            let once = h.gamma(&yx, t).unwrap();
            let mut twice = LinComb::zero();
            for (s, k) in once.iter() {
                twice.add_scaled(&h.gamma(&zy, s).unwrap(), k);
            }
            prop_assert_eq!(twice, h.gamma(&|f: &Tree| h.char_recenter(&gz, &gx, f), t).unwrap());
        }
    }

    #[test]
    fn coproduct_is_multiplicative(i in 0usize..64, j in 0usize..64) {
        let all: Vec<Tree> = pam().all().into_iter().filter(|t| t.omega_count() + t.h_count() <= 2).collect();
        let (a, b) = (&all[i % all.len()], &all[j % all.len()]);
        let h = pam_hopf("inf");
        let ab = h.coproduct(&a.product(b));
        prop_assume!(ab.is_ok());
        prop_assert_eq!(ab.unwrap(), h.coproduct(a).unwrap().mul(&h.coproduct(b).unwrap()));
    }
}
