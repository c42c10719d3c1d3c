mod common;

use common::{pam, sector, t3};
use proptest::prelude::*;
use ri_core::grading::{Exponent, Params};
use ri_core::lincomb::LinComb;
use ri_core::rational::{q, qi};
use ri_core::sector::*;
use ri_core::{Label, MultiIndex, Tree};

#[test]
fn derivation_example() {
    let t = t3("(O() K(K(O()) K(O())))");
    let mut want = LinComb::zero();
    want.add_term(t3("(O() K(K(O()) K(H())))"), qi(2));
    want.add_term(t3("(H() K(K(O()) K(O())))"), qi(1));
    assert_eq!(derive(&t).unwrap(), want);
    assert!(derive(&Tree::poly(MultiIndex(vec![1, 2, 0]))).unwrap().is_empty());
    assert!(derive(&t3("(H())")).is_err());
}

#[test]
fn pam_sector_shape() {
    let s = pam();
    for t in ["(O())", "(O() K(O()))", "(O() K(O()) K(O()))"] {
        assert!(s.b_circ.contains(&t3(t)), "{t}");
    }
    assert!(s.dot.contains(&t3("(O() K(H()))")));
    assert!(s.polys.contains(&Tree::one(3)));
    assert!(s.b_circ.iter().all(omega_leaves_ok));
    assert!(s.b_minus().contains(&t3("(O() K(O()))")));
    assert!(s.b_minus().contains(&t3("(n=(1,0,0) O())")));
    for p in ["2", "5", "inf"] {
        let p = Exponent::parse(p).unwrap();
        let r = s.check_differentiable(&s.eps_ref, &p).unwrap();
        assert!(r.ok, "{r:?}");
        assert!(s.check_triangularity(&s.eps_ref, &p).unwrap().ok);
    }
}

#[test]
fn two_omega_bound_gives_noise_only() {
    let text = std::fs::read_to_string(common::config("pam3d.json")).unwrap();
    let mut spec = RuleSpec::from_json(&text).unwrap();
    spec.max_omega = 2;
    spec.complete = false;
    let s = Sector::generate(&spec).unwrap();
    // The root types admit a lone K edge, so the planted noise conforms too.
    assert_eq!(s.b_circ, vec![Tree::noise(3), t3("(K(O()))")]);
    spec.max_omega = 1;
    assert!(Sector::generate(&spec).is_err());
}

#[test]
fn rule_validation() {
    let z = MultiIndex::zero(3);
    let ok = Rule::new(vec![vec![], vec![(Label::Omega, z.clone()), (Label::K, z.clone())]], None).unwrap();
    assert!(ok.k_types.contains(&vec![(Label::K, z.clone())]));
    assert!(ok.k_types.contains(&vec![(Label::Omega, z.clone())]));
    assert!(Rule::new(vec![vec![(Label::Omega, MultiIndex::unit(3, 0))]], None).is_err());
    assert!(Rule::new(vec![vec![(Label::Omega, z.clone()), (Label::Omega, z.clone())]], None).is_err());
    assert!(Rule::new(vec![vec![(Label::H, z)]], None).is_err());
}

fn constructed(trees: &[&str]) -> Sector {
    Sector::from_trees(Params::pam3d(), q(1, 100), qi(1), trees.iter().map(|t| t3(t)).collect())
}

#[test]
fn constructed_violations() {
    let eps = q(1, 100);
    let inf = Exponent::infinity();
    let r = constructed(&["(O() K(O()))"]).check_differentiable(&eps, &inf).unwrap();
    assert_eq!(r.property.as_deref(), Some("a"));
    let r = constructed(&["(O())", "(K(O(O())))"]).check_differentiable(&eps, &inf).unwrap();
    assert_eq!(r.property.as_deref(), Some("b"));
    // The inner tree O K(O) is missing, so I(O K(O)) is not a generator.
    let r = constructed(&["(O())", "(O() K(O() K(O())))"]).check_differentiable(&eps, &inf).unwrap();
    assert!(!r.ok);
    assert!(matches!(r.property.as_deref(), Some("c") | Some("d")), "{r:?}");
    let r = constructed(&["(O())", "(O() K(O()))", "(O() K(O() K(O())))"]).check_differentiable(&eps, &inf).unwrap();
    assert!(r.ok, "{r:?}");
}

#[test]
fn precedence() {
    let s = pam();
    let o = Tree::noise(3);
    assert_eq!(s.precede(&t3("(H())"), &o), Precedence::Less);
    assert_eq!(s.precede(&Tree::poly(MultiIndex(vec![3, 0, 0])), &o), Precedence::Less);
    assert_eq!(s.precede(&o, &o), Precedence::Equal);
    let mut lower = s.strict_lower_set(&o);
    lower.sort();
    let mut want: Vec<Tree> = s.all().into_iter().filter(|t| t.omega_count() == 0).collect();
    want.sort();
    assert_eq!(lower, want);
    assert!(lower.contains(&t3("(H())")) && s.polys.iter().all(|p| lower.contains(p)));
    let ex = s.strict_lower_set(&t3("(O() K(H()))"));
    assert!(ex.contains(&o) && ex.contains(&t3("(H())")));
    assert!(ex.iter().all(|t| t.omega_count() <= 1 && t.edge_count() <= 3));
}

#[test]
fn filtration_stages() {
    let s = pam();
    let st = s.filtration(&s.eps_ref, &Exponent::infinity()).unwrap();
    assert_eq!(st.len(), s.b_circ.len());
    assert_eq!(st[0].tau, Tree::noise(3));
    for w in st.windows(2) {
        assert!(w[0].v.iter().all(|t| w[1].v.contains(t)));
        assert!(w[0].w.iter().all(|t| w[1].w.contains(t)));
    }
    let last = st.last().unwrap();
    assert_eq!(last.v.len(), s.polys.len() + s.b_circ.len());
}

#[test]
fn two_dimensional_rule() {
    let s = sector("rule2d.json");
    let mut b = s.b_minus();
    b.sort();
    let mut want: Vec<Tree> = ["(n=(1,0) O())", "(n=(0,1) O())", "(O() K(O()))"].iter().map(|t| Tree::parse(t, 2).unwrap()).collect();
    want.sort();
    assert_eq!(b, want);
}

proptest! {
    #[test]
    fn lower_sets_are_monotone(i in 0usize..1000, j in 0usize..1000) {
        let s = pam();
        let all = s.all();
        let (a, b) = (&all[i % all.len()], &all[j % all.len()]);
        if s.precede(a, b) == Precedence::Less {
            let lb = s.strict_lower_set(b);
            prop_assert!(s.strict_lower_set(a).iter().all(|t| lb.contains(t)));
        }
    }
}
