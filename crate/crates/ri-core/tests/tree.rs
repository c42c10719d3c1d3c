mod common;

use common::{arb_tree, pam, shuffled, t3};
use proptest::prelude::*;
use ri_core::lincomb::LinComb;
use ri_core::rational::q;
use ri_core::tree::{RawTree, TreeStats};
use ri_core::{Edge, Label, MultiIndex, Tree};

#[test]
fn single_node_is_polynomial() {
    let k = MultiIndex(vec![2, 0, 1]);
    let t = Tree::poly(k.clone());
    assert!(t.is_poly());
    assert_eq!(t.n(), &k);
    assert_eq!(t, t3("(n=(2,0,1))"));
}

#[test]
fn planar_embeddings_collapse() {
    // Root with two isomorphic K-branches and an Omega leaf: every ordering
    // gives one canonical form.
    let br = "K(O())";
    let parts = ["O()", br, br, "n=(1,0,0)"];
    let mut seen = std::collections::BTreeSet::new();
    let mut perm = [0, 1, 2];
    let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for o in orders {
        perm.copy_from_slice(&o);
        let body: Vec<&str> = perm.iter().map(|&i| parts[i]).collect();
        let t = t3(&format!("({} {})", parts[3], body.join(" ")));
        assert_eq!(t.number_of_nodes(), 6);
        seen.insert(t.encode());
    }
    assert_eq!(seen.len(), 1);
}

#[test]
fn product_of_noise_and_planted_noise() {
    let o = Tree::noise(3);
    let io = Tree::plant(Label::K, MultiIndex::zero(3), &o).unwrap();
    assert_eq!(o.product(&io), t3("(O() K(O()))"));
}

#[test]
fn planting() {
    let z = MultiIndex::zero(3);
    assert_eq!(Tree::plant(Label::Omega, z.clone(), &Tree::one(3)).unwrap(), Tree::noise(3));
    assert!(Tree::plant(Label::K, MultiIndex::unit(3, 1), &Tree::poly(MultiIndex::unit(3, 0))).is_none());
    let e1 = MultiIndex::unit(3, 0);
    assert_eq!(Tree::plant(Label::H, e1.clone(), &Tree::one(3)).unwrap(), Tree::hnoise(e1));
}

#[test]
fn ideal_quotient() {
    let k_leaf = Tree::planted_raw(Label::K, MultiIndex::zero(3), Tree::one(3));
    assert!(k_leaf.has_k_leaf());
    let mut v = LinComb::zero();
    v.add_term(k_leaf.clone(), q(5, 1));
    assert!(v.quotient_by_k_leaves().is_empty());

    let mut mixed = LinComb::zero();
    mixed.add_term(Tree::noise(3), q(2, 3));
    mixed.add_term(t3("(O() K())"), q(7, 1));
    mixed.add_term(t3("(O() K(O()))"), q(-1, 4));
    let r = mixed.quotient_by_k_leaves();
    assert_eq!(r.len(), 2);
    assert_eq!(r.get(&Tree::noise(3)), q(2, 3));
    assert_eq!(r.get(&t3("(O() K(O()))")), q(-1, 4));
}

#[test]
fn stats_of_worked_example() {
    assert_eq!(t3("(O() K(H()))").stats(), TreeStats { omega: 1, edges: 3, h: 1 });
}

#[test]
fn parse_errors() {
    assert!(Tree::parse("(O()", 3).is_err());
    assert!(Tree::parse("(X())", 3).is_err());
    assert!(Tree::parse("(n=(1,0))", 3).is_err());
    assert!(Tree::parse("(O()) x", 3).is_err());
    assert!(RawTree::parse("( O ( ) K ^ (1,0,0) ( H ( ) ) )").is_ok());
}

#[test]
fn sector_round_trip() {
    for t in pam().all().iter().filter(|t| t.omega_count() <= 3) {
        assert_eq!(&Tree::parse(&t.encode(), 3).unwrap(), t);
    }
}

proptest! {
    #[test]
    fn product_commutes(a in arb_tree(), b in arb_tree()) {
        prop_assert_eq!(a.product(&b), b.product(&a));
    }

    #[test]
    fn product_associates_with_unit(a in arb_tree(), b in arb_tree(), c in arb_tree()) {
        prop_assert_eq!(a.product(&b).product(&c), a.product(&b.product(&c)));
        prop_assert_eq!(a.product(&Tree::one(3)), a.clone());
        prop_assert_eq!(Tree::one(3).product(&a), a);
    }

    #[test]
    fn encode_round_trips(t in arb_tree()) {
        prop_assert_eq!(Tree::parse(&t.encode(), 3).unwrap(), t);
    }

    #[test]
    fn canonical_under_permutation(t in arb_tree(), seed in any::<u64>()) {
        let s = shuffled(&t, seed);
        prop_assert_eq!(s.encode(), t.encode());
        prop_assert!(s.ptr_eq(&t));
    }

    #[test]
    fn stats_add_under_product(a in arb_tree(), b in arb_tree()) {
        let p = a.product(&b);
        prop_assert_eq!(p.omega_count(), a.omega_count() + b.omega_count());
        prop_assert_eq!(p.h_count(), a.h_count() + b.h_count());
        prop_assert_eq!(p.edge_count(), a.edge_count() + b.edge_count());
        prop_assert_eq!(p.has_k_leaf(), a.has_k_leaf() || b.has_k_leaf());
    }

    #[test]
    fn factors_rebuild(t in arb_tree()) {
        let (poly, planted) = t.factors();
        let back = planted.iter().fold(poly, |acc, f| acc.product(f));
        prop_assert_eq!(back, t);
    }

    #[test]
    fn planted_edge_is_single(t in arb_tree(), l in 0usize..3) {
        let p = Tree::planted_raw(Label::ALL[l], MultiIndex::zero(3), t.clone());
        let e: &Edge = p.as_planted().unwrap();
        prop_assert_eq!(&e.child, &t);
        prop_assert_eq!(p.number_of_nodes(), t.number_of_nodes() + 1);
    }
}
