#![allow(dead_code)]

use proptest::prelude::*;
use ri_core::sector::{RuleSpec, Sector};
use ri_core::{Edge, Label, MultiIndex, Tree};
use std::sync::{Arc, OnceLock};

pub fn config(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn sector(name: &str) -> Sector {
    let text = std::fs::read_to_string(config(name)).unwrap();
    Sector::generate(&RuleSpec::from_json(&text).unwrap()).unwrap()
}

pub fn pam() -> Arc<Sector> {
    static S: OnceLock<Arc<Sector>> = OnceLock::new();
    S.get_or_init(|| Arc::new(sector("pam3d.json"))).clone()
}

pub fn t3(s: &str) -> Tree {
    Tree::parse(s, 3).unwrap()
}

fn mi3() -> impl Strategy<Value = MultiIndex> {
    prop_oneof![
        3 => Just(MultiIndex::zero(3)),
        1 => (0u32..2, 0u32..2, 0u32..2).prop_map(|(a, b, c)| MultiIndex(vec![a, b, c])),
    ]
}

/// Random decorated trees in d = 3, possibly with K leaves.
pub fn arb_tree() -> impl Strategy<Value = Tree> {
    let leaf = mi3().prop_map(Tree::poly);
    leaf.prop_recursive(3, 12, 3, |inner| {
        (mi3(), prop::collection::vec((0usize..3, mi3(), inner), 0..3)).prop_map(|(n, ch)| {
            let edges = ch.into_iter().map(|(l, k, child)| Edge { label: Label::ALL[l], deco: k, child }).collect();
            Tree::new(n, edges)
        })
    })
}

/// Rebuilds `t` with every child list permuted by `seed`.
pub fn shuffled(t: &Tree, seed: u64) -> Tree {
    let mut ch: Vec<Edge> = t
        .children()
        .iter()
        .enumerate()
        .map(|(i, e)| Edge { label: e.label, deco: e.deco.clone(), child: shuffled(&e.child, seed.wrapping_mul(31).wrapping_add(i as u64)) })
        .collect();
    let n = ch.len();
    for i in (1..n).rev() {
        let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) >> 33) as usize % (i + 1);
        ch.swap(i, j);
    }
    ch.reverse();
    Tree::new(t.n().clone(), ch)
}
