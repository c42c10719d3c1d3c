//! Canonical decorated rooted trees.
//!
//! Trees are hash-consed: structurally equal trees share one allocation, so
//! equality is a pointer comparison once both sides are interned.

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;
use once_cell::sync::Lazy;
use parking_lot::Mutex;
use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Label {
    Omega,
    H,
    K,
}

impl Label {
    pub fn symbol(self) -> char {
        match self {
            Label::Omega => 'O',
            Label::H => 'H',
            Label::K => 'K',
        }
    }

    pub fn from_symbol(c: char) -> Option<Label> {
        match c {
            'O' => Some(Label::Omega),
            'H' => Some(Label::H),
            'K' => Some(Label::K),
            _ => None,
        }
    }

    pub const ALL: [Label; 3] = [Label::Omega, Label::H, Label::K];
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Edge {
    pub label: Label,
    pub deco: MultiIndex,
    pub child: Tree,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct TreeStats {
    pub omega: usize,
    pub edges: usize,
    pub h: usize,
}

pub struct Node {
    n: MultiIndex,
    children: Vec<Edge>,
    hash: u64,
    omega: usize,
    hcount: usize,
    kcount: usize,
    edges: usize,
    k_leaf: bool,
    /// Σ𝔫 − Σ𝔢, componentwise.
    dsum: Vec<i64>,
}

#[derive(Clone)]
pub struct Tree(Arc<Node>);

struct Key(Arc<Node>);

impl Hash for Key {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (&self.0, &other.0);
        a.hash == b.hash
            && a.n == b.n
            && a.children.len() == b.children.len()
            && a.children.iter().zip(&b.children).all(|(x, y)| {
                x.label == y.label && x.deco == y.deco && Arc::ptr_eq(&x.child.0, &y.child.0)
            })
    }
}

impl Eq for Key {}

static INTERNER: Lazy<Mutex<HashSet<Key>>> = Lazy::new(|| Mutex::new(HashSet::new()));

fn node_hash(n: &MultiIndex, children: &[Edge]) -> u64 {
    let mut h = DefaultHasher::new();
    n.hash(&mut h);
    children.len().hash(&mut h);
    for e in children {
        e.label.hash(&mut h);
        e.deco.hash(&mut h);
        h.write_u64(e.child.0.hash);
    }
    h.finish()
}

impl Tree {
    /// Builds the canonical tree with root decoration `n` and the given edges
    /// in any order.
    pub fn new(n: MultiIndex, mut children: Vec<Edge>) -> Tree {
        children.sort();
        let d = n.dim();
        let mut dsum: Vec<i64> = n.0.iter().map(|&x| x as i64).collect();
        let (mut omega, mut hcount, mut kcount, mut edges, mut k_leaf) = (0, 0, 0, 0, false);
        for e in &children {
            debug_assert_eq!(e.deco.dim(), d);
            let c = &e.child.0;
            edges += 1 + c.edges;
            omega += c.omega;
            hcount += c.hcount;
            kcount += c.kcount;
            match e.label {
                Label::Omega => omega += 1,
                Label::H => hcount += 1,
                Label::K => {
                    kcount += 1;
                    if c.children.is_empty() {
                        k_leaf = true;
                    }
                }
            }
            k_leaf |= c.k_leaf;
            for j in 0..d {
                dsum[j] += c.dsum[j] - e.deco.0[j] as i64;
            }
        }
        let hash = node_hash(&n, &children);
        let node = Arc::new(Node { n, children, hash, omega, hcount, kcount, edges, k_leaf, dsum });
        let mut set = INTERNER.lock();
        if let Some(k) = set.get(&Key(node.clone())) {
            return Tree(k.0.clone());
        }
        set.insert(Key(node.clone()));
        Tree(node)
    }

    pub fn poly(k: MultiIndex) -> Tree {
        Tree::new(k, Vec::new())
    }

    pub fn one(d: usize) -> Tree {
        Tree::poly(MultiIndex::zero(d))
    }

    /// 𝓘_k^𝔩(t) with no ideal applied.
    pub fn planted_raw(label: Label, k: MultiIndex, t: Tree) -> Tree {
        let d = k.dim();
        Tree::new(MultiIndex::zero(d), vec![Edge { label, deco: k, child: t }])
    }

    /// 𝓘_k^𝔩(t), or `None` when it lies in the K-leaf ideal.
    pub fn plant(label: Label, k: MultiIndex, t: &Tree) -> Option<Tree> {
        let r = Tree::planted_raw(label, k, t.clone());
        if r.has_k_leaf() {
            None
        } else {
            Some(r)
        }
    }

    /// The noise leaf ○ = 𝓘_0^Ω(•).
    pub fn noise(d: usize) -> Tree {
        Tree::planted_raw(Label::Omega, MultiIndex::zero(d), Tree::one(d))
    }

    /// ⊙_k = 𝓘_k^H(•).
    pub fn hnoise(k: MultiIndex) -> Tree {
        let d = k.dim();
        Tree::planted_raw(Label::H, k, Tree::one(d))
    }

    pub fn n(&self) -> &MultiIndex {
        &self.0.n
    }

    pub fn children(&self) -> &[Edge] {
        &self.0.children
    }

    pub fn dim(&self) -> usize {
        self.0.n.dim()
    }

    pub fn stats(&self) -> TreeStats {
        TreeStats { omega: self.0.omega, edges: self.0.edges, h: self.0.hcount }
    }

    pub fn omega_count(&self) -> usize {
        self.0.omega
    }

    pub fn h_count(&self) -> usize {
        self.0.hcount
    }

    pub fn k_count(&self) -> usize {
        self.0.kcount
    }

    pub fn edge_count(&self) -> usize {
        self.0.edges
    }

    pub fn dsum(&self) -> &[i64] {
        &self.0.dsum
    }

    pub fn has_k_leaf(&self) -> bool {
        self.0.k_leaf
    }

    pub fn is_poly(&self) -> bool {
        self.0.children.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.is_poly() && self.0.n.is_zero()
    }

    /// A single planted factor 𝓘_k^𝔩(τ) with undecorated root.
    pub fn as_planted(&self) -> Option<&Edge> {
        if self.0.n.is_zero() && self.0.children.len() == 1 {
            Some(&self.0.children[0])
        } else {
            None
        }
    }

    pub fn ptr_eq(&self, o: &Tree) -> bool {
        Arc::ptr_eq(&self.0, &o.0)
    }

    pub fn product(&self, o: &Tree) -> Tree {
        if self.is_one() {
            return o.clone();
        }
        if o.is_one() {
            return self.clone();
        }
        let mut ch = self.0.children.clone();
        ch.extend(o.0.children.iter().cloned());
        Tree::new(self.0.n.add(&o.0.n), ch)
    }

    pub fn with_root(&self, n: MultiIndex) -> Tree {
        Tree::new(n, self.0.children.clone())
    }

    /// Factors of the forest view: X^n and the planted pieces.
    pub fn factors(&self) -> (Tree, Vec<Tree>) {
        let d = self.dim();
        let poly = Tree::poly(self.0.n.clone());
        let planted = self
            .0
            .children
            .iter()
            .map(|e| Tree::new(MultiIndex::zero(d), vec![e.clone()]))
            .collect();
        (poly, planted)
    }

    /// Every tree obtained from `self` by relabelling exactly one edge with
    /// label `from` to `to`, one entry per edge.
    pub fn relabel_each(&self, from: Label, to: Label) -> Vec<Tree> {
        let mut out = Vec::new();
        let ch = &self.0.children;
        for (i, e) in ch.iter().enumerate() {
            let rest = |edge: Edge| {
                let mut v = ch.clone();
                v[i] = edge;
                Tree::new(self.0.n.clone(), v)
            };
            if e.label == from {
                out.push(rest(Edge { label: to, deco: e.deco.clone(), child: e.child.clone() }));
            }
            for c in e.child.relabel_each(from, to) {
                out.push(rest(Edge { label: e.label, deco: e.deco.clone(), child: c }));
            }
        }
        out
    }

    /// Relabels every edge with label `from` to `to`.
    pub fn relabel_all(&self, from: Label, to: Label) -> Tree {
        let ch = self
            .0
            .children
            .iter()
            .map(|e| Edge {
                label: if e.label == from { to } else { e.label },
                deco: e.deco.clone(),
                child: e.child.relabel_all(from, to),
            })
            .collect();
        Tree::new(self.0.n.clone(), ch)
    }

    pub fn number_of_nodes(&self) -> usize {
        self.0.edges + 1
    }

    pub fn parse(text: &str, d: usize) -> Result<Tree> {
        canonicalize(&RawTree::parse(text)?, d)
    }

    pub fn encode(&self) -> String {
        let mut s = String::new();
        self.write_into(&mut s);
        s
    }

    fn write_into(&self, s: &mut String) {
        s.push('(');
        let mut first = true;
        if !self.0.n.is_zero() {
            s.push_str("n=");
            s.push_str(&self.0.n.to_string());
            first = false;
        }
        for e in &self.0.children {
            if !first {
                s.push(' ');
            }
            first = false;
            s.push(e.label.symbol());
            if !e.deco.is_zero() {
                s.push('^');
                s.push_str(&e.deco.to_string());
            }
            e.child.write_into(s);
        }
        s.push(')');
    }
}

impl PartialEq for Tree {
    fn eq(&self, o: &Tree) -> bool {
        Arc::ptr_eq(&self.0, &o.0)
    }
}

impl Eq for Tree {}

impl Hash for Tree {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl Ord for Tree {
    fn cmp(&self, o: &Tree) -> Ordering {
        if Arc::ptr_eq(&self.0, &o.0) {
            return Ordering::Equal;
        }
        self.0.n.cmp(&o.0.n).then_with(|| self.0.children.cmp(&o.0.children))
    }
}

impl PartialOrd for Tree {
    fn partial_cmp(&self, o: &Tree) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

/// A planar tree as written, before canonicalization.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct RawTree {
    pub n: Option<Vec<u32>>,
    pub children: Vec<(Label, Option<Vec<u32>>, RawTree)>,
}

impl RawTree {
    pub fn parse(text: &str) -> Result<RawTree> {
        let mut p = Parser { b: text.as_bytes(), i: 0 };
        p.ws();
        let t = p.tree()?;
        p.ws();
        if p.i != p.b.len() {
            return Err(p.err("trailing input"));
        }
        Ok(t)
    }
}

pub fn canonicalize(raw: &RawTree, d: usize) -> Result<Tree> {
    let mi = |v: &Option<Vec<u32>>| -> Result<MultiIndex> {
        match v {
            None => Ok(MultiIndex::zero(d)),
            Some(v) => {
                let m = MultiIndex(v.clone());
                m.check_dim(d)?;
                Ok(m)
            }
        }
    };
    let n = mi(&raw.n)?;
    let mut ch = Vec::with_capacity(raw.children.len());
    for (l, k, c) in &raw.children {
        ch.push(Edge { label: *l, deco: mi(k)?, child: canonicalize(c, d)? });
    }
    Ok(Tree::new(n, ch))
}

struct Parser<'a> {
    b: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax { offset: self.i, msg: msg.to_string() }
    }

    fn ws(&mut self) {
        while self.i < self.b.len() && self.b[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.b.get(self.i).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.ws();
        if self.peek() == Some(c) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", c as char)))
        }
    }

    fn tree(&mut self) -> Result<RawTree> {
        self.expect(b'(')?;
        self.ws();
        let mut t = RawTree::default();
        if self.peek() == Some(b'n') {
            self.i += 1;
            self.expect(b'=')?;
            t.n = Some(self.mi()?);
        }
        loop {
            self.ws();
            match self.peek() {
                Some(b')') => {
                    self.i += 1;
                    return Ok(t);
                }
                Some(c) if Label::from_symbol(c as char).is_some() => {
                    self.i += 1;
                    let l = Label::from_symbol(c as char).unwrap();
                    self.ws();
                    let mut k = None;
                    if self.peek() == Some(b'^') {
                        self.i += 1;
                        k = Some(self.mi()?);
                    }
                    let c = self.tree()?;
                    t.children.push((l, k, c));
                }
                Some(_) => return Err(self.err("expected label, 'n=' or ')'")),
                None => return Err(self.err("unexpected end of input")),
            }
        }
    }

    fn mi(&mut self) -> Result<Vec<u32>> {
        self.expect(b'(')?;
        let mut v = Vec::new();
        loop {
            self.ws();
            let start = self.i;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.i += 1;
            }
            if start == self.i {
                return Err(self.err("expected nonnegative integer"));
            }
            let s = std::str::from_utf8(&self.b[start..self.i]).unwrap();
            let x: u32 = s.parse().map_err(|_| Error::Syntax { offset: start, msg: "integer overflow".into() })?;
            v.push(x);
            self.ws();
            match self.peek() {
                Some(b',') => self.i += 1,
                Some(b')') => {
                    self.i += 1;
                    return Ok(v);
                }
                _ => return Err(self.err("expected ',' or ')'")),
            }
        }
    }
}
