//! Rule-driven sectors, the derivative map D, the preorder and the V_i/W_i
//! filtration.

use crate::error::{Error, Result};
use crate::grading::{epsilon0, phase_sets, DegreeForm, DegreeMap, Exponent, Params, PhaseSets};
use crate::hopf::{node_decoration, Hopf};
use crate::lincomb::LinComb;
use crate::multiindex::MultiIndex;
use crate::rational::{fmt_q, parse_q, q, serde_q, Q};
use crate::tree::{Edge, Label, Tree};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

pub type Multiset = Vec<(Label, MultiIndex)>;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RuleSpec {
    pub params: Params,
    #[serde(rename = "K")]
    pub k: Vec<Vec<(String, Vec<u32>)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<Vec<Vec<(String, Vec<u32>)>>>,
    #[serde(rename = "maxOmega")]
    pub max_omega: usize,
    #[serde(rename = "L", with = "serde_q")]
    pub l: Q,
    #[serde(rename = "epsRef", default, skip_serializing_if = "Option::is_none")]
    pub eps_ref: Option<String>,
    #[serde(rename = "maxEdges", default, skip_serializing_if = "Option::is_none")]
    pub max_edges: Option<usize>,
    #[serde(default)]
    pub complete: bool,
}

impl RuleSpec {
    pub fn from_json(text: &str) -> Result<RuleSpec> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("rule file: {e}")))
    }
}

/// A normal rule: R(Ω) = {∅}, R(K) = `k_types`, plus the allowed root types.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub k_types: BTreeSet<Multiset>,
    pub root_types: BTreeSet<Multiset>,
}

fn sub_multisets(m: &Multiset) -> Vec<Multiset> {
    let n = m.len();
    let mut out = BTreeSet::new();
    for mask in 0u32..(1u32 << n) {
        let s: Multiset = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| m[i].clone()).collect();
        out.insert(s);
    }
    out.into_iter().collect()
}

fn normal_closure(sets: &[Multiset]) -> BTreeSet<Multiset> {
    let mut out = BTreeSet::new();
    for s in sets {
        for t in sub_multisets(s) {
            out.insert(t);
        }
    }
    out
}

impl Rule {
    pub fn new(k: Vec<Multiset>, root: Option<Vec<Multiset>>) -> Result<Rule> {
        for m in k.iter().chain(root.iter().flatten()) {
            for (l, _) in m {
                if *l == Label::H {
                    return Err(Error::Rule("rules may only use O and K".into()));
                }
            }
        }
        for m in &k {
            let om: Vec<_> = m.iter().filter(|(l, _)| *l == Label::Omega).collect();
            if om.len() > 1 || om.iter().any(|(_, k)| !k.is_zero()) {
                return Err(Error::Rule("a K type may hold at most one (O,0) element".into()));
            }
        }
        let sort = |mut v: Multiset| {
            v.sort();
            v
        };
        let k: Vec<Multiset> = k.into_iter().map(sort).collect();
        let k_types = normal_closure(&k);
        let root_types = match root {
            Some(r) => normal_closure(&r.into_iter().map(sort).collect::<Vec<_>>()),
            None => {
                let mut s = k_types.clone();
                s.insert(Vec::new());
                s
            }
        };
        Ok(Rule { k_types, root_types })
    }

    pub fn from_spec(spec: &RuleSpec) -> Result<Rule> {
        let d = spec.params.d;
        let conv = |v: &Vec<Vec<(String, Vec<u32>)>>| -> Result<Vec<Multiset>> {
            v.iter()
                .map(|m| {
                    m.iter()
                        .map(|(l, k)| {
                            let lab = match l.as_str() {
                                "O" => Label::Omega,
                                "K" => Label::K,
                                "H" => Label::H,
                                o => return Err(Error::Rule(format!("unknown label {o}"))),
                            };
                            let mi = MultiIndex(k.clone());
                            mi.check_dim(d)?;
                            Ok((lab, mi))
                        })
                        .collect()
                })
                .collect()
        };
        Rule::new(conv(&spec.k)?, spec.root.as_ref().map(conv).transpose()?)
    }
}

/// Outcome of a structural check.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Report {
    pub ok: bool,
    pub checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub property: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub term: Option<String>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Report {
    pub fn pass(checked: usize) -> Report {
        Report { ok: true, checked, ..Default::default() }
    }

    pub fn fail(property: &str, tree: &Tree, term: Option<String>, detail: String) -> Report {
        Report { ok: false, checked: 0, property: Some(property.into()), tree: Some(tree.encode()), term, detail }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precedence {
    Less,
    Equal,
    Greater,
    /// Distinct trees with identical key.
    Tie,
}

#[derive(Clone, Debug)]
pub struct Sector {
    pub params: Params,
    pub eps_ref: Q,
    pub l_bound: Q,
    pub polys: Vec<Tree>,
    pub b_circ: Vec<Tree>,
    pub dot: Vec<Tree>,
    pub log: Vec<String>,
    members: HashSet<Tree>,
    rank: HashMap<Tree, usize>,
}

pub fn derive(t: &Tree) -> Result<LinComb> {
    if t.h_count() > 0 {
        return Err(Error::HasH(t.encode()));
    }
    let mut r = LinComb::zero();
    for s in t.relabel_each(Label::Omega, Label::H) {
        r.add_term(s, Q::one());
    }
    Ok(r)
}

/// D extended linearly; trees with an H edge are sent to their D-image only
/// if H-free, so callers must pass T^(0) combinations.
pub fn derive_lin(v: &LinComb) -> Result<LinComb> {
    let mut r = LinComb::zero();
    for (t, c) in v.iter() {
        r.add_scaled(&derive(t)?, c);
    }
    Ok(r)
}

fn polys_below(params: &Params, l: &Q) -> Vec<Tree> {
    MultiIndex::with_norm_up_to(params.d, &params.scaling, l, true).into_iter().map(Tree::poly).collect()
}

/// Whether every Ω edge is a bare leaf and no node carries two of them.
pub fn omega_leaves_ok(t: &Tree) -> bool {
    let mut n_omega = 0;
    for e in t.children() {
        if e.label == Label::Omega {
            n_omega += 1;
            if !e.deco.is_zero() || !e.child.is_one() {
                return false;
            }
        }
        if !omega_leaves_ok(&e.child) {
            return false;
        }
    }
    n_omega <= 1
}

/// Whether the root carries an Ω or H leaf.
pub fn noise_rooted(t: &Tree) -> bool {
    t.children().iter().any(|e| matches!(e.label, Label::Omega | Label::H) && e.child.is_poly())
}

pub fn decoration_free(t: &Tree) -> bool {
    t.n().is_zero() && t.children().iter().all(|e| e.deco.is_zero() && decoration_free(&e.child))
}

impl Sector {
    /// The preorder key (|τ|_○, |E_τ|, r_{0,∞}(τ)), with the degree taken at ε_ref.
    pub fn key(&self, t: &Tree) -> (usize, usize, Q) {
        let f = DegreeForm::of(t, &self.params);
        (t.omega_count(), t.edge_count(), f.eval(&self.params, &self.eps_ref, &Q::zero()))
    }

    pub fn from_trees(params: Params, eps_ref: Q, l_bound: Q, b_circ: Vec<Tree>) -> Sector {
        let mut s = Sector {
            polys: polys_below(&params, &l_bound),
            params,
            eps_ref,
            l_bound,
            b_circ: Vec::new(),
            dot: Vec::new(),
            log: Vec::new(),
            members: HashSet::new(),
            rank: HashMap::new(),
        };
        let set: BTreeSet<Tree> = b_circ.into_iter().collect();
        s.b_circ = set.into_iter().collect();
        s.finish();
        s
    }

    fn finish(&mut self) {
        let mut dot = BTreeSet::new();
        for t in &self.b_circ {
            for u in t.relabel_each(Label::Omega, Label::H) {
                dot.insert(u);
            }
        }
        self.dot = dot.into_iter().collect();
        let mut b = std::mem::take(&mut self.b_circ);
        self.sort_by_key(&mut b);
        self.b_circ = b;
        let mut dt = std::mem::take(&mut self.dot);
        self.sort_by_key(&mut dt);
        self.dot = dt;
        let mut ties = 0;
        for w in self.b_circ.windows(2) {
            if self.key(&w[0]) == self.key(&w[1]) {
                ties += 1;
            }
        }
        if ties > 0 {
            self.log.push(format!("{ties} key ties in B_circ broken by canonical encoding"));
        }
        self.members = self.polys.iter().chain(&self.b_circ).chain(&self.dot).cloned().collect();
        self.rank = self.b_circ.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    fn sort_by_key(&self, v: &mut [Tree]) {
        let keys: HashMap<Tree, (usize, usize, Q)> = v.iter().map(|t| (t.clone(), self.key(t))).collect();
        v.sort_by(|a, b| keys[a].cmp(&keys[b]).then_with(|| a.cmp(b)));
    }

    pub fn generate(spec: &RuleSpec) -> Result<Sector> {
        spec.params.validate()?;
        let rule = Rule::from_spec(spec)?;
        if spec.max_omega < 2 {
            return Err(Error::Rule("maxOmega must be at least 2".into()));
        }
        let eps_ref = match &spec.eps_ref {
            Some(s) => parse_q(s)?,
            None => Q::zero(),
        };
        let max_edges = spec.max_edges.unwrap_or(3 * spec.max_omega);
        let b = generate_from_rule(&rule, spec.max_omega, &spec.l, &spec.params, max_edges)?;
        let mut s = Sector::from_trees(spec.params.clone(), eps_ref, spec.l.clone(), b);
        s.log.push(format!("rule enumeration: {} trees in B_circ", s.b_circ.len()));
        if spec.complete {
            s.complete(4000)?;
        }
        Ok(s)
    }

    /// Adds left factors, inner trees of planted right factors and the right
    /// factors of extractions by B₋ trees until the set is closed.
    pub fn complete(&mut self, cap: usize) -> Result<()> {
        let hopf = Hopf::new(self.params.clone(), self.eps_ref.clone(), Exponent::two());
        let mut done: HashSet<Tree> = HashSet::new();
        let mut done_x: HashSet<Tree> = HashSet::new();
        let mut added = 0usize;
        let mut l_needed = self.l_bound.clone();
        loop {
            let current: Vec<Tree> = self.b_circ.iter().chain(&self.dot).cloned().collect();
            let mut new: BTreeSet<Tree> = BTreeSet::new();
            let bm: HashSet<Tree> = self.b_minus().into_iter().collect();
            let need = |x: &Tree, new: &mut BTreeSet<Tree>, l_needed: &mut Q| {
                if x.is_poly() {
                    let nrm = x.n().norm(&self.params.scaling);
                    if nrm >= *l_needed {
                        *l_needed = nrm + self.params.min_scaling();
                    }
                    return;
                }
                let y = x.relabel_all(Label::H, Label::Omega);
                if y.omega_count() >= 1 && !self.members.contains(&y) {
                    new.insert(y);
                }
            };
            for t in &current {
                if done.contains(t) {
                    continue;
                }
                fn inner_k(t: &Tree, out: &mut Vec<Tree>) {
                    for e in t.children() {
                        if e.label == Label::K {
                            out.push(e.child.clone());
                        }
                        inner_k(&e.child, out);
                    }
                }
                let mut inn = Vec::new();
                inner_k(t, &mut inn);
                for c in &inn {
                    need(c, &mut new, &mut l_needed);
                }
                for ((a, b), _) in hopf.coproduct(t)?.iter() {
                    need(a, &mut new, &mut l_needed);
                    for e in b.children() {
                        if e.label == Label::K {
                            need(&e.child, &mut new, &mut l_needed);
                        }
                    }
                }
                done.insert(t.clone());
            }
            let bound = bm.iter().map(|t| node_decoration(t, &self.params)).max().unwrap_or_else(Q::zero);
            let ext = Hopf::extraction(self.params.clone(), bound);
            for t in &current {
                if done_x.contains(t) {
                    continue;
                }
                for ((a, b), _) in ext.coproduct(t)?.iter() {
                    if bm.contains(a) {
                        need(b, &mut new, &mut l_needed);
                    }
                }
                done_x.insert(t.clone());
            }
            let l_changed = l_needed != self.l_bound;
            if new.is_empty() && !l_changed {
                break;
            }
            added += new.len();
            if self.b_circ.len() + new.len() > cap {
                return Err(Error::Sector(format!("completion exceeded {cap} trees")));
            }
            if l_changed {
                self.log.push(format!("completion raised L from {} to {}", fmt_q(&self.l_bound), fmt_q(&l_needed)));
                self.l_bound = l_needed.clone();
                self.polys = polys_below(&self.params, &self.l_bound);
            }
            done.clear();
            done_x.clear();
            let mut all: Vec<Tree> = std::mem::take(&mut self.b_circ);
            all.extend(new);
            let set: BTreeSet<Tree> = all.into_iter().collect();
            self.b_circ = set.into_iter().collect();
            self.finish();
        }
        self.log.push(format!("completion added {added} trees; B_circ has {}", self.b_circ.len()));
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    pub fn noise(&self) -> Tree {
        Tree::noise(self.d())
    }

    /// 𝐁 = polynomials ∪ 𝐁_○.
    pub fn basis(&self) -> Vec<Tree> {
        self.polys.iter().chain(&self.b_circ).cloned().collect()
    }

    /// 𝐁 ∪ 𝐁̇.
    pub fn all(&self) -> Vec<Tree> {
        self.polys.iter().chain(&self.b_circ).chain(&self.dot).cloned().collect()
    }

    pub fn contains(&self, t: &Tree) -> bool {
        self.members.contains(t)
    }

    pub fn in_basis(&self, t: &Tree) -> bool {
        self.members.contains(t) && t.h_count() == 0
    }

    pub fn rank(&self, t: &Tree) -> Option<usize> {
        self.rank.get(t).copied()
    }

    pub fn m_b(&self) -> usize {
        self.all().iter().map(|t| t.edge_count()).max().unwrap_or(0)
    }

    pub fn ref_map(&self, p: Exponent) -> DegreeMap {
        DegreeMap::new(self.params.clone(), self.eps_ref.clone(), p)
    }

    pub fn precede(&self, a: &Tree, b: &Tree) -> Precedence {
        if a == b {
            return Precedence::Equal;
        }
        match self.key(a).cmp(&self.key(b)) {
            Ordering::Less => Precedence::Less,
            Ordering::Greater => Precedence::Greater,
            Ordering::Equal => Precedence::Tie,
        }
    }

    /// σ ≺ τ: σ ≼ τ and σ ≠ τ.
    pub fn strictly_before(&self, a: &Tree, b: &Tree) -> bool {
        matches!(self.precede(a, b), Precedence::Less | Precedence::Tie)
    }

    pub fn strict_lower_set(&self, t: &Tree) -> Vec<Tree> {
        self.all().into_iter().filter(|s| self.strictly_before(s, t)).collect()
    }

    /// 𝐁₋: trees of 𝐁_○ with negative degree at (ε_ref, ∞), other than ○ and
    /// planted trees, in ≼ order.
    pub fn b_minus(&self) -> Vec<Tree> {
        let dm = self.ref_map(Exponent::infinity());
        let o = self.noise();
        self.b_circ
            .iter()
            .filter(|t| {
                **t != o
                    && !t.as_planted().is_some_and(|e| e.label == Label::K)
                    && dm.r(t).is_negative()
            })
            .cloned()
            .collect()
    }

    /// 𝐕⁺ generators built from `trees` (polynomials ignored).
    pub fn v_generators(&self, trees: &[Tree], eps: &Q, p: &Exponent) -> Result<Vec<Tree>> {
        let dm = DegreeMap::new(self.params.clone(), eps.clone(), p.clone());
        let mut out: BTreeSet<Tree> = (0..self.d()).map(|j| Tree::poly(MultiIndex::unit(self.d(), j))).collect();
        for t in trees.iter().filter(|t| !t.is_poly() && t.h_count() == 0) {
            for k in dm.positive_shifts(Label::K, &MultiIndex::zero(self.d()), t)? {
                out.insert(Tree::planted_raw(Label::K, k, t.clone()));
            }
        }
        Ok(out.into_iter().collect())
    }

    /// 𝐖⁺ generators built from `trees` (polynomials ignored), including ⊙_k.
    pub fn w_generators(&self, trees: &[Tree], eps: &Q, p: &Exponent) -> Result<Vec<Tree>> {
        let d = self.d();
        let dm = DegreeMap::new(self.params.clone(), eps.clone(), p.clone());
        let mut out: BTreeSet<Tree> = (0..d).map(|j| Tree::poly(MultiIndex::unit(d, j))).collect();
        for k in dm.positive_shifts(Label::H, &MultiIndex::zero(d), &Tree::one(d))? {
            out.insert(Tree::hnoise(k));
        }
        for t in trees.iter().filter(|t| !t.is_poly()) {
            for k in dm.positive_shifts(Label::K, &MultiIndex::zero(d), t)? {
                out.insert(Tree::planted_raw(Label::K, k, t.clone()));
            }
        }
        Ok(out.into_iter().collect())
    }

    /// Whether forest `f` lies in the algebra generated by `gens`.
    fn in_algebra(f: &Tree, gens: &HashSet<Tree>) -> std::result::Result<(), Tree> {
        let d = f.dim();
        for e in f.children() {
            let g = Tree::new(MultiIndex::zero(d), vec![e.clone()]);
            if !gens.contains(&g) {
                return Err(g);
            }
        }
        Ok(())
    }

    /// Definition of a differentiable sector, properties (a)–(d), at (ε, p).
    pub fn check_differentiable(&self, eps: &Q, p: &Exponent) -> Result<Report> {
        let d = self.d();
        let o = self.noise();
        if !self.b_circ.contains(&o) {
            return Ok(Report::fail("a", &o, None, "the noise leaf is missing".into()));
        }
        let expect = polys_below(&self.params, &self.l_bound);
        if expect != self.polys {
            return Ok(Report::fail("a", &Tree::one(d), None, "polynomial part mismatch".into()));
        }
        for t in &self.b_circ {
            if t.omega_count() == 0 || t.h_count() > 0 {
                return Ok(Report::fail("a", t, None, "tree without Omega edge or with H edge".into()));
            }
            if !omega_leaves_ok(t) {
                return Ok(Report::fail("b", t, None, "Omega edge not a bare leaf, or two at one node".into()));
            }
        }
        let hopf = Hopf::new(self.params.clone(), eps.clone(), p.clone());
        let basis = self.basis();
        let all = self.all();
        let vg: HashSet<Tree> = self.v_generators(&basis, eps, p)?.into_iter().collect();
        let wg: HashSet<Tree> = self.w_generators(&all, eps, p)?.into_iter().collect();
        let mut checked = 0;
        for (prop, trees, gens, left_ok) in [
            ("c", &basis, &vg, &|t: &Tree| self.in_basis(t) as bool),
            ("d", &all, &wg, &|t: &Tree| self.contains(t)),
        ] as [(&str, &Vec<Tree>, &HashSet<Tree>, &dyn Fn(&Tree) -> bool); 2]
        {
            for t in trees {
                for ((a, b), _) in hopf.coproduct(t)?.iter() {
                    checked += 1;
                    let term = Some(format!("{a} ⊗ {b}"));
                    if !left_ok(a) {
                        return Ok(Report::fail(prop, t, term, format!("left factor {a} outside the span")));
                    }
                    if let Err(g) = Sector::in_algebra(b, gens) {
                        return Ok(Report::fail(prop, t, term, format!("right factor generator {g} missing")));
                    }
                }
            }
        }
        Ok(Report::pass(checked))
    }

    /// Every term of Δ_{ε,p}τ − τ⊗𝟏 lies in C_{≺τ} ⊗ alg(C⁺_{≺τ,ε,p}).
    pub fn check_triangularity(&self, eps: &Q, p: &Exponent) -> Result<Report> {
        let d = self.d();
        let hopf = Hopf::new(self.params.clone(), eps.clone(), p.clone());
        let dm = &hopf.dm;
        let one = Tree::one(d);
        let mut checked = 0;
        for t in self.all() {
            for ((a, b), _) in hopf.coproduct(&t)?.iter() {
                if *a == t && *b == one {
                    continue;
                }
                checked += 1;
                let term = Some(format!("{a} ⊗ {b}"));
                if !self.contains(a) || !self.strictly_before(a, &t) {
                    return Ok(Report::fail("C", &t, term, format!("left factor {a} not in C_<tau")));
                }
                for e in b.children() {
                    let ok = match e.label {
                        Label::H => e.child.is_one() && dm.positive_planted(Label::H, &e.deco, &e.child)?,
                        Label::K => {
                            !e.child.is_poly()
                                && self.contains(&e.child)
                                && self.strictly_before(&e.child, &t)
                                && dm.positive_planted(Label::K, &e.deco, &e.child)?
                        }
                        Label::Omega => false,
                    };
                    if !ok {
                        return Ok(Report::fail("C+", &t, term, format!("planted factor over {} not in C+_<tau", e.child)));
                    }
                }
            }
        }
        Ok(Report::pass(checked))
    }

    /// The filtration stages i = 1..|𝐁_○|.
    pub fn filtration(&self, eps: &Q, p: &Exponent) -> Result<Vec<Stage>> {
        let mut out = Vec::with_capacity(self.b_circ.len());
        for i in 1..=self.b_circ.len() {
            let b_i: Vec<Tree> = self.polys.iter().chain(&self.b_circ[..i]).cloned().collect();
            let b_prev: Vec<Tree> = self.polys.iter().chain(&self.b_circ[..i - 1]).cloned().collect();
            let mut dot: BTreeSet<Tree> = BTreeSet::new();
            for t in &self.b_circ[..i] {
                dot.extend(t.relabel_each(Label::Omega, Label::H));
            }
            let dot_i: Vec<Tree> = dot.into_iter().collect();
            let w: Vec<Tree> = b_prev.iter().chain(&dot_i).cloned().collect();
            let w_with: Vec<Tree> = b_i.iter().chain(&dot_i).cloned().collect();
            out.push(Stage {
                i,
                tau: self.b_circ[i - 1].clone(),
                v_gens: self.v_generators(&b_i, eps, p)?,
                w_gens: self.w_generators(&w_with, eps, p)?,
                v: b_i,
                w,
                dot: dot_i,
            });
        }
        Ok(out)
    }

    /// Filtration stages projected to noise-rooted, decoration-free trees,
    /// keeping the first stage of every run with an unchanged projection.
    pub fn projected_filtration(&self, eps: &Q, p: &Exponent) -> Result<Vec<(Vec<Tree>, Vec<Tree>)>> {
        let keep = |v: &[Tree]| -> Vec<Tree> {
            let s: BTreeSet<Tree> = v.iter().filter(|t| noise_rooted(t) && decoration_free(t)).cloned().collect();
            s.into_iter().collect()
        };
        let mut out: Vec<(Vec<Tree>, Vec<Tree>)> = Vec::new();
        for st in self.filtration(eps, p)? {
            let v = keep(&st.v);
            if out.last().is_some_and(|(pv, _)| *pv == v) {
                continue;
            }
            out.push((v, keep(&st.w)));
        }
        Ok(out)
    }

    /// Phase sets from the 𝐖⁺_{0,2} ∩ T^(1) generators (computed at ε_ref).
    pub fn phase(&self, eps: &Q, p: &Exponent) -> Result<PhaseSets> {
        let gens = self.transition_generators()?;
        phase_sets(&gens, &self.params, eps, p)
    }

    pub fn transition_generators(&self) -> Result<Vec<Tree>> {
        Ok(self
            .w_generators(&self.all(), &self.eps_ref, &Exponent::two())?
            .into_iter()
            .filter(|g| g.h_count() == 1)
            .collect())
    }

    pub fn epsilon0(&self) -> Result<Option<Q>> {
        let gens = self.w_generators(&self.all(), &Q::zero(), &Exponent::two())?;
        epsilon0(&gens, &self.all(), &self.params)
    }

    /// Listing lines: index, tree, |τ|_○, |E|, r_{ε_ref,∞}, r_{ε_ref,2}.
    pub fn listing(&self) -> Vec<ListingEntry> {
        let f = |t: &Tree, kind: &str, idx: usize| {
            let df = DegreeForm::of(t, &self.params);
            ListingEntry {
                kind: kind.to_string(),
                index: idx,
                tree: t.encode(),
                omega: t.omega_count(),
                edges: t.edge_count(),
                r_inf: fmt_q(&df.eval(&self.params, &self.eps_ref, &Q::zero())),
                r_2: fmt_q(&df.eval(&self.params, &self.eps_ref, &q(1, 2))),
            }
        };
        let mut v = Vec::new();
        for (i, t) in self.polys.iter().enumerate() {
            v.push(f(t, "poly", i));
        }
        for (i, t) in self.b_circ.iter().enumerate() {
            v.push(f(t, "B", i + 1));
        }
        for (i, t) in self.dot.iter().enumerate() {
            v.push(f(t, "Bdot", i + 1));
        }
        v
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ListingEntry {
    pub kind: String,
    pub index: usize,
    pub tree: String,
    pub omega: usize,
    pub edges: usize,
    pub r_inf: String,
    pub r_2: String,
}

#[derive(Clone, Debug)]
pub struct Stage {
    pub i: usize,
    pub tau: Tree,
    /// 𝐁_i, spanning V_i.
    pub v: Vec<Tree>,
    /// 𝐁_{i−1} ∪ 𝐁̇_i, spanning W_i.
    pub w: Vec<Tree>,
    pub dot: Vec<Tree>,
    pub v_gens: Vec<Tree>,
    pub w_gens: Vec<Tree>,
}

/// All strongly conforming trees with 1 ≤ |τ|_○ < M, at most `max_edges`
/// edges, node decorations |𝔫(v)|_𝔰 < L off the Ω tips; ○ is always included.
pub fn generate_from_rule(rule: &Rule, max_omega: usize, l: &Q, params: &Params, max_edges: usize) -> Result<Vec<Tree>> {
    let d = params.d;
    let mut memo: HashMap<(usize, usize), Vec<Tree>> = HashMap::new();
    let shapes = gen_types(rule, &rule.root_types, max_omega - 1, max_edges, d, &mut memo);
    let mut out: BTreeSet<Tree> = BTreeSet::new();
    out.insert(Tree::noise(d));
    let decos = MultiIndex::with_norm_up_to(d, &params.scaling, l, true);
    for s in shapes {
        if s.omega_count() == 0 || s.has_k_leaf() {
            continue;
        }
        for t in decorate(&s, &decos) {
            out.insert(t);
        }
    }
    Ok(out.into_iter().collect())
}

fn gen_types(
    rule: &Rule,
    types: &BTreeSet<Multiset>,
    omega_left: usize,
    edges_left: usize,
    d: usize,
    memo: &mut HashMap<(usize, usize), Vec<Tree>>,
) -> Vec<Tree> {
    let mut out = BTreeSet::new();
    for ty in types {
        let mut partial: Vec<(Vec<Edge>, usize, usize)> = vec![(Vec::new(), 0, 0)];
        for (lab, k) in ty {
            let mut next = Vec::new();
            for (edges, om, ed) in &partial {
                match lab {
                    Label::Omega => {
                        if om + 1 <= omega_left && ed + 1 <= edges_left {
                            let mut e = edges.clone();
                            e.push(Edge { label: Label::Omega, deco: k.clone(), child: Tree::one(d) });
                            next.push((e, om + 1, ed + 1));
                        }
                    }
                    _ => {
                        if ed + 1 > edges_left {
                            continue;
                        }
                        let key = (omega_left - om, edges_left - ed - 1);
                        if !memo.contains_key(&key) {
                            let v = gen_types(rule, &rule.k_types, key.0, key.1, d, memo);
                            memo.insert(key, v);
                        }
                        for sub in &memo[&key] {
                            if sub.is_poly() {
                                continue;
                            }
                            let mut e = edges.clone();
                            e.push(Edge { label: *lab, deco: k.clone(), child: sub.clone() });
                            next.push((e, om + sub.omega_count(), ed + 1 + sub.edge_count()));
                        }
                    }
                }
            }
            partial = next;
        }
        for (edges, _, _) in partial {
            out.insert(Tree::new(MultiIndex::zero(d), edges));
        }
    }
    out.into_iter().collect()
}

fn decorate(t: &Tree, decos: &[MultiIndex]) -> Vec<Tree> {
    let mut kids: Vec<Vec<Edge>> = vec![Vec::new()];
    for e in t.children() {
        let opts: Vec<Tree> = if e.label == Label::K { decorate(&e.child, decos) } else { vec![e.child.clone()] };
        let mut next = Vec::with_capacity(kids.len() * opts.len());
        for k in &kids {
            for o in &opts {
                let mut v = k.clone();
                v.push(Edge { label: e.label, deco: e.deco.clone(), child: o.clone() });
                next.push(v);
            }
        }
        kids = next;
    }
    let mut out = Vec::new();
    for k in kids {
        for n in decos {
            out.push(Tree::new(n.clone(), k.clone()));
        }
    }
    out
}

/// Shorthand map from tree to index in a listing, used by reports.
pub fn index_map(v: &[Tree]) -> BTreeMap<Tree, usize> {
    v.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect()
}
