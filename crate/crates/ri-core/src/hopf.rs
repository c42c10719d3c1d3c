//! Coproducts Δ_{ε,p}, Δ⁺_{ε,p}, the projection P⁺, the antipode S⁺ and
//! characters. Forests are represented as trees whose root decoration is the
//! polynomial factor and whose edges are the planted factors.

use crate::error::{Error, Result};
use crate::grading::{DegreeMap, Exponent, Params};
use crate::lincomb::{Lin, LinComb, Scalar, Tensor3, TensorSum};
use crate::multiindex::MultiIndex;
use crate::rational::{fmt_q, Q};
use crate::tree::{Edge, Label, Tree};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use parking_lot::Mutex;
use std::collections::{BTreeMap, HashMap};

/// How the sum over extra edge decorations is cut off.
#[derive(Clone, Debug, PartialEq)]
pub enum Truncation {
    /// Right factors are projected by P⁺_{ε,p}.
    Plus,
    /// No projection on the right; only left factors whose total node
    /// decoration Σ|𝔫|_𝔰 is at most the bound are kept.
    LeftDecoration(Q),
}

pub fn node_decoration(t: &Tree, params: &Params) -> Q {
    let mut acc = params.norm(t.n());
    for e in t.children() {
        acc += node_decoration(&e.child, params);
    }
    acc
}

pub struct Hopf {
    pub dm: DegreeMap,
    pub truncation: Truncation,
    delta: Mutex<HashMap<Tree, TensorSum>>,
    anti: Mutex<HashMap<Tree, LinComb>>,
}

fn qb(n: BigInt) -> Q {
    Q::from_integer(n)
}

impl Hopf {
    pub fn new(params: Params, eps: Q, p: Exponent) -> Hopf {
        Hopf::from_map(DegreeMap::new(params, eps, p))
    }

    pub fn from_map(dm: DegreeMap) -> Hopf {
        Hopf { dm, truncation: Truncation::Plus, delta: Mutex::new(HashMap::new()), anti: Mutex::new(HashMap::new()) }
    }

    /// The untruncated coproduct Δ restricted to left factors with node
    /// decoration at most `bound`.
    pub fn extraction(params: Params, bound: Q) -> Hopf {
        let dm = DegreeMap::new(params, Q::zero(), Exponent::infinity());
        Hopf { dm, truncation: Truncation::LeftDecoration(bound), delta: Mutex::new(HashMap::new()), anti: Mutex::new(HashMap::new()) }
    }

    pub fn d(&self) -> usize {
        self.dm.d()
    }

    pub fn params(&self) -> &Params {
        &self.dm.params
    }

    /// Δ(X^n) = Σ_{l≤n} binom(n,l) X^l ⊗ X^{n−l}.
    pub fn poly_delta(n: &MultiIndex) -> TensorSum {
        let mut r = TensorSum::zero();
        for l in n.below() {
            let rest = n.checked_sub(&l).unwrap();
            r.add_term((Tree::poly(l.clone()), Tree::poly(rest)), qb(n.binom(&l)));
        }
        r
    }

    /// Δ_{ε,p} by the recursive formula, memoized.
    pub fn coproduct(&self, t: &Tree) -> Result<TensorSum> {
        if let Some(v) = self.delta.lock().get(t) {
            return Ok(v.clone());
        }
        let v = self.coproduct_uncached(t)?;
        self.delta.lock().insert(t.clone(), v.clone());
        Ok(v)
    }

    fn coproduct_uncached(&self, t: &Tree) -> Result<TensorSum> {
        if t.has_k_leaf() {
            return Ok(TensorSum::zero());
        }
        let mut acc = Hopf::poly_delta(t.n());
        for e in t.children() {
            let pd = self.planted_delta(e)?;
            acc = acc.mul(&pd);
            self.prune(&mut acc);
        }
        Ok(acc)
    }

    fn planted_delta(&self, e: &Edge) -> Result<TensorSum> {
        let mut r = TensorSum::zero();
        for ((a, b), c) in self.coproduct(&e.child)?.iter() {
            if let Some(pa) = Tree::plant(e.label, e.deco.clone(), a) {
                r.add_term((pa, b.clone()), c.clone());
            }
        }
        if e.label == Label::K && e.child.is_poly() {
            return Ok(r);
        }
        let shifts = match &self.truncation {
            Truncation::Plus => self.dm.positive_shifts(e.label, &e.deco, &e.child)?,
            Truncation::LeftDecoration(b) => MultiIndex::with_norm_up_to(self.d(), &self.params().scaling, b, false),
        };
        for l in shifts {
            if let Some(pr) = Tree::plant(e.label, e.deco.add(&l), &e.child) {
                let c = Q::new(BigInt::one(), l.factorial());
                r.add_term((Tree::poly(l), pr), c);
            }
        }
        self.prune(&mut r);
        Ok(r)
    }

    fn prune(&self, t: &mut TensorSum) {
        if let Truncation::LeftDecoration(b) = &self.truncation {
            let params = self.params().clone();
            t.retain(|(a, _)| node_decoration(a, &params) <= *b);
        }
    }

    /// Δ_{ε,p} by direct enumeration of root-containing subtrees.
    pub fn coproduct_graphical(&self, t: &Tree) -> Result<TensorSum> {
        let mut out = TensorSum::zero();
        if t.has_k_leaf() {
            return Ok(out);
        }
        let fl = Flat::new(t);
        let n = fl.nodes.len();
        let mut in_s = vec![false; n];
        in_s[0] = true;
        let mut subsets = Vec::new();
        enumerate_subsets(&fl, 1, &mut in_s, &mut subsets);
        let d = self.d();
        for s in subsets {
            // σ must not have K-labelled leaves.
            let mut s_children = vec![0usize; n];
            for i in 1..n {
                if s[i] {
                    s_children[fl.nodes[i].parent] += 1;
                }
            }
            if (1..n).any(|i| s[i] && fl.nodes[i].label == Label::K && s_children[i] == 0) {
                continue;
            }
            let boundary: Vec<usize> = (1..n).filter(|&i| !s[i] && s[fl.nodes[i].parent]).collect();
            let mut choices: Vec<Vec<MultiIndex>> = Vec::new();
            let mut dead = false;
            for &b in &boundary {
                let nd = &fl.nodes[b];
                let ms = self.dm.positive_shifts(nd.label, &nd.deco, &nd.sub)?;
                if ms.is_empty() {
                    dead = true;
                    break;
                }
                choices.push(ms);
            }
            if dead {
                continue;
            }
            let s_nodes: Vec<usize> = (0..n).filter(|&i| s[i]).collect();
            for &v in &s_nodes {
                choices.push(fl.nodes[v].n.below());
            }
            let nb = boundary.len();
            let mut idx = vec![0usize; choices.len()];
            loop {
                let mut coeff = Q::one();
                let mut extra: Vec<MultiIndex> = vec![MultiIndex::zero(d); n];
                let mut nsig: Vec<MultiIndex> = vec![MultiIndex::zero(d); n];
                let mut right_root = MultiIndex::zero(d);
                let mut right_edges = Vec::with_capacity(nb);
                for (j, &b) in boundary.iter().enumerate() {
                    let m = &choices[j][idx[j]];
                    let nd = &fl.nodes[b];
                    coeff /= qb(m.factorial());
                    extra[nd.parent] = extra[nd.parent].add(m);
                    right_edges.push(Edge { label: nd.label, deco: nd.deco.add(m), child: nd.sub.clone() });
                }
                for (j, &v) in s_nodes.iter().enumerate() {
                    let ns = &choices[nb + j][idx[nb + j]];
                    let full = &fl.nodes[v].n;
                    coeff *= qb(full.binom(ns));
                    right_root = right_root.add(&full.checked_sub(ns).unwrap());
                    nsig[v] = ns.clone();
                }
                let left = fl.build(0, &s, &nsig, &extra);
                let right = Tree::new(right_root, right_edges);
                out.add_term((left, right), coeff);
                // advance the odometer
                let mut k = 0;
                while k < choices.len() {
                    idx[k] += 1;
                    if idx[k] < choices[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
                if k == choices.len() {
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Whether a forest survives P⁺_{ε,p}.
    pub fn forest_survives(&self, f: &Tree) -> Result<bool> {
        for e in f.children() {
            if !self.dm.positive_planted(e.label, &e.deco, &e.child)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn project_plus(&self, v: &LinComb) -> Result<LinComb> {
        let mut r = LinComb::zero();
        for (f, c) in v.iter() {
            if self.forest_survives(f)? {
                r.add_term(f.clone(), c.clone());
            }
        }
        Ok(r)
    }

    /// Δ⁺_{ε,p} = (P⁺ ⊗ P⁺)Δ on a forest.
    pub fn coproduct_plus(&self, f: &Tree) -> Result<TensorSum> {
        let mut r = TensorSum::zero();
        for ((a, b), c) in self.coproduct(f)?.iter() {
            if self.forest_survives(a)? {
                r.add_term((a.clone(), b.clone()), c.clone());
            }
        }
        Ok(r)
    }

    /// S⁺ on a forest, extended multiplicatively from the generators.
    pub fn antipode(&self, f: &Tree) -> Result<LinComb> {
        let d = self.d();
        let sign = if f.n().total() % 2 == 0 { Q::one() } else { -Q::one() };
        let mut acc = LinComb::single(Tree::poly(f.n().clone()), sign);
        for e in f.children() {
            let g = Tree::new(MultiIndex::zero(d), vec![e.clone()]);
            acc = acc.mul(&self.antipode_generator(&g)?);
        }
        Ok(acc)
    }

    /// S⁺𝓘_k^𝔩(τ) = −Σ_l ((−X)^l/l!) 𝓜(P⁺𝓘_{k+l}^𝔩 ⊗ S⁺)Δ_{ε,p}τ.
    pub fn antipode_generator(&self, g: &Tree) -> Result<LinComb> {
        if let Some(v) = self.anti.lock().get(g) {
            return Ok(v.clone());
        }
        let e = g
            .as_planted()
            .ok_or_else(|| Error::Precondition(format!("{g} is not a planted generator")))?
            .clone();
        if !self.dm.positive_planted(e.label, &e.deco, &e.child)? {
            return Err(Error::Precondition(format!("generator {g} has nonpositive degree")));
        }
        let mut r = LinComb::zero();
        for ((a, b), c) in self.coproduct(&e.child)?.iter() {
            if e.label == Label::K && a.is_poly() {
                continue;
            }
            let shifts = self.dm.positive_shifts(e.label, &e.deco, a)?;
            if shifts.is_empty() {
                continue;
            }
            let sb = self.antipode(b)?;
            for l in shifts {
                let Some(pa) = Tree::plant(e.label, e.deco.add(&l), a) else { continue };
                let mut coeff = -c.clone() / qb(l.factorial());
                if l.total() % 2 == 1 {
                    coeff = -coeff;
                }
                let head = pa.product(&Tree::poly(l));
                for (s, sc) in sb.iter() {
                    r.add_term(head.product(s), coeff.clone() * sc);
                }
            }
        }
        self.anti.lock().insert(g.clone(), r.clone());
        Ok(r)
    }

    /// (f1 ⊗ f2)Δ⁺μ for functionals on forests.
    pub fn convolve<C: Scalar>(
        &self,
        f1: &dyn Fn(&Tree) -> Result<C>,
        f2: &dyn Fn(&Tree) -> Result<C>,
        mu: &Tree,
    ) -> Result<C> {
        let mut acc = C::zero();
        for ((a, b), c) in self.coproduct_plus(mu)?.iter() {
            acc = acc + C::from_q(c) * f1(a)? * f2(b)?;
        }
        Ok(acc)
    }

    /// g_{yx}(μ) = (g_y ⊗ (g_x∘S⁺))Δ⁺μ.
    pub fn char_recenter<C: Scalar>(&self, gy: &Character<C>, gx: &Character<C>, mu: &Tree) -> Result<C> {
        let fx = |f: &Tree| -> Result<C> { gx.eval_lin(&self.antipode(f)?) };
        let fy = |f: &Tree| gy.eval(f);
        self.convolve(&fy, &fx, mu)
    }

    /// Γ_{yx}τ = (id ⊗ g_{yx})Δ_{ε,p}τ, with g_{yx} given as a functional.
    pub fn gamma<C: Scalar>(&self, gyx: &dyn Fn(&Tree) -> Result<C>, t: &Tree) -> Result<Lin<Tree, C>> {
        let mut r = Lin::zero();
        for ((a, b), c) in self.coproduct(t)?.iter() {
            r.add_term(a.clone(), C::from_q(c) * gyx(b)?);
        }
        Ok(r)
    }

    pub fn counit(f: &Tree) -> Q {
        if f.is_one() {
            Q::one()
        } else {
            Q::zero()
        }
    }

    /// (Δ⁺⊗id)Δ⁺f − (id⊗Δ⁺)Δ⁺f, as a three-fold tensor.
    pub fn coassociativity_defect(&self, f: &Tree) -> Result<Tensor3> {
        let dp = self.coproduct_plus(f)?;
        let mut r = Tensor3::zero();
        for ((a, b), c) in dp.iter() {
            for ((x, y), e) in self.coproduct_plus(a)?.iter() {
                r.add_term((x.clone(), y.clone(), b.clone()), c * e);
            }
            for ((x, y), e) in self.coproduct_plus(b)?.iter() {
                r.add_term((a.clone(), x.clone(), y.clone()), -(c * e));
            }
        }
        Ok(r)
    }

    /// (Δ⊗id)Δτ − (id⊗Δ⁺)Δτ.
    pub fn comodule_defect(&self, t: &Tree) -> Result<Tensor3> {
        let dt = self.coproduct(t)?;
        let mut r = Tensor3::zero();
        for ((a, b), c) in dt.iter() {
            for ((x, y), e) in self.coproduct(a)?.iter() {
                r.add_term((x.clone(), y.clone(), b.clone()), c * e);
            }
            for ((x, y), e) in self.coproduct_plus(b)?.iter() {
                r.add_term((a.clone(), x.clone(), y.clone()), -(c * e));
            }
        }
        Ok(r)
    }

    /// 𝓜(S⁺⊗id)Δ⁺f − ε(f)𝟏 and 𝓜(id⊗S⁺)Δ⁺f − ε(f)𝟏.
    pub fn antipode_defects(&self, f: &Tree) -> Result<(LinComb, LinComb)> {
        let d = self.d();
        let unit = LinComb::single(Tree::one(d), Hopf::counit(f));
        let mut left = LinComb::zero();
        let mut right = LinComb::zero();
        for ((a, b), c) in self.coproduct_plus(f)?.iter() {
            let sa = self.antipode(a)?;
            for (s, sc) in sa.iter() {
                left.add_term(s.product(b), c * sc);
            }
            let sb = self.antipode(b)?;
            for (s, sc) in sb.iter() {
                right.add_term(a.product(s), c * sc);
            }
        }
        Ok((left.sub(&unit), right.sub(&unit)))
    }
}

struct FNode {
    n: MultiIndex,
    parent: usize,
    label: Label,
    deco: MultiIndex,
    sub: Tree,
    kids: Vec<usize>,
}

struct Flat {
    nodes: Vec<FNode>,
}

impl Flat {
    fn new(t: &Tree) -> Flat {
        let d = t.dim();
        let mut nodes = vec![FNode {
            n: t.n().clone(),
            parent: usize::MAX,
            label: Label::K,
            deco: MultiIndex::zero(d),
            sub: t.clone(),
            kids: Vec::new(),
        }];
        fn rec(t: &Tree, me: usize, nodes: &mut Vec<FNode>) {
            for e in t.children() {
                let id = nodes.len();
                nodes.push(FNode {
                    n: e.child.n().clone(),
                    parent: me,
                    label: e.label,
                    deco: e.deco.clone(),
                    sub: e.child.clone(),
                    kids: Vec::new(),
                });
                nodes[me].kids.push(id);
                rec(&e.child, id, nodes);
            }
        }
        rec(t, 0, &mut nodes);
        Flat { nodes }
    }

    fn build(&self, v: usize, s: &[bool], nsig: &[MultiIndex], extra: &[MultiIndex]) -> Tree {
        let nd = &self.nodes[v];
        let edges = nd
            .kids
            .iter()
            .filter(|&&c| s[c])
            .map(|&c| Edge {
                label: self.nodes[c].label,
                deco: self.nodes[c].deco.clone(),
                child: self.build(c, s, nsig, extra),
            })
            .collect();
        Tree::new(nsig[v].add(&extra[v]), edges)
    }
}

fn enumerate_subsets(fl: &Flat, i: usize, cur: &mut Vec<bool>, out: &mut Vec<Vec<bool>>) {
    if i == fl.nodes.len() {
        out.push(cur.clone());
        return;
    }
    cur[i] = false;
    enumerate_subsets(fl, i + 1, cur, out);
    if cur[fl.nodes[i].parent] {
        cur[i] = true;
        enumerate_subsets(fl, i + 1, cur, out);
        cur[i] = false;
    }
}

/// A character given by its values on generators (X_j as X^{e_j} and
/// single planted forests), extended multiplicatively.
#[derive(Clone, Debug, PartialEq)]
pub struct Character<C> {
    pub values: BTreeMap<Tree, C>,
}

impl<C: Scalar> Default for Character<C> {
    fn default() -> Self {
        Character { values: BTreeMap::new() }
    }
}

impl<C: Scalar> Character<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, g: Tree, v: C) {
        self.values.insert(g, v);
    }

    pub fn set_x(&mut self, d: usize, j: usize, v: C) {
        self.values.insert(Tree::poly(MultiIndex::unit(d, j)), v);
    }

    pub fn eval(&self, f: &Tree) -> Result<C> {
        let d = f.dim();
        let mut acc = C::one();
        for (j, &k) in f.n().0.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let g = Tree::poly(MultiIndex::unit(d, j));
            let v = self.values.get(&g).ok_or_else(|| Error::MissingGenerator(g.encode()))?;
            for _ in 0..k {
                acc = acc * v.clone();
            }
        }
        for e in f.children() {
            let g = Tree::new(MultiIndex::zero(d), vec![e.clone()]);
            let v = self.values.get(&g).ok_or_else(|| Error::MissingGenerator(g.encode()))?;
            acc = acc * v.clone();
        }
        Ok(acc)
    }

    pub fn eval_lin(&self, v: &LinComb) -> Result<C> {
        let mut acc = C::zero();
        for (f, c) in v.iter() {
            acc = acc + C::from_q(c) * self.eval(f)?;
        }
        Ok(acc)
    }
}

pub fn tensor_to_json(t: &TensorSum) -> serde_json::Value {
    serde_json::Value::Array(
        t.iter()
            .map(|((a, b), c)| {
                serde_json::json!({"left": a.encode(), "right": b.encode(), "coeff": fmt_q(c)})
            })
            .collect(),
    )
}

pub fn tensor_from_json(v: &serde_json::Value, d: usize) -> Result<TensorSum> {
    let arr = v.as_array().ok_or_else(|| Error::Config("tensor sum must be a JSON array".into()))?;
    let mut r = TensorSum::zero();
    for e in arr {
        let get = |k: &str| {
            e.get(k).and_then(|x| x.as_str()).ok_or_else(|| Error::Config(format!("missing field {k}")))
        };
        let a = Tree::parse(get("left")?, d)?;
        let b = Tree::parse(get("right")?, d)?;
        let c = crate::rational::parse_q(get("coeff")?)?;
        r.add_term((a, b), c);
    }
    Ok(r)
}
