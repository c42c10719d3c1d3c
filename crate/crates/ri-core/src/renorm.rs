//! Preparation maps, the extraction-contraction maps R_c and the
//! renormalization map M^R.

use crate::error::{Error, Result};
use crate::grading::{DegreeForm, Exponent};
use crate::hopf::{node_decoration, Hopf};
use crate::lincomb::{Lin, Scalar};
use crate::rational::{fmt_q, parse_q, Q};
use crate::sector::{derive, Report, Sector};
use crate::tree::{Label, Tree};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct CounterTerms<C> {
    pub c: BTreeMap<Tree, C>,
}

impl<C: Scalar> Default for CounterTerms<C> {
    fn default() -> Self {
        CounterTerms { c: BTreeMap::new() }
    }
}

impl<C: Scalar> CounterTerms<C> {
    pub fn get(&self, t: &Tree) -> C {
        self.c.get(t).cloned().unwrap_or_else(C::zero)
    }

    pub fn check_support(&self, s: &Sector) -> Result<()> {
        let bm = s.b_minus();
        for (t, v) in &self.c {
            if !v.is_zero() && !bm.contains(t) {
                return Err(Error::Support(t.encode()));
            }
        }
        Ok(())
    }
}

impl CounterTerms<Q> {
    pub fn to_json(&self) -> serde_json::Value {
        let m: serde_json::Map<String, serde_json::Value> =
            self.c.iter().map(|(t, v)| (t.encode(), serde_json::Value::String(fmt_q(v)))).collect();
        serde_json::Value::Object(m)
    }
}

impl CounterTerms<f64> {
    pub fn to_json(&self) -> serde_json::Value {
        let m: serde_json::Map<String, serde_json::Value> = self.c.iter().map(|(t, v)| (t.encode(), serde_json::json!(v))).collect();
        serde_json::Value::Object(m)
    }
}

/// Reads a JSON object mapping tree strings to `"num/den"` strings or numbers.
pub fn counterterms_from_json<C: Scalar>(v: &serde_json::Value, d: usize, float: impl Fn(f64) -> Option<C>) -> Result<CounterTerms<C>> {
    let obj = v.as_object().ok_or_else(|| Error::Config("counterterms must be a JSON object".into()))?;
    let mut c = BTreeMap::new();
    for (k, val) in obj {
        let t = Tree::parse(k, d)?;
        let x = match val {
            serde_json::Value::String(s) => C::from_q(&parse_q(s)?),
            serde_json::Value::Number(n) => {
                let f = n.as_f64().unwrap_or(f64::NAN);
                match float(f) {
                    Some(x) => x,
                    None => C::from_q(&parse_q(&n.to_string())?),
                }
            }
            _ => return Err(Error::Config(format!("bad counterterm value for {k}"))),
        };
        c.insert(t, x);
    }
    Ok(CounterTerms { c })
}

/// A linear map on span(𝐁 ∪ 𝐁̇), stored on basis trees.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparationMap<C> {
    pub action: BTreeMap<Tree, Lin<Tree, C>>,
}

impl<C: Scalar> PreparationMap<C> {
    pub fn identity(s: &Sector) -> Self {
        PreparationMap { action: s.all().into_iter().map(|t| (t.clone(), Lin::basis(t))).collect() }
    }

    pub fn apply(&self, t: &Tree) -> Result<Lin<Tree, C>> {
        self.action.get(t).cloned().ok_or_else(|| Error::OutsideSector(t.encode()))
    }

    pub fn apply_lin(&self, v: &Lin<Tree, C>) -> Result<Lin<Tree, C>> {
        let mut r = Lin::zero();
        for (t, c) in v.iter() {
            r.add_scaled(&self.apply(t)?, c);
        }
        Ok(r)
    }
}

/// R_c τ = τ + (c ⊗ id)Δτ on 𝐁 ∪ 𝐁̇. The coproduct is not projected on
/// the right; only left factors in the support of c contribute.
pub fn make_rc<C: Scalar>(c: &CounterTerms<C>, s: &Sector) -> Result<PreparationMap<C>> {
    c.check_support(s)?;
    let bound = c
        .c
        .keys()
        .map(|t| node_decoration(t, &s.params))
        .max()
        .unwrap_or_else(|| Q::from_integer(0.into()));
    let hopf = Hopf::extraction(s.params.clone(), bound);
    let mut action = BTreeMap::new();
    for t in s.all() {
        let mut r = Lin::basis(t.clone());
        for ((a, b), q) in hopf.coproduct(&t)?.iter() {
            let ca = c.get(a);
            if ca.is_zero() {
                continue;
            }
            if !s.contains(b) {
                return Err(Error::OutsideSector(format!("{b} from extracting {a} out of {t}")));
            }
            r.add_term(b.clone(), C::from_q(q) * ca);
        }
        action.insert(t, r);
    }
    Ok(PreparationMap { action })
}

/// Checks properties (a)-(e) of a preparation map on the sector basis.
pub fn verify_preparation<C: Scalar>(r: &PreparationMap<C>, s: &Sector) -> Result<Report> {
    let d = s.d();
    let hopf = Hopf::new(s.params.clone(), s.eps_ref.clone(), Exponent::two());
    let deg = |t: &Tree, inv: &Q| DegreeForm::of(t, &s.params).eval(&s.params, &s.eps_ref, inv);
    let invs = [Q::from_integer(0.into()), Q::new(1.into(), 2.into())];
    let mut checked = 0;
    for t in s.all() {
        let Some(rt) = r.action.get(&t) else {
            return Ok(Report::fail("domain", &t, None, "map undefined on a basis tree".into()));
        };
        checked += 1;
        let fixed = t.is_poly()
            || t == Tree::noise(d)
            || t == Tree::hnoise(crate::multiindex::MultiIndex::zero(d))
            || t.as_planted().is_some_and(|e| e.label == Label::K);
        if fixed && *rt != Lin::basis(t.clone()) {
            let prop = if t.as_planted().is_some_and(|e| e.label == Label::K) { "c" } else { "a" };
            return Ok(Report::fail(prop, &t, None, "map does not fix this tree".into()));
        }
        if !rt.get(&t).close(&C::one()) {
            return Ok(Report::fail("b", &t, None, "leading coefficient is not 1".into()));
        }
        for (u, _) in rt.iter() {
            if *u == t {
                continue;
            }
            if !s.contains(u) {
                return Ok(Report::fail("b", &t, Some(u.encode()), "term outside the sector".into()));
            }
            if t.h_count() == 0 && u.h_count() != 0 {
                return Ok(Report::fail("V", &t, Some(u.encode()), "V is not left stable".into()));
            }
            if u.omega_count() >= t.omega_count() {
                return Ok(Report::fail("b", &t, Some(u.encode()), "term does not lower the Omega count".into()));
            }
            for inv in &invs {
                if deg(u, inv) <= deg(&t, inv) {
                    return Ok(Report::fail("b", &t, Some(u.encode()), format!("degree not raised at 1/p = {}", fmt_q(inv))));
                }
            }
        }
        // (d): (R ⊗ id)Δ = Δ R
        let mut lhs: Lin<(Tree, Tree), C> = Lin::zero();
        for ((a, b), q) in hopf.coproduct(&t)?.iter() {
            let Some(ra) = r.action.get(a) else {
                return Ok(Report::fail("d", &t, Some(a.encode()), "left factor outside the domain".into()));
            };
            for (x, cx) in ra.iter() {
                lhs.add_term((x.clone(), b.clone()), C::from_q(q) * cx.clone());
            }
        }
        let mut rhs: Lin<(Tree, Tree), C> = Lin::zero();
        for (u, cu) in rt.iter() {
            for ((a, b), q) in hopf.coproduct(u)?.iter() {
                rhs.add_term((a.clone(), b.clone()), C::from_q(q) * cu.clone());
            }
        }
        if !lhs.approx_eq(&rhs) {
            let diff = lhs.sub(&rhs);
            let term = diff.iter().next().map(|((a, b), _)| format!("{a} ⊗ {b}"));
            return Ok(Report::fail("d", &t, term, "(R ⊗ id)Δ differs from ΔR".into()));
        }
        // (e): RD = DR
        if t.h_count() == 0 {
            let mut rd: Lin<Tree, C> = Lin::zero();
            for (u, cu) in derive(&t)?.iter() {
                let Some(ru) = r.action.get(u) else {
                    return Ok(Report::fail("e", &t, Some(u.encode()), "D-image outside the domain".into()));
                };
                rd.add_scaled(ru, &C::from_q(cu));
            }
            let mut dr: Lin<Tree, C> = Lin::zero();
            for (u, cu) in rt.iter() {
                for (v, cv) in derive(u)?.iter() {
                    dr.add_term(v.clone(), cu.clone() * C::from_q(cv));
                }
            }
            if !rd.approx_eq(&dr) {
                return Ok(Report::fail("e", &t, None, "RD differs from DR".into()));
            }
        }
    }
    Ok(Report::pass(checked))
}

/// M^R τ = M̂^R(Rτ) with M̂^R multiplicative and M̂^R(𝓘_k^K σ) = 𝓘_k^K(M^R σ).
pub fn renorm_map<C: Scalar>(r: &PreparationMap<C>, t: &Tree) -> Result<Lin<Tree, C>> {
    let mut memo = BTreeMap::new();
    renorm_rec(r, t, &mut memo)
}

fn renorm_rec<C: Scalar>(r: &PreparationMap<C>, t: &Tree, memo: &mut BTreeMap<Tree, Lin<Tree, C>>) -> Result<Lin<Tree, C>> {
    if let Some(v) = memo.get(t) {
        return Ok(v.clone());
    }
    let rt = r.apply(t)?;
    let mut out = Lin::zero();
    for (u, cu) in rt.iter() {
        out.add_scaled(&hat_rec(r, u, memo)?, cu);
    }
    memo.insert(t.clone(), out.clone());
    Ok(out)
}

fn hat_rec<C: Scalar>(r: &PreparationMap<C>, t: &Tree, memo: &mut BTreeMap<Tree, Lin<Tree, C>>) -> Result<Lin<Tree, C>> {
    let d = t.dim();
    let mut acc: Lin<Tree, C> = Lin::basis(Tree::poly(t.n().clone()));
    for e in t.children() {
        let piece = if e.label == Label::K {
            let inner = renorm_rec(r, &e.child, memo)?;
            let mut p = Lin::zero();
            for (s, c) in inner.iter() {
                if let Some(pl) = Tree::plant(Label::K, e.deco.clone(), s) {
                    p.add_term(pl, c.clone());
                }
            }
            p
        } else {
            Lin::basis(Tree::new(crate::multiindex::MultiIndex::zero(d), vec![e.clone()]))
        };
        acc = acc.mul(&piece);
    }
    Ok(acc)
}
