//! Degrees r_{ε,p}, integrability exponents and phase-transition geometry.
//! The exponent p is always carried as u = 1/p, so p = ∞ is u = 0.

use crate::error::{Error, Result};
use crate::multiindex::MultiIndex;
use crate::rational::{fmt_q, parse_q, q, qi, serde_q, serde_qvec, Q};
use crate::tree::{Label, Tree};
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub d: usize,
    #[serde(with = "serde_qvec")]
    pub scaling: Vec<Q>,
    #[serde(with = "serde_q")]
    pub r0: Q,
    #[serde(with = "serde_q")]
    pub beta0: Q,
    #[serde(with = "serde_q")]
    pub ell: Q,
    #[serde(with = "serde_q")]
    pub ell1: Q,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_q")]
    pub s0: Option<Q>,
}

mod opt_q {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<Q>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match x {
            Some(v) => s.serialize_str(&fmt_q(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Q>, D::Error> {
        let v = Option::<serde_json::Value>::deserialize(d)?;
        match v {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(serde_json::Value::String(s)) => parse_q(&s).map(Some).map_err(serde::de::Error::custom),
            Some(serde_json::Value::Number(n)) => parse_q(&n.to_string()).map(Some).map_err(serde::de::Error::custom),
            Some(o) => Err(serde::de::Error::custom(format!("expected rational, got {o}"))),
        }
    }
}

impl Params {
    /// 𝔰 = (1,1,1), r0 = −3/2, β0 = 2 with a fourth-order operator.
    pub fn pam3d() -> Params {
        Params { d: 3, scaling: vec![qi(1); 3], r0: q(-3, 2), beta0: qi(2), ell: qi(4), ell1: qi(1), s0: None }
    }

    /// d = 2, 𝔰 = (1,1), ℓ = 2, r0 = −21/20, β0 = 19/10.
    pub fn numeric2d() -> Params {
        Params { d: 2, scaling: vec![qi(1); 2], r0: q(-21, 20), beta0: q(19, 10), ell: qi(2), ell1: qi(0), s0: None }
    }

    pub fn s_abs(&self) -> Q {
        self.scaling.iter().fold(Q::zero(), |a, b| a + b)
    }

    pub fn min_scaling(&self) -> Q {
        self.scaling.iter().min().cloned().unwrap_or_else(Q::one)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.d == 0 || self.scaling.len() != self.d {
            return bad(format!("scaling has {} entries for d = {}", self.scaling.len(), self.d));
        }
        if self.scaling.iter().any(|s| !s.is_positive()) {
            return bad("scaling entries must be positive".into());
        }
        let smax = self.scaling.iter().max().unwrap();
        if &self.ell <= smax {
            return bad("need ell > max scaling".into());
        }
        if !self.beta0.is_positive() || self.beta0 >= &self.ell - &self.ell1 {
            return bad("need 0 < beta0 < ell - ell1".into());
        }
        if let Some(s0) = &self.s0 {
            let lim = -self.s_abs() / qi(2) - s0;
            if self.r0 >= lim {
                return bad(format!("need r0 < -|s|/2 - s0 = {}", fmt_q(&lim)));
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `scaling` is comma separated.
    pub fn from_kv(text: &str) -> Result<Params> {
        let mut d = None;
        let (mut scaling, mut r0, mut beta0, mut ell, mut ell1, mut s0) = (None, None, None, None, None, None);
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", ln + 1)))?;
            let v = v.trim();
            match k.trim() {
                "d" => d = Some(v.parse::<usize>().map_err(|_| Error::Config(format!("bad d: {v}")))?),
                "scaling" => scaling = Some(v.split(',').map(parse_q).collect::<Result<Vec<_>>>()?),
                "r0" => r0 = Some(parse_q(v)?),
                "beta0" => beta0 = Some(parse_q(v)?),
                "ell" => ell = Some(parse_q(v)?),
                "ell1" => ell1 = Some(parse_q(v)?),
                "s0" => s0 = Some(parse_q(v)?),
                other => return Err(Error::Config(format!("unknown key {other}"))),
            }
        }
        let miss = |k: &str| Error::Config(format!("missing key {k}"));
        let scaling = scaling.ok_or_else(|| miss("scaling"))?;
        let p = Params {
            d: d.unwrap_or(scaling.len()),
            scaling,
            r0: r0.ok_or_else(|| miss("r0"))?,
            beta0: beta0.ok_or_else(|| miss("beta0"))?,
            ell: ell.ok_or_else(|| miss("ell"))?,
            ell1: ell1.unwrap_or_else(Q::zero),
            s0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn norm(&self, k: &MultiIndex) -> Q {
        k.norm(&self.scaling)
    }
}

/// An integrability exponent p ∈ [1,∞], stored as 1/p.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Exponent {
    pub inv: Q,
}

impl Exponent {
    pub fn infinity() -> Exponent {
        Exponent { inv: Q::zero() }
    }

    pub fn two() -> Exponent {
        Exponent { inv: q(1, 2) }
    }

    pub fn finite(p: Q) -> Exponent {
        Exponent { inv: Q::one() / p }
    }

    pub fn from_inv(inv: Q) -> Exponent {
        Exponent { inv }
    }

    pub fn is_infinite(&self) -> bool {
        self.inv.is_zero()
    }

    pub fn value(&self) -> Option<Q> {
        if self.inv.is_zero() {
            None
        } else {
            Some(Q::one() / &self.inv)
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self.value() {
            None => f64::INFINITY,
            Some(v) => crate::rational::to_f64(&v),
        }
    }

    pub fn parse(s: &str) -> Result<Exponent> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            return Ok(Exponent::infinity());
        }
        let v = parse_q(t)?;
        if v < Q::one() {
            return Err(Error::Config(format!("exponent must be in [1, inf]: {s}")));
        }
        Ok(Exponent::finite(v))
    }
}

impl Ord for Exponent {
    fn cmp(&self, o: &Self) -> Ordering {
        o.inv.cmp(&self.inv)
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            None => write!(f, "inf"),
            Some(v) => write!(f, "{}", fmt_q(&v)),
        }
    }
}

/// r_{ε,p}(τ) = cR0·(r0 − ε) + cBeta0·β0 + cInvP·|𝔰|/p + cConst.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeForm {
    pub c_r0: i64,
    pub c_beta0: i64,
    pub c_inv_p: i64,
    pub c_const: Q,
}

impl DegreeForm {
    pub fn of(t: &Tree, params: &Params) -> DegreeForm {
        let mut c = Q::zero();
        for (x, s) in t.dsum().iter().zip(&params.scaling) {
            if *x != 0 {
                c += s * Q::from_integer(BigInt::from(*x));
            }
        }
        DegreeForm {
            c_r0: (t.omega_count() + t.h_count()) as i64,
            c_beta0: t.k_count() as i64,
            c_inv_p: t.h_count() as i64,
            c_const: c,
        }
    }

    pub fn eval(&self, params: &Params, eps: &Q, inv_p: &Q) -> Q {
        let mut v = self.c_const.clone();
        if self.c_r0 != 0 {
            v += qi(self.c_r0) * (&params.r0 - eps);
        }
        if self.c_beta0 != 0 {
            v += qi(self.c_beta0) * &params.beta0;
        }
        if self.c_inv_p != 0 {
            v += qi(self.c_inv_p) * params.s_abs() * inv_p;
        }
        v
    }

    /// Coefficients (A, B, C) with r = A + B·ε + C·(1/p).
    pub fn affine(&self, params: &Params) -> (Q, Q, Q) {
        let a = self.eval(params, &Q::zero(), &Q::zero());
        (a, qi(-self.c_r0), qi(self.c_inv_p) * params.s_abs())
    }

    pub fn add(&self, o: &DegreeForm) -> DegreeForm {
        DegreeForm {
            c_r0: self.c_r0 + o.c_r0,
            c_beta0: self.c_beta0 + o.c_beta0,
            c_inv_p: self.c_inv_p + o.c_inv_p,
            c_const: &self.c_const + &o.c_const,
        }
    }
}

pub fn degree_form(t: &Tree, params: &Params) -> DegreeForm {
    DegreeForm::of(t, params)
}

pub fn degree_eval(f: &DegreeForm, params: &Params, eps: &Q, inv_p: &Q) -> Q {
    f.eval(params, eps, inv_p)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RIPair {
    pub regularity: Q,
    pub integrability: Exponent,
}

/// (r,i) < (s,j) iff r < s and 1/i ≤ 1/j.
pub fn ri_less(a: &RIPair, b: &RIPair) -> bool {
    a.regularity < b.regularity && a.integrability.inv <= b.integrability.inv
}

pub fn integrability(t: &Tree, p: &Exponent) -> Result<Exponent> {
    match t.h_count() {
        0 => Ok(Exponent::infinity()),
        1 => Ok(p.clone()),
        _ => Err(Error::TooManyH(t.encode())),
    }
}

/// The degree map at a fixed (ε, p).
#[derive(Clone, Debug)]
pub struct DegreeMap {
    pub params: Params,
    pub eps: Q,
    pub p: Exponent,
}

impl DegreeMap {
    pub fn new(params: Params, eps: Q, p: Exponent) -> DegreeMap {
        DegreeMap { params, eps, p }
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    pub fn at_p(&self, p: Exponent) -> DegreeMap {
        DegreeMap { params: self.params.clone(), eps: self.eps.clone(), p }
    }

    pub fn r(&self, t: &Tree) -> Q {
        DegreeForm::of(t, &self.params).eval(&self.params, &self.eps, &self.p.inv)
    }

    pub fn label(&self, l: Label) -> Q {
        match l {
            Label::Omega => &self.params.r0 - &self.eps,
            Label::H => &self.params.r0 - &self.eps + self.params.s_abs() * &self.p.inv,
            Label::K => self.params.beta0.clone(),
        }
    }

    pub fn norm(&self, k: &MultiIndex) -> Q {
        k.norm(&self.params.scaling)
    }

    fn generic_err(&self, what: String) -> Error {
        Error::Genericity { tree: what, eps: fmt_q(&self.eps), inv_p: fmt_q(&self.p.inv) }
    }

    /// r(t), failing if it vanishes on a tree other than 𝟏.
    pub fn r_checked(&self, t: &Tree) -> Result<Q> {
        let v = self.r(t);
        if v.is_zero() && !t.is_one() {
            return Err(self.generic_err(t.encode()));
        }
        Ok(v)
    }

    /// Degree of 𝓘_k^𝔩(t).
    pub fn planted(&self, l: Label, k: &MultiIndex, t: &Tree) -> Q {
        self.r(t) + self.label(l) - self.norm(k)
    }

    /// Whether 𝓘_k^𝔩(t) has positive degree; zero is a genericity failure.
    pub fn positive_planted(&self, l: Label, k: &MultiIndex, t: &Tree) -> Result<bool> {
        let v = self.planted(l, k, t);
        if v.is_zero() {
            return Err(self.generic_err(format!("I_{k}^{}({t})", l.symbol())));
        }
        Ok(v.is_positive())
    }

    /// All l with r(𝓘_{k+l}^𝔩(t)) > 0, checking that none is exactly 0.
    pub fn positive_shifts(&self, l: Label, k: &MultiIndex, t: &Tree) -> Result<Vec<MultiIndex>> {
        let bound = self.planted(l, k, t);
        let cands = MultiIndex::with_norm_up_to(self.d(), &self.params.scaling, &bound, false);
        let mut out = Vec::with_capacity(cands.len());
        for m in cands {
            if self.norm(&m) == bound {
                return Err(self.generic_err(format!("I_{}^{}({t})", k.add(&m), l.symbol())));
            }
            out.push(m);
        }
        Ok(out)
    }
}

/// p_ε(μ): the unique p ∈ [2,∞] with r_{ε,p}(μ) = 0, if any.
pub fn p_transition(mu: &Tree, params: &Params, eps: &Q) -> Result<Option<Exponent>> {
    if mu.h_count() != 1 {
        return Err(Error::NotT1(mu.encode()));
    }
    let f = DegreeForm::of(mu, params);
    let r_inf = f.eval(params, eps, &Q::zero());
    let r_2 = f.eval(params, eps, &q(1, 2));
    if !r_inf.is_negative() || r_2.is_negative() {
        return Ok(None);
    }
    Ok(Some(Exponent::from_inv(-r_inf / params.s_abs())))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSets {
    pub i_eps: Vec<Exponent>,
    pub j_p: Vec<Q>,
}

impl PhaseSets {
    /// ⌊p⌋ = max{q ∈ {2} ∪ I_ε : q < p}.
    pub fn floor(&self, p: &Exponent) -> Exponent {
        let mut best = Exponent::two();
        for qv in &self.i_eps {
            if qv < p && qv > &best {
                best = qv.clone();
            }
        }
        best
    }

    /// Representatives strictly inside every cell of [2,∞] cut at I_ε,
    /// paired with the left endpoint of the cell.
    pub fn cells(&self) -> Vec<(Exponent, Exponent)> {
        let mut pts: Vec<Exponent> = vec![Exponent::two()];
        for p in &self.i_eps {
            if p > &Exponent::two() && !p.is_infinite() {
                pts.push(p.clone());
            }
        }
        pts.sort();
        pts.dedup();
        let mut out = Vec::new();
        for (i, left) in pts.iter().enumerate() {
            let right_inv = if i + 1 < pts.len() { pts[i + 1].inv.clone() } else { Q::zero() };
            let mid = (&left.inv + &right_inv) / qi(2);
            out.push((left.clone(), Exponent::from_inv(mid)));
        }
        out
    }
}

pub fn phase_sets(gens: &[Tree], params: &Params, eps: &Q, p: &Exponent) -> Result<PhaseSets> {
    let mut i_set = BTreeSet::new();
    let mut j_set = BTreeSet::new();
    for mu in gens {
        let f = DegreeForm::of(mu, params);
        if !mu.is_one() && f.eval(params, eps, &p.inv).is_zero() {
            return Err(Error::Genericity { tree: mu.encode(), eps: fmt_q(eps), inv_p: fmt_q(&p.inv) });
        }
        if mu.h_count() == 1 {
            let r_inf = f.eval(params, eps, &Q::zero());
            let r_2 = f.eval(params, eps, &q(1, 2));
            if !r_inf.is_positive() && !r_2.is_negative() {
                i_set.insert(Exponent::from_inv(-r_inf / params.s_abs()));
            }
        }
        if f.c_r0 > 0 {
            let e = f.eval(params, &Q::zero(), &p.inv) / qi(f.c_r0);
            if !e.is_negative() {
                j_set.insert(e);
            }
        }
    }
    Ok(PhaseSets { i_eps: i_set.into_iter().collect(), j_p: j_set.into_iter().collect() })
}

/// ε₀ from generator forms (lines in the (ε, 1/p) plane) and from the forms
/// whose relative order must persist at p ∈ {2, ∞}. `None` means unbounded.
pub fn epsilon0_forms(gens: &[DegreeForm], ordered: &[DegreeForm], params: &Params) -> Option<Q> {
    let half = q(1, 2);
    let mut best: Option<Q> = None;
    let mut offer = |e: Q| {
        if e.is_positive() && best.as_ref().is_none_or(|b| &e < b) {
            best = Some(e);
        }
    };
    let lines: Vec<(Q, Q, Q)> = gens.iter().map(|f| f.affine(params)).collect();
    for (a, b, c) in &lines {
        if !b.is_zero() {
            offer(-a / b);
            offer(-(a + c * &half) / b);
        }
    }
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a1, b1, c1) = &lines[i];
            let (a2, b2, c2) = &lines[j];
            let det = b1 * c2 - b2 * c1;
            if det.is_zero() {
                continue;
            }
            let e = (-(a1 * c2) + a2 * c1) / &det;
            let u = (-(b1 * a2) + b2 * a1) / &det;
            if !u.is_negative() && u <= half {
                offer(e);
            }
        }
    }
    let ord: Vec<(Q, Q, Q)> = ordered.iter().map(|f| f.affine(params)).collect();
    for i in 0..ord.len() {
        for j in i + 1..ord.len() {
            let db = &ord[i].1 - &ord[j].1;
            if db.is_zero() {
                continue;
            }
            for u in [Q::zero(), half.clone()] {
                let da = &ord[i].0 - &ord[j].0 + (&ord[i].2 - &ord[j].2) * &u;
                if !da.is_zero() {
                    offer(-da / &db);
                }
            }
        }
    }
    best
}

/// ε₀ for a generator set and ordered basis; requires genericity at ε = 0.
pub fn epsilon0(gens: &[Tree], ordered: &[Tree], params: &Params) -> Result<Option<Q>> {
    for g in gens {
        let f = DegreeForm::of(g, params);
        for u in [Q::zero(), q(1, 2)] {
            if !g.is_one() && f.eval(params, &Q::zero(), &u).is_zero() {
                return Err(Error::Genericity { tree: g.encode(), eps: "0/1".into(), inv_p: fmt_q(&u) });
            }
        }
    }
    let gf: Vec<DegreeForm> = gens.iter().map(|t| DegreeForm::of(t, params)).collect();
    let of: Vec<DegreeForm> = ordered.iter().map(|t| DegreeForm::of(t, params)).collect();
    Ok(epsilon0_forms(&gf, &of, params))
}
