//! Finite formal linear combinations with deterministic (sorted) iteration.

use crate::rational::{to_f64, Q};
use crate::tree::Tree;
use num_traits::{One, Zero};
use std::collections::btree_map::{self, BTreeMap};
use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

pub trait Scalar:
    Clone + Debug + PartialEq + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + Send + Sync
{
    fn from_q(q: &Q) -> Self;
    fn close(&self, other: &Self) -> bool;
    fn to_f64(&self) -> f64;
}

impl Scalar for Q {
    fn from_q(q: &Q) -> Self {
        q.clone()
    }
    fn close(&self, other: &Self) -> bool {
        self == other
    }
    fn to_f64(&self) -> f64 {
        to_f64(self)
    }
}

impl Scalar for f64 {
    fn from_q(q: &Q) -> Self {
        to_f64(q)
    }
    fn close(&self, other: &Self) -> bool {
        (self - other).abs() <= 1e-10 * (1.0 + self.abs().max(other.abs()))
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct Lin<K: Ord, C = Q> {
    terms: BTreeMap<K, C>,
}

pub type LinComb = Lin<Tree, Q>;
pub type TensorSum = Lin<(Tree, Tree), Q>;
pub type Tensor3 = Lin<(Tree, Tree, Tree), Q>;

impl<K: Ord, C> Default for Lin<K, C> {
    fn default() -> Self {
        Lin { terms: BTreeMap::new() }
    }
}

impl<K: Ord + Clone, C: Scalar> Lin<K, C> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(k: K, c: C) -> Self {
        let mut l = Self::zero();
        l.add_term(k, c);
        l
    }

    pub fn basis(k: K) -> Self {
        Self::single(k, C::one())
    }

    pub fn add_term(&mut self, k: K, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(k) {
            btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            btree_map::Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add_scaled(&mut self, o: &Self, c: &C) {
        for (k, v) in &o.terms {
            self.add_term(k.clone(), v.clone() * c.clone());
        }
    }

    pub fn add_assign(&mut self, o: &Self) {
        for (k, v) in &o.terms {
            self.add_term(k.clone(), v.clone());
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (k, v) in &o.terms {
            r.add_term(k.clone(), -v.clone());
        }
        r
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut r = Self::zero();
        for (k, v) in &self.terms {
            r.add_term(k.clone(), v.clone() * c.clone());
        }
        r
    }

    pub fn get(&self, k: &K) -> C {
        self.terms.get(k).cloned().unwrap_or_else(C::zero)
    }

    pub fn contains(&self, k: &K) -> bool {
        self.terms.contains_key(k)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &C)> {
        self.terms.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.terms.keys()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn retain(&mut self, mut f: impl FnMut(&K) -> bool) {
        self.terms.retain(|k, _| f(k));
    }

    pub fn map_coeffs<D: Scalar>(&self, f: impl Fn(&C) -> D) -> Lin<K, D> {
        let mut r = Lin::zero();
        for (k, v) in &self.terms {
            r.add_term(k.clone(), f(v));
        }
        r
    }

    /// Term-wise comparison using `Scalar::close`.
    pub fn approx_eq(&self, o: &Self) -> bool {
        let z = C::zero();
        let keys: std::collections::BTreeSet<&K> = self.terms.keys().chain(o.terms.keys()).collect();
        keys.into_iter().all(|k| self.terms.get(k).unwrap_or(&z).close(o.terms.get(k).unwrap_or(&z)))
    }
}

impl<C: Scalar> Lin<Tree, C> {
    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for (a, x) in &self.terms {
            for (b, y) in &o.terms {
                r.add_term(a.product(b), x.clone() * y.clone());
            }
        }
        r
    }

    pub fn one(d: usize) -> Self {
        Self::basis(Tree::one(d))
    }

    /// Drops every term that has a K-labelled leaf.
    pub fn quotient_by_k_leaves(&self) -> Self {
        let mut r = self.clone();
        r.retain(|t| !t.has_k_leaf());
        r
    }
}

impl<C: Scalar> Lin<(Tree, Tree), C> {
    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for ((a, b), x) in &self.terms {
            for ((c, e), y) in &o.terms {
                r.add_term((a.product(c), b.product(e)), x.clone() * y.clone());
            }
        }
        r
    }
}

impl<K: Ord, C> IntoIterator for Lin<K, C> {
    type Item = (K, C);
    type IntoIter = btree_map::IntoIter<K, C>;
    fn into_iter(self) -> Self::IntoIter {
        self.terms.into_iter()
    }
}

impl<K: Ord + Clone, C: Scalar> FromIterator<(K, C)> for Lin<K, C> {
    fn from_iter<I: IntoIterator<Item = (K, C)>>(it: I) -> Self {
        let mut r = Self::zero();
        for (k, c) in it {
            r.add_term(k, c);
        }
        r
    }
}
