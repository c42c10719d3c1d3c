use crate::error::{Error, Result};
use crate::rational::{binomial, factorial, Q};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use std::fmt;

/// A multi-index k ∈ ℕ^d.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    pub fn unit(d: usize, j: usize) -> Self {
        let mut v = vec![0; d];
        v[j] = 1;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.0.len() != d {
            return Err(Error::Dimension { expected: d, got: self.0.len() });
        }
        Ok(())
    }

    pub fn add(&self, o: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), o.dim());
        MultiIndex(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn checked_sub(&self, o: &MultiIndex) -> Option<MultiIndex> {
        let mut v = Vec::with_capacity(self.dim());
        for (a, b) in self.0.iter().zip(&o.0) {
            v.push(a.checked_sub(*b)?);
        }
        Some(MultiIndex(v))
    }

    pub fn le(&self, o: &MultiIndex) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a <= b)
    }

    /// |k|_𝔰 = Σ 𝔰_j k_j.
    pub fn norm(&self, scaling: &[Q]) -> Q {
        let mut acc = Q::zero();
        for (k, s) in self.0.iter().zip(scaling) {
            if *k != 0 {
                acc += s * Q::from_integer(BigInt::from(*k));
            }
        }
        acc
    }

    pub fn factorial(&self) -> BigInt {
        self.0.iter().fold(BigInt::one(), |acc, &k| acc * factorial(k))
    }

    pub fn binom(&self, l: &MultiIndex) -> BigInt {
        self.0.iter().zip(&l.0).fold(BigInt::one(), |acc, (&n, &k)| acc * binomial(n, k))
    }

    /// All l ≤ self, in lexicographic order.
    pub fn below(&self) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex(Vec::with_capacity(self.dim()))];
        for &k in &self.0 {
            let mut next = Vec::with_capacity(out.len() * (k as usize + 1));
            for p in &out {
                for j in 0..=k {
                    let mut v = p.0.clone();
                    v.push(j);
                    next.push(MultiIndex(v));
                }
            }
            out = next;
        }
        out
    }

    /// All m ∈ ℕ^d with |m|_𝔰 ≤ bound (or < bound if `strict`).
    pub fn with_norm_up_to(d: usize, scaling: &[Q], bound: &Q, strict: bool) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        if bound < &Q::zero() || (strict && bound.is_zero()) {
            return out;
        }
        let mut cur = vec![0u32; d];
        fn rec(j: usize, d: usize, sc: &[Q], rem: Q, strict: bool, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
            if j == d {
                out.push(MultiIndex(cur.clone()));
                return;
            }
            let mut k = 0u32;
            let mut r = rem;
            loop {
                let ok = if strict { r > Q::zero() } else { r >= Q::zero() };
                if !ok {
                    break;
                }
                cur[j] = k;
                rec(j + 1, d, sc, r.clone(), strict, cur, out);
                k += 1;
                r -= &sc[j];
            }
            cur[j] = 0;
        }
        rec(0, d, scaling, bound.clone(), strict, &mut cur, &mut out);
        out.sort();
        out
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}
