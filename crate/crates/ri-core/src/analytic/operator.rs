//! The operator P(∂), its semigroup Q_t and the kernel operator 𝒦.

use super::grid::{Field, Grid, Spectrum};
use crate::error::{Error, Result};
use num_complex::Complex64;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub k: Vec<u32>,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Quadrature {
    Closed,
    Dyadic {
        points: usize,
        #[serde(default)]
        blocks: Option<usize>,
        #[serde(default = "default_tol")]
        tol: f64,
    },
}

fn default_tol() -> f64 {
    1e-9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    /// Coefficients a_k of P(λ) = Σ a_k λ^k, evaluated at λ = iξ.
    pub symbol: Vec<Term>,
    pub ell: f64,
    /// Coefficients b_l of K̃_t = Σ b_l ∂^l Q_t.
    pub kernel: Vec<Term>,
    /// Damping of the first frequency shell by χ, in [0,1].
    #[serde(default, rename = "firstShellDamping")]
    pub first_shell_damping: f64,
    #[serde(default = "closed")]
    pub quadrature: Quadrature,
}

fn closed() -> Quadrature {
    Quadrature::Closed
}

impl OperatorSpec {
    /// P = Δ with K̃_t = Q_t.
    pub fn heat(d: usize) -> OperatorSpec {
        let symbol = (0..d)
            .map(|a| {
                let mut k = vec![0; d];
                k[a] = 2;
                Term { k, c: 1.0 }
            })
            .collect();
        OperatorSpec { symbol, ell: 2.0, kernel: vec![Term { k: vec![0; d], c: 1.0 }], first_shell_damping: 0.0, quadrature: Quadrature::Closed }
    }

    /// P = −Δ² with K̃_t = Q_t.
    pub fn biharmonic(d: usize) -> OperatorSpec {
        let mut symbol = Vec::new();
        for a in 0..d {
            for b in a..d {
                let mut k = vec![0; d];
                k[a] += 2;
                k[b] += 2;
                symbol.push(Term { k, c: if a == b { -1.0 } else { -2.0 } });
            }
        }
        OperatorSpec { symbol, ell: 4.0, kernel: vec![Term { k: vec![0; d], c: 1.0 }], first_shell_damping: 0.0, quadrature: Quadrature::Closed }
    }
}

fn ipow(lam: &[f64], k: &[u32]) -> Complex64 {
    let mut z = Complex64::new(1.0, 0.0);
    for (l, &e) in lam.iter().zip(k) {
        for _ in 0..e {
            z *= Complex64::new(0.0, *l);
        }
    }
    z
}

/// ∫₀¹ e^{tz} dt.
pub fn time_integral_closed(z: Complex64) -> Complex64 {
    if z.norm() < 1e-8 {
        Complex64::new(1.0, 0.0) + z / 2.0 + z * z / 6.0
    } else {
        (z.exp() - 1.0) / z
    }
}

fn midpoint(z: Complex64, a: f64, b: f64, m: usize) -> Complex64 {
    let h = (b - a) / m as f64;
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..m {
        s += (z * (a + (i as f64 + 0.5) * h)).exp();
    }
    s * h
}

fn dyadic_sum(z: Complex64, points: usize, blocks: usize) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut hi = 1.0f64;
    for _ in 0..blocks {
        let lo = hi / 2.0;
        acc += midpoint(z, lo, hi, points);
        hi = lo;
    }
    acc + midpoint(z, 0.0, hi, points)
}

/// Number of dyadic blocks: at least `min_blocks`, and enough that the last
/// block has |z|·2^{−J} ≤ 1/4.
pub fn dyadic_blocks(z: Complex64, min_blocks: usize) -> usize {
    let need = z.norm().max(1.0).log2().ceil() as usize + 2;
    min_blocks.max(need)
}

/// Dyadic-block midpoint rule with Richardson extrapolation on M, 2M and 4M
/// points per block. Returns the (2M, 4M) extrapolate and its relative
/// disagreement with the (M, 2M) one.
pub fn time_integral_dyadic(z: Complex64, points: usize, blocks: usize) -> (Complex64, f64) {
    let s1 = dyadic_sum(z, points, blocks);
    let s2 = dyadic_sum(z, 2 * points, blocks);
    let s4 = dyadic_sum(z, 4 * points, blocks);
    let r1 = (s2 * 4.0 - s1) / 3.0;
    let r2 = (s4 * 4.0 - s2) / 3.0;
    let scale = r2.norm().max(1e-300);
    (r2, (r2 - r1).norm() / scale)
}

pub struct Operator {
    pub spec: OperatorSpec,
    pub grid: Arc<Grid>,
    lam: Vec<Vec<f64>>,
    psym: Vec<Complex64>,
    base: Vec<Complex64>,
    kcache: Mutex<HashMap<Vec<u32>, Arc<Vec<Complex64>>>>,
    dcache: Mutex<HashMap<Vec<u32>, Arc<Vec<Complex64>>>>,
    pub quadrature_defect: f64,
    pub ellipticity_delta: f64,
}

impl Operator {
    pub fn new(spec: OperatorSpec, grid: Arc<Grid>) -> Result<Operator> {
        let d = grid.d();
        for t in spec.symbol.iter().chain(&spec.kernel) {
            if t.k.len() != d {
                return Err(Error::Dimension { expected: d, got: t.k.len() });
            }
        }
        let n = grid.len();
        let lam: Vec<Vec<f64>> = (0..n).map(|i| grid.freqs(i)).collect();
        let psym: Vec<Complex64> = lam.iter().map(|l| spec.symbol.iter().map(|t| ipow(l, &t.k) * t.c).sum()).collect();
        let mut delta = f64::INFINITY;
        for i in 1..n {
            let nrm: f64 = lam[i].iter().map(|x| x.abs()).sum();
            let v = -psym[i].re / nrm.powf(spec.ell);
            if v < delta {
                delta = v;
            }
        }
        if !(delta > 0.0) {
            return Err(Error::Ellipticity(format!("min -Re P / |lambda|^ell = {delta:e}")));
        }
        let mut worst = 0.0f64;
        let mut base = vec![Complex64::new(0.0, 0.0); n];
        for i in 1..n {
            let modes = grid.modes(i);
            let shell = modes.iter().map(|m| m.abs()).max().unwrap_or(0) == 1;
            let cut = if shell { 1.0 - spec.first_shell_damping } else { 1.0 };
            let b: Complex64 = spec.kernel.iter().map(|t| ipow(&lam[i], &t.k) * t.c).sum();
            let tint = match &spec.quadrature {
                Quadrature::Closed => time_integral_closed(psym[i]),
                Quadrature::Dyadic { points, blocks, tol } => {
                    let nmax = *grid.sizes.iter().max().unwrap() as f64;
                    let j = blocks.unwrap_or_else(|| dyadic_blocks(psym[i], (spec.ell * nmax.log2()).ceil() as usize + 2));
                    let (v, defect) = time_integral_dyadic(psym[i], *points, j);
                    worst = worst.max(defect);
                    if defect > *tol {
                        return Err(Error::Quadrature(defect));
                    }
                    v
                }
            };
            base[i] = b * tint * cut;
        }
        Ok(Operator {
            spec,
            grid,
            lam,
            psym,
            base,
            kcache: Mutex::new(HashMap::new()),
            dcache: Mutex::new(HashMap::new()),
            quadrature_defect: worst,
            ellipticity_delta: delta,
        })
    }

    pub fn symbol(&self, i: usize) -> Complex64 {
        self.psym[i]
    }

    /// Multiplier of ∂^k.
    pub fn deriv_multiplier(&self, k: &[u32]) -> Arc<Vec<Complex64>> {
        if let Some(v) = self.dcache.lock().get(k) {
            return v.clone();
        }
        let v: Arc<Vec<Complex64>> = Arc::new(self.lam.iter().map(|l| ipow(l, k)).collect());
        self.dcache.lock().insert(k.to_vec(), v.clone());
        v
    }

    /// Multiplier of ∂^k𝒦.
    pub fn kernel_multiplier(&self, k: &[u32]) -> Arc<Vec<Complex64>> {
        if let Some(v) = self.kcache.lock().get(k) {
            return v.clone();
        }
        let v: Arc<Vec<Complex64>> = Arc::new(self.lam.iter().zip(&self.base).map(|(l, b)| ipow(l, k) * b).collect());
        self.kcache.lock().insert(k.to_vec(), v.clone());
        v
    }

    pub fn heat_multiplier(&self, t: f64, k: &[u32]) -> Vec<Complex64> {
        self.lam.iter().zip(&self.psym).map(|(l, p)| ipow(l, k) * (p * t).exp()).collect()
    }

    pub fn heat_apply(&self, f: &[f64], t: f64, k: &[u32]) -> Result<Field> {
        if !(t > 0.0) {
            return Err(Error::Precondition("heat time must be positive".into()));
        }
        Ok(self.grid.apply_multiplier(f, &self.heat_multiplier(t, k)))
    }

    pub fn deriv_apply(&self, f: &[f64], k: &[u32]) -> Field {
        if k.iter().all(|&x| x == 0) {
            return f.to_vec();
        }
        self.grid.apply_multiplier(f, &self.deriv_multiplier(k))
    }

    pub fn kernel_apply(&self, f: &[f64], k: &[u32]) -> Field {
        self.grid.apply_multiplier(f, &self.kernel_multiplier(k))
    }

    pub fn kernel_apply_spec(&self, s: &Spectrum, k: &[u32]) -> Field {
        let m = self.kernel_multiplier(k);
        self.grid.ifft_real(s.iter().zip(m.iter()).map(|(a, b)| a * b).collect())
    }

    /// ∂^k𝒦(x, f) from the spectrum of f.
    pub fn kernel_eval(&self, s: &Spectrum, k: &[u32], x: usize) -> f64 {
        self.grid.eval_at(s, &self.kernel_multiplier(k), x)
    }

    /// ∂^k f(x) from the spectrum of f.
    pub fn deriv_eval(&self, s: &Spectrum, k: &[u32], x: usize) -> f64 {
        self.grid.eval_at(s, &self.deriv_multiplier(k), x)
    }

    /// Q_t(x, f) from the spectrum of f.
    pub fn heat_eval(&self, s: &Spectrum, t: f64, x: usize) -> f64 {
        let d = self.grid.d();
        self.grid.eval_at(s, &self.heat_multiplier(t, &vec![0; d]), x)
    }
}
