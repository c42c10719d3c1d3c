//! Periodic grids, fields and d-dimensional FFTs.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub type Field = Vec<f64>;
pub type Spectrum = Vec<Complex64>;

pub struct Grid {
    pub sizes: Vec<usize>,
    pub period: Vec<f64>,
    strides: Vec<usize>,
    total: usize,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
    /// e^{2πi m/N} tables per axis.
    roots: Vec<Vec<Complex64>>,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Grid({:?}, period {:?})", self.sizes, self.period)
    }
}

impl Grid {
    pub fn new(sizes: Vec<usize>, period: Vec<f64>) -> Result<Grid> {
        if sizes.is_empty() || sizes.len() != period.len() {
            return Err(Error::Config("grid sizes and periods must have equal nonzero length".into()));
        }
        for &n in &sizes {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::Config(format!("grid size {n} is not a power of two >= 4")));
            }
        }
        if period.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Config("periods must be positive".into()));
        }
        let d = sizes.len();
        let mut strides = vec![1; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * sizes[a + 1];
        }
        let total = sizes.iter().product();
        let mut planner = FftPlanner::new();
        let fwd = sizes.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inv = sizes.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let roots = sizes
            .iter()
            .map(|&n| (0..n).map(|m| Complex64::from_polar(1.0, 2.0 * PI * m as f64 / n as f64)).collect())
            .collect();
        Ok(Grid { sizes, period, strides, total, fwd, inv, roots })
    }

    pub fn d(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.sizes.iter().zip(&self.period).map(|(&n, p)| p / n as f64).product()
    }

    pub fn multi(&self, i: usize) -> Vec<usize> {
        (0..self.d()).map(|a| (i / self.strides[a]) % self.sizes[a]).collect()
    }

    pub fn index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn coord(&self, i: usize, axis: usize) -> f64 {
        let j = (i / self.strides[axis]) % self.sizes[axis];
        j as f64 * self.period[axis] / self.sizes[axis] as f64
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        (0..self.d()).map(|a| self.coord(i, a)).collect()
    }

    /// Signed integer mode on an axis.
    pub fn mode(&self, axis: usize, j: usize) -> i64 {
        let n = self.sizes[axis];
        if j < n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    pub fn modes(&self, i: usize) -> Vec<i64> {
        (0..self.d()).map(|a| self.mode(a, (i / self.strides[a]) % self.sizes[a])).collect()
    }

    /// Angular frequency λ = 2πm/P per axis.
    pub fn freqs(&self, i: usize) -> Vec<f64> {
        self.modes(i).iter().enumerate().map(|(a, &m)| 2.0 * PI * m as f64 / self.period[a]).collect()
    }

    /// Index of the mode −m.
    pub fn conj_index(&self, i: usize) -> usize {
        let m = self.multi(i);
        let c: Vec<usize> = m.iter().zip(&self.sizes).map(|(&j, &n)| (n - j) % n).collect();
        self.index(&c)
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let d = self.d();
        for a in 0..d {
            let n = self.sizes[a];
            let stride = self.strides[a];
            let plan = if forward { &self.fwd[a] } else { &self.inv[a] };
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            for base in 0..self.total {
                if (base / stride) % n != 0 {
                    continue;
                }
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = data[base + j * stride];
                }
                plan.process_with_scratch(&mut buf, &mut scratch);
                for (j, b) in buf.iter().enumerate() {
                    data[base + j * stride] = *b;
                }
            }
        }
    }

    pub fn fft(&self, f: &[f64]) -> Spectrum {
        let mut s: Spectrum = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut s, true);
        s
    }

    /// Inverse transform, normalized, real part.
    pub fn ifft_real(&self, mut s: Spectrum) -> Field {
        self.transform(&mut s, false);
        let nrm = 1.0 / self.total as f64;
        s.iter().map(|c| c.re * nrm).collect()
    }

    /// Applies a Fourier multiplier to a real field.
    pub fn apply_multiplier(&self, f: &[f64], m: &[Complex64]) -> Field {
        let mut s = self.fft(f);
        for (a, b) in s.iter_mut().zip(m) {
            *a *= *b;
        }
        self.ifft_real(s)
    }

    /// Re (1/N) Σ_m mult(m) ŝ(m) e^{iλ_m·x} at the grid point with index `x`.
    pub fn eval_at(&self, s: &[Complex64], mult: &[Complex64], x: usize) -> f64 {
        let xm = self.multi(x);
        let d = self.d();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; d];
        for i in 0..self.total {
            if i > 0 {
                let mut a = d - 1;
                loop {
                    idx[a] += 1;
                    if idx[a] < self.sizes[a] {
                        break;
                    }
                    idx[a] = 0;
                    a -= 1;
                }
            }
            let mut ph = Complex64::new(1.0, 0.0);
            for a in 0..d {
                ph *= self.roots[a][(idx[a] * xm[a]) % self.sizes[a]];
            }
            acc += mult[i] * s[i] * ph;
        }
        acc.re / self.total as f64
    }

    /// Index of the grid point nearest to a coordinate vector.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let m: Vec<usize> = (0..self.d())
            .map(|a| {
                let h = self.period[a] / self.sizes[a] as f64;
                ((x[a] / h).round() as i64).rem_euclid(self.sizes[a] as i64) as usize
            })
            .collect();
        self.index(&m)
    }
}

pub fn sup_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// max|a − b| / max(‖a‖∞, ‖b‖∞), or the absolute deviation if both vanish.
pub fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let dev = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let s = sup_norm(a).max(sup_norm(b));
    if s > 0.0 {
        dev / s
    } else {
        dev
    }
}
