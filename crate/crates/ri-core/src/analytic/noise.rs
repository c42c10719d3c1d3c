//! Noise samplers and mollification.

use super::grid::{Field, Grid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Law of the Fourier coefficients f^k of a random Fourier series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Law {
    /// f^k = amplitude (1 + |k|²)^{−alpha/2}.
    Power { alpha: f64, amplitude: f64 },
    /// f^k = amplitude exp(−|k|²/(2 width²)).
    Gauss { width: f64, amplitude: f64 },
}

impl Law {
    pub fn coefficient(&self, k2: f64) -> f64 {
        match self {
            Law::Power { alpha, amplitude } => amplitude * (1.0 + k2).powf(-alpha / 2.0),
            Law::Gauss { width, amplitude } => amplitude * (-k2 / (2.0 * width * width)).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseKind {
    GaussianWhite,
    RandomFourierSeries {
        law: Law,
        /// Sharp truncation |k| ≤ cutoff of the integer modes.
        #[serde(default)]
        cutoff: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub seed: u64,
}

fn mode_rng(seed: u64, sample: u64, mode: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&sample.to_le_bytes());
    key[16..24].copy_from_slice(&mode.to_le_bytes());
    key[24..].copy_from_slice(b"rfs-mode");
    ChaCha20Rng::from_seed(key)
}

/// Sample number `sample` of the noise; the stream only depends on (seed, sample).
pub fn sample_noise(spec: &NoiseSpec, grid: &Grid, sample: u64) -> Field {
    match &spec.kind {
        NoiseKind::GaussianWhite => {
            let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
            rng.set_stream(sample);
            let sd = grid.cell_volume().powf(-0.5);
            (0..grid.len()).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
        }
        NoiseKind::RandomFourierSeries { law, cutoff } => {
            let n = grid.len();
            let mut s = vec![Complex64::new(0.0, 0.0); n];
            for i in 0..n {
                let c = grid.conj_index(i);
                if c < i {
                    continue;
                }
                let m = grid.modes(i);
                let k2: f64 = m.iter().map(|&x| (x * x) as f64).sum();
                // Nyquist modes are left out so that derivatives stay real.
                if m.iter().enumerate().any(|(a, &x)| x.unsigned_abs() as usize * 2 == grid.sizes[a]) {
                    continue;
                }
                if let Some(cut) = cutoff {
                    if k2.sqrt() > *cut {
                        continue;
                    }
                }
                let f = law.coefficient(k2) * n as f64;
                let mut rng = mode_rng(spec.seed, sample, i as u64);
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                if c == i {
                    s[i] = Complex64::new(f * a, 0.0);
                } else {
                    let z = Complex64::new(a, b) * (f / 2f64.sqrt());
                    s[i] = z;
                    s[c] = z.conj();
                }
            }
            grid.ifft_real(s)
        }
    }
}

/// Multiplier of the Gaussian mollifier at scale 2^{−n}.
pub fn mollifier(grid: &Grid, n: u32) -> Vec<Complex64> {
    let delta = 2f64.powi(-(n as i32));
    (0..grid.len())
        .map(|i| {
            let l2: f64 = grid.freqs(i).iter().map(|l| l * l).sum();
            Complex64::new((-0.5 * delta * delta * l2).exp(), 0.0)
        })
        .collect()
}

pub fn mollify(grid: &Grid, f: &[f64], n: u32) -> Field {
    grid.apply_multiplier(f, &mollifier(grid, n))
}

/// Sharp truncation to integer modes with |k| ≤ n.
pub fn truncate_modes(grid: &Grid, f: &[f64], n: f64) -> Field {
    let m: Vec<Complex64> = (0..grid.len())
        .map(|i| {
            let k2: f64 = grid.modes(i).iter().map(|&x| (x * x) as f64).sum();
            Complex64::new(if k2.sqrt() <= n { 1.0 } else { 0.0 }, 0.0)
        })
        .collect();
    grid.apply_multiplier(f, &m)
}

/// Mean spectral energy per integer-radius shell.
pub fn shell_energy(grid: &Grid, f: &[f64]) -> Vec<(f64, usize)> {
    let s = grid.fft(f);
    let mut acc: Vec<(f64, usize)> = Vec::new();
    for (i, z) in s.iter().enumerate() {
        let r = grid.modes(i).iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt().round() as usize;
        if acc.len() <= r {
            acc.resize(r + 1, (0.0, 0));
        }
        acc[r].0 += z.norm_sqr();
        acc[r].1 += 1;
    }
    acc.into_iter().map(|(e, c)| (if c > 0 { e / c as f64 } else { 0.0 }, c)).collect()
}

