//! Monte Carlo estimators: Q₁-tested expectations, BPHZ constants, and
//! scaling-exponent fits.

use super::grid::Field;
use super::model::{lp_norm, ModelContext};
use super::noise::{mollify, sample_noise, NoiseSpec};
use super::operator::Operator;
use crate::error::{Error, Result};
use crate::grading::{integrability, Exponent};
use crate::rational::{to_f64, Q};
use crate::renorm::{make_rc, CounterTerms, PreparationMap};
use crate::sector::Sector;
use crate::tree::Tree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// 𝔼[Q₁(x, Π_xτ)].
    Qbar,
    /// 𝔼[(Π^R τ)(x)].
    Pointwise,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "qbar" => Ok(Mode::Qbar),
            "pointwise" => Ok(Mode::Pointwise),
            _ => Err(Error::Config(format!("unknown mode {s}"))),
        }
    }
}

/// Everything a Monte Carlo run depends on.
#[derive(Clone)]
pub struct Ensemble {
    pub sector: Arc<Sector>,
    pub op: Arc<Operator>,
    pub noise: NoiseSpec,
    pub level: Option<u32>,
    pub first: u64,
    pub samples: usize,
    pub eps: Q,
    pub base_point: usize,
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub tree: String,
    pub mean: f64,
    pub stderr: f64,
    pub n: Option<u32>,
    pub samples: usize,
}

pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::INFINITY);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

impl Ensemble {
    pub fn noise_sample(&self, i: u64, level: Option<u32>) -> Field {
        let g = &self.op.grid;
        let w = sample_noise(&self.noise, g, i);
        match level {
            Some(n) => mollify(g, &w, n),
            None => w,
        }
    }

    fn check_trees(&self, trees: &[Tree]) -> Result<()> {
        let dm = crate::grading::DegreeMap::new(self.sector.params.clone(), self.eps.clone(), Exponent::infinity());
        for t in trees {
            if t.h_count() != 0 || !self.sector.in_basis(t) {
                return Err(Error::Precondition(format!("{t} is not a tree of B")));
            }
            if dm.r_checked(t)? > Q::from_integer(0.into()) {
                return Err(Error::Precondition(format!("{t} has positive degree at p = inf")));
            }
        }
        Ok(())
    }

    /// values[sample][tree] at the configured level.
    pub fn values(&self, prep: &Arc<PreparationMap<f64>>, trees: &[Tree], level: Option<u32>) -> Result<Vec<Vec<f64>>> {
        self.check_trees(trees)?;
        let n = self.op.grid.len();
        let rows: Vec<Result<Vec<f64>>> = (0..self.samples as u64)
            .into_par_iter()
            .map(|i| {
                let xi = self.noise_sample(self.first + i, level);
                let ctx = ModelContext::new(self.sector.clone(), prep.clone(), self.op.clone(), xi, vec![0.0; n], self.eps.clone())?;
                let mut route = ctx.delta_route(&Exponent::infinity(), self.base_point);
                trees
                    .iter()
                    .map(|t| match self.mode {
                        Mode::Qbar => {
                            let f = route.pi(t)?;
                            let s = ctx.grid().fft(&f);
                            Ok(ctx.op.heat_eval(&s, 1.0, self.base_point))
                        }
                        Mode::Pointwise => Ok(ctx.renormalized(t)?[self.base_point]),
                    })
                    .collect()
            })
            .collect();
        rows.into_iter().collect()
    }

    pub fn estimate(&self, prep: &Arc<PreparationMap<f64>>, trees: &[Tree]) -> Result<Vec<Estimate>> {
        let v = self.values(prep, trees, self.level)?;
        Ok(trees
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let col: Vec<f64> = v.iter().map(|r| r[j]).collect();
                let (mean, stderr) = mean_stderr(&col);
                Estimate { tree: t.encode(), mean, stderr, n: self.level, samples: self.samples }
            })
            .collect())
    }
}

/// Means at each level and of successive differences, on common samples.
#[derive(Clone, Debug, Serialize)]
pub struct LevelStudy {
    pub tree: String,
    pub levels: Vec<u32>,
    pub means: Vec<(f64, f64)>,
    pub increments: Vec<(f64, f64)>,
    pub increment_changes: Vec<(f64, f64)>,
}

pub fn level_study(e: &Ensemble, prep: &Arc<PreparationMap<f64>>, trees: &[Tree], levels: &[u32]) -> Result<Vec<LevelStudy>> {
    let per_level: Vec<Vec<Vec<f64>>> = levels.iter().map(|&n| e.values(prep, trees, Some(n))).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (j, t) in trees.iter().enumerate() {
        let per: Vec<Vec<f64>> = per_level.iter().map(|v| v.iter().map(|r| r[j]).collect()).collect();
        let means = per.iter().map(|v| mean_stderr(v)).collect();
        let incs: Vec<Vec<f64>> = per.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect()).collect();
        let increments = incs.iter().map(|v| mean_stderr(v)).collect();
        let increment_changes =
            incs.windows(2).map(|w| mean_stderr(&w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect::<Vec<_>>())).collect();
        out.push(LevelStudy { tree: t.encode(), levels: levels.to_vec(), means, increments, increment_changes });
    }
    Ok(out)
}

/// Fixes c along ≼ on 𝐁₋ so that each expectation vanishes on this ensemble.
pub fn solve_bphz_c(e: &Ensemble, max_stderr: Option<f64>) -> Result<(CounterTerms<f64>, Vec<Estimate>)> {
    let bm = e.sector.b_minus();
    let mut c = CounterTerms::<f64>::default();
    let mut report = Vec::new();
    for t in &bm {
        c.c.insert(t.clone(), 0.0);
    }
    for t in &bm {
        let prep = Arc::new(make_rc(&c, &e.sector)?);
        let est = e.estimate(&prep, std::slice::from_ref(t))?.remove(0);
        if let Some(m) = max_stderr {
            if !(est.stderr <= m) {
                return Err(Error::NonConvergent(format!("stderr {:e} on {t}", est.stderr)));
            }
        }
        *c.c.get_mut(t).unwrap() -= est.mean;
        report.push(est);
    }
    Ok((c, report))
}

#[derive(Clone, Debug, Serialize)]
pub struct Fit {
    pub tree: String,
    pub slope: f64,
    pub ci: (f64, f64),
    pub expected: f64,
    pub series: Vec<(f64, f64)>,
    pub samples: usize,
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Slope of log 𝔼‖Q_t(x, Π_xτ)‖_{L^{i_p}} against log t over the ensemble, with
/// a percentile bootstrap over samples.
pub fn scaling_fit(
    e: &Ensemble,
    prep: &Arc<PreparationMap<f64>>,
    t: &Tree,
    p: &Exponent,
    base_points: &[usize],
    t_grid: &[f64],
    bootstrap: usize,
    seed: u64,
) -> Result<Fit> {
    if t_grid.len() < 2 || t_grid.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Precondition("degenerate t range".into()));
    }
    let ell = to_f64(&e.sector.params.ell);
    if let Some(n) = e.level {
        let lo = 4.0 * 2f64.powf(-(n as f64) * ell);
        if t_grid.iter().any(|&v| v < lo * (1.0 - 1e-12) || v > 0.25 * (1.0 + 1e-12)) {
            return Err(Error::Precondition(format!("t range must lie in [{lo:e}, 1/4]")));
        }
    }
    let dm = crate::grading::DegreeMap::new(e.sector.params.clone(), e.eps.clone(), p.clone());
    let expected = to_f64(&dm.r_checked(t)?) / ell;
    let ip = integrability(t, p)?;
    let n = e.op.grid.len();
    let rows: Vec<Result<Vec<f64>>> = (0..e.samples as u64)
        .into_par_iter()
        .map(|i| {
            let xi = e.noise_sample(e.first + i, e.level);
            let ctx = ModelContext::new(e.sector.clone(), prep.clone(), e.op.clone(), xi, vec![0.0; n], e.eps.clone())?;
            let specs: Vec<_> = base_points
                .iter()
                .map(|&x| {
                    let mut r = ctx.delta_route(p, x);
                    r.pi(t).map(|f| ctx.grid().fft(&f))
                })
                .collect::<Result<_>>()?;
            Ok(t_grid
                .iter()
                .map(|&tt| {
                    let vals: Vec<f64> = base_points.iter().zip(&specs).map(|(&x, s)| ctx.op.heat_eval(s, tt, x)).collect();
                    lp_norm(&vals, &ip)
                })
                .collect())
        })
        .collect();
    let rows: Vec<Vec<f64>> = rows.into_iter().collect::<Result<_>>()?;
    let lx: Vec<f64> = t_grid.iter().map(|v| v.ln()).collect();
    let fit_rows = |idx: &mut dyn Iterator<Item = usize>| -> (f64, Vec<f64>) {
        let mut acc = vec![0.0; t_grid.len()];
        let mut cnt = 0.0;
        for i in idx {
            for (a, b) in acc.iter_mut().zip(&rows[i]) {
                *a += b;
            }
            cnt += 1.0;
        }
        let means: Vec<f64> = acc.iter().map(|a| a / cnt).collect();
        let ly: Vec<f64> = means.iter().map(|m| m.ln()).collect();
        (ls_slope(&lx, &ly), means)
    };
    let (slope, means) = fit_rows(&mut (0..rows.len()));
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut boots: Vec<f64> = (0..bootstrap)
        .map(|_| {
            let idx: Vec<usize> = (0..rows.len()).map(|_| rng.random_range(0..rows.len())).collect();
            fit_rows(&mut idx.into_iter()).0
        })
        .collect();
    boots.sort_by(|a, b| a.total_cmp(b));
    let ci = if boots.is_empty() {
        (slope, slope)
    } else {
        let q = |f: f64| boots[((f * (boots.len() - 1) as f64).round() as usize).min(boots.len() - 1)];
        (q(0.025), q(0.975))
    };
    if !slope.is_finite() {
        return Err(Error::NonConvergent("non-finite slope".into()));
    }
    Ok(Fit { tree: t.encode(), slope, ci, expected, series: t_grid.iter().cloned().zip(means).collect(), samples: rows.len() })
}
