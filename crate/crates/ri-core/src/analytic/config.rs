//! Numeric run configuration (JSON).

use super::estimate::{Ensemble, Mode};
use super::grid::{Field, Grid};
use super::model::random_counterterms;
use super::noise::{sample_noise, NoiseSpec};
use super::operator::{Operator, OperatorSpec, Quadrature};
use crate::error::{Error, Result};
use crate::grading::Exponent;
use crate::rational::{parse_q, Q};
use crate::renorm::{counterterms_from_json, CounterTerms};
use crate::sector::{RuleSpec, Sector};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub sizes: Vec<usize>,
    pub period: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OperatorConfig {
    Preset {
        preset: String,
        #[serde(default)]
        quadrature: Option<Quadrature>,
        #[serde(default, rename = "firstShellDamping")]
        first_shell_damping: Option<f64>,
    },
    Full(OperatorSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CounterTermConfig {
    None,
    Random { seed: u64, scale: f64 },
    File(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NumericConfig {
    /// Rule file, relative to the configuration file.
    pub rule: String,
    pub grid: GridConfig,
    pub operator: OperatorConfig,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub h: Option<NoiseSpec>,
    #[serde(default)]
    pub eps: Option<String>,
    #[serde(default)]
    pub p: Option<String>,
    /// Grid multi-indices of the base points.
    pub base_points: Vec<Vec<usize>>,
    #[serde(default)]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub mollify: Option<u32>,
    #[serde(default)]
    pub levels: Vec<u32>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub solver_samples: Option<usize>,
    #[serde(default)]
    pub first_sample: u64,
    #[serde(default = "default_offset")]
    pub verify_offset: u64,
    #[serde(default)]
    pub max_stderr: Option<f64>,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
    #[serde(default)]
    pub bootstrap_seed: u64,
    #[serde(default = "default_ct")]
    pub counterterms: CounterTermConfig,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

fn default_samples() -> usize {
    64
}
fn default_offset() -> u64 {
    1 << 20
}
fn default_bootstrap() -> usize {
    1000
}
fn default_ct() -> CounterTermConfig {
    CounterTermConfig::None
}
fn default_mode() -> Mode {
    Mode::Qbar
}

/// A loaded configuration with its directory and derived objects.
pub struct Loaded {
    pub cfg: NumericConfig,
    pub dir: PathBuf,
    pub rule: RuleSpec,
    pub sector: Arc<Sector>,
    pub grid: Arc<Grid>,
    pub op: Arc<Operator>,
    pub eps: Q,
    pub p: Exponent,
}

impl NumericConfig {
    pub fn from_json(text: &str) -> Result<NumericConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("numeric config: {e}")))
    }

    pub fn operator_spec(&self, d: usize) -> Result<OperatorSpec> {
        match &self.operator {
            OperatorConfig::Full(s) => Ok(s.clone()),
            OperatorConfig::Preset { preset, quadrature, first_shell_damping } => {
                let mut s = match preset.as_str() {
                    "heat" => OperatorSpec::heat(d),
                    "biharmonic" => OperatorSpec::biharmonic(d),
                    o => return Err(Error::Config(format!("unknown operator preset {o}"))),
                };
                if let Some(q) = quadrature {
                    s.quadrature = q.clone();
                }
                if let Some(f) = first_shell_damping {
                    s.first_shell_damping = *f;
                }
                Ok(s)
            }
        }
    }

    pub fn load(path: &Path) -> Result<Loaded> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg = NumericConfig::from_json(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve(dir)
    }

    pub fn resolve(self, dir: PathBuf) -> Result<Loaded> {
        let rp = dir.join(&self.rule);
        let rtext = std::fs::read_to_string(&rp).map_err(|e| Error::Config(format!("{}: {e}", rp.display())))?;
        let rule = RuleSpec::from_json(&rtext)?;
        let sector = Arc::new(Sector::generate(&rule)?);
        let d = sector.d();
        if self.grid.sizes.len() != d {
            return Err(Error::Dimension { expected: d, got: self.grid.sizes.len() });
        }
        if self.grid.sizes.iter().any(|&n| n < 16) {
            return Err(Error::Config("grid sizes must be at least 16".into()));
        }
        let grid = Arc::new(Grid::new(self.grid.sizes.clone(), self.grid.period.clone())?);
        let spec = self.operator_spec(d)?;
        let ell = crate::rational::to_f64(&sector.params.ell);
        if (spec.ell - ell).abs() > 1e-12 {
            return Err(Error::Config(format!("operator order {} differs from params ell {}", spec.ell, ell)));
        }
        let op = Arc::new(Operator::new(spec, grid.clone())?);
        let eps = match &self.eps {
            Some(s) => parse_q(s)?,
            None => sector.eps_ref.clone(),
        };
        let p = match &self.p {
            Some(s) => Exponent::parse(s)?,
            None => Exponent::infinity(),
        };
        for b in &self.base_points {
            if b.len() != d || b.iter().zip(&grid.sizes).any(|(a, n)| a >= n) {
                return Err(Error::Config(format!("base point {b:?} outside the grid")));
            }
        }
        Ok(Loaded { cfg: self, dir, rule, sector, grid, op, eps, p })
    }
}

impl Loaded {
    pub fn base_points(&self) -> Vec<usize> {
        self.cfg.base_points.iter().map(|b| self.grid.index(b)).collect()
    }

    pub fn xi(&self) -> Field {
        let f = sample_noise(&self.cfg.noise, &self.grid, self.cfg.first_sample);
        match self.cfg.mollify {
            Some(n) => super::noise::mollify(&self.grid, &f, n),
            None => f,
        }
    }

    pub fn h(&self) -> Field {
        match &self.cfg.h {
            Some(spec) => sample_noise(spec, &self.grid, self.cfg.first_sample),
            None => vec![0.0; self.grid.len()],
        }
    }

    pub fn counterterms(&self) -> Result<CounterTerms<f64>> {
        match &self.cfg.counterterms {
            CounterTermConfig::None => Ok(CounterTerms::default()),
            CounterTermConfig::Random { seed, scale } => Ok(random_counterterms(&self.sector, *seed, *scale)),
            CounterTermConfig::File(f) => {
                let p = self.dir.join(f);
                let text = std::fs::read_to_string(&p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                counterterms_from_json(&v, self.sector.d(), Some)
            }
        }
    }

    pub fn ensemble(&self) -> Ensemble {
        Ensemble {
            sector: self.sector.clone(),
            op: self.op.clone(),
            noise: self.cfg.noise.clone(),
            level: self.cfg.mollify,
            first: self.cfg.first_sample,
            samples: self.cfg.samples,
            eps: self.eps.clone(),
            base_point: self.base_points().first().copied().unwrap_or(0),
            mode: self.cfg.mode,
        }
    }
}
