//! Python bindings: trees, sectors, coproducts, preparation maps and grid models.

use pyo3::exceptions::{PyValueError, PyRuntimeError};
use pyo3::prelude::*;
use ri_core::analytic::config::{Loaded, NumericConfig};
use ri_core::analytic::model::{Comparison, ModelContext};
use ri_core::hopf::tensor_to_json;
use ri_core::rational::{fmt_q, parse_q};
use ri_core::renorm::{counterterms_from_json, make_rc, verify_preparation};
use ri_core::sector::{RuleSpec, Sector as CoreSector};
use ri_core::{DegreeMap, Exponent, Hopf, Q};
use std::sync::Arc;

fn err(e: ri_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (v.to_string(),))?.unbind())
}

#[pyclass(frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct Tree {
    inner: ri_core::Tree,
}

#[pymethods]
impl Tree {
    #[new]
    fn new(text: &str, d: usize) -> PyResult<Tree> {
        Ok(Tree { inner: ri_core::Tree::parse(text, d).map_err(err)? })
    }

    fn encode(&self) -> String {
        self.inner.encode()
    }

    fn omega_count(&self) -> usize {
        self.inner.omega_count()
    }

    fn h_count(&self) -> usize {
        self.inner.h_count()
    }

    fn __str__(&self) -> String {
        self.inner.encode()
    }

    fn __repr__(&self) -> String {
        format!("Tree({:?})", self.inner.encode())
    }
}

#[pyclass(frozen)]
struct Sector {
    inner: Arc<CoreSector>,
}

#[pymethods]
impl Sector {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Sector> {
        let rule = RuleSpec::from_json(text).map_err(err)?;
        Ok(Sector { inner: Arc::new(CoreSector::generate(&rule).map_err(err)?) })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Sector> {
        let text = std::fs::read_to_string(path).map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        Sector::from_json(&text)
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn eps_ref(&self) -> String {
        fmt_q(&self.inner.eps_ref)
    }

    fn trees(&self) -> Vec<Tree> {
        self.inner.all().into_iter().map(|inner| Tree { inner }).collect()
    }

    fn b_minus(&self) -> Vec<Tree> {
        self.inner.b_minus().into_iter().map(|inner| Tree { inner }).collect()
    }

    fn contains(&self, t: &Tree) -> bool {
        self.inner.in_basis(&t.inner)
    }

    /// Degree |τ| as a rational string.
    #[pyo3(signature = (t, eps = "0", p = "inf"))]
    fn degree(&self, t: &Tree, eps: &str, p: &str) -> PyResult<String> {
        let dm = DegreeMap::new(self.inner.params.clone(), parse_q(eps).map_err(err)?, Exponent::parse(p).map_err(err)?);
        Ok(fmt_q(&dm.r(&t.inner)))
    }

    /// (I_ε, J_p, cell representatives).
    #[pyo3(signature = (eps, p = "2"))]
    fn phase(&self, eps: &str, p: &str) -> PyResult<(Vec<String>, Vec<String>, Vec<(String, String)>)> {
        let ph = self.inner.phase(&parse_q(eps).map_err(err)?, &Exponent::parse(p).map_err(err)?).map_err(err)?;
        Ok((
            ph.i_eps.iter().map(|x| x.to_string()).collect(),
            ph.j_p.iter().map(fmt_q).collect(),
            ph.cells().into_iter().map(|(l, r)| (l.to_string(), r.to_string())).collect(),
        ))
    }

    /// None when unbounded; raises on a genericity violation.
    fn epsilon0(&self) -> PyResult<Option<String>> {
        Ok(self.inner.epsilon0().map_err(err)?.map(|q| fmt_q(&q)))
    }

    /// Runs the preparation-map checks on R_c for rational counterterms.
    fn verify_counterterms(&self, py: Python<'_>, c: std::collections::BTreeMap<String, String>) -> PyResult<Py<PyAny>> {
        let v = serde_json::Value::Object(c.into_iter().map(|(k, v)| (k, serde_json::Value::String(v))).collect());
        let ct = counterterms_from_json::<Q>(&v, self.inner.d(), |_| None).map_err(err)?;
        let r = make_rc(&ct, &self.inner).map_err(err)?;
        let rep = verify_preparation(&r, &self.inner).map_err(err)?;
        to_py(py, &serde_json::to_value(&rep).map_err(|e| PyRuntimeError::new_err(e.to_string()))?)
    }
}

/// Terms (coefficient, left, right) of Δ_{ε,p}τ, or of Δ⁺ with `plus`.
#[pyfunction]
#[pyo3(signature = (sector, t, eps = "0", p = "inf", plus = false, graphical = false))]
fn coproduct(sector: &Sector, t: &Tree, eps: &str, p: &str, plus: bool, graphical: bool) -> PyResult<Vec<(String, String, String)>> {
    let h = Hopf::new(sector.inner.params.clone(), parse_q(eps).map_err(err)?, Exponent::parse(p).map_err(err)?);
    let d = if plus {
        h.coproduct_plus(&t.inner)
    } else if graphical {
        h.coproduct_graphical(&t.inner)
    } else {
        h.coproduct(&t.inner)
    }
    .map_err(err)?;
    let terms = tensor_to_json(&d);
    Ok(terms
        .as_array()
        .into_iter()
        .flatten()
        .map(|x| {
            let s = |k: &str| x[k].as_str().unwrap_or_default().to_string();
            (s("coeff"), s("left"), s("right"))
        })
        .collect())
}

/// A grid model loaded from a numeric configuration file.
#[pyclass]
struct Model {
    loaded: Loaded,
    ctx: ModelContext,
}

#[pymethods]
impl Model {
    #[new]
    fn new(config: &str) -> PyResult<Model> {
        let loaded = NumericConfig::load(std::path::Path::new(config)).map_err(err)?;
        let ct = loaded.counterterms().map_err(err)?;
        let prep = Arc::new(make_rc(&ct, &loaded.sector).map_err(err)?);
        let ctx = ModelContext::new(loaded.sector.clone(), prep, loaded.op.clone(), loaded.xi(), loaded.h(), loaded.eps.clone())
            .map_err(err)?;
        Ok(Model { loaded, ctx })
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.loaded.grid.sizes.clone()
    }

    fn base_points(&self) -> Vec<usize> {
        self.loaded.base_points()
    }

    /// Π_x τ as a flat row-major list.
    #[pyo3(signature = (t, x, p = "inf"))]
    fn pi(&self, t: &Tree, x: usize, p: &str) -> PyResult<Vec<f64>> {
        let mut r = self.ctx.delta_route(&Exponent::parse(p).map_err(err)?, x);
        Ok(r.pi(&t.inner).map_err(err)?.to_vec())
    }

    /// Relative distance between Π_x τ and its comparison with the p = 2 model.
    #[pyo3(signature = (t, x, p = "inf"))]
    fn comparison_defect(&self, t: &Tree, x: usize, p: &str) -> PyResult<f64> {
        let p = Exponent::parse(p).map_err(err)?;
        Comparison::new(&self.ctx, &p, x).defect(&t.inner).map_err(err)
    }
}

#[pymodule]
fn ri_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Tree>()?;
    m.add_class::<Sector>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(coproduct, m)?)?;
    Ok(())
}
