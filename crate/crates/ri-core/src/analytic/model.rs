//! Naive and renormalized models on the grid, recentered either through
//! Δ_{ε,p} and the characters g_x, or through the multiplicative hat map.

use super::grid::{rel_dev, Field, Grid, Spectrum};
use super::operator::Operator;
use crate::error::{Error, Result};
use crate::grading::{integrability, p_transition, DegreeMap, Exponent, PhaseSets};
use crate::hopf::{Character, Hopf};
use crate::multiindex::MultiIndex;
use crate::rational::{to_f64, Q};
use crate::renorm::{renorm_map, PreparationMap};
use crate::sector::Sector;
use crate::tree::{Label, Tree};
use num_traits::ToPrimitive;
use parking_lot::Mutex;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

/// Shared inputs: sector, preparation map, operator and the fields ξ, h.
pub struct ModelContext {
    pub sector: Arc<Sector>,
    pub prep: Arc<PreparationMap<f64>>,
    pub op: Arc<Operator>,
    pub xi: Field,
    pub h: Field,
    pub eps: Q,
    pub phase: PhaseSets,
    xi_hat: Spectrum,
    h_hat: Spectrum,
    coords: Vec<Field>,
    naive: Mutex<HashMap<Tree, Arc<Field>>>,
    renorm: Mutex<HashMap<Tree, Arc<Field>>>,
}

fn inv_factorial(k: &MultiIndex) -> f64 {
    1.0 / k.factorial().to_f64().unwrap_or(f64::INFINITY)
}

fn monomial(x: &[f64], k: &MultiIndex) -> f64 {
    x.iter().zip(&k.0).map(|(v, &e)| v.powi(e as i32)).product()
}

fn axpy(acc: &mut [f64], c: f64, f: &[f64]) {
    for (a, b) in acc.iter_mut().zip(f) {
        *a += c * b;
    }
}

fn mul_into(acc: &mut [f64], f: &[f64]) {
    for (a, b) in acc.iter_mut().zip(f) {
        *a *= b;
    }
}

impl ModelContext {
    pub fn new(sector: Arc<Sector>, prep: Arc<PreparationMap<f64>>, op: Arc<Operator>, xi: Field, h: Field, eps: Q) -> Result<ModelContext> {
        let grid = op.grid.clone();
        if grid.d() != sector.d() {
            return Err(Error::Dimension { expected: sector.d(), got: grid.d() });
        }
        if xi.len() != grid.len() || h.len() != grid.len() {
            return Err(Error::Config("field size does not match the grid".into()));
        }
        if xi.iter().chain(&h).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite field entry".into()));
        }
        let phase = sector.phase(&eps, &Exponent::two())?;
        let coords = (0..grid.d()).map(|a| (0..grid.len()).map(|i| grid.coord(i, a)).collect()).collect();
        Ok(ModelContext {
            xi_hat: grid.fft(&xi),
            h_hat: grid.fft(&h),
            sector,
            prep,
            op,
            xi,
            h,
            eps,
            phase,
            coords,
            naive: Mutex::new(HashMap::new()),
            renorm: Mutex::new(HashMap::new()),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.op.grid
    }

    pub fn degree_map(&self, p: &Exponent) -> DegreeMap {
        DegreeMap::new(self.sector.params.clone(), self.eps.clone(), p.clone())
    }

    fn noise_field(&self, l: Label) -> &Field {
        if l == Label::H {
            &self.h
        } else {
            &self.xi
        }
    }

    fn noise_hat(&self, l: Label) -> &Spectrum {
        if l == Label::H {
            &self.h_hat
        } else {
            &self.xi_hat
        }
    }

    /// The naive admissible multiplicative map Π^{ξ,h}.
    pub fn naive(&self, t: &Tree) -> Arc<Field> {
        if let Some(f) = self.naive.lock().get(t) {
            return f.clone();
        }
        let n = self.grid().len();
        let mut acc = vec![1.0; n];
        for (a, &e) in t.n().0.iter().enumerate() {
            for _ in 0..e {
                mul_into(&mut acc, &self.coords[a]);
            }
        }
        for e in t.children() {
            let piece = match e.label {
                Label::K => {
                    let inner = self.naive(&e.child);
                    self.op.kernel_apply(&inner, &e.deco.0)
                }
                l => self.op.deriv_apply(self.noise_field(l), &e.deco.0),
            };
            mul_into(&mut acc, &piece);
        }
        let acc = Arc::new(acc);
        self.naive.lock().insert(t.clone(), acc.clone());
        acc
    }

    /// Π^R = Π^{ξ,h} M^R.
    pub fn renormalized(&self, t: &Tree) -> Result<Arc<Field>> {
        if let Some(f) = self.renorm.lock().get(t) {
            return Ok(f.clone());
        }
        let m = renorm_map(&self.prep, t)?;
        let mut acc = vec![0.0; self.grid().len()];
        for (u, c) in m.iter() {
            axpy(&mut acc, *c, &self.naive(u));
        }
        let acc = Arc::new(acc);
        self.renorm.lock().insert(t.clone(), acc.clone());
        Ok(acc)
    }

    /// Representative exponent of the cell of [2,∞] starting at `left`.
    pub fn cell_rep(&self, left: &Exponent) -> Exponent {
        self.phase.cells().into_iter().find(|(l, _)| l == left).map(|(_, r)| r).unwrap_or_else(|| left.clone())
    }

    pub fn delta_route(&self, p: &Exponent, x: usize) -> DeltaRoute<'_> {
        DeltaRoute::new(self, p, x)
    }

    pub fn hat_route(&self, p: &Exponent, x: usize) -> HatRoute<'_> {
        HatRoute::new(self, p, x)
    }
}

/// Π_x = (Π^R ⊗ g_x⁻¹)Δ_{ε,p}, with g_x⁻¹ and f_x built recursively.
pub struct DeltaRoute<'a> {
    pub ctx: &'a ModelContext,
    pub hopf: Hopf,
    pub x: usize,
    pub xc: Vec<f64>,
    pi: HashMap<Tree, Arc<Field>>,
    spec: HashMap<Tree, Arc<Spectrum>>,
    f: HashMap<Tree, f64>,
    ginv: HashMap<Tree, f64>,
}

impl<'a> DeltaRoute<'a> {
    fn new(ctx: &'a ModelContext, p: &Exponent, x: usize) -> DeltaRoute<'a> {
        DeltaRoute {
            hopf: Hopf::from_map(ctx.degree_map(p)),
            xc: ctx.grid().coords(x),
            ctx,
            x,
            pi: HashMap::new(),
            spec: HashMap::new(),
            f: HashMap::new(),
            ginv: HashMap::new(),
        }
    }

    pub fn p(&self) -> &Exponent {
        &self.hopf.dm.p
    }

    pub fn pi(&mut self, t: &Tree) -> Result<Arc<Field>> {
        if let Some(f) = self.pi.get(t) {
            return Ok(f.clone());
        }
        let delta = self.hopf.coproduct(t)?;
        let mut acc = vec![0.0; self.ctx.grid().len()];
        for ((a, b), c) in delta.iter() {
            let gb = self.ginv_forest(b)?;
            if gb == 0.0 {
                continue;
            }
            let pa = self.ctx.renormalized(a)?;
            axpy(&mut acc, to_f64(c) * gb, &pa);
        }
        let acc = Arc::new(acc);
        self.pi.insert(t.clone(), acc.clone());
        Ok(acc)
    }

    fn spectrum(&mut self, t: &Tree) -> Result<Arc<Spectrum>> {
        if let Some(s) = self.spec.get(t) {
            return Ok(s.clone());
        }
        let f = self.pi(t)?;
        let s = Arc::new(self.ctx.grid().fft(&f));
        self.spec.insert(t.clone(), s.clone());
        Ok(s)
    }

    /// f_x on a planted generator 𝓘_k^𝔩(σ), including the 1_{r>0} gate.
    pub fn f(&mut self, g: &Tree) -> Result<f64> {
        if let Some(v) = self.f.get(g) {
            return Ok(*v);
        }
        let e = g.as_planted().ok_or_else(|| Error::MissingGenerator(g.encode()))?.clone();
        let v = if !self.hopf.dm.positive_planted(e.label, &e.deco, &e.child)? {
            0.0
        } else if e.label == Label::K {
            let s = self.spectrum(&e.child)?;
            self.ctx.op.kernel_eval(&s, &e.deco.0, self.x)
        } else {
            self.ctx.op.deriv_eval(self.ctx.noise_hat(e.label), &e.deco.0, self.x)
        };
        self.f.insert(g.clone(), v);
        Ok(v)
    }

    /// g_x⁻¹ on a planted generator.
    pub fn ginv_generator(&mut self, g: &Tree) -> Result<f64> {
        if let Some(v) = self.ginv.get(g) {
            return Ok(*v);
        }
        let e = g.as_planted().ok_or_else(|| Error::MissingGenerator(g.encode()))?.clone();
        let mx: Vec<f64> = self.xc.iter().map(|v| -v).collect();
        let mut acc = 0.0;
        for l in self.hopf.dm.positive_shifts(e.label, &e.deco, &e.child)? {
            let gl = Tree::planted_raw(e.label, e.deco.add(&l), e.child.clone());
            acc -= monomial(&mx, &l) * inv_factorial(&l) * self.f(&gl)?;
        }
        self.ginv.insert(g.clone(), acc);
        Ok(acc)
    }

    pub fn ginv_forest(&mut self, b: &Tree) -> Result<f64> {
        let d = b.dim();
        let mx: Vec<f64> = self.xc.iter().map(|v| -v).collect();
        let mut acc = monomial(&mx, b.n());
        for e in b.children() {
            if acc == 0.0 {
                break;
            }
            acc *= self.ginv_generator(&Tree::new(MultiIndex::zero(d), vec![e.clone()]))?;
        }
        Ok(acc)
    }

    /// g_x = g_x⁻¹ ∘ S⁺.
    pub fn g_forest(&mut self, b: &Tree) -> Result<f64> {
        let s = self.hopf.antipode(b)?;
        let mut acc = 0.0;
        for (u, c) in s.iter() {
            acc += to_f64(c) * self.ginv_forest(u)?;
        }
        Ok(acc)
    }

    pub fn characters(&mut self, gens: &[Tree]) -> Result<(Character<f64>, Character<f64>, Character<f64>)> {
        let d = self.ctx.sector.d();
        let (mut gi, mut g, mut f) = (Character::new(), Character::new(), Character::new());
        for j in 0..d {
            gi.set_x(d, j, -self.xc[j]);
            g.set_x(d, j, self.xc[j]);
        }
        for mu in gens.iter().filter(|m| !m.is_poly()) {
            gi.set(mu.clone(), self.ginv_generator(mu)?);
            g.set(mu.clone(), self.g_forest(mu)?);
            f.set(mu.clone(), self.f(mu)?);
        }
        Ok((gi, g, f))
    }
}

/// g_{yx}(b) = (g_y ⊗ g_x⁻¹)Δ⁺b.
pub fn g_yx(ry: &mut DeltaRoute<'_>, rx: &mut DeltaRoute<'_>, b: &Tree) -> Result<f64> {
    let mut acc = 0.0;
    for ((u, v), c) in rx.hopf.coproduct_plus(b)?.iter() {
        let gv = rx.ginv_forest(v)?;
        if gv != 0.0 {
            acc += to_f64(c) * ry.g_forest(u)? * gv;
        }
    }
    Ok(acc)
}

/// Max relative deviation of Π_xτ − Π_yτ from Π_y(Γ_yx − id)τ.
pub fn gamma_defect(ry: &mut DeltaRoute<'_>, rx: &mut DeltaRoute<'_>, t: &Tree) -> Result<f64> {
    let px = rx.pi(t)?;
    let py = ry.pi(t)?;
    let lhs: Field = px.iter().zip(py.iter()).map(|(a, b)| a - b).collect();
    let mut rhs = vec![0.0; lhs.len()];
    for ((a, b), c) in rx.hopf.coproduct(t)?.iter() {
        if b.is_one() {
            continue;
        }
        let gb = g_yx(ry, rx, b)?;
        if gb != 0.0 {
            let pa = ry.pi(a)?;
            axpy(&mut rhs, to_f64(c) * gb, &pa);
        }
    }
    Ok(rel_dev(&lhs, &rhs))
}

/// Π_x^R = Π̂_x R with Π̂_x multiplicative.
pub struct HatRoute<'a> {
    pub ctx: &'a ModelContext,
    pub dm: DegreeMap,
    pub x: usize,
    pub xc: Vec<f64>,
    pi: HashMap<Tree, Arc<Field>>,
    spec: HashMap<Tree, Arc<Spectrum>>,
    polys: HashMap<MultiIndex, Arc<Field>>,
}

impl<'a> HatRoute<'a> {
    fn new(ctx: &'a ModelContext, p: &Exponent, x: usize) -> HatRoute<'a> {
        HatRoute {
            dm: ctx.degree_map(p),
            xc: ctx.grid().coords(x),
            ctx,
            x,
            pi: HashMap::new(),
            spec: HashMap::new(),
            polys: HashMap::new(),
        }
    }

    fn centered_poly(&mut self, k: &MultiIndex) -> Arc<Field> {
        if let Some(f) = self.polys.get(k) {
            return f.clone();
        }
        let grid = self.ctx.grid();
        let f: Field = (0..grid.len())
            .map(|i| {
                let y: Vec<f64> = grid.coords(i).iter().zip(&self.xc).map(|(a, b)| a - b).collect();
                monomial(&y, k)
            })
            .collect();
        let f = Arc::new(f);
        self.polys.insert(k.clone(), f.clone());
        f
    }

    pub fn pi(&mut self, t: &Tree) -> Result<Arc<Field>> {
        if let Some(f) = self.pi.get(t) {
            return Ok(f.clone());
        }
        let rt = self.ctx.prep.apply(t)?;
        let mut acc = vec![0.0; self.ctx.grid().len()];
        for (u, c) in rt.iter() {
            let hu = self.hat(u)?;
            axpy(&mut acc, *c, &hu);
        }
        let acc = Arc::new(acc);
        self.pi.insert(t.clone(), acc.clone());
        Ok(acc)
    }

    fn spectrum(&mut self, t: &Tree) -> Result<Arc<Spectrum>> {
        if let Some(s) = self.spec.get(t) {
            return Ok(s.clone());
        }
        let f = self.pi(t)?;
        let s = Arc::new(self.ctx.grid().fft(&f));
        self.spec.insert(t.clone(), s.clone());
        Ok(s)
    }

    fn hat(&mut self, u: &Tree) -> Result<Field> {
        let mut acc = self.centered_poly(u.n()).to_vec();
        for e in u.children() {
            let shifts = self.dm.positive_shifts(e.label, &e.deco, &e.child)?;
            let (mut piece, vals): (Field, Vec<f64>) = if e.label == Label::K {
                let s = self.spectrum(&e.child)?;
                let base = self.ctx.op.kernel_apply_spec(&s, &e.deco.0);
                let v = shifts.iter().map(|l| self.ctx.op.kernel_eval(&s, &e.deco.add(l).0, self.x)).collect();
                (base, v)
            } else {
                let base = self.ctx.op.deriv_apply(self.ctx.noise_field(e.label), &e.deco.0);
                let hat = self.ctx.noise_hat(e.label);
                let v = shifts.iter().map(|l| self.ctx.op.deriv_eval(hat, &e.deco.add(l).0, self.x)).collect();
                (base, v)
            };
            for (l, v) in shifts.iter().zip(vals) {
                let pl = self.centered_poly(l);
                axpy(&mut piece, -v * inv_factorial(l), &pl);
            }
            mul_into(&mut acc, &piece);
        }
        Ok(acc)
    }
}

/// Model data on a list of trees at selected base points.
#[derive(Clone, Debug)]
pub struct ModelData {
    pub eps: Q,
    pub p: Exponent,
    pub base_points: Vec<usize>,
    pub trees: Vec<Tree>,
    /// pi[(tree, slot)] = Π_x τ for x = base_points[slot].
    pub pi: BTreeMap<(Tree, usize), Arc<Field>>,
    pub g_inv: Vec<Character<f64>>,
    pub g: Vec<Character<f64>>,
    pub f: Vec<Character<f64>>,
    pub lambda: Vec<Character<f64>>,
}

impl ModelData {
    pub fn field(&self, t: &Tree, slot: usize) -> Result<&Arc<Field>> {
        self.pi.get(&(t.clone(), slot)).ok_or_else(|| Error::Precondition(format!("tree {t} not present in the model")))
    }
}

/// λ_x^{ε,p}(μ) for a planted μ, from the model at ⌊p_ε(μ)⌋.
pub fn lambda_value(ctx: &ModelContext, p: &Exponent, x: usize, mu: &Tree) -> Result<f64> {
    lambda_with(ctx, p, x, mu, &mut HashMap::new())
}

fn lambda_with<'a>(ctx: &'a ModelContext, p: &Exponent, x: usize, mu: &Tree, routes: &mut HashMap<Exponent, DeltaRoute<'a>>) -> Result<f64> {
    let Some(e) = mu.as_planted() else { return Ok(0.0) };
    if mu.h_count() != 1 {
        return Ok(0.0);
    }
    let dp = ctx.degree_map(p);
    let d2 = ctx.degree_map(&Exponent::two());
    let rp = dp.planted(e.label, &e.deco, &e.child);
    let r2 = d2.planted(e.label, &e.deco, &e.child);
    if rp > Q::from_integer(0.into()) || r2 <= Q::from_integer(0.into()) {
        return Ok(0.0);
    }
    let pt = p_transition(mu, &ctx.sector.params, &ctx.eps)?.ok_or_else(|| Error::Precondition(format!("no transition exponent for {mu}")))?;
    let q = ctx.cell_rep(&ctx.phase.floor(&pt));
    let route = routes.entry(q.clone()).or_insert_with(|| ctx.delta_route(&q, x));
    route.f(mu)
}

/// Builds Π_x^{ε,p} on `trees` at each base point through the Δ route (or the
/// hat route), with g_x⁻¹, g_x, f_x on the 𝐖⁺ generators and λ_x on the
/// 𝐖⁺_{ε,2} ∩ T^(1) generators.
pub fn build_model(ctx: &ModelContext, trees: &[Tree], p: &Exponent, base_points: &[usize], hat: bool) -> Result<ModelData> {
    let s = &ctx.sector;
    let gens = s.w_generators(&s.all(), &ctx.eps, p)?;
    let gens2: Vec<Tree> = s.w_generators(&s.all(), &ctx.eps, &Exponent::two())?.into_iter().filter(|g| g.h_count() == 1).collect();
    let mut md = ModelData {
        eps: ctx.eps.clone(),
        p: p.clone(),
        base_points: base_points.to_vec(),
        trees: trees.to_vec(),
        pi: BTreeMap::new(),
        g_inv: Vec::new(),
        g: Vec::new(),
        f: Vec::new(),
        lambda: Vec::new(),
    };
    for (slot, &x) in base_points.iter().enumerate() {
        if x >= ctx.grid().len() {
            return Err(Error::Config(format!("base point {x} outside the grid")));
        }
        let mut dr = ctx.delta_route(p, x);
        let (gi, g, f) = dr.characters(&gens)?;
        let mut hr = ctx.hat_route(p, x);
        for t in trees {
            let v = if hat { hr.pi(t)? } else { dr.pi(t)? };
            md.pi.insert((t.clone(), slot), v);
        }
        let mut routes = HashMap::new();
        let mut lam = Character::new();
        for mu in &gens2 {
            lam.set(mu.clone(), lambda_with(ctx, p, x, mu, &mut routes)?);
        }
        md.g_inv.push(gi);
        md.g.push(g);
        md.f.push(f);
        md.lambda.push(lam);
    }
    Ok(md)
}

/// Max relative deviation between the Δ-route and hat-route fields of `t`.
pub fn route_defect(ctx: &ModelContext, t: &Tree, p: &Exponent, x: usize) -> Result<f64> {
    let mut dr = ctx.delta_route(p, x);
    let mut hr = ctx.hat_route(p, x);
    Ok(rel_dev(&dr.pi(t)?, &hr.pi(t)?))
}

/// Both sides of Π_x^{ε,p}τ = Π_x^{ε,2}τ + (Π_x^{ε,p} ⊗ λ_x^{ε,p})Δ_{ε,2}τ.
pub struct Comparison<'a> {
    ctx: &'a ModelContext,
    target: DeltaRoute<'a>,
    two: DeltaRoute<'a>,
    cells: HashMap<Exponent, DeltaRoute<'a>>,
}

impl<'a> Comparison<'a> {
    pub fn new(ctx: &'a ModelContext, p: &Exponent, x: usize) -> Comparison<'a> {
        Comparison { ctx, target: ctx.delta_route(p, x), two: ctx.delta_route(&Exponent::two(), x), cells: HashMap::new() }
    }

    pub fn sides(&mut self, t: &Tree) -> Result<(Field, Field)> {
        let lhs = self.target.pi(t)?.to_vec();
        let mut rhs = self.two.pi(t)?.to_vec();
        let p = self.target.p().clone();
        let x = self.target.x;
        for ((a, b), c) in self.two.hopf.coproduct(t)?.iter() {
            if !b.n().is_zero() || b.children().len() != 1 {
                continue;
            }
            let lam = lambda_with(self.ctx, &p, x, b, &mut self.cells)?;
            if lam != 0.0 {
                let pa = self.target.pi(a)?;
                axpy(&mut rhs, to_f64(c) * lam, &pa);
            }
        }
        Ok((lhs, rhs))
    }

    pub fn defect(&mut self, t: &Tree) -> Result<f64> {
        let (l, r) = self.sides(t)?;
        Ok(rel_dev(&l, &r))
    }
}

/// Comparison defect from two prebuilt models sharing base points.
pub fn check_comparison(m_p: &ModelData, m_2: &ModelData, hopf2: &Hopf, t: &Tree) -> Result<f64> {
    let mut worst = 0.0f64;
    for slot in 0..m_p.base_points.len() {
        let lhs = m_p.field(t, slot)?;
        let mut rhs = m_2.field(t, slot)?.to_vec();
        for ((a, b), c) in hopf2.coproduct(t)?.iter() {
            if !b.n().is_zero() || b.children().len() != 1 {
                continue;
            }
            let lam = m_p.lambda[slot].values.get(b).copied().unwrap_or(0.0);
            if b.h_count() == 1 && !m_p.lambda[slot].values.contains_key(b) {
                return Err(Error::MissingGenerator(b.encode()));
            }
            if lam != 0.0 {
                axpy(&mut rhs, to_f64(c) * lam, m_p.field(a, slot)?);
            }
        }
        worst = worst.max(rel_dev(lhs, &rhs));
    }
    Ok(worst)
}

/// Lagrange weights w_j with P'(0) = Σ w_j P(j) for polynomials of degree < nodes.len().
pub fn derivative_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![0.0; n];
    for j in 0..n {
        // L_j(t) = Π_{m≠j} (t − t_m)/(t_j − t_m); L_j'(0) = Σ_{m≠j} 1/(t_j−t_m) Π_{q≠j,m} (−t_q)/(t_j−t_q)
        let mut s = 0.0;
        for m in 0..n {
            if m == j {
                continue;
            }
            let mut prod = 1.0 / (nodes[j] - nodes[m]);
            for q in 0..n {
                if q != j && q != m {
                    prod *= -nodes[q] / (nodes[j] - nodes[q]);
                }
            }
            s += prod;
        }
        w[j] = s;
    }
    w
}

/// Nodes 0, 1, −1, 2, −2, … for an exact polynomial fit of degree m.
pub fn derivative_nodes(m: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    let mut k = 1.0;
    while v.len() < m + 1 {
        v.push(k);
        if v.len() < m + 1 {
            v.push(-k);
        }
        k += 1.0;
    }
    v
}

/// d/dt Π_x^{ξ+th}τ at t=0 by exact polynomial interpolation in t, against
/// Π_x^{ξ,h;ε,∞}(Dτ).
pub fn check_dpid(
    sector: Arc<Sector>,
    prep: Arc<PreparationMap<f64>>,
    op: Arc<Operator>,
    xi: &Field,
    h: &Field,
    eps: &Q,
    trees: &[Tree],
    x: usize,
) -> Result<Vec<(Tree, f64)>> {
    let inf = Exponent::infinity();
    let max_m = trees.iter().map(|t| t.omega_count()).max().unwrap_or(0);
    let nodes = derivative_nodes(max_m.max(1));
    let mut perturbed = Vec::new();
    for &j in &nodes {
        let xj: Field = xi.iter().zip(h).map(|(a, b)| a + j * b).collect();
        perturbed.push(ModelContext::new(sector.clone(), prep.clone(), op.clone(), xj, h.clone(), eps.clone())?);
    }
    let base = ModelContext::new(sector.clone(), prep.clone(), op.clone(), xi.clone(), h.clone(), eps.clone())?;
    let mut base_route = base.delta_route(&inf, x);
    let mut routes: Vec<DeltaRoute<'_>> = perturbed.iter().map(|c| c.delta_route(&inf, x)).collect();
    let mut out = Vec::new();
    for t in trees {
        if t.h_count() != 0 {
            return Err(Error::Precondition(format!("{t} is not in T^(0)")));
        }
        let m = t.omega_count();
        let used = (m + 1).max(2);
        let w = derivative_weights(&nodes[..used]);
        let mut lhs = vec![0.0; base.grid().len()];
        for (r, wj) in routes.iter_mut().zip(&w) {
            axpy(&mut lhs, *wj, &r.pi(t)?);
        }
        let mut rhs = vec![0.0; lhs.len()];
        for (u, c) in crate::sector::derive(t)?.iter() {
            axpy(&mut rhs, to_f64(c), &base_route.pi(u)?);
        }
        out.push((t.clone(), rel_dev(&lhs, &rhs)));
    }
    Ok(out)
}

/// Series t^{−r/ℓ}‖Q_t(x, Π_xτ)‖_{L^{i_p(τ)}} over the base points.
pub fn model_norms(m: &ModelData, ctx: &ModelContext, t: &Tree, t_grid: &[f64]) -> Result<(Vec<(f64, f64)>, f64)> {
    let dm = ctx.degree_map(&m.p);
    let r = to_f64(&dm.r_checked(t)?);
    let ell = to_f64(&ctx.sector.params.ell);
    let ip = integrability(t, &m.p)?;
    let grid = ctx.grid();
    let specs: Vec<Spectrum> = (0..m.base_points.len()).map(|s| m.field(t, s).map(|f| grid.fft(f))).collect::<Result<_>>()?;
    let mut series = Vec::new();
    let mut sup = 0.0f64;
    for &tt in t_grid {
        let vals: Vec<f64> = m.base_points.iter().zip(&specs).map(|(&x, s)| ctx.op.heat_eval(s, tt, x).abs()).collect();
        let nrm = lp_norm(&vals, &ip);
        let v = tt.powf(-r / ell) * nrm;
        sup = sup.max(v);
        series.push((tt, v));
    }
    Ok((series, sup))
}

pub fn lp_norm(vals: &[f64], p: &Exponent) -> f64 {
    if vals.is_empty() {
        return 0.0;
    }
    if p.is_infinite() {
        return vals.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    }
    let q = p.to_f64();
    (vals.iter().map(|v| v.abs().powf(q)).sum::<f64>() / vals.len() as f64).powf(1.0 / q)
}

/// sup over pairs of base points of |g_{yx}(μ)| / ‖y−x‖_𝔰^{r(μ)}.
pub fn g_norm(ctx: &ModelContext, p: &Exponent, base_points: &[usize], mu: &Tree) -> Result<f64> {
    let dm = ctx.degree_map(p);
    let r = to_f64(&dm.r_checked(mu)?);
    let scaling: Vec<f64> = ctx.sector.params.scaling.iter().map(to_f64).collect();
    let grid = ctx.grid();
    let mut best = 0.0f64;
    for &x in base_points {
        for &y in base_points {
            if x == y {
                continue;
            }
            let mut rx = ctx.delta_route(p, x);
            let mut ry = ctx.delta_route(p, y);
            let v = g_yx(&mut ry, &mut rx, mu)?;
            let dist: f64 = grid.coords(y).iter().zip(grid.coords(x)).zip(&scaling).map(|((a, b), s)| (a - b).abs().powf(1.0 / s)).sum();
            best = best.max(v.abs() / dist.powf(r));
        }
    }
    Ok(best)
}

/// Random counterterms on 𝐁₋ with entries uniform in [−scale, scale].
pub fn random_counterterms(s: &Sector, seed: u64, scale: f64) -> crate::renorm::CounterTerms<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut c = crate::renorm::CounterTerms::default();
    for t in s.b_minus() {
        c.c.insert(t, rng.random_range(-scale..=scale));
    }
    c
}

