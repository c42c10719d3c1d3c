use crate::manifest::{hash_file, FileHash, Outputs, RunManifest};
use crate::{BphzCmd, Cli, Cmd, ModelCmd, PrepCmd, ScalingCmd, SectorCmd, VerifyCmd};
use rayon::prelude::*;
use ri_core::analytic::config::{Loaded, NumericConfig};
use ri_core::analytic::estimate::{level_study, scaling_fit, solve_bphz_c, Mode};
use ri_core::analytic::grid::rel_dev;
use ri_core::analytic::model::{build_model, check_dpid, model_norms, Comparison, ModelContext};
use ri_core::grading::Exponent;
use ri_core::hopf::{tensor_to_json, Hopf};
use ri_core::rational::{fmt_q, parse_q, Q};
use ri_core::renorm::{counterterms_from_json, make_rc, verify_preparation, PreparationMap};
use ri_core::sector::{RuleSpec, Sector};
use ri_core::Tree;
use serde_json::{json, Value};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug)]
pub enum CliError {
    Core(ri_core::error::Error),
    Io(String),
    Verify(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Verify(e) => write!(f, "verification failed: {e}"),
        }
    }
}

impl CliError {
    pub fn code(&self) -> u8 {
        use ri_core::error::Error as E;
        match self {
            CliError::Core(E::NonConvergent(_)) | CliError::Core(E::Quadrature(_)) => 3,
            CliError::Core(_) | CliError::Io(_) => 1,
            CliError::Verify(_) => 2,
        }
    }
}

impl From<ri_core::error::Error> for CliError {
    fn from(e: ri_core::error::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type R<T> = std::result::Result<T, CliError>;

struct Run<'a> {
    cli: &'a Cli,
    out: Outputs,
    inputs: Vec<FileHash>,
}

impl Run<'_> {
    fn input(&mut self, p: &Path) -> R<()> {
        let h = hash_file(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        self.inputs.push(h);
        Ok(())
    }

    fn finish(mut self, report: Option<(bool, String)>) -> R<()> {
        let mut command = Vec::new();
        let mut args = std::env::args().skip(1);
        while let Some(a) = args.next() {
            if a == "--out" {
                args.next();
            } else if !a.starts_with("--out=") {
                command.push(a);
            }
        }
        let m = RunManifest {
            tool: "ri".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            seed: self.cli.seed,
            threads: self.cli.threads,
            inputs: self.inputs.clone(),
            outputs: self.out.written.clone(),
        };
        let v = serde_json::to_value(&m).expect("serializable");
        self.out.json("manifest.json", &v)?;
        match report {
            Some((false, msg)) => Err(CliError::Verify(msg)),
            _ => Ok(()),
        }
    }
}

fn read_rule(p: &Path) -> R<RuleSpec> {
    let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    Ok(RuleSpec::from_json(&text)?)
}

fn load_numeric(run: &mut Run<'_>, p: &Path) -> R<Loaded> {
    run.input(p)?;
    let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    let mut cfg = NumericConfig::from_json(&text)?;
    if let Some(s) = run.cli.seed {
        cfg.noise.seed = s;
    }
    let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
    run.input(&dir.join(&cfg.rule))?;
    Ok(cfg.resolve(dir)?)
}

fn trees_json(v: &[Tree]) -> Value {
    Value::Array(v.iter().map(|t| Value::String(t.encode())).collect())
}

pub fn run(cli: &Cli) -> R<()> {
    let mut run = Run { cli, out: Outputs::new(&cli.out)?, inputs: Vec::new() };
    let report = match &cli.cmd {
        Cmd::Sector { cmd: SectorCmd::Gen { rule, eps, p } } => sector_gen(&mut run, rule, eps.as_deref(), p)?,
        Cmd::Coproduct { tree, rule, eps, p, plus, graphical } => coproduct(&mut run, tree, rule, eps, p, *plus, *graphical)?,
        Cmd::Phase { rule, eps, p } => phase(&mut run, rule, eps.as_deref(), p)?,
        Cmd::Prep { cmd: PrepCmd::Verify { counterterms, rule } } => prep_verify(&mut run, counterterms, rule)?,
        Cmd::Model { cmd: ModelCmd::Build { config } } => model_build(&mut run, config)?,
        Cmd::Verify { cmd } => match cmd {
            VerifyCmd::Comparison { config, tol } => verify_comparison(&mut run, config, *tol)?,
            VerifyCmd::Dpidd { config, tol, max_omega } => verify_dpidd(&mut run, config, *tol, *max_omega)?,
            VerifyCmd::Route { config, tol } => verify_route(&mut run, config, *tol)?,
            VerifyCmd::Hopf { rule } => verify_hopf(&mut run, rule)?,
            VerifyCmd::Triangularity { rule } => verify_triangularity(&mut run, rule)?,
        },
        Cmd::Bphz { cmd: BphzCmd::Solve { config, mode } } => bphz_solve(&mut run, config, mode.as_deref())?,
        Cmd::Scaling { cmd: ScalingCmd::Fit { config, tree } } => scaling(&mut run, config, tree)?,
    };
    run.finish(report)
}

fn sector_from_rule(run: &mut Run<'_>, rule: &Path) -> R<Sector> {
    run.input(rule)?;
    Ok(Sector::generate(&read_rule(rule)?)?)
}

fn sector_gen(run: &mut Run<'_>, rule: &Path, eps: Option<&str>, p: &str) -> R<Option<(bool, String)>> {
    let s = sector_from_rule(run, rule)?;
    let eps = match eps {
        Some(e) => parse_q(e)?,
        None => s.eps_ref.clone(),
    };
    let p = Exponent::parse(p)?;
    let stages: Vec<Value> = s
        .filtration(&eps, &p)?
        .iter()
        .map(|st| {
            json!({
                "i": st.i, "tau": st.tau.encode(), "V": trees_json(&st.v), "W": trees_json(&st.w),
                "dot": trees_json(&st.dot), "Vgens": trees_json(&st.v_gens), "Wgens": trees_json(&st.w_gens),
            })
        })
        .collect();
    let projected: Vec<Value> = s
        .projected_filtration(&eps, &p)?
        .iter()
        .map(|(v, w)| json!({"V": trees_json(v), "W": trees_json(w)}))
        .collect();
    let v = json!({
        "eps": fmt_q(&eps), "p": p.to_string(), "L": fmt_q(&s.l_bound),
        "basis": serde_json::to_value(s.listing()).expect("serializable"),
        "bMinus": trees_json(&s.b_minus()),
        "filtration": stages, "projectedFiltration": projected, "log": s.log,
    });
    run.out.json("sector.json", &v)?;
    Ok(None)
}

fn coproduct(run: &mut Run<'_>, tree: &str, rule: &Path, eps: &str, p: &str, plus: bool, graphical: bool) -> R<Option<(bool, String)>> {
    run.input(rule)?;
    let params = read_rule(rule)?.params;
    params.validate()?;
    let t = Tree::parse(tree, params.d)?;
    let hopf = Hopf::new(params, parse_q(eps)?, Exponent::parse(p)?);
    let d = if plus {
        hopf.coproduct_plus(&t)?
    } else if graphical {
        hopf.coproduct_graphical(&t)?
    } else {
        hopf.coproduct(&t)?
    };
    let v = json!({"tree": t.encode(), "eps": eps, "p": p, "plus": plus, "terms": tensor_to_json(&d)});
    println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
    run.out.json("coproduct.json", &v)?;
    Ok(None)
}

fn phase(run: &mut Run<'_>, rule: &Path, eps: Option<&str>, p: &str) -> R<Option<(bool, String)>> {
    let s = sector_from_rule(run, rule)?;
    let eps = match eps {
        Some(e) => parse_q(e)?,
        None => s.eps_ref.clone(),
    };
    let ph = s.phase(&eps, &Exponent::parse(p)?)?;
    let (e0, e0_err) = match s.epsilon0() {
        Ok(Some(q)) => (Value::String(fmt_q(&q)), Value::Null),
        Ok(None) => (Value::String("unbounded".into()), Value::Null),
        Err(e) => (Value::Null, Value::String(e.to_string())),
    };
    let v = json!({
        "eps": fmt_q(&eps),
        "I_eps": ph.i_eps.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        "J_p": ph.j_p.iter().map(fmt_q).collect::<Vec<_>>(),
        "cells": ph.cells().iter().map(|(l, r)| json!({"left": l.to_string(), "representative": r.to_string()})).collect::<Vec<_>>(),
        "epsilon0": e0, "epsilon0Error": e0_err,
    });
    println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
    run.out.json("phase.json", &v)?;
    Ok(None)
}

fn prep_verify(run: &mut Run<'_>, c: &Path, rule: &Path) -> R<Option<(bool, String)>> {
    let s = sector_from_rule(run, rule)?;
    run.input(c)?;
    let text = std::fs::read_to_string(c)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", c.display())))?;
    let ct = counterterms_from_json::<Q>(&v, s.d(), |_| None)?;
    let r = make_rc(&ct, &s)?;
    let rep = verify_preparation(&r, &s)?;
    run.out.json("report.json", &serde_json::to_value(&rep).expect("serializable"))?;
    Ok(Some((rep.ok, format!("{:?} on {:?}", rep.property, rep.tree))))
}

fn verify_hopf(run: &mut Run<'_>, rule: &Path) -> R<Option<(bool, String)>> {
    let s = sector_from_rule(run, rule)?;
    let eps = s.eps_ref.clone();
    let mut ps = vec![Exponent::two()];
    ps.extend(s.phase(&eps, &Exponent::two())?.cells().into_iter().map(|(_, r)| r));
    ps.push(Exponent::infinity());
    let mut failures = Vec::new();
    let mut checked = 0usize;
    for p in &ps {
        let h = Hopf::new(s.params.clone(), eps.clone(), p.clone());
        for t in s.all() {
            checked += 1;
            if h.coproduct(&t)? != h.coproduct_graphical(&t)? {
                failures.push(json!({"p": p.to_string(), "check": "graphical", "tree": t.encode()}));
            }
            if !h.comodule_defect(&t)?.is_empty() {
                failures.push(json!({"p": p.to_string(), "check": "comodule", "tree": t.encode()}));
            }
        }
        for g in s.w_generators(&s.all(), &eps, p)? {
            checked += 1;
            if !h.coassociativity_defect(&g)?.is_empty() {
                failures.push(json!({"p": p.to_string(), "check": "coassociativity", "tree": g.encode()}));
            }
            let (l, r) = h.antipode_defects(&g)?;
            if !l.is_empty() || !r.is_empty() {
                failures.push(json!({"p": p.to_string(), "check": "antipode", "tree": g.encode()}));
            }
        }
    }
    let ok = failures.is_empty();
    let v = json!({"ok": ok, "checked": checked, "exponents": ps.iter().map(|p| p.to_string()).collect::<Vec<_>>(), "failures": failures});
    run.out.json("report.json", &v)?;
    Ok(Some((ok, "Hopf identities".into())))
}

fn verify_triangularity(run: &mut Run<'_>, rule: &Path) -> R<Option<(bool, String)>> {
    let s = sector_from_rule(run, rule)?;
    let eps = s.eps_ref.clone();
    let mut ps = vec![Exponent::two()];
    ps.extend(s.phase(&eps, &Exponent::two())?.cells().into_iter().map(|(_, r)| r));
    ps.push(Exponent::infinity());
    let mut reports = Vec::new();
    let mut ok = true;
    for p in &ps {
        let t = s.check_triangularity(&eps, p)?;
        let d = s.check_differentiable(&eps, p)?;
        ok &= t.ok && d.ok;
        reports.push(json!({"p": p.to_string(), "triangularity": t, "differentiable": d}));
    }
    run.out.json("report.json", &json!({"ok": ok, "reports": reports}))?;
    Ok(Some((ok, "triangularity".into())))
}

fn context(l: &Loaded, prep: Arc<PreparationMap<f64>>) -> R<ModelContext> {
    Ok(ModelContext::new(l.sector.clone(), prep, l.op.clone(), l.xi(), l.h(), l.eps.clone())?)
}

fn prep_of(l: &Loaded) -> R<Arc<PreparationMap<f64>>> {
    Ok(Arc::new(make_rc(&l.counterterms()?, &l.sector)?))
}

fn cell_reps(ctx: &ModelContext) -> Vec<(Exponent, Exponent)> {
    ctx.phase.cells()
}

fn verify_comparison(run: &mut Run<'_>, cfg: &PathBuf, tol: f64) -> R<Option<(bool, String)>> {
    let l = load_numeric(run, cfg)?;
    let ctx = context(&l, prep_of(&l)?)?;
    let bps = l.base_points();
    let jobs: Vec<(Exponent, Exponent, usize)> =
        cell_reps(&ctx).into_iter().flat_map(|(a, b)| bps.iter().map(move |&x| (a.clone(), b.clone(), x))).collect();
    let dot = l.sector.dot.clone();
    let results: Vec<R<Vec<f64>>> = jobs
        .par_iter()
        .map(|(_, rep, x)| {
            let mut c = Comparison::new(&ctx, rep, *x);
            dot.iter().map(|t| c.defect(t).map_err(CliError::from)).collect()
        })
        .collect();
    let mut cells = Vec::new();
    let mut worst = 0.0f64;
    let mut worst_tree = String::new();
    for ((left, rep, x), r) in jobs.iter().zip(results) {
        let r = r?;
        let (i, m) = r.iter().enumerate().fold((0, 0.0f64), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if m >= worst {
            worst = m;
            worst_tree = dot.get(i).map(|t| t.encode()).unwrap_or_default();
        }
        cells.push(json!({"cell": left.to_string(), "p": rep.to_string(), "basePoint": x, "maxDefect": m}));
    }
    let ok = worst <= tol;
    let v = json!({"ok": ok, "tol": tol, "trees": dot.len(), "worst": worst, "worstTree": worst_tree, "cells": cells});
    run.out.json("comparison.json", &v)?;
    Ok(Some((ok, format!("comparison defect {worst:e}"))))
}

fn verify_route(run: &mut Run<'_>, cfg: &PathBuf, tol: f64) -> R<Option<(bool, String)>> {
    let l = load_numeric(run, cfg)?;
    let ctx = context(&l, prep_of(&l)?)?;
    let bps = l.base_points();
    let jobs: Vec<(Exponent, usize)> = cell_reps(&ctx).into_iter().flat_map(|(_, b)| bps.iter().map(move |&x| (b.clone(), x))).collect();
    let trees = l.sector.all();
    let results: Vec<R<f64>> = jobs
        .par_iter()
        .map(|(p, x)| {
            let mut dr = ctx.delta_route(p, *x);
            let mut hr = ctx.hat_route(p, *x);
            let mut m = 0.0f64;
            for t in &trees {
                m = m.max(rel_dev(&dr.pi(t)?, &hr.pi(t)?));
            }
            Ok(m)
        })
        .collect();
    let mut cells = Vec::new();
    let mut worst = 0.0f64;
    for ((p, x), r) in jobs.iter().zip(results) {
        let m = r?;
        worst = worst.max(m);
        cells.push(json!({"p": p.to_string(), "basePoint": x, "maxDefect": m}));
    }
    let ok = worst <= tol;
    run.out.json("route.json", &json!({"ok": ok, "tol": tol, "trees": trees.len(), "worst": worst, "cells": cells}))?;
    Ok(Some((ok, format!("route defect {worst:e}"))))
}

fn verify_dpidd(run: &mut Run<'_>, cfg: &PathBuf, tol: f64, max_omega: usize) -> R<Option<(bool, String)>> {
    let l = load_numeric(run, cfg)?;
    let prep = prep_of(&l)?;
    let trees: Vec<Tree> = l.sector.b_circ.iter().filter(|t| t.omega_count() <= max_omega).cloned().collect();
    let (xi, h) = (l.xi(), l.h());
    let results: Vec<R<Vec<(Tree, f64)>>> = l
        .base_points()
        .par_iter()
        .map(|&x| check_dpid(l.sector.clone(), prep.clone(), l.op.clone(), &xi, &h, &l.eps, &trees, x).map_err(CliError::from))
        .collect();
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for (x, r) in l.base_points().iter().zip(results) {
        for (t, d) in r? {
            worst = worst.max(d);
            rows.push(json!({"basePoint": x, "tree": t.encode(), "defect": d}));
        }
    }
    let ok = worst <= tol;
    run.out.json("dpidd.json", &json!({"ok": ok, "tol": tol, "trees": trees.len(), "worst": worst, "rows": rows}))?;
    Ok(Some((ok, format!("derivative defect {worst:e}"))))
}

fn model_build(run: &mut Run<'_>, cfg: &PathBuf) -> R<Option<(bool, String)>> {
    let l = load_numeric(run, cfg)?;
    let ctx = context(&l, prep_of(&l)?)?;
    let trees = l.sector.all();
    let md = build_model(&ctx, &trees, &l.p, &l.base_points(), false)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tree", "t", "norm"]).map_err(|e| CliError::Io(e.to_string()))?;
    let mut sups = serde_json::Map::new();
    if !l.cfg.t_grid.is_empty() {
        for t in &trees {
            if t.is_one() {
                continue;
            }
            let (series, sup) = model_norms(&md, &ctx, t, &l.cfg.t_grid)?;
            for (tt, v) in series {
                w.write_record([t.encode(), tt.to_string(), v.to_string()]).map_err(|e| CliError::Io(e.to_string()))?;
            }
            sups.insert(t.encode(), json!(sup));
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    run.out.write("norms.csv", &bytes)?;
    let ch = |c: &ri_core::hopf::Character<f64>| -> Value { c.values.iter().map(|(k, v)| (k.encode(), json!(v))).collect::<serde_json::Map<_, _>>().into() };
    let chars: Vec<Value> = md
        .base_points
        .iter()
        .enumerate()
        .map(|(i, x)| json!({"basePoint": x, "gInv": ch(&md.g_inv[i]), "g": ch(&md.g[i]), "f": ch(&md.f[i]), "lambda": ch(&md.lambda[i])}))
        .collect();
    run.out.json("characters.json", &json!({"eps": fmt_q(&md.eps), "p": md.p.to_string(), "characters": chars}))?;
    run.out.json("model.json", &json!({"trees": trees_json(&trees), "basePoints": md.base_points, "sup": sups}))?;
    Ok(None)
}

fn bphz_solve(run: &mut Run<'_>, cfg: &PathBuf, mode: Option<&str>) -> R<Option<(bool, String)>> {
    let l = load_numeric(run, cfg)?;
    let mut e = l.ensemble();
    if let Some(m) = mode {
        e.mode = m.parse::<Mode>()?;
    }
    let bm = l.sector.b_minus();
    if !l.cfg.levels.is_empty() {
        let id = Arc::new(PreparationMap::<f64>::identity(&l.sector));
        let st = level_study(&e, &id, &bm, &l.cfg.levels)?;
        run.out.json("levels.json", &serde_json::to_value(&st).expect("serializable"))?;
    }
    let mut es = e.clone();
    es.samples = l.cfg.solver_samples.unwrap_or(l.cfg.samples);
    let (c, solve) = solve_bphz_c(&es, l.cfg.max_stderr)?;
    let stderr: serde_json::Map<String, Value> = solve.iter().map(|s| (s.tree.clone(), json!(s.stderr))).collect();
    run.out.json("constants.json", &json!({"mode": e.mode, "c": c.to_json(), "stderr": stderr, "estimates": solve}))?;
    let mut ev = e.clone();
    ev.first = l.cfg.first_sample + l.cfg.verify_offset;
    let prep = Arc::new(make_rc(&c, &l.sector)?);
    let check = ev.estimate(&prep, &bm)?;
    run.out.json("verify.json", &json!({"first": ev.first, "estimates": check}))?;
    Ok(None)
}

fn scaling(run: &mut Run<'_>, cfg: &PathBuf, tree: &str) -> R<Option<(bool, String)>> {
    let l = load_numeric(run, cfg)?;
    let t = Tree::parse(tree, l.sector.d())?;
    let prep = prep_of(&l)?;
    let fit = scaling_fit(&l.ensemble(), &prep, &t, &l.p, &l.base_points(), &l.cfg.t_grid, l.cfg.bootstrap, l.cfg.bootstrap_seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "norm"]).map_err(|e| CliError::Io(e.to_string()))?;
    for (tt, v) in &fit.series {
        w.write_record([tt.to_string(), v.to_string()]).map_err(|e| CliError::Io(e.to_string()))?;
    }
    run.out.write("series.csv", &w.into_inner().map_err(|e| CliError::Io(e.to_string()))?)?;
    run.out.json("fit.json", &serde_json::to_value(&fit).expect("serializable"))?;
    Ok(None)
}
