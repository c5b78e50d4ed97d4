//! Invariant suite run against a configuration.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ristrain_core::baselines::SchemeId;
use ristrain_core::channel::{cascaded_correlation, complex_gaussian};
use ristrain_core::lmmse_design::{build_surrogate, LmmseProblem};
use ristrain_core::ls_design::ls_surrogate;
use ristrain_core::system::{build_s, lmmse_objective, mse_lmmse, mse_ls, FEASIBILITY_TOL};
use ristrain_core::{CMatrix, HermitianMatrix, ReflectionModel, ReflectionPattern, TrainingMatrix};

use crate::config::ExperimentConfig;
use crate::error::SimError;
use crate::experiment::design_cells;

/// Random points per sampled check.
pub const SAMPLES: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

/// Element rows with uniformly random phases on the model.
pub fn random_pattern<R: Rng>(rng: &mut R, m: usize, b: usize, model: &ReflectionModel) -> ReflectionPattern {
    let e = CMatrix::from_fn(m, b, |_, _| model.coefficient(rng.random::<f64>() * TAU));
    ReflectionPattern::from_elements(&e).expect("element block has M rows")
}

/// Gaussian rows scaled to a random fraction in `[0.3, 1)` of each budget.
pub fn random_training<R: Rng>(rng: &mut R, k: usize, tau: usize, power: &[f64]) -> TrainingMatrix {
    let mut x = CMatrix::from_fn(k, tau, |_, _| complex_gaussian(rng, 1.0));
    for (kk, &p) in power.iter().enumerate() {
        let e: f64 = x.row(kk).iter().map(|z| z.norm_sqr()).sum();
        let s = (p / e).sqrt() * rng.random_range(0.3..1.0);
        for z in x.row_mut(kk) {
            *z *= s;
        }
    }
    TrainingMatrix::new(x, power.to_vec()).expect("rows inside budget")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn run_validate(cfg: &ExperimentConfig) -> Result<Vec<Check>, SimError> {
    let res = cfg.validate()?;
    let d = res.dims;
    let model = res.model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let power = res.setup(cfg.snr_db[0]).power;
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..SAMPLES {
        let v = random_pattern(&mut rng, d.m, d.b, &model);
        let x = random_training(&mut rng, d.k, d.tau, &power);
        let s = build_s(&v, &x);
        let lhs = ristrain_core::numerics::trace_of_inverse(&HermitianMatrix::gram(&s))?;
        worst = worst.max(rel(lhs, v.trace_inv_gram()? * x.trace_inv_gram()?));
    }
    checks.push(Check::new("kronecker_trace_identity", worst <= 1e-8, format!("max rel err {worst:.2e} (tol 1e-8)")));

    let (mut dom, mut tan, mut n) = (true, 0.0f64, 0);
    while n < SAMPLES {
        let v0 = random_pattern(&mut rng, d.m, d.b, &model);
        let v = random_pattern(&mut rng, d.m, d.b, &model);
        let (f0, f) = (v0.trace_inv_gram()?, v.trace_inv_gram()?);
        if f > f0 {
            continue;
        }
        let sur = ls_surrogate(&v0)?;
        tan = tan.max(rel(sur.evaluate(v0.matrix()), f0));
        dom &= sur.evaluate(v.matrix()) >= f * (1.0 - 1e-8);
        n += 1;
    }
    checks.push(Check::new(
        "ls_surrogate_majorizes",
        dom && tan <= 1e-8,
        format!("domination {dom}, tangency rel err {tan:.2e} (tol 1e-8)"),
    ));

    let r = cascaded_correlation(&res.corr, &d)?;
    let problem = LmmseProblem::new(r.clone(), 1.0, d.l, power.clone())?;
    let (mut dom, mut tan) = (true, 0.0f64);
    for _ in 0..SAMPLES {
        let x0 = random_training(&mut rng, d.k, d.tau, &power);
        let v0 = random_pattern(&mut rng, d.m, d.b, &model);
        let sur = build_surrogate(x0.matrix(), v0.matrix(), &problem)?;
        let g = |s: &CMatrix| lmmse_objective(s, &r, 1.0, d.l);
        let s0 = build_s(&v0, &x0);
        tan = tan.max(rel(sur.lemma_bound(&s0, &problem), g(&s0)?));
        let s = build_s(&random_pattern(&mut rng, d.m, d.b, &model), &random_training(&mut rng, d.k, d.tau, &power));
        let gs = g(&s)?;
        dom &= sur.lemma_bound(&s, &problem) >= gs - 1e-8 * gs.abs();
    }
    checks.push(Check::new(
        "lmmse_bound_majorizes",
        dom && tan <= 1e-8,
        format!("domination {dom}, tangency rel err {tan:.2e} (tol 1e-8)"),
    ));

    let designs = design_cells(cfg, &res)?;
    let bad_traces: Vec<String> = designs
        .iter()
        .filter(|(dd, _)| dd.trace.as_ref().is_some_and(|t| !t.is_non_increasing(0.0)))
        .map(|(dd, _)| dd.scheme.to_string())
        .collect();
    checks.push(Check::new("design_traces_non_increasing", bad_traces.is_empty(), format!("violations: {bad_traces:?}")));

    let mut infeasible = Vec::new();
    for (dd, _) in &designs {
        let under = match dd.scheme {
            SchemeId::IdealRis => ReflectionModel::ideal(),
            SchemeId::OnOff => continue,
            _ => model,
        };
        let budget_ok = (0..dd.training.k()).all(|k| dd.training.row_energy(k) <= dd.training.power()[k] * (1.0 + FEASIBILITY_TOL));
        if !dd.pattern.is_feasible(&under) || !budget_ok {
            infeasible.push(dd.scheme.to_string());
        }
    }
    checks.push(Check::new("designs_feasible", infeasible.is_empty(), format!("violations: {infeasible:?}")));

    let mut worse = Vec::new();
    for (dd, _) in &designs {
        let (ls, lmmse) = (mse_ls(dd.s(), 1.0, d.l)?, mse_lmmse(dd.s(), &dd.r_gamma, 1.0, d.l)?);
        if lmmse > ls * (1.0 + 1e-9) {
            worse.push(dd.scheme.to_string());
        }
    }
    checks.push(Check::new("lmmse_not_above_ls", worse.is_empty(), format!("violations: {worse:?}")));

    let mut snrs: Vec<(usize, f64)> = cfg.snr_db.iter().copied().enumerate().collect();
    snrs.sort_by(|a, b| a.1.total_cmp(&b.1));
    let per = cfg.snr_db.len();
    let mut non_monotone = Vec::new();
    for (si, s) in res.schemes.iter().enumerate() {
        let curve: Vec<f64> = snrs.iter().map(|&(i, _)| designs[si * per + i].0.nmse()).collect();
        if curve.windows(2).any(|w| w[1] >= w[0]) {
            non_monotone.push(s.to_string());
        }
    }
    checks.push(Check::new(
        "nmse_decreases_with_snr",
        non_monotone.is_empty(),
        format!("violations: {non_monotone:?}"),
    ));
    Ok(checks)
}
