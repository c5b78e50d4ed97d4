//! Acceptance suite: one PASS/FAIL line per criterion with its pinned
//! tolerance. Exits non-zero when any criterion fails.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ristrain::config::{ExperimentConfig, Profile};
use ristrain::experiment::{run_sweep, summarize, SummaryRow};
use ristrain::validate::{random_pattern, random_training};
use ristrain_core::baselines::{design_scheme, SchemeId, SchemeSetup};
use ristrain_core::channel::{cascaded_correlation, complex_gaussian, CorrelationSpec};
use ristrain_core::lmmse_design::{build_surrogate, closed_form_training_row, design_lmmse, update_pattern, LmmseProblem};
use ristrain_core::ls_design::{design_ls, ls_surrogate, mm_update_ls};
use ristrain_core::phase_model::{PhaseSearch, PhaseTable, ScalarPhaseObjective};
use ristrain_core::system::{build_s, build_s_matrix, lmmse_objective};
use ristrain_core::{CMatrix, DesignOptions, Estimator, ReflectionModel, ReflectionPattern, SystemDims, C64};

type DM = DMatrix<Complex<f64>>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn to_dm(a: &CMatrix) -> DM {
    DM::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)])
}

fn dense_trace_inv(a: &DM) -> f64 {
    a.clone().try_inverse().expect("invertible").trace().re
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn desk() -> SystemDims {
    SystemDims::minimal(2, 8, 4).unwrap()
}

fn snr_power(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

/// 1. Tr[(SS^H)^{-1}] = Tr[(VV^H)^{-1}]·Tr[(XX^H)^{-1}].
fn kronecker_trace_identity() -> Outcome {
    let model = ReflectionModel::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let v = random_pattern(&mut rng, 6, 7, &model);
        let x = random_training(&mut rng, 2, 2, &[1.0, 1.0]);
        let (vd, xd) = (to_dm(v.matrix()), to_dm(x.matrix()));
        // S = (V ⊗ I_K)(I_B ⊗ X), assembled independently of the library.
        let s = vd.kronecker(&DM::identity(2, 2)) * DM::identity(7, 7).kronecker(&xd);
        let lhs = dense_trace_inv(&(&s * s.adjoint()));
        let rhs = dense_trace_inv(&(&vd * vd.adjoint())) * dense_trace_inv(&(&xd * xd.adjoint()));
        worst = worst.max(rel(lhs, rhs));
        let lib = ristrain_core::numerics::trace_of_inverse(&ristrain_core::HermitianMatrix::gram(&build_s(&v, &x))).unwrap();
        worst = worst.max(rel(lib, rhs));
    }
    outcome(worst <= 1e-8, format!("200 points, max rel err {worst:.2e}, tol 1e-8"))
}

fn element_direction(rng: &mut ChaCha8Rng, m1: usize, b: usize) -> CMatrix {
    CMatrix::from_fn(m1, b, |i, _| if i + 1 == m1 { C64::new(0.0, 0.0) } else { complex_gaussian(rng, 1.0) })
}

fn central(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Central difference with one Richardson step, error O(h⁴).
fn richardson(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    let d1 = central(&mut f, h);
    let d2 = central(&mut f, h / 2.0);
    (4.0 * d2 - d1) / 3.0
}

/// 2. Both surrogates dominate, touch at the expansion point and share its slope.
fn majorization_suites() -> Outcome {
    let model = ReflectionModel::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut dom_ls, mut tan_ls, mut grad_ls, mut n) = (true, 0.0f64, 0.0f64, 0);
    while n < 100 {
        let v0 = random_pattern(&mut rng, 6, 7, &model);
        let v = random_pattern(&mut rng, 6, 7, &model);
        let (f0, f) = (v0.trace_inv_gram().unwrap(), v.trace_inv_gram().unwrap());
        // The bound is stated on the level set of V₀.
        if f > f0 {
            continue;
        }
        let sur = ls_surrogate(&v0).unwrap();
        dom_ls &= sur.evaluate(v.matrix()) >= f * (1.0 - 1e-8);
        tan_ls = tan_ls.max(rel(sur.evaluate(v0.matrix()), f0));
        let d = element_direction(&mut rng, 7, 7);
        let at = |h: f64| v0.matrix() + &d.scale(h);
        // The surrogate is quadratic, so a wide step is exact and avoids cancellation.
        let h = 1e-4 / d.frobenius_norm();
        let gf = richardson(|h| ReflectionPattern::new(at(h)).unwrap().trace_inv_gram().unwrap(), h);
        let gs = central(|h| sur.evaluate(&at(h)), 1e-2);
        grad_ls = grad_ls.max((gf - gs).abs() / gf.abs().max(1e-3));
        n += 1;
    }

    let d = SystemDims::minimal(2, 4, 3).unwrap();
    let r = cascaded_correlation(&CorrelationSpec::reference(), &d).unwrap();
    let (mut dom_l, mut tan_l, mut grad_l) = (true, 0.0f64, 0.0f64);
    for i in 0..100 {
        let p = snr_power([-5.0, 0.0, 5.0, 10.0][i % 4]);
        let problem = LmmseProblem::new(r.clone(), 1.0, d.l, vec![p; d.k]).unwrap();
        let g = |s: &CMatrix| lmmse_objective(s, &r, 1.0, d.l).unwrap();
        let x0 = random_training(&mut rng, d.k, d.tau, &problem.power);
        let v0 = random_pattern(&mut rng, d.m, d.b, &model);
        let sur = build_surrogate(x0.matrix(), v0.matrix(), &problem).unwrap();
        let s0 = build_s(&v0, &x0);
        tan_l = tan_l.max(rel(sur.lemma_bound(&s0, &problem), g(&s0)));
        let s = build_s(&random_pattern(&mut rng, d.m, d.b, &model), &random_training(&mut rng, d.k, d.tau, &problem.power));
        dom_l &= sur.lemma_bound(&s, &problem) >= g(&s) - 1e-8 * g(&s).abs();

        let dv = element_direction(&mut rng, d.m + 1, d.b);
        let dx = CMatrix::from_fn(d.k, d.tau, |_, _| complex_gaussian(&mut rng, 1.0));
        let s_at = |h: f64| build_s_matrix(&(v0.matrix() + &dv.scale(h)), &(x0.matrix() + &dx.scale(h)));
        let gf = richardson(|h| g(&s_at(h)), 1e-4);
        let gs = richardson(|h| sur.lemma_bound(&s_at(h), &problem), 1e-4);
        grad_l = grad_l.max((gf - gs).abs() / gf.abs().max(1e-3));
    }
    let passed = dom_ls && dom_l && tan_ls <= 1e-8 && tan_l <= 1e-8 && grad_ls <= 1e-4 && grad_l <= 1e-4;
    outcome(
        passed,
        format!(
            "LS: dominates {dom_ls}, tangency {tan_ls:.1e}, gradient {grad_ls:.1e}; LMMSE: dominates {dom_l}, tangency {tan_l:.1e}, gradient {grad_l:.1e}; tol 1e-8 / 1e-4"
        ),
    )
}

/// 3. Objective traces never increase and the stopping rule fires.
fn monotone_convergence() -> Outcome {
    let model = ReflectionModel::reference();
    let dims = desk();
    let opts = DesignOptions::plain();
    let (mut bad, mut unconverged, mut max_it) = (0, 0, 0);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
        let v0 = random_pattern(&mut rng, dims.m, dims.b, &model);
        let ls = design_ls(&v0, &model, &opts).unwrap();

        let snr = [-5.0, 0.0, 5.0, 10.0][seed as usize % 4];
        let r = cascaded_correlation(&CorrelationSpec::reference(), &dims).unwrap();
        let problem = LmmseProblem::new(r, 1.0, dims.l, vec![snr_power(snr); dims.k]).unwrap();
        let x0 = random_training(&mut rng, dims.k, dims.tau, &problem.power);
        let lm = design_lmmse(&problem, &model, &x0, &v0, &opts).unwrap();
        for t in [&ls.trace, &lm.trace] {
            bad += usize::from(!t.is_non_increasing(0.0));
            unconverged += usize::from(!t.converged);
            max_it = max_it.max(t.iterations());
        }
    }
    outcome(
        bad == 0 && unconverged == 0,
        format!("40 runs: {bad} increasing, {unconverged} unconverged, max {max_it} of {} iterations", opts.max_iter),
    )
}

/// KKT solution of `min q‖x‖² − 2Re b^H x` s.t. `‖x‖² ≤ p` by bisection on the multiplier.
fn qp_oracle(b: &[C64], q: f64, p: f64) -> Vec<C64> {
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let energy = |mu: f64| (nb / (q + mu)).powi(2);
    let mut mu = 0.0;
    if energy(0.0) > p {
        let (mut lo, mut hi) = (0.0, 1.0);
        while energy(hi) > p {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if energy(mid) > p {
                lo = mid
            } else {
                hi = mid
            }
        }
        mu = hi;
    }
    b.iter().map(|z| z / (q + mu)).collect()
}

fn grid_min(obj: &ScalarPhaseObjective, model: &ReflectionModel) -> f64 {
    (0..1_000_000).map(|t| obj.evaluate(TAU * t as f64 / 1e6, model)).fold(f64::INFINITY, f64::min)
}

/// 4. Closed-form training rows and element-wise phase updates against oracles.
fn optimality_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut qp_err = 0.0f64;
    for _ in 0..500 {
        let tau = rng.random_range(1..6);
        let var = 10f64.powf(rng.random_range(-2.0..2.0));
        let b: Vec<C64> = (0..tau).map(|_| complex_gaussian(&mut rng, var)).collect();
        let q = 10f64.powf(rng.random_range(-2.0..1.0)) * rng.random_range(1..10) as f64;
        let p = 10f64.powf(rng.random_range(-1.0..1.5));
        let got = closed_form_training_row(&b, q, p, 0).unwrap();
        let want = qp_oracle(&b, q, p);
        let err = got.iter().zip(&want).map(|(a, w)| (a - w).norm_sqr()).sum::<f64>().sqrt();
        let size = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        qp_err = qp_err.max(err / size);
    }

    let model = ReflectionModel::reference();
    let table = PhaseTable::new(&model, PhaseSearch::default());
    let value = |q: f64, c: C64, z: C64| q * z.norm_sqr() + 2.0 * (c * z).re;
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..25 {
        let v0 = random_pattern(&mut rng, 6, 7, &model);
        let sur = ls_surrogate(&v0).unwrap();
        let next = mm_update_ls(&v0, &table).unwrap();
        let (m, n) = (rng.random_range(0..6), rng.random_range(0..7));
        let obj = sur.entry_objective(m, n);
        excess = excess.max((value(obj.q, obj.c, next.matrix()[(m, n)]) - grid_min(&obj, &model)) / obj.q);
    }
    let d = SystemDims::minimal(2, 4, 3).unwrap();
    let r = cascaded_correlation(&CorrelationSpec::reference(), &d).unwrap();
    let problem = LmmseProblem::new(r, 1.0, d.l, vec![2.0; d.k]).unwrap();
    for _ in 0..25 {
        let x0 = random_training(&mut rng, d.k, d.tau, &problem.power);
        let v0 = random_pattern(&mut rng, d.m, d.b, &model);
        let sur = build_surrogate(x0.matrix(), v0.matrix(), &problem).unwrap();
        let next = update_pattern(&sur, &table).unwrap();
        let (m, n) = (rng.random_range(0..d.m), rng.random_range(0..d.b));
        let (q, c) = (sur.lambda3 * d.k as f64, -sur.pattern_gradient()[(m, n)]);
        excess = excess.max((value(q, c, next.matrix()[(m, n)]) - grid_min(&ScalarPhaseObjective::new(q, c), &model)) / q);
    }
    outcome(
        qp_err <= 1e-6 && excess <= 1e-9,
        format!("QP max rel err {qp_err:.1e} (tol 1e-6); phase excess over 1e6-point grid {excess:.1e} (tol 1e-9, relative to q)"),
    )
}

fn sweep(estimator: Estimator, seed: u64, snr: &[f64], trials: usize, schemes: &[SchemeId], beta_min: f64) -> Vec<SummaryRow> {
    let mut cfg = ExperimentConfig::profile(Profile::Desk);
    cfg.estimator = estimator;
    cfg.seed = seed;
    cfg.snr_db = snr.to_vec();
    cfg.trials = trials;
    cfg.schemes = schemes.to_vec();
    cfg.beta_min = beta_min;
    summarize(&run_sweep(&cfg).unwrap())
}

fn cell(rows: &[SummaryRow], s: SchemeId, snr: f64) -> &SummaryRow {
    rows.iter().find(|r| r.scheme == s && r.snr_db == snr).unwrap()
}

/// `a ≤ b` up to rounding; ideal-projection and naive coincide for LS.
fn le(a: f64, b: f64) -> bool {
    a <= b * (1.0 + 1e-9)
}

/// 5. Scheme ordering at desk scale over seeded repetitions.
fn figure_ordering() -> Outcome {
    const SNR: [f64; 4] = [-5.0, 0.0, 5.0, 10.0];
    const REPS: u64 = 20;
    use SchemeId::*;
    let schemes = [Proposed, IdealRisProjection, Naive, OnOff];
    let mut held = 0;
    let mut first_failure = String::new();
    for rep in 0..REPS {
        let ls = sweep(Estimator::Ls, 500 + rep, &SNR, 50, &schemes, 0.2);
        let lm = sweep(Estimator::Lmmse, 500 + rep, &SNR, 50, &schemes, 0.2);
        let mut ok = true;
        for &snr in &SNR {
            let e = |rows: &[SummaryRow], s| cell(rows, s, snr).empirical_nmse.unwrap();
            let a = |rows: &[SummaryRow], s| cell(rows, s, snr).analytic_nmse;
            let checks = [
                ("LS proposed <= projection", le(e(&ls, Proposed), e(&ls, IdealRisProjection))),
                ("LS projection <= naive", le(e(&ls, IdealRisProjection), e(&ls, Naive))),
                ("LS naive < on-off", e(&ls, Naive) < e(&ls, OnOff)),
                // The gap is far below Monte Carlo resolution at 50 trials,
                // so it is read from the analytic NMSE.
                ("LMMSE projection < naive", a(&lm, IdealRisProjection) < a(&lm, Naive)),
                ("LMMSE proposed < LS proposed", e(&lm, Proposed) < e(&ls, Proposed)),
            ];
            for (name, pass) in checks {
                if !pass && first_failure.is_empty() {
                    first_failure = format!("; first failure: rep {rep}, {snr} dB, {name}");
                }
                ok &= pass;
            }
        }
        held += usize::from(ok);
    }
    let frac = held as f64 / REPS as f64;
    outcome(frac >= 0.95, format!("orderings held in {held}/{REPS} repetitions (need >= 95%){first_failure}"))
}

/// 6. NMSE(proposed) is non-increasing in β_min and the gap to projection shrinks.
fn beta_min_sensitivity() -> Outcome {
    let dims = desk();
    let mut ok = true;
    let mut detail = Vec::new();
    for est in [Estimator::Ls, Estimator::Lmmse] {
        let mut prop = Vec::new();
        let mut gap = Vec::new();
        for bm in [0.2, 0.5, 0.8, 1.0] {
            let model = ReflectionModel::new(bm, 2.0, 0.43 * std::f64::consts::PI).unwrap();
            let setup = SchemeSetup::at_snr(dims, model, CorrelationSpec::reference(), 0.0, DesignOptions::plain());
            let p = design_scheme(SchemeId::Proposed, est, &setup).unwrap().nmse();
            let q = design_scheme(SchemeId::IdealRisProjection, est, &setup).unwrap().nmse();
            prop.push(p);
            gap.push(q - p);
        }
        ok &= prop.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
        ok &= gap.windows(2).all(|w| w[1] <= w[0] + 1e-9 * prop[0]);
        detail.push(format!(
            "{est}: nmse {} gap {}",
            prop.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("/"),
            gap.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>().join("/")
        ));
    }
    outcome(ok, format!("beta_min 0.2/0.5/0.8/1.0 at 0 dB; {}", detail.join("; ")))
}

/// 7. SQUAREM reaches the plain limit within 1e-3 using at most half the updates.
fn squarem_acceleration() -> Outcome {
    let model = ReflectionModel::reference();
    let dims = desk();
    let mut worst = 0.0f64;
    let mut ok = true;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let v0 = random_pattern(&mut rng, dims.m, dims.b, &model);
        let plain = design_ls(&v0, &model, &DesignOptions::plain()).unwrap();
        let acc = design_ls(&v0, &model, &DesignOptions::accelerated()).unwrap();
        let target = plain.trace.final_objective().unwrap() * (1.0 + 1e-3);
        match acc.trace.calls_to_reach(target) {
            Some(c) => {
                let ratio = c as f64 / plain.trace.mm_calls() as f64;
                worst = worst.max(ratio);
                ok &= ratio <= 0.5;
            }
            None => {
                ok = false;
                worst = f64::INFINITY;
            }
        }
    }
    outcome(ok, format!("10 instances, worst accelerated/plain update ratio {worst:.3} (need <= 0.5, eps 1e-3)"))
}

/// 8. Tr[(I+A)^{-1}] ≤ Na/(N+a) with a = Tr[A^{-1}].
fn lemma_trace_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let n = rng.random_range(1..9);
        let g = DM::from_fn(n, n, |_, _| {
            let z = complex_gaussian(&mut rng, 1.0);
            Complex::new(z.re, z.im)
        });
        let a = &g * g.adjoint() + DM::identity(n, n).scale(rng.random_range(1e-3..1.0));
        let ta = dense_trace_inv(&a);
        let lhs = dense_trace_inv(&(DM::identity(n, n) + &a));
        let nn = n as f64;
        worst = worst.max(lhs - nn * ta / (nn + ta));
    }
    outcome(worst <= 1e-10, format!("1000 matrices, max excess {worst:.1e} (tol 1e-10)"))
}

/// 9. Analytic and Monte Carlo NMSE agree.
fn estimator_consistency() -> Outcome {
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for est in [Estimator::Ls, Estimator::Lmmse] {
        let rows = sweep(est, 900, &[0.0], 10_000, &[SchemeId::Proposed], 0.2);
        let r = &rows[0];
        let dev = r.empirical_nmse.unwrap() / r.analytic_nmse - 1.0;
        worst = worst.max(dev.abs());
        detail.push(format!("{est} {:+.2}%", 100.0 * dev));
    }
    outcome(worst <= 0.03, format!("1e4 trials at 0 dB: {} (tol 3%)", detail.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("kronecker trace identity", kronecker_trace_identity, Duration::from_secs(10)),
        ("majorization suites", majorization_suites, Duration::from_secs(60)),
        ("monotone convergence", monotone_convergence, Duration::from_secs(300)),
        ("closed-form optimality oracles", optimality_oracles, Duration::from_secs(120)),
        ("figure ordering at desk scale", figure_ordering, Duration::from_secs(600)),
        ("beta_min sensitivity", beta_min_sensitivity, Duration::from_secs(300)),
        ("SQUAREM acceleration", squarem_acceleration, Duration::from_secs(300)),
        ("trace bound lemma", lemma_trace_bound, Duration::from_secs(10)),
        ("estimator consistency", estimator_consistency, Duration::from_secs(180)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let passed = out.passed && took <= *budget;
        failed += usize::from(!passed);
        println!(
            "criterion {} {name}: {} ({}; {:.1} s of {} s budget)",
            i + 1,
            if passed { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
