use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ristrain_core::channel::{cascaded_correlation, complex_gaussian, CorrelationSpec};
use ristrain_core::lmmse_design::{build_surrogate, closed_form_training_row, update_pattern, LmmseProblem};
use ristrain_core::ls_design::{ls_surrogate, mm_update_ls};
use ristrain_core::phase_model::{PhaseSearch, PhaseTable, ScalarPhaseObjective};
use ristrain_core::{CMatrix, ReflectionModel, ReflectionPattern, SystemDims, C64};

/// Solves `min q‖x‖² − 2Re b^H x` s.t. `‖x‖² ≤ p` through the KKT multiplier:
/// `x = b/(q+μ)`, bisecting on `μ ≥ 0`.
fn qp_oracle(b: &[C64], q: f64, p: f64) -> Vec<C64> {
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let energy = |mu: f64| (nb / (q + mu)).powi(2);
    let mu = if energy(0.0) <= p {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, 1.0);
        while energy(hi) > p {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if energy(mid) > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    b.iter().map(|z| z / (q + mu)).collect()
}

#[test]
fn training_row_matches_qp_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..500 {
        let tau = rng.random_range(1..6);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let b: Vec<C64> = (0..tau).map(|_| complex_gaussian(&mut rng, scale)).collect();
        let lambda2 = 10f64.powf(rng.random_range(-2.0..1.0));
        let blocks = rng.random_range(1..10) as f64;
        let p = 10f64.powf(rng.random_range(-1.0..1.5));
        let got = closed_form_training_row(&b, lambda2 * blocks, p, 0).unwrap();
        let want = qp_oracle(&b, lambda2 * blocks, p);
        let err: f64 = got.iter().zip(&want).map(|(a, w)| (a - w).norm_sqr()).sum::<f64>().sqrt();
        let size: f64 = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 1e-6 * size.max(1e-12), "instance {i}: {err}");
    }
}

fn grid_min(obj: &ScalarPhaseObjective, model: &ReflectionModel) -> f64 {
    (0..1_000_000)
        .map(|t| obj.evaluate(TAU * t as f64 / 1e6, model))
        .fold(f64::INFINITY, f64::min)
}

fn random_pattern(rng: &mut ChaCha8Rng, m: usize, b: usize, model: &ReflectionModel) -> ReflectionPattern {
    let e = CMatrix::from_fn(m, b, |_, _| model.coefficient(rng.random::<f64>() * TAU));
    ReflectionPattern::from_elements(&e).unwrap()
}

/// Value of the per-entry objective at a chosen coefficient.
fn value_at(q: f64, c: C64, z: C64) -> f64 {
    q * z.norm_sqr() + 2.0 * (c * z).re
}

#[test]
fn ls_phase_updates_match_grid_oracle() {
    let model = ReflectionModel::reference();
    let table = PhaseTable::new(&model, PhaseSearch::default());
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..25 {
        let v0 = random_pattern(&mut rng, 6, 7, &model);
        let sur = ls_surrogate(&v0).unwrap();
        let next = mm_update_ls(&v0, &table).unwrap();
        let (m, n) = (rng.random_range(0..6), rng.random_range(0..7));
        let obj = sur.entry_objective(m, n);
        let got = value_at(obj.q, obj.c, next.matrix()[(m, n)]);
        let best = grid_min(&obj, &model);
        assert!(got <= best + 1e-9 * best.abs().max(obj.q), "{got} > {best}");
    }
}

#[test]
fn lmmse_phase_updates_match_grid_oracle() {
    let model = ReflectionModel::reference();
    let table = PhaseTable::new(&model, PhaseSearch::default());
    let d = SystemDims::minimal(2, 4, 3).unwrap();
    let r = cascaded_correlation(&CorrelationSpec::reference(), &d).unwrap();
    let problem = LmmseProblem::new(r, 1.0, d.l, vec![2.0; d.k]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..25 {
        let x0 = CMatrix::from_fn(d.k, d.tau, |_, _| complex_gaussian(&mut rng, 0.5));
        let v0 = random_pattern(&mut rng, d.m, d.b, &model);
        let sur = build_surrogate(&x0, v0.matrix(), &problem).unwrap();
        let next = update_pattern(&sur, &table).unwrap();
        let (m, n) = (rng.random_range(0..d.m), rng.random_range(0..d.b));
        let q = sur.lambda3 * d.k as f64;
        let c = -sur.pattern_gradient()[(m, n)];
        let got = value_at(q, c, next.matrix()[(m, n)]);
        let best = grid_min(&ScalarPhaseObjective::new(q, c), &model);
        assert!(got <= best + 1e-9 * best.abs().max(q), "{got} > {best}");
    }
}
