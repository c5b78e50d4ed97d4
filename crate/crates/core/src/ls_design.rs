//! Orthogonal training and MM pattern design for the LS estimator.
//!
//! With orthogonal training the LS error factorizes as
//! `Tr[(VV^H)^{-1}]·Tr[(XX^H)^{-1}]`, so the pattern is designed alone by
//! minimizing `Tr[(VV^H)^{-1}]` under the amplitude law.

use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;

use crate::accel::{accelerate, MmProblem};
use crate::baselines::ideal_update_ls;
use crate::error::{Error, Result};
use crate::numerics::{solve_hpd_checked, CMatrix, C64};
use crate::phase_model::{PhaseTable, ReflectionModel, ScalarPhaseObjective};
use crate::system::{ReflectionPattern, TrainingMatrix};
use crate::trace::{relative_change, DesignOptions, DesignTrace, NoObserver, Observer, Recorder};

/// `x_k = √P_k d_k/‖d_k‖` with `d_k` the k-th column of the τ-point DFT.
pub fn dft_training(k: usize, tau: usize, power: &[f64]) -> Result<TrainingMatrix> {
    if tau < k || k == 0 {
        return Err(Error::InvalidDims("DFT training needs 1 <= K <= tau"));
    }
    if power.len() != k {
        return Err(Error::DimensionMismatch {
            context: "dft_training power",
            expected: (k, 1),
            found: (power.len(), 1),
        });
    }
    let norm = (tau as f64).sqrt();
    let x = CMatrix::from_fn(k, tau, |kk, t| {
        let amp = power[kk].max(0.0).sqrt() / norm;
        C64::from_polar(amp, -TAU * ((kk * t) % tau) as f64 / tau as f64)
    });
    TrainingMatrix::new(x, power.to_vec())
}

/// Quadratic upper bound of `Tr[(VV^H)^{-1}]` expanded at `V₀`:
/// `λ₁Tr[VV^H] + 2Re Tr[A₀V] + const`.
#[derive(Clone, Debug)]
pub struct LsSurrogate {
    pub lambda1: f64,
    /// B×(M+1).
    pub a0: CMatrix,
    pub const_term: f64,
    /// `Tr[(V₀V₀^H)^{-1}]`.
    pub objective_at_v0: f64,
}

impl LsSurrogate {
    pub fn evaluate(&self, v: &CMatrix) -> f64 {
        let lin = self.a0.matmul(v).trace().re;
        self.lambda1 * v.frobenius_norm_sq() + 2.0 * lin + self.const_term
    }

    /// Scalar objective of entry `(m, n)` with every other entry held fixed.
    pub fn entry_objective(&self, m: usize, n: usize) -> ScalarPhaseObjective {
        ScalarPhaseObjective::new(self.lambda1, self.a0[(n, m)])
    }
}

pub fn ls_surrogate(v0: &ReflectionPattern) -> Result<LsSurrogate> {
    let v = v0.matrix();
    let gram = v0.gram();
    // G^{-1}V₀ and G^{-2}V₀.
    let g1 = solve_hpd_checked(&gram, v)?;
    let g2 = solve_hpd_checked(&gram, &g1)?;
    // Tr[G^{-1}] = ‖G^{-1}V₀‖_F².
    let t = g1.frobenius_norm_sq();
    let lambda1 = 3.0 * t * t;
    let mut a0 = g2.adjoint();
    a0 += &v.adjoint().scale(lambda1);
    let a0 = a0.scale(-1.0);
    let const_term = t + lambda1 * gram.trace() + 2.0 * v.inner_re(&g2);
    Ok(LsSurrogate {
        lambda1,
        a0,
        const_term,
        objective_at_v0: t,
    })
}

/// One element-wise minimization of the surrogate.
pub fn mm_update_ls(v0: &ReflectionPattern, table: &PhaseTable) -> Result<ReflectionPattern> {
    let sur = ls_surrogate(v0)?;
    let (m, b) = (v0.m(), v0.b());
    let model = table.model();
    let elements = if model.is_ideal() {
        ideal_update_ls(&sur.a0)
    } else {
        let mut e = CMatrix::zeros(m, b);
        for i in 0..m {
            for n in 0..b {
                e[(i, n)] = sur.entry_objective(i, n).improve(table, v0.matrix()[(i, n)]);
            }
        }
        e
    };
    ReflectionPattern::from_elements(&elements)
}

#[derive(Clone, Debug)]
pub struct LsDesign {
    pub pattern: ReflectionPattern,
    pub trace: DesignTrace,
}

struct LsProblem<'a> {
    table: &'a PhaseTable,
}

impl MmProblem for LsProblem<'_> {
    fn mm_update(&mut self, x: &CMatrix) -> Result<CMatrix> {
        let v = ReflectionPattern::new(x.clone())?;
        Ok(mm_update_ls(&v, self.table)?.into_matrix())
    }

    fn project(&self, x: &CMatrix) -> CMatrix {
        ReflectionPattern::project_matrix(x, self.table.model()).into_matrix()
    }

    fn objective(&mut self, x: &CMatrix) -> Result<f64> {
        ReflectionPattern::new(x.clone())?.trace_inv_gram()
    }
}

pub fn design_ls(init: &ReflectionPattern, model: &ReflectionModel, opts: &DesignOptions) -> Result<LsDesign> {
    design_ls_observed(init, model, opts, &mut NoObserver)
}

/// Minimizes `Tr[(VV^H)^{-1}]` from `init`, recording the objective per iteration.
///
/// Running out of iterations is not an error; check `trace.converged`.
pub fn design_ls_observed(
    init: &ReflectionPattern,
    model: &ReflectionModel,
    opts: &DesignOptions,
    observer: &mut dyn Observer,
) -> Result<LsDesign> {
    let table = PhaseTable::new(model, opts.search);
    if opts.accelerate {
        let mut problem = LsProblem { table: &table };
        let (state, trace) = accelerate(init.matrix().clone(), &mut problem, opts.eps, opts.max_iter, observer)?;
        return Ok(LsDesign {
            pattern: ReflectionPattern::new(state.iterate)?,
            trace,
        });
    }
    let mut rec = Recorder::new(observer);
    let mut v = init.clone();
    let mut j = v.trace_inv_gram()?;
    rec.push(0, j, 0);
    for it in 1..=opts.max_iter {
        let next = mm_update_ls(&v, &table)?;
        let j_next = next.trace_inv_gram()?;
        rec.push(it, j_next, it);
        let rel = relative_change(j, j_next);
        v = next;
        j = j_next;
        if rel < opts.eps {
            rec.trace.converged = true;
            break;
        }
    }
    Ok(LsDesign {
        pattern: v,
        trace: rec.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::naive_pattern;
    use crate::numerics::HermitianMatrix;
    use crate::phase_model::PhaseSearch;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pattern(rng: &mut ChaCha8Rng, m: usize, b: usize, model: &ReflectionModel) -> ReflectionPattern {
        let e = CMatrix::from_fn(m, b, |_, _| model.coefficient(rng.random::<f64>() * TAU));
        ReflectionPattern::from_elements(&e).unwrap()
    }

    #[test]
    fn dft_training_examples() {
        let x = dft_training(2, 2, &[1.0, 1.0]).unwrap();
        let r = 0.5f64.sqrt();
        let expect = CMatrix::from_real(2, 2, &[r, r, r, -r]);
        assert!(x.matrix().max_abs_diff(&expect) < 1e-15);

        let x = dft_training(2, 4, &[4.0, 1.0]).unwrap();
        let g = HermitianMatrix::gram(x.matrix());
        assert!(g.matrix().max_abs_diff(&CMatrix::diag_real(&[4.0, 1.0])) < 1e-12);

        for (k, tau) in [(1, 1), (3, 5), (4, 4), (2, 7)] {
            let p: alloc::vec::Vec<f64> = (0..k).map(|i| 0.5 + i as f64).collect();
            let x = dft_training(k, tau, &p).unwrap();
            let g = HermitianMatrix::gram(x.matrix());
            assert!((g.matrix() - &CMatrix::diag_real(&p)).frobenius_norm() < 1e-12);
        }
        assert!(matches!(dft_training(3, 2, &[1.0; 3]), Err(Error::InvalidDims(_))));
    }

    #[test]
    fn surrogate_at_orthogonal_point() {
        let v = naive_pattern(3, 4, &ReflectionModel::ideal()).unwrap();
        let s = ls_surrogate(&v).unwrap();
        assert!((s.objective_at_v0 - 1.0).abs() < 1e-12);
        assert!((s.lambda1 - 3.0).abs() < 1e-12);
        assert!((s.evaluate(v.matrix()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn update_is_feasible_and_matches_dense_grid() {
        let model = ReflectionModel::reference();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v0 = random_pattern(&mut rng, 2, 3, &model);
        let table = PhaseTable::new(&model, PhaseSearch::default());
        let v1 = mm_update_ls(&v0, &table).unwrap();
        assert!(v1.is_feasible(&model));
        let sur = ls_surrogate(&v0).unwrap();
        for i in 0..2 {
            for n in 0..3 {
                let obj = sur.entry_objective(i, n);
                let got = obj.evaluate(v1.matrix()[(i, n)].arg(), &model);
                let grid = (0..1_000_000)
                    .map(|t| obj.evaluate(TAU * t as f64 / 1e6, &model))
                    .fold(f64::INFINITY, f64::min);
                assert!(got <= grid + 1e-9 * (obj.q + obj.c.norm()));
            }
        }
    }

    #[test]
    fn ideal_update_is_closed_form() {
        let model = ReflectionModel::ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v0 = random_pattern(&mut rng, 3, 5, &model);
        let table = PhaseTable::new(&model, PhaseSearch::default());
        let v1 = mm_update_ls(&v0, &table).unwrap();
        let sur = ls_surrogate(&v0).unwrap();
        for i in 0..3 {
            for n in 0..5 {
                let want = C64::from_polar(1.0, -(-sur.a0[(n, i)]).arg());
                assert!((v1.matrix()[(i, n)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn design_descends_from_naive() {
        let model = ReflectionModel::reference();
        let init = naive_pattern(8, 9, &model).unwrap();
        let d = design_ls(&init, &model, &DesignOptions::plain()).unwrap();
        assert!(d.trace.is_non_increasing(1e-12));
        assert!(d.trace.converged);
        assert!(d.trace.final_objective().unwrap() <= init.trace_inv_gram().unwrap());
        assert!(d.pattern.is_feasible(&model));
    }

    #[test]
    fn ideal_design_reaches_orthogonal_optimum() {
        let model = ReflectionModel::ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let init = random_pattern(&mut rng, 4, 5, &model);
        let opts = DesignOptions {
            eps: 1e-9,
            ..DesignOptions::plain()
        };
        let d = design_ls(&init, &model, &opts).unwrap();
        // Optimum Tr[((M+1)I)^{-1}] with B = M+1 = 5.
        let opt = 1.0;
        assert!((d.trace.final_objective().unwrap() - opt).abs() < 0.01 * opt);
    }

    #[test]
    fn training_choice_does_not_change_pattern_objective() {
        let model = ReflectionModel::reference();
        let init = naive_pattern(4, 5, &model).unwrap();
        let d = design_ls(&init, &model, &DesignOptions::plain()).unwrap();
        let p = [2.0, 2.0];
        let x1 = dft_training(2, 2, &p).unwrap();
        // Another orthogonal training: permuted and phase-rotated DFT rows.
        let x2 = CMatrix::from_fn(2, 2, |k, t| x1.matrix()[(1 - k, t)] * C64::from_polar(1.0, 0.3 * k as f64));
        let x2 = TrainingMatrix::new(x2, p.to_vec()).unwrap();
        let s1 = crate::system::build_s(&d.pattern, &x1);
        let s2 = crate::system::build_s(&d.pattern, &x2);
        let j1 = crate::system::mse_ls(&s1, 1.0, 4).unwrap();
        let j2 = crate::system::mse_ls(&s2, 1.0, 4).unwrap();
        assert!((j1 - j2).abs() < 1e-10 * j1);
    }

    #[test]
    fn acceleration_needs_fewer_updates() {
        let model = ReflectionModel::reference();
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v0 = random_pattern(&mut rng, 8, 9, &model);
            let plain = design_ls(&v0, &model, &DesignOptions::plain()).unwrap();
            let acc = design_ls(&v0, &model, &DesignOptions::accelerated()).unwrap();
            assert!(acc.trace.is_non_increasing(0.0));
            let target = plain.trace.final_objective().unwrap() * (1.0 + 1e-3);
            let ca = acc.trace.calls_to_reach(target).expect("target not reached");
            assert!(2 * ca <= plain.trace.mm_calls(), "seed {seed}: {ca} vs {}", plain.trace.mm_calls());
        }
    }
}
