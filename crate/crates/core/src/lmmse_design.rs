//! Alternating MM design of training and pattern for the LMMSE estimator.
//!
//! Each round linearizes the LMMSE objective at `S₀ = S(X₀, V₀)` and then
//! bounds the remaining quadratic in `X` and in `V` by a scaled identity, which
//! gives a closed form for every training row and a scalar phase search for
//! every pattern entry.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::accel::{squarem_step, AccelState, MmProblem};
use crate::baselines::ideal_update_lmmse;
use crate::error::{Error, Result};
use crate::numerics::{solve_hpd, CMatrix, HermitianMatrix, C64, POWER_MAX_ITER, POWER_TOL};
use crate::phase_model::{PhaseTable, ReflectionModel, ScalarPhaseObjective};
use crate::system::{build_s_matrix, mse_lmmse, v_tilde, x_tilde, ReflectionPattern, TrainingMatrix};
use crate::trace::{relative_change, DesignOptions, DesignTrace, NoObserver, Observer, Recorder};

/// Multiplier applied to every power-iteration eigenvalue used as a bound.
pub const SPECTRAL_MARGIN: f64 = 1.0001;

fn lambda_max(a: &HermitianMatrix) -> f64 {
    a.largest_eigenvalue(POWER_TOL, POWER_MAX_ITER).value.max(0.0)
}

/// Channel prior, noise level and power budgets shared by every round.
#[derive(Clone, Debug)]
pub struct LmmseProblem {
    pub r_gamma: HermitianMatrix,
    pub sigma2: f64,
    pub l: usize,
    pub power: Vec<f64>,
    lambda_r: f64,
}

impl LmmseProblem {
    pub fn new(r_gamma: HermitianMatrix, sigma2: f64, l: usize, power: Vec<f64>) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidDims("noise variance must be positive"));
        }
        if l == 0 || power.is_empty() {
            return Err(Error::InvalidDims("L and K must be positive"));
        }
        let lambda_r = lambda_max(&r_gamma);
        Ok(Self {
            r_gamma,
            sigma2,
            l,
            power,
            lambda_r,
        })
    }

    /// `λ_max(R_Γ)` from power iteration, without margin.
    pub fn lambda_r(&self) -> f64 {
        self.lambda_r
    }

    pub fn mse(&self, x: &CMatrix, v: &CMatrix) -> Result<f64> {
        mse_lmmse(&build_s_matrix(v, x), &self.r_gamma, self.sigma2, self.l)
    }
}

/// Surrogate state built at `(X₀, V₀)`.
///
/// `lambda3` and `c0` refer to the training in `x_pattern`, which is `X₀`
/// right after [`build_surrogate`] and the updated training after
/// [`LmmseSurrogate::with_training`].
#[derive(Clone, Debug)]
pub struct LmmseSurrogate {
    pub xi0: CMatrix,
    pub xixh: HermitianMatrix,
    pub w: HermitianMatrix,
    pub lambda2: f64,
    pub b0: CMatrix,
    pub lambda3: f64,
    pub c0: CMatrix,
    pub x0: CMatrix,
    pub v0: CMatrix,
    pub x_pattern: CMatrix,
    k: usize,
    tau: usize,
    b: usize,
    m: usize,
    r_times_vt: CMatrix,
}

pub fn build_surrogate(x0: &CMatrix, v0: &CMatrix, problem: &LmmseProblem) -> Result<LmmseSurrogate> {
    let (k, tau) = x0.shape();
    let (m1, b) = v0.shape();
    let n = m1 * k;
    if problem.r_gamma.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "lmmse surrogate correlation",
            expected: (n, n),
            found: (problem.r_gamma.dim(), problem.r_gamma.dim()),
        });
    }
    let r = &problem.r_gamma;
    let s0 = build_s_matrix(v0, x0);
    let t0 = s0.adjoint_mul(r.matrix());
    let u0 = HermitianMatrix::congruence(r, &s0).add_diagonal(problem.sigma2 * problem.l as f64);
    let xi0 = solve_hpd(&u0, &t0)?;
    let xixh = HermitianMatrix::gram(&xi0);

    let vt = v_tilde(v0, k);
    let r_times_vt = r.matrix().matmul(&vt);
    let w = HermitianMatrix::congruence(r, &vt);
    let lambda2 = SPECTRAL_MARGIN * lambda_max(&xixh) * lambda_max(&w);

    let xt0 = x_tilde(x0, b);
    let xt0_h = xt0.adjoint();
    let mut b0 = xt0_h.scale(lambda2);
    b0 -= &xixh.matrix().matmul(&xt0_h).matmul(w.matrix());
    b0 += &xi0.matmul(&r_times_vt);

    let mut sur = LmmseSurrogate {
        xi0,
        xixh,
        w,
        lambda2,
        b0,
        lambda3: 0.0,
        c0: CMatrix::zeros(0, 0),
        x0: x0.clone(),
        v0: v0.clone(),
        x_pattern: x0.clone(),
        k,
        tau,
        b,
        m: m1 - 1,
        r_times_vt,
    };
    sur.set_pattern_training(x0, problem);
    Ok(sur)
}

impl LmmseSurrogate {
    /// Recomputes `λ₃` and `C₀` for training `x`, keeping `Ξ₀`.
    pub fn with_training(&self, x: &CMatrix, problem: &LmmseProblem) -> Self {
        let mut out = self.clone();
        out.set_pattern_training(x, problem);
        out
    }

    fn set_pattern_training(&mut self, x: &CMatrix, problem: &LmmseProblem) {
        let xt = x_tilde(x, self.b);
        let xt_xi = xt.matmul(&self.xi0);
        let q = HermitianMatrix::gram(&xt_xi);
        self.lambda3 = SPECTRAL_MARGIN * lambda_max(&q) * problem.lambda_r();
        let vt_h = v_tilde(&self.v0, self.k).adjoint();
        let mut c0 = vt_h.scale(self.lambda3);
        // Ṽ₀^H R = (R Ṽ₀)^H.
        c0 -= &q.matrix().matmul(&self.r_times_vt.adjoint());
        c0 += &xt_xi.matmul(problem.r_gamma.matrix());
        self.c0 = c0;
        self.x_pattern = x.clone();
    }

    /// `b_k[t] = Σ_b conj(B₀[(b,t), (b,k)])`.
    pub fn training_gradient(&self, ue: usize) -> Vec<C64> {
        (0..self.tau)
            .map(|t| {
                (0..self.b)
                    .map(|bb| self.b0[(bb * self.tau + t, bb * self.k + ue)])
                    .sum::<C64>()
                    .conj()
            })
            .collect()
    }

    /// `c_{m,n} = Σ_k C₀[(n,k), (m,k)]`, as an (M+1)×B matrix.
    pub fn pattern_gradient(&self) -> CMatrix {
        CMatrix::from_fn(self.m + 1, self.b, |m, n| {
            (0..self.k).map(|kk| self.c0[(n * self.k + kk, m * self.k + kk)]).sum()
        })
    }

    /// Training surrogate `λ₂B‖X‖² − 2Re Σ_k b_k^H x_k`.
    pub fn training_objective(&self, x: &CMatrix) -> f64 {
        let mut lin = 0.0;
        for kk in 0..self.k {
            let bk = self.training_gradient(kk);
            lin += bk.iter().zip(x.row(kk)).map(|(b, z)| (b.conj() * z).re).sum::<f64>();
        }
        self.lambda2 * self.b as f64 * x.frobenius_norm_sq() - 2.0 * lin
    }

    /// Pattern surrogate `λ₃K‖V‖² − 2Re Σ c_{m,n}V_{m,n}`.
    pub fn pattern_objective(&self, v: &CMatrix) -> f64 {
        let c = self.pattern_gradient();
        let lin: f64 = c.as_slice().iter().zip(v.as_slice()).map(|(a, z)| (a * z).re).sum();
        self.lambda3 * self.k as f64 * v.frobenius_norm_sq() - 2.0 * lin
    }

    /// Linearized objective `g(S;S₀) = Tr[Ξ₀^H S^H R S Ξ₀] − 2Re Tr[Ξ₀RS] + σ²L·Tr[Ξ₀Ξ₀^H]`.
    pub fn lemma_bound(&self, s: &CMatrix, problem: &LmmseProblem) -> f64 {
        let s_xi = s.matmul(&self.xi0);
        let quad = s_xi.inner_re(&problem.r_gamma.matrix().matmul(&s_xi));
        let lin = self.xi0.matmul(problem.r_gamma.matrix()).matmul(s).trace().re;
        quad - 2.0 * lin + problem.sigma2 * problem.l as f64 * self.xixh.trace()
    }
}

/// Minimizer of `λ₂B‖x‖² − 2Re b^H x` over `‖x‖² ≤ P`.
pub fn closed_form_training_row(b: &[C64], lambda2_b: f64, p: f64, ue: usize) -> Result<Vec<C64>> {
    let norm = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroGradient { ue });
    }
    let sp = p.sqrt();
    let scale = if norm > sp * lambda2_b { sp / norm } else { 1.0 / lambda2_b };
    Ok(b.iter().map(|z| z * scale).collect())
}

/// Row-wise closed-form training update. Rows with a vanishing gradient keep
/// their previous value.
pub fn update_training(sur: &LmmseSurrogate, previous: &TrainingMatrix) -> Result<TrainingMatrix> {
    let lb = sur.lambda2 * sur.b as f64;
    let mut x = previous.matrix().clone();
    for (kk, &p) in previous.power().iter().enumerate() {
        match closed_form_training_row(&sur.training_gradient(kk), lb, p, kk) {
            Ok(row) => x.row_mut(kk).copy_from_slice(&row),
            Err(Error::ZeroGradient { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    TrainingMatrix::new(clamp_rows(x, previous.power()), previous.power().to_vec())
}

/// Removes rounding excess above the budget.
fn clamp_rows(mut x: CMatrix, power: &[f64]) -> CMatrix {
    for (kk, &p) in power.iter().enumerate() {
        let e: f64 = x.row(kk).iter().map(|z| z.norm_sqr()).sum();
        if e > p {
            let s = (p / e).sqrt();
            for z in x.row_mut(kk) {
                *z *= s;
            }
        }
    }
    x
}

/// Entry-wise pattern update with `q = λ₃K`, `c = −c_{m,n}`.
pub fn update_pattern(sur: &LmmseSurrogate, table: &PhaseTable) -> Result<ReflectionPattern> {
    let c = sur.pattern_gradient();
    let model = table.model();
    let m = sur.m;
    let elements = if model.is_ideal() {
        ideal_update_lmmse(&c.block(0, 0, m, sur.b))
    } else {
        let q = sur.lambda3 * sur.k as f64;
        CMatrix::from_fn(m, sur.b, |i, n| ScalarPhaseObjective::new(q, -c[(i, n)]).improve(table, sur.v0[(i, n)]))
    };
    ReflectionPattern::from_elements(&elements)
}

#[derive(Clone, Debug)]
pub struct LmmseDesign {
    pub training: TrainingMatrix,
    pub pattern: ReflectionPattern,
    pub trace: DesignTrace,
}

pub fn design_lmmse(
    problem: &LmmseProblem,
    model: &ReflectionModel,
    init_x: &TrainingMatrix,
    init_v: &ReflectionPattern,
    opts: &DesignOptions,
) -> Result<LmmseDesign> {
    design_lmmse_observed(problem, model, init_x, init_v, opts, &mut NoObserver)
}

/// Alternates training and pattern updates until the relative MSE change
/// falls below `eps`. `mm_calls` in the trace counts surrogate rebuilds.
pub fn design_lmmse_observed(
    problem: &LmmseProblem,
    model: &ReflectionModel,
    init_x: &TrainingMatrix,
    init_v: &ReflectionPattern,
    opts: &DesignOptions,
    observer: &mut dyn Observer,
) -> Result<LmmseDesign> {
    let table = PhaseTable::new(model, opts.search);
    let mut rec = Recorder::new(observer);
    let mut x = init_x.clone();
    let mut v = init_v.clone();
    let mut j = problem.mse(x.matrix(), v.matrix())?;
    let mut calls = 0;
    rec.push(0, j, 0);
    for it in 1..=opts.max_iter {
        let (x1, v1, j1) = if opts.accelerate {
            accelerated_round(problem, &table, &x, &v, j, &mut calls)?
        } else {
            let sur = build_surrogate(x.matrix(), v.matrix(), problem)?;
            calls += 1;
            let x1 = update_training(&sur, &x)?;
            let v1 = update_pattern(&sur.with_training(x1.matrix(), problem), &table)?;
            let j1 = problem.mse(x1.matrix(), v1.matrix())?;
            (x1, v1, j1)
        };
        rec.push(it, j1, calls);
        let rel = relative_change(j, j1);
        x = x1;
        v = v1;
        j = j1;
        if rel < opts.eps {
            rec.trace.converged = true;
            break;
        }
    }
    Ok(LmmseDesign {
        training: x,
        pattern: v,
        trace: rec.trace,
    })
}

struct TrainingStep<'a> {
    problem: &'a LmmseProblem,
    v: &'a CMatrix,
    power: &'a [f64],
    calls: usize,
}

impl MmProblem for TrainingStep<'_> {
    fn mm_update(&mut self, x: &CMatrix) -> Result<CMatrix> {
        self.calls += 1;
        let sur = build_surrogate(x, self.v, self.problem)?;
        let prev = TrainingMatrix::new(clamp_rows(x.clone(), self.power), self.power.to_vec())?;
        Ok(update_training(&sur, &prev)?.matrix().clone())
    }

    fn project(&self, x: &CMatrix) -> CMatrix {
        let mut out = x.clone();
        for (kk, &p) in self.power.iter().enumerate() {
            let e: f64 = out.row(kk).iter().map(|z| z.norm_sqr()).sum();
            if e > 0.0 {
                let s = (p / e).sqrt();
                for z in out.row_mut(kk) {
                    *z *= s;
                }
            }
        }
        clamp_rows(out, self.power)
    }

    fn objective(&mut self, x: &CMatrix) -> Result<f64> {
        self.problem.mse(x, self.v)
    }
}

struct PatternStep<'a> {
    problem: &'a LmmseProblem,
    table: &'a PhaseTable,
    x: &'a CMatrix,
    calls: usize,
}

impl MmProblem for PatternStep<'_> {
    fn mm_update(&mut self, v: &CMatrix) -> Result<CMatrix> {
        self.calls += 1;
        let sur = build_surrogate(self.x, v, self.problem)?;
        Ok(update_pattern(&sur, self.table)?.into_matrix())
    }

    fn project(&self, v: &CMatrix) -> CMatrix {
        ReflectionPattern::project_matrix(v, self.table.model()).into_matrix()
    }

    fn objective(&mut self, v: &CMatrix) -> Result<f64> {
        self.problem.mse(self.x, v)
    }
}

/// One SQUAREM step on the training block followed by one on the pattern block.
fn accelerated_round(
    problem: &LmmseProblem,
    table: &PhaseTable,
    x: &TrainingMatrix,
    v: &ReflectionPattern,
    j: f64,
    calls: &mut usize,
) -> Result<(TrainingMatrix, ReflectionPattern, f64)> {
    let mut ts = TrainingStep {
        problem,
        v: v.matrix(),
        power: x.power(),
        calls: 0,
    };
    let xs = squarem_step(AccelState::new(x.matrix().clone(), j), &mut ts)?;
    *calls += ts.calls;
    let x1 = TrainingMatrix::new(clamp_rows(xs.iterate, x.power()), x.power().to_vec())?;

    let mut ps = PatternStep {
        problem,
        table,
        x: x1.matrix(),
        calls: 0,
    };
    let vs = squarem_step(AccelState::new(v.matrix().clone(), xs.objective), &mut ps)?;
    *calls += ps.calls;
    let v1 = ReflectionPattern::new(vs.iterate)?;
    Ok((x1, v1, vs.objective))
}
