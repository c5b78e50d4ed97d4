//! Squared iterative extrapolation (SQUAREM) around a monotone MM map.

use alloc::vec::Vec;

use crate::error::Result;
use crate::numerics::CMatrix;
use crate::trace::{relative_change, DesignTrace, Observer, Recorder};

/// Halvings of the step length before falling back to the plain MM point.
pub const BACKTRACK_CAP: usize = 50;
/// `‖L₂‖_F` below this means the MM map has (numerically) stopped moving.
pub const DEGENERATE_NORM: f64 = 1e-14;

/// An MM map with its feasibility projection and true objective.
pub trait MmProblem {
    fn mm_update(&mut self, x: &CMatrix) -> Result<CMatrix>;
    fn project(&self, x: &CMatrix) -> CMatrix;
    fn objective(&mut self, x: &CMatrix) -> Result<f64>;
}

/// Adapts three closures to [`MmProblem`].
pub struct MmFns<U, P, F> {
    pub update: U,
    pub project: P,
    pub objective: F,
}

impl<U, P, F> MmProblem for MmFns<U, P, F>
where
    U: FnMut(&CMatrix) -> Result<CMatrix>,
    P: Fn(&CMatrix) -> CMatrix,
    F: FnMut(&CMatrix) -> Result<f64>,
{
    fn mm_update(&mut self, x: &CMatrix) -> Result<CMatrix> {
        (self.update)(x)
    }

    fn project(&self, x: &CMatrix) -> CMatrix {
        (self.project)(x)
    }

    fn objective(&mut self, x: &CMatrix) -> Result<f64> {
        (self.objective)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    /// Extrapolated candidate accepted, possibly after backtracking.
    Extrapolated,
    /// Backtracking cap hit; the second MM point was returned.
    Fallback,
    /// `‖L₂‖` vanished; the second MM point was returned.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccelState {
    pub iterate: CMatrix,
    pub objective: f64,
    pub step_lengths: Vec<f64>,
    pub backtracks: Vec<usize>,
    pub kinds: Vec<StepKind>,
    pub mm_calls: usize,
}

impl AccelState {
    pub fn new(iterate: CMatrix, objective: f64) -> Self {
        Self {
            iterate,
            objective,
            step_lengths: Vec::new(),
            backtracks: Vec::new(),
            kinds: Vec::new(),
            mm_calls: 0,
        }
    }

    fn accept(&mut self, iterate: CMatrix, objective: f64, l: f64, backtracks: usize, kind: StepKind) {
        self.iterate = iterate;
        self.objective = objective;
        self.step_lengths.push(l);
        self.backtracks.push(backtracks);
        self.kinds.push(kind);
    }
}

fn extrapolate(v0: &CMatrix, l1: &CMatrix, l2: &CMatrix, l: f64) -> CMatrix {
    let mut out = v0.clone();
    out -= &l1.scale(2.0 * l);
    out += &l2.scale(l * l);
    out
}

/// One extrapolation step with step length `l = −‖L₁‖/‖L₂‖` and backtracking
/// `l ← (l−1)/2` until the objective does not exceed the current one.
pub fn squarem_step(mut state: AccelState, problem: &mut impl MmProblem) -> Result<AccelState> {
    let v1 = problem.mm_update(&state.iterate)?;
    let v2 = problem.mm_update(&v1)?;
    state.mm_calls += 2;
    let l1 = &v1 - &state.iterate;
    let l2 = &(&v2 - &v1) - &l1;
    let n2 = l2.frobenius_norm();

    if n2 < DEGENERATE_NORM {
        let f2 = problem.objective(&v2)?;
        state.accept(v2, f2, -1.0, 0, StepKind::Degenerate);
        return Ok(state);
    }

    let mut l = -l1.frobenius_norm() / n2;
    for bt in 0..=BACKTRACK_CAP {
        let cand = problem.project(&extrapolate(&state.iterate, &l1, &l2, l));
        let fc = problem.objective(&cand).unwrap_or(f64::INFINITY);
        if fc <= state.objective {
            state.accept(cand, fc, l, bt, StepKind::Extrapolated);
            return Ok(state);
        }
        if bt < BACKTRACK_CAP {
            l = (l - 1.0) / 2.0;
        }
    }
    let f2 = problem.objective(&v2)?;
    state.accept(v2, f2, l, BACKTRACK_CAP, StepKind::Fallback);
    Ok(state)
}

/// Repeats [`squarem_step`] until the relative objective change drops below
/// `eps` or `max_iter` steps have run.
pub fn accelerate(
    initial: CMatrix,
    problem: &mut impl MmProblem,
    eps: f64,
    max_iter: usize,
    observer: &mut dyn Observer,
) -> Result<(AccelState, DesignTrace)> {
    let f0 = problem.objective(&initial)?;
    let mut state = AccelState::new(initial, f0);
    let mut rec = Recorder::new(observer);
    rec.push(0, f0, 0);
    for it in 1..=max_iter {
        let prev = state.objective;
        state = squarem_step(state, problem)?;
        rec.push(it, state.objective, state.mm_calls);
        if relative_change(prev, state.objective) < eps {
            rec.trace.converged = true;
            break;
        }
    }
    Ok((state, rec.trace))
}
