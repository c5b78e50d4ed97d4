//! Phase-dependent reflection amplitude and the scalar phase search shared by
//! both pattern designs.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_traits::Float;

use crate::error::{Error, Result};
use crate::numerics::C64;

/// Lumped-element parameters of a single reflecting element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircuitParams {
    /// Bottom-layer inductance (H).
    pub l1: f64,
    /// Top-layer inductance (H).
    pub l2: f64,
    /// Loss resistance (Ω).
    pub r: f64,
    /// Free-space impedance (Ω).
    pub z0: f64,
    /// Angular carrier frequency (rad/s).
    pub omega: f64,
}

impl Default for CircuitParams {
    fn default() -> Self {
        Self {
            l1: 2.5e-9,
            l2: 0.7e-9,
            r: 2.5,
            z0: 377.0,
            omega: TAU * 2.4e9,
        }
    }
}

/// Amplitude law `β(θ) = (1−β_min)((sin(θ−δ)+1)/2)^α + β_min`.
///
/// `beta_min = 1` gives the ideal unit-modulus surface.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectionModel {
    beta_min: f64,
    alpha: f64,
    delta: f64,
    circuit: Option<CircuitParams>,
}

impl ReflectionModel {
    pub fn new(beta_min: f64, alpha: f64, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta_min) {
            return Err(Error::InvalidModel("beta_min must lie in [0, 1]"));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidModel("alpha must be finite and non-negative"));
        }
        if !delta.is_finite() {
            return Err(Error::InvalidModel("delta must be finite"));
        }
        Ok(Self {
            beta_min,
            alpha,
            delta: wrap_phase(delta),
            circuit: None,
        })
    }

    /// Unit-modulus surface.
    pub fn ideal() -> Self {
        Self {
            beta_min: 1.0,
            alpha: 0.0,
            delta: 0.0,
            circuit: None,
        }
    }

    /// `β_min = 0.2`, `α = 2`, `δ = 0.43π`.
    pub fn reference() -> Self {
        Self::new(0.2, 2.0, 0.43 * PI).expect("reference parameters are valid")
    }

    pub fn with_circuit(mut self, params: CircuitParams) -> Self {
        self.circuit = Some(params);
        self
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_min
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn circuit(&self) -> Option<&CircuitParams> {
        self.circuit.as_ref()
    }

    pub fn is_ideal(&self) -> bool {
        self.beta_min >= 1.0
    }

    /// `ξ = (1−β_min)(1/2)^α`.
    pub fn xi(&self) -> f64 {
        (1.0 - self.beta_min) * 0.5.powf(self.alpha)
    }

    pub fn amplitude(&self, theta: f64) -> f64 {
        if self.is_ideal() {
            return 1.0;
        }
        let s = ((theta - self.delta).sin() + 1.0) * 0.5;
        (1.0 - self.beta_min) * s.max(0.0).powf(self.alpha) + self.beta_min
    }

    pub fn coefficient(&self, theta: f64) -> C64 {
        C64::from_polar(self.amplitude(theta), theta)
    }

    /// Keeps the phase of `z` and replaces its modulus by the amplitude law.
    pub fn project(&self, z: C64) -> C64 {
        let theta = if z.re == 0.0 && z.im == 0.0 { 0.0 } else { z.arg() };
        self.coefficient(theta)
    }

    /// Whether `z` is a fixed point of [`Self::project`] within `tol`.
    pub fn is_feasible(&self, z: C64, tol: f64) -> bool {
        (self.project(z) - z).norm() <= tol
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let r = libm::fmod(theta, TAU);
    let t = if r < 0.0 { r + TAU } else { r };
    if t >= TAU {
        0.0
    } else {
        t
    }
}

pub fn amplitude_of_phase(theta: f64, model: &ReflectionModel) -> f64 {
    model.amplitude(theta)
}

pub fn reflection_coefficient(theta: f64, model: &ReflectionModel) -> C64 {
    model.coefficient(theta)
}

pub fn project_to_feasible(z: C64, model: &ReflectionModel) -> C64 {
    model.project(z)
}

/// Reflection coefficient of the equivalent circuit at capacitance `c` (F).
pub fn circuit_reflection(c: f64, model: &ReflectionModel) -> Result<C64> {
    let p = model.circuit.ok_or(Error::MissingCircuitParams)?;
    if !(c > 0.0) {
        return Err(Error::InvalidModel("capacitance must be positive"));
    }
    let j = C64::new(0.0, 1.0);
    let w = p.omega;
    let branch = j * (w * p.l2) + (j * (w * c)).inv() + p.r;
    let shunt = j * (w * p.l1);
    let z = shunt * branch / (shunt + branch);
    Ok((z - p.z0) / (z + p.z0))
}

/// `q·β(θ)² + 2·Re{c·β(θ)e^{jθ}}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarPhaseObjective {
    pub q: f64,
    pub c: C64,
}

impl ScalarPhaseObjective {
    pub fn new(q: f64, c: C64) -> Self {
        Self { q, c }
    }

    pub fn evaluate(&self, theta: f64, model: &ReflectionModel) -> f64 {
        let beta = model.amplitude(theta);
        self.q * beta * beta + 2.0 * (self.c * C64::from_polar(beta, theta)).re
    }

    /// `q|z|² + 2Re(c·z)` at an arbitrary coefficient.
    pub fn value_at(&self, z: C64) -> f64 {
        self.q * z.norm_sqr() + 2.0 * (self.c * z).re
    }

    /// Search result, or `current` when the search does no better.
    pub fn improve(&self, table: &PhaseTable, current: C64) -> C64 {
        let (theta, v) = table.minimize(self);
        if self.value_at(current) <= v {
            current
        } else {
            table.model().coefficient(theta)
        }
    }

    #[inline]
    fn eval_tabulated(&self, beta: f64, phi: C64) -> f64 {
        self.q * beta * beta + 2.0 * (self.c.re * phi.re - self.c.im * phi.im)
    }
}

/// Resolution of the one-dimensional phase search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhaseSearch {
    pub grid_points: usize,
    pub refine_iters: usize,
}

impl Default for PhaseSearch {
    fn default() -> Self {
        Self {
            grid_points: 1024,
            refine_iters: 40,
        }
    }
}

impl PhaseSearch {
    pub fn with_grid(grid_points: usize) -> Self {
        Self {
            grid_points,
            ..Self::default()
        }
    }
}

/// Uniform phase grid with the model evaluated once per point.
#[derive(Clone, Debug)]
pub struct PhaseTable {
    model: ReflectionModel,
    step: f64,
    refine_iters: usize,
    beta: Vec<f64>,
    phi: Vec<C64>,
}

impl PhaseTable {
    pub fn new(model: &ReflectionModel, search: PhaseSearch) -> Self {
        let n = search.grid_points.max(2);
        let step = TAU / n as f64;
        let mut beta = Vec::with_capacity(n);
        let mut phi = Vec::with_capacity(n);
        for i in 0..n {
            let theta = i as f64 * step;
            let b = model.amplitude(theta);
            beta.push(b);
            phi.push(C64::from_polar(b, theta));
        }
        Self {
            model: *model,
            step,
            refine_iters: search.refine_iters,
            beta,
            phi,
        }
    }

    pub fn model(&self) -> &ReflectionModel {
        &self.model
    }

    /// Grid minimum (smallest θ on ties) refined by golden-section search on
    /// the two neighbouring grid cells.
    pub fn minimize(&self, obj: &ScalarPhaseObjective) -> (f64, f64) {
        let mut best_i = 0;
        let mut best_v = f64::INFINITY;
        for (i, (&b, &p)) in self.beta.iter().zip(&self.phi).enumerate() {
            let v = obj.eval_tabulated(b, p);
            if v < best_v {
                best_v = v;
                best_i = i;
            }
        }
        let center = best_i as f64 * self.step;
        let mut best_theta = center;
        if self.refine_iters > 0 {
            let f = |t: f64| obj.evaluate(t, &self.model);
            let g = 0.5 * (5.0f64.sqrt() - 1.0);
            let (mut a, mut b) = (center - self.step, center + self.step);
            let mut x1 = b - g * (b - a);
            let mut x2 = a + g * (b - a);
            let mut f1 = f(x1);
            let mut f2 = f(x2);
            for _ in 0..self.refine_iters {
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = f(x1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = f(x2);
                }
            }
            let (t, v) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
            if v < best_v {
                best_v = v;
                best_theta = wrap_phase(t);
            }
        }
        (best_theta, obj.evaluate(best_theta, &self.model).min(best_v))
    }
}

/// Minimizes a scalar phase objective over `[0, 2π)`.
pub fn minimize_phase_objective(
    obj: &ScalarPhaseObjective,
    model: &ReflectionModel,
    search: PhaseSearch,
) -> (f64, f64) {
    PhaseTable::new(model, search).minimize(obj)
}
