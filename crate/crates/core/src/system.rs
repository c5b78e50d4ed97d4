//! Training signal model, reception and the linear estimators.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::channel::gaussian_matrix;
use crate::error::{Error, Result};
use crate::numerics::{solve_hpd, solve_hpd_checked, trace_of_inverse, CMatrix, HermitianMatrix, C64};
use crate::phase_model::ReflectionModel;

/// Tolerance used when checking entries against the amplitude law.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// `K` UEs, `M` surface elements, `L` BS antennas, `B` subframes of `τ` symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SystemDims {
    pub k: usize,
    pub m: usize,
    pub l: usize,
    pub b: usize,
    pub tau: usize,
}

impl SystemDims {
    pub fn new(k: usize, m: usize, l: usize, b: usize, tau: usize) -> Result<Self> {
        if k == 0 || m == 0 || l == 0 {
            return Err(Error::InvalidDims("K, M and L must be positive"));
        }
        if b < m + 1 {
            return Err(Error::InvalidDims("B must be at least M+1"));
        }
        if tau < k {
            return Err(Error::InvalidDims("tau must be at least K"));
        }
        Ok(Self { k, m, l, b, tau })
    }

    /// Minimal training: `B = M+1`, `τ = K`.
    pub fn minimal(k: usize, m: usize, l: usize) -> Result<Self> {
        Self::new(k, m, l, m + 1, k)
    }

    /// Rows of `S` and columns of `Γ`: `(M+1)K`.
    pub fn channel_dim(&self) -> usize {
        (self.m + 1) * self.k
    }

    /// Training overhead `τB` in symbols.
    pub fn training_len(&self) -> usize {
        self.tau * self.b
    }

    /// Normalizer `LK(M+1)` of the NMSE.
    pub fn nmse_scale(&self) -> f64 {
        (self.l * self.k * (self.m + 1)) as f64
    }
}

/// Which linear estimator the training is designed for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Estimator {
    Ls,
    Lmmse,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Ls => "ls",
            Estimator::Lmmse => "lmmse",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ls" => Ok(Estimator::Ls),
            "lmmse" | "mmse" => Ok(Estimator::Lmmse),
            _ => Err(Error::InvalidModel("unknown estimator")),
        }
    }
}

/// `(M+1)×B` reflection pattern whose last row is all ones.
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionPattern {
    v: CMatrix,
}

impl ReflectionPattern {
    pub fn new(v: CMatrix) -> Result<Self> {
        if v.rows() < 2 || v.cols() == 0 {
            return Err(Error::InvalidDims("pattern needs at least one element row and one subframe"));
        }
        let last = v.rows() - 1;
        if v.row(last).iter().any(|z| (z - C64::new(1.0, 0.0)).norm() > 1e-12) {
            return Err(Error::DirectRowNotOnes);
        }
        let mut v = v;
        for z in v.row_mut(last) {
            *z = C64::new(1.0, 0.0);
        }
        if !v.is_finite() {
            return Err(Error::NonFinite("reflection pattern"));
        }
        Ok(Self { v })
    }

    /// Appends the all-ones direct row to an `M×B` block of element coefficients.
    pub fn from_elements(elements: &CMatrix) -> Result<Self> {
        let (m, b) = elements.shape();
        let v = CMatrix::from_fn(m + 1, b, |i, j| if i < m { elements[(i, j)] } else { C64::new(1.0, 0.0) });
        Self::new(v)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.v
    }

    pub fn into_matrix(self) -> CMatrix {
        self.v
    }

    /// Number of surface elements `M`.
    pub fn m(&self) -> usize {
        self.v.rows() - 1
    }

    /// Number of subframes `B`.
    pub fn b(&self) -> usize {
        self.v.cols()
    }

    pub fn gram(&self) -> HermitianMatrix {
        HermitianMatrix::gram(&self.v)
    }

    /// `Tr[(VV^H)^{-1}]`.
    pub fn trace_inv_gram(&self) -> Result<f64> {
        trace_of_inverse(&self.gram())
    }

    /// Every element entry is a fixed point of the model's projection.
    pub fn is_feasible(&self, model: &ReflectionModel) -> bool {
        let m = self.m();
        (0..m).all(|i| self.v.row(i).iter().all(|&z| model.is_feasible(z, FEASIBILITY_TOL)))
    }

    /// Entrywise projection of the element rows onto the model.
    pub fn project(&self, model: &ReflectionModel) -> Self {
        let m = self.m();
        let v = CMatrix::from_fn(self.v.rows(), self.v.cols(), |i, j| {
            if i < m {
                model.project(self.v[(i, j)])
            } else {
                C64::new(1.0, 0.0)
            }
        });
        Self { v }
    }

    /// Projects an arbitrary matrix of the right shape.
    pub fn project_matrix(v: &CMatrix, model: &ReflectionModel) -> Self {
        let m = v.rows() - 1;
        let v = CMatrix::from_fn(v.rows(), v.cols(), |i, j| {
            if i < m {
                model.project(v[(i, j)])
            } else {
                C64::new(1.0, 0.0)
            }
        });
        Self { v }
    }
}

/// `K×τ` training symbols with per-UE energy budgets.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingMatrix {
    x: CMatrix,
    power: Vec<f64>,
}

impl TrainingMatrix {
    pub fn new(x: CMatrix, power: Vec<f64>) -> Result<Self> {
        if power.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                context: "training power budget",
                expected: (x.rows(), 1),
                found: (power.len(), 1),
            });
        }
        if power.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidDims("power budgets must be positive"));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("training matrix"));
        }
        for (k, &p) in power.iter().enumerate() {
            let e: f64 = x.row(k).iter().map(|z| z.norm_sqr()).sum();
            if e > p + 1e-9 {
                return Err(Error::InvalidDims("training row exceeds its power budget"));
            }
        }
        Ok(Self { x, power })
    }

    /// Rescales every row onto its budget boundary `‖x_k‖² = P_k`.
    pub fn scaled_to_budget(x: &CMatrix, power: &[f64]) -> Result<Self> {
        let mut out = x.clone();
        for (k, &p) in power.iter().enumerate() {
            let norm = out.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                let s = p.sqrt() / norm;
                for z in out.row_mut(k) {
                    *z *= s;
                }
            }
        }
        Self::new(out, power.to_vec())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.x
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn k(&self) -> usize {
        self.x.rows()
    }

    pub fn tau(&self) -> usize {
        self.x.cols()
    }

    pub fn row_energy(&self, k: usize) -> f64 {
        self.x.row(k).iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Tr[(XX^H)^{-1}]`.
    pub fn trace_inv_gram(&self) -> Result<f64> {
        trace_of_inverse(&HermitianMatrix::gram(&self.x))
    }
}

/// `Ṽ = V ⊗ I_K`.
pub fn v_tilde(v: &CMatrix, k: usize) -> CMatrix {
    v.kron(&CMatrix::identity(k))
}

/// `X̃ = I_B ⊗ X`.
pub fn x_tilde(x: &CMatrix, b: usize) -> CMatrix {
    CMatrix::identity(b).kron(x)
}

/// `S = (V ⊗ I_K)(I_B ⊗ X)`; entry `((m,k),(b,t))` is `V[m,b]·X[k,t]`.
pub fn build_s_matrix(v: &CMatrix, x: &CMatrix) -> CMatrix {
    let (k, tau) = x.shape();
    let (m1, b) = v.shape();
    CMatrix::from_fn(m1 * k, b * tau, |row, col| v[(row / k, col / tau)] * x[(row % k, col % tau)])
}

pub fn build_s(v: &ReflectionPattern, x: &TrainingMatrix) -> CMatrix {
    build_s_matrix(v.matrix(), x.matrix())
}

/// `Y = ΓS + Z` with i.i.d. `CN(0, σ²)` noise.
pub fn simulate_reception<R: Rng + ?Sized>(gamma: &CMatrix, s: &CMatrix, sigma2: f64, rng: &mut R) -> Result<CMatrix> {
    if gamma.cols() != s.rows() {
        return Err(Error::DimensionMismatch {
            context: "simulate_reception",
            expected: (gamma.rows(), s.rows()),
            found: gamma.shape(),
        });
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidDims("noise variance must be non-negative"));
    }
    let mut y = gamma.matmul(s);
    if sigma2 > 0.0 {
        y += &gaussian_matrix(rng, y.rows(), y.cols(), sigma2);
    }
    Ok(y)
}

/// `Γ̂ = Y S^H (SS^H)^{-1}`.
pub fn estimate_ls(y: &CMatrix, s: &CMatrix) -> Result<CMatrix> {
    check_observation(y, s)?;
    let gram = HermitianMatrix::gram(s);
    // (SS^H)^{-1} S Y^H, then adjoint.
    let z = solve_hpd_checked(&gram, &s.mul_adjoint(y))?;
    Ok(z.adjoint())
}

fn check_observation(y: &CMatrix, s: &CMatrix) -> Result<()> {
    if y.cols() != s.cols() {
        return Err(Error::DimensionMismatch {
            context: "observation",
            expected: (y.rows(), s.cols()),
            found: y.shape(),
        });
    }
    Ok(())
}

fn lmmse_system(s: &CMatrix, r: &HermitianMatrix, sigma2: f64, l: usize) -> Result<(HermitianMatrix, CMatrix)> {
    if r.dim() != s.rows() {
        return Err(Error::DimensionMismatch {
            context: "lmmse correlation",
            expected: (s.rows(), s.rows()),
            found: (r.dim(), r.dim()),
        });
    }
    // T = S^H R
    let t = s.adjoint_mul(r.matrix());
    let u = HermitianMatrix::congruence(r, s).add_diagonal(sigma2 * l as f64);
    Ok((u, t))
}

/// `Γ̂ = Y (S^H R S + σ²L I)^{-1} S^H R`.
pub fn estimate_lmmse(y: &CMatrix, s: &CMatrix, r: &HermitianMatrix, sigma2: f64, l: usize) -> Result<CMatrix> {
    check_observation(y, s)?;
    let (u, t) = lmmse_system(s, r, sigma2, l)?;
    // Y U^{-1} T = (U^{-1} Y^H)^H T for Hermitian U.
    let w = solve_hpd(&u, &y.adjoint())?;
    Ok(w.adjoint_mul(&t))
}

/// `σ²L·Tr[(SS^H)^{-1}]`.
pub fn mse_ls(s: &CMatrix, sigma2: f64, l: usize) -> Result<f64> {
    Ok(sigma2 * l as f64 * trace_of_inverse(&HermitianMatrix::gram(s))?)
}

/// `−Tr[R S (S^H R S + σ²L I)^{-1} S^H R]`.
pub fn lmmse_objective(s: &CMatrix, r: &HermitianMatrix, sigma2: f64, l: usize) -> Result<f64> {
    let (u, t) = lmmse_system(s, r, sigma2, l)?;
    let w = solve_hpd(&u, &t)?;
    Ok(-w.inner_re(&t))
}

/// `Tr[R − R S (S^H R S + σ²L I)^{-1} S^H R]`.
pub fn mse_lmmse(s: &CMatrix, r: &HermitianMatrix, sigma2: f64, l: usize) -> Result<f64> {
    Ok(r.trace() + lmmse_objective(s, r, sigma2, l)?)
}

/// `J / (L·K·(M+1))`.
pub fn nmse(j: f64, l: usize, k: usize, m: usize) -> f64 {
    j / (l * k * (m + 1)) as f64
}

/// `‖Γ̂ − Γ‖_F²`.
pub fn squared_error(estimate: &CMatrix, truth: &CMatrix) -> f64 {
    (estimate - truth).frobenius_norm_sq()
}
