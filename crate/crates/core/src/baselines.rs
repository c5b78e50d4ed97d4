//! Reference schemes, element grouping and a single entry point that designs
//! any scheme for either estimator.

use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;
use core::str::FromStr;

use crate::channel::{cascaded_correlation, CorrelationSpec};
use crate::error::{Error, Result};
use crate::lmmse_design::{design_lmmse, LmmseProblem};
use crate::ls_design::{design_ls, dft_training};
use crate::numerics::{CMatrix, HermitianMatrix, C64};
use crate::phase_model::{wrap_phase, ReflectionModel};
use crate::system::{
    build_s, estimate_lmmse, estimate_ls, mse_lmmse, mse_ls, Estimator, ReflectionPattern, SystemDims,
    TrainingMatrix,
};
use crate::trace::{DesignOptions, DesignTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    Proposed,
    IdealRis,
    IdealRisProjection,
    Naive,
    OnOff,
    ProposedGrouped(usize),
}

impl SchemeId {
    /// Every scheme without grouping.
    pub const STANDARD: [SchemeId; 5] = [
        SchemeId::Proposed,
        SchemeId::IdealRis,
        SchemeId::IdealRisProjection,
        SchemeId::Naive,
        SchemeId::OnOff,
    ];
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeId::Proposed => f.write_str("proposed"),
            SchemeId::IdealRis => f.write_str("ideal"),
            SchemeId::IdealRisProjection => f.write_str("ideal-projection"),
            SchemeId::Naive => f.write_str("naive"),
            SchemeId::OnOff => f.write_str("onoff"),
            SchemeId::ProposedGrouped(rho) => write!(f, "grouped:{rho}"),
        }
    }
}

impl FromStr for SchemeId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "proposed" => Ok(SchemeId::Proposed),
            "ideal" | "ideal-ris" => Ok(SchemeId::IdealRis),
            "ideal-projection" | "projection" => Ok(SchemeId::IdealRisProjection),
            "naive" => Ok(SchemeId::Naive),
            "onoff" | "on-off" => Ok(SchemeId::OnOff),
            _ => {
                let rho = s
                    .strip_prefix("grouped:")
                    .and_then(|r| r.parse::<usize>().ok())
                    .filter(|&r| r > 0)
                    .ok_or(Error::InvalidModel("unknown scheme"))?;
                Ok(SchemeId::ProposedGrouped(rho))
            }
        }
    }
}

/// `[V]_{m,n} = e^{−j·arg(−[A₀]_{n,m})}` for every element row.
pub fn ideal_update_ls(a0: &CMatrix) -> CMatrix {
    let (b, m1) = a0.shape();
    CMatrix::from_fn(m1 - 1, b, |m, n| C64::from_polar(1.0, -(-a0[(n, m)]).arg()))
}

/// `[V]_{m,n} = e^{−j·arg(c_{m,n})}` for an M×B map of `c_{m,n}`.
pub fn ideal_update_lmmse(c: &CMatrix) -> CMatrix {
    c.map(|z| C64::from_polar(1.0, -z.arg()))
}

/// DFT rows `1..=M` of the B-point DFT projected onto the model, with the
/// all-ones DFT row as the direct-link row.
pub fn naive_pattern(m: usize, b: usize, model: &ReflectionModel) -> Result<ReflectionPattern> {
    if b < m + 1 || m == 0 {
        return Err(Error::InvalidDims("naive pattern needs B >= M+1"));
    }
    let e = CMatrix::from_fn(m, b, |i, n| {
        let phase = -TAU * (((i + 1) * n) % b) as f64 / b as f64;
        model.coefficient(wrap_phase(phase))
    });
    ReflectionPattern::from_elements(&e)
}

/// One element on per subframe; the final subframe measures the direct link alone.
pub fn onoff_pattern(m: usize, b: usize) -> Result<ReflectionPattern> {
    if b != m + 1 || m == 0 {
        return Err(Error::InvalidDims("on-off pattern needs B = M+1"));
    }
    let e = CMatrix::from_fn(m, b, |i, n| if i == n { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
    ReflectionPattern::from_elements(&e)
}

/// Consecutive groups of `rho` elements sharing one coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grouping {
    pub m: usize,
    pub rho: usize,
}

pub fn group_reduce(m: usize, rho: usize) -> Result<Grouping> {
    if rho == 0 || m % rho != 0 {
        return Err(Error::InvalidGrouping { m, rho });
    }
    Ok(Grouping { m, rho })
}

impl Grouping {
    pub fn groups(&self) -> usize {
        self.m / self.rho
    }

    /// Training symbols `K(M/ρ+1)` with minimal `B` and `τ`.
    pub fn overhead(&self, k: usize) -> usize {
        k * (self.groups() + 1)
    }

    /// Group index of each element.
    pub fn group_of(&self, element: usize) -> usize {
        element / self.rho
    }

    /// Minimal dimensions of the grouped system.
    pub fn reduced_dims(&self, dims: &SystemDims) -> Result<SystemDims> {
        SystemDims::new(dims.k, self.groups(), dims.l, self.groups() + 1, dims.tau)
    }

    /// Repeats each group row `ρ` times.
    pub fn expand_pattern(&self, grouped: &ReflectionPattern) -> Result<ReflectionPattern> {
        if grouped.m() != self.groups() {
            return Err(Error::DimensionMismatch {
                context: "expand_pattern",
                expected: (self.groups() + 1, grouped.b()),
                found: grouped.matrix().shape(),
            });
        }
        let g = grouped.matrix();
        let e = CMatrix::from_fn(self.m, grouped.b(), |i, n| g[(self.group_of(i), n)]);
        ReflectionPattern::from_elements(&e)
    }

    /// Equivalent grouped channel `Γ̄_g = Σ_{m∈g} Γ_m`, keeping the direct block.
    pub fn reduce_channel(&self, gamma: &CMatrix, k: usize) -> CMatrix {
        let groups = self.groups();
        let mut out = CMatrix::zeros(gamma.rows(), (groups + 1) * k);
        for row in 0..gamma.rows() {
            for col in 0..gamma.cols() {
                let (blk, kk) = (col / k, col % k);
                let g = if blk < self.m { self.group_of(blk) } else { groups };
                out[(row, g * k + kk)] += gamma[(row, col)];
            }
        }
        out
    }

    /// Correlation of the grouped channel.
    pub fn grouped_correlation(&self, corr: &CorrelationSpec, dims: &SystemDims) -> Result<HermitianMatrix> {
        let full = cascaded_correlation(corr, dims)?;
        let k = dims.k;
        let n = (self.groups() + 1) * k;
        let map = |idx: usize| {
            let (blk, kk) = (idx / k, idx % k);
            let g = if blk < self.m { self.group_of(blk) } else { self.groups() };
            g * k + kk
        };
        let mut out = CMatrix::zeros(n, n);
        let fm = full.matrix();
        for i in 0..fm.rows() {
            for j in 0..fm.cols() {
                out[(map(i), map(j))] += fm[(i, j)];
            }
        }
        HermitianMatrix::new(out)
    }
}

/// Everything a scheme needs besides its identity.
#[derive(Clone, Debug)]
pub struct SchemeSetup {
    pub dims: SystemDims,
    pub model: ReflectionModel,
    pub corr: CorrelationSpec,
    pub sigma2: f64,
    pub power: Vec<f64>,
    pub options: DesignOptions,
}

impl SchemeSetup {
    /// Equal budgets `P_k = 10^{snr/10}` with unit noise.
    pub fn at_snr(dims: SystemDims, model: ReflectionModel, corr: CorrelationSpec, snr_db: f64, options: DesignOptions) -> Self {
        let p = libm::pow(10.0, snr_db / 10.0);
        Self {
            dims,
            model,
            corr,
            sigma2: 1.0,
            power: alloc::vec![p; dims.k],
            options,
        }
    }
}

/// A designed scheme in the (possibly grouped) coordinates it is estimated in.
#[derive(Clone, Debug)]
pub struct SchemeDesign {
    pub scheme: SchemeId,
    pub estimator: Estimator,
    /// Dimensions seen by the estimator.
    pub dims: SystemDims,
    pub training: TrainingMatrix,
    /// Pattern in estimator coordinates.
    pub pattern: ReflectionPattern,
    /// Correlation of the channel in estimator coordinates.
    pub r_gamma: HermitianMatrix,
    pub grouping: Option<Grouping>,
    pub trace: Option<DesignTrace>,
    pub sigma2: f64,
    /// Analytic MSE of the chosen estimator.
    pub mse: f64,
    s: CMatrix,
}

impl SchemeDesign {
    pub fn s(&self) -> &CMatrix {
        &self.s
    }

    pub fn nmse(&self) -> f64 {
        self.mse / self.dims.nmse_scale()
    }

    pub fn iterations(&self) -> usize {
        self.trace.as_ref().map_or(0, |t| t.iterations())
    }

    /// Pattern deployed on all `M` elements.
    pub fn deployed_pattern(&self) -> Result<ReflectionPattern> {
        match self.grouping {
            Some(g) => g.expand_pattern(&self.pattern),
            None => Ok(self.pattern.clone()),
        }
    }

    /// Maps the full cascaded channel to the estimated quantity.
    pub fn effective_channel(&self, gamma: &CMatrix) -> CMatrix {
        match self.grouping {
            Some(g) => g.reduce_channel(gamma, self.dims.k),
            None => gamma.clone(),
        }
    }

    pub fn estimate(&self, y: &CMatrix) -> Result<CMatrix> {
        match self.estimator {
            Estimator::Ls => estimate_ls(y, &self.s),
            Estimator::Lmmse => estimate_lmmse(y, &self.s, &self.r_gamma, self.sigma2, self.dims.l),
        }
    }
}

fn finish(
    scheme: SchemeId,
    estimator: Estimator,
    dims: SystemDims,
    training: TrainingMatrix,
    pattern: ReflectionPattern,
    r_gamma: HermitianMatrix,
    grouping: Option<Grouping>,
    trace: Option<DesignTrace>,
    sigma2: f64,
) -> Result<SchemeDesign> {
    let s = build_s(&pattern, &training);
    let mse = match estimator {
        Estimator::Ls => mse_ls(&s, sigma2, dims.l)?,
        Estimator::Lmmse => mse_lmmse(&s, &r_gamma, sigma2, dims.l)?,
    };
    Ok(SchemeDesign {
        scheme,
        estimator,
        dims,
        training,
        pattern,
        r_gamma,
        grouping,
        trace,
        sigma2,
        mse,
        s,
    })
}

/// Runs the proposed design on `dims` under `model`.
fn proposed(
    estimator: Estimator,
    dims: &SystemDims,
    model: &ReflectionModel,
    r_gamma: &HermitianMatrix,
    setup: &SchemeSetup,
) -> Result<(TrainingMatrix, ReflectionPattern, DesignTrace)> {
    let x0 = dft_training(dims.k, dims.tau, &setup.power)?;
    let v0 = naive_pattern(dims.m, dims.b, model)?;
    match estimator {
        Estimator::Ls => {
            let d = design_ls(&v0, model, &setup.options)?;
            Ok((x0, d.pattern, d.trace))
        }
        Estimator::Lmmse => {
            let problem = LmmseProblem::new(r_gamma.clone(), setup.sigma2, dims.l, setup.power.clone())?;
            let d = design_lmmse(&problem, model, &x0, &v0, &setup.options)?;
            Ok((d.training, d.pattern, d.trace))
        }
    }
}

/// Designs `scheme` for `estimator`.
///
/// Every scheme starts from DFT training and the naive pattern. The ideal
/// scheme is designed and evaluated with unit-modulus coefficients; its
/// projection keeps the ideal training and projects the pattern.
pub fn design_scheme(scheme: SchemeId, estimator: Estimator, setup: &SchemeSetup) -> Result<SchemeDesign> {
    let dims = setup.dims;
    if setup.power.len() != dims.k {
        return Err(Error::DimensionMismatch {
            context: "scheme power budgets",
            expected: (dims.k, 1),
            found: (setup.power.len(), 1),
        });
    }
    let r_full = || cascaded_correlation(&setup.corr, &dims);
    let sigma2 = setup.sigma2;
    match scheme {
        SchemeId::Proposed => {
            let r = r_full()?;
            let (x, v, t) = proposed(estimator, &dims, &setup.model, &r, setup)?;
            finish(scheme, estimator, dims, x, v, r, None, Some(t), sigma2)
        }
        SchemeId::IdealRis | SchemeId::IdealRisProjection => {
            let r = r_full()?;
            let (x, v, t) = proposed(estimator, &dims, &ReflectionModel::ideal(), &r, setup)?;
            let v = if scheme == SchemeId::IdealRisProjection {
                v.project(&setup.model)
            } else {
                v
            };
            finish(scheme, estimator, dims, x, v, r, None, Some(t), sigma2)
        }
        SchemeId::Naive => {
            let x = dft_training(dims.k, dims.tau, &setup.power)?;
            let v = naive_pattern(dims.m, dims.b, &setup.model)?;
            finish(scheme, estimator, dims, x, v, r_full()?, None, None, sigma2)
        }
        SchemeId::OnOff => {
            let x = dft_training(dims.k, dims.tau, &setup.power)?;
            let v = onoff_pattern(dims.m, dims.b)?;
            finish(scheme, estimator, dims, x, v, r_full()?, None, None, sigma2)
        }
        SchemeId::ProposedGrouped(rho) => {
            let g = group_reduce(dims.m, rho)?;
            let gd = g.reduced_dims(&dims)?;
            let r = g.grouped_correlation(&setup.corr, &dims)?;
            let (x, v, t) = proposed(estimator, &gd, &setup.model, &r, setup)?;
            finish(scheme, estimator, gd, x, v, r, Some(g), Some(t), sigma2)
        }
    }
}
