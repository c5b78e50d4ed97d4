//! Kronecker-correlated Rayleigh channels and the cascaded channel statistics.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{symmetric_sqrt, CMatrix, HermitianMatrix, C64};
use crate::system::SystemDims;

/// Exponential correlation coefficients at the UE, surface and BS sides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationSpec {
    pub psi_ue: f64,
    pub psi_ris: f64,
    pub psi_bs: f64,
}

impl CorrelationSpec {
    pub fn new(psi_ue: f64, psi_ris: f64, psi_bs: f64) -> Result<Self> {
        for psi in [psi_ue, psi_ris, psi_bs] {
            check_psi(psi)?;
        }
        Ok(Self {
            psi_ue,
            psi_ris,
            psi_bs,
        })
    }

    pub fn uncorrelated() -> Self {
        Self {
            psi_ue: 0.0,
            psi_ris: 0.0,
            psi_bs: 0.0,
        }
    }

    /// `ψ = (0.2, 0.4, 0.6)` for UE, surface and BS.
    pub fn reference() -> Self {
        Self {
            psi_ue: 0.2,
            psi_ris: 0.4,
            psi_bs: 0.6,
        }
    }
}

fn check_psi(psi: f64) -> Result<()> {
    if (0.0..1.0).contains(&psi) {
        Ok(())
    } else {
        Err(Error::InvalidPsi(psi))
    }
}

fn exp_correlation_real(n: usize, psi: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(libm::pow(psi, i.abs_diff(j) as f64));
        }
    }
    out
}

/// `[Ψ]_{i,j} = ψ^{|i−j|}`.
pub fn exp_correlation(n: usize, psi: f64) -> Result<HermitianMatrix> {
    check_psi(psi)?;
    if n == 0 {
        return Err(Error::InvalidDims("correlation size must be positive"));
    }
    HermitianMatrix::new(CMatrix::from_real(n, n, &exp_correlation_real(n, psi)))
}

fn sqrt_correlation(n: usize, psi: f64) -> CMatrix {
    CMatrix::from_real(n, n, &symmetric_sqrt(n, &exp_correlation_real(n, psi)))
}

/// One draw of the surface-BS channel `G` (L×M), UE-surface channel `H_r`
/// (M×K) and direct channel `H_d` (L×K).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub g: CMatrix,
    pub h_r: CMatrix,
    pub h_d: CMatrix,
}

/// Seeded generator for one Monte Carlo cell.
///
/// Each `(seed, stream)` pair selects an independent ChaCha8 stream, so cells
/// can be drawn in any order or in parallel.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex Gaussian with variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = libm::sqrt(variance * 0.5);
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

/// Colors i.i.d. draws with precomputed symmetric square roots.
#[derive(Clone, Debug)]
pub struct ChannelSampler {
    l: usize,
    m: usize,
    k: usize,
    root_ue: CMatrix,
    root_ris: CMatrix,
    root_bs: CMatrix,
}

impl ChannelSampler {
    pub fn new(dims: &SystemDims, corr: &CorrelationSpec) -> Result<Self> {
        CorrelationSpec::new(corr.psi_ue, corr.psi_ris, corr.psi_bs)?;
        Ok(Self {
            l: dims.l,
            m: dims.m,
            k: dims.k,
            root_ue: sqrt_correlation(dims.k, corr.psi_ue),
            root_ris: sqrt_correlation(dims.m, corr.psi_ris),
            root_bs: sqrt_correlation(dims.l, corr.psi_bs),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelRealization {
        let hr_bar = gaussian_matrix(rng, self.m, self.k, 1.0);
        let g_bar = gaussian_matrix(rng, self.l, self.m, 1.0);
        let hd_bar = gaussian_matrix(rng, self.l, self.k, 1.0);
        // The roots are real symmetric, so Ψ^{T/2} = Ψ^{1/2}.
        ChannelRealization {
            h_r: self.root_ris.matmul(&hr_bar).matmul(&self.root_ue),
            g: self.root_bs.matmul(&g_bar).matmul(&self.root_ris),
            h_d: self.root_bs.matmul(&hd_bar).matmul(&self.root_ue),
        }
    }
}

pub fn sample_channels(seed: u64, dims: &SystemDims, corr: &CorrelationSpec) -> Result<ChannelRealization> {
    let sampler = ChannelSampler::new(dims, corr)?;
    Ok(sampler.sample(&mut trial_rng(seed, 0)))
}

/// `Γ = [g_1 h_{r,1}^H, …, g_M h_{r,M}^H, H_d]`, of size L×(M+1)K.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadedChannel {
    pub gamma: CMatrix,
    pub m: usize,
    pub k: usize,
}

impl CascadedChannel {
    /// Block `idx` (0-based, `idx = M` is the direct channel).
    pub fn block(&self, idx: usize) -> CMatrix {
        self.gamma.block(0, idx * self.k, self.gamma.rows(), self.k)
    }
}

pub fn cascaded_channel(ch: &ChannelRealization) -> Result<CascadedChannel> {
    let (l, m) = ch.g.shape();
    let k = ch.h_r.cols();
    if ch.h_r.rows() != m {
        return Err(Error::DimensionMismatch {
            context: "cascaded_channel H_r",
            expected: (m, k),
            found: ch.h_r.shape(),
        });
    }
    if ch.h_d.shape() != (l, k) {
        return Err(Error::DimensionMismatch {
            context: "cascaded_channel H_d",
            expected: (l, k),
            found: ch.h_d.shape(),
        });
    }
    // h_{r,m}^H is row m of H_r.
    let gamma = CMatrix::from_fn(l, (m + 1) * k, |row, col| {
        let (blk, kk) = (col / k, col % k);
        if blk < m {
            ch.g[(row, blk)] * ch.h_r[(blk, kk)]
        } else {
            ch.h_d[(row, kk)]
        }
    });
    Ok(CascadedChannel { gamma, m, k })
}

/// `R_Γ = E[Γ^H Γ] = blkdiag(L(Ψ_RIS⊙Ψ_RIS)⊗Ψ_UE, LΨ_UE)`.
pub fn cascaded_correlation(corr: &CorrelationSpec, dims: &SystemDims) -> Result<HermitianMatrix> {
    CorrelationSpec::new(corr.psi_ue, corr.psi_ris, corr.psi_bs)?;
    let (m, k) = (dims.m, dims.k);
    let ue = exp_correlation_real(k, corr.psi_ue);
    let ris = exp_correlation_real(m, corr.psi_ris);
    let l = dims.l as f64;
    let r = CMatrix::from_fn((m + 1) * k, (m + 1) * k, |row, col| {
        let (bi, a) = (row / k, row % k);
        let (bj, b) = (col / k, col % k);
        let base = l * ue[a * k + b];
        if bi < m && bj < m {
            let p = ris[bi * m + bj];
            C64::new(base * p * p, 0.0)
        } else if bi == m && bj == m {
            C64::new(base, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    HermitianMatrix::new(r)
}
