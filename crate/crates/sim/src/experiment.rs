//! Monte Carlo sweeps, convergence traces and design dumps.

use std::time::Instant;

use rayon::prelude::*;
use ristrain_core::baselines::{design_scheme, naive_pattern, SchemeDesign, SchemeId};
use ristrain_core::channel::{cascaded_channel, trial_rng, ChannelSampler};
use ristrain_core::lmmse_design::{design_lmmse_observed, LmmseProblem};
use ristrain_core::ls_design::{design_ls_observed, dft_training};
use ristrain_core::system::{simulate_reception, squared_error};
use ristrain_core::trace::IterationRecord;
use ristrain_core::{DesignOptions, Estimator};

use crate::config::{ExperimentConfig, Resolved};
use crate::error::SimError;
use crate::table::{fmt_num, fmt_opt, Table};

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub scheme: SchemeId,
    pub estimator: Estimator,
    pub snr_db: f64,
    pub trial: usize,
    pub analytic_nmse: f64,
    /// Present when reception is simulated.
    pub empirical_nmse: Option<f64>,
    pub iterations: usize,
    /// Design time of the (scheme, SNR) cell, when timing is on.
    pub wall_ms: Option<f64>,
}

pub const RESULT_HEADER: [&str; 8] = [
    "scheme",
    "estimator",
    "snr_db",
    "trial",
    "analytic_nmse",
    "empirical_nmse",
    "iterations",
    "wall_ms",
];

pub fn results_table(rows: &[ResultRow]) -> Table {
    let mut t = Table::new(&RESULT_HEADER);
    for r in rows {
        t.push(vec![
            r.scheme.to_string(),
            r.estimator.to_string(),
            fmt_num(r.snr_db),
            r.trial.to_string(),
            fmt_num(r.analytic_nmse),
            fmt_opt(r.empirical_nmse),
            r.iterations.to_string(),
            fmt_opt(r.wall_ms),
        ]);
    }
    t
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Designs every (scheme, SNR) cell, in scheme-major order.
pub fn design_cells(cfg: &ExperimentConfig, res: &Resolved) -> Result<Vec<(SchemeDesign, f64)>, SimError> {
    let cells: Vec<(SchemeId, f64)> = res
        .schemes
        .iter()
        .flat_map(|&s| cfg.snr_db.iter().map(move |&snr| (s, snr)))
        .collect();
    cells
        .par_iter()
        .map(|&(scheme, snr)| {
            let start = Instant::now();
            let d = design_scheme(scheme, cfg.estimator, &res.setup(snr))?;
            Ok((d, elapsed_ms(start)))
        })
        .collect()
}

/// One row per (scheme, SNR, trial).
///
/// Designs depend only on the correlation and budgets, so each cell is
/// designed once. Trial `t` draws its channel from stream `2t` and its noise
/// from stream `2t+1`, shared by all cells.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, SimError> {
    let res = cfg.validate()?;
    let designs = design_cells(cfg, &res)?;
    let empirical: Vec<Vec<f64>> = if cfg.simulate {
        let sampler = ChannelSampler::new(&res.dims, &res.corr)?;
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| -> Result<Vec<f64>, SimError> {
                let t = t as u64;
                let ch = sampler.sample(&mut trial_rng(cfg.seed, 2 * t));
                let gamma = cascaded_channel(&ch)?.gamma;
                designs
                    .iter()
                    .map(|(d, _)| {
                        let truth = d.effective_channel(&gamma);
                        let y = simulate_reception(&truth, d.s(), d.sigma2, &mut trial_rng(cfg.seed, 2 * t + 1))?;
                        let est = d.estimate(&y)?;
                        Ok(squared_error(&est, &truth) / d.dims.nmse_scale())
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };

    let mut rows = Vec::with_capacity(designs.len() * cfg.trials);
    for (c, (d, ms)) in designs.iter().enumerate() {
        let snr_db = cfg.snr_db[c % cfg.snr_db.len()];
        for trial in 0..cfg.trials {
            rows.push(ResultRow {
                scheme: d.scheme,
                estimator: d.estimator,
                snr_db,
                trial,
                analytic_nmse: d.nmse(),
                empirical_nmse: empirical.get(trial).map(|e| e[c]),
                iterations: d.iterations(),
                wall_ms: cfg.timing.then_some(*ms),
            });
        }
    }
    Ok(rows)
}

/// Trial average of one (scheme, SNR) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub scheme: SchemeId,
    pub estimator: Estimator,
    pub snr_db: f64,
    pub analytic_nmse: f64,
    pub empirical_nmse: Option<f64>,
    pub trials: usize,
    pub iterations: usize,
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut out: Vec<(SummaryRow, f64, usize)> = Vec::new();
    for r in rows {
        let pos = out
            .iter()
            .position(|(s, _, _)| s.scheme == r.scheme && s.estimator == r.estimator && s.snr_db == r.snr_db);
        let i = pos.unwrap_or_else(|| {
            out.push((
                SummaryRow {
                    scheme: r.scheme,
                    estimator: r.estimator,
                    snr_db: r.snr_db,
                    analytic_nmse: r.analytic_nmse,
                    empirical_nmse: None,
                    trials: 0,
                    iterations: r.iterations,
                },
                0.0,
                0,
            ));
            out.len() - 1
        });
        let (s, sum, n) = &mut out[i];
        s.trials += 1;
        if let Some(e) = r.empirical_nmse {
            *sum += e;
            *n += 1;
        }
    }
    out.into_iter()
        .map(|(mut s, sum, n)| {
            s.empirical_nmse = (n > 0).then(|| sum / n as f64);
            s
        })
        .collect()
}

pub fn summary_table(rows: &[SummaryRow]) -> Table {
    let mut t = Table::new(&["scheme", "estimator", "snr_db", "analytic_nmse", "empirical_nmse", "trials", "iterations"]);
    for r in rows {
        t.push(vec![
            r.scheme.to_string(),
            r.estimator.to_string(),
            fmt_num(r.snr_db),
            fmt_num(r.analytic_nmse),
            fmt_opt(r.empirical_nmse),
            r.trials.to_string(),
            r.iterations.to_string(),
        ]);
    }
    t
}

/// Gnuplot data blocks, one per scheme, separated by two blank lines so that
/// `index i` selects scheme `i`.
pub fn plot_data(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    let mut schemes: Vec<SchemeId> = Vec::new();
    for r in rows {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme);
        }
    }
    for (i, s) in schemes.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let est = rows.iter().find(|r| r.scheme == *s).map(|r| r.estimator).unwrap_or(Estimator::Ls);
        out.push_str(&format!("# index {i}: scheme={s} estimator={est}\n# snr_db analytic_nmse empirical_nmse\n"));
        for r in rows.iter().filter(|r| r.scheme == *s) {
            let emp = r.empirical_nmse.map(fmt_num).unwrap_or_else(|| "NaN".into());
            out.push_str(&format!("{} {} {}\n", fmt_num(r.snr_db), fmt_num(r.analytic_nmse), emp));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub estimator: Estimator,
    pub snr_db: f64,
    pub accelerated: bool,
    pub record: IterationRecord,
    pub wall_ms: Option<f64>,
}

pub const CONVERGENCE_HEADER: [&str; 7] = ["estimator", "snr_db", "variant", "iteration", "objective", "mm_calls", "wall_ms"];

pub fn convergence_table(rows: &[ConvergenceRow]) -> Table {
    let mut t = Table::new(&CONVERGENCE_HEADER);
    for r in rows {
        t.push(vec![
            r.estimator.to_string(),
            fmt_num(r.snr_db),
            if r.accelerated { "accelerated" } else { "plain" }.into(),
            r.record.iteration.to_string(),
            fmt_num(r.record.objective),
            r.record.mm_calls.to_string(),
            fmt_opt(r.wall_ms),
        ]);
    }
    t
}

/// Runs the proposed design from the naive pattern and DFT training.
fn trace_design(res: &Resolved, estimator: Estimator, snr_db: f64, accelerated: bool, timing: bool) -> Result<Vec<ConvergenceRow>, SimError> {
    let setup = res.setup(snr_db);
    let opts = DesignOptions {
        accelerate: accelerated,
        ..res.options
    };
    let d = &res.dims;
    let v0 = naive_pattern(d.m, d.b, &res.model)?;
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut obs = |r: &IterationRecord| {
        rows.push(ConvergenceRow {
            estimator,
            snr_db,
            accelerated,
            record: *r,
            wall_ms: timing.then(|| elapsed_ms(start)),
        })
    };
    match estimator {
        Estimator::Ls => {
            design_ls_observed(&v0, &res.model, &opts, &mut obs)?;
        }
        Estimator::Lmmse => {
            let x0 = dft_training(d.k, d.tau, &setup.power)?;
            let r = ristrain_core::channel::cascaded_correlation(&res.corr, d)?;
            let problem = LmmseProblem::new(r, setup.sigma2, d.l, setup.power.clone())?;
            design_lmmse_observed(&problem, &res.model, &x0, &v0, &opts, &mut obs)?;
        }
    }
    Ok(rows)
}

/// Plain and accelerated traces for every SNR, in SNR-major order.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>, SimError> {
    let res = cfg.validate()?;
    let jobs: Vec<(f64, bool)> = cfg.snr_db.iter().flat_map(|&s| [(s, false), (s, true)]).collect();
    let traces: Vec<Vec<ConvergenceRow>> = jobs
        .par_iter()
        .map(|&(snr, acc)| trace_design(&res, cfg.estimator, snr, acc, cfg.timing))
        .collect::<Result<_, _>>()?;
    Ok(traces.into_iter().flatten().collect())
}

pub const DESIGN_HEADER: [&str; 8] = ["scheme", "estimator", "snr_db", "matrix", "row", "col", "re", "im"];

/// Training `X` and deployed pattern `V` of every cell as (row, col, re, im).
pub fn run_design(cfg: &ExperimentConfig) -> Result<Table, SimError> {
    let res = cfg.validate()?;
    let designs = design_cells(cfg, &res)?;
    let mut t = Table::new(&DESIGN_HEADER);
    for (c, (d, _)) in designs.iter().enumerate() {
        let snr = fmt_num(cfg.snr_db[c % cfg.snr_db.len()]);
        let v = d.deployed_pattern()?;
        for (name, mat) in [("X", d.training.matrix()), ("V", v.matrix())] {
            for i in 0..mat.rows() {
                for j in 0..mat.cols() {
                    let z = mat[(i, j)];
                    t.push(vec![
                        d.scheme.to_string(),
                        d.estimator.to_string(),
                        snr.clone(),
                        name.into(),
                        i.to_string(),
                        j.to_string(),
                        fmt_num(z.re),
                        fmt_num(z.im),
                    ]);
                }
            }
        }
    }
    Ok(t)
}
