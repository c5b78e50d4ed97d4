//! Iteration bookkeeping shared by the iterative designs.

use alloc::vec::Vec;

use crate::phase_model::PhaseSearch;

/// Stopping rule and search resolution of an iterative design.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DesignOptions {
    /// Relative objective change below which the iteration stops.
    pub eps: f64,
    pub max_iter: usize,
    pub accelerate: bool,
    pub search: PhaseSearch,
}

impl DesignOptions {
    pub fn plain() -> Self {
        Self {
            eps: 1e-3,
            max_iter: 500,
            accelerate: false,
            search: PhaseSearch::default(),
        }
    }

    pub fn accelerated() -> Self {
        Self {
            eps: 1e-3,
            max_iter: 100,
            accelerate: true,
            search: PhaseSearch::default(),
        }
    }
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self::plain()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    /// 0 is the initial point.
    pub iteration: usize,
    pub objective: f64,
    /// Cumulative MM update (surrogate rebuild) count.
    pub mm_calls: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DesignTrace {
    pub records: Vec<IterationRecord>,
    /// Whether the relative-change rule fired before `max_iter`.
    pub converged: bool,
}

impl DesignTrace {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    pub fn mm_calls(&self) -> usize {
        self.records.last().map_or(0, |r| r.mm_calls)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.records.last().map(|r| r.objective)
    }

    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.objective)
    }

    /// Cumulative MM calls at the first record with objective `<= target`.
    pub fn calls_to_reach(&self, target: f64) -> Option<usize> {
        self.records.iter().find(|r| r.objective <= target).map(|r| r.mm_calls)
    }

    /// True when no recorded objective exceeds its predecessor by more than
    /// `rel_tol` relative.
    pub fn is_non_increasing(&self, rel_tol: f64) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].objective <= w[0].objective + rel_tol * w[0].objective.abs())
    }
}

/// Relative change `|new − old| / |old|`.
pub fn relative_change(old: f64, new: f64) -> f64 {
    if old == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((new - old) / old).abs()
    }
}

/// Receives each record as soon as it is produced.
pub trait Observer {
    fn observe(&mut self, record: &IterationRecord);
}

impl<F: FnMut(&IterationRecord)> Observer for F {
    fn observe(&mut self, record: &IterationRecord) {
        self(record)
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _record: &IterationRecord) {}
}

pub(crate) struct Recorder<'a> {
    pub trace: DesignTrace,
    observer: &'a mut dyn Observer,
}

impl<'a> Recorder<'a> {
    pub fn new(observer: &'a mut dyn Observer) -> Self {
        Self {
            trace: DesignTrace::default(),
            observer,
        }
    }

    pub fn push(&mut self, iteration: usize, objective: f64, mm_calls: usize) {
        let r = IterationRecord {
            iteration,
            objective,
            mm_calls,
        };
        self.observer.observe(&r);
        self.trace.records.push(r);
    }
}
