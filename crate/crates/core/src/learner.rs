//! Greedy coordinate selection driven by the description-length cost.
//!
//! Each iteration recomputes the model's dual coordinates with one fast
//! transform, scans every label for the best single-coordinate move
//! (append / adjust / remove, each scored in O(1) closed form), applies the
//! winner with an O(|X|) density update, and stops when no move improves the
//! cost by at least epsilon.
//!
//! The scan prunes appends with a cheap lower bound on their cost change;
//! pruning never changes the selected move, only how many candidates get the
//! exact evaluation. The working set is four dense tables (model density,
//! model dual, data dual, penalties) plus one transform destination.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::basis::{bases_for, dual_transform, dual_transform_into, DualTable};
use crate::cost::{
    delta_adjust, delta_append, delta_remove, kl_divergence, lower_bound_append,
    CandidateDelta, CandidateKind, RegularizerTable,
};
use crate::error::{Error, Result};
use crate::model::{ModelState, SparseTheta};
use crate::numeric::KahanSum;
use crate::space::{Dataset, DenseTable, TableKind};

/// Saturation guard: dual coordinates read by the scan are clamped this far
/// inside (-1, 1) so the closed forms stay finite even when floating-point
/// roundoff pushes a transform output onto or past the boundary.
const DUAL_SAT: f64 = 1.0 - 1e-15;

/// Knobs for one fit.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Stop once the best available move improves cost by less than this.
    pub epsilon: f64,
    /// Hard cap on accepted moves.
    pub max_iters: usize,
    /// Skip exact evaluation of appends whose lower bound cannot win.
    pub prune: bool,
    /// Rebuild the density from theta every this many updates (0 = never),
    /// flushing multiplicative drift.
    pub refresh_every: usize,
    /// Recorded for reporting; the fit itself is deterministic.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_iters: 10_000,
            prune: true,
            refresh_every: 512,
            seed: 0,
        }
    }
}

/// Why the loop ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStatus {
    /// No remaining move improves cost by epsilon.
    Converged,
    /// The iteration cap fired first.
    IterCapped,
}

/// One accepted move.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub iter: usize,
    pub y: usize,
    pub kind: CandidateKind,
    pub delta: f64,
    /// Running cost after this move (initial cost plus accepted deltas).
    pub cost: f64,
    /// Milliseconds since the fit started.
    pub elapsed_ms: u64,
}

/// Full per-iteration history of a fit.
#[derive(Debug, Clone)]
pub struct FitTrace {
    pub initial_cost: f64,
    pub records: Vec<TraceRecord>,
    pub status: FitStatus,
}

impl FitTrace {
    /// Cost after the last accepted move (initial cost if none were).
    pub fn final_cost(&self) -> f64 {
        self.records.last().map_or(self.initial_cost, |r| r.cost)
    }

    /// Write as `iter,y,kind,delta,cost,ms` CSV.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = String::from("iter,y,kind,delta,cost,ms\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iter,
                r.y,
                r.kind.as_str(),
                crate::format::float(r.delta),
                crate::format::float(r.cost),
                r.elapsed_ms
            )
            .unwrap();
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Best single-coordinate move, or `None` when nothing strictly improves.
///
/// Scans labels in increasing order with the champion delta starting at 0,
/// so only strictly improving moves are returned and ties resolve to the
/// smallest label (and to the earlier-evaluated kind within a label).
pub fn scan_candidates(
    theta: &SparseTheta,
    theta_bar: &DualTable,
    d_bar: &DualTable,
    r: &RegularizerTable,
    prune: bool,
) -> Result<Option<CandidateDelta>> {
    if theta_bar.spec() != d_bar.spec() || theta_bar.spec() != r.spec() {
        return Err(Error::Domain(
            "scan needs dual tables and penalties over the same spec".into(),
        ));
    }
    let size = theta_bar.spec().size();
    let mut champion = 0.0f64;
    let mut best: Option<CandidateDelta> = None;
    let mut support = theta.iter().peekable();

    for y in 1..size {
        let stored = match support.peek() {
            Some(&(sy, sv)) if sy == y => {
                support.next();
                Some(sv)
            }
            _ => None,
        };
        let t0 = theta_bar.get(y).clamp(-DUAL_SAT, DUAL_SAT);
        let db = d_bar.get(y).clamp(-DUAL_SAT, DUAL_SAT);
        let r_y = r.get(y);

        match stored {
            None => {
                let lb = lower_bound_append(t0, db, r_y)?;
                if prune && lb >= champion {
                    continue;
                }
                let (new_theta, delta) = delta_append(t0, db, r_y)?;
                if delta < champion {
                    champion = delta;
                    best = Some(CandidateDelta {
                        y,
                        kind: CandidateKind::Append,
                        new_theta,
                        delta_cost: delta,
                        lower_bound: lb,
                    });
                }
            }
            Some(theta_y0) => {
                let (offset, delta) = delta_adjust(t0, db)?;
                if delta < champion {
                    champion = delta;
                    best = Some(CandidateDelta {
                        y,
                        kind: CandidateKind::Adjust,
                        new_theta: theta_y0 + offset,
                        delta_cost: delta,
                        lower_bound: delta,
                    });
                }
                let delta = delta_remove(t0, db, theta_y0, r_y)?;
                if delta < champion {
                    champion = delta;
                    best = Some(CandidateDelta {
                        y,
                        kind: CandidateKind::Remove,
                        new_theta: 0.0,
                        delta_cost: delta,
                        lower_bound: delta,
                    });
                }
            }
        }
    }
    Ok(best)
}

/// Description-length cost of a model against an empirical table:
/// `KL(p_d || p_theta) + sum of penalties over the stored labels`.
pub fn model_cost(state: &ModelState, p_d: &DenseTable, r: &RegularizerTable) -> f64 {
    let mut cost = kl_divergence(p_d, state.density());
    for y in state.theta().support() {
        cost += r.get(y);
    }
    cost
}

/// Fit a model to a dataset (empirical table plus its row count).
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<(ModelState, FitTrace)> {
    let p_d = data.empirical_distribution();
    fit_distribution(&p_d, data.n_rows() as u64, config)
}

/// Fit a model to an explicit data distribution with a nominal sample count
/// (which only enters through the penalties and the dual clamp). Passing an
/// exact distribution with a huge count approximates the infinite-data limit.
pub fn fit_distribution(
    p_d: &DenseTable,
    n_samples: u64,
    config: &FitConfig,
) -> Result<(ModelState, FitTrace)> {
    if p_d.kind() != TableKind::Distribution {
        return Err(Error::Domain("fit needs a distribution table".into()));
    }
    if config.epsilon <= 0.0 {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {}",
            config.epsilon
        )));
    }
    if config.max_iters == 0 {
        return Err(Error::Domain("max_iters must be at least 1".into()));
    }
    let spec = p_d.spec().clone();
    let r = RegularizerTable::new(&spec, n_samples)?;
    let bases = bases_for(&spec);

    // Empirical dual coordinates, clamped away from +-1 so that fully
    // saturated coordinates (|d| = 1 under concentrated data) keep finite
    // optimal values sized to the evidence N.
    let mut d_bar = dual_transform(p_d, &bases)?;
    let bound = (1.0 - 1.0 / (2.0 * n_samples as f64)).min(DUAL_SAT);
    for v in d_bar.values_mut() {
        *v = v.clamp(-bound, bound);
    }

    let mut state = ModelState::new(spec.clone());
    let mut theta_bar = DualTable::zeros(spec.clone());

    // cost(empty model) = KL(p_d || uniform) = ln|X| - H(p_d).
    let mut entropy_terms = KahanSum::default();
    for &p in p_d.values() {
        if p > 0.0 {
            entropy_terms.add(p * p.ln());
        }
    }
    let initial_cost = entropy_terms.value() + (spec.size() as f64).ln();

    let start = Instant::now();
    let mut cost = initial_cost;
    let mut records = Vec::new();
    let mut status = FitStatus::IterCapped;

    for iter in 1..=config.max_iters {
        dual_transform_into(state.density(), state.bases(), &mut theta_bar)?;
        let candidate = scan_candidates(state.theta(), &theta_bar, &d_bar, &r, config.prune)?;
        let Some(c) = candidate else {
            status = FitStatus::Converged;
            break;
        };
        if c.delta_cost > -config.epsilon {
            status = FitStatus::Converged;
            break;
        }
        state.apply_update(c.y, c.new_theta)?;
        if config.refresh_every > 0 && iter % config.refresh_every == 0 {
            state.refresh_density();
        }
        cost += c.delta_cost;
        records.push(TraceRecord {
            iter,
            y: c.y,
            kind: c.kind,
            delta: c.delta_cost,
            cost,
            elapsed_ms: start.elapsed().as_millis() as u64,
        });
    }

    Ok((state, FitTrace { initial_cost, records, status }))
}
