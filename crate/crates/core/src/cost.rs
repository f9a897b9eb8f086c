//! Description-length cost: KL data term, per-basis penalties, and the
//! closed-form cost change of single-coordinate moves.
//!
//! The objective minimized by the learner is
//!
//! ```text
//! cost(theta, N) = KL(p_d || p_theta) + sum_{y: theta_y != 0} r_y(N)
//! r_y(N) = (ln N / 2 + sum_{i: y_i != 0} ln(n * (|X_i| - 1))) / N
//! ```
//!
//! Along a single coordinate theta_y the dual value obeys
//! `theta_bar_y(t) = tanh(t - t0 + atanh(theta_bar_y(t0)))`, which makes the
//! KL change of moving theta_y available in closed form: moving the dual
//! coordinate from a to b changes the KL data term by
//!
//! ```text
//! (1 + d)/2 * ln((1 + a)/(1 + b)) + (1 - d)/2 * ln((1 - a)/(1 - b))
//! ```
//!
//! where d is the empirical dual coordinate. The candidate evaluators below
//! combine this with the penalty for appending, adjusting, or removing one
//! coordinate, each in O(1).

use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::space::{DenseTable, TableKind, VariableSpec};

/// Per-label penalty table r_y(N) for one sample count.
#[derive(Debug, Clone)]
pub struct RegularizerTable {
    spec: VariableSpec,
    values: Vec<f64>,
    n_samples: u64,
}

impl RegularizerTable {
    /// Materialize r_y for every label with one additive sweep per axis
    /// (the same strided pattern as the dual transform).
    pub fn new(spec: &VariableSpec, n_samples: u64) -> Result<Self> {
        if n_samples < 2 {
            return Err(Error::Domain(format!(
                "penalty needs at least 2 samples, got {n_samples}"
            )));
        }
        let n = spec.n() as f64;
        let n_f = n_samples as f64;
        let size = spec.size();
        let mut values = vec![(n_f.ln() / 2.0) / n_f; size];
        for axis in 0..spec.n() {
            let add = (n * (spec.card(axis) - 1) as f64).ln() / n_f;
            let stride = spec.stride(axis);
            let card = spec.card(axis);
            let block = stride * card;
            let mut base = 0;
            while base < size {
                for v in &mut values[base + stride..base + block] {
                    *v += add;
                }
                base += block;
            }
        }
        Ok(Self { spec: spec.clone(), values, n_samples })
    }

    pub fn spec(&self) -> &VariableSpec {
        &self.spec
    }

    pub fn n_samples(&self) -> u64 {
        self.n_samples
    }

    pub fn get(&self, y: usize) -> f64 {
        self.values[y]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// KL(p || q) over two tables on the same spec. Entries where p = 0
/// contribute zero; a zero in q under positive p yields +infinity.
pub fn kl_divergence(p: &DenseTable, q: &DenseTable) -> f64 {
    assert_eq!(p.spec(), q.spec(), "KL needs tables over the same spec");
    debug_assert_eq!(p.kind(), TableKind::Distribution);
    let mut acc = KahanSum::default();
    for (&pi, &qi) in p.values().iter().zip(q.values()) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            acc.add(pi * (pi.ln() - qi.ln()));
        }
    }
    acc.value()
}

/// How a candidate move changes the parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateKind {
    /// Give a zero coordinate a value.
    Append,
    /// Re-optimize an existing coordinate.
    Adjust,
    /// Set an existing coordinate back to zero.
    Remove,
}

impl CandidateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CandidateKind::Append => "append",
            CandidateKind::Adjust => "adjust",
            CandidateKind::Remove => "remove",
        }
    }
}

/// One evaluated move: the label, what to do, the new coordinate value, the
/// exact cost change, and (for appends) the pruning bound that admitted it.
#[derive(Debug, Clone, Copy)]
pub struct CandidateDelta {
    pub y: usize,
    pub kind: CandidateKind,
    pub new_theta: f64,
    pub delta_cost: f64,
    pub lower_bound: f64,
}

fn check_open_interval(name: &str, v: f64) -> Result<()> {
    if !(v.abs() < 1.0) {
        return Err(Error::Numeric(format!(
            "{name} = {v} must lie strictly inside (-1, 1)"
        )));
    }
    Ok(())
}

/// KL change of moving one dual coordinate from `from` to `to` against the
/// empirical coordinate `d_bar`. Uses ln_1p so values near +-1 stay accurate.
#[inline]
fn kl_line_delta(from: f64, to: f64, d_bar: f64) -> f64 {
    0.5 * (1.0 + d_bar) * (from.ln_1p() - to.ln_1p())
        + 0.5 * (1.0 - d_bar) * ((-from).ln_1p() - (-to).ln_1p())
}

/// Cost change of appending label y with its optimal value, given the current
/// dual coordinate `theta_bar0`, the empirical coordinate `d_bar`, and the
/// penalty `r_y`. Returns `(new_theta, delta_cost)`; the optimal coordinate
/// move lands the dual value exactly on `d_bar`.
pub fn delta_append(theta_bar0: f64, d_bar: f64, r_y: f64) -> Result<(f64, f64)> {
    check_open_interval("theta_bar0", theta_bar0)?;
    check_open_interval("d_bar", d_bar)?;
    let new_theta = d_bar.atanh() - theta_bar0.atanh();
    let delta = kl_line_delta(theta_bar0, d_bar, d_bar) + r_y;
    Ok((new_theta, delta))
}

/// Cost change of moving an existing coordinate to its optimum. Identical to
/// an append except the penalty is already paid; returns the optimal offset
/// to add to the current theta_y and the cost change.
pub fn delta_adjust(theta_bar0: f64, d_bar: f64) -> Result<(f64, f64)> {
    check_open_interval("theta_bar0", theta_bar0)?;
    check_open_interval("d_bar", d_bar)?;
    let offset = d_bar.atanh() - theta_bar0.atanh();
    let delta = kl_line_delta(theta_bar0, d_bar, d_bar);
    Ok((offset, delta))
}

/// Cost change of removing an existing coordinate (setting theta_y = 0),
/// which walks the dual value back to tanh(-theta_y0 + atanh(theta_bar0))
/// and refunds the penalty.
pub fn delta_remove(theta_bar0: f64, d_bar: f64, theta_y0: f64, r_y: f64) -> Result<f64> {
    check_open_interval("theta_bar0", theta_bar0)?;
    check_open_interval("d_bar", d_bar)?;
    let at_zero = (-theta_y0 + theta_bar0.atanh()).tanh();
    Ok(kl_line_delta(theta_bar0, at_zero, d_bar) - r_y)
}

/// Cheap lower bound on the append delta, used to skip exact evaluation:
/// `-(theta_bar0 - d_bar)^2 / (1 - theta_bar0^2) + r_y`.
pub fn lower_bound_append(theta_bar0: f64, d_bar: f64, r_y: f64) -> Result<f64> {
    check_open_interval("theta_bar0", theta_bar0)?;
    check_open_interval("d_bar", d_bar)?;
    let diff = theta_bar0 - d_bar;
    Ok(-(diff * diff) / (1.0 - theta_bar0 * theta_bar0) + r_y)
}
