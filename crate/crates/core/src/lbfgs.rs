//! Minimal limited-memory BFGS with Armijo backtracking.
//!
//! Two-loop recursion over a short history of curvature pairs, scaled by the
//! latest pair's gamma, falling back to steepest descent whenever the
//! quasi-Newton direction fails the descent test. Strict sufficient decrease
//! makes accepted objective values strictly decreasing.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct LbfgsConfig {
    /// Curvature pairs kept for the two-loop recursion.
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when the gradient max-norm falls below this.
    pub grad_tol: f64,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    /// Backtracking shrink factor.
    pub shrink: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 500,
            grad_tol: 1e-6,
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub grad_max_norm: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub iters: usize,
    /// True when the gradient tolerance was met (vs. cap or stalled search).
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimize `eval` (which fills the gradient and returns the value) from
/// `x0`. `on_step(iter, f, delta)` fires after each accepted step.
pub(crate) fn minimize<F, S>(
    x0: Vec<f64>,
    config: &LbfgsConfig,
    mut eval: F,
    mut on_step: S,
) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
    S: FnMut(usize, f64, f64),
{
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::Domain("nothing to optimize: zero parameters".into()));
    }
    let mut x = x0;
    let mut grad = vec![0.0; dim];
    let mut f = eval(&x, &mut grad)?;
    if !f.is_finite() {
        return Err(Error::Numeric(format!("objective at start is {f}")));
    }

    // Curvature history: (s, y, 1/(s.y)).
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut direction = vec![0.0; dim];
    let mut x_next = vec![0.0; dim];
    let mut grad_next = vec![0.0; dim];
    let mut alphas = Vec::with_capacity(config.memory);

    let mut iters = 0;
    let mut converged = max_norm(&grad) <= config.grad_tol;
    while !converged && iters < config.max_iters {
        // Two-loop recursion for d = -H g.
        for (d, g) in direction.iter_mut().zip(&grad) {
            *d = -g;
        }
        alphas.clear();
        for (s, y, rho) in pairs.iter().rev() {
            let alpha = rho * dot(s, &direction);
            for (d, yk) in direction.iter_mut().zip(y) {
                *d -= alpha * yk;
            }
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for d in direction.iter_mut() {
                *d *= gamma;
            }
        }
        for ((s, y, rho), alpha) in pairs.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &direction);
            for (d, sk) in direction.iter_mut().zip(s) {
                *d += (alpha - beta) * sk;
            }
        }

        let mut slope = dot(&grad, &direction);
        if slope >= 0.0 {
            // Quasi-Newton direction is not a descent direction; restart
            // from steepest descent.
            pairs.clear();
            for (d, g) in direction.iter_mut().zip(&grad) {
                *d = -g;
            }
            slope = dot(&grad, &direction);
        }

        // Backtracking line search with strict sufficient decrease. The
        // first-ever step is scaled to a unit max-norm move.
        let mut step = if pairs.is_empty() && iters == 0 {
            1.0 / max_norm(&direction).max(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..config.max_backtracks {
            for ((xn, xv), d) in x_next.iter_mut().zip(&x).zip(&direction) {
                *xn = xv + step * d;
            }
            let f_next = eval(&x_next, &mut grad_next)?;
            if f_next.is_finite() && f_next <= f + config.c1 * step * slope {
                accepted = Some(f_next);
                break;
            }
            step *= config.shrink;
        }
        let Some(f_next) = accepted else {
            // The search stalled below floating-point resolution; the
            // current iterate is the best available.
            break;
        };

        // Store the curvature pair when it is usable (positive s.y).
        let s: Vec<f64> = x_next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad_next.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if pairs.len() == config.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }

        let delta = f_next - f;
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut grad, &mut grad_next);
        f = f_next;
        iters += 1;
        on_step(iters, f, delta);
        converged = max_norm(&grad) <= config.grad_tol;
    }

    Ok(LbfgsOutcome {
        grad_max_norm: max_norm(&grad),
        x,
        f,
        iters,
        converged,
    })
}
