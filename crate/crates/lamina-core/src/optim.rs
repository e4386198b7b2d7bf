//! Limited-memory quasi-Newton descent with Armijo backtracking, shared by
//! the 2D plate and 3D film minimizers.
//!
//! Objectives may return `+inf` to encode inadmissible states; the line
//! search treats such steps as rejected. Gauge freedom (translations,
//! infinitesimal rotations, affine null directions) is handled by projection
//! hooks applied to iterates and gradients.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::fmath;

#[derive(Debug, Clone, PartialEq)]
pub enum OptimError {
    /// Initial state has non-finite objective value.
    NonFiniteInit,
    /// 50 consecutive line searches failed to produce a decrease.
    LineSearchStalled { iteration: usize, value: f64, grad_norm: f64 },
}

impl fmt::Display for OptimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimError::NonFiniteInit => write!(f, "initial state has non-finite energy"),
            OptimError::LineSearchStalled { iteration, value, grad_norm } => write!(
                f,
                "line search stalled at iteration {iteration} (value {value:e}, grad norm {grad_norm:e})"
            ),
        }
    }
}

pub trait Objective {
    /// Evaluates the objective and writes its gradient; may return `+inf`.
    fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Removes invariant directions from a state (gauge fixing).
    fn project_state(&self, _x: &mut [f64]) {}

    /// Applies the linear part of the state projection to a gradient.
    fn project_gradient(&self, _g: &mut [f64]) {}
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    /// Convergence threshold on the projected-gradient norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Number of curvature pairs retained.
    pub memory: usize,
    /// Armijo sufficient-decrease slope.
    pub armijo_slope: f64,
    /// Backtracking factor.
    pub backtrack: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            tol: 1e-8,
            max_iter: 20_000,
            memory: 10,
            armijo_slope: 1e-4,
            backtrack: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each accepted step, starting at the initial
    /// (projected) state.
    pub values: Vec<f64>,
}

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    fmath::sqrt(dot(a, a))
}

/// Two-loop recursion: the quasi-Newton descent direction `-H g`.
fn descent_direction(grad: &[f64], history: &VecDeque<Pair>) -> Vec<f64> {
    let mut q = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for pair in history.iter().rev() {
        let alpha = pair.rho * dot(&pair.s, &q);
        for (qi, yi) in q.iter_mut().zip(&pair.y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    if let Some(last) = history.back() {
        let gamma = dot(&last.s, &last.y) / dot(&last.y, &last.y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for (pair, alpha) in history.iter().zip(alphas.iter().rev()) {
        let beta = pair.rho * dot(&pair.y, &q);
        for (qi, si) in q.iter_mut().zip(&pair.s) {
            *qi += (alpha - beta) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

pub fn minimize(
    objective: &impl Objective,
    init: &[f64],
    opts: &MinimizeOptions,
) -> Result<MinimizeResult, OptimError> {
    let n = init.len();
    let mut x = init.to_vec();
    objective.project_state(&mut x);
    let mut grad = vec![0.0; n];
    let mut value = objective.value_and_grad(&x, &mut grad);
    if !value.is_finite() {
        return Err(OptimError::NonFiniteInit);
    }
    objective.project_gradient(&mut grad);

    let mut history: VecDeque<Pair> = VecDeque::with_capacity(opts.memory);
    let mut values = vec![value];
    let mut stalled = 0usize;
    let mut trial = vec![0.0; n];
    let mut new_grad = vec![0.0; n];

    for iteration in 0..opts.max_iter {
        let grad_norm = norm(&grad);
        if grad_norm < opts.tol {
            return Ok(MinimizeResult {
                x,
                value,
                grad_norm,
                iterations: iteration,
                converged: true,
                values,
            });
        }

        let mut direction = descent_direction(&grad, &history);
        let mut slope = dot(&grad, &direction);
        if !(slope < 0.0) || !slope.is_finite() {
            history.clear();
            direction = grad.iter().map(|g| -g).collect();
            slope = -grad_norm * grad_norm;
        }

        // Unit quasi-Newton step; gradient-scaled on cold starts.
        let mut step = if history.is_empty() { (1.0 / grad_norm).min(1.0) } else { 1.0 };
        let mut accepted = false;
        while step > 1e-20 {
            for ((t, xi), di) in trial.iter_mut().zip(&x).zip(&direction) {
                *t = xi + step * di;
            }
            let f_trial = objective.value_and_grad(&trial, &mut new_grad);
            if f_trial.is_finite() && f_trial <= value + opts.armijo_slope * step * slope {
                accepted = true;
                break;
            }
            step *= opts.backtrack;
        }

        if !accepted {
            stalled += 1;
            history.clear();
            if stalled >= 50 {
                return Err(OptimError::LineSearchStalled {
                    iteration,
                    value,
                    grad_norm,
                });
            }
            continue;
        }
        stalled = 0;

        objective.project_state(&mut trial);
        let new_value = objective.value_and_grad(&trial, &mut new_grad);
        objective.project_gradient(&mut new_grad);

        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back(Pair { rho: 1.0 / sy, s, y });
        }

        x.copy_from_slice(&trial);
        grad.copy_from_slice(&new_grad);
        value = new_value;
        values.push(value);
    }

    let grad_norm = norm(&grad);
    Ok(MinimizeResult {
        x,
        value,
        grad_norm,
        iterations: opts.max_iter,
        converged: false,
        values,
    })
}
