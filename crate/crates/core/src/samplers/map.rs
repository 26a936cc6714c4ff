//! Maximum a posteriori estimation by damped Newton iterations.

use nalgebra::{Cholesky, DVector};

use crate::data::Dataset;
use crate::error::Result;
use crate::models::Model;
use crate::Theta;

const MAX_ITER: usize = 500;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub theta: Theta,
    /// False when the gradient tolerance was not reached; `theta` is then
    /// the best iterate found.
    pub converged: bool,
    pub iterations: usize,
    pub grad_inf_norm: f64,
}

/// Maximises the log posterior until ‖∇‖∞ < `tolerance`.
///
/// Newton steps are used while the negative Hessian is positive definite,
/// plain gradient steps otherwise; both are shortened by backtracking until
/// the log posterior increases.
pub fn find_map(model: &Model, data: &Dataset, theta_init: &Theta, tolerance: f64) -> Result<MapResult> {
    model.validate(data)?;
    model.check_theta(data, theta_init.as_slice())?;
    let mut theta = theta_init.clone();
    let (mut value, mut grad, mut hess) = model.log_posterior_derivatives(data, theta.as_slice());
    let mut iterations = 0;
    while iterations < MAX_ITER {
        let gnorm = grad.amax();
        if gnorm < tolerance {
            return Ok(MapResult {
                theta,
                converged: true,
                iterations,
                grad_inf_norm: gnorm,
            });
        }
        iterations += 1;
        let neg_h = -&hess;
        let (direction, newton) = match Cholesky::new(neg_h) {
            Some(ch) => (ch.solve(&grad), true),
            None => (grad.clone() / grad.norm().max(1.0), false),
        };
        match line_search(model, data, &theta, value, &grad, &direction) {
            Some((next, next_value)) => {
                theta = next;
                value = next_value;
                let d = model.log_posterior_derivatives(data, theta.as_slice());
                grad = d.1;
                hess = d.2;
            }
            None if newton => {
                // the Newton direction failed to improve; retry along the gradient
                let g_dir = grad.clone() / grad.norm().max(1.0);
                match line_search(model, data, &theta, value, &grad, &g_dir) {
                    Some((next, next_value)) => {
                        theta = next;
                        value = next_value;
                        let d = model.log_posterior_derivatives(data, theta.as_slice());
                        grad = d.1;
                        hess = d.2;
                    }
                    None => break,
                }
            }
            None => break,
        }
    }
    let gnorm = grad.amax();
    let converged = gnorm < tolerance;
    if !converged {
        log::warn!("MAP search stopped after {iterations} iterations with gradient norm {gnorm:e}");
    }
    Ok(MapResult {
        theta,
        converged,
        iterations,
        grad_inf_norm: gnorm,
    })
}

/// Backtracking along `direction`; returns the first point that increases
/// the objective.
fn line_search(
    model: &Model,
    data: &Dataset,
    theta: &Theta,
    value: f64,
    grad: &DVector<f64>,
    direction: &DVector<f64>,
) -> Option<(Theta, f64)> {
    let slope = grad.dot(direction);
    if !(slope > 0.0) {
        return None;
    }
    let mut step = 1.0;
    for _ in 0..MAX_HALVINGS {
        let candidate = theta + direction * step;
        if candidate.iter().all(|v| v.is_finite()) {
            let v = model.log_posterior(data, candidate.as_slice());
            if v.is_finite() && v >= value + 1e-4 * step * slope {
                return Some((candidate, v));
            }
            // accept an exact tie near the optimum, where round-off hides the increase
            if v.is_finite() && v >= value && step * slope < 1e-12 * (1.0 + value.abs()) {
                return Some((candidate, v));
            }
        }
        step *= 0.5;
    }
    None
}
