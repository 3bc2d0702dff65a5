//! Small dense BFGS with backtracking Armijo line search.

use alloc::vec::Vec;

use nalgebra::{SMatrix, SVector};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

pub(crate) struct Settings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub objective_tolerance: f64,
}

pub(crate) struct Outcome<const N: usize> {
    pub x: SVector<f64, N>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

pub(crate) fn minimize<const N: usize, F>(mut objective: F, x0: SVector<f64, N>, settings: &Settings) -> Outcome<N>
where
    F: FnMut(&SVector<f64, N>) -> (f64, SVector<f64, N>),
{
    let mut x = x0;
    let (mut value, mut grad) = objective(&x);
    let mut inv_hessian = SMatrix::<f64, N, N>::identity();
    let mut history = alloc::vec![value];
    let done = |v: f64, g: &SVector<f64, N>| v <= settings.objective_tolerance || g.norm() <= settings.gradient_tolerance;

    let mut iterations = 0;
    while iterations < settings.max_iterations && !done(value, &grad) {
        iterations += 1;
        let mut direction = -(inv_hessian * grad);
        let mut slope = grad.dot(&direction);
        if slope >= 0.0 {
            inv_hessian = SMatrix::identity();
            direction = -grad;
            slope = -grad.norm_squared();
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = x + direction * step;
            let (v, g) = objective(&candidate);
            if v.is_finite() && v <= value + ARMIJO * step * slope {
                accepted = Some((candidate, v, g));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, v_new, g_new)) = accepted else {
            // No decrease representable along the search direction.
            if inv_hessian == SMatrix::<f64, N, N>::identity() {
                break;
            }
            inv_hessian = SMatrix::identity();
            continue;
        };

        let s = x_new - x;
        let y = g_new - grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if history.len() == 1 {
                // Scale the initial approximation once curvature information exists.
                inv_hessian = SMatrix::identity() * (sy / y.norm_squared());
            }
            let rho = 1.0 / sy;
            let left = SMatrix::<f64, N, N>::identity() - s * y.transpose() * rho;
            inv_hessian = left * inv_hessian * left.transpose() + s * s.transpose() * rho;
        } else {
            inv_hessian = SMatrix::identity();
        }

        x = x_new;
        value = v_new;
        grad = g_new;
        history.push(value);
    }

    Outcome { x, iterations, converged: done(value, &grad), history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn rosenbrock() {
        let settings = Settings { max_iterations: 500, gradient_tolerance: 1e-10, objective_tolerance: 0.0 };
        let out = minimize(
            |p: &Vector2<f64>| {
                let (x, y) = (p.x, p.y);
                let v = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
                let g = Vector2::new(-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x));
                (v, g)
            },
            Vector2::new(-1.2, 1.0),
            &settings,
        );
        assert!(out.converged);
        assert!((out.x - Vector2::new(1.0, 1.0)).norm() < 1e-8);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn iteration_cap() {
        let settings = Settings { max_iterations: 2, gradient_tolerance: 1e-14, objective_tolerance: 0.0 };
        let out = minimize(
            |p: &Vector2<f64>| {
                let (x, y) = (p.x, p.y);
                ((1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2), Vector2::new(-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)))
            },
            Vector2::new(-1.2, 1.0),
            &settings,
        );
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
