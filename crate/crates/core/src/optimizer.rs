//! Nelder–Mead downhill simplex for small, possibly non-smooth objectives.
//!
//! Objectives may return `+∞` (or NaN, treated the same) to mark infeasible points; such
//! vertices rank worst and are contracted away.

use std::cmp::Ordering;

use crate::error::{precondition, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexConfig<T> {
    pub reflection: T,
    pub expansion: T,
    pub contraction: T,
    pub shrink: T,
    /// Convergence threshold on objective change, relative to `1 + |f_best|`. Applies both to
    /// the spread across the simplex and to the best value's improvement over the last
    /// `4(n + 1)` iterations.
    pub tolerance: T,
    pub max_iterations: usize,
}

impl<T: Scalar> Default for SimplexConfig<T> {
    fn default() -> Self {
        Self {
            reflection: T::one(),
            expansion: T::lit(2.0),
            contraction: T::lit(0.5),
            shrink: T::lit(0.5),
            tolerance: T::lit(1e-10),
            max_iterations: 5000,
        }
    }
}

impl<T: Scalar> SimplexConfig<T> {
    pub fn with_tolerance(mut self, tolerance: T) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (z, one) = (T::zero(), T::one());
        if !(self.reflection > z) {
            return precondition("reflection coefficient must be positive");
        }
        if !(self.expansion > one) {
            return precondition("expansion coefficient must exceed 1");
        }
        if !(self.contraction > z && self.contraction < one) {
            return precondition("contraction coefficient must lie in (0, 1)");
        }
        if !(self.shrink > z && self.shrink < one) {
            return precondition("shrink coefficient must lie in (0, 1)");
        }
        if !(self.tolerance > z) {
            return precondition("tolerance must be positive");
        }
        if self.max_iterations == 0 {
            return precondition("max_iterations must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult<T> {
    pub argmin: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best vertex value at the start of each iteration, plus the final value.
    pub history: Vec<T>,
}

const STALL_ITERATIONS_PER_DIM: usize = 4;

/// Restart budget used by the model fits.
pub const MAX_RESTARTS: usize = 20;

fn rank<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Minimizes `objective` from `x0`.
///
/// The initial simplex offsets each coordinate by `max(0.05·|x0_i|, 1e-4)`. Iteration stops
/// once both the spread `f_worst - f_best` and the best value's improvement over the last
/// `4(n + 1)` iterations are within `tolerance` (floored at a few ulps of `|f_best|`), or the simplex has collapsed to
/// rounding level, or after `max_iterations` (then `converged` is false).
pub fn minimize<T, F>(mut objective: F, x0: &[T], config: &SimplexConfig<T>) -> Result<OptResult<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    config.validate()?;
    let n = x0.len();
    if n == 0 {
        return precondition("cannot minimize over zero parameters");
    }
    let mut evaluations = 0usize;
    let mut eval = |x: &[T]| {
        evaluations += 1;
        let v = objective(x);
        if v.is_nan() {
            T::infinity()
        } else {
            v
        }
    };

    let f0 = eval(x0);
    if !f0.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] = x[i] + (T::lit(0.05) * x0[i].abs()).max(T::lit(1e-4));
        let f = eval(&x);
        simplex.push((x, f));
    }

    let along = |from: &[T], to: &[T], coeff: T| -> Vec<T> {
        from.iter().zip(to).map(|(&c, &x)| c + coeff * (x - c)).collect()
    };

    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        // stable: ties keep earlier vertices first, so a flat objective keeps x0 best
        simplex.sort_by(|a, b| rank(&a.1, &b.1));
        let best = simplex[0].1;
        history.push(best);
        let lookback = history.len().saturating_sub(STALL_ITERATIONS_PER_DIM * (n + 1) + 1);
        let improvement = history[lookback] - best;
        if has_converged(&simplex, config.tolerance, improvement) {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![T::zero(); n];
        for (x, _) in &simplex[..n] {
            for (c, &v) in centroid.iter_mut().zip(x) {
                *c = *c + v;
            }
        }
        let count = T::from_usize(n).unwrap();
        centroid.iter_mut().for_each(|c| *c = *c / count);

        let worst = simplex[n].1;
        let second_worst = simplex[n - 1].1;
        let xr = along(&centroid, &simplex[n].0, -config.reflection);
        let fr = eval(&xr);

        if fr < best {
            let xe = along(&centroid, &xr, config.expansion);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[n] = (xr, fr);
            continue;
        }
        let accepted = if fr < worst {
            let xc = along(&centroid, &xr, config.contraction);
            let fc = eval(&xc);
            (fc <= fr).then_some((xc, fc))
        } else {
            let xc = along(&centroid, &simplex[n].0, config.contraction);
            let fc = eval(&xc);
            (fc < worst).then_some((xc, fc))
        };
        match accepted {
            Some(v) => simplex[n] = v,
            None => {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x = along(&anchor, &vertex.0, config.shrink);
                    let f = eval(&x);
                    *vertex = (x, f);
                }
            }
        }
    }
    if !converged {
        simplex.sort_by(|a, b| rank(&a.1, &b.1));
        history.push(simplex[0].1);
        let lookback = history.len().saturating_sub(STALL_ITERATIONS_PER_DIM * (n + 1) + 1);
        converged = has_converged(&simplex, config.tolerance, history[lookback] - simplex[0].1);
    }
    let (argmin, value) = simplex.swap_remove(0);
    Ok(OptResult { argmin, value, iterations, evaluations, converged, history })
}

/// Runs [`minimize`] and restarts it from each optimum with a fresh simplex until a restart
/// improves the value by no more than the tolerance, at most `max_restarts` times.
///
/// A single Nelder–Mead run can stall on a long, nearly flat valley; the fresh simplex picks
/// the walk back up. Counters and histories of all runs are merged; `converged` reflects the
/// last run.
pub fn minimize_restarted<T, F>(
    mut objective: F,
    x0: &[T],
    config: &SimplexConfig<T>,
    max_restarts: usize,
) -> Result<OptResult<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let mut total = minimize(&mut objective, x0, config)?;
    for _ in 0..max_restarts {
        let next = minimize(&mut objective, &total.argmin, config)?;
        let gain = total.value - next.value;
        total.iterations += next.iterations;
        total.evaluations += next.evaluations;
        total.history.extend_from_slice(&next.history);
        total.converged = next.converged;
        if next.value <= total.value {
            total.argmin = next.argmin;
            total.value = next.value;
        }
        if gain <= effective_tolerance(config.tolerance, total.value) {
            break;
        }
    }
    Ok(total)
}

/// The absolute tolerance, or the rounding level of `f` when that is coarser.
fn effective_tolerance<T: Scalar>(tolerance: T, f: T) -> T {
    tolerance.max(T::lit(8.0) * T::epsilon() * f.abs())
}

fn has_converged<T: Scalar>(sorted: &[(Vec<T>, T)], tolerance: T, improvement: T) -> bool {
    let best = sorted[0].1;
    let worst = sorted[sorted.len() - 1].1;
    let tol = effective_tolerance(tolerance, best);
    if worst.is_finite() && worst - best <= tol && improvement <= tol {
        return true;
    }
    // no representable progress left
    let scale = T::epsilon() * T::lit(4.0);
    sorted[1..]
        .iter()
        .all(|(x, _)| x.iter().zip(&sorted[0].0).all(|(&a, &b)| (a - b).abs() <= scale * (T::one() + b.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> SimplexConfig<f64> {
        SimplexConfig::default().with_tolerance(1e-16)
    }

    #[test]
    fn quadratic_minimum() {
        let res = minimize(|x: &[f64]| (x[0] - 3.0).powi(2), &[0.0], &tight()).unwrap();
        assert!(res.converged);
        assert!((res.argmin[0] - 3.0).abs() < 1e-6, "{:?} {:?} {}", res.argmin, res.history, res.iterations);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let res = minimize(f, &[-1.2, 1.0], &tight()).unwrap();
        assert!(res.converged);
        assert!(res.value < 1e-6);
        assert!((res.argmin[0] - 1.0).abs() < 1e-6 && (res.argmin[1] - 1.0).abs() < 1e-6, "{:?}", res.argmin);
    }

    #[test]
    fn constant_objective_stops_at_start() {
        let res = minimize(|_: &[f64]| 7.0, &[1.0, 2.0, 3.0], &SimplexConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.argmin, vec![1.0, 2.0, 3.0]);
        assert_eq!(res.value, 7.0);
    }

    #[test]
    fn infinite_region_is_avoided() {
        // minimum of (x-2)^2 restricted to x <= 1 by an infinite wall
        let f = |x: &[f64]| if x[0] > 1.0 { f64::INFINITY } else { (x[0] - 2.0).powi(2) };
        let res = minimize(f, &[0.0], &tight()).unwrap();
        assert!(res.value.is_finite());
        assert!((res.argmin[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn nan_start_is_an_error() {
        let err = minimize(|_: &[f64]| f64::NAN, &[0.0], &SimplexConfig::default()).unwrap_err();
        assert_eq!(err, Error::NonFiniteStart);
    }

    #[test]
    fn iteration_budget_exhaustion_is_not_an_error() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let res = minimize(f, &[-1.2, 1.0], &tight().with_max_iterations(5)).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 5);
    }

    #[test]
    fn config_validation() {
        let base = SimplexConfig::<f64>::default();
        assert!(base.validate().is_ok());
        assert!(SimplexConfig { expansion: 1.0, ..base }.validate().is_err());
        assert!(SimplexConfig { contraction: 1.0, ..base }.validate().is_err());
        assert!(SimplexConfig { shrink: 0.0, ..base }.validate().is_err());
        assert!(SimplexConfig { reflection: 0.0, ..base }.validate().is_err());
        assert!(base.with_tolerance(0.0).validate().is_err());
        assert!(minimize(|x: &[f64]| x[0], &[], &base).is_err());
    }

    #[test]
    fn three_dimensional_and_f32() {
        let f = |x: &[f32]| (x[0] - 1.0).powi(2) + (x[1] + 2.0).powi(2) + (x[2] - 0.5).powi(2);
        let res = minimize(f, &[0.0f32, 0.0, 0.0], &SimplexConfig::default()).unwrap();
        assert!(res.converged);
        assert!((res.argmin[0] - 1.0).abs() < 1e-3 && (res.argmin[1] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn restarts_merge_counters_and_never_worsen() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let single = minimize(f, &[-1.2, 1.0], &SimplexConfig::default()).unwrap();
        let multi = minimize_restarted(f, &[-1.2, 1.0], &SimplexConfig::default(), MAX_RESTARTS).unwrap();
        assert!(multi.value <= single.value);
        assert!(multi.iterations > single.iterations);
        assert!((multi.argmin[0] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn absolute_tolerance_is_floored_at_rounding() {
        assert_eq!(effective_tolerance(1e-10, 1.0), 1e-10);
        assert_eq!(effective_tolerance(1e-10, 1e9), 8.0 * f64::EPSILON * 1e9);
    }
}
