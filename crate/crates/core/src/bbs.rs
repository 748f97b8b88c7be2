//! Best-backward-solution fit of `(λ, γ)`.
//!
//! The SIR system is pinned to the last observation `(N - T̃(t_n), Ĩ(t_n), R̃(t_n))`, integrated
//! backward over the trailing `s` days, and the squared deviations of cumulative infected and
//! removed from the observations are minimized with the simplex method.

use serde::Serialize;

use crate::epi_data::EpidemicSeries;
use crate::error::{precondition, Result};
use crate::optimizer::{minimize_restarted, OptResult, SimplexConfig, MAX_RESTARTS};
use crate::scalar::Scalar;
use crate::sir_core::{difference_estimates, integrate, rolling_mean, SirParams, SirState, DEFAULT_DT};

pub const DEFAULT_WINDOW: usize = 7;
/// Window of the rolling mean that seeds the simplex.
pub const INITIAL_GUESS_WINDOW: usize = 7;

const START_BACKOFFS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbsConfig<T> {
    /// Trailing window `s`, in days.
    pub window: usize,
    /// Assumed total population `N`.
    pub population: T,
    pub dt: T,
    pub simplex: SimplexConfig<T>,
}

impl<T: Scalar> BbsConfig<T> {
    pub fn new(population: T) -> Self {
        Self { window: DEFAULT_WINDOW, population, dt: T::lit(DEFAULT_DT), simplex: SimplexConfig::default() }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.simplex.tolerance = epsilon;
        self
    }
}

/// Which compartment the first squared term compares; both give the same value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deviation {
    /// `(T - T̃)² + (R - R̃)²`
    CumulativeInfected,
    /// `(S - S̃)² + (R - R̃)²`
    Susceptible,
}

fn check_window<T: Scalar>(series: &EpidemicSeries<T>, config: &BbsConfig<T>) -> Result<()> {
    if config.window == 0 {
        return precondition("window must be at least one day");
    }
    if series.len() < config.window + 1 {
        return precondition(format!(
            "window of {} days needs at least {} observations, found {}",
            config.window,
            config.window + 1,
            series.len()
        ));
    }
    let max_t = series.max_cum_infected();
    if !(config.population >= max_t) {
        return precondition(format!("population {} below cumulative infected {max_t}", config.population));
    }
    if !(series.active_at(series.len() - 1) > T::zero()) {
        return precondition("no active infections on the last observed day");
    }
    Ok(())
}

/// `E(n, s)`; `+∞` when the backward run leaves the feasible region.
pub fn bbs_objective<T: Scalar>(params: &SirParams<T>, series: &EpidemicSeries<T>, config: &BbsConfig<T>) -> Result<T> {
    bbs_objective_with(params, series, config, Deviation::CumulativeInfected)
}

pub fn bbs_objective_with<T: Scalar>(
    params: &SirParams<T>,
    series: &EpidemicSeries<T>,
    config: &BbsConfig<T>,
    form: Deviation,
) -> Result<T> {
    check_window(series, config)?;
    Ok(objective_unchecked(params, series, config, form))
}

fn objective_unchecked<T: Scalar>(
    params: &SirParams<T>,
    series: &EpidemicSeries<T>,
    config: &BbsConfig<T>,
    form: Deviation,
) -> T {
    let n = series.len() - 1;
    let cum_t = series.cum_infected();
    let cum_r = series.cum_removed();
    let terminal = SirState::new(config.population - cum_t[n], cum_t[n] - cum_r[n], cum_r[n]);
    let t_end = T::lit(series.day(n) as f64);
    let t_start = T::lit(series.day(n - config.window) as f64);
    let Ok(traj) = integrate(terminal, *params, t_end, t_start, config.dt) else {
        return T::infinity();
    };
    // traj.states[j] is day n - j
    let mut e = T::zero();
    for (j, st) in traj.states.iter().enumerate() {
        let idx = n - j;
        let first = match form {
            Deviation::CumulativeInfected => st.cum_infected() - cum_t[idx],
            Deviation::Susceptible => st.s - (config.population - cum_t[idx]),
        };
        let second = st.r - cum_r[idx];
        e = e + first * first + second * second;
    }
    if e.is_finite() {
        e
    } else {
        T::infinity()
    }
}

/// Seed for the simplex: trailing mean of the difference estimates ending the day before the
/// last observation. Zero rates are lifted to a negligible positive value so they have a log.
pub fn initial_guess<T: Scalar>(series: &EpidemicSeries<T>, population: T) -> Result<SirParams<T>> {
    let est = difference_estimates(series, population)?;
    let lambdas: Vec<Option<T>> = est.iter().map(|e| e.lambda).collect();
    let gammas: Vec<Option<T>> = est.iter().map(|e| e.gamma).collect();
    let lambda = rolling_mean(&lambdas, INITIAL_GUESS_WINDOW)?.last().copied().flatten();
    let gamma = rolling_mean(&gammas, INITIAL_GUESS_WINDOW)?.last().copied().flatten();
    let (Some(lambda), Some(gamma)) = (lambda, gamma) else {
        return precondition("no defined difference estimate to start from (no active infections)");
    };
    let tiny = T::lit(1e-8);
    SirParams::new(lambda.max(tiny / population), gamma.max(tiny))
}

/// Fits `(λ, γ)` by minimizing [`bbs_objective`] over `(log λ, log γ)`.
pub fn fit_bbs<T: Scalar>(series: &EpidemicSeries<T>, config: &BbsConfig<T>) -> Result<(SirParams<T>, OptResult<T>)> {
    check_window(series, config)?;
    let start = initial_guess(series, config.population)?;
    let objective = |x: &[T]| {
        let params = SirParams { lambda: x[0].exp(), gamma: x[1].exp() };
        if !params.lambda.is_finite() || !params.gamma.is_finite() {
            return T::infinity();
        }
        objective_unchecked(&params, series, config, Deviation::CumulativeInfected)
    };
    // a guess whose backward run leaves the feasible region is backed off toward smaller λ
    let mut x0 = [start.lambda.ln(), start.gamma.ln()];
    for _ in 0..START_BACKOFFS {
        if objective(&x0).is_finite() {
            break;
        }
        x0[0] = x0[0] - T::LN_2();
    }
    let opt = minimize_restarted(objective, &x0, &config.simplex, MAX_RESTARTS)?;
    let params = SirParams::new(opt.argmin[0].exp(), opt.argmin[1].exp())?;
    Ok((params, opt))
}

/// Serializable summary of a backward fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BbsFitReport<T> {
    pub lambda: T,
    pub gamma: T,
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
    pub window_s: usize,
    #[serde(rename = "N")]
    pub population: T,
}

impl<T: Scalar> BbsFitReport<T> {
    pub fn new(params: &SirParams<T>, opt: &OptResult<T>, config: &BbsConfig<T>) -> Self {
        Self {
            lambda: params.lambda,
            gamma: params.gamma,
            objective: opt.value,
            iterations: opt.iterations,
            converged: opt.converged,
            window_s: config.window,
            population: config.population,
        }
    }
}
