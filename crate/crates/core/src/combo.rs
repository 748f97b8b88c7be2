//! L-plots for both models, detection of a stable final-size estimate, and the combined
//! forecast that hands the GLD final size to the SIR fit as its population `N`.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::bbs::{fit_bbs, BbsConfig, DEFAULT_WINDOW};
use crate::epi_data::EpidemicSeries;
use crate::error::{precondition, Error, Result};
use crate::gld::{final_size_estimate, fit_mle_with, GldParams};
use crate::optimizer::{OptResult, SimplexConfig};
use crate::scalar::Scalar;
use crate::sir_core::{fmt17, integrate, SirParams, SirState, SirTrajectory, DEFAULT_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Gld,
    Sir,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Gld => "GLD",
            Model::Sir => "SIR",
        })
    }
}

/// Day at which the cumulative count is evaluated; `Infinity` means the final size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalDay<T> {
    Day(T),
    Infinity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LPlotPoint<T> {
    pub truncation_day: i64,
    /// `None` when the fit at this truncation failed.
    pub estimate: Option<T>,
    pub failure: Option<String>,
}

impl<T> LPlotPoint<T> {
    pub fn ok(&self) -> bool {
        self.estimate.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LPlotSeries<T> {
    pub model: Model,
    pub t_conv: EvalDay<T>,
    pub points: Vec<LPlotPoint<T>>,
}

impl<T: Scalar> LPlotSeries<T> {
    pub fn successful(&self) -> impl Iterator<Item = (i64, T)> + '_ {
        self.points.iter().filter_map(|p| p.estimate.map(|e| (p.truncation_day, e)))
    }

    pub fn estimate_at(&self, day: i64) -> Option<T> {
        self.points.iter().find(|p| p.truncation_day == day).and_then(|p| p.estimate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LPlotConfig<T> {
    /// First truncation day; `None` picks day 10 of the series or the first day with
    /// `T̃ >= 20`, whichever is later.
    pub first_truncation: Option<i64>,
    /// Last truncation day; `None` uses the last observed day.
    pub last_truncation: Option<i64>,
    /// Run the independent per-truncation fits on the rayon pool.
    pub parallel: bool,
    pub window: usize,
    pub dt: T,
    /// Simplex tolerance for both model fits.
    pub tolerance: T,
}

impl<T: Scalar> Default for LPlotConfig<T> {
    fn default() -> Self {
        Self {
            first_truncation: None,
            last_truncation: None,
            parallel: false,
            window: DEFAULT_WINDOW,
            dt: T::lit(DEFAULT_DT),
            tolerance: SimplexConfig::<T>::default().tolerance,
        }
    }
}

impl<T: Scalar> LPlotConfig<T> {
    fn bbs(&self, population: T) -> BbsConfig<T> {
        let mut bbs = BbsConfig::new(population).with_window(self.window).with_epsilon(self.tolerance);
        bbs.dt = self.dt;
        bbs
    }
}

pub const MIN_FIT_DAYS: i64 = 10;
pub const MIN_FIT_COUNT: f64 = 20.0;

pub fn default_first_truncation<T: Scalar>(series: &EpidemicSeries<T>) -> i64 {
    let by_days = series.first_day() + MIN_FIT_DAYS - 1;
    let by_count = series
        .cum_infected()
        .iter()
        .position(|&t| t >= T::lit(MIN_FIT_COUNT))
        .map(|i| series.day(i))
        .unwrap_or(i64::MAX);
    by_days.max(by_count)
}

fn truncation_days<T: Scalar>(series: &EpidemicSeries<T>, config: &LPlotConfig<T>) -> Result<Vec<i64>> {
    let first = config.first_truncation.unwrap_or_else(|| default_first_truncation(series)).max(series.first_day());
    let last = config.last_truncation.unwrap_or(series.last_day()).min(series.last_day());
    if first > last {
        return precondition(format!("no truncation days: first {first} is after last {last}"));
    }
    Ok((first..=last).collect())
}

fn run_points<T, F>(days: &[i64], parallel: bool, fit: F) -> Vec<LPlotPoint<T>>
where
    T: Scalar,
    F: Fn(i64) -> Result<T> + Sync,
{
    let point = |&day: &i64| match fit(day) {
        Ok(v) => LPlotPoint { truncation_day: day, estimate: Some(v), failure: None },
        Err(e) => LPlotPoint { truncation_day: day, estimate: None, failure: Some(e.to_string()) },
    };
    if parallel {
        days.par_iter().map(point).collect()
    } else {
        days.iter().map(point).collect()
    }
}

fn finish<T: Scalar>(model: Model, t_conv: EvalDay<T>, points: Vec<LPlotPoint<T>>) -> Result<LPlotSeries<T>> {
    if points.iter().all(|p| !p.ok()) {
        return Err(Error::AllFitsFailed);
    }
    Ok(LPlotSeries { model, t_conv, points })
}

/// Fits the GLD to the data up to `t` and evaluates `N̂·F(t_conv)` (or `N̂` itself), where
/// `N̂ = T̃(t)/F(t)`.
pub fn gld_estimate<T: Scalar>(
    series: &EpidemicSeries<T>,
    day: i64,
    t_conv: EvalDay<T>,
    config: &LPlotConfig<T>,
) -> Result<(T, GldParams<T>)> {
    let sub = series.truncated(day)?;
    let simplex = SimplexConfig::default().with_tolerance(config.tolerance);
    let (params, opt) = fit_mle_with(&sub.grouped_counts(), &simplex)?;
    if !opt.converged {
        return Err(Error::Undefined(format!("GLD fit at day {day} did not converge")));
    }
    let observed = *sub.cum_infected().last().unwrap();
    let n_hat = final_size_estimate(observed, T::lit(day as f64), &params)?;
    let value = match t_conv {
        EvalDay::Infinity => n_hat,
        EvalDay::Day(tc) => n_hat * params.cdf(tc),
    };
    Ok((value, params))
}

pub fn lplot_gld<T: Scalar>(
    series: &EpidemicSeries<T>,
    t_conv: EvalDay<T>,
    config: &LPlotConfig<T>,
) -> Result<LPlotSeries<T>> {
    let days = truncation_days(series, config)?;
    let points = run_points(&days, config.parallel, |day| gld_estimate(series, day, t_conv, config).map(|(v, _)| v));
    finish(Model::Gld, t_conv, points)
}

/// Fits the SIR by the backward method on the data up to `t` with population `N`, then
/// integrates from the day-`t` observation to `t_conv` and reports `T(t_conv)`.
pub fn sir_estimate<T: Scalar>(
    series: &EpidemicSeries<T>,
    day: i64,
    t_conv: T,
    population: T,
    config: &LPlotConfig<T>,
) -> Result<(T, SirParams<T>)> {
    let sub = series.truncated(day)?;
    let bbs = config.bbs(population);
    let (params, opt) = fit_bbs(&sub, &bbs)?;
    if !opt.converged {
        return Err(Error::Undefined(format!("SIR fit at day {day} did not converge")));
    }
    let n = sub.len() - 1;
    let start = SirState::new(population - sub.cum_infected()[n], sub.active_at(n), sub.cum_removed()[n]);
    let t_day = T::lit(day as f64);
    if t_conv == t_day {
        return Ok((start.cum_infected(), params));
    }
    let traj = integrate(start, params, t_day, t_conv, config.dt)?;
    Ok((traj.last().cum_infected(), params))
}

pub fn lplot_sir<T: Scalar>(
    series: &EpidemicSeries<T>,
    t_conv: T,
    population: T,
    config: &LPlotConfig<T>,
) -> Result<LPlotSeries<T>> {
    let days = truncation_days(series, config)?;
    let points =
        run_points(&days, config.parallel, |day| sir_estimate(series, day, t_conv, population, config).map(|(v, _)| v));
    finish(Model::Sir, EvalDay::Day(t_conv), points)
}

/// CSV `truncation_day,estimate,model,status`; failed points have an empty estimate.
pub fn write_lplot_csv<T: Scalar, W: Write>(plots: &[&LPlotSeries<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "truncation_day,estimate,model,status")?;
    for plot in plots {
        for p in &plot.points {
            match p.estimate {
                Some(v) => writeln!(w, "{},{},{},ok", p.truncation_day, fmt17(v), plot.model)?,
                None => writeln!(w, "{},,{},failed", p.truncation_day, plot.model)?,
            }
        }
    }
    Ok(())
}

/// Stabilization rule: the trailing `window` successful estimates all lie within
/// `±band` (relative) of their median.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityRule<T> {
    pub window: usize,
    pub band: T,
}

impl<T: Scalar> Default for StabilityRule<T> {
    fn default() -> Self {
        Self { window: 5, band: T::lit(0.02) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinalSize<T> {
    pub n_hat: T,
    pub stabilization_day: i64,
}

fn median<T: Scalar>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / T::lit(2.0)
    }
}

/// First truncation day at which the rule holds, with the window median as `N̂`.
pub fn estimate_n<T: Scalar>(lplot: &LPlotSeries<T>, rule: &StabilityRule<T>) -> Option<FinalSize<T>> {
    if rule.window == 0 {
        return None;
    }
    let ok: Vec<(i64, T)> = lplot.successful().collect();
    ok.windows(rule.window).find_map(|w| {
        let values: Vec<T> = w.iter().map(|&(_, v)| v).collect();
        let med = median(&values);
        let stable = med > T::zero() && values.iter().all(|&v| (v - med).abs() <= rule.band * med);
        stable.then(|| FinalSize { n_hat: med, stabilization_day: w[rule.window - 1].0 })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComboConfig<T: Scalar> {
    pub lplot: LPlotConfig<T>,
    pub stability: StabilityRule<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedForecast<T> {
    pub n_hat: T,
    /// `None` when `N` was supplied by the caller.
    pub stabilization_day: Option<i64>,
    pub sir_params: SirParams<T>,
    pub fit: OptResult<T>,
    /// Forward run from the last observation; `times[0]` is the last observed day.
    pub trajectory: SirTrajectory<T>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForecastHeader<T> {
    #[serde(rename = "N_hat")]
    pub n_hat: T,
    pub lambda: T,
    pub gamma: T,
    pub stabilization_day: Option<i64>,
}

impl<T: Scalar> CombinedForecast<T> {
    pub fn header(&self) -> ForecastHeader<T> {
        ForecastHeader {
            n_hat: self.n_hat,
            lambda: self.sir_params.lambda,
            gamma: self.sir_params.gamma,
            stabilization_day: self.stabilization_day,
        }
    }
}

/// Final size from a GLD L-plot of the whole series (`t_conv = ∞`).
pub fn gld_final_size<T: Scalar>(series: &EpidemicSeries<T>, config: &ComboConfig<T>) -> Result<FinalSize<T>> {
    let plot = lplot_gld(series, EvalDay::Infinity, &config.lplot)?;
    estimate_n(&plot, &config.stability)
        .ok_or_else(|| Error::Undefined("GLD final-size estimates never stabilized".into()))
}

/// GLD final size (or `population_override`) → backward SIR fit with that `N` → forward run
/// of `horizon` days from the last observation.
pub fn combined_forecast<T: Scalar>(
    series: &EpidemicSeries<T>,
    horizon: usize,
    population_override: Option<T>,
    config: &ComboConfig<T>,
) -> Result<CombinedForecast<T>> {
    let (n_hat, stabilization_day) = match population_override {
        Some(n) => (n, None),
        None => {
            let fs = gld_final_size(series, config)?;
            (fs.n_hat, Some(fs.stabilization_day))
        }
    };
    let bbs = config.lplot.bbs(n_hat);
    let (sir_params, fit) = fit_bbs(series, &bbs)?;
    let n = series.len() - 1;
    let start = SirState::new(n_hat - series.cum_infected()[n], series.active_at(n), series.cum_removed()[n]);
    let t0 = T::lit(series.last_day() as f64);
    let trajectory = if horizon == 0 {
        SirTrajectory { times: vec![t0], states: vec![start], params: sir_params }
    } else {
        integrate(start, sir_params, t0, t0 + T::from_usize(horizon).unwrap(), config.lplot.dt)?
    };
    Ok(CombinedForecast { n_hat, stabilization_day, sir_params, fit, trajectory, horizon })
}
