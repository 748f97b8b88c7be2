//! The SIR compartment model: right-hand side, RK4 trajectories in either time direction,
//! reproduction numbers and the day-to-day difference estimators of the rates.

use std::io::Write;

use crate::epi_data::EpidemicSeries;
use crate::error::{precondition, Error, Result};
use crate::ode::{rk4_step, substeps};
use crate::scalar::Scalar;

/// Default RK4 step, in days.
pub const DEFAULT_DT: f64 = 0.05;

/// Infection rate `lambda` (per person per day) and removal rate `gamma` (per day).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirParams<T> {
    pub lambda: T,
    pub gamma: T,
}

impl<T: Scalar> SirParams<T> {
    pub fn new(lambda: T, gamma: T) -> Result<Self> {
        if !(lambda >= T::zero() && gamma >= T::zero()) || !lambda.is_finite() || !gamma.is_finite() {
            return precondition(format!("rates must be finite and non-negative (lambda {lambda}, gamma {gamma})"));
        }
        Ok(Self { lambda, gamma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirState<T> {
    pub s: T,
    pub i: T,
    pub r: T,
}

impl<T: Scalar> SirState<T> {
    pub fn new(s: T, i: T, r: T) -> Self {
        Self { s, i, r }
    }

    pub fn total(&self) -> T {
        self.s + self.i + self.r
    }

    /// Cumulative infected `T = I + R`.
    pub fn cum_infected(&self) -> T {
        self.i + self.r
    }

    fn to_array(self) -> [T; 3] {
        [self.s, self.i, self.r]
    }

    fn from_array(x: [T; 3]) -> Self {
        Self { s: x[0], i: x[1], r: x[2] }
    }

    fn clamped(self) -> Self {
        let z = T::zero();
        Self { s: self.s.max(z), i: self.i.max(z), r: self.r.max(z) }
    }
}

/// `(dS/dt, dI/dt, dR/dt) = (-λSI, λSI - γI, γI)`.
#[inline]
pub fn sir_rhs<T: Scalar>(state: &SirState<T>, params: &SirParams<T>) -> (T, T, T) {
    let infection = params.lambda * state.s * state.i;
    let removal = params.gamma * state.i;
    (-infection, infection - removal, removal)
}

/// States sampled at `t0`, every whole day strictly between `t0` and `t1`, and `t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SirTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<SirState<T>>,
    pub params: SirParams<T>,
}

impl<T: Scalar> SirTrajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &SirState<T> {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn state_at(&self, t: T) -> Option<&SirState<T>> {
        let tol = T::lit(1e-9);
        self.times.iter().position(|&x| (x - t).abs() <= tol).map(|i| &self.states[i])
    }

    pub fn cum_infected(&self) -> Vec<T> {
        self.states.iter().map(SirState::cum_infected).collect()
    }

    /// CSV with columns `t,S,I,R,T`, floats at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,S,I,R,T")?;
        for (t, st) in self.times.iter().zip(&self.states) {
            writeln!(w, "{},{},{},{},{}", fmt17(*t), fmt17(st.s), fmt17(st.i), fmt17(st.r), fmt17(st.cum_infected()))?;
        }
        Ok(())
    }
}

/// Formats a value with 17 significant digits.
pub fn fmt17<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

fn sample_times<T: Scalar>(t0: T, t1: T) -> Vec<T> {
    let mut times = vec![t0];
    if t1 > t0 {
        let mut d = t0.floor() + T::one();
        while d < t1 {
            times.push(d);
            d = d + T::one();
        }
    } else {
        let mut d = t0.ceil() - T::one();
        while d > t1 {
            times.push(d);
            d = d - T::one();
        }
    }
    times.push(t1);
    times
}

/// Integrates the SIR system from `t0` to `t1` (backward when `t1 < t0`) with RK4 substeps of
/// at most `dt` days.
///
/// A component falling below `-1e-9·N` or becoming non-finite aborts the run; smaller
/// excursions are clamped to zero in the reported states.
pub fn integrate<T: Scalar>(
    initial: SirState<T>,
    params: SirParams<T>,
    t0: T,
    t1: T,
    dt: T,
) -> Result<SirTrajectory<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return precondition(format!("step size must be positive, got {dt}"));
    }
    if t1 == t0 || !t0.is_finite() || !t1.is_finite() {
        return precondition(format!("integration interval [{t0}, {t1}] is empty or not finite"));
    }
    let population = initial.total();
    let floor = -(T::guard_rel() * population.abs().max(T::one()));
    let rhs = |x: &[T; 3]| {
        let (ds, di, dr) = sir_rhs(&SirState::from_array(*x), &params);
        [ds, di, dr]
    };

    let times = sample_times(t0, t1);
    let mut states = Vec::with_capacity(times.len());
    states.push(initial.clamped());
    let mut x = initial.to_array();
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = substeps(b - a, dt);
        let h = (b - a) / T::from_usize(n).unwrap();
        for k in 0..n {
            x = rk4_step(&rhs, &x, h);
            let t = a + h * T::from_usize(k + 1).unwrap();
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration { time: t.to_f64_lossy(), reason: "non-finite state".into() });
            }
            if x.iter().any(|&v| v < floor) {
                return Err(Error::Integration {
                    time: t.to_f64_lossy(),
                    reason: format!("negative state (S, I, R) = ({}, {}, {})", x[0], x[1], x[2]),
                });
            }
        }
        states.push(SirState::from_array(x).clamped());
    }
    Ok(SirTrajectory { times, states, params })
}

/// `R0 = λ S(0) / γ`.
pub fn basic_reproduction_number<T: Scalar>(params: &SirParams<T>, s0: T) -> Result<T> {
    if !(params.gamma > T::zero()) {
        return precondition("removal rate must be positive for R0");
    }
    Ok(params.lambda * s0 / params.gamma)
}

/// `Rc(t) = λ(t) S(t) / γ(t)`.
pub fn current_reproduction_number<T: Scalar>(lambda_t: T, gamma_t: T, s_t: T) -> Result<T> {
    if !(gamma_t > T::zero()) {
        return precondition("removal rate must be positive for Rc");
    }
    Ok(lambda_t * s_t / gamma_t)
}

/// Rates estimated from one day to the next; `None` where the estimator is undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate<T> {
    pub day: i64,
    pub lambda: Option<T>,
    pub gamma: Option<T>,
}

/// Difference estimators on consecutive days `t, t+1` for every day but the last:
/// `λ(t) = (S(t) - S(t+1)) / (S(t) I(t))`, `γ(t) = (R(t+1) - R(t)) / I(t)`.
pub fn difference_estimates<T: Scalar>(series: &EpidemicSeries<T>, population: T) -> Result<Vec<RateEstimate<T>>> {
    if series.len() < 2 {
        return precondition("difference estimates need at least two days");
    }
    let s = series.susceptible_series(population)?;
    let r = series.cum_removed();
    Ok((0..series.len() - 1)
        .map(|t| {
            let i = series.active_at(t);
            let positive = i > T::zero();
            let lambda = (positive && s[t] > T::zero()).then(|| (s[t] - s[t + 1]) / (s[t] * i));
            let gamma = positive.then(|| (r[t + 1] - r[t]) / i);
            RateEstimate { day: series.day(t), lambda, gamma }
        })
        .collect())
}

/// Trailing mean over the last `window` positions, skipping undefined entries.
pub fn rolling_mean<T: Scalar>(values: &[Option<T>], window: usize) -> Result<Vec<Option<T>>> {
    if window == 0 {
        return precondition("rolling window must be at least one day");
    }
    Ok((0..values.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            let defined: Vec<T> = values[lo..=i].iter().flatten().copied().collect();
            (!defined.is_empty()).then(|| defined.iter().copied().sum::<T>() / T::from_usize(defined.len()).unwrap())
        })
        .collect())
}
