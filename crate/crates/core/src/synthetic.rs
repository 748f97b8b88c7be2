//! Synthetic epidemics for desk-scale experiments: SIR trajectories or GLD curves turned into
//! daily integer counts in the ingestion format.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::epi_data::{DailyRecord, EpidemicSeries};
use crate::error::{precondition, Result};
use crate::gld::GldParams;
use crate::ode::integrate_to;
use crate::scalar::Scalar;
use crate::sir_core::{integrate, SirParams, SirState};

/// How model curves become counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    /// Cumulative curves are rounded, so daily counts sum exactly to the rounded curve.
    None,
    /// Daily counts are Poisson draws around the model's daily increments.
    Poisson,
}

/// An SIR epidemic started at `t = 0` from `(N - I0, I0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirScenario<T> {
    pub population: T,
    pub params: SirParams<T>,
    pub initial_infected: T,
}

impl<T: Scalar> SirScenario<T> {
    /// Cumulative infected and removed at the end of days `1..=days`.
    pub fn curves(&self, days: usize, dt: T) -> Result<(Vec<T>, Vec<T>)> {
        if days == 0 {
            return precondition("need at least one day");
        }
        if !(self.initial_infected > T::zero() && self.initial_infected <= self.population) {
            return precondition("initial infected must lie in (0, N]");
        }
        let init = SirState::new(self.population - self.initial_infected, self.initial_infected, T::zero());
        let traj = integrate(init, self.params, T::zero(), T::from_usize(days).unwrap(), dt)?;
        let t = traj.states[1..].iter().map(SirState::cum_infected).collect();
        let r = traj.states[1..].iter().map(|s| s.r).collect();
        Ok((t, r))
    }

    pub fn series(&self, days: usize, dt: T) -> Result<EpidemicSeries<T>> {
        let (t, r) = self.curves(days, dt)?;
        Ok(EpidemicSeries::from_cumulative(1, t, r)?)
    }
}

/// Cumulative infected `N·F(t)` from a GLD, with removals flowing out of the active pool at
/// rate `removal_rate`: `dR/dt = γ (T(t) - R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GldScenario<T> {
    pub final_size: T,
    pub params: GldParams<T>,
    pub removal_rate: T,
}

impl<T: Scalar> GldScenario<T> {
    pub fn curves(&self, days: usize, dt: T) -> Result<(Vec<T>, Vec<T>)> {
        if days == 0 {
            return precondition("need at least one day");
        }
        if !(self.final_size > T::zero() && self.removal_rate >= T::zero()) {
            return precondition("final size must be positive and removal rate non-negative");
        }
        let (n, p, g) = (self.final_size, self.params, self.removal_rate);
        // state (t, R); start far enough in the past that nothing has happened yet
        let rhs = |x: &[T; 2]| [T::one(), g * (n * p.cdf(x[0]) - x[1])];
        let start = (p.quantile(T::lit(1e-12)) - T::one()).floor().min(T::zero());
        let mut state = [start, T::zero()];
        if start < T::zero() {
            state = integrate_to(&rhs, state, start, T::zero(), dt);
        }
        let (mut cum_t, mut cum_r) = (Vec::with_capacity(days), Vec::with_capacity(days));
        for d in 1..=days {
            let day = T::from_usize(d).unwrap();
            state = integrate_to(&rhs, state, day - T::one(), day, dt);
            let t = n * p.cdf(day);
            cum_t.push(t);
            cum_r.push(state[1].max(T::zero()).min(t));
        }
        Ok((cum_t, cum_r))
    }

    pub fn series(&self, days: usize, dt: T) -> Result<EpidemicSeries<T>> {
        let (t, r) = self.curves(days, dt)?;
        Ok(EpidemicSeries::from_cumulative(1, t, r)?)
    }
}

/// Converts cumulative curves into daily records. A fraction `death_fraction` of removals is
/// reported as deaths, the rest as recoveries.
pub fn to_records<T: Scalar>(
    cum_infected: &[T],
    cum_removed: &[T],
    death_fraction: f64,
    noise: Noise,
    seed: u64,
) -> Result<Vec<DailyRecord>> {
    if cum_infected.len() != cum_removed.len() {
        return precondition("curve lengths differ");
    }
    if !(0.0..=1.0).contains(&death_fraction) {
        return precondition("death fraction must lie in [0, 1]");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cum_infected.len());
    let (mut prev_t, mut prev_r) = (0.0f64, 0.0f64);
    let (mut ct, mut cr, mut cd) = (0u64, 0u64, 0u64);
    for (i, (&t, &r)) in cum_infected.iter().zip(cum_removed).enumerate() {
        let (t, r) = (t.to_f64_lossy(), r.to_f64_lossy());
        let (new_t, new_r) = match noise {
            Noise::None => {
                let t_round = t.round().max(ct as f64) as u64;
                let r_round = (r.round() as u64).clamp(cr, t_round);
                (t_round - ct, r_round - cr)
            }
            Noise::Poisson => {
                let new_t = poisson(&mut rng, t - prev_t);
                let new_r = poisson(&mut rng, r - prev_r).min(ct + new_t - cr);
                (new_t, new_r)
            }
        };
        prev_t = t;
        prev_r = r;
        ct += new_t;
        cr += new_r;
        let new_d = match noise {
            Noise::None => {
                let d = (death_fraction * cr as f64).floor() as u64;
                let inc = d.saturating_sub(cd);
                cd += inc;
                inc
            }
            Noise::Poisson => {
                let inc = if new_r == 0 || death_fraction == 0.0 {
                    0
                } else {
                    Binomial::new(new_r, death_fraction).expect("valid binomial").sample(&mut rng)
                };
                cd += inc;
                inc
            }
        };
        out.push(DailyRecord {
            day_index: i as i64 + 1,
            new_infected: new_t,
            new_died: new_d,
            new_recovered: new_r - new_d,
        });
    }
    Ok(out)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}
