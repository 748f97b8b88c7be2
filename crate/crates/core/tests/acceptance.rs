//! Acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line (visible with
//! `--nocapture`) and then asserts the same condition.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sirgld::bbs::{bbs_objective, fit_bbs, BbsConfig};
use sirgld::combo::{combined_forecast, estimate_n, lplot_gld, lplot_sir, ComboConfig, LPlotConfig, StabilityRule};
use sirgld::gld::{
    fit_mle, gld_growth, growth_to_params, logistic_growth, logistic_inflection, params_to_growth, GldParams,
    GroupedCounts, GrowthParams,
};
use sirgld::ode::integrate_to;
use sirgld::sir_core::{integrate, SirParams, SirState};
use sirgld::synthetic::{to_records, GldScenario, Noise, SirScenario};
use sirgld::EpidemicSeries;
use sirgld::EvalDay;

fn report(id: u32, pass: bool, detail: String, elapsed: Duration) -> bool {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {detail} ({:.2} s)", elapsed.as_secs_f64());
    pass
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn c01_early_exponential_growth() {
    let clock = Instant::now();
    let (s0, i0) = (1.0e6, 100.0);
    let params = SirParams::new(0.1 / s0, 0.05).unwrap();
    let r = params.lambda * s0 - params.gamma;
    let mut worst: f64 = 0.0;
    // sample every 0.1 day by integrating to each point from the same start
    for step in 1..=100 {
        let t = step as f64 * 0.1;
        let traj = integrate(SirState::new(s0, i0, 0.0), params, 0.0, t, 0.01).unwrap();
        worst = worst.max(rel(traj.last().i, i0 * (r * t).exp()));
    }
    let elapsed = clock.elapsed();
    let pass = worst <= 1e-4 && elapsed < Duration::from_secs(1);
    assert!(report(1, pass, format!("max relative error {worst:.3e} (limit 1e-4)"), elapsed));
}

#[test]
fn c02_conservation() {
    let clock = Instant::now();
    let n: f64 = 10_000.0;
    let params = SirParams::new(2e-5, 0.1).unwrap();
    let traj = integrate(SirState::new(n - 10.0, 10.0, 0.0), params, 0.0, 200.0, 0.05).unwrap();
    let worst = traj.states.iter().map(|s| (s.total() - n).abs()).fold(0.0, f64::max);
    let elapsed = clock.elapsed();
    let pass = worst <= 1e-9 * n && elapsed < Duration::from_secs(1);
    assert!(report(2, pass, format!("max |S+I+R-N| = {worst:.3e} (limit {:.1e})", 1e-9 * n), elapsed));
}

#[test]
fn c03_closed_form_matches_growth_ode() {
    let clock = Instant::now();
    let n: f64 = 1000.0;
    let mut worst: f64 = 0.0;
    for b in [0.05, 0.2] {
        for m in [0.5, 1.0, 2.0] {
            let p = GrowthParams::new(b, 1e-3, m, n).unwrap();
            let rhs = |x: &[f64; 1]| [p.rhs(x[0])];
            let mut x = [p.initial()];
            for day in 0..=100 {
                if day > 0 {
                    x = integrate_to(&rhs, x, (day - 1) as f64, day as f64, 0.01);
                }
                worst = worst.max((x[0] - gld_growth(day as f64, &p)).abs());
            }
        }
    }
    let elapsed = clock.elapsed();
    let pass = worst <= 1e-6 * n && elapsed < Duration::from_secs(1);
    assert!(report(3, pass, format!("max |ODE - closed form| = {worst:.3e} (limit {:.1e})", 1e-6 * n), elapsed));
}

#[test]
fn c04_logistic_reduction() {
    let clock = Instant::now();
    let (n, t0, lambda): (f64, f64, f64) = (5000.0, 5.0, 4e-5);
    let p = GrowthParams::new(lambda * n, t0 / n, 1.0, n).unwrap();
    let worst = (0..=2000)
        .map(|i| i as f64 * 0.1)
        .map(|t: f64| (gld_growth(t, &p) - logistic_growth(t, n, t0, lambda)).abs())
        .fold(0.0, f64::max);
    let (_, peak) = logistic_inflection(n, t0, lambda);
    let elapsed = clock.elapsed();
    let pass = worst <= 1e-12 * n && peak == n / 2.0;
    assert!(report(
        4,
        pass,
        format!(
            "max pointwise gap {worst:.3e} (limit {:.1e}), inflection value {peak} vs N/2 = {}",
            1e-12 * n,
            n / 2.0
        ),
        elapsed
    ));
}

#[test]
fn c05_parameter_bijection() {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_trip, mut worst_cdf): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let gld =
            GldParams::new(rng.random_range(0.5..20.0), rng.random_range(-20.0..80.0), rng.random_range(0.1..5.0))
                .unwrap();
        let n = rng.random_range(100.0..1e7);
        let growth = params_to_growth(&gld, n).unwrap();
        let (back, n_back) = growth_to_params(&growth).unwrap();
        let trip = [rel(back.sigma, gld.sigma), rel(back.mu, gld.mu), rel(back.beta, gld.beta), rel(n_back, n)];
        worst_trip = trip.iter().fold(worst_trip, |a, &b| a.max(b));
        for i in 0..=40 {
            let t = gld.mu + gld.sigma * (i as f64 - 20.0) * 0.5;
            worst_cdf = worst_cdf.max((gld_growth(t, &growth) / n - gld.cdf(t)).abs());
        }
    }
    let elapsed = clock.elapsed();
    let pass = worst_trip <= 1e-12 && worst_cdf <= 1e-12;
    assert!(report(
        5,
        pass,
        format!("round-trip relative error {worst_trip:.3e}, max |T/N - F| {worst_cdf:.3e} (limits 1e-12)"),
        elapsed
    ));
}

#[test]
fn c06_backward_fit_recovers_rates() {
    let clock = Instant::now();
    let truth = SirParams::new(2e-5, 0.1).unwrap();
    let scenario = SirScenario { population: 10_000.0, params: truth, initial_infected: 10.0 };
    let series = scenario.series(120, 0.05).unwrap();
    let observed = series.truncated(60).unwrap();
    let config = BbsConfig::new(10_000.0).with_window(7);
    let (fit, opt) = fit_bbs(&observed, &config).unwrap();
    let at_truth = bbs_objective(&truth, &observed, &config).unwrap();
    let elapsed = clock.elapsed();
    let (el, eg) = (rel(fit.lambda, truth.lambda), rel(fit.gamma, truth.gamma));
    let pass = opt.converged && el <= 0.01 && eg <= 0.01 && at_truth <= 1e-6 && elapsed < Duration::from_secs(5);
    assert!(report(
        6,
        pass,
        format!(
            "lambda error {:.3e}, gamma error {:.3e} (limit 1e-2), objective at truth {at_truth:.3e} (limit 1e-6)",
            el, eg
        ),
        elapsed
    ));
}

#[test]
fn c07_mle_recovery_over_seeds() {
    let clock = Instant::now();
    let truth = GldParams::new(5.0, 30.0, 0.8).unwrap();
    let mut passed = 0;
    let mut lines = Vec::new();
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..10_000).map(|_| truth.sample(&mut rng)).collect();
        let data = GroupedCounts::from_samples(&samples, 1, 60).unwrap();
        let (fit, _) = fit_mle(&data).unwrap();
        let ok = rel(fit.sigma, 5.0) <= 0.05 && rel(fit.beta, 0.8) <= 0.05 && (fit.mu - 30.0).abs() <= 0.5;
        passed += ok as usize;
        lines.push(format!(
            "  seed {seed:2}: sigma {:.4} mu {:.4} beta {:.4} {}",
            fit.sigma,
            fit.mu,
            fit.beta,
            if ok { "ok" } else { "outside" }
        ));
    }
    let elapsed = clock.elapsed();
    for l in &lines {
        println!("{l}");
    }
    let pass = passed >= 19 && elapsed < Duration::from_secs(30);
    assert!(report(7, pass, format!("{passed}/20 seeds within tolerance (need 19)"), elapsed));
}

/// Shared desk-scale epidemic: GLD incidence (N = 70,000), removals lagging infection with a
/// three-week median (rate ln 2 / 21), 5% of removals reported as deaths, rounded counts.
struct Desk {
    full: EpidemicSeries,
    truth: Vec<f64>,
}

const DESK_N: f64 = 70_000.0;

fn desk() -> Desk {
    let scenario = GldScenario {
        final_size: DESK_N,
        params: GldParams::new(5.0, 30.0, 0.8).unwrap(),
        removal_rate: std::f64::consts::LN_2 / 21.0,
    };
    let (t, r) = scenario.curves(120, 0.05).unwrap();
    let records = to_records(&t, &r, 0.05, Noise::None, 0).unwrap();
    let full = EpidemicSeries::from_records(records).unwrap();
    let truth = full.cum_infected().to_vec();
    Desk { full, truth }
}

impl Desk {
    /// First day on which at least `fraction` of the final size has been observed.
    fn day_at(&self, fraction: f64) -> i64 {
        let i = self.truth.iter().position(|&t| t >= fraction * DESK_N).unwrap();
        self.full.day(i)
    }
}

#[test]
fn c08_lplot_stabilizes() {
    let clock = Instant::now();
    let d = desk();
    let d60 = d.day_at(0.6);
    let observed = d.full.truncated(d60).unwrap();
    let config = LPlotConfig { parallel: true, ..LPlotConfig::default() };
    let plot = lplot_gld(&observed, EvalDay::Infinity, &config).unwrap();
    let fs = estimate_n(&plot, &StabilityRule::default());
    let elapsed = clock.elapsed();
    let (pass, detail) = match fs {
        Some(fs) => (
            rel(fs.n_hat, DESK_N) <= 0.1 && elapsed < Duration::from_secs(60),
            format!(
                "stabilized on day {} (60% observed on day {d60}), N_hat {:.0}, error {:.2}% (limit 10%)",
                fs.stabilization_day,
                fs.n_hat,
                100.0 * rel(fs.n_hat, DESK_N)
            ),
        ),
        None => (false, format!("no stabilization by day {d60}")),
    };
    assert!(report(8, pass, detail, elapsed));
}

#[test]
fn c09_sir_blow_up_with_overestimated_population() {
    let clock = Instant::now();
    let d = desk();
    let early = d.day_at(0.2);
    let t_conv = 60.0;
    let config = LPlotConfig { first_truncation: Some(early), last_truncation: Some(early), ..LPlotConfig::default() };
    let observed = d.full.truncated(early).unwrap();
    let gld = lplot_gld(&observed, EvalDay::Day(t_conv), &config).unwrap().estimate_at(early).unwrap();
    let sir_true = lplot_sir(&observed, t_conv, DESK_N, &config).unwrap().estimate_at(early).unwrap();
    let sir_big = lplot_sir(&observed, t_conv, 10.0 * DESK_N, &config).unwrap().estimate_at(early).unwrap();
    let elapsed = clock.elapsed();
    let agree = rel(sir_true, gld);
    let ratio = sir_big / gld;
    let pass = agree <= 0.15 && ratio >= 3.0;
    assert!(report(
        9,
        pass,
        format!(
            "truncation day {early}: GLD {gld:.0}, SIR(N) {sir_true:.0} (gap {:.1}%, limit 15%), SIR(10N) {sir_big:.0} ({ratio:.2}x GLD, need 3x)",
            100.0 * agree
        ),
        elapsed
    ));
}

fn forecast_error(d: &Desk, day: i64, population: Option<f64>) -> (f64, f64) {
    let observed = d.full.truncated(day).unwrap();
    let config =
        ComboConfig { lplot: LPlotConfig { parallel: true, ..LPlotConfig::default() }, ..ComboConfig::default() };
    let fc = combined_forecast(&observed, 30, population, &config).unwrap();
    let start = d.full.index_of_day(day).unwrap();
    let worst = fc
        .trajectory
        .states
        .iter()
        .enumerate()
        .skip(1)
        .map(|(h, s)| rel(s.cum_infected(), d.truth[start + h]))
        .fold(0.0, f64::max);
    (fc.n_hat, worst)
}

#[test]
fn c10_combined_forecast() {
    let clock = Instant::now();
    let d = desk();
    let d60 = d.day_at(0.6);
    let (n_hat, err) = forecast_error(&d, d60, None);
    let (_, err_big) = forecast_error(&d, d60, Some(10.0 * DESK_N));
    let elapsed = clock.elapsed();
    let pass = err <= 0.05 && err_big > 0.25;
    assert!(report(
        10,
        pass,
        format!(
            "from day {d60}: N_hat {n_hat:.0}, max 30-day error {:.2}% (limit 5%); with 10x N {:.1}% (need > 25%)",
            100.0 * err,
            100.0 * err_big
        ),
        elapsed
    ));
}
