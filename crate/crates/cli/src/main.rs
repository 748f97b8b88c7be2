//! `sirgld`: validate case series, fit the SIR and GLD models, draw L-plots, forecast with the
//! combination method, and generate synthetic epidemics.
//!
//! Exit codes: 0 success, 1 invalid input or violated precondition, 2 a fit did not converge.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Number, Value};

use sirgld::bbs::{fit_bbs, BbsFitReport, DEFAULT_WINDOW};
use sirgld::combo::{combined_forecast, lplot_gld, lplot_sir, write_lplot_csv};
use sirgld::epi_data::{load_series, validate_series, write_records};
use sirgld::gld::{final_size_estimate, fit_mle_with, GldFitReport};
use sirgld::sir_core::{fmt17, DEFAULT_DT};
use sirgld::synthetic::{to_records, GldScenario, SirScenario};
use sirgld::{
    BbsConfig, ComboConfig, EpidemicSeries, Error, EvalDay, GldParams, LPlotConfig, Noise, SimplexConfig, SirParams,
};

#[derive(Parser)]
#[command(
    name = "sirgld",
    version,
    about = "Epidemic curve fitting with the SIR model and the generalized logistic distribution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an input CSV and list every problem found.
    Validate { input: PathBuf },
    /// Maximum-likelihood GLD fit; writes gld_fit.json and gld_curve.csv.
    FitGld {
        input: PathBuf,
        /// Fit only the data up to this day.
        #[arg(long)]
        truncate: Option<i64>,
        #[command(flatten)]
        common: Common,
    },
    /// Backward (BBS) fit of the SIR rates for a given population; writes sir_fit.json.
    FitSir {
        input: PathBuf,
        /// Total population N.
        #[arg(long = "n", value_name = "N")]
        population: f64,
        /// Trailing window length in days.
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        s: usize,
        #[arg(long)]
        truncate: Option<i64>,
        #[command(flatten)]
        common: Common,
    },
    /// L-plots of both models; writes lplot.csv.
    Lplot {
        input: PathBuf,
        /// Evaluation day, or `inf` for the final size (GLD only).
        #[arg(long, value_parser = parse_t_conv)]
        t_conv: EvalDay<f64>,
        /// Population for the SIR L-plot; without it only the GLD rows are written.
        #[arg(long = "n", value_name = "N")]
        population: Option<f64>,
        #[arg(long)]
        first: Option<i64>,
        #[arg(long)]
        last: Option<i64>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        s: usize,
        /// Run the per-truncation fits in parallel.
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Combined GLD to SIR forecast; writes forecast.csv and forecast.json.
    Forecast {
        input: PathBuf,
        #[arg(long)]
        horizon: usize,
        /// Fix N instead of estimating it from the GLD L-plot.
        #[arg(long = "n", value_name = "N")]
        population: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        s: usize,
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic epidemic in the input CSV format.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct Common {
    /// Directory for output files (created if missing).
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Simplex convergence tolerance on the objective.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
    /// RK4 step in days.
    #[arg(long, default_value_t = DEFAULT_DT)]
    dt: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Sir,
    Gld,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Population (SIR) or final size (GLD).
    #[arg(long = "n", value_name = "N")]
    population: f64,
    /// SIR infection rate.
    #[arg(long, required_if_eq("model", "sir"))]
    lambda: Option<f64>,
    /// SIR removal rate, or the GLD epidemic's removal rate.
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// SIR initial infected.
    #[arg(long, default_value_t = 10.0)]
    i0: f64,
    #[arg(long, required_if_eq("model", "gld"))]
    sigma: Option<f64>,
    #[arg(long, required_if_eq("model", "gld"))]
    mu: Option<f64>,
    #[arg(long, required_if_eq("model", "gld"))]
    beta: Option<f64>,
    /// 0: rounded cumulative curves; 1: Poisson daily counts.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    noise: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 120)]
    days: usize,
    /// Share of removals reported as deaths.
    #[arg(long, default_value_t = 0.0)]
    death_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_DT)]
    dt: f64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_t_conv(s: &str) -> Result<EvalDay<f64>, String> {
    match s {
        "inf" | "infinity" => Ok(EvalDay::Infinity),
        _ => s.parse::<f64>().map(EvalDay::Day).map_err(|_| format!("expected a day or `inf`, got `{s}`")),
    }
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::AllFitsFailed) | Some(Error::Undefined(_)) => 2,
            _ => 1,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::new(e).into()
    }
}

fn not_converged(what: &str) -> Failure {
    Failure { code: 2, error: anyhow::anyhow!("{what} did not converge") }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    // clap's own usage-error code (2) would collide with non-convergence
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Validate { input } => validate(&input),
        Command::FitGld { input, truncate, common } => fit_gld(&input, truncate, &common),
        Command::FitSir { input, population, s, truncate, common } => fit_sir(&input, population, s, truncate, &common),
        Command::Lplot { input, t_conv, population, first, last, s, parallel, common } => {
            let config = LPlotConfig {
                first_truncation: first,
                last_truncation: last,
                parallel,
                window: s,
                dt: common.dt,
                tolerance: common.tolerance,
            };
            lplot(&input, t_conv, population, &config, &common.out_dir)
        }
        Command::Forecast { input, horizon, population, s, parallel, common } => {
            forecast(&input, horizon, population, s, parallel, &common)
        }
        Command::Simulate(args) => simulate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load(input: &Path, truncate: Option<i64>) -> Result<EpidemicSeries, Failure> {
    let series = load_series::<f64>(input).map_err(Error::from)?;
    Ok(match truncate {
        Some(day) => series.truncated(day)?,
        None => series,
    })
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Rewrites every non-integer JSON number with 17 significant digits.
fn widen_floats(v: &mut Value) {
    match v {
        Value::Number(n) => {
            let text = n.to_string();
            if text.contains(['.', 'e', 'E']) {
                if let Some(x) = n.as_f64() {
                    *n = fmt17(x).parse::<Number>().expect("formatted float is a JSON number");
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(widen_floats),
        Value::Object(map) => map.values_mut().for_each(widen_floats),
        _ => {}
    }
}

fn write_json<S: Serialize>(dir: &Path, name: &str, report: &S) -> anyhow::Result<String> {
    let mut value = serde_json::to_value(report)?;
    widen_floats(&mut value);
    let text = serde_json::to_string_pretty(&value)?;
    let mut w = create(dir, name)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(text)
}

fn validate(input: &Path) -> CmdResult {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let errors = validate_series(file);
    if errors.is_empty() {
        let series = load(input, None)?;
        println!(
            "valid: {} rows, days {}..{}, cumulative infected {}",
            series.len(),
            series.first_day(),
            series.last_day(),
            series.max_cum_infected()
        );
        return Ok(());
    }
    for e in &errors {
        eprintln!("{e}");
    }
    Err(Failure { code: 1, error: anyhow::anyhow!("{} problem(s) in {}", errors.len(), input.display()) })
}

fn fit_gld(input: &Path, truncate: Option<i64>, common: &Common) -> CmdResult {
    let series = load(input, truncate)?;
    let simplex = SimplexConfig::default().with_tolerance(common.tolerance);
    let (params, opt) = fit_mle_with(&series.grouped_counts(), &simplex)?;
    let last = series.last_day();
    let observed = series.max_cum_infected();
    let n_hat = final_size_estimate(observed, last as f64, &params)?;
    let report = GldFitReport::new(&params, &opt, n_hat);
    println!("{}", write_json(&common.out_dir, "gld_fit.json", &report)?);

    let mut w = create(&common.out_dir, "gld_curve.csv")?;
    writeln!(w, "t,F").map_err(anyhow::Error::from)?;
    let end = last.max(params.quantile(0.999).ceil() as i64);
    for t in series.first_day()..=end {
        writeln!(w, "{t},{}", fmt17(params.cdf(t as f64))).map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    if !opt.converged {
        return Err(not_converged("GLD fit"));
    }
    Ok(())
}

fn fit_sir(input: &Path, population: f64, s: usize, truncate: Option<i64>, common: &Common) -> CmdResult {
    let series = load(input, truncate)?;
    let mut config = BbsConfig::new(population).with_window(s).with_epsilon(common.tolerance);
    config.dt = common.dt;
    let (params, opt) = fit_bbs(&series, &config)?;
    let report = BbsFitReport::new(&params, &opt, &config);
    println!("{}", write_json(&common.out_dir, "sir_fit.json", &report)?);
    if !opt.converged {
        return Err(not_converged("SIR fit"));
    }
    Ok(())
}

fn lplot(input: &Path, t_conv: EvalDay<f64>, population: Option<f64>, config: &LPlotConfig, out: &Path) -> CmdResult {
    let series = load(input, None)?;
    let gld = lplot_gld(&series, t_conv, config)?;
    let sir = match (t_conv, population) {
        (EvalDay::Day(day), Some(n)) => Some(lplot_sir(&series, day, n, config)?),
        (EvalDay::Infinity, Some(_)) => {
            eprintln!("note: the SIR L-plot needs a finite --t-conv; writing GLD rows only");
            None
        }
        (_, None) => {
            eprintln!("note: no --n given; writing GLD rows only");
            None
        }
    };
    let mut plots = vec![&gld];
    plots.extend(sir.as_ref());
    let mut w = create(out, "lplot.csv")?;
    write_lplot_csv(&plots, &mut w).map_err(anyhow::Error::from)?;
    w.flush().map_err(anyhow::Error::from)?;
    for p in plots {
        let ok = p.successful().count();
        println!("{}: {ok}/{} truncations fitted", p.model, p.points.len());
    }
    Ok(())
}

fn forecast(
    input: &Path,
    horizon: usize,
    population: Option<f64>,
    s: usize,
    parallel: bool,
    common: &Common,
) -> CmdResult {
    let series = load(input, None)?;
    let mut config = ComboConfig::default();
    config.lplot.window = s;
    config.lplot.parallel = parallel;
    config.lplot.dt = common.dt;
    config.lplot.tolerance = common.tolerance;
    let fc = combined_forecast(&series, horizon, population, &config)?;
    let mut w = create(&common.out_dir, "forecast.csv")?;
    fc.trajectory.write_csv(&mut w).map_err(anyhow::Error::from)?;
    w.flush().map_err(anyhow::Error::from)?;
    println!("{}", write_json(&common.out_dir, "forecast.json", &fc.header())?);
    if !fc.fit.converged {
        return Err(not_converged("SIR fit"));
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> CmdResult {
    let (t, r) = match args.model {
        ModelArg::Sir => {
            let lambda = args.lambda.expect("clap enforces --lambda for sir");
            let scenario = SirScenario {
                population: args.population,
                params: SirParams::new(lambda, args.gamma)?,
                initial_infected: args.i0,
            };
            scenario.curves(args.days, args.dt)?
        }
        ModelArg::Gld => {
            let params = GldParams::new(args.sigma.unwrap(), args.mu.unwrap(), args.beta.unwrap())?;
            let scenario = GldScenario { final_size: args.population, params, removal_rate: args.gamma };
            scenario.curves(args.days, args.dt)?
        }
    };
    let noise = if args.noise == 0 { Noise::None } else { Noise::Poisson };
    let records = to_records(&t, &r, args.death_fraction, noise, args.seed)?;
    let result = match &args.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_records(&records, BufWriter::new(file))
        }
        None => write_records(&records, io::stdout().lock()),
    };
    result.map_err(Error::from)?;
    Ok(())
}
