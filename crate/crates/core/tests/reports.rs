use std::io::Write;

use serde_json::Value;

use sirgld::bbs::{fit_bbs, BbsFitReport};
use sirgld::epi_data::load_series;
use sirgld::gld::{fit_mle, GldFitReport};
use sirgld::synthetic::SirScenario;
use sirgld::{BbsConfig, CombinedForecast, ComboConfig, DataError, EpidemicSeries, SirParams};

fn keys(v: &Value) -> Vec<&str> {
    v.as_object().unwrap().keys().map(String::as_str).collect()
}

fn sir_series() -> EpidemicSeries {
    SirScenario { population: 5000.0, params: SirParams::new(6e-5, 0.1).unwrap(), initial_infected: 5.0 }
        .series(50, 0.05)
        .unwrap()
}

#[test]
fn load_from_file_and_report_missing_file() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, "day,new_infected,new_died,new_recovered\n1,3,0,0\n2,4,1,1\n").unwrap();
    let s: EpidemicSeries = load_series(f.path()).unwrap();
    assert_eq!(s.cum_infected(), &[3.0, 7.0]);
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_series::<f64>(dir.path().join("absent.csv")), Err(DataError::Io(_))));
}

#[test]
fn bbs_report_fields() {
    let series = sir_series();
    let config = BbsConfig::new(5000.0);
    let (params, opt) = fit_bbs(&series, &config).unwrap();
    let v = serde_json::to_value(BbsFitReport::new(&params, &opt, &config)).unwrap();
    let mut k = keys(&v);
    k.sort_unstable();
    assert_eq!(k, ["N", "converged", "gamma", "iterations", "lambda", "objective", "window_s"]);
    assert_eq!(v["window_s"], 7);
}

#[test]
fn gld_report_fields() {
    let series = sir_series();
    let (params, opt) = fit_mle(&series.grouped_counts()).unwrap();
    let v = serde_json::to_value(GldFitReport::new(&params, &opt, 4000.0)).unwrap();
    let mut k = keys(&v);
    k.sort_unstable();
    assert_eq!(k, ["N_hat", "beta", "converged", "log_likelihood", "mu", "sigma"]);
}

#[test]
fn forecast_header_fields() {
    let fc: CombinedForecast = combined_forecast_fixed();
    let v = serde_json::to_value(fc.header()).unwrap();
    let mut k = keys(&v);
    k.sort_unstable();
    assert_eq!(k, ["N_hat", "gamma", "lambda", "stabilization_day"]);
    assert!(v["stabilization_day"].is_null());
}

fn combined_forecast_fixed() -> CombinedForecast {
    sirgld::combo::combined_forecast(&sir_series(), 5, Some(5000.0), &ComboConfig::default()).unwrap()
}
