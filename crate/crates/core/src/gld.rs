//! The generalized logistic distribution `F(t) = (1 + exp(-(t - μ)/σ))^(-β)`, its grouped
//! truncated likelihood, and the equivalent Richards growth curve
//! `dT/dt = b T (1 - (T/N)^m)` with closed-form solution
//! `T(t) = N / (1 + ((T(0)/N)^(-m) - 1) exp(-b m t))^(1/m)`.
//!
//! The two parameterizations are linked by `b = β/σ`, `m = 1/β`, `k = T(0)/N = F(0)`,
//! so `T(t)/N` and `F(t)` coincide.

use rand::Rng;
use serde::Serialize;

use crate::error::{precondition, Error, Result};
use crate::optimizer::{minimize_restarted, OptResult, SimplexConfig, MAX_RESTARTS};
use crate::scalar::{softplus, Scalar};

/// Scale `sigma` (days), location `mu` (days) and shape `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GldParams<T> {
    pub sigma: T,
    pub mu: T,
    pub beta: T,
}

impl<T: Scalar> GldParams<T> {
    pub fn new(sigma: T, mu: T, beta: T) -> Result<Self> {
        if !(sigma > T::zero() && beta > T::zero()) || !(sigma.is_finite() && mu.is_finite() && beta.is_finite()) {
            return precondition(format!("invalid GLD parameters (sigma {sigma}, mu {mu}, beta {beta})"));
        }
        Ok(Self { sigma, mu, beta })
    }

    /// Standardized time `z = (t - μ)/σ`.
    pub fn standardize(&self, t: T) -> T {
        (t - self.mu) / self.sigma
    }

    /// `log F(t)`, finite for every finite `t`.
    pub fn log_cdf(&self, t: T) -> T {
        -self.beta * softplus(-self.standardize(t))
    }

    pub fn cdf(&self, t: T) -> T {
        self.log_cdf(t).exp()
    }

    /// Density `dF/dt = (β/σ) e^(-z) (1 + e^(-z))^(-β-1)`.
    pub fn pdf(&self, t: T) -> T {
        let z = self.standardize(t);
        let log_pdf = (self.beta / self.sigma).ln() - z - (self.beta + T::one()) * softplus(-z);
        log_pdf.exp()
    }

    /// Inverse CDF: `t = μ - σ log(p^(-1/β) - 1)` for `p ∈ (0, 1)`.
    pub fn quantile(&self, p: T) -> T {
        self.mu - self.sigma * (-p.ln() / self.beta).exp_m1().ln()
    }

    /// One inverse-transform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u: f64 = rng.random();
        // random() is in [0, 1); map 0 away from the pole
        let u = if u == 0.0 { f64::MIN_POSITIVE } else { u };
        self.quantile(T::lit(u))
    }
}

/// Counts `k_0..k_n` over bins `(-∞, t_0], (t_0, t_1], ..., (t_{n-1}, t_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedCounts<T> {
    boundaries: Vec<T>,
    counts: Vec<T>,
}

impl<T: Scalar> GroupedCounts<T> {
    pub fn new(boundaries: Vec<T>, counts: Vec<T>) -> Result<Self> {
        if boundaries.is_empty() || boundaries.len() != counts.len() {
            return precondition("grouped counts need one boundary per count and at least one bin");
        }
        if boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return precondition("bin boundaries must be strictly increasing");
        }
        if counts.iter().any(|&k| !(k >= T::zero()) || !k.is_finite()) {
            return precondition("bin counts must be finite and non-negative");
        }
        let g = Self { boundaries, counts };
        if !(g.total() > T::zero()) {
            return precondition("grouped counts carry no mass");
        }
        Ok(g)
    }

    pub(crate) fn new_unchecked(boundaries: Vec<T>, counts: Vec<T>) -> Self {
        Self { boundaries, counts }
    }

    /// Bins samples by day: bin 0 is `(-∞, first_day]`, then one bin per day up to `last_day`.
    /// Samples after `last_day` are truncated away.
    pub fn from_samples(samples: &[T], first_day: i64, last_day: i64) -> Result<Self> {
        if last_day < first_day {
            return precondition("last day precedes first day");
        }
        let n = (last_day - first_day) as usize + 1;
        let mut counts = vec![T::zero(); n];
        let first = T::lit(first_day as f64);
        for &x in samples {
            let idx = if x <= first { 0 } else { (x - first).ceil().to_f64_lossy() as usize };
            if idx < n {
                counts[idx] = counts[idx] + T::one();
            }
        }
        let boundaries = (first_day..=last_day).map(|d| T::lit(d as f64)).collect();
        Self::new(boundaries, counts)
    }

    pub fn boundaries(&self) -> &[T] {
        &self.boundaries
    }

    pub fn counts(&self) -> &[T] {
        &self.counts
    }

    /// Index of the last boundary.
    pub fn n(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn total(&self) -> T {
        self.counts.iter().copied().sum()
    }

    pub fn informative_bins(&self) -> usize {
        self.counts.iter().filter(|&&k| k > T::zero()).count()
    }

    /// Count-weighted quantile of bin midpoints (bin 0 is represented by `t_0 - 1/2`).
    fn weighted_quantile(&self, q: T) -> T {
        let half = T::lit(0.5);
        let target = q * self.total();
        let mut acc = T::zero();
        for (i, &k) in self.counts.iter().enumerate() {
            acc = acc + k;
            if acc >= target && k > T::zero() {
                return if i == 0 {
                    self.boundaries[0] - half
                } else {
                    half * (self.boundaries[i - 1] + self.boundaries[i])
                };
            }
        }
        self.boundaries[self.n()] - half
    }
}

/// Log of the truncated bin probabilities `F(t_0)/F(t_n)` and `(F(t_i) - F(t_{i-1}))/F(t_n)`.
pub fn log_bin_probabilities<T: Scalar>(params: &GldParams<T>, data: &GroupedCounts<T>) -> Vec<T> {
    let log_f: Vec<T> = data.boundaries.iter().map(|&t| params.log_cdf(t)).collect();
    let log_fn = log_f[data.n()];
    let mut out = Vec::with_capacity(log_f.len());
    out.push(log_f[0] - log_fn);
    for i in 1..log_f.len() {
        // F_i - F_{i-1} = F_i (1 - F_{i-1}/F_i), accurate deep in either tail
        let frac = -(log_f[i - 1] - log_f[i]).exp_m1();
        out.push(log_f[i] + frac.ln() - log_fn);
    }
    out
}

/// Grouped truncated log-likelihood. Empty bins contribute nothing; a populated bin with
/// zero probability makes the result `-∞`.
pub fn log_likelihood<T: Scalar>(params: &GldParams<T>, data: &GroupedCounts<T>) -> T {
    let mut ll = T::zero();
    for (&k, lp) in data.counts.iter().zip(log_bin_probabilities(params, data)) {
        if k > T::zero() {
            if !(lp > T::neg_infinity()) || lp.is_nan() {
                return T::neg_infinity();
            }
            ll = ll + k * lp;
        }
    }
    ll
}

/// Maximum-likelihood fit with the default simplex settings.
pub fn fit_mle<T: Scalar>(data: &GroupedCounts<T>) -> Result<(GldParams<T>, OptResult<T>)> {
    fit_mle_with(data, &SimplexConfig::default())
}

/// Maximizes [`log_likelihood`] over `(log σ, μ, log β)`, starting from σ = IQR/2, μ = median,
/// β = 1 of the binned sample, with restarts (see [`minimize_restarted`]).
pub fn fit_mle_with<T: Scalar>(
    data: &GroupedCounts<T>,
    config: &SimplexConfig<T>,
) -> Result<(GldParams<T>, OptResult<T>)> {
    if data.informative_bins() < 3 {
        return precondition(format!(
            "GLD fit needs at least 3 bins with positive counts, found {}",
            data.informative_bins()
        ));
    }
    let median = data.weighted_quantile(T::lit(0.5));
    let iqr = data.weighted_quantile(T::lit(0.75)) - data.weighted_quantile(T::lit(0.25));
    let sigma0 = if iqr > T::zero() { iqr / T::lit(2.0) } else { T::one() };

    let unpack = |x: &[T]| GldParams { sigma: x[0].exp(), mu: x[1], beta: x[2].exp() };
    let objective = |x: &[T]| {
        let p = unpack(x);
        if !(p.sigma > T::zero() && p.beta > T::zero()) || !p.sigma.is_finite() || !p.beta.is_finite() {
            return T::infinity();
        }
        let ll = log_likelihood(&p, data);
        if ll.is_finite() {
            -ll
        } else {
            T::infinity()
        }
    };
    let opt = minimize_restarted(objective, &[sigma0.ln(), median, T::zero()], config, MAX_RESTARTS)?;
    Ok((unpack(&opt.argmin), opt))
}

/// Logistic solution `T(t) = N / (1 + (N/T0 - 1) exp(-λ N t))`, for `0 < T0 < N`, `λ > 0`.
pub fn logistic_growth<T: Scalar>(t: T, population: T, t0_count: T, lambda: T) -> T {
    population / (T::one() + (population / t0_count - T::one()) * (-lambda * population * t).exp())
}

/// Inflection point of the logistic solution: `(log(N/T0 - 1)/(λN), N/2)`.
pub fn logistic_inflection<T: Scalar>(population: T, t0_count: T, lambda: T) -> (T, T) {
    ((population / t0_count - T::one()).ln() / (lambda * population), population / T::lit(2.0))
}

/// Richards growth parameters: rate `b`, initial fraction `k = T(0)/N`, exponent `m`,
/// final size `n`.
///
/// Alongside `k` the struct keeps `log(k^(-m) - 1)`. When `k` is within a few orders of
/// magnitude of 1 the stored `k` no longer resolves `1 - k`, so the curve and the inverse
/// mapping work from the logarithm, which [`params_to_growth`] computes without rounding `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthParams<T> {
    b: T,
    k: T,
    m: T,
    n: T,
    #[serde(skip)]
    log_offset: T,
}

impl<T: Scalar> GrowthParams<T> {
    pub fn new(b: T, k: T, m: T, n: T) -> Result<Self> {
        Self::check(b, k, m, n)?;
        let log_offset = (-m * k.ln()).exp_m1().ln();
        Ok(Self { b, k, m, n, log_offset })
    }

    fn check(b: T, k: T, m: T, n: T) -> Result<()> {
        let finite = b.is_finite() && k.is_finite() && m.is_finite() && n.is_finite();
        if !finite || !(b > T::zero() && m > T::zero() && n > T::zero()) || !(k > T::zero() && k < T::one()) {
            return precondition(format!("invalid growth parameters (b {b}, k {k}, m {m}, N {n})"));
        }
        Ok(())
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn k(&self) -> T {
        self.k
    }

    pub fn m(&self) -> T {
        self.m
    }

    pub fn n(&self) -> T {
        self.n
    }

    /// `T(0)`.
    pub fn initial(&self) -> T {
        self.k * self.n
    }

    /// Right-hand side of `dT/dt = b T (1 - (T/N)^m)`.
    pub fn rhs(&self, value: T) -> T {
        self.b * value * (T::one() - (value / self.n).powf(self.m))
    }
}

/// Closed-form Richards curve `T(t)`.
pub fn gld_growth<T: Scalar>(t: T, params: &GrowthParams<T>) -> T {
    let bm = params.b * params.m;
    let log_term = softplus(params.log_offset - bm * t);
    params.n * (-log_term / params.m).exp()
}

/// `(t*, T(t*))` with `t* = log((k^(-m) - 1)/m)/(b m)`; `None` when `t* <= 0`, i.e. the
/// curve is already past its inflection at `t = 0`.
pub fn gld_inflection<T: Scalar>(params: &GrowthParams<T>) -> Option<(T, T)> {
    let log_ratio = params.log_offset - params.m.ln();
    if !(log_ratio > T::zero()) {
        return None;
    }
    let t_star = log_ratio / (params.b * params.m);
    Some((t_star, gld_growth(t_star, params)))
}

pub fn params_to_growth<T: Scalar>(gld: &GldParams<T>, final_size: T) -> Result<GrowthParams<T>> {
    let z = gld.mu / gld.sigma;
    let b = gld.beta / gld.sigma;
    let m = T::one() / gld.beta;
    let k = (-gld.beta * softplus(z)).exp();
    GrowthParams::check(b, k, m, final_size)?;
    // k^(-m) - 1 = exp(z) exactly under the mapping
    Ok(GrowthParams { b, k, m, n: final_size, log_offset: z })
}

pub fn growth_to_params<T: Scalar>(growth: &GrowthParams<T>) -> Result<(GldParams<T>, T)> {
    let bm = growth.b * growth.m;
    let sigma = T::one() / bm;
    let mu = growth.log_offset / bm;
    let beta = T::one() / growth.m;
    Ok((GldParams::new(sigma, mu, beta)?, growth.n))
}

/// Final size `T̂(∞) = T(t) / F(t)`.
pub fn final_size_estimate<T: Scalar>(observed: T, t: T, params: &GldParams<T>) -> Result<T> {
    let f = params.cdf(t);
    let est = observed / f;
    if !(f > T::zero()) || !est.is_finite() {
        return Err(Error::Undefined(format!("distribution function is zero at t = {t}")));
    }
    Ok(est)
}

/// Serializable summary of a GLD fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GldFitReport<T> {
    pub sigma: T,
    pub mu: T,
    pub beta: T,
    pub log_likelihood: T,
    #[serde(rename = "N_hat")]
    pub n_hat: T,
    pub converged: bool,
}

impl<T: Scalar> GldFitReport<T> {
    pub fn new(params: &GldParams<T>, opt: &OptResult<T>, n_hat: T) -> Self {
        Self {
            sigma: params.sigma,
            mu: params.mu,
            beta: params.beta,
            log_likelihood: -opt.value,
            n_hat,
            converged: opt.converged,
        }
    }
}
