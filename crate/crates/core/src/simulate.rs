//! Monte Carlo generation of `(ξ, τ)` pairs for a solved problem and a
//! semi-analytic oracle for the hitting-time CDF.
//!
//! Given `ξ = x > 0`, the hitting time of `kt` by `x + W_t` is the first
//! passage of Brownian motion with drift `k` to level `x`, which is inverse
//! Gaussian with mean `x/k` and shape `x²`. At `k = 0` it is `x²/Z²`.

use std::io::Write;

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::InverseGaussianLaw;
use crate::error::{Error, Result};
use crate::gsp::{GspSolution, InitialLaw};
use crate::quadrature::{integrate_with_breaks, Tolerance};
use crate::rng::{generate, Stream};
use crate::special::{ln_norm_cdf, norm_cdf};

/// Censoring fraction above which an Euler batch carries a warning.
pub const CENSORING_WARNING_FRACTION: f64 = 1e-4;

/// Tail mass of the target law beyond the default censoring horizon.
pub const DEFAULT_HORIZON_TAIL: f64 = 1e-7;

/// Absolute tolerance of [`oracle_cdf`].
pub const ORACLE_TOLERANCE: f64 = 1e-8;

/// Mass of the law of `ξ` ignored beyond the oracle's upper integration limit.
const ORACLE_TAIL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerConfig {
    pub dt: f64,
    pub t_max: f64,
    pub bridge_correction: bool,
}

impl EulerConfig {
    pub fn new(dt: f64, t_max: f64, bridge_correction: bool) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if !(t_max > dt && t_max.is_finite()) {
            return Err(Error::invalid(format!(
                "t_max ({t_max}) must be finite and exceed dt ({dt})"
            )));
        }
        Ok(EulerConfig {
            dt,
            t_max,
            bridge_correction,
        })
    }

    /// Horizon at the target's `1 − 1e-7` quantile.
    pub fn for_solution(solution: &GspSolution, dt: f64, bridge_correction: bool) -> Result<Self> {
        let t_max = solution.target.quantile(1.0 - DEFAULT_HORIZON_TAIL)?;
        EulerConfig::new(dt, t_max.max(2.0 * dt), bridge_correction)
    }
}

/// Simulated `(ξ, τ)` pairs plus the metadata needed to regenerate them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub xi: Vec<f64>,
    pub tau: Vec<f64>,
    pub seed: u64,
    pub lanes: usize,
    pub method: Method,
    /// Requested number of paths; censored paths are not in `xi`/`tau`.
    pub requested: usize,
    pub censored: usize,
    pub euler: Option<EulerConfig>,
    pub warning: Option<String>,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Writes `xi,tau` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "xi,tau")?;
        for (x, t) in self.xi.iter().zip(&self.tau) {
            writeln!(out, "{x:.16e},{t:.16e}")?;
        }
        out.flush()
    }

    /// Sidecar metadata `{seed, lanes, method, n, config}`.
    pub fn sidecar(&self, solution: &GspSolution) -> BatchSidecar {
        BatchSidecar {
            seed: self.seed,
            lanes: self.lanes,
            method: self.method,
            n: self.requested,
            config: SidecarConfig {
                solution: solution.clone(),
                euler: self.euler,
                censored: self.censored,
                warning: self.warning.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSidecar {
    pub seed: u64,
    pub lanes: usize,
    pub method: Method,
    pub n: usize,
    pub config: SidecarConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarConfig {
    pub solution: GspSolution,
    pub euler: Option<EulerConfig>,
    pub censored: usize,
    pub warning: Option<String>,
}

/// Validated exact `(ξ, τ)` sampler for one solution.
#[derive(Debug, Clone)]
pub struct ExactSampler<'a> {
    initial: &'a InitialLaw,
    slope: f64,
}

impl<'a> ExactSampler<'a> {
    pub fn new(solution: &'a GspSolution) -> Result<Self> {
        let k = solution.slope;
        let ok = match solution.initial_law {
            InitialLaw::Convolution(_) | InitialLaw::ConvolutionMixture(_) => k > 0.0 && k.is_finite(),
            InitialLaw::Stable(_) => k == 0.0,
        };
        if !ok {
            return Err(Error::Unsupported(format!(
                "exact sampling needs a gamma-family initial law with k > 0 or a stable one with k = 0 (k = {k})"
            )));
        }
        Ok(ExactSampler {
            initial: &solution.initial_law,
            slope: k,
        })
    }

    /// One `(ξ, τ)` pair. Draws with `ξ = 0` (or a degenerate `τ`) are redrawn.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        loop {
            let xi = self.initial.sample(rng);
            if !(xi > 0.0 && xi.is_finite()) {
                continue;
            }
            let tau = if self.slope > 0.0 {
                match InverseGaussianLaw::new(xi / self.slope, xi * xi) {
                    Ok(ig) => ig.sample(rng),
                    Err(_) => continue,
                }
            } else {
                let z: f64 = rng.sample(StandardNormal);
                xi * xi / (z * z)
            };
            if tau > 0.0 && tau.is_finite() {
                return (xi, tau);
            }
        }
    }
}

fn unzip_pairs(pairs: Vec<(f64, f64)>) -> (Vec<f64>, Vec<f64>) {
    pairs.into_iter().unzip()
}

pub fn sample_exact(solution: &GspSolution, n: usize, seed: u64, lanes: usize) -> Result<SampleBatch> {
    let sampler = ExactSampler::new(solution)?;
    let (xi, tau) = unzip_pairs(generate(n, seed, lanes, |rng: &mut Stream| sampler.draw(rng)));
    Ok(SampleBatch {
        xi,
        tau,
        seed,
        lanes: lanes.max(1),
        method: Method::Exact,
        requested: n,
        censored: 0,
        euler: None,
        warning: None,
    })
}

/// Probability that a Brownian bridge over a step of length `dt` with
/// endpoint distances `d0`, `d1` above a line touches it: `exp(−2 d0 d1 / dt)`.
/// Returns 1 when either endpoint is on or below the line.
pub fn bridge_crossing_probability(d0: f64, d1: f64, dt: f64) -> f64 {
    if d0 <= 0.0 || d1 <= 0.0 {
        return 1.0;
    }
    (-2.0 * d0 * d1 / dt).exp()
}

/// Simulates one grid path from `ξ` and returns its crossing time, or `None`
/// if it survives to `t_max`. `d` is the distance of `X_t` above `kt`.
fn euler_path<R: Rng + ?Sized>(rng: &mut R, xi: f64, k: f64, cfg: &EulerConfig) -> Option<f64> {
    let dt = cfg.dt;
    let sd = dt.sqrt();
    let drift = k * dt;
    let mut d0 = xi;
    let mut step: u64 = 0;
    if d0 <= 0.0 {
        return Some(0.0);
    }
    loop {
        let t = step as f64 * dt;
        let z: f64 = rng.sample(StandardNormal);
        let d1 = d0 + sd * z - drift;
        if d1 <= 0.0 {
            return Some(t + dt * d0 / (d0 - d1));
        }
        if cfg.bridge_correction {
            let u: f64 = rng.random();
            if u < bridge_crossing_probability(d0, d1, dt) {
                return Some(t + dt * d0 / (d0 + d1));
            }
        }
        step += 1;
        if step as f64 * dt >= cfg.t_max {
            return None;
        }
        d0 = d1;
    }
}

/// Discretized validator: simulates `ξ + W_t` on a grid of width `dt`.
pub fn sample_euler(
    solution: &GspSolution,
    n: usize,
    cfg: &EulerConfig,
    seed: u64,
    lanes: usize,
) -> Result<SampleBatch> {
    let k = solution.slope;
    if !(k >= 0.0) {
        return Err(Error::domain(format!("slope must be >= 0, got {k}")));
    }
    let initial = &solution.initial_law;
    let draws = generate(n, seed, lanes, |rng: &mut Stream| loop {
        let xi = initial.sample(rng);
        if xi > 0.0 && xi.is_finite() {
            return (xi, euler_path(rng, xi, k, cfg));
        }
    });
    let mut xi = Vec::with_capacity(n);
    let mut tau = Vec::with_capacity(n);
    let mut censored = 0;
    for (x, t) in draws {
        match t {
            Some(t) => {
                xi.push(x);
                tau.push(t);
            }
            None => censored += 1,
        }
    }
    let fraction = if n == 0 { 0.0 } else { censored as f64 / n as f64 };
    let warning = (fraction > CENSORING_WARNING_FRACTION).then(|| {
        format!(
            "{censored} of {n} paths ({:.3e}) survived past t_max = {}",
            fraction, cfg.t_max
        )
    });
    Ok(SampleBatch {
        xi,
        tau,
        seed,
        lanes: lanes.max(1),
        method: Method::Euler,
        requested: n,
        censored,
        euler: Some(*cfg),
        warning,
    })
}

/// `P(τ ≤ t | ξ = x)` for `x + W_t` against `kt`:
/// `Φ((kt − x)/√t) + e^{2kx} Φ((−kt − x)/√t)`, second term in log space.
pub fn first_passage_cdf(x: f64, t: f64, k: f64) -> f64 {
    if t <= 0.0 {
        return if x <= 0.0 { 1.0 } else { 0.0 };
    }
    let sqrt_t = t.sqrt();
    let direct = norm_cdf((k * t - x) / sqrt_t);
    let reflected = (2.0 * k * x + ln_norm_cdf((-k * t - x) / sqrt_t)).exp();
    (direct + reflected).min(1.0)
}

/// `∫ P(τ ≤ t | ξ = x) g(x) dx` over the law of `ξ`, by adaptive quadrature.
pub fn oracle_cdf(solution: &GspSolution, t: f64) -> Result<f64> {
    let k = solution.slope;
    if !(k > 0.0) {
        return Err(Error::Unsupported(format!(
            "oracle needs a positive slope, got k = {k}"
        )));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let tol = Tolerance {
        abs: ORACLE_TOLERANCE,
        rel: 0.0,
        max_intervals: 8000,
    };
    let mut total = 0.0;
    for (weight, conv) in solution.initial_law.convolution_atoms()? {
        let upper = conv.upper_quantile_bound(ORACLE_TAIL);
        // the conditional CDF steps from 1 to 0 around x = kt over a width ~√t
        let centre = k * t;
        let width = 8.0 * t.sqrt();
        let mut points = vec![0.0];
        for p in [centre - width, centre, centre + width] {
            if p > 0.0 && p < upper {
                points.push(p);
            }
        }
        points.push(upper);
        let integrand = |x: f64| match conv.density(x) {
            Ok(g) if g.is_finite() => first_passage_cdf(x, t, k) * g,
            _ => 0.0,
        };
        let r = integrate_with_breaks(integrand, &points, tol)?;
        total += weight * r.value;
    }
    Ok(total.clamp(0.0, 1.0))
}
