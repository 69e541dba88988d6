//! Statistical and analytic checks on solutions and sample batches, and the
//! end-to-end verification pipeline that aggregates them into a report.

use serde::{Deserialize, Serialize};

use crate::distributions::{GammaLaw, GammaMixtureLaw, LaplaceTransform};
use crate::error::{Error, Result};
use crate::gsp::{log_grid, solve, GspSolution, HittingTimeTarget};
use crate::simulate::{oracle_cdf, sample_euler, sample_exact, EulerConfig, SampleBatch};

pub const KS_MIN_SAMPLES: usize = 100;
pub const KS_LEVEL: f64 = 0.01;
pub const CM_MAX_ORDER: usize = 8;
pub const CM_NOISE_FLOOR: f64 = 1e-7;
pub const MOMENT_GATE_SE: f64 = 5.0;
pub const JACKKNIFE_GROUPS: usize = 100;
pub const TRANSFORM_TOLERANCE: f64 = 1e-10;
pub const ORACLE_GRID_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub p_value: f64,
    pub reject_at_1pct: bool,
}

impl KsResult {
    fn new(statistic: f64, n: usize, m: Option<usize>, effective: f64) -> Self {
        let p_value = kolmogorov_sf(effective.sqrt() * statistic);
        KsResult {
            statistic,
            n,
            m,
            p_value,
            reject_at_1pct: p_value < KS_LEVEL,
        }
    }
}

/// `P(K > λ)` for the Kolmogorov distribution, series truncated at terms < 1e-12.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.0 {
        // theta-function form converges fast for small λ
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut cdf = 0.0;
        for j in (1..).step_by(2) {
            let term = (c * (j * j) as f64).exp();
            cdf += term;
            if term < 1e-12 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf
    } else {
        let mut sf = 0.0;
        for j in 1..=100 {
            let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
            sf += if j % 2 == 1 { term } else { -term };
            if term < 1e-12 {
                break;
            }
        }
        2.0 * sf
    };
    p.clamp(0.0, 1.0)
}

fn sorted_copy(samples: &[f64], what: &str) -> Result<Vec<f64>> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "{what} needs at least {KS_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid(format!("{what} received NaN samples")));
    }
    let mut v = samples.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    Ok(v)
}

pub fn ks_one_sample<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsResult> {
    let x = sorted_copy(samples, "one-sample KS")?;
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let f = cdf(xi);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult::new(d.min(1.0), x.len(), None, n))
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let a = sorted_copy(a, "two-sample KS")?;
    let b = sorted_copy(b, "two-sample KS")?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(KsResult::new(d, a.len(), Some(b.len()), n * m / (n + m)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmViolation {
    pub order: usize,
    pub s: f64,
    /// `(−1)ⁿ Δⁿ` at the offending point.
    pub value: f64,
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmResult {
    pub passed: bool,
    pub max_order: usize,
    pub points: usize,
    pub first_violation: Option<CmViolation>,
}

fn binomial(n: usize, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Finite-difference test of `(−1)ⁿ dⁿf/dsⁿ ≥ 0` for `n = 1..=max_order`.
///
/// Differences are central with step `max(1e-3, 1e-2·s)`, shifted forward
/// where the stencil would reach below zero. Negative values smaller than
/// `1e-7 · Σ C(n,j)|f(s_j)|` are treated as rounding noise.
pub fn cm_check<F: Fn(f64) -> f64>(transform: F, max_order: usize, s_grid: &[f64]) -> Result<CmResult> {
    if max_order == 0 || max_order > CM_MAX_ORDER {
        return Err(Error::invalid(format!(
            "max_order must lie in 1..={CM_MAX_ORDER}, got {max_order}"
        )));
    }
    if s_grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("CM grid points must be positive and finite"));
    }
    for order in 1..=max_order {
        for &s in s_grid {
            let h = (1e-2 * s).max(1e-3);
            let half = order as f64 / 2.0;
            let start = if s - half * h >= 0.0 { s - half * h } else { 0.0 };
            let mut diff = 0.0;
            let mut scale = 0.0;
            for j in 0..=order {
                let c = binomial(order, j);
                let f = transform(start + (order - j) as f64 * h);
                diff += if j % 2 == 0 { c * f } else { -c * f };
                scale += c * f.abs();
            }
            let signed = if order % 2 == 0 { diff } else { -diff };
            let floor = CM_NOISE_FLOOR * scale;
            if signed < -floor || !signed.is_finite() {
                return Ok(CmResult {
                    passed: false,
                    max_order,
                    points: s_grid.len(),
                    first_violation: Some(CmViolation {
                        order,
                        s,
                        value: signed,
                        noise_floor: floor,
                    }),
                });
            }
        }
    }
    Ok(CmResult {
        passed: true,
        max_order,
        points: s_grid.len(),
        first_violation: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub delta: f64,
    pub standard_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: usize,
    pub groups: usize,
    /// `E̅[ξ] − k·E̅[τ]`.
    pub first: MomentCheck,
    /// `E̅[ξ²] − (k²·E̅[τ²] − E̅[τ])`.
    pub second: MomentCheck,
    /// Pearson correlation of the paired columns; `τ | ξ` has mean `ξ/k`.
    pub correlation: f64,
    pub correlation_threshold: f64,
    pub correlation_passed: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: f64,
    x: f64,
    t: f64,
    xx: f64,
    tt: f64,
}

impl Sums {
    fn add(&mut self, x: f64, t: f64) {
        self.n += 1.0;
        self.x += x;
        self.t += t;
        self.xx += x * x;
        self.tt += t * t;
    }

    fn minus(&self, o: &Sums) -> Sums {
        Sums {
            n: self.n - o.n,
            x: self.x - o.x,
            t: self.t - o.t,
            xx: self.xx - o.xx,
            tt: self.tt - o.tt,
        }
    }

    fn deltas(&self, k: f64) -> (f64, f64) {
        let (mx, mt, mxx, mtt) = (self.x / self.n, self.t / self.n, self.xx / self.n, self.tt / self.n);
        (mx - k * mt, mxx - (k * k * mtt - mt))
    }
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    sxy / (sxx * syy).sqrt()
}

/// Moment identities `E[ξ] = kE[τ]` and `E[ξ²] = k²E[τ²] − E[τ]` on a batch,
/// with grouped-jackknife standard errors, plus a paired-correlation check.
pub fn moment_report(batch: &SampleBatch, solution: &GspSolution) -> Result<MomentReport> {
    let n = batch.len();
    if n < 2 || batch.xi.len() != n {
        return Err(Error::invalid(format!(
            "moment report needs a paired batch of at least 2 draws, got {n}"
        )));
    }
    let k = solution.slope;
    if !(k > 0.0) || matches!(solution.target, HittingTimeTarget::Stable(_)) {
        return Err(Error::Unsupported(
            "moment identities need finite moments and k > 0".into(),
        ));
    }
    let groups = JACKKNIFE_GROUPS.min(n);
    let mut per_group = vec![Sums::default(); groups];
    for (i, (&x, &t)) in batch.xi.iter().zip(&batch.tau).enumerate() {
        per_group[i * groups / n].add(x, t);
    }
    let mut total = Sums::default();
    for g in &per_group {
        total.n += g.n;
        total.x += g.x;
        total.t += g.t;
        total.xx += g.xx;
        total.tt += g.tt;
    }
    let (d1, d2) = total.deltas(k);
    let leave_out: Vec<(f64, f64)> = per_group.iter().map(|g| total.minus(g).deltas(k)).collect();
    let gf = groups as f64;
    let se = |pick: fn(&(f64, f64)) -> f64| {
        let mean = leave_out.iter().map(pick).sum::<f64>() / gf;
        ((gf - 1.0) / gf * leave_out.iter().map(|v| (pick(v) - mean).powi(2)).sum::<f64>()).sqrt()
    };
    let check = |delta: f64, standard_error: f64| MomentCheck {
        delta,
        standard_error,
        passed: delta.abs() <= MOMENT_GATE_SE * standard_error,
    };
    let first = check(d1, se(|v| v.0));
    let second = check(d2, se(|v| v.1));
    let correlation = pearson(&batch.xi, &batch.tau);
    let correlation_threshold = MOMENT_GATE_SE / (n as f64).sqrt();
    let correlation_passed = correlation > correlation_threshold;
    Ok(MomentReport {
        n,
        groups,
        first,
        second,
        correlation,
        correlation_threshold,
        correlation_passed,
        passed: first.passed && second.passed && correlation_passed,
    })
}

/// `n` equally spaced times on `(0, q]`, `q` the target's `1 − 1e-4` quantile.
pub fn oracle_time_grid(target: &HittingTimeTarget, n: usize) -> Result<Vec<f64>> {
    let q = target.quantile(1.0 - 1e-4)?;
    Ok((1..=n).map(|i| q * i as f64 / n as f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub t: f64,
    pub oracle_cdf: f64,
    pub target_cdf: f64,
    pub abs_err: f64,
}

pub fn oracle_table(solution: &GspSolution, times: &[f64]) -> Result<Vec<OracleRow>> {
    times
        .iter()
        .map(|&t| {
            let oracle = oracle_cdf(solution, t)?;
            let target = if t <= 0.0 { 0.0 } else { solution.target.cdf(t)? };
            Ok(OracleRow {
                t,
                oracle_cdf: oracle,
                target_cdf: target,
                abs_err: (oracle - target).abs(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerCheck {
    pub n: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationCase {
    pub id: String,
    pub target: HittingTimeTarget,
    pub k: f64,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub euler: Option<EulerCheck>,
    pub oracle_points: usize,
    pub cm_max_order: usize,
}

impl VerificationCase {
    fn standard(id: &str, target: HittingTimeTarget, k: f64, seed: u64) -> Self {
        VerificationCase {
            id: id.into(),
            target,
            k,
            n: 1_000_000,
            seed,
            euler: Some(EulerCheck { n: 100_000, dt: 1e-3 }),
            oracle_points: 50,
            cm_max_order: CM_MAX_ORDER,
        }
    }
}

/// The three cases every release is checked against.
pub fn shipped_cases() -> Vec<VerificationCase> {
    let gamma = |shape, rate| GammaLaw::new(shape, rate).expect("valid shipped law");
    let mixture =
        GammaMixtureLaw::new(vec![(0.5, gamma(1.0, 0.5)), (0.5, gamma(2.0, 1.0))]).expect("valid shipped mixture");
    vec![
        VerificationCase::standard(
            "exponential-minimal",
            HittingTimeTarget::Gamma(gamma(1.0, 1.0)),
            std::f64::consts::SQRT_2,
            20_240_901,
        ),
        VerificationCase::standard("gamma2-k2", HittingTimeTarget::Gamma(gamma(2.0, 1.0)), 2.0, 20_240_902),
        VerificationCase::standard("mixture-k2", HittingTimeTarget::GammaMixture(mixture), 2.0, 20_240_903),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion<T> {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl<T> Criterion<T> {
    fn judge(outcome: Result<T>, passed: impl FnOnce(&T) -> bool) -> Self {
        match outcome {
            Ok(r) => Criterion {
                status: if passed(&r) { Status::Pass } else { Status::Fail },
                result: Some(r),
                error: None,
            },
            Err(e) => Criterion {
                status: Status::Error,
                result: None,
                error: Some(e.to_string()),
            },
        }
    }

    fn skipped() -> Self {
        Criterion {
            status: Status::Skipped,
            result: None,
            error: None,
        }
    }

    pub fn ok(&self) -> bool {
        matches!(self.status, Status::Pass | Status::Skipped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformCheck {
    pub points: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub points: usize,
    pub max_abs_error: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub case: String,
    pub slope: f64,
    pub minimal_slope: f64,
    pub transform_identity: Criterion<TransformCheck>,
    pub exact_ks: Criterion<KsResult>,
    pub euler_ks: Criterion<KsResult>,
    pub oracle: Criterion<OracleCheck>,
    pub moments: Criterion<MomentReport>,
    pub complete_monotonicity: Criterion<CmResult>,
    pub verdict: Status,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.verdict == Status::Pass
    }
}

/// Offset applied to the case seed for the Euler batch so its streams are
/// independent of the exact batch it is compared with.
const EULER_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn run_verification(case: &VerificationCase, lanes: usize) -> Result<VerificationReport> {
    let solution = solve(&case.target, case.k)?;

    let s_grid = log_grid(1e-3, 1e3, 40);
    let transform_identity = Criterion::judge(
        solution
            .transform_identity_error(&s_grid)
            .map(|max_error| TransformCheck {
                points: s_grid.len(),
                max_error,
                tolerance: TRANSFORM_TOLERANCE,
            }),
        |c| c.max_error < c.tolerance,
    );

    let exact = sample_exact(&solution, case.n, case.seed, lanes);
    let exact_ks = Criterion::judge(
        exact.as_ref().map_err(Clone::clone).and_then(|b| {
            let target = &solution.target;
            ks_one_sample(&b.tau, |t| target.cdf(t).unwrap_or(f64::NAN))
        }),
        |r| !r.reject_at_1pct,
    );

    let euler_ks = match case.euler {
        None => Criterion::skipped(),
        Some(check) => Criterion::judge(
            exact.as_ref().map_err(Clone::clone).and_then(|b| {
                let cfg = EulerConfig::for_solution(&solution, check.dt, true)?;
                let euler = sample_euler(
                    &solution,
                    check.n,
                    &cfg,
                    case.seed.wrapping_add(EULER_SEED_OFFSET),
                    lanes,
                )?;
                let m = check.n.min(b.len());
                ks_two_sample(&euler.tau, &b.tau[..m])
            }),
            |r| !r.reject_at_1pct,
        ),
    };

    let oracle = Criterion::judge(
        oracle_time_grid(&solution.target, case.oracle_points)
            .and_then(|ts| oracle_table(&solution, &ts))
            .map(|rows| OracleCheck {
                points: rows.len(),
                max_abs_error: rows.iter().map(|r| r.abs_err).fold(0.0, f64::max),
                tolerance: ORACLE_GRID_TOLERANCE,
            }),
        |c| c.max_abs_error < c.tolerance,
    );

    let moments = Criterion::judge(
        exact
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|b| moment_report(b, &solution)),
        |r| r.passed,
    );

    let law = &solution.initial_law;
    let complete_monotonicity = Criterion::judge(
        cm_check(|s| law.laplace_at(s), case.cm_max_order, &log_grid(1e-2, 1e2, 30)),
        |r| r.passed,
    );

    let all_ok = transform_identity.ok()
        && exact_ks.ok()
        && euler_ks.ok()
        && oracle.ok()
        && moments.ok()
        && complete_monotonicity.ok();
    Ok(VerificationReport {
        case: case.id.clone(),
        slope: solution.slope,
        minimal_slope: solution.minimal_slope,
        transform_identity,
        exact_ks,
        euler_ks,
        oracle,
        moments,
        complete_monotonicity,
        verdict: if all_ok { Status::Pass } else { Status::Fail },
    })
}
