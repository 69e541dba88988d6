//! Inverse first-passage problem for `X_t = ξ + W_t` against the line `kt`:
//! given the law of the hitting time `τ`, find the law of the random start `ξ`.
//!
//! Everything rests on the transform identity `E e^{-sξ} = f̂(ks + s²/2)`,
//! where `f̂` is the Laplace transform of `τ`.

use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    ConvolutionMixture, GammaConvolution, GammaLaw, GammaMixtureLaw, LaplaceTransform, Law, LawRepr, Moments, StableLaw,
};
use crate::error::{Error, Result};

/// Relative slack on `k² ≥ 2λ` so that `k = √(2λ)` computed in floating
/// point is admitted.
const SLOPE_SLACK: f64 = 1e-14;

/// Relative variance below which a moments-only target counts as constant.
const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Prescribed law of the hitting time.
#[derive(Debug, Clone, PartialEq)]
pub enum HittingTimeTarget {
    Gamma(GammaLaw),
    GammaMixture(GammaMixtureLaw),
    Stable(StableLaw),
    /// Only `E[τ]` and `E[τ²]` are known; feasibility answers only.
    MomentsOnly {
        mean: f64,
        second_moment: f64,
    },
}

impl HittingTimeTarget {
    pub fn moments_only(mean: f64, second_moment: f64) -> Result<Self> {
        check_moments(mean, second_moment)?;
        Ok(HittingTimeTarget::MomentsOnly { mean, second_moment })
    }

    /// Laplace transform of `τ`, when the target has one.
    pub fn laplace_at(&self, s: f64) -> Option<f64> {
        match self {
            HittingTimeTarget::Gamma(g) => Some(g.laplace_at(s)),
            HittingTimeTarget::GammaMixture(m) => Some(m.laplace_at(s)),
            HittingTimeTarget::Stable(st) => Some(st.laplace_at(s)),
            HittingTimeTarget::MomentsOnly { .. } => None,
        }
    }

    /// `(E[τ], E[τ²])`, when finite.
    pub fn moments(&self) -> Result<(f64, f64)> {
        match self {
            HittingTimeTarget::Gamma(g) => Ok((g.mean(), g.second_moment())),
            HittingTimeTarget::GammaMixture(m) => Ok((m.mean(), m.second_moment())),
            HittingTimeTarget::MomentsOnly { mean, second_moment } => Ok((*mean, *second_moment)),
            HittingTimeTarget::Stable(_) => Err(Error::Unsupported(
                "one-sided stable hitting times have infinite mean".into(),
            )),
        }
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        match self {
            HittingTimeTarget::Gamma(g) => Ok(g.cdf(t)),
            HittingTimeTarget::GammaMixture(m) => Ok(m.cdf(t)),
            _ => Err(Error::Unsupported(
                "closed-form CDF is available for gamma-family targets only".into(),
            )),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        match self {
            HittingTimeTarget::Gamma(g) => Ok(g.quantile(p)),
            HittingTimeTarget::GammaMixture(m) => Ok(m.quantile(p)),
            _ => Err(Error::Unsupported(
                "quantiles are available for gamma-family targets only".into(),
            )),
        }
    }
}

fn check_moments(mean: f64, second_moment: f64) -> Result<()> {
    if !(mean > 0.0 && mean.is_finite()) || !(second_moment > 0.0 && second_moment.is_finite()) {
        return Err(Error::domain(format!(
            "moments must be positive and finite, got mean {mean}, second moment {second_moment}"
        )));
    }
    let variance = second_moment - mean * mean;
    if variance <= DEGENERATE_VARIANCE * mean * mean {
        return Err(Error::DegenerateTarget(format!(
            "variance {variance:e} is numerically zero: a constant hitting time has no solution"
        )));
    }
    Ok(())
}

impl From<HittingTimeTarget> for LawRepr {
    fn from(target: HittingTimeTarget) -> Self {
        match target {
            HittingTimeTarget::Gamma(g) => Law::Gamma(g).into(),
            HittingTimeTarget::GammaMixture(m) => Law::GammaMixture(m).into(),
            HittingTimeTarget::Stable(s) => Law::Stable(s).into(),
            HittingTimeTarget::MomentsOnly { mean, second_moment } => LawRepr {
                mean: Some(mean),
                second_moment: Some(second_moment),
                ..LawRepr::tagged("moments_only")
            },
        }
    }
}

impl TryFrom<LawRepr> for HittingTimeTarget {
    type Error = Error;

    fn try_from(repr: LawRepr) -> Result<Self> {
        if repr.kind == "moments_only" {
            if repr.shape.is_some()
                || repr.rate.is_some()
                || repr.components.is_some()
                || repr.atoms.is_some()
                || repr.index.is_some()
                || repr.scale.is_some()
            {
                return Err(Error::invalid("moments_only accepts only `mean` and `second_moment`"));
            }
            return HittingTimeTarget::moments_only(
                LawRepr::require(repr.mean, "mean", "moments_only")?,
                LawRepr::require(repr.second_moment, "second_moment", "moments_only")?,
            );
        }
        match Law::try_from(repr)? {
            Law::Gamma(g) => Ok(HittingTimeTarget::Gamma(g)),
            Law::GammaMixture(m) => Ok(HittingTimeTarget::GammaMixture(m)),
            Law::Stable(s) => Ok(HittingTimeTarget::Stable(s)),
            Law::GammaConvolution(_) | Law::ConvolutionMixture(_) => Err(Error::Unsupported(
                "hitting-time targets must be gamma, gamma_mixture, stable or moments_only".into(),
            )),
        }
    }
}

/// Law of the random starting point `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    Convolution(GammaConvolution),
    ConvolutionMixture(ConvolutionMixture),
    Stable(StableLaw),
}

impl InitialLaw {
    pub fn density(&self, x: f64) -> Result<f64> {
        match self {
            InitialLaw::Convolution(c) => c.density(x),
            InitialLaw::ConvolutionMixture(m) => m.density(x),
            InitialLaw::Stable(_) => Err(Error::Unsupported("stable laws expose no density".into())),
        }
    }

    /// Gamma convolutions with their weights; a single convolution has weight one.
    pub fn convolution_atoms(&self) -> Result<Vec<(f64, &GammaConvolution)>> {
        match self {
            InitialLaw::Convolution(c) => Ok(vec![(1.0, c)]),
            InitialLaw::ConvolutionMixture(m) => Ok(m.atoms().iter().map(|a| (a.weight, &a.law)).collect()),
            InitialLaw::Stable(_) => Err(Error::Unsupported("stable initial law has no gamma atoms".into())),
        }
    }

    /// Mean and variance, for the gamma family.
    pub fn mean_variance(&self) -> Result<(f64, f64)> {
        match self {
            InitialLaw::Convolution(c) => Ok((c.mean(), c.variance())),
            InitialLaw::ConvolutionMixture(m) => Ok((m.mean(), m.variance())),
            InitialLaw::Stable(_) => Err(Error::Unsupported("stable initial law has infinite mean".into())),
        }
    }
}

impl LaplaceTransform for InitialLaw {
    fn laplace_at(&self, s: f64) -> f64 {
        match self {
            InitialLaw::Convolution(c) => c.laplace_at(s),
            InitialLaw::ConvolutionMixture(m) => m.laplace_at(s),
            InitialLaw::Stable(st) => st.laplace_at(s),
        }
    }
}

impl Distribution<f64> for InitialLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InitialLaw::Convolution(c) => c.sample(rng),
            InitialLaw::ConvolutionMixture(m) => m.sample(rng),
            InitialLaw::Stable(st) => st.sample(rng),
        }
    }
}

impl From<InitialLaw> for LawRepr {
    fn from(law: InitialLaw) -> Self {
        match law {
            InitialLaw::Convolution(c) => Law::GammaConvolution(c).into(),
            InitialLaw::ConvolutionMixture(m) => Law::ConvolutionMixture(m).into(),
            InitialLaw::Stable(s) => Law::Stable(s).into(),
        }
    }
}

impl TryFrom<LawRepr> for InitialLaw {
    type Error = Error;

    fn try_from(repr: LawRepr) -> Result<Self> {
        match Law::try_from(repr)? {
            Law::GammaConvolution(c) => Ok(InitialLaw::Convolution(c)),
            Law::ConvolutionMixture(m) => Ok(InitialLaw::ConvolutionMixture(m)),
            Law::Stable(s) => Ok(InitialLaw::Stable(s)),
            Law::Gamma(g) => Ok(InitialLaw::Convolution(GammaConvolution::new(vec![g])?)),
            Law::GammaMixture(m) => Ok(InitialLaw::ConvolutionMixture(
                m.try_map(|_, g| GammaConvolution::new(vec![*g]))?,
            )),
        }
    }
}

macro_rules! serde_via_repr {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                LawRepr::from(self.clone()).serialize(serializer)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
                let repr = LawRepr::deserialize(deserializer)?;
                <$ty>::try_from(repr).map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_repr!(HittingTimeTarget);
serde_via_repr!(InitialLaw);

/// Solution triplet: target law of `τ`, slope `k`, and the law of `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GspSolution {
    pub target: HittingTimeTarget,
    pub slope: f64,
    pub minimal_slope: f64,
    pub initial_law: InitialLaw,
}

impl GspSolution {
    /// Largest `|ĝ(s) − f̂(ks + s²/2)|` over `s_points`.
    pub fn transform_identity_error(&self, s_points: &[f64]) -> Result<f64> {
        let composed = xi_laplace(&self.target, self.slope)?;
        Ok(s_points
            .iter()
            .map(|&s| (self.initial_law.laplace_at(s) - composed.eval(s)).abs())
            .fold(0.0, f64::max))
    }

    /// Checks a deserialized solution: slope admissible and transform identity
    /// holding to 1e-10 on a log grid.
    pub fn validate(&self) -> Result<()> {
        if !(self.slope >= 0.0) {
            return Err(Error::invalid(format!("slope must be >= 0, got {}", self.slope)));
        }
        let k_star = minimal_slope(&self.target).map(|m| m.value).unwrap_or(0.0);
        if self.slope < k_star * (1.0 - SLOPE_SLACK) {
            return Err(Error::InfeasibleSlope {
                k: self.slope,
                k_star,
                sharp: true,
                reason: "solution slope is below the minimal slope".into(),
            });
        }
        let err = self.transform_identity_error(&log_grid(1e-3, 1e3, 40))?;
        if !(err < 1e-10) {
            return Err(Error::invalid(format!(
                "initial law does not satisfy the transform identity (max error {err:e})"
            )));
        }
        Ok(())
    }
}

/// `n` log-spaced points spanning `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// The transform `s ↦ f̂(ks + s²/2)` that the law of `ξ` must have.
#[derive(Debug, Clone, PartialEq)]
pub struct XiTransform {
    target: HittingTimeTarget,
    slope: f64,
}

impl XiTransform {
    pub fn eval(&self, s: f64) -> f64 {
        let u = self.slope * s + 0.5 * s * s;
        self.target
            .laplace_at(u)
            .expect("target transform checked at construction")
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }
}

pub fn xi_laplace(target: &HittingTimeTarget, k: f64) -> Result<XiTransform> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::domain(format!("slope must be >= 0, got {k}")));
    }
    if target.laplace_at(0.0).is_none() {
        return Err(Error::Unsupported(
            "moments-only targets have no Laplace transform".into(),
        ));
    }
    Ok(XiTransform {
        target: target.clone(),
        slope: k,
    })
}

/// Substitution `u(s) = √(s² + 2ks + k*²) − k*` satisfying
/// `u²/2 + k* u = s²/2 + ks`, so that `f̂(ks + s²/2) = ĝ*(u(s))`.
pub fn slope_lift(k_star: f64, k: f64) -> impl Fn(f64) -> f64 {
    move |s: f64| (s * s + 2.0 * k * s + k_star * k_star).sqrt() - k_star
}

/// `k² − 2λ`, clamped at zero on the boundary; errors below it.
fn discriminant(rate: f64, k: f64) -> Result<f64> {
    let d = k * k - 2.0 * rate;
    if d < -SLOPE_SLACK * 2.0 * rate || !(k > 0.0) {
        return Err(Error::InfeasibleSlope {
            k,
            k_star: (2.0 * rate).sqrt(),
            sharp: true,
            reason: format!("gamma target with rate {rate} needs k >= sqrt(2 * rate)"),
        });
    }
    // rounding-level discriminants are the boundary case λ₁ = λ₂
    if d <= 8.0 * f64::EPSILON * (k * k + 2.0 * rate) {
        return Ok(0.0);
    }
    Ok(d)
}

/// Gamma hitting time `Γ(γ, λ)`: `ξ = ξ₁ + ξ₂` with `ξᵢ ~ Γ(γ, λᵢ)`,
/// `λ₁,₂ = k ∓ √(k² − 2λ)`.
pub fn solve_gamma(target: &GammaLaw, k: f64) -> Result<GammaConvolution> {
    let root = discriminant(target.rate(), k)?.sqrt();
    let fast = k + root;
    // λ₁ = 2λ/λ₂ avoids cancellation in k − √(k² − 2λ) for k² ≫ 2λ
    let slow = 2.0 * target.rate() / fast;
    GammaConvolution::new(vec![
        GammaLaw::new(target.shape(), slow)?,
        GammaLaw::new(target.shape(), fast)?,
    ])
}

pub fn solve_gamma_mixture(target: &GammaMixtureLaw, k: f64) -> Result<ConvolutionMixture> {
    let k_star = (2.0 * target.max_rate()).sqrt();
    target.try_map(|i, atom| {
        solve_gamma(atom, k).map_err(|e| match e {
            Error::InfeasibleSlope { k, .. } => Error::InfeasibleSlope {
                k,
                k_star,
                sharp: true,
                reason: format!(
                    "mixture atom {i} (shape {}, rate {}) exceeds the support bound rate <= k^2/2",
                    atom.shape(),
                    atom.rate()
                ),
            },
            other => other,
        })
    })
}

/// Stable hitting time with transform `exp(−c s^α)` at `k = 0`: `ξ` is stable
/// with index `2α` and scale `c / 2^α`.
pub fn solve_stable(target: &StableLaw) -> Result<StableLaw> {
    let alpha = target.index();
    if alpha >= 0.5 {
        return Err(Error::domain(format!(
            "stable index {alpha} >= 1/2 would give a starting law of index >= 1"
        )));
    }
    StableLaw::new(2.0 * alpha, target.scale() / 2f64.powf(alpha))
}

/// Solves for the law of `ξ` at slope `k`.
pub fn solve(target: &HittingTimeTarget, k: f64) -> Result<GspSolution> {
    let (initial_law, k_star) = match target {
        HittingTimeTarget::Gamma(g) => (InitialLaw::Convolution(solve_gamma(g, k)?), (2.0 * g.rate()).sqrt()),
        HittingTimeTarget::GammaMixture(m) => (
            InitialLaw::ConvolutionMixture(solve_gamma_mixture(m, k)?),
            (2.0 * m.max_rate()).sqrt(),
        ),
        HittingTimeTarget::Stable(s) => {
            if k != 0.0 {
                return Err(Error::Unsupported(format!(
                    "stable targets are solved at slope k = 0 only, got k = {k}"
                )));
            }
            (InitialLaw::Stable(solve_stable(s)?), 0.0)
        }
        HittingTimeTarget::MomentsOnly { .. } => {
            return Err(Error::Unsupported(
                "moments-only targets admit a feasibility check but no initial law".into(),
            ))
        }
    };
    Ok(GspSolution {
        target: target.clone(),
        slope: k,
        minimal_slope: k_star,
        initial_law,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinimalSlope {
    pub value: f64,
    /// False when `value` is only a necessary condition.
    pub sharp: bool,
}

pub fn minimal_slope(target: &HittingTimeTarget) -> Result<MinimalSlope> {
    match target {
        HittingTimeTarget::Gamma(g) => Ok(MinimalSlope {
            value: (2.0 * g.rate()).sqrt(),
            sharp: true,
        }),
        HittingTimeTarget::GammaMixture(m) => Ok(MinimalSlope {
            value: (2.0 * m.max_rate()).sqrt(),
            sharp: true,
        }),
        HittingTimeTarget::MomentsOnly { mean, second_moment } => Ok(MinimalSlope {
            value: moment_bound(*mean, *second_moment),
            sharp: false,
        }),
        HittingTimeTarget::Stable(_) => Err(Error::Unsupported(
            "stable targets are solved at k = 0 and have no slope threshold".into(),
        )),
    }
}

fn moment_bound(mean: f64, second_moment: f64) -> f64 {
    mean.sqrt() / (second_moment - mean * mean).sqrt()
}

/// Moments of `ξ` implied by `E[ξ] = k E[τ]` and `E[ξ²] = k² E[τ²] − E[τ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct XiMoments {
    pub mean: f64,
    pub second_moment: f64,
    pub variance: f64,
}

impl XiMoments {
    fn implied(mean_tau: f64, second_moment_tau: f64, k: f64) -> Self {
        let mean = k * mean_tau;
        let second_moment = k * k * second_moment_tau - mean_tau;
        let variance = (k * k * (second_moment_tau - mean_tau * mean_tau) - mean_tau).max(0.0);
        XiMoments {
            mean,
            second_moment,
            variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub verdict: Verdict,
    /// Necessary bound `√E[τ] / σ(τ)`.
    pub bound: f64,
    pub xi: Option<XiMoments>,
}

/// Moment-based necessary condition `k ≥ √E[τ] / σ(τ)`.
pub fn feasibility_check(mean: f64, second_moment: f64, k: f64) -> Result<Feasibility> {
    check_moments(mean, second_moment)?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::domain(format!("slope must be positive, got {k}")));
    }
    let bound = moment_bound(mean, second_moment);
    if k < bound {
        return Ok(Feasibility {
            verdict: Verdict::Infeasible,
            bound,
            xi: None,
        });
    }
    Ok(Feasibility {
        verdict: Verdict::Feasible,
        bound,
        xi: Some(XiMoments::implied(mean, second_moment, k)),
    })
}

pub fn xi_moments(target: &HittingTimeTarget, k: f64) -> Result<XiMoments> {
    match target {
        HittingTimeTarget::MomentsOnly { mean, second_moment } => {
            let f = feasibility_check(*mean, *second_moment, k)?;
            f.xi.ok_or(Error::InfeasibleSlope {
                k,
                k_star: f.bound,
                sharp: false,
                reason: "slope is below the moment bound sqrt(E[tau]) / sd(tau)".into(),
            })
        }
        HittingTimeTarget::Stable(_) => Err(Error::Unsupported("stable targets have no finite moments".into())),
        _ => {
            let k_star = minimal_slope(target)?.value;
            if k < k_star * (1.0 - SLOPE_SLACK) {
                return Err(Error::InfeasibleSlope {
                    k,
                    k_star,
                    sharp: true,
                    reason: "slope is below the minimal slope".into(),
                });
            }
            let (m1, m2) = target.moments()?;
            Ok(XiMoments::implied(m1, m2, k))
        }
    }
}

/// Exponential tilting of a gamma-target solution from slope `k₀` to `k`:
/// with `Δ = k − k₀` and `α = Δk₀ + Δ²/2`, the target becomes `Γ(γ, λ + α)`
/// and every component rate of `ξ` increases by `Δ`.
pub fn esscher_shift(base: &GspSolution, k: f64) -> Result<GspSolution> {
    let HittingTimeTarget::Gamma(target) = &base.target else {
        return Err(Error::Unsupported(
            "Esscher shifts are implemented for gamma targets".into(),
        ));
    };
    let InitialLaw::Convolution(xi) = &base.initial_law else {
        return Err(Error::invalid("gamma-target solution must carry a gamma convolution"));
    };
    let k0 = base.slope;
    if !(k >= k0) {
        return Err(Error::domain(format!("Esscher shift needs k >= k0 = {k0}, got {k}")));
    }
    let delta = k - k0;
    let alpha = delta * k0 + 0.5 * delta * delta;
    let tilted_target = GammaLaw::new(target.shape(), target.rate() + alpha)?;
    let tilted_xi = GammaConvolution::new(
        xi.components()
            .iter()
            .map(|c| GammaLaw::new(c.shape(), c.rate() + delta))
            .collect::<Result<Vec<_>>>()?,
    )?;
    Ok(GspSolution {
        target: HittingTimeTarget::Gamma(tilted_target),
        slope: k,
        minimal_slope: (2.0 * tilted_target.rate()).sqrt(),
        initial_law: InitialLaw::Convolution(tilted_xi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn gamma(shape: f64, rate: f64) -> GammaLaw {
        GammaLaw::new(shape, rate).unwrap()
    }

    fn gamma_target(shape: f64, rate: f64) -> HittingTimeTarget {
        HittingTimeTarget::Gamma(gamma(shape, rate))
    }

    #[test]
    fn xi_laplace_examples() {
        let t = xi_laplace(&gamma_target(1.0, 1.0), 0.0).unwrap();
        assert_eq!(t.eval(0.0), 1.0);
        let t = xi_laplace(&gamma_target(1.0, 1.0), SQRT2).unwrap();
        assert_relative_eq!(t.eval(SQRT2), 0.25, max_relative = 1e-15);
        // exp(-(2²/2)^0.25) = exp(-2^0.25)
        let st = HittingTimeTarget::Stable(StableLaw::new(0.25, 1.0).unwrap());
        let t = xi_laplace(&st, 0.0).unwrap();
        assert_relative_eq!(t.eval(2.0), 0.30446257219499123, max_relative = 1e-14);
        assert!(xi_laplace(&HittingTimeTarget::moments_only(1.0, 2.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn solve_gamma_minimal_is_erlang_two() {
        let c = solve_gamma(&gamma(1.0, 1.0), SQRT2).unwrap();
        for comp in c.components() {
            assert_eq!(comp.shape(), 1.0);
            assert_relative_eq!(comp.rate(), SQRT2, max_relative = 1e-15);
        }
    }

    #[test]
    fn solve_gamma_rates() {
        let c = solve_gamma(&gamma(1.0, 1.0), 2.0).unwrap();
        let r = c.rates();
        assert_relative_eq!(r[0], 0.5857864376269049, max_relative = 1e-14);
        assert_relative_eq!(r[1], 3.414213562373095, max_relative = 1e-14);
    }

    #[test]
    fn solve_gamma_infeasible_carries_bound() {
        match solve_gamma(&gamma(1.0, 1.0), 1.0) {
            Err(Error::InfeasibleSlope { k_star, sharp, .. }) => {
                assert_relative_eq!(k_star, SQRT2, max_relative = 1e-15);
                assert!(sharp);
            }
            other => panic!("expected infeasible slope, got {other:?}"),
        }
    }

    #[test]
    fn boundary_slope_from_minimal_slope_is_admitted() {
        for &rate in &[0.1, 0.3, 1.0, 7.0, 1234.5] {
            let target = gamma_target(2.0, rate);
            let k = minimal_slope(&target).unwrap().value;
            let c = solve_gamma(&gamma(2.0, rate), k).unwrap();
            assert!(c.rates().iter().all(|r| r.is_finite()));
        }
    }

    #[test]
    fn mixture_solves_atom_wise() {
        let single = GammaMixtureLaw::single(gamma(1.0, 1.0));
        let s = solve_gamma_mixture(&single, 2.0).unwrap();
        assert_eq!(s.atoms()[0].weight, 1.0);
        assert_eq!(s.atoms()[0].law, solve_gamma(&gamma(1.0, 1.0), 2.0).unwrap());

        let m = GammaMixtureLaw::new(vec![(0.5, gamma(1.0, 0.5)), (0.5, gamma(2.0, 1.0))]).unwrap();
        let s = solve_gamma_mixture(&m, 2.0).unwrap();
        let r0 = s.atoms()[0].law.rates();
        let r1 = s.atoms()[1].law.rates();
        assert_relative_eq!(r0[0], 0.2679491924311228, max_relative = 1e-13);
        assert_relative_eq!(r0[1], 3.732050807568877, max_relative = 1e-14);
        assert_relative_eq!(r1[0], 0.5857864376269049, max_relative = 1e-14);
        assert_relative_eq!(r1[1], 3.414213562373095, max_relative = 1e-14);
        assert_eq!(s.atoms()[1].law.components()[0].shape(), 2.0);
        assert_eq!(s.atoms()[0].weight, 0.5);
    }

    #[test]
    fn mixture_infeasible_names_atom() {
        let m = GammaMixtureLaw::new(vec![(0.5, gamma(1.0, 1.0)), (0.5, gamma(1.0, 3.0))]).unwrap();
        match solve_gamma_mixture(&m, 2.0) {
            Err(Error::InfeasibleSlope { reason, k_star, .. }) => {
                assert!(reason.contains("atom 1"), "{reason}");
                assert_relative_eq!(k_star, 6f64.sqrt(), max_relative = 1e-15);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        assert!(solve_gamma_mixture(&GammaMixtureLaw::single(gamma(1.0, 3.0)), 2.0).is_err());
    }

    #[test]
    fn solve_stable_examples() {
        let s = solve_stable(&StableLaw::new(0.25, 1.0).unwrap()).unwrap();
        assert_eq!(s.index(), 0.5);
        assert_relative_eq!(s.scale(), 0.8408964152537145, max_relative = 1e-15);
        let s = solve_stable(&StableLaw::new(0.25, 2f64.powf(0.25)).unwrap()).unwrap();
        assert_relative_eq!(s.scale(), 1.0, max_relative = 1e-15);
        let s = solve_stable(&StableLaw::new(0.3, 1.0).unwrap()).unwrap();
        assert_relative_eq!(s.index(), 0.6, max_relative = 1e-15);
        assert_relative_eq!(s.scale(), 0.8122523963562356, max_relative = 1e-15);
        assert!(matches!(
            solve_stable(&StableLaw::new(0.5, 1.0).unwrap()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn stable_identity_closed_form() {
        let target = StableLaw::new(0.3, 1.7).unwrap();
        let xi = solve_stable(&target).unwrap();
        let composed = xi_laplace(&HittingTimeTarget::Stable(target), 0.0).unwrap();
        for s in log_grid(1e-3, 1e2, 25) {
            assert!((xi.laplace_at(s) - composed.eval(s)).abs() < 1e-14);
        }
    }

    #[test]
    fn minimal_slope_examples() {
        assert_relative_eq!(
            minimal_slope(&gamma_target(1.0, 2.0)).unwrap().value,
            2.0,
            max_relative = 1e-15
        );
        let m = minimal_slope(&HittingTimeTarget::moments_only(1.0, 2.0).unwrap()).unwrap();
        assert_eq!(m.value, 1.0);
        assert!(!m.sharp);
        for &shape in &[0.1, 1.0, 5.0, 40.0] {
            assert_eq!(
                minimal_slope(&gamma_target(shape, 3.0)).unwrap().value,
                minimal_slope(&gamma_target(1.0, 3.0)).unwrap().value
            );
        }
        let st = HittingTimeTarget::Stable(StableLaw::new(0.3, 1.0).unwrap());
        assert!(matches!(minimal_slope(&st), Err(Error::Unsupported(_))));
    }

    #[test]
    fn feasibility_examples() {
        let f = feasibility_check(1.0, 2.0, 2.0).unwrap();
        assert_eq!(f.verdict, Verdict::Feasible);
        let xi = f.xi.unwrap();
        assert_eq!((xi.mean, xi.second_moment, xi.variance), (2.0, 7.0, 3.0));

        let f = feasibility_check(1.0, 2.0, 0.5).unwrap();
        assert_eq!(f.verdict, Verdict::Infeasible);
        assert_eq!(f.bound, 1.0);

        assert!(matches!(
            feasibility_check(1.0, 1.0 + 1e-18, 100.0),
            Err(Error::DegenerateTarget(_))
        ));
    }

    #[test]
    fn xi_moments_examples() {
        let m = xi_moments(&gamma_target(1.0, 1.0), 2.0).unwrap();
        assert_eq!((m.mean, m.second_moment), (2.0, 7.0));
        let m = xi_moments(&gamma_target(2.0, 2.0), 2.0).unwrap();
        assert_relative_eq!(m.mean, 2.0, max_relative = 1e-15);
        assert_relative_eq!(m.second_moment, 5.0, max_relative = 1e-15);

        let target = HittingTimeTarget::moments_only(1.5, 4.0).unwrap();
        let bound = minimal_slope(&target).unwrap().value;
        let m = xi_moments(&target, bound).unwrap();
        assert!(m.variance.abs() < 1e-12);
        assert!(xi_moments(&target, 0.9 * bound).is_err());
        assert!(xi_moments(&gamma_target(1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn moments_match_solved_law() {
        for &(shape, rate, k) in &[(1.0, 1.0, 2.0), (0.5, 2.0, 3.0), (2.5, 1.0, SQRT2)] {
            let target = gamma_target(shape, rate);
            let sol = solve(&target, k).unwrap();
            let (mean, var) = sol.initial_law.mean_variance().unwrap();
            let m = xi_moments(&target, k).unwrap();
            assert_relative_eq!(mean, m.mean, max_relative = 1e-12);
            assert_relative_eq!(var, m.variance, max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn esscher_examples() {
        let base = solve(&gamma_target(1.0, 1.0), SQRT2).unwrap();
        assert_eq!(esscher_shift(&base, SQRT2).unwrap(), base);

        let shifted = esscher_shift(&base, 2.0).unwrap();
        for r in match &shifted.initial_law {
            InitialLaw::Convolution(c) => c.rates(),
            _ => unreachable!(),
        } {
            assert!((r - 2.0).abs() < 1e-12);
        }
        let HittingTimeTarget::Gamma(t) = shifted.target else {
            unreachable!()
        };
        assert!((t.rate() - 2.0).abs() < 1e-12);
        let direct = solve_gamma(&t, 2.0).unwrap();
        for (a, b) in direct.rates().iter().zip(shifted_rates(&shifted)) {
            assert!((a - b).abs() < 1e-12);
        }

        let base = solve(&gamma_target(2.0, 0.5), 1.0).unwrap();
        let shifted = esscher_shift(&base, 1.5).unwrap();
        let direct = solve_gamma(&gamma(2.0, 0.5 + 0.625), 1.5).unwrap();
        for (a, b) in direct.rates().iter().zip(shifted_rates(&shifted)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(esscher_shift(&base, 0.9).is_err());
    }

    fn shifted_rates(sol: &GspSolution) -> Vec<f64> {
        match &sol.initial_law {
            InitialLaw::Convolution(c) => c.rates(),
            _ => unreachable!(),
        }
    }

    #[test]
    fn slope_lift_maps_minimal_transform() {
        let target = gamma_target(1.5, 1.0);
        let k_star = minimal_slope(&target).unwrap().value;
        let at_star = xi_laplace(&target, k_star).unwrap();
        for &k in &[k_star, 2.0, 5.0] {
            let lifted = slope_lift(k_star, k);
            let direct = xi_laplace(&target, k).unwrap();
            for s in log_grid(1e-3, 1e3, 30) {
                assert_relative_eq!(direct.eval(s), at_star.eval(lifted(s)), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn solution_json_shape() {
        let sol = solve(&gamma_target(1.0, 1.0), 2.0).unwrap();
        let v: serde_json::Value = serde_json::to_value(&sol).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 4);
        for key in ["target", "slope", "minimal_slope", "initial_law"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["initial_law"]["type"], "gamma_convolution");
        let back: GspSolution = serde_json::from_value(v).unwrap();
        assert_eq!(back, sol);
        back.validate().unwrap();
    }

    proptest! {
        #[test]
        fn vieta_identities(shape in 0.05f64..20.0, rate in 1e-3f64..50.0, excess in 0.0f64..10.0) {
            let k = (2.0 * rate).sqrt() * (1.0 + excess);
            let r = solve_gamma(&gamma(shape, rate), k).unwrap().rates();
            prop_assert!((r[0] * r[1] - 2.0 * rate).abs() <= 1e-12 * 2.0 * rate);
            prop_assert!((r[0] + r[1] - 2.0 * k).abs() <= 1e-12 * 2.0 * k);
        }

        #[test]
        fn transform_identity_holds(shape in 0.1f64..5.0, rate in 0.05f64..5.0, excess in 0.0f64..3.0) {
            let target = gamma_target(shape, rate);
            let k = (2.0 * rate).sqrt() * (1.0 + excess);
            let sol = solve(&target, k).unwrap();
            prop_assert!(sol.transform_identity_error(&log_grid(1e-3, 1e3, 40)).unwrap() < 1e-10);
        }

        #[test]
        fn xi_variance_increases_with_slope(shape in 0.1f64..5.0, rate in 0.05f64..5.0, a in 0.0f64..3.0, gap in 1e-3f64..3.0) {
            let k_star = (2.0 * rate).sqrt();
            let k1 = k_star * (1.0 + a);
            let k2 = k1 + gap;
            let v1 = solve_gamma(&gamma(shape, rate), k1).unwrap().variance();
            let v2 = solve_gamma(&gamma(shape, rate), k2).unwrap().variance();
            prop_assert!(v2 > v1);
        }

        #[test]
        fn esscher_matches_direct_solve(shape in 0.1f64..5.0, rate in 0.05f64..5.0, excess in 0.0f64..2.0, delta in 0.0f64..3.0) {
            let k0 = (2.0 * rate).sqrt() * (1.0 + excess);
            let base = solve(&gamma_target(shape, rate), k0).unwrap();
            let shifted = esscher_shift(&base, k0 + delta).unwrap();
            let HittingTimeTarget::Gamma(t) = shifted.target else { unreachable!() };
            let direct = solve_gamma(&t, k0 + delta).unwrap().rates();
            for (a, b) in direct.iter().zip(shifted_rates(&shifted)) {
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }
        }
    }
}
