//! Randomized Skorohod embedding on a wedge.
//!
//! A signed target `X` is split into its positive part (probability `p₊`)
//! and the magnitude of its negative part. On the upper side `X = k₊τ`, so
//! `τ = X/k₊` is a hitting-time target for the line `k₊t`; the lower side is
//! the same problem reflected through the time axis with slope `|k₋|`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{GammaLaw, GammaMixtureLaw, LaplaceTransform, Law};
use crate::error::{Error, Result};
use crate::gsp::{solve, GspSolution, HittingTimeTarget, InitialLaw};
use crate::rng::{generate, Stream};
use crate::simulate::ExactSampler;

/// Law of `|X|` on one side of the wedge.
#[derive(Debug, Clone, PartialEq)]
pub enum SideLaw {
    Gamma(GammaLaw),
    Mixture(GammaMixtureLaw),
}

impl SideLaw {
    fn max_rate(&self) -> f64 {
        match self {
            SideLaw::Gamma(g) => g.rate(),
            SideLaw::Mixture(m) => m.max_rate(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            SideLaw::Gamma(g) => g.cdf(x),
            SideLaw::Mixture(m) => m.cdf(x),
        }
    }

    pub fn laplace_at(&self, s: f64) -> f64 {
        match self {
            SideLaw::Gamma(g) => g.laplace_at(s),
            SideLaw::Mixture(m) => m.laplace_at(s),
        }
    }
}

impl Serialize for SideLaw {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SideLaw::Gamma(g) => Law::Gamma(*g).serialize(serializer),
            SideLaw::Mixture(m) => Law::GammaMixture(m.clone()).serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for SideLaw {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match Law::deserialize(deserializer)? {
            Law::Gamma(g) => Ok(SideLaw::Gamma(g)),
            Law::GammaMixture(m) => Ok(SideLaw::Mixture(m)),
            _ => Err(serde::de::Error::custom(
                "wedge sides must be gamma or gamma_mixture laws: only these have closed-form solutions",
            )),
        }
    }
}

/// Signed target: `X = +|X₊|` with probability `p_plus`, else `−|X₋|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignedTarget {
    pub p_plus: f64,
    #[serde(default)]
    pub plus_law: Option<SideLaw>,
    #[serde(default)]
    pub minus_law: Option<SideLaw>,
}

impl SignedTarget {
    pub fn new(p_plus: f64, plus_law: Option<SideLaw>, minus_law: Option<SideLaw>) -> Result<Self> {
        let t = SignedTarget {
            p_plus,
            plus_law,
            minus_law,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_plus) {
            return Err(Error::invalid(format!(
                "p_plus must lie in [0, 1], got {}",
                self.p_plus
            )));
        }
        if self.p_plus > 0.0 && self.plus_law.is_none() {
            return Err(Error::invalid("upper side has positive weight but no law"));
        }
        if self.p_plus < 1.0 && self.minus_law.is_none() {
            return Err(Error::invalid("lower side has positive weight but no law"));
        }
        Ok(())
    }

    /// CDF of the signed law `X`.
    pub fn cdf(&self, x: f64) -> f64 {
        let p_minus = 1.0 - self.p_plus;
        if x < 0.0 {
            // P(−|X₋| ≤ x) = P(|X₋| ≥ −x)
            self.minus_law.as_ref().map_or(0.0, |m| p_minus * (1.0 - m.cdf(-x)))
        } else {
            p_minus + self.plus_law.as_ref().map_or(0.0, |p| self.p_plus * p.cdf(x))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WedgeBoundary {
    pub k_plus: f64,
    pub k_minus: f64,
}

impl WedgeBoundary {
    pub fn new(k_plus: f64, k_minus: f64) -> Result<Self> {
        if !(k_plus > 0.0 && k_minus < 0.0 && k_plus.is_finite() && k_minus.is_finite()) {
            return Err(Error::invalid(format!(
                "wedge needs k_plus > 0 > k_minus, got k_plus = {k_plus}, k_minus = {k_minus}"
            )));
        }
        Ok(WedgeBoundary { k_plus, k_minus })
    }
}

/// Hitting-time law `τ = X/k` for a stopped side law `Γ(γ, θ)`: `Γ(γ, θk)`.
pub fn side_target_from_stopped_law(stopped_law: &GammaLaw, k: f64) -> Result<GammaLaw> {
    if !(k > 0.0) {
        return Err(Error::domain(format!("side slope must be positive, got {k}")));
    }
    GammaLaw::new(stopped_law.shape(), stopped_law.rate() * k)
}

fn side_target(law: &SideLaw, k: f64) -> Result<HittingTimeTarget> {
    Ok(match law {
        SideLaw::Gamma(g) => HittingTimeTarget::Gamma(side_target_from_stopped_law(g, k)?),
        SideLaw::Mixture(m) => HittingTimeTarget::GammaMixture(m.try_map(|_, g| side_target_from_stopped_law(g, k))?),
    })
}

/// Smallest admissible `k₊` and largest admissible `k₋`. A side with rate `θ`
/// needs `k² ≥ 2θk`, i.e. `|k| ≥ 2θ`. Absent sides impose no bound (0).
pub fn minimal_wedge_slopes(target: &SignedTarget) -> (f64, f64) {
    let plus = target.plus_law.as_ref().map_or(0.0, |l| 2.0 * l.max_rate());
    let minus = target.minus_law.as_ref().map_or(0.0, |l| -2.0 * l.max_rate());
    (plus, minus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkorohodSolution {
    pub target: SignedTarget,
    pub wedge: WedgeBoundary,
    /// Problem for `|X₊|` against `k₊t`.
    pub plus: Option<GspSolution>,
    /// Reflected problem for `|X₋|` against `|k₋|t`; its `ξ` is negated when sampling.
    pub minus: Option<GspSolution>,
}

impl SkorohodSolution {
    pub fn xi_plus(&self) -> Option<&InitialLaw> {
        self.plus.as_ref().map(|s| &s.initial_law)
    }

    /// Law of `−ξ₋` (magnitude of the lower start).
    pub fn xi_minus(&self) -> Option<&InitialLaw> {
        self.minus.as_ref().map(|s| &s.initial_law)
    }
}

fn solve_side(law: Option<&SideLaw>, weight: f64, k: f64, side: &str) -> Result<Option<GspSolution>> {
    let Some(law) = law.filter(|_| weight > 0.0) else {
        return Ok(None);
    };
    let bound = 2.0 * law.max_rate();
    solve(&side_target(law, k)?, k).map(Some).map_err(|e| match e {
        Error::InfeasibleSlope { .. } => Error::InfeasibleSlope {
            k,
            k_star: bound,
            sharp: true,
            reason: format!("{side} side needs |k| >= 2 * max rate = {bound}"),
        },
        other => other,
    })
}

pub fn solve_embedding(target: &SignedTarget, wedge: &WedgeBoundary) -> Result<SkorohodSolution> {
    target.validate()?;
    let wedge = WedgeBoundary::new(wedge.k_plus, wedge.k_minus)?;
    let plus = solve_side(target.plus_law.as_ref(), target.p_plus, wedge.k_plus, "upper")?;
    let minus = solve_side(target.minus_law.as_ref(), 1.0 - target.p_plus, -wedge.k_minus, "lower")?;
    Ok(SkorohodSolution {
        target: target.clone(),
        wedge,
        plus,
        minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

/// One embedded draw: start `ξ`, stopping time `τ`, and `X_τ = k·τ` on the
/// side's boundary line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingDraw {
    pub side: Side,
    pub xi: f64,
    pub tau: f64,
    pub x_tau: f64,
}

pub fn sample_embedding(solution: &SkorohodSolution, n: usize, seed: u64, lanes: usize) -> Result<Vec<EmbeddingDraw>> {
    let plus = solution.plus.as_ref().map(ExactSampler::new).transpose()?;
    let minus = solution.minus.as_ref().map(ExactSampler::new).transpose()?;
    let p_plus = solution.target.p_plus;
    let WedgeBoundary { k_plus, k_minus } = solution.wedge;
    Ok(generate(n, seed, lanes, |rng: &mut Stream| {
        let u: f64 = rng.random();
        let upper = match (&plus, &minus) {
            (Some(_), None) => true,
            (None, Some(_)) => false,
            _ => u < p_plus,
        };
        if upper {
            let (xi, tau) = plus.as_ref().expect("upper side solved").draw(rng);
            EmbeddingDraw {
                side: Side::Plus,
                xi,
                tau,
                x_tau: k_plus * tau,
            }
        } else {
            let (xi, tau) = minus.as_ref().expect("lower side solved").draw(rng);
            EmbeddingDraw {
                side: Side::Minus,
                xi: -xi,
                tau,
                x_tau: k_minus * tau,
            }
        }
    }))
}

/// Transform of `ξ` for one side expressed through the stopped law:
/// `ĝ(s) = f̂_X(s + s²/(2k))`.
#[derive(Debug, Clone)]
pub struct EmbeddingTransform<F> {
    stopped: F,
    slope: f64,
}

impl<F: Fn(f64) -> f64> EmbeddingTransform<F> {
    pub fn eval(&self, s: f64) -> f64 {
        (self.stopped)(s + s * s / (2.0 * self.slope))
    }
}

pub fn embedding_xi_laplace<F: Fn(f64) -> f64>(stopped_laplace: F, k: f64) -> Result<EmbeddingTransform<F>> {
    if !(k > 0.0) {
        return Err(Error::domain(format!("side slope must be positive, got {k}")));
    }
    Ok(EmbeddingTransform {
        stopped: stopped_laplace,
        slope: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsp::{log_grid, xi_laplace};
    use approx::assert_relative_eq;

    fn exp(rate: f64) -> GammaLaw {
        GammaLaw::exponential(rate).unwrap()
    }

    fn asymmetric() -> (SignedTarget, WedgeBoundary) {
        (
            SignedTarget::new(0.6, Some(SideLaw::Gamma(exp(1.0))), Some(SideLaw::Gamma(exp(2.0)))).unwrap(),
            WedgeBoundary::new(2.5, -4.5).unwrap(),
        )
    }

    #[test]
    fn side_target_scaling() {
        assert_eq!(side_target_from_stopped_law(&exp(1.0), 1.0).unwrap(), exp(1.0));
        assert_eq!(side_target_from_stopped_law(&exp(1.0), 2.5).unwrap(), exp(2.5));
        let g = side_target_from_stopped_law(&GammaLaw::new(2.0, 0.5).unwrap(), 4.0).unwrap();
        assert_eq!((g.shape(), g.rate()), (2.0, 2.0));
    }

    #[test]
    fn wedge_bounds() {
        let t = SignedTarget::new(0.5, Some(SideLaw::Gamma(exp(1.0))), Some(SideLaw::Gamma(exp(2.0)))).unwrap();
        assert_eq!(minimal_wedge_slopes(&t), (2.0, -4.0));
        let sym = SignedTarget::new(0.5, Some(SideLaw::Gamma(exp(1.5))), Some(SideLaw::Gamma(exp(1.5)))).unwrap();
        let (p, m) = minimal_wedge_slopes(&sym);
        assert_eq!(p, -m);
    }

    #[test]
    fn one_sided_boundary_case_is_erlang() {
        let t = SignedTarget::new(1.0, Some(SideLaw::Gamma(exp(1.0))), None).unwrap();
        let sol = solve_embedding(&t, &WedgeBoundary::new(2.0, -1.0).unwrap()).unwrap();
        assert!(sol.minus.is_none());
        let InitialLaw::Convolution(c) = sol.xi_plus().unwrap() else {
            panic!()
        };
        for r in c.rates() {
            assert_relative_eq!(r, 2.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn asymmetric_sides() {
        let (t, w) = asymmetric();
        let sol = solve_embedding(&t, &w).unwrap();
        let InitialLaw::Convolution(c) = sol.xi_plus().unwrap() else {
            panic!()
        };
        let r = c.rates();
        assert_relative_eq!(r[0], 1.381966011250105, max_relative = 1e-14);
        assert_relative_eq!(r[1], 3.618033988749895, max_relative = 1e-14);
        assert!(sol.xi_minus().is_some());
    }

    #[test]
    fn infeasible_side_is_named() {
        let t = SignedTarget::new(0.5, Some(SideLaw::Gamma(exp(1.0))), Some(SideLaw::Gamma(exp(1.0)))).unwrap();
        match solve_embedding(&t, &WedgeBoundary::new(1.5, -3.0).unwrap()) {
            Err(Error::InfeasibleSlope { reason, k_star, .. }) => {
                assert!(reason.contains("upper"), "{reason}");
                assert_eq!(k_star, 2.0);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        match solve_embedding(&t, &WedgeBoundary::new(3.0, -1.0).unwrap()) {
            Err(Error::InfeasibleSlope { reason, .. }) => assert!(reason.contains("lower"), "{reason}"),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn target_validation() {
        assert!(SignedTarget::new(1.2, Some(SideLaw::Gamma(exp(1.0))), None).is_err());
        assert!(SignedTarget::new(0.5, Some(SideLaw::Gamma(exp(1.0))), None).is_err());
        assert!(SignedTarget::new(0.0, None, Some(SideLaw::Gamma(exp(1.0)))).is_ok());
        assert!(WedgeBoundary::new(1.0, 1.0).is_err());
    }

    #[test]
    fn mean_of_one_sided_embedding() {
        let t = SignedTarget::new(1.0, Some(SideLaw::Gamma(exp(1.0))), None).unwrap();
        let sol = solve_embedding(&t, &WedgeBoundary::new(2.0, -1.0).unwrap()).unwrap();
        let draws = sample_embedding(&sol, 1_000_000, 17, 4).unwrap();
        let mean = draws.iter().map(|d| d.x_tau).sum::<f64>() / draws.len() as f64;
        assert!((mean - 1.0).abs() < 4e-3, "mean {mean}");
    }

    #[test]
    fn lower_only_target_is_negative() {
        let t = SignedTarget::new(0.0, None, Some(SideLaw::Gamma(exp(0.7)))).unwrap();
        let sol = solve_embedding(&t, &WedgeBoundary::new(1.0, -2.0).unwrap()).unwrap();
        let draws = sample_embedding(&sol, 10_000, 3, 2).unwrap();
        assert!(draws
            .iter()
            .all(|d| d.x_tau < 0.0 && d.xi < 0.0 && d.side == Side::Minus));
    }

    #[test]
    fn draws_lie_on_wedge_lines() {
        let (t, w) = asymmetric();
        let sol = solve_embedding(&t, &w).unwrap();
        for d in sample_embedding(&sol, 20_000, 8, 3).unwrap() {
            let k = match d.side {
                Side::Plus => {
                    assert!(d.x_tau > 0.0 && d.xi > 0.0);
                    w.k_plus
                }
                Side::Minus => {
                    assert!(d.x_tau < 0.0 && d.xi < 0.0);
                    w.k_minus
                }
            };
            assert_eq!(d.x_tau.to_bits(), (k * d.tau).to_bits());
        }
    }

    #[test]
    fn embedding_transform_examples() {
        let f = |s: f64| exp(1.0).laplace_at(s);
        let g = embedding_xi_laplace(f, 2.0).unwrap();
        assert_eq!(g.eval(0.0), 1.0);
        assert_relative_eq!(g.eval(2.0), 0.25, max_relative = 1e-15);
        assert!(embedding_xi_laplace(f, 0.0).is_err());
    }

    #[test]
    fn embedding_transform_matches_gsp_side() {
        for (law, k) in [
            (exp(1.0), 2.5),
            (exp(2.0), 4.5),
            (GammaLaw::new(2.5, 0.7).unwrap(), 3.1),
        ] {
            let direct = embedding_xi_laplace(|s| law.laplace_at(s), k).unwrap();
            let target = HittingTimeTarget::Gamma(side_target_from_stopped_law(&law, k).unwrap());
            let via_gsp = xi_laplace(&target, k).unwrap();
            for s in log_grid(1e-3, 1e3, 20) {
                assert!((direct.eval(s) - via_gsp.eval(s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixture_sides_are_supported() {
        let plus = SideLaw::Mixture(GammaMixtureLaw::exponentials(&[(0.3, 1.0), (0.7, 0.5)]).unwrap());
        let t = SignedTarget::new(1.0, Some(plus), None).unwrap();
        assert_eq!(minimal_wedge_slopes(&t).0, 2.0);
        let sol = solve_embedding(&t, &WedgeBoundary::new(2.0, -1.0).unwrap()).unwrap();
        assert!(matches!(sol.xi_plus(), Some(InitialLaw::ConvolutionMixture(_))));
    }

    #[test]
    fn signed_cdf_assembly() {
        let (t, _) = asymmetric();
        assert_relative_eq!(t.cdf(-1.0), 0.4 * (-2.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(t.cdf(0.0), 0.4, max_relative = 1e-15);
        assert_relative_eq!(t.cdf(1.0), 0.4 + 0.6 * (1.0 - (-1.0f64).exp()), max_relative = 1e-15);
    }

    #[test]
    fn json_rejects_unsolvable_side_laws() {
        let bad = r#"{"p_plus":1.0,"plus_law":{"type":"stable","index":0.5,"scale":1.0}}"#;
        assert!(serde_json::from_str::<SignedTarget>(bad).is_err());
        let ok = r#"{"p_plus":0.6,"plus_law":{"type":"gamma","shape":1,"rate":1},"minus_law":{"type":"gamma","shape":1,"rate":2}}"#;
        assert_eq!(serde_json::from_str::<SignedTarget>(ok).unwrap(), asymmetric().0);
    }
}
