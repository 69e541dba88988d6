use rand::distr::{Distribution, Open01};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_positive, LaplaceTransform, Moments};
use crate::error::{Error, Result};
use crate::special::{gamma_p, gamma_p_inv, gamma_q, ln_gamma};

/// Gamma law with density `λ (λt)^{γ-1} e^{-λt} / Γ(γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGamma")]
pub struct GammaLaw {
    shape: f64,
    rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGamma {
    shape: f64,
    rate: f64,
}

impl TryFrom<RawGamma> for GammaLaw {
    type Error = Error;

    fn try_from(raw: RawGamma) -> Result<Self> {
        GammaLaw::new(raw.shape, raw.rate)
    }
}

impl GammaLaw {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        check_positive("gamma shape", shape)?;
        check_positive("gamma rate", rate)?;
        Ok(GammaLaw { shape, rate })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        GammaLaw::new(1.0, rate)
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("gamma density needs t >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(if self.shape == 1.0 {
                self.rate
            } else if self.shape > 1.0 {
                0.0
            } else {
                f64::INFINITY
            });
        }
        Ok(self.ln_pdf(t).exp())
    }

    fn ln_pdf(&self, t: f64) -> f64 {
        self.rate.ln() + (self.shape - 1.0) * (self.rate * t).ln() - ln_gamma(self.shape) - self.rate * t
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            gamma_p(self.shape, self.rate * t)
        }
    }

    /// Survival function `1 - F(t)`, accurate in the far tail.
    pub fn sf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else {
            gamma_q(self.shape, self.rate * t)
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        gamma_p_inv(self.shape, p) / self.rate
    }
}

impl LaplaceTransform for GammaLaw {
    fn laplace_at(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        (self.rate / (self.rate + s)).powf(self.shape)
    }
}

impl Moments for GammaLaw {
    fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    fn second_moment(&self) -> f64 {
        self.shape * (self.shape + 1.0) / (self.rate * self.rate)
    }

    fn variance(&self) -> f64 {
        self.shape / (self.rate * self.rate)
    }
}

/// Marsaglia–Tsang squeeze for unit rate; shapes below one are boosted by one
/// and corrected with `U^{1/γ}`.
fn sample_unit_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape < 1.0 {
        let boosted = sample_unit_gamma(rng, shape + 1.0);
        let u: f64 = rng.sample(Open01);
        return boosted * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * z;
        if v <= 0.0 {
            continue;
        }
        let v3 = v * v * v;
        let u: f64 = rng.sample(Open01);
        let z2 = z * z;
        if u < 1.0 - 0.0331 * z2 * z2 {
            return d * v3;
        }
        if u.ln() < 0.5 * z2 + d * (1.0 - v3 + v3.ln()) {
            return d * v3;
        }
    }
}

impl Distribution<f64> for GammaLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_unit_gamma(rng, self.shape) / self.rate
    }
}

/// Law of a sum of independent gamma variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConvolution")]
pub struct GammaConvolution {
    components: Vec<GammaLaw>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConvolution {
    components: Vec<GammaLaw>,
}

impl TryFrom<RawConvolution> for GammaConvolution {
    type Error = Error;

    fn try_from(raw: RawConvolution) -> Result<Self> {
        GammaConvolution::new(raw.components)
    }
}

impl GammaConvolution {
    pub fn new(components: Vec<GammaLaw>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("gamma convolution needs at least one component"));
        }
        Ok(GammaConvolution { components })
    }

    pub fn components(&self) -> &[GammaLaw] {
        &self.components
    }

    /// Component rates in the stored order.
    pub fn rates(&self) -> Vec<f64> {
        self.components.iter().map(GammaLaw::rate).collect()
    }

    /// Density at `x ≥ 0` for one or two components.
    ///
    /// Two components `Γ(a₁, r₁) * Γ(a₂, r₂)` with `r₁ < r₂` use
    /// `r₁^{a₁} r₂^{a₂} x^{a₁+a₂-1} e^{-r₂x} ₁F₁(a₁; a₁+a₂; (r₂-r₁)x) / Γ(a₁+a₂)`,
    /// the hypergeometric series being summed term-wise in log space. Equal
    /// rates collapse to a single gamma law.
    pub fn density(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("density needs x >= 0, got {x}")));
        }
        match self.components.as_slice() {
            [single] => single.pdf(x),
            [c1, c2] => {
                let (lo, hi) = if c1.rate <= c2.rate { (c1, c2) } else { (c2, c1) };
                let total_shape = lo.shape + hi.shape;
                if lo.rate == hi.rate {
                    return GammaLaw::new(total_shape, lo.rate)?.pdf(x);
                }
                if x == 0.0 {
                    return Ok(if total_shape > 1.0 {
                        0.0
                    } else if total_shape == 1.0 {
                        lo.rate.powf(lo.shape) * hi.rate.powf(hi.shape)
                    } else {
                        f64::INFINITY
                    });
                }
                let z = (hi.rate - lo.rate) * x;
                let ln_series = ln_kummer_m(lo.shape, total_shape, z);
                let ln_density = lo.shape * lo.rate.ln() + hi.shape * hi.rate.ln() - ln_gamma(total_shape)
                    + (total_shape - 1.0) * x.ln()
                    - hi.rate * x
                    + ln_series;
                Ok(ln_density.exp())
            }
            _ => Err(Error::Unsupported(
                "closed-form density is available for at most two gamma components".into(),
            )),
        }
    }

    /// Upper bound `q` with `P(X > q) ≤ eps`, from a union bound over components.
    pub fn upper_quantile_bound(&self, eps: f64) -> f64 {
        let per = eps / self.components.len() as f64;
        self.components.iter().map(|c| c.quantile(1.0 - per)).sum()
    }
}

/// `ln ₁F₁(a; b; z)` for `a, b > 0`, `z ≥ 0`, summing the all-positive series.
fn ln_kummer_m(a: f64, b: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let ln_z = z.ln();
    let mut ln_term = 0.0f64;
    // running log-sum-exp
    let mut ln_max = 0.0f64;
    let mut scaled_sum = 1.0f64;
    let mut n = 0.0f64;
    let cap = 1000.0 + 10.0 * z;
    loop {
        ln_term += (a + n).ln() - (b + n).ln() + ln_z - (n + 1.0).ln();
        n += 1.0;
        if ln_term > ln_max {
            scaled_sum = scaled_sum * (ln_max - ln_term).exp() + 1.0;
            ln_max = ln_term;
        } else {
            scaled_sum += (ln_term - ln_max).exp();
        }
        // terms decrease geometrically once n exceeds z
        if n > z && ln_term - ln_max < -40.0 {
            break;
        }
        if n > cap {
            break;
        }
    }
    ln_max + scaled_sum.ln()
}

impl LaplaceTransform for GammaConvolution {
    fn laplace_at(&self, s: f64) -> f64 {
        self.components.iter().map(|c| c.laplace_at(s)).product()
    }
}

impl Moments for GammaConvolution {
    fn mean(&self) -> f64 {
        self.components.iter().map(Moments::mean).sum()
    }

    fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    fn variance(&self) -> f64 {
        self.components.iter().map(Moments::variance).sum()
    }
}

impl Distribution<f64> for GammaConvolution {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.components.iter().map(|c| c.sample(rng)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, integrate_with_breaks, Tolerance};
    use crate::rng::stream;
    use approx::assert_relative_eq;

    fn gamma(shape: f64, rate: f64) -> GammaLaw {
        GammaLaw::new(shape, rate).unwrap()
    }

    #[test]
    fn pdf_examples() {
        assert_eq!(gamma(1.0, 1.0).pdf(0.0).unwrap(), 1.0);
        assert_relative_eq!(
            gamma(1.0, 2.0).pdf(0.5).unwrap(),
            2.0 * (-1.0f64).exp(),
            max_relative = 1e-14
        );
        assert_relative_eq!(gamma(2.0, 1.0).pdf(1.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-14);
        assert!(matches!(gamma(1.0, 1.0).pdf(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn laplace_examples() {
        assert_eq!(gamma(1.0, 1.0).laplace(0.0).unwrap(), 1.0);
        assert_relative_eq!(gamma(1.0, 1.0).laplace(1.0).unwrap(), 0.5, max_relative = 1e-15);
        assert_relative_eq!(gamma(2.0, 3.0).laplace(3.0).unwrap(), 0.25, max_relative = 1e-15);
        assert!(gamma(2.0, 3.0).laplace(-1.0).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(GammaLaw::new(0.0, 1.0).is_err());
        assert!(GammaLaw::new(1.0, -2.0).is_err());
        assert!(GammaLaw::new(f64::NAN, 1.0).is_err());
        assert!(GammaConvolution::new(vec![]).is_err());
    }

    #[test]
    fn laplace_matches_integrated_density() {
        for &shape in &[0.5, 1.0, 3.0] {
            let law = gamma(shape, 1.0);
            let upper = 40.0 / law.rate() * (1.0 + shape);
            for &s in &[0.1, 1.0, 10.0] {
                // u = sqrt(t) removes the t^{-1/2} singularity at 0 for shape < 1
                let integrand = |u: f64| {
                    let t = u * u;
                    2.0 * u * law.pdf(t).unwrap() * (-s * t).exp()
                };
                let tol = Tolerance {
                    abs: 1e-12,
                    ..Tolerance::default()
                };
                let numeric = integrate(integrand, 0.0, upper.sqrt(), tol).unwrap().value;
                assert!(
                    (numeric - law.laplace(s).unwrap()).abs() < 1e-8,
                    "shape {shape} s {s}: {numeric}"
                );
            }
        }
    }

    #[test]
    fn convolution_laplace_examples() {
        let c = GammaConvolution::new(vec![gamma(1.0, 1.0), gamma(1.0, 1.0)]).unwrap();
        assert_eq!(c.laplace(0.0).unwrap(), 1.0);
        assert_relative_eq!(c.laplace(1.0).unwrap(), 0.25, max_relative = 1e-15);
        let single = GammaConvolution::new(vec![gamma(2.0, 3.0)]).unwrap();
        assert_relative_eq!(single.laplace(3.0).unwrap(), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn convolution_density_reference_values() {
        // frozen from scipy quad of the convolution integral
        let c = GammaConvolution::new(vec![gamma(2.5, 0.5), gamma(2.5, 3.0)]).unwrap();
        assert_relative_eq!(c.density(2.0).unwrap(), 0.09064116384077912, max_relative = 1e-11);
        let c = GammaConvolution::new(vec![gamma(0.7, 8.0), gamma(0.7, 0.3)]).unwrap();
        assert_relative_eq!(c.density(40.0).unwrap(), 6.925584833845675e-07, max_relative = 1e-9);
    }

    #[test]
    fn convolution_density_exponential_closed_form() {
        let (a, b) = (0.7, 2.9);
        let c = GammaConvolution::new(vec![gamma(1.0, a), gamma(1.0, b)]).unwrap();
        for &x in &[0.01, 0.5, 3.0, 25.0, 300.0] {
            let exact = a * b / (b - a) * ((-a * x).exp() - (-b * x).exp());
            assert_relative_eq!(c.density(x).unwrap(), exact, max_relative = 1e-11);
        }
    }

    #[test]
    fn convolution_density_equal_rates_and_normalization() {
        let r = 2f64.sqrt();
        let c = GammaConvolution::new(vec![gamma(1.0, r), gamma(1.0, r)]).unwrap();
        assert_relative_eq!(
            c.density(1.0).unwrap(),
            gamma(2.0, r).pdf(1.0).unwrap(),
            max_relative = 1e-14
        );

        let c = GammaConvolution::new(vec![gamma(2.0, 0.3), gamma(2.0, 7.7)]).unwrap();
        let upper = c.upper_quantile_bound(1e-14);
        let mass = integrate_with_breaks(|x| c.density(x).unwrap(), &[0.0, 1.0, upper], Tolerance::default())
            .unwrap()
            .value;
        assert!((mass - 1.0).abs() < 1e-9, "mass {mass}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let law = gamma(0.4, 1.3);
        let a: Vec<f64> = (0..100)
            .map({
                let mut r = stream(9, 0);
                move |_| law.sample(&mut r)
            })
            .collect();
        let mut r = stream(9, 0);
        let b: Vec<f64> = (0..100).map(|_| law.sample(&mut r)).collect();
        assert_eq!(a, b);
    }
}
