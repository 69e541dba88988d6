use std::f64::consts::PI;

use rand::distr::{Distribution, Open01};
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::{check_positive, LaplaceTransform};
use crate::error::{Error, Result};

/// One-sided stable law with Laplace transform `exp(-scale · s^index)`.
///
/// No density or CDF is exposed; stable cases are checked through sampling
/// and the transform only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStable")]
pub struct StableLaw {
    index: f64,
    scale: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStable {
    index: f64,
    scale: f64,
}

impl TryFrom<RawStable> for StableLaw {
    type Error = Error;

    fn try_from(raw: RawStable) -> Result<Self> {
        StableLaw::new(raw.index, raw.scale)
    }
}

impl StableLaw {
    pub fn new(index: f64, scale: f64) -> Result<Self> {
        if !(index > 0.0 && index < 1.0) {
            return Err(Error::domain(format!("stable index must lie in (0, 1), got {index}")));
        }
        check_positive("stable scale", scale)?;
        Ok(StableLaw { index, scale })
    }

    pub fn index(&self) -> f64 {
        self.index
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl LaplaceTransform for StableLaw {
    fn laplace_at(&self, s: f64) -> f64 {
        (-self.scale * s.powf(self.index)).exp()
    }
}

/// Chambers–Mallows–Stuck (Kanter) representation for totally skewed
/// stable laws on `(0, ∞)`:
/// `X = sin(αU)/sin(U)^{1/α} · (sin((1-α)U)/E)^{(1-α)/α}` with `U ~ U(0, π)`,
/// `E ~ Exp(1)` has transform `exp(-s^α)`.
impl Distribution<f64> for StableLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let alpha = self.index;
        let u: f64 = PI * rng.sample::<f64, _>(Open01);
        let e: f64 = rng.sample(Exp1);
        let ln_x = (alpha * u).sin().ln() - (u.sin().ln()) / alpha
            + (1.0 - alpha) / alpha * (((1.0 - alpha) * u).sin().ln() - e.ln());
        (ln_x + self.scale.ln() / alpha).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample_stable_one_sided;
    use crate::rng::stream;

    fn empirical_laplace(xs: &[f64], s: f64) -> f64 {
        xs.iter().map(|x| (-s * x).exp()).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn index_outside_unit_interval_rejected() {
        assert!(StableLaw::new(1.0, 1.0).is_err());
        assert!(StableLaw::new(0.0, 1.0).is_err());
        assert!(StableLaw::new(0.5, 0.0).is_err());
    }

    #[test]
    fn empirical_laplace_matches_transform() {
        let law = StableLaw::new(0.5, 1.0).unwrap();
        let xs = sample_stable_one_sided(&mut stream(11, 0), &law, 100_000);
        assert!(xs.iter().all(|&x| x > 0.0));
        assert!((empirical_laplace(&xs, 1.0) - (-1.0f64).exp()).abs() < 0.01);
        assert!((empirical_laplace(&xs, 2.0) - (-(2f64.sqrt())).exp()).abs() < 0.01);
    }

    #[test]
    fn scale_enters_as_power() {
        let law = StableLaw::new(0.3, 2.0).unwrap();
        let xs = sample_stable_one_sided(&mut stream(12, 0), &law, 100_000);
        let expected = (-2.0 * 1.5f64.powf(0.3)).exp();
        assert!((empirical_laplace(&xs, 1.5) - expected).abs() < 0.01);
    }

    #[test]
    fn deterministic_given_stream() {
        let law = StableLaw::new(0.7, 1.0).unwrap();
        let a = sample_stable_one_sided(&mut stream(3, 5), &law, 1000);
        let b = sample_stable_one_sided(&mut stream(3, 5), &law, 1000);
        assert_eq!(a, b);
    }
}
