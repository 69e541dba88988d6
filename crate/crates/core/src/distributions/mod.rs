//! Probability laws used as hitting-time targets and as laws of the random
//! starting point: densities, CDFs, Laplace transforms and exact samplers.

mod gamma;
mod inverse_gaussian;
mod mixture;
mod stable;
mod wire;

pub use gamma::{GammaConvolution, GammaLaw};
pub use inverse_gaussian::InverseGaussianLaw;
pub use mixture::{Atom, ConvolutionMixture, GammaMixtureLaw, Mixture};
pub use stable::StableLaw;
pub use wire::{Law, LawRepr};

use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};

/// Laplace transform `s ↦ E[e^{-sX}]` of a law on `[0, ∞)`.
pub trait LaplaceTransform {
    /// Evaluates the transform without checking the argument. Callers pass `s ≥ 0`.
    fn laplace_at(&self, s: f64) -> f64;

    fn laplace(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::domain(format!("Laplace argument must be >= 0, got {s}")));
        }
        Ok(self.laplace_at(s))
    }
}

/// First two raw moments.
pub trait Moments {
    fn mean(&self) -> f64;
    fn second_moment(&self) -> f64;

    fn variance(&self) -> f64 {
        self.second_moment() - self.mean() * self.mean()
    }
}

pub fn gamma_pdf(law: &GammaLaw, t: f64) -> Result<f64> {
    law.pdf(t)
}

pub fn gamma_laplace(law: &GammaLaw, s: f64) -> Result<f64> {
    law.laplace(s)
}

pub fn convolution_laplace(law: &GammaConvolution, s: f64) -> Result<f64> {
    law.laplace(s)
}

pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, law: &GammaLaw, n: usize) -> Vec<f64> {
    (0..n).map(|_| law.sample(rng)).collect()
}

pub fn sample_stable_one_sided<R: Rng + ?Sized>(rng: &mut R, law: &StableLaw, n: usize) -> Vec<f64> {
    (0..n).map(|_| law.sample(rng)).collect()
}

pub fn sample_inverse_gaussian<R: Rng + ?Sized>(rng: &mut R, law: &InverseGaussianLaw, n: usize) -> Vec<f64> {
    (0..n).map(|_| law.sample(rng)).collect()
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}
