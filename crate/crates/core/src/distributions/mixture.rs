use rand::distr::Distribution;
use rand::Rng;

use super::{GammaConvolution, GammaLaw, LaplaceTransform, Moments};
use crate::error::{Error, Result};

/// Weight sums within this distance of one are renormalized; others are rejected.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom<C> {
    pub weight: f64,
    pub law: C,
}

/// Finite mixture with non-negative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture<C> {
    atoms: Vec<Atom<C>>,
}

/// Finite mixture of gamma laws (a discretized mixing measure over `(λ, γ)`).
pub type GammaMixtureLaw = Mixture<GammaLaw>;

/// Finite mixture of gamma convolutions.
pub type ConvolutionMixture = Mixture<GammaConvolution>;

impl<C> Mixture<C> {
    pub fn new(atoms: Vec<(f64, C)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("mixture needs at least one atom"));
        }
        if let Some((w, _)) = atoms.iter().find(|(w, _)| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!(
                "mixture weight must be finite and >= 0, got {w}"
            )));
        }
        let total: f64 = atoms.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::invalid(format!("mixture weights sum to {total}, expected 1")));
        }
        // sums within 1e-12 of one are kept verbatim
        let norm = if (total - 1.0).abs() > 1e-12 { total } else { 1.0 };
        Ok(Mixture {
            atoms: atoms
                .into_iter()
                .map(|(weight, law)| Atom {
                    weight: weight / norm,
                    law,
                })
                .collect(),
        })
    }

    pub fn single(law: C) -> Self {
        Mixture {
            atoms: vec![Atom { weight: 1.0, law }],
        }
    }

    pub fn atoms(&self) -> &[Atom<C>] {
        &self.atoms
    }

    /// Applies `f` atom-wise, keeping the weights.
    pub fn try_map<D, F>(&self, mut f: F) -> Result<Mixture<D>>
    where
        F: FnMut(usize, &C) -> Result<D>,
    {
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| {
                Ok(Atom {
                    weight: a.weight,
                    law: f(i, &a.law)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mixture { atoms })
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &C {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for atom in &self.atoms {
            acc += atom.weight;
            if u < acc {
                return &atom.law;
            }
        }
        &self.atoms.last().expect("mixture is non-empty").law
    }
}

impl<C: LaplaceTransform> LaplaceTransform for Mixture<C> {
    fn laplace_at(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 1.0;
        }
        self.atoms.iter().map(|a| a.weight * a.law.laplace_at(s)).sum()
    }
}

impl<C: Moments> Moments for Mixture<C> {
    fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.law.mean()).sum()
    }

    fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.law.second_moment()).sum()
    }
}

impl<C: Distribution<f64>> Distribution<f64> for Mixture<C> {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.pick(rng).sample(rng)
    }
}

impl GammaMixtureLaw {
    /// Mixture of exponential laws with the given `(weight, rate)` pairs.
    pub fn exponentials(atoms: &[(f64, f64)]) -> Result<Self> {
        Mixture::new(
            atoms
                .iter()
                .map(|&(w, r)| Ok((w, GammaLaw::exponential(r)?)))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.law.cdf(t)).sum()
    }

    pub fn sf(&self, t: f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.law.sf(t)).sum()
    }

    /// Solves `F(t) = p` by bisection between the extreme atom quantiles.
    pub fn quantile(&self, p: f64) -> f64 {
        let qs = self.atoms.iter().map(|a| a.law.quantile(p));
        let (mut lo, mut hi) = qs.fold((f64::INFINITY, 0.0f64), |(lo, hi), q| (lo.min(q), hi.max(q)));
        let upper = p > 0.5;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let below = if upper {
                self.sf(mid) > 1.0 - p
            } else {
                self.cdf(mid) < p
            };
            if below {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn max_rate(&self) -> f64 {
        self.atoms.iter().map(|a| a.law.rate()).fold(0.0, f64::max)
    }
}

impl ConvolutionMixture {
    pub fn density(&self, x: f64) -> Result<f64> {
        self.atoms.iter().map(|a| Ok(a.weight * a.law.density(x)?)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g(shape: f64, rate: f64) -> GammaLaw {
        GammaLaw::new(shape, rate).unwrap()
    }

    #[test]
    fn weights_renormalized_within_tolerance() {
        let m = GammaMixtureLaw::new(vec![(0.5 + 4e-10, g(1.0, 1.0)), (0.5, g(2.0, 1.0))]).unwrap();
        let total: f64 = m.atoms().iter().map(|a| a.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_weights_rejected() {
        assert!(GammaMixtureLaw::new(vec![(0.5, g(1.0, 1.0)), (0.4, g(2.0, 1.0))]).is_err());
        assert!(GammaMixtureLaw::new(vec![(1.5, g(1.0, 1.0)), (-0.5, g(2.0, 1.0))]).is_err());
        assert!(GammaMixtureLaw::new(vec![]).is_err());
    }

    #[test]
    fn laplace_and_moments_are_weighted() {
        let m = GammaMixtureLaw::new(vec![(0.25, g(1.0, 1.0)), (0.75, g(2.0, 4.0))]).unwrap();
        assert_eq!(m.laplace_at(0.0), 1.0);
        assert_relative_eq!(m.laplace_at(1.0), 0.25 * 0.5 + 0.75 * 0.64, max_relative = 1e-15);
        assert_relative_eq!(m.mean(), 0.25 + 0.75 * 0.5, max_relative = 1e-15);
    }

    #[test]
    fn quantile_inverts_mixture_cdf() {
        let m = GammaMixtureLaw::new(vec![(0.5, g(1.0, 0.5)), (0.5, g(2.0, 1.0))]).unwrap();
        for &p in &[0.01, 0.5, 0.999, 1.0 - 1e-7] {
            let q = m.quantile(p);
            assert_relative_eq!(m.cdf(q), p, max_relative = 1e-9);
        }
    }
}
