//! JSON form shared by every law: an object with a `type` tag and numeric
//! fields. Mixture atoms are flattened, either `{weight, shape, rate}` or
//! `{weight, components}`.

use serde::{Deserialize, Serialize};

use super::{ConvolutionMixture, GammaConvolution, GammaLaw, GammaMixtureLaw, StableLaw};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Gamma(GammaLaw),
    GammaConvolution(GammaConvolution),
    GammaMixture(GammaMixtureLaw),
    ConvolutionMixture(ConvolutionMixture),
    Stable(StableLaw),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawRepr {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<GammaLaw>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomRepr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_moment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomRepr {
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<GammaLaw>>,
}

impl LawRepr {
    pub(crate) fn tagged(kind: &str) -> Self {
        LawRepr {
            kind: kind.to_string(),
            shape: None,
            rate: None,
            components: None,
            atoms: None,
            index: None,
            scale: None,
            mean: None,
            second_moment: None,
        }
    }

    pub(crate) fn require(field: Option<f64>, name: &str, kind: &str) -> Result<f64> {
        field.ok_or_else(|| Error::invalid(format!("law of type \"{kind}\" requires field `{name}`")))
    }

    /// Fields that must be absent for `kind` are rejected to catch typos in hand-written files.
    fn only(&self, allowed: &[&str]) -> Result<()> {
        let present = [
            ("shape", self.shape.is_some()),
            ("rate", self.rate.is_some()),
            ("components", self.components.is_some()),
            ("atoms", self.atoms.is_some()),
            ("index", self.index.is_some()),
            ("scale", self.scale.is_some()),
            ("mean", self.mean.is_some()),
            ("second_moment", self.second_moment.is_some()),
        ];
        for (name, is_set) in present {
            if is_set && !allowed.contains(&name) {
                return Err(Error::invalid(format!(
                    "field `{name}` is not valid for law type \"{}\"",
                    self.kind
                )));
            }
        }
        Ok(())
    }
}

fn gamma_repr(law: &GammaLaw) -> LawRepr {
    LawRepr {
        shape: Some(law.shape()),
        rate: Some(law.rate()),
        ..LawRepr::tagged("gamma")
    }
}

impl From<Law> for LawRepr {
    fn from(law: Law) -> Self {
        match law {
            Law::Gamma(g) => gamma_repr(&g),
            Law::GammaConvolution(c) => LawRepr {
                components: Some(c.components().to_vec()),
                ..LawRepr::tagged("gamma_convolution")
            },
            Law::GammaMixture(m) => LawRepr {
                atoms: Some(
                    m.atoms()
                        .iter()
                        .map(|a| AtomRepr {
                            weight: a.weight,
                            shape: Some(a.law.shape()),
                            rate: Some(a.law.rate()),
                            components: None,
                        })
                        .collect(),
                ),
                ..LawRepr::tagged("gamma_mixture")
            },
            Law::ConvolutionMixture(m) => LawRepr {
                atoms: Some(
                    m.atoms()
                        .iter()
                        .map(|a| AtomRepr {
                            weight: a.weight,
                            shape: None,
                            rate: None,
                            components: Some(a.law.components().to_vec()),
                        })
                        .collect(),
                ),
                ..LawRepr::tagged("gamma_mixture")
            },
            Law::Stable(s) => LawRepr {
                index: Some(s.index()),
                scale: Some(s.scale()),
                ..LawRepr::tagged("stable")
            },
        }
    }
}

impl TryFrom<LawRepr> for Law {
    type Error = Error;

    fn try_from(repr: LawRepr) -> Result<Self> {
        let kind = repr.kind.as_str();
        match kind {
            "gamma" => {
                repr.only(&["shape", "rate"])?;
                Ok(Law::Gamma(GammaLaw::new(
                    LawRepr::require(repr.shape, "shape", kind)?,
                    LawRepr::require(repr.rate, "rate", kind)?,
                )?))
            }
            "gamma_convolution" => {
                repr.only(&["components"])?;
                let components = repr
                    .components
                    .ok_or_else(|| Error::invalid("gamma_convolution requires `components`"))?;
                Ok(Law::GammaConvolution(GammaConvolution::new(components)?))
            }
            "gamma_mixture" => {
                repr.only(&["atoms"])?;
                let atoms = repr
                    .atoms
                    .ok_or_else(|| Error::invalid("gamma_mixture requires `atoms`"))?;
                let all_convolutions = atoms.iter().all(|a| a.components.is_some());
                if all_convolutions && !atoms.is_empty() {
                    let parsed = atoms
                        .into_iter()
                        .map(|a| {
                            if a.shape.is_some() || a.rate.is_some() {
                                return Err(Error::invalid("mixture atom mixes `components` with `shape`/`rate`"));
                            }
                            Ok((a.weight, GammaConvolution::new(a.components.unwrap_or_default())?))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Law::ConvolutionMixture(ConvolutionMixture::new(parsed)?))
                } else {
                    let parsed = atoms
                        .into_iter()
                        .map(|a| {
                            if a.components.is_some() {
                                return Err(Error::invalid("mixture atoms must be all gamma or all convolutions"));
                            }
                            let shape = LawRepr::require(a.shape, "shape", "gamma_mixture atom")?;
                            let rate = LawRepr::require(a.rate, "rate", "gamma_mixture atom")?;
                            Ok((a.weight, GammaLaw::new(shape, rate)?))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Law::GammaMixture(GammaMixtureLaw::new(parsed)?))
                }
            }
            "stable" => {
                repr.only(&["index", "scale"])?;
                Ok(Law::Stable(StableLaw::new(
                    LawRepr::require(repr.index, "index", kind)?,
                    LawRepr::require(repr.scale, "scale", kind)?,
                )?))
            }
            other => Err(Error::invalid(format!("unknown law type \"{other}\""))),
        }
    }
}

impl Serialize for Law {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        LawRepr::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Law {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = LawRepr::deserialize(deserializer)?;
        Law::try_from(repr).map_err(serde::de::Error::custom)
    }
}
