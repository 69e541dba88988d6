//! Case configuration files and the compact law syntax used on the command line.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gsp_core::distributions::GammaLaw;
use gsp_core::gsp::{GspSolution, HittingTimeTarget};
use gsp_core::simulate::Method;
use gsp_core::skorohod::{SideLaw, SignedTarget, WedgeBoundary};
use gsp_core::verify::VerificationCase;
use serde::Deserialize;

/// Optional JSON config. Every key mirrors a command-line flag; flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub target: Option<HittingTimeTarget>,
    pub solution: Option<GspSolution>,
    pub k: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub lanes: Option<usize>,
    pub method: Option<Method>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub bridge_correction: Option<bool>,
    pub points: Option<usize>,
    pub t_grid: Option<Vec<f64>>,
    pub signed_target: Option<SignedTarget>,
    pub wedge: Option<WedgeBoundary>,
    pub cases: Option<Vec<VerificationCase>>,
    pub output: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl CaseConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(CaseConfig::default());
        };
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

fn numbers<const N: usize>(kind: &str, args: &str) -> Result<[f64; N]> {
    let parsed: Vec<f64> = args
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("`{kind}:` expects {N} comma-separated numbers, got `{args}`"))?;
    parsed
        .try_into()
        .map_err(|v: Vec<f64>| anyhow::anyhow!("`{kind}:` expects {N} numbers, got {}", v.len()))
}

fn json_or_file<T: for<'de> Deserialize<'de>>(spec: &str) -> Result<T> {
    let text = if spec.trim_start().starts_with('{') {
        spec.to_owned()
    } else {
        fs::read_to_string(spec).with_context(|| format!("`{spec}` is neither a law spec nor a readable JSON file"))?
    };
    serde_json::from_str(&text).with_context(|| format!("parsing law JSON from `{spec}`"))
}

/// `gamma:SHAPE,RATE`, `exp:RATE`, `stable:INDEX,SCALE`, `moments:MEAN,SECOND`,
/// inline JSON, or a path to a JSON law.
pub fn parse_target(spec: &str) -> Result<HittingTimeTarget> {
    let Some((kind, args)) = spec.split_once(':') else {
        return json_or_file(spec);
    };
    Ok(match kind {
        "gamma" => {
            let [shape, rate] = numbers(kind, args)?;
            HittingTimeTarget::Gamma(GammaLaw::new(shape, rate)?)
        }
        "exp" => {
            let [rate] = numbers(kind, args)?;
            HittingTimeTarget::Gamma(GammaLaw::exponential(rate)?)
        }
        "stable" => {
            let [index, scale] = numbers(kind, args)?;
            HittingTimeTarget::Stable(gsp_core::distributions::StableLaw::new(index, scale)?)
        }
        "moments" => {
            let [mean, second] = numbers(kind, args)?;
            HittingTimeTarget::moments_only(mean, second)?
        }
        _ => return json_or_file(spec),
    })
}

/// Side laws accept `gamma:` and `exp:` or a gamma / gamma_mixture JSON law.
pub fn parse_side(spec: &str) -> Result<SideLaw> {
    match parse_target(spec)? {
        HittingTimeTarget::Gamma(g) => Ok(SideLaw::Gamma(g)),
        HittingTimeTarget::GammaMixture(m) => Ok(SideLaw::Mixture(m)),
        _ => bail!("wedge side laws must be gamma or gamma_mixture, got `{spec}`"),
    }
}
