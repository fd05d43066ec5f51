//! Nominal and ordinal stream models and the shifts applied to them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{
    logistic_cdf, logistic_pdf, logistic_quantile, normal_cdf, normal_pdf, normal_quantile,
};
use crate::sampling::{validate_probs, SUM_TOLERANCE};

/// Smallest in-control level probability accepted at construction.
pub const MIN_LEVEL_PROB: f64 = 1e-9;

/// Distribution of the latent variable behind an ordinal stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentFamily {
    #[default]
    Normal,
    Logistic,
}

impl LatentFamily {
    #[inline]
    pub fn pdf(self, x: f64) -> f64 {
        match self {
            Self::Normal => normal_pdf(x),
            Self::Logistic => logistic_pdf(x),
        }
    }

    #[inline]
    pub fn cdf(self, x: f64) -> f64 {
        match self {
            Self::Normal => normal_cdf(x),
            Self::Logistic => logistic_cdf(x),
        }
    }

    pub fn quantile(self, p: f64) -> Result<f64> {
        match self {
            Self::Normal => normal_quantile(p),
            Self::Logistic => logistic_quantile(p),
        }
    }
}

fn validate_ic_probs(pi0: &[f64]) -> Result<()> {
    validate_probs(pi0)?;
    if let Some(p) = pi0.iter().find(|&&p| p < MIN_LEVEL_PROB) {
        return Err(Error::InvalidDistribution(format!(
            "in-control level probability {p} below floor {MIN_LEVEL_PROB}"
        )));
    }
    Ok(())
}

/// Cumulative sums `c_1..c_{h-1}` (the final `c_h = 1` is implicit).
fn interior_cumulative(pi0: &[f64]) -> Vec<f64> {
    pi0[..pi0.len() - 1]
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(acc.min(1.0))
        })
        .collect()
}

/// Scores from cut points: `α_j = [f(b_{j-1}) - f(b_j)] / π_j` with
/// `f(b_0) = f(b_h) = 0`.
fn scores_from_cutpoints(cutpoints: &[f64], pi0: &[f64], family: LatentFamily) -> Vec<f64> {
    let h = pi0.len();
    (0..h)
        .map(|j| {
            let lower = if j == 0 {
                0.0
            } else {
                family.pdf(cutpoints[j - 1])
            };
            let upper = if j == h - 1 {
                0.0
            } else {
                family.pdf(cutpoints[j])
            };
            (lower - upper) / pi0[j]
        })
        .collect()
}

fn probs_from_cutpoints(cutpoints: &[f64], family: LatentFamily, delta: f64) -> Vec<f64> {
    let mut probs = Vec::with_capacity(cutpoints.len() + 1);
    let mut prev = 0.0;
    for &b in cutpoints {
        let c = family.cdf(b - delta);
        probs.push((c - prev).max(0.0));
        prev = c;
    }
    probs.push((1.0 - prev).max(0.0));
    probs
}

/// Ordinal scores `α` for in-control probabilities `pi0`.
pub fn ordinal_scores(pi0: &[f64], family: LatentFamily) -> Result<Vec<f64>> {
    validate_ic_probs(pi0)?;
    let cutpoints = interior_cumulative(pi0)
        .into_iter()
        .map(|c| family.quantile(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(scores_from_cutpoints(&cutpoints, pi0, family))
}

/// Multinomial covariance `Λ = diag(π) - π πᵀ` (per unit sample size).
pub fn lambda_matrix(pi0: &[f64]) -> Vec<Vec<f64>> {
    pi0.iter()
        .enumerate()
        .map(|(i, &pi)| {
            pi0.iter()
                .enumerate()
                .map(|(j, &pj)| if i == j { pi - pi * pj } else { -pi * pj })
                .collect()
        })
        .collect()
}

/// `π⁰ + ξ`, rejected unless every component stays inside `(0, 1)`.
pub fn shifted_probs_nominal(pi0: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
    if pi0.len() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: pi0.len(),
            actual: xi.len(),
        });
    }
    let total: f64 = xi.iter().sum();
    if total.abs() > SUM_TOLERANCE {
        return Err(Error::InvalidShift(format!(
            "shift components sum to {total}"
        )));
    }
    pi0.iter()
        .zip(xi)
        .map(|(p, x)| {
            let shifted = p + x;
            if shifted > 0.0 && shifted < 1.0 {
                Ok(shifted)
            } else {
                Err(Error::InvalidShift(format!(
                    "level probability {p} + {x} leaves (0, 1)"
                )))
            }
        })
        .collect()
}

/// Level probabilities after moving the latent distribution by `delta`.
pub fn shifted_probs_ordinal(spec: &OrdinalSpec, delta: f64) -> Vec<f64> {
    if delta == 0.0 {
        return spec.pi0.clone();
    }
    probs_from_cutpoints(&spec.cutpoints, spec.family, delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NominalSpec {
    pi0: Vec<f64>,
}

impl NominalSpec {
    pub fn new(pi0: Vec<f64>) -> Result<Self> {
        validate_ic_probs(&pi0)?;
        Ok(Self { pi0 })
    }

    pub fn levels(&self) -> usize {
        self.pi0.len()
    }

    pub fn pi0(&self) -> &[f64] {
        &self.pi0
    }
}

/// An ordinal stream: observed levels are a discretised latent variable.
///
/// Either the cut points or the in-control probabilities may be given;
/// the other representation and the scores are derived on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalSpec {
    pi0: Vec<f64>,
    family: LatentFamily,
    cutpoints: Vec<f64>,
    alpha: Vec<f64>,
    /// `αᵀ Λ α`
    score_variance: f64,
}

impl OrdinalSpec {
    pub fn from_probs(pi0: Vec<f64>, family: LatentFamily) -> Result<Self> {
        validate_ic_probs(&pi0)?;
        let cutpoints = interior_cumulative(&pi0)
            .into_iter()
            .map(|c| family.quantile(c))
            .collect::<Result<Vec<_>>>()?;
        if cutpoints.windows(2).any(|w| w[0] >= w[1]) || cutpoints.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDistribution(
                "probabilities do not give strictly increasing finite cut points".into(),
            ));
        }
        Self::assemble(pi0, cutpoints, family)
    }

    pub fn from_cutpoints(cutpoints: Vec<f64>, family: LatentFamily) -> Result<Self> {
        if cutpoints.is_empty() {
            return Err(Error::InvalidDistribution(
                "need at least one cut point".into(),
            ));
        }
        if cutpoints.iter().any(|c| !c.is_finite()) || cutpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDistribution(
                "cut points must be finite and strictly increasing".into(),
            ));
        }
        let pi0 = probs_from_cutpoints(&cutpoints, family, 0.0);
        validate_ic_probs(&pi0)?;
        Self::assemble(pi0, cutpoints, family)
    }

    fn assemble(pi0: Vec<f64>, cutpoints: Vec<f64>, family: LatentFamily) -> Result<Self> {
        let alpha = scores_from_cutpoints(&cutpoints, &pi0, family);
        let mean: f64 = pi0.iter().zip(&alpha).map(|(p, a)| p * a).sum();
        let second: f64 = pi0.iter().zip(&alpha).map(|(p, a)| p * a * a).sum();
        let score_variance = second - mean * mean;
        if !(score_variance > 0.0) {
            return Err(Error::InvalidDistribution(
                "degenerate ordinal scores".into(),
            ));
        }
        Ok(Self {
            pi0,
            family,
            cutpoints,
            alpha,
            score_variance,
        })
    }

    pub fn levels(&self) -> usize {
        self.pi0.len()
    }

    pub fn pi0(&self) -> &[f64] {
        &self.pi0
    }

    pub fn family(&self) -> LatentFamily {
        self.family
    }

    pub fn cutpoints(&self) -> &[f64] {
        &self.cutpoints
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn score_variance(&self) -> f64 {
        self.score_variance
    }

    pub fn lambda_matrix(&self) -> Vec<Vec<f64>> {
        lambda_matrix(&self.pi0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StreamKind {
    Nominal(NominalSpec),
    Ordinal(OrdinalSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub id: usize,
    pub kind: StreamKind,
}

impl StreamSpec {
    pub fn nominal(id: usize, pi0: Vec<f64>) -> Result<Self> {
        Ok(Self {
            id,
            kind: StreamKind::Nominal(NominalSpec::new(pi0)?),
        })
    }

    pub fn ordinal(id: usize, spec: OrdinalSpec) -> Self {
        Self {
            id,
            kind: StreamKind::Ordinal(spec),
        }
    }

    pub fn pi0(&self) -> &[f64] {
        match &self.kind {
            StreamKind::Nominal(s) => s.pi0(),
            StreamKind::Ordinal(s) => s.pi0(),
        }
    }

    pub fn levels(&self) -> usize {
        self.pi0().len()
    }

    /// Degrees of freedom of the limiting chi-square: `h - 1` for nominal
    /// streams, 1 for ordinal ones.
    pub fn df(&self) -> u32 {
        match &self.kind {
            StreamKind::Nominal(s) => s.levels() as u32 - 1,
            StreamKind::Ordinal(_) => 1,
        }
    }

    /// Level probabilities under `shift`, validated against this stream.
    pub fn shifted_probs(&self, shift: &ShiftSpec) -> Result<Vec<f64>> {
        match (&self.kind, shift) {
            (_, ShiftSpec::NoShift) => Ok(self.pi0().to_vec()),
            (StreamKind::Nominal(s), ShiftSpec::Nominal { xi }) => {
                shifted_probs_nominal(s.pi0(), xi)
            }
            (StreamKind::Ordinal(s), ShiftSpec::Ordinal { delta }) => {
                if delta.is_finite() {
                    Ok(shifted_probs_ordinal(s, *delta))
                } else {
                    Err(Error::InvalidShift(format!(
                        "latent shift {delta} is not finite"
                    )))
                }
            }
            (StreamKind::Nominal(_), ShiftSpec::Ordinal { .. }) => Err(Error::InvalidShift(
                format!("stream {} is nominal but was given a latent shift", self.id),
            )),
            (StreamKind::Ordinal(_), ShiftSpec::Nominal { .. }) => {
                Err(Error::InvalidShift(format!(
                    "stream {} is ordinal but was given a probability shift",
                    self.id
                )))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShiftSpec {
    #[default]
    NoShift,
    Nominal {
        xi: Vec<f64>,
    },
    Ordinal {
        delta: f64,
    },
}

impl ShiftSpec {
    pub fn is_shift(&self) -> bool {
        !matches!(self, Self::NoShift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamType {
    Nominal,
    Ordinal,
}

/// Serialized form of a stream model, shared by scenario and config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamDef {
    pub kind: StreamType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentFamily>,
}

impl StreamDef {
    pub fn build(&self, id: usize) -> Result<StreamSpec> {
        match self.kind {
            StreamType::Nominal => {
                if self.cutpoints.is_some() || self.latent.is_some() {
                    return Err(Error::Config(format!(
                        "stream {id}: nominal streams take only `probs`"
                    )));
                }
                let probs = self.probs.clone().ok_or_else(|| {
                    Error::Config(format!("stream {id}: nominal stream needs `probs`"))
                })?;
                StreamSpec::nominal(id, probs)
            }
            StreamType::Ordinal => {
                let family = self.latent.unwrap_or_default();
                let spec = match (&self.probs, &self.cutpoints) {
                    (Some(p), None) => OrdinalSpec::from_probs(p.clone(), family)?,
                    (None, Some(c)) => OrdinalSpec::from_cutpoints(c.clone(), family)?,
                    _ => {
                        return Err(Error::Config(format!(
                        "stream {id}: ordinal stream needs exactly one of `probs` or `cutpoints`"
                    )))
                    }
                };
                Ok(StreamSpec::ordinal(id, spec))
            }
        }
    }

    pub fn nominal(probs: Vec<f64>) -> Self {
        Self {
            kind: StreamType::Nominal,
            probs: Some(probs),
            cutpoints: None,
            latent: None,
        }
    }

    pub fn ordinal_cutpoints(cutpoints: Vec<f64>) -> Self {
        Self {
            kind: StreamType::Ordinal,
            probs: None,
            cutpoints: Some(cutpoints),
            latent: None,
        }
    }
}
