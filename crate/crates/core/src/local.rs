//! Per-stream statistics: raw −2 log likelihood ratios, the EWMA
//! recursion on count vectors, and the uniform-scale normalisation.

use crate::error::{Error, Result};
use crate::math::chi_square_cdf;
use crate::streams::{NominalSpec, OrdinalSpec, StreamKind, StreamSpec};

/// Normalised scores are clamped into `[U_CLAMP, 1 - U_CLAMP]`.
pub const U_CLAMP: f64 = 1e-12;

/// Grouped counts of one sample for one stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleCounts(pub Vec<u32>);

impl SampleCounts {
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&n| n as u64).sum()
    }

    /// Tallies 1-based level indices.
    pub fn from_levels(levels: impl IntoIterator<Item = usize>, h: usize) -> Result<Self> {
        let mut counts = vec![0u32; h];
        for level in levels {
            if level == 0 || level > h {
                return Err(Error::Domain(format!("level {level} outside 1..={h}")));
            }
            counts[level - 1] += 1;
        }
        Ok(Self(counts))
    }
}

/// Smoothed count vector `w_k` of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EwmaState {
    pub w: Vec<f64>,
    pub k: u64,
}

/// `w_0 = N π⁰`.
pub fn init_state(spec: &StreamSpec, sample_size: u32) -> EwmaState {
    let n = sample_size as f64;
    EwmaState {
        w: spec.pi0().iter().map(|p| n * p).collect(),
        k: 0,
    }
}

/// `w' = (1 - λ) w + λ n`.
pub fn ewma_update(state: &EwmaState, counts: &SampleCounts, lambda: f64) -> Result<EwmaState> {
    if state.w.len() != counts.0.len() {
        return Err(Error::DimensionMismatch {
            expected: state.w.len(),
            actual: counts.0.len(),
        });
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Domain(format!(
            "smoothing weight {lambda} outside (0, 1]"
        )));
    }
    let keep = 1.0 - lambda;
    Ok(EwmaState {
        w: state
            .w
            .iter()
            .zip(&counts.0)
            .map(|(w, &n)| keep * w + lambda * n as f64)
            .collect(),
        k: state.k + 1,
    })
}

fn check_counts(counts: &SampleCounts, h: usize, sample_size: u32) -> Result<()> {
    if counts.0.len() != h {
        return Err(Error::DimensionMismatch {
            expected: h,
            actual: counts.0.len(),
        });
    }
    if counts.total() != sample_size as u64 {
        return Err(Error::Domain(format!(
            "counts sum to {} but the sample size is {sample_size}",
            counts.total()
        )));
    }
    Ok(())
}

/// Multinomial −2 log LR, `2 Σ n_j ln(n_j / (N π⁰_j))`, with `0 ln 0 = 0`.
pub fn raw_lrt_nominal(counts: &SampleCounts, spec: &NominalSpec, sample_size: u32) -> Result<f64> {
    check_counts(counts, spec.levels(), sample_size)?;
    let n = sample_size as f64;
    let stat: f64 = counts
        .0
        .iter()
        .zip(spec.pi0())
        .filter(|(&c, _)| c > 0)
        .map(|(&c, p)| {
            let c = c as f64;
            c * (c / (n * p)).ln()
        })
        .sum();
    Ok((2.0 * stat).max(0.0))
}

/// Ordinal score test `(αᵀ n)² / (N αᵀ Λ α)`.
pub fn raw_lrt_ordinal(counts: &SampleCounts, spec: &OrdinalSpec, sample_size: u32) -> Result<f64> {
    check_counts(counts, spec.levels(), sample_size)?;
    let dot: f64 = spec
        .alpha()
        .iter()
        .zip(&counts.0)
        .map(|(a, &c)| a * c as f64)
        .sum();
    Ok(dot * dot / (sample_size as f64 * spec.score_variance()))
}

/// The EWMA version of the local statistic, `A_k`.
pub fn smoothed_stat(state: &EwmaState, spec: &StreamSpec, sample_size: u32) -> Result<f64> {
    if state.w.len() != spec.levels() {
        return Err(Error::DimensionMismatch {
            expected: spec.levels(),
            actual: state.w.len(),
        });
    }
    let n = sample_size as f64;
    let value = match &spec.kind {
        StreamKind::Nominal(s) => {
            2.0 * state
                .w
                .iter()
                .zip(s.pi0())
                .map(|(w, p)| w * (w / (n * p)).ln())
                .sum::<f64>()
        }
        StreamKind::Ordinal(s) => {
            let dot: f64 = s.alpha().iter().zip(&state.w).map(|(a, w)| a * w).sum();
            dot * dot / (n * s.score_variance())
        }
    };
    // Rounding can leave a tiny negative value next to w = Nπ⁰.
    Ok(value.max(0.0))
}

/// Scale factor `(2 - λ) / λ` applied to `A` before the chi-square CDF.
#[inline]
pub fn normalization_scale(lambda: f64) -> f64 {
    (2.0 - lambda) / lambda
}

#[inline]
pub fn clamp_score(u: f64) -> f64 {
    u.clamp(U_CLAMP, 1.0 - U_CLAMP)
}

/// `U = χ²_df((2 - λ)/λ · A)`, clamped away from 0 and 1.
pub fn normalize(a: f64, df: u32, lambda: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::Domain(format!("local statistic {a} must be >= 0")));
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Domain(format!(
            "smoothing weight {lambda} outside (0, 1]"
        )));
    }
    Ok(clamp_score(chi_square_cdf(
        normalization_scale(lambda) * a,
        df,
    )?))
}
