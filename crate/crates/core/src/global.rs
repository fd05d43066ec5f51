//! Fusing the per-stream uniform scores into one chart statistic.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::{ewma_update, init_state, normalize, smoothed_stat, EwmaState, SampleCounts};
use crate::streams::StreamSpec;

/// Which fusion of the local scores is charted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    /// Zhang's likelihood-ratio goodness-of-fit statistic `T_k`.
    Zhang,
    /// `Q_k = max_i U_ik`.
    Max,
    /// `S_k = Σ_i U_ik`.
    Sum,
}

impl Statistic {
    pub const ALL: [Statistic; 3] = [Statistic::Zhang, Statistic::Max, Statistic::Sum];

    pub fn name(self) -> &'static str {
        match self {
            Self::Zhang => "zhang",
            Self::Max => "max",
            Self::Sum => "sum",
        }
    }

    /// Conventional symbol used in result tables.
    pub fn symbol(self) -> &'static str {
        match self {
            Self::Zhang => "T",
            Self::Max => "Q",
            Self::Sum => "S",
        }
    }

    pub fn evaluate(self, scores: &[f64]) -> Result<f64> {
        match self {
            Self::Zhang => zhang_gof(scores),
            Self::Max => max_stat(scores),
            Self::Sum => sum_stat(scores),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zhang" | "t" => Ok(Self::Zhang),
            "max" | "q" => Ok(Self::Max),
            "sum" | "s" => Ok(Self::Sum),
            other => Err(Error::Config(format!("unknown statistic `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartConfig {
    pub lambda: f64,
    pub sample_size: u32,
    pub statistic: Statistic,
    /// Alarm threshold `L`; `None` while calibrating.
    pub limit: Option<f64>,
}

impl ChartConfig {
    pub fn new(lambda: f64, sample_size: u32, statistic: Statistic) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Config(format!("lambda {lambda} outside (0, 1]")));
        }
        if sample_size == 0 {
            return Err(Error::Config("sample size must be at least 1".into()));
        }
        Ok(Self {
            lambda,
            sample_size,
            statistic,
            limit: None,
        })
    }

    pub fn with_limit(mut self, limit: f64) -> Self {
        self.limit = Some(limit);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub k: u64,
    pub value: f64,
    pub alarm: bool,
    pub local_scores: Option<Vec<f64>>,
}

/// Per-`p` constants of the Zhang statistic: thresholds `(i - 3/4)/p` and
/// `ln((p - 1/2)/(i - 3/4) - 1)` for `i = 1..=p`.
#[derive(Debug, Clone)]
pub struct ZhangTable {
    thresholds: Vec<f64>,
    log_offsets: Vec<f64>,
}

impl ZhangTable {
    pub fn new(p: usize) -> Self {
        let pf = p as f64;
        let (thresholds, log_offsets) = (1..=p)
            .map(|i| {
                let shifted = i as f64 - 0.75;
                (shifted / pf, ((pf - 0.5) / shifted - 1.0).ln())
            })
            .unzip();
        Self {
            thresholds,
            log_offsets,
        }
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Evaluates `T` on scores already sorted ascending.
    #[inline]
    pub fn evaluate_sorted(&self, sorted: &[f64]) -> f64 {
        debug_assert_eq!(sorted.len(), self.thresholds.len());
        let mut total = 0.0;
        for ((&u, &t), &c) in sorted.iter().zip(&self.thresholds).zip(&self.log_offsets) {
            if u >= t {
                let d = ((1.0 - u) / u).ln() - c;
                total += d * d;
            }
        }
        total
    }
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Zhang's statistic
/// `T = Σ_i [ln((U_(i)⁻¹ - 1) / ((p - 1/2)/(i - 3/4) - 1))]² · 1{U_(i) ≥ (i - 3/4)/p}`.
pub fn zhang_gof(scores: &[f64]) -> Result<f64> {
    check_scores(scores)?;
    if let Some(bad) = scores.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
        return Err(Error::Domain(format!("score {bad} outside (0, 1)")));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ZhangTable::new(sorted.len()).evaluate_sorted(&sorted))
}

pub fn max_stat(scores: &[f64]) -> Result<f64> {
    check_scores(scores)?;
    Ok(scores.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

pub fn sum_stat(scores: &[f64]) -> Result<f64> {
    check_scores(scores)?;
    Ok(scores.iter().sum())
}

/// One monitoring step over all streams: EWMA update, local statistic,
/// normalisation, fusion, alarm. `states` are updated in place.
pub fn chart_step(
    states: &mut [EwmaState],
    specs: &[StreamSpec],
    counts: &[SampleCounts],
    config: &ChartConfig,
    retain_scores: bool,
) -> Result<ChartPoint> {
    if states.len() != specs.len() {
        return Err(Error::DimensionMismatch {
            expected: specs.len(),
            actual: states.len(),
        });
    }
    if counts.len() != specs.len() {
        return Err(Error::DimensionMismatch {
            expected: specs.len(),
            actual: counts.len(),
        });
    }
    let mut scores = Vec::with_capacity(specs.len());
    for ((state, spec), n) in states.iter_mut().zip(specs).zip(counts) {
        if n.0.len() != spec.levels() {
            return Err(Error::DimensionMismatch {
                expected: spec.levels(),
                actual: n.0.len(),
            });
        }
        *state = ewma_update(state, n, config.lambda)?;
        let a = smoothed_stat(state, spec, config.sample_size)?;
        scores.push(normalize(a, spec.df(), config.lambda)?);
    }
    let value = config.statistic.evaluate(&scores)?;
    let k = states.first().map_or(0, |s| s.k);
    Ok(ChartPoint {
        k,
        value,
        alarm: config.limit.is_some_and(|l| value > l),
        local_scores: retain_scores.then_some(scores),
    })
}

/// A running chart over a fixed set of streams.
#[derive(Debug, Clone)]
pub struct Chart {
    specs: Vec<StreamSpec>,
    states: Vec<EwmaState>,
    config: ChartConfig,
}

impl Chart {
    pub fn new(specs: Vec<StreamSpec>, config: ChartConfig) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let states = specs
            .iter()
            .map(|s| init_state(s, config.sample_size))
            .collect();
        Ok(Self {
            specs,
            states,
            config,
        })
    }

    pub fn specs(&self) -> &[StreamSpec] {
        &self.specs
    }

    pub fn states(&self) -> &[EwmaState] {
        &self.states
    }

    pub fn config(&self) -> &ChartConfig {
        &self.config
    }

    pub fn step(&mut self, counts: &[SampleCounts], retain_scores: bool) -> Result<ChartPoint> {
        chart_step(
            &mut self.states,
            &self.specs,
            counts,
            &self.config,
            retain_scores,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::{clamp_score, U_CLAMP};
    use crate::sampling::RngSeed;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    /// Textbook evaluation of T, written independently of `ZhangTable`:
    /// ranks by counting, no precomputed constants, `powi`.
    fn zhang_oracle(scores: &[f64]) -> f64 {
        let p = scores.len() as f64;
        let mut total = 0.0;
        for (idx, &u) in scores.iter().enumerate() {
            let rank = scores
                .iter()
                .enumerate()
                .filter(|&(j, &v)| v < u || (v == u && j < idx))
                .count() as f64
                + 1.0;
            if u >= (rank - 0.75) / p {
                let num = 1.0 / u - 1.0;
                let den = (p - 0.5) / (rank - 0.75) - 1.0;
                total += (num / den).ln().powi(2);
            }
        }
        total
    }

    #[test]
    fn zhang_examples() {
        assert_eq!(zhang_gof(&[0.05, 0.30, 0.55, 0.80]).unwrap(), 0.0);
        let t = zhang_gof(&[0.9, 0.5]).unwrap();
        assert!((t - 2.935_783_557_416_991).abs() < 1e-12, "{t}");
        assert_eq!(zhang_gof(&[0.5]).unwrap(), 0.0);
        assert!(zhang_gof(&[]).is_err());
        assert!(zhang_gof(&[0.0, 0.5]).is_err());
        assert!(zhang_gof(&[1.0]).is_err());
    }

    #[test]
    fn max_and_sum_examples() {
        assert_eq!(max_stat(&[0.2, 0.5, 0.9]).unwrap(), 0.9);
        assert_eq!(max_stat(&[0.5; 4]).unwrap(), 0.5);
        assert!((sum_stat(&[0.2, 0.5, 0.9]).unwrap() - 1.6).abs() < 1e-15);
        assert!((sum_stat(&[U_CLAMP; 7]).unwrap() - 7e-12).abs() < 1e-24);
        assert_eq!(max_stat(&[]), Err(Error::EmptyInput));
        assert_eq!(sum_stat(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn zhang_matches_oracle_on_random_vectors() {
        let mut rng = RngSeed::new(314, 0).rng();
        for case in 0..1000 {
            let p = rng.random_range(1..=60);
            let mut scores: Vec<f64> = (0..p).map(|_| clamp_score(rng.random::<f64>())).collect();
            if case % 7 == 0 {
                scores[0] = scores[p - 1]; // ties
            }
            let ours = zhang_gof(&scores).unwrap();
            let oracle = zhang_oracle(&scores);
            assert!(
                (ours - oracle).abs() <= 1e-12 * oracle.max(1.0),
                "{ours} vs {oracle}"
            );
        }
    }

    #[test]
    fn zhang_is_finite_at_clamp_extremes() {
        let scores = [U_CLAMP, 1.0 - U_CLAMP, 0.5, 1.0 - U_CLAMP];
        assert!(zhang_gof(&scores).unwrap().is_finite());
        assert!(zhang_gof(&vec![1.0 - U_CLAMP; 1000]).unwrap().is_finite());
    }

    fn streams() -> Vec<StreamSpec> {
        vec![
            StreamSpec::nominal(0, vec![0.5, 0.5]).unwrap(),
            StreamSpec::nominal(1, vec![0.3, 0.4, 0.3]).unwrap(),
            StreamSpec::ordinal(
                2,
                crate::streams::OrdinalSpec::from_cutpoints(
                    vec![-1.0, 0.2, 0.8],
                    Default::default(),
                )
                .unwrap(),
            ),
        ]
    }

    #[test]
    fn step_at_expectation_gives_clamped_zero_scores() {
        let specs = vec![
            StreamSpec::nominal(0, vec![0.5, 0.5]).unwrap(),
            StreamSpec::nominal(1, vec![0.25, 0.25, 0.5]).unwrap(),
        ];
        let config = ChartConfig::new(0.1, 100, Statistic::Zhang)
            .unwrap()
            .with_limit(1.0);
        let mut chart = Chart::new(specs, config).unwrap();
        let counts = [SampleCounts(vec![50, 50]), SampleCounts(vec![25, 25, 50])];
        let point = chart.step(&counts, true).unwrap();
        assert_eq!(point.local_scores.as_deref(), Some(&[U_CLAMP, U_CLAMP][..]));
        assert_eq!(point.value, zhang_gof(&[U_CLAMP, U_CLAMP]).unwrap());
        assert!(!point.alarm);
        assert_eq!(point.k, 1);
    }

    #[test]
    fn single_stream_step_is_the_manual_chain() {
        let spec = StreamSpec::nominal(0, vec![0.2, 0.3, 0.1, 0.4]).unwrap();
        let config = ChartConfig::new(0.2, 50, Statistic::Sum).unwrap();
        let counts = SampleCounts(vec![15, 10, 5, 20]);
        let mut states = vec![init_state(&spec, 50)];
        let point = chart_step(
            &mut states,
            std::slice::from_ref(&spec),
            std::slice::from_ref(&counts),
            &config,
            false,
        )
        .unwrap();

        let manual_state = ewma_update(&init_state(&spec, 50), &counts, 0.2).unwrap();
        let a = smoothed_stat(&manual_state, &spec, 50).unwrap();
        let u = normalize(a, 3, 0.2).unwrap();
        assert_eq!(states[0], manual_state);
        assert_eq!(point.value, u);
        assert!(!point.alarm);
        assert!(point.local_scores.is_none());
    }

    #[test]
    fn step_rejects_misaligned_inputs() {
        let specs = streams();
        let config = ChartConfig::new(0.1, 10, Statistic::Max).unwrap();
        let mut states: Vec<_> = specs.iter().map(|s| init_state(s, 10)).collect();
        let short = [SampleCounts(vec![5, 5])];
        assert!(chart_step(&mut states, &specs, &short, &config, false).is_err());
        let wrong_h = [
            SampleCounts(vec![5, 5]),
            SampleCounts(vec![5, 5]),
            SampleCounts(vec![2, 2, 3, 3]),
        ];
        assert!(chart_step(&mut states, &specs, &wrong_h, &config, false).is_err());
    }

    #[test]
    fn sum_statistic_mean_is_half_p_in_control() {
        use crate::sampling::multinomial_sample;
        let p = 40;
        let specs: Vec<StreamSpec> = (0..p)
            .map(|i| StreamSpec::nominal(i, vec![0.3, 0.4, 0.3]).unwrap())
            .collect();
        let config = ChartConfig::new(0.1, 100, Statistic::Sum).unwrap();
        let mut chart = Chart::new(specs.clone(), config).unwrap();
        let mut rng = RngSeed::new(8, 0).rng();
        let draw = |rng: &mut crate::sampling::ChartRng| -> Vec<SampleCounts> {
            specs
                .iter()
                .map(|s| {
                    SampleCounts(
                        multinomial_sample(rng, 100, s.pi0())
                            .unwrap()
                            .into_iter()
                            .map(|c| c as u32)
                            .collect(),
                    )
                })
                .collect()
        };
        for _ in 0..60 {
            chart.step(&draw(&mut rng), false).unwrap();
        }
        let steps = 10_000;
        let mut values = Vec::with_capacity(steps);
        for _ in 0..steps {
            values.push(chart.step(&draw(&mut rng), false).unwrap().value);
        }
        let mean = values.iter().sum::<f64>() / steps as f64;
        // Successive EWMA values are correlated: widen the iid SE by the
        // AR(1) variance inflation (1 + ρ)/(1 - ρ), ρ = 1 - λ bounding the lag-1 correlation.
        let rho: f64 = 0.9;
        let se = (p as f64 / 12.0 / steps as f64 * (1.0 + rho) / (1.0 - rho)).sqrt();
        assert!(
            (mean - p as f64 / 2.0).abs() < 3.0 * se,
            "mean {mean}, se {se}"
        );
    }

    proptest! {
        #[test]
        fn fused_statistics_are_permutation_invariant(
            raw in prop::collection::vec(0.0f64..1.0, 1..50), seed in any::<u64>()
        ) {
            let scores: Vec<f64> = raw.into_iter().map(clamp_score).collect();
            let mut shuffled = scores.clone();
            shuffled.shuffle(&mut RngSeed::new(seed, 1).rng());
            prop_assert_eq!(zhang_gof(&scores).unwrap(), zhang_gof(&shuffled).unwrap());
            prop_assert_eq!(max_stat(&scores).unwrap(), max_stat(&shuffled).unwrap());
            let (a, b) = (sum_stat(&scores).unwrap(), sum_stat(&shuffled).unwrap());
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn max_and_sum_are_monotone(
            raw in prop::collection::vec(0.0f64..1.0, 1..50), idx in any::<prop::sample::Index>(), bump in 0.0f64..1.0
        ) {
            let scores: Vec<f64> = raw.into_iter().map(clamp_score).collect();
            let mut raised = scores.clone();
            let i = idx.index(scores.len());
            raised[i] = clamp_score(raised[i] + bump);
            prop_assert!(max_stat(&raised).unwrap() >= max_stat(&scores).unwrap());
            prop_assert!(sum_stat(&raised).unwrap() >= sum_stat(&scores).unwrap());
        }
    }
}
