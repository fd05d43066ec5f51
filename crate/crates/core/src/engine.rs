//! Compiled simulation kernel.
//!
//! [`Engine`] groups streams that share a model and a shift into classes,
//! precomputes everything that does not change between samples (count
//! samplers, log expectations, scores, chi-square evaluators) and then
//! advances whole charts with one flat state vector per replication.
//! It computes the same chart values as [`crate::global::chart_step`];
//! `tests/engine_equivalence.rs` checks the two against each other.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::global::{ChartConfig, Statistic, ZhangTable};
use crate::local::{clamp_score, normalization_scale};
use crate::math::ChiSquareCdf;
use crate::sampling::{multinomial_sample, ChartRng, MultinomialTable, RngSeed};
use crate::streams::{ShiftSpec, StreamKind, StreamSpec};

#[derive(Debug, Clone)]
enum Sampler {
    Table(Arc<MultinomialTable>),
    Direct(Vec<f64>),
}

impl Sampler {
    #[inline]
    fn draw(&self, rng: &mut ChartRng, n: u32, counts: &mut [u32]) {
        match self {
            Sampler::Table(t) => t.sample_into(rng, counts),
            Sampler::Direct(probs) => {
                let drawn = multinomial_sample(rng, n as u64, probs)
                    .expect("probabilities validated at construction");
                for (c, d) in counts.iter_mut().zip(drawn) {
                    *c = d as u32;
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
enum LocalForm {
    /// `ln(N π⁰_j)`
    Nominal { log_expected: Vec<f64> },
    /// `α` and `1 / (N αᵀΛα)`
    Ordinal { alpha: Vec<f64>, inv_denom: f64 },
}

#[derive(Debug, Clone)]
struct StreamClass {
    levels: usize,
    /// Original stream indices, in class order.
    members: Vec<usize>,
    state_offset: usize,
    score_offset: usize,
    form: LocalForm,
    sampler: Sampler,
    /// Draws from `π⁰`; used while the shift has not started yet.
    ic_sampler: Sampler,
    cdf: ChiSquareCdf,
    initial: Vec<f64>,
}

/// Receives the sampled counts of each stream; used by tests and tooling
/// that need to replay a simulated path.
pub trait CountSink {
    fn record(&mut self, stream: usize, counts: &[u32]);
}

struct Discard;

impl CountSink for Discard {
    #[inline(always)]
    fn record(&mut self, _stream: usize, _counts: &[u32]) {}
}

impl CountSink for Vec<Vec<u32>> {
    fn record(&mut self, stream: usize, counts: &[u32]) {
        self[stream].clear();
        self[stream].extend_from_slice(counts);
    }
}

/// State of one simulated chart.
#[derive(Debug, Clone)]
pub struct ChartRun {
    rng: ChartRng,
    w: Vec<f64>,
    scores: Vec<f64>,
    counts: Vec<u32>,
    k: u32,
}

impl ChartRun {
    pub fn samples_taken(&self) -> u32 {
        self.k
    }

    /// Local scores from the last step, in engine class order. Sorted
    /// ascending after a Zhang step; not maintained by the max statistic.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

/// Bits of (π⁰, kind tag, ordinal scores, sampling probabilities).
type ClassKey = (Vec<u64>, u8, Vec<u64>, Vec<u64>);

#[derive(Debug, Clone)]
pub struct Engine {
    classes: Vec<StreamClass>,
    streams: usize,
    lambda: f64,
    sample_size: u32,
    statistic: Statistic,
    scale: f64,
    zhang: Option<ZhangTable>,
    state_len: usize,
    max_levels: usize,
}

fn bits(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

fn make_sampler(
    tables: &mut Vec<(Vec<u64>, Arc<MultinomialTable>)>,
    n: u32,
    probs: &[f64],
) -> Result<Sampler> {
    if n > MultinomialTable::MAX_TABULATED_N {
        return Ok(Sampler::Direct(probs.to_vec()));
    }
    let prob_bits = bits(probs);
    if let Some((_, t)) = tables.iter().find(|(b, _)| *b == prob_bits) {
        return Ok(Sampler::Table(t.clone()));
    }
    let t = Arc::new(MultinomialTable::new(n, probs)?);
    tables.push((prob_bits, t.clone()));
    Ok(Sampler::Table(t))
}

impl Engine {
    /// Compiles a population. `shifts` must be aligned with `specs`; the
    /// limit in `config` is ignored.
    pub fn new(specs: &[StreamSpec], shifts: &[ShiftSpec], config: &ChartConfig) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::EmptyInput);
        }
        if shifts.len() != specs.len() {
            return Err(Error::DimensionMismatch {
                expected: specs.len(),
                actual: shifts.len(),
            });
        }
        let n = config.sample_size as f64;
        let mut keys: Vec<ClassKey> = Vec::new();
        let mut classes: Vec<StreamClass> = Vec::new();
        let mut tables: Vec<(Vec<u64>, Arc<MultinomialTable>)> = Vec::new();

        for (idx, (spec, shift)) in specs.iter().zip(shifts).enumerate() {
            let probs = spec.shifted_probs(shift)?;
            let (tag, extra) = match &spec.kind {
                StreamKind::Nominal(_) => (0u8, Vec::new()),
                StreamKind::Ordinal(o) => (1u8, bits(o.alpha())),
            };
            let key = (bits(spec.pi0()), tag, extra, bits(&probs));
            if let Some(pos) = keys.iter().position(|k| *k == key) {
                classes[pos].members.push(idx);
                continue;
            }
            let sampler = make_sampler(&mut tables, config.sample_size, &probs)?;
            let ic_sampler = make_sampler(&mut tables, config.sample_size, spec.pi0())?;
            let form = match &spec.kind {
                StreamKind::Nominal(s) => LocalForm::Nominal {
                    log_expected: s.pi0().iter().map(|p| (n * p).ln()).collect(),
                },
                StreamKind::Ordinal(o) => LocalForm::Ordinal {
                    alpha: o.alpha().to_vec(),
                    inv_denom: 1.0 / (n * o.score_variance()),
                },
            };
            keys.push(key);
            classes.push(StreamClass {
                levels: spec.levels(),
                members: vec![idx],
                state_offset: 0,
                score_offset: 0,
                form,
                sampler,
                ic_sampler,
                cdf: ChiSquareCdf::new(spec.df())?,
                initial: spec.pi0().iter().map(|p| n * p).collect(),
            });
        }

        let (mut state_len, mut score_len) = (0, 0);
        for class in &mut classes {
            class.state_offset = state_len;
            class.score_offset = score_len;
            state_len += class.levels * class.members.len();
            score_len += class.members.len();
        }
        let max_levels = classes.iter().map(|c| c.levels).max().unwrap_or(0);
        Ok(Self {
            classes,
            streams: specs.len(),
            lambda: config.lambda,
            sample_size: config.sample_size,
            statistic: config.statistic,
            scale: normalization_scale(config.lambda),
            zhang: (config.statistic == Statistic::Zhang).then(|| ZhangTable::new(specs.len())),
            state_len,
            max_levels,
        })
    }

    pub fn streams(&self) -> usize {
        self.streams
    }

    pub fn statistic(&self) -> Statistic {
        self.statistic
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Stream index (into the original `specs`) of each engine slot.
    pub fn slot_order(&self) -> Vec<usize> {
        self.classes
            .iter()
            .flat_map(|c| c.members.iter().copied())
            .collect()
    }

    /// Supremum of the charted statistic, when finite.
    pub fn statistic_bound(&self) -> Option<f64> {
        match self.statistic {
            Statistic::Max => Some(1.0),
            Statistic::Sum => Some(self.streams as f64),
            Statistic::Zhang => None,
        }
    }

    /// A fresh chart at `w_0 = N π⁰`.
    pub fn start(&self, seed: RngSeed) -> ChartRun {
        let mut w = Vec::with_capacity(self.state_len);
        for class in &self.classes {
            for _ in &class.members {
                w.extend_from_slice(&class.initial);
            }
        }
        ChartRun {
            rng: seed.rng(),
            w,
            scores: vec![0.0; self.streams],
            counts: vec![0; self.max_levels],
            k: 0,
        }
    }

    /// Draws the next sample for every stream and returns the chart value.
    #[inline]
    pub fn step(&self, run: &mut ChartRun) -> f64 {
        self.advance(run, &mut Discard, true)
    }

    /// Like [`Engine::step`] but with every stream drawn from `π⁰`.
    pub fn step_in_control(&self, run: &mut ChartRun) -> f64 {
        self.advance(run, &mut Discard, false)
    }

    /// Like [`Engine::step`], also writing each stream's counts into
    /// `counts[stream]` (original stream order).
    pub fn step_recording(&self, run: &mut ChartRun, counts: &mut Vec<Vec<u32>>) -> f64 {
        counts.resize(self.streams, Vec::new());
        self.advance(run, counts, true)
    }

    /// Advances `samples` in-control samples (every stream drawn from `π⁰`,
    /// shifts not yet active, no chart values) and restarts the sample
    /// count, so that the next [`Engine::step`] is the first shifted sample.
    pub fn burn_in(&self, run: &mut ChartRun, samples: u32) {
        let (lambda, keep) = (self.lambda, 1.0 - self.lambda);
        for _ in 0..samples {
            for class in &self.classes {
                let h = class.levels;
                let counts = &mut run.counts[..h];
                let states =
                    &mut run.w[class.state_offset..class.state_offset + h * class.members.len()];
                for state in states.chunks_exact_mut(h) {
                    class
                        .ic_sampler
                        .draw(&mut run.rng, self.sample_size, counts);
                    for (wj, &nj) in state.iter_mut().zip(counts.iter()) {
                        *wj = keep * *wj + lambda * nj as f64;
                    }
                }
            }
        }
        run.k = 0;
    }

    /// Run length against `limit`: the first sample whose value exceeds
    /// it, or `cap`.
    pub fn run_length(&self, seed: RngSeed, limit: f64, cap: u32) -> u32 {
        self.run_length_after(seed, 0, limit, cap)
    }

    /// Run length counted from the end of an in-control burn-in of
    /// `burn_in` samples, during which alarms are ignored.
    pub fn run_length_after(&self, seed: RngSeed, burn_in: u32, limit: f64, cap: u32) -> u32 {
        let mut run = self.start(seed);
        self.burn_in(&mut run, burn_in);
        for k in 1..=cap {
            if self.step(&mut run) > limit {
                return k;
            }
        }
        cap
    }

    fn advance<S: CountSink>(&self, run: &mut ChartRun, sink: &mut S, shifted: bool) -> f64 {
        let lambda = self.lambda;
        let keep = 1.0 - lambda;
        let track_max = self.statistic == Statistic::Max;
        let mut best = f64::NEG_INFINITY;
        let ChartRun {
            rng,
            w,
            scores,
            counts,
            k,
        } = run;
        *k += 1;

        for class in &self.classes {
            let h = class.levels;
            let counts = &mut counts[..h];
            let states = &mut w[class.state_offset..class.state_offset + h * class.members.len()];
            let mut class_max = 0.0f64;
            let sampler = if shifted {
                &class.sampler
            } else {
                &class.ic_sampler
            };
            for (slot, (state, &member)) in
                states.chunks_exact_mut(h).zip(&class.members).enumerate()
            {
                sampler.draw(rng, self.sample_size, counts);
                sink.record(member, counts);
                for (wj, &nj) in state.iter_mut().zip(counts.iter()) {
                    *wj = keep * *wj + lambda * nj as f64;
                }
                let a = match &class.form {
                    LocalForm::Nominal { log_expected } => {
                        let mut acc = 0.0;
                        for (wj, le) in state.iter().zip(log_expected) {
                            acc += wj * (wj.ln() - le);
                        }
                        (2.0 * acc).max(0.0)
                    }
                    LocalForm::Ordinal { alpha, inv_denom } => {
                        let dot: f64 = alpha.iter().zip(state.iter()).map(|(a, w)| a * w).sum();
                        dot * dot * inv_denom
                    }
                };
                if track_max {
                    class_max = class_max.max(a);
                } else {
                    scores[class.score_offset + slot] = clamp_score(class.cdf.cdf(self.scale * a));
                }
            }
            if track_max {
                // The chi-square CDF is monotone, so only the class maximum matters.
                best = best.max(clamp_score(class.cdf.cdf(self.scale * class_max)));
            }
        }

        match self.statistic {
            Statistic::Max => best,
            Statistic::Sum => scores.iter().sum(),
            Statistic::Zhang => {
                scores.sort_unstable_by(f64::total_cmp);
                self.zhang
                    .as_ref()
                    .expect("zhang table built for zhang engines")
                    .evaluate_sorted(scores)
            }
        }
    }
}
