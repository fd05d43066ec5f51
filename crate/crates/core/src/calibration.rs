//! Run-length simulation, ARL estimation and control-limit search.
//!
//! The limit search holds one chart per replication, all seeded from a
//! fixed master seed (common random numbers). A replication's path of
//! chart values does not depend on the limit, so the run length for any
//! limit `L` is the first record of its running maximum above `L`. Each
//! replication is simulated lazily, only as far as the largest limit that
//! has actually been queried, and a query stops early once the partially
//! simulated run lengths already prove the ARL is above target. The limit
//! found is then checked on an independent seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{ChartRun, Engine};
use crate::error::{Error, Result};
use crate::global::ChartConfig;
use crate::sampling::RngSeed;
use crate::streams::{ShiftSpec, StreamSpec};

pub const DEFAULT_CAP: u32 = 20_000;
pub const DEFAULT_TOL_REL: f64 = 0.02;
pub const DEFAULT_MAX_ITER: u32 = 40;

const SEARCH_STREAM: u64 = 0x5EA4C4;
const CONFIRM_STREAM: u64 = 0xC0F1A3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLengthSummary {
    pub arl: f64,
    /// Sample standard deviation over `sqrt(reps)`; 0 for a single replication.
    pub se: f64,
    pub reps: usize,
    pub capped_fraction: f64,
    pub cap: u32,
}

impl RunLengthSummary {
    pub fn from_run_lengths(run_lengths: &[u32], cap: u32) -> Self {
        let reps = run_lengths.len();
        if reps == 0 {
            return Self {
                arl: f64::NAN,
                se: f64::NAN,
                reps,
                capped_fraction: 0.0,
                cap,
            };
        }
        let n = reps as f64;
        let mean = run_lengths.iter().map(|&r| r as f64).sum::<f64>() / n;
        let se = if reps > 1 {
            let ss: f64 = run_lengths.iter().map(|&r| (r as f64 - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        let capped = run_lengths.iter().filter(|&&r| r >= cap).count();
        Self {
            arl: mean,
            se,
            reps,
            capped_fraction: capped as f64 / n,
            cap,
        }
    }
}

/// Zero-state run length of one chart: all states start at `N π⁰`, the
/// shifts act from the first sample on.
pub fn simulate_run_length(
    specs: &[StreamSpec],
    shifts: &[ShiftSpec],
    config: &ChartConfig,
    seed: RngSeed,
    cap: u32,
) -> Result<u32> {
    let limit = config.limit.ok_or_else(|| {
        Error::Config("a control limit is required to simulate run lengths".into())
    })?;
    if cap == 0 {
        return Err(Error::Config("run-length cap must be at least 1".into()));
    }
    Ok(Engine::new(specs, shifts, config)?.run_length(seed, limit, cap))
}

/// Mean run length over `reps` replications; replication `r` uses stream
/// `r` of `master`, so results do not depend on the thread count.
pub fn estimate_arl(
    specs: &[StreamSpec],
    shifts: &[ShiftSpec],
    config: &ChartConfig,
    reps: usize,
    master: RngSeed,
    cap: u32,
) -> Result<RunLengthSummary> {
    let limit = config
        .limit
        .ok_or_else(|| Error::Config("a control limit is required to estimate the ARL".into()))?;
    let engine = Engine::new(specs, shifts, config)?;
    estimate_arl_with(&engine, limit, reps, master, cap)
}

pub fn estimate_arl_with(
    engine: &Engine,
    limit: f64,
    reps: usize,
    master: RngSeed,
    cap: u32,
) -> Result<RunLengthSummary> {
    estimate_arl_after(engine, 0, limit, reps, master, cap)
}

/// Mean run length counted from the end of an in-control burn-in of
/// `burn_in` samples (see [`Engine::run_length_after`]).
pub fn estimate_arl_after(
    engine: &Engine,
    burn_in: u32,
    limit: f64,
    reps: usize,
    master: RngSeed,
    cap: u32,
) -> Result<RunLengthSummary> {
    if reps == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    if cap == 0 {
        return Err(Error::Config("run-length cap must be at least 1".into()));
    }
    let run_lengths: Vec<u32> = (0..reps as u64)
        .into_par_iter()
        .map(|r| engine.run_length_after(master.with_stream(r), burn_in, limit, cap))
        .collect();
    Ok(RunLengthSummary::from_run_lengths(&run_lengths, cap))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub reps: usize,
    /// Replications of the independent confirmation run (defaults to `reps`).
    pub confirm_reps: Option<usize>,
    pub tol_rel: f64,
    pub max_iter: u32,
    pub cap: u32,
    /// In-control samples run before counting starts; 0 gives zero-state
    /// run lengths.
    #[serde(default)]
    pub burn_in: u32,
    pub seed: RngSeed,
}

impl CalibrationOptions {
    pub fn new(reps: usize, seed: RngSeed) -> Self {
        Self {
            reps,
            confirm_reps: None,
            tol_rel: DEFAULT_TOL_REL,
            max_iter: DEFAULT_MAX_ITER,
            cap: DEFAULT_CAP,
            burn_in: 0,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub limit: f64,
    pub target_arl: f64,
    /// ARL at `limit` on the independent confirmation seed.
    pub achieved_arl: f64,
    pub achieved_se: f64,
    /// ARL at `limit` on the common-random-numbers search replications.
    pub search_arl: f64,
    pub iterations: u32,
    pub bracket: (f64, f64),
    pub capped_fraction: f64,
    pub reps: usize,
}

/// Bisection for the limit whose in-control ARL is `target`.
pub fn calibrate_limit(
    specs: &[StreamSpec],
    config: &ChartConfig,
    target: f64,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    let shifts = vec![ShiftSpec::NoShift; specs.len()];
    let engine = Engine::new(specs, &shifts, config)?;
    calibrate_engine(&engine, target, options)
}

/// Limit search on an already compiled (usually in-control) engine.
pub fn calibrate_engine(
    engine: &Engine,
    target: f64,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    if !(target > 1.0) || !target.is_finite() {
        return Err(Error::Config(format!(
            "target ARL {target} must be finite and > 1"
        )));
    }
    if options.reps == 0 || options.cap == 0 {
        return Err(Error::Config(
            "calibration needs reps >= 1 and cap >= 1".into(),
        ));
    }
    if (options.cap as f64) < target {
        return Err(Error::BracketFailure(format!(
            "run-length cap {} is below the target ARL {target}",
            options.cap
        )));
    }
    let mut pool = CrnPool::new(
        engine,
        options.seed.child(SEARCH_STREAM),
        options.reps,
        options.cap,
        options.burn_in,
    );
    let search = pool.search(target, options)?;

    let confirm_reps = options.confirm_reps.unwrap_or(options.reps);
    let confirm = estimate_arl_after(
        engine,
        options.burn_in,
        search.limit,
        confirm_reps,
        options.seed.child(CONFIRM_STREAM),
        options.cap,
    )?;
    Ok(CalibrationResult {
        limit: search.limit,
        target_arl: target,
        achieved_arl: confirm.arl,
        achieved_se: confirm.se,
        search_arl: search.arl,
        iterations: search.iterations,
        bracket: search.bracket,
        capped_fraction: confirm.capped_fraction,
        reps: options.reps,
    })
}

struct Replicate {
    run: Option<ChartRun>,
    steps: u32,
    peak: f64,
    /// `(k, value)` each time the running maximum increases.
    records: Vec<(u32, f64)>,
}

impl Replicate {
    fn advance(&mut self, engine: &Engine, level: f64, horizon: u32) {
        let Some(run) = self.run.as_mut() else { return };
        while self.peak <= level && self.steps < horizon {
            let value = engine.step(run);
            self.steps += 1;
            if value > self.peak {
                self.peak = value;
                self.records.push((self.steps, value));
            }
        }
    }

    fn run_length(&self, level: f64, cap: u32) -> Option<u32> {
        if self.peak > level {
            let idx = self.records.partition_point(|&(_, v)| v <= level);
            Some(self.records[idx].0)
        } else if self.steps >= cap {
            Some(cap)
        } else {
            None
        }
    }
}

enum Evaluation {
    Exact(f64),
    /// The ARL is proven to exceed the target band; carries the lower bound.
    Above(f64),
}

struct SearchOutcome {
    limit: f64,
    arl: f64,
    iterations: u32,
    bracket: (f64, f64),
}

struct CrnPool<'a> {
    engine: &'a Engine,
    reps: Vec<Replicate>,
    cap: u32,
}

impl<'a> CrnPool<'a> {
    fn new(engine: &'a Engine, seed: RngSeed, reps: usize, cap: u32, burn_in: u32) -> Self {
        let reps = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let mut run = engine.start(seed.with_stream(r));
                engine.burn_in(&mut run, burn_in);
                run
            })
            .map(|run| Replicate {
                run: Some(run),
                steps: 0,
                peak: f64::NEG_INFINITY,
                records: Vec::new(),
            })
            .collect();
        Self { engine, reps, cap }
    }

    fn advance_all(&mut self, level: f64, horizon: u32) {
        let engine = self.engine;
        let horizon = horizon.min(self.cap);
        self.reps
            .par_iter_mut()
            .for_each(|r| r.advance(engine, level, horizon));
    }

    fn evaluate(&mut self, level: f64, target: f64, tol: f64) -> Evaluation {
        let n = self.reps.len() as f64;
        let mut horizon = (target.ceil() as u32).max(16).min(self.cap);
        loop {
            self.advance_all(level, horizon);
            let mut total = 0.0;
            let mut censored = 0usize;
            for r in &self.reps {
                match r.run_length(level, self.cap) {
                    Some(rl) => total += rl as f64,
                    None => {
                        total += r.steps as f64;
                        censored += 1;
                    }
                }
            }
            if censored == 0 {
                return Evaluation::Exact(total / n);
            }
            if total / n > target * (1.0 + tol) {
                return Evaluation::Above(total / n);
            }
            horizon = horizon.saturating_mul(2).min(self.cap);
        }
    }

    /// Frees chart state that no query at or below `level` can need.
    fn prune(&mut self, level: f64) {
        for r in &mut self.reps {
            if r.peak > level {
                r.run = None;
            }
        }
    }

    fn quantile_of_peaks(&self, q: f64) -> f64 {
        let mut peaks: Vec<f64> = self.reps.iter().map(|r| r.peak).collect();
        peaks.sort_by(f64::total_cmp);
        let idx = ((peaks.len() - 1) as f64 * q).round() as usize;
        peaks[idx]
    }

    fn search(&mut self, target: f64, options: &CalibrationOptions) -> Result<SearchOutcome> {
        let tol = options.tol_rel;
        let bound = self.engine.statistic_bound();
        let within = |arl: f64| ((arl - target) / target).abs() <= tol;
        let mut iterations = 0u32;

        // Pilot: peaks over the first target/4 samples. For roughly geometric
        // run lengths P(RL <= target/4) = 1 - e^{-1/4} at the target limit.
        let pilot = ((target / 4.0).ceil() as u32).max(1);
        self.advance_all(f64::INFINITY, pilot);
        let quarter_mass = 1.0 - (-0.25f64).exp();
        let mut guess = self.quantile_of_peaks(1.0 - quarter_mass);
        let mut step = (self.quantile_of_peaks(0.95) - guess)
            .max(guess.abs() * 0.05)
            .max(1e-9);
        if let Some(b) = bound {
            guess = guess.min(b);
        }

        let (mut lo, mut lo_arl, mut hi, mut hi_arl);
        iterations += 1;
        match self.evaluate(guess, target, tol) {
            Evaluation::Exact(arl) if within(arl) => {
                return Ok(SearchOutcome {
                    limit: guess,
                    arl,
                    iterations,
                    bracket: (guess, guess),
                })
            }
            Evaluation::Exact(arl) if arl < target => {
                lo = guess;
                lo_arl = arl;
                loop {
                    let mut candidate = lo + step;
                    if let Some(b) = bound {
                        if candidate >= b {
                            candidate = lo + 0.5 * (b - lo);
                        }
                    }
                    if candidate <= lo {
                        return Err(Error::BracketFailure(format!(
                            "ARL {lo_arl} at the largest representable limit {lo} is below {target}"
                        )));
                    }
                    iterations += 1;
                    match self.evaluate(candidate, target, tol) {
                        Evaluation::Exact(arl) if within(arl) => {
                            return Ok(SearchOutcome {
                                limit: candidate,
                                arl,
                                iterations,
                                bracket: (lo, candidate),
                            })
                        }
                        Evaluation::Exact(arl) if arl < target => {
                            if arl >= options.cap as f64 {
                                return Err(Error::BracketFailure(format!(
                                    "every replication reaches the cap {} below the target",
                                    options.cap
                                )));
                            }
                            lo = candidate;
                            lo_arl = arl;
                            step *= 2.0;
                        }
                        Evaluation::Exact(arl) | Evaluation::Above(arl) => {
                            hi = candidate;
                            hi_arl = arl;
                            break;
                        }
                    }
                    if iterations > 200 {
                        return Err(Error::BracketFailure(
                            "upper bracket did not converge".into(),
                        ));
                    }
                }
            }
            Evaluation::Exact(arl) | Evaluation::Above(arl) => {
                hi = guess;
                hi_arl = arl;
                loop {
                    let candidate = (hi - step).max(0.0);
                    iterations += 1;
                    match self.evaluate(candidate, target, tol) {
                        Evaluation::Exact(arl) if within(arl) => {
                            return Ok(SearchOutcome {
                                limit: candidate,
                                arl,
                                iterations,
                                bracket: (candidate, hi),
                            })
                        }
                        Evaluation::Exact(arl) if arl < target => {
                            lo = candidate;
                            lo_arl = arl;
                            break;
                        }
                        Evaluation::Exact(arl) | Evaluation::Above(arl) => {
                            if candidate == 0.0 {
                                // Even a zero limit keeps the ARL at or above target.
                                return Ok(SearchOutcome {
                                    limit: 0.0,
                                    arl,
                                    iterations,
                                    bracket: (0.0, hi),
                                });
                            }
                            hi = candidate;
                            hi_arl = arl;
                            step *= 2.0;
                        }
                    }
                    if iterations > 200 {
                        return Err(Error::BracketFailure(
                            "lower bracket did not converge".into(),
                        ));
                    }
                }
            }
        }

        let bracket = (lo, hi);
        self.prune(hi);
        let mut best = if (lo_arl - target).abs() <= (hi_arl - target).abs() {
            (lo, lo_arl)
        } else {
            (hi, hi_arl)
        };
        for _ in 0..options.max_iter {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            iterations += 1;
            match self.evaluate(mid, target, tol) {
                Evaluation::Exact(arl) => {
                    if (arl - target).abs() < (best.1 - target).abs() {
                        best = (mid, arl);
                    }
                    if within(arl) {
                        break;
                    }
                    if arl < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Evaluation::Above(_) => hi = mid,
            }
        }
        // `best` only ever holds exactly evaluated points, except a bracket
        // end proven above target; make sure its ARL is exact.
        let arl = match self.evaluate(best.0, target, f64::INFINITY) {
            Evaluation::Exact(arl) => arl,
            Evaluation::Above(arl) => arl,
        };
        Ok(SearchOutcome {
            limit: best.0,
            arl,
            iterations,
            bracket,
        })
    }
}
