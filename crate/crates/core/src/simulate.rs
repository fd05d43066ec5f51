//! Simulation scenarios and ARL tables.
//!
//! A [`Scenario`] describes a population of stream templates ("cases"),
//! the chart settings and a list of rows, each row shifting some number of
//! streams in some cases. [`run_table`] calibrates one limit per statistic
//! on the in-control population and estimates the out-of-control ARL of
//! every row under every statistic.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibrate_engine, estimate_arl_after, CalibrationOptions, CalibrationResult, RunLengthSummary,
    DEFAULT_CAP,
};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::global::{ChartConfig, Statistic};
use crate::report::{fmt_f64, fmt_with_se};
use crate::sampling::RngSeed;
use crate::streams::{ShiftSpec, StreamDef, StreamSpec};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Full,
}

impl Preset {
    pub fn reps(self) -> usize {
        match self {
            Preset::Desk => 2_000,
            Preset::Full => 10_000,
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            _ => Err(Error::Config(format!(
                "unknown preset `{s}` (expected desk or full)"
            ))),
        }
    }
}

/// `count` copies of one stream model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub label: String,
    pub count: usize,
    pub stream: StreamDef,
}

/// Shift applied to the first `count` streams of case `case`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseShift {
    pub case: String,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

impl CaseShift {
    pub fn shift(&self) -> Result<ShiftSpec> {
        match (&self.xi, self.delta) {
            (Some(xi), None) => Ok(ShiftSpec::Nominal { xi: xi.clone() }),
            (None, Some(delta)) => Ok(ShiftSpec::Ordinal { delta }),
            _ => Err(Error::Config(format!(
                "shift for case `{}` needs exactly one of `xi` or `delta`",
                self.case
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftRow {
    pub label: String,
    #[serde(default)]
    pub shifts: Vec<CaseShift>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    pub lambda: f64,
    pub sample_size: u32,
    pub statistics: Vec<Statistic>,
    pub target_arl0: f64,
    pub master_seed: u64,
    /// Overrides the preset replication count when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u32>,
    /// In-control samples run before counting starts (alarms ignored), both
    /// when calibrating and when estimating rows. 0 gives zero-state ARLs
    /// from `w₀ = Nπ⁰`; a positive value gives steady-state ARLs.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub burn_in: u32,
    pub population: Vec<Case>,
    #[serde(default)]
    pub rows: Vec<ShiftRow>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported scenario schema_version {} (expected {SCENARIO_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        ChartConfig::new(self.lambda, self.sample_size, Statistic::Zhang)?;
        if self.statistics.is_empty() {
            return Err(Error::Config("scenario lists no statistics".into()));
        }
        if !(self.target_arl0 > 1.0 && self.target_arl0.is_finite()) {
            return Err(Error::Config(format!(
                "target_arl0 {} must be > 1",
                self.target_arl0
            )));
        }
        if self.population.iter().map(|c| c.count).sum::<usize>() == 0 {
            return Err(Error::EmptyInput);
        }
        let mut labels = std::collections::HashSet::new();
        for case in &self.population {
            if !labels.insert(case.label.as_str()) {
                return Err(Error::Config(format!(
                    "duplicate case label `{}`",
                    case.label
                )));
            }
        }
        for i in 0..self.rows.len() {
            self.build_population(i)?;
        }
        Ok(())
    }

    pub fn streams(&self) -> usize {
        self.population.iter().map(|c| c.count).sum()
    }

    fn config(&self, statistic: Statistic) -> Result<ChartConfig> {
        ChartConfig::new(self.lambda, self.sample_size, statistic)
    }

    /// In-control population: one spec per stream, cases in file order.
    pub fn specs(&self) -> Result<Vec<StreamSpec>> {
        let mut specs = Vec::with_capacity(self.streams());
        for case in &self.population {
            let template = case.stream.build(0)?;
            for _ in 0..case.count {
                let mut spec = template.clone();
                spec.id = specs.len();
                specs.push(spec);
            }
        }
        Ok(specs)
    }

    /// Specs and per-stream shifts for row `row`; shifted streams are the
    /// first ones of each case.
    pub fn build_population(&self, row: usize) -> Result<(Vec<StreamSpec>, Vec<ShiftSpec>)> {
        let row = self
            .rows
            .get(row)
            .ok_or_else(|| Error::Config(format!("scenario has no row {row}")))?;
        build_population(&self.population, &row.shifts)
    }
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

pub fn build_population(
    population: &[Case],
    plan: &[CaseShift],
) -> Result<(Vec<StreamSpec>, Vec<ShiftSpec>)> {
    let mut specs = Vec::new();
    let mut shifts = Vec::new();
    let mut used = vec![false; plan.len()];
    for case in population {
        let template = case.stream.build(0)?;
        let start = specs.len();
        for _ in 0..case.count {
            let mut spec = template.clone();
            spec.id = specs.len();
            specs.push(spec);
            shifts.push(ShiftSpec::NoShift);
        }
        let mut next = start;
        for (entry, used) in plan
            .iter()
            .zip(used.iter_mut())
            .filter(|(e, _)| e.case == case.label)
        {
            *used = true;
            let shift = entry.shift()?;
            template.shifted_probs(&shift)?;
            let end = next + entry.count;
            if end > start + case.count {
                return Err(Error::CountOverflow {
                    case: case.label.clone(),
                    shifted: end - start,
                    available: case.count,
                });
            }
            for s in &mut shifts[next..end] {
                *s = shift.clone();
            }
            next = end;
        }
    }
    if let Some(i) = used.iter().position(|u| !u) {
        return Err(Error::Config(format!(
            "shift refers to unknown case `{}`",
            plan[i].case
        )));
    }
    Ok((specs, shifts))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSettings {
    pub reps: usize,
    pub cap: u32,
    /// Run cells concurrently instead of parallelising inside each cell.
    pub parallel_cells: bool,
}

impl RunSettings {
    pub fn for_scenario(scenario: &Scenario, preset: Preset) -> Self {
        Self {
            reps: scenario.reps.unwrap_or_else(|| preset.reps()),
            cap: scenario.cap.unwrap_or(DEFAULT_CAP),
            parallel_cells: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticCalibration {
    pub statistic: Statistic,
    pub result: CalibrationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultCell {
    pub row: String,
    pub statistic: Statistic,
    pub summary: RunLengthSummary,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub scenario: String,
    pub calibrations: Vec<StatisticCalibration>,
    pub cells: Vec<ResultCell>,
}

/// Calibrations keyed by everything that determines them, so several
/// tables over the same in-control population share one limit per statistic.
#[derive(Debug, Default)]
pub struct CalibrationCache {
    entries: HashMap<String, CalibrationResult>,
}

impl CalibrationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn key(scenario: &Scenario, statistic: Statistic, settings: &RunSettings) -> String {
        format!(
            "{:?}|{}|{}|{}|{}|{}|{}|{}|{}",
            scenario.population,
            scenario.burn_in,
            statistic,
            scenario.lambda.to_bits(),
            scenario.sample_size,
            scenario.target_arl0.to_bits(),
            scenario.master_seed,
            settings.reps,
            settings.cap
        )
    }

    pub fn get_or_calibrate(
        &mut self,
        scenario: &Scenario,
        statistic: Statistic,
        settings: &RunSettings,
    ) -> Result<CalibrationResult> {
        let key = Self::key(scenario, statistic, settings);
        if let Some(hit) = self.entries.get(&key) {
            return Ok(*hit);
        }
        let result = calibrate_scenario(scenario, statistic, settings)?;
        self.entries.insert(key, result);
        Ok(result)
    }
}

fn statistic_label(statistic: Statistic) -> u64 {
    match statistic {
        Statistic::Zhang => 1,
        Statistic::Max => 2,
        Statistic::Sum => 3,
    }
}

pub fn calibrate_scenario(
    scenario: &Scenario,
    statistic: Statistic,
    settings: &RunSettings,
) -> Result<CalibrationResult> {
    let specs = scenario.specs()?;
    let shifts = vec![ShiftSpec::NoShift; specs.len()];
    let engine = Engine::new(&specs, &shifts, &scenario.config(statistic)?)?;
    let seed = RngSeed::new(scenario.master_seed, 0).child(statistic_label(statistic));
    let mut options = CalibrationOptions::new(settings.reps, seed);
    options.cap = settings.cap;
    options.burn_in = scenario.burn_in;
    calibrate_engine(&engine, scenario.target_arl0, &options)
}

/// OC run-length summary of row `row` at the given limit.
pub fn estimate_row(
    scenario: &Scenario,
    row: usize,
    statistic: Statistic,
    limit: f64,
    settings: &RunSettings,
) -> Result<RunLengthSummary> {
    let (specs, shifts) = scenario.build_population(row)?;
    let engine = Engine::new(&specs, &shifts, &scenario.config(statistic)?)?;
    let seed = RngSeed::new(scenario.master_seed, 0)
        .child(((row as u64 + 1) << 8) | statistic_label(statistic));
    if settings.parallel_cells {
        let run_lengths: Vec<u32> = (0..settings.reps as u64)
            .map(|r| {
                engine.run_length_after(seed.with_stream(r), scenario.burn_in, limit, settings.cap)
            })
            .collect();
        Ok(RunLengthSummary::from_run_lengths(
            &run_lengths,
            settings.cap,
        ))
    } else {
        estimate_arl_after(
            &engine,
            scenario.burn_in,
            limit,
            settings.reps,
            seed,
            settings.cap,
        )
    }
}

pub fn run_table(
    scenario: &Scenario,
    settings: &RunSettings,
    cache: &mut CalibrationCache,
) -> Result<ResultTable> {
    scenario.validate()?;
    let mut calibrations = Vec::new();
    for &statistic in &scenario.statistics {
        let result = cache.get_or_calibrate(scenario, statistic, settings)?;
        calibrations.push(StatisticCalibration { statistic, result });
    }
    let jobs: Vec<(usize, Statistic, f64)> = (0..scenario.rows.len())
        .flat_map(|row| {
            calibrations
                .iter()
                .map(move |c| (row, c.statistic, c.result.limit))
        })
        .collect();
    let run = |&(row, statistic, limit): &(usize, Statistic, f64)| -> Result<ResultCell> {
        Ok(ResultCell {
            row: scenario.rows[row].label.clone(),
            statistic,
            summary: estimate_row(scenario, row, statistic, limit, settings)?,
        })
    };
    let cells = if settings.parallel_cells {
        jobs.par_iter().map(run).collect::<Result<Vec<_>>>()?
    } else {
        jobs.iter().map(run).collect::<Result<Vec<_>>>()?
    };
    Ok(ResultTable {
        scenario: scenario.name.clone(),
        calibrations,
        cells,
    })
}

pub const CELLS_HEADER: &str = "row,statistic,arl,se,reps,capped_fraction,cap";
pub const CALIBRATION_HEADER: &str =
    "statistic,limit,target_arl,achieved_arl,achieved_se,search_arl,iterations,bracket_lo,bracket_hi,capped_fraction,reps";

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn io_error(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

fn parse_field<T: FromStr>(record: &csv::StringRecord, i: usize, what: &str) -> Result<T> {
    record
        .get(i)
        .ok_or_else(|| Error::Format(format!("missing field `{what}`")))?
        .parse()
        .map_err(|_| Error::Format(format!("bad value for `{what}`: {:?}", record.get(i))))
}

fn csv_reader<R: BufRead>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader)
}

fn check_header(reader: &mut csv::Reader<impl BufRead>, expected: &str) -> Result<()> {
    let header = reader.headers().map_err(csv_error)?;
    let found: Vec<&str> = header.iter().collect();
    if found.join(",") != expected {
        return Err(Error::Format(format!(
            "unexpected header `{}`",
            found.join(",")
        )));
    }
    Ok(())
}

impl ResultTable {
    pub fn cell(&self, row: &str, statistic: Statistic) -> Option<&RunLengthSummary> {
        self.cells
            .iter()
            .find(|c| c.row == row && c.statistic == statistic)
            .map(|c| &c.summary)
    }

    pub fn limit(&self, statistic: Statistic) -> Option<f64> {
        self.calibrations
            .iter()
            .find(|c| c.statistic == statistic)
            .map(|c| c.result.limit)
    }

    /// One record per (row, statistic) cell.
    pub fn write_cells_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# scenario: {}", self.scenario).map_err(io_error)?;
        writeln!(
            out,
            "# arl: mean run length; se: standard error of the mean"
        )
        .map_err(io_error)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CELLS_HEADER.split(',')).map_err(csv_error)?;
        for c in &self.cells {
            let s = &c.summary;
            w.write_record([
                c.row.clone(),
                c.statistic.name().to_string(),
                fmt_f64(s.arl),
                fmt_f64(s.se),
                s.reps.to_string(),
                fmt_f64(s.capped_fraction),
                s.cap.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush().map_err(io_error)
    }

    pub fn write_calibrations_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# scenario: {}", self.scenario).map_err(io_error)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CALIBRATION_HEADER.split(','))
            .map_err(csv_error)?;
        for c in &self.calibrations {
            let r = &c.result;
            w.write_record([
                c.statistic.name().to_string(),
                fmt_f64(r.limit),
                fmt_f64(r.target_arl),
                fmt_f64(r.achieved_arl),
                fmt_f64(r.achieved_se),
                fmt_f64(r.search_arl),
                r.iterations.to_string(),
                fmt_f64(r.bracket.0),
                fmt_f64(r.bracket.1),
                fmt_f64(r.capped_fraction),
                r.reps.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush().map_err(io_error)
    }

    /// Reads files written by [`Self::write_cells_csv`] and
    /// [`Self::write_calibrations_csv`].
    pub fn read_csv<R1: BufRead, R2: BufRead>(
        scenario: &str,
        cells: R1,
        calibrations: R2,
    ) -> Result<Self> {
        let mut table = ResultTable {
            scenario: scenario.to_string(),
            ..Default::default()
        };
        let mut reader = csv_reader(cells);
        check_header(&mut reader, CELLS_HEADER)?;
        for record in reader.records() {
            let r = record.map_err(csv_error)?;
            table.cells.push(ResultCell {
                row: parse_field(&r, 0, "row")?,
                statistic: parse_field(&r, 1, "statistic")?,
                summary: RunLengthSummary {
                    arl: parse_field(&r, 2, "arl")?,
                    se: parse_field(&r, 3, "se")?,
                    reps: parse_field(&r, 4, "reps")?,
                    capped_fraction: parse_field(&r, 5, "capped_fraction")?,
                    cap: parse_field(&r, 6, "cap")?,
                },
            });
        }
        let mut reader = csv_reader(calibrations);
        check_header(&mut reader, CALIBRATION_HEADER)?;
        for record in reader.records() {
            let r = record.map_err(csv_error)?;
            table.calibrations.push(StatisticCalibration {
                statistic: parse_field(&r, 0, "statistic")?,
                result: CalibrationResult {
                    limit: parse_field(&r, 1, "limit")?,
                    target_arl: parse_field(&r, 2, "target_arl")?,
                    achieved_arl: parse_field(&r, 3, "achieved_arl")?,
                    achieved_se: parse_field(&r, 4, "achieved_se")?,
                    search_arl: parse_field(&r, 5, "search_arl")?,
                    iterations: parse_field(&r, 6, "iterations")?,
                    bracket: (
                        parse_field(&r, 7, "bracket_lo")?,
                        parse_field(&r, 8, "bracket_hi")?,
                    ),
                    capped_fraction: parse_field(&r, 9, "capped_fraction")?,
                    reps: parse_field(&r, 10, "reps")?,
                },
            });
        }
        Ok(table)
    }

    /// Rows by statistic columns, standard errors in parentheses.
    pub fn render_text(&self) -> String {
        let mut rows: Vec<&str> = Vec::new();
        let mut stats: Vec<Statistic> = Vec::new();
        for c in &self.cells {
            if !rows.contains(&c.row.as_str()) {
                rows.push(&c.row);
            }
            if !stats.contains(&c.statistic) {
                stats.push(c.statistic);
            }
        }
        if stats.is_empty() {
            stats = self.calibrations.iter().map(|c| c.statistic).collect();
        }
        let mut grid: Vec<Vec<String>> = vec![std::iter::once("shift".to_string())
            .chain(stats.iter().map(|s| s.symbol().to_string()))
            .collect()];
        for row in &rows {
            let mut line = vec![row.to_string()];
            for &s in &stats {
                line.push(
                    self.cell(row, s)
                        .map_or_else(|| "-".to_string(), |c| fmt_with_se(c.arl, c.se)),
                );
            }
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|j| grid.iter().map(|r| r[j].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.scenario);
        for line in &grid {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| {
                    if j == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        for c in &self.calibrations {
            let r = &c.result;
            let _ = writeln!(
                out,
                "limit {}: {:.6} (IC ARL {})",
                c.statistic.symbol(),
                r.limit,
                fmt_with_se(r.achieved_arl, r.achieved_se)
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table1_population() -> Vec<Case> {
        vec![
            Case {
                label: "a".into(),
                count: 400,
                stream: StreamDef::nominal(vec![0.5, 0.5]),
            },
            Case {
                label: "b".into(),
                count: 300,
                stream: StreamDef::nominal(vec![0.3, 0.4, 0.3]),
            },
            Case {
                label: "c".into(),
                count: 300,
                stream: StreamDef::nominal(vec![0.2, 0.3, 0.1, 0.4]),
            },
        ]
    }

    fn shift(case: &str, count: usize, xi: &[f64]) -> CaseShift {
        CaseShift {
            case: case.into(),
            count,
            xi: Some(xi.to_vec()),
            delta: None,
        }
    }

    #[test]
    fn table1_population_expands() {
        let (specs, shifts) = build_population(&table1_population(), &[]).unwrap();
        assert_eq!(specs.len(), 1000);
        assert!(shifts.iter().all(|s| !s.is_shift()));
        assert_eq!(specs[399].levels(), 2);
        assert_eq!(specs[400].levels(), 3);
        assert_eq!(specs[999].levels(), 4);
        assert!(specs.iter().enumerate().all(|(i, s)| s.id == i));
    }

    #[test]
    fn table4_population_expands() {
        let mut pop = table1_population();
        for c in &mut pop {
            c.count = 250;
        }
        pop.push(Case {
            label: "d".into(),
            count: 250,
            stream: StreamDef::ordinal_cutpoints(vec![-1.0, 0.2, 0.8]),
        });
        let plan = [CaseShift {
            case: "d".into(),
            count: 10,
            xi: None,
            delta: Some(0.1),
        }];
        let (specs, shifts) = build_population(&pop, &plan).unwrap();
        assert_eq!(specs.len(), 1000);
        assert_eq!(shifts.iter().filter(|s| s.is_shift()).count(), 10);
        assert!(shifts[750..760].iter().all(|s| s.is_shift()));
        assert!(!shifts[760].is_shift());
    }

    #[test]
    fn shifts_go_to_the_first_streams_of_each_case() {
        let plan = [
            shift("a", 3, &[0.03, -0.03]),
            shift("c", 2, &[0.0, 0.01, 0.0, -0.01]),
        ];
        let (_, shifts) = build_population(&table1_population(), &plan).unwrap();
        let shifted: Vec<usize> = (0..1000).filter(|&i| shifts[i].is_shift()).collect();
        assert_eq!(shifted, vec![0, 1, 2, 700, 701]);
    }

    #[test]
    fn overflow_and_bad_shifts_are_errors() {
        let err =
            build_population(&table1_population(), &[shift("a", 401, &[0.03, -0.03])]).unwrap_err();
        assert_eq!(
            err,
            Error::CountOverflow {
                case: "a".into(),
                shifted: 401,
                available: 400
            }
        );
        assert!(build_population(&table1_population(), &[shift("b", 1, &[0.03, -0.03])]).is_err());
        assert!(build_population(&table1_population(), &[shift("z", 1, &[0.03, -0.03])]).is_err());
        assert!(build_population(&table1_population(), &[shift("a", 1, &[0.6, -0.6])]).is_err());
    }

    fn small_scenario() -> Scenario {
        Scenario::from_toml(
            r#"
schema_version = 1
name = "small"
lambda = 0.1
sample_size = 100
statistics = ["zhang", "sum"]
target_arl0 = 40.0
master_seed = 11
reps = 300

[[population]]
label = "a"
count = 20
stream = { kind = "nominal", probs = [0.5, 0.5] }

[[population]]
label = "d"
count = 10
stream = { kind = "ordinal", cutpoints = [-1.0, 0.2, 0.8] }

[[rows]]
label = "IC"

[[rows]]
label = "a=10"
shifts = [{ case = "a", count = 10, xi = [0.05, -0.05] }]

[[rows]]
label = "d=10"
shifts = [{ case = "d", count = 10, delta = 0.3 }]
"#,
        )
        .unwrap()
    }

    #[test]
    fn scenario_rejects_unknown_keys_and_versions() {
        let good = toml::to_string(&small_scenario()).unwrap();
        assert_eq!(Scenario::from_toml(&good).unwrap(), small_scenario());
        assert!(
            Scenario::from_toml(&good.replace("schema_version = 1", "schema_version = 2")).is_err()
        );
        assert!(Scenario::from_toml(&format!("colour = 1\n{good}")).is_err());
    }

    #[test]
    fn run_table_is_complete_and_consistent() {
        let scenario = small_scenario();
        let settings = RunSettings::for_scenario(&scenario, Preset::Desk);
        assert_eq!(settings.reps, 300);
        let mut cache = CalibrationCache::new();
        let table = run_table(&scenario, &settings, &mut cache).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(table.cells.len(), 6);
        for stat in [Statistic::Zhang, Statistic::Sum] {
            let ic = table.cell("IC", stat).unwrap();
            assert!((ic.arl - 40.0).abs() < 3.0 * ic.se + 2.0, "{stat}: {ic:?}");
            assert!(table.cell("a=10", stat).unwrap().arl < ic.arl);
            assert!(table.cell("d=10", stat).unwrap().arl < ic.arl);
        }
        let again = run_table(&scenario, &settings, &mut cache).unwrap();
        assert_eq!(table, again);

        let parallel = RunSettings {
            parallel_cells: true,
            ..settings
        };
        assert_eq!(run_table(&scenario, &parallel, &mut cache).unwrap(), table);

        let mut cells = Vec::new();
        let mut cals = Vec::new();
        table.write_cells_csv(&mut cells).unwrap();
        table.write_calibrations_csv(&mut cals).unwrap();
        let parsed = ResultTable::read_csv("small", &cells[..], &cals[..]).unwrap();
        assert_eq!(parsed, table);

        let text = table.render_text();
        assert!(text.contains("a=10"));
        assert!(text.lines().nth(1).unwrap().contains('T'));
    }

    #[test]
    fn burn_in_gives_steady_state_cells() {
        let zero = small_scenario();
        let steady = Scenario::from_toml(&format!(
            "burn_in = 30\n{}",
            toml::to_string(&zero).unwrap()
        ))
        .unwrap();
        assert_eq!(steady.burn_in, 30);
        assert!(!toml::to_string(&zero).unwrap().contains("burn_in"));

        let settings = RunSettings::for_scenario(&zero, Preset::Desk);
        let mut cache = CalibrationCache::new();
        let z = cache
            .get_or_calibrate(&zero, Statistic::Zhang, &settings)
            .unwrap();
        let s = cache
            .get_or_calibrate(&steady, Statistic::Zhang, &settings)
            .unwrap();
        assert_eq!(cache.len(), 2);
        assert!(
            (s.achieved_arl - 40.0).abs() < 3.0 * s.achieved_se + 2.0,
            "{s:?}"
        );

        // The EWMA starts at its mean, so a shift at sample 1 needs longer to
        // show than one arriving after the weights have spread out.
        let row = zero.rows.iter().position(|r| r.label == "a=10").unwrap();
        let from_zero = estimate_row(&zero, row, Statistic::Zhang, z.limit, &settings).unwrap();
        let from_steady = estimate_row(&steady, row, Statistic::Zhang, z.limit, &settings).unwrap();
        assert!(
            from_steady.arl < from_zero.arl,
            "{from_steady:?} vs {from_zero:?}"
        );
    }

    #[test]
    fn single_cell_table_exports_one_row() {
        let table = ResultTable {
            scenario: "one".into(),
            calibrations: vec![],
            cells: vec![ResultCell {
                row: "IC".into(),
                statistic: Statistic::Max,
                summary: RunLengthSummary::from_run_lengths(&[3, 5], 100),
            }],
        };
        let mut out = Vec::new();
        table.write_cells_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 2);
        assert_eq!(data[0], CELLS_HEADER);
    }
}
