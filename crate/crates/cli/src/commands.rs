//! File-level drivers behind each subcommand.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use catstream_core::calibration::{calibrate_engine, CalibrationOptions, CalibrationResult};
use catstream_core::report::{fmt_f64, ln_or_sentinel};
use catstream_core::simulate::{run_table, CalibrationCache, Preset, RunSettings};
use catstream_core::{
    Chart, ChartPoint, Engine, ResultTable, RngSeed, Scenario, ShiftSpec, Statistic, StreamKind,
};

use crate::config::{CalibrationSection, MonitorConfigFile, MonitorSetup, StreamEntry};
use crate::discretize::{
    apply_thresholds, estimate_thresholds, label_slug, load_labels, select_group, ContinuousData,
    Imputation, Thresholds,
};
use crate::observations::Observations;
use crate::scenarios;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

/// Calibrates the configured chart (all streams in control).
pub fn calibrate_setup(
    setup: &MonitorSetup,
    arl0: f64,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    let shifts = vec![ShiftSpec::NoShift; setup.specs.len()];
    let engine = Engine::new(&setup.specs, &shifts, &setup.chart)?;
    Ok(calibrate_engine(&engine, arl0, options)?)
}

pub const CALIBRATION_HEADER: &str = "statistic,limit,ln_limit,target_arl,achieved_arl,achieved_se,search_arl,iterations,bracket_lo,bracket_hi,capped_fraction,reps,seed";

pub fn write_calibration<W: Write>(
    mut out: W,
    statistic: Statistic,
    result: &CalibrationResult,
    seed: u64,
) -> Result<()> {
    writeln!(
        out,
        "# limit: control limit on the statistic; ln_limit: its natural log"
    )?;
    writeln!(
        out,
        "# achieved_arl, achieved_se: in-control ARL at limit on an independent seed; search_arl: ARL on the search replications"
    )?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(CALIBRATION_HEADER.split(','))?;
    csv.write_record([
        statistic.name().to_string(),
        fmt_f64(result.limit),
        fmt_f64(ln_or_sentinel(result.limit)),
        fmt_f64(result.target_arl),
        fmt_f64(result.achieved_arl),
        fmt_f64(result.achieved_se),
        fmt_f64(result.search_arl),
        result.iterations.to_string(),
        fmt_f64(result.bracket.0),
        fmt_f64(result.bracket.1),
        fmt_f64(result.capped_fraction),
        result.reps.to_string(),
        seed.to_string(),
    ])?;
    csv.flush()?;
    Ok(())
}

pub struct CalibrateArgs<'a> {
    pub config: &'a Path,
    pub arl0: f64,
    pub reps: usize,
    pub seed: u64,
    pub out: &'a Path,
    /// Also write the configuration with the calibrated limit filled in.
    pub config_out: Option<&'a Path>,
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<CalibrationResult> {
    let setup = MonitorConfigFile::load(args.config)?;
    if setup.chart.limit.is_some() {
        log::warn!(
            "ignoring the limit in {}; it is being recalibrated",
            args.config.display()
        );
    }
    let mut options = CalibrationOptions::new(args.reps, RngSeed::new(args.seed, 0));
    if let Some(section) = setup.file.calibration {
        if let Some(cap) = section.cap {
            options.cap = cap;
        }
        if let Some(tol) = section.tol_rel {
            options.tol_rel = tol;
        }
    }
    let result = calibrate_setup(&setup, args.arl0, &options)?;
    write_calibration(create(args.out)?, setup.chart.statistic, &result, args.seed)?;
    if let Some(path) = args.config_out {
        let mut file = setup.file.clone();
        file.limit = Some(result.limit);
        file.log_limit = None;
        file.seed = Some(args.seed);
        file.calibration = Some(CalibrationSection {
            arl0: args.arl0,
            reps: args.reps,
            cap: Some(options.cap),
            tol_rel: Some(options.tol_rel),
        });
        let mut out = create(path)?;
        out.write_all(file.to_toml()?.as_bytes())?;
        out.flush()?;
    }
    Ok(result)
}

/// The limit a monitoring run uses: the configured one, or a calibration
/// from the `[calibration]` table.
pub fn resolve_limit(setup: &MonitorSetup) -> Result<f64> {
    if let Some(limit) = setup.chart.limit {
        return Ok(limit);
    }
    let Some((arl0, options)) = setup.file.calibration_options() else {
        bail!("the configuration needs `limit`, `log_limit` or a [calibration] table");
    };
    log::info!(
        "calibrating the limit for ARL0 = {arl0} with {} replications",
        options.reps
    );
    Ok(calibrate_setup(setup, arl0, &options)?.limit)
}

/// Runs the chart over consecutive samples of `N` rows.
pub fn run_monitor(
    setup: &MonitorSetup,
    obs: &Observations,
    limit: f64,
    emit_local_scores: bool,
) -> Result<Vec<ChartPoint>> {
    obs.check(&setup.ids, &setup.specs)?;
    let n = setup.chart.sample_size as usize;
    if obs.rows.len() < n {
        bail!(
            "{} observation rows cannot fill one sample of size {n}",
            obs.rows.len()
        );
    }
    let samples = obs.rows.len() / n;
    if !obs.rows.len().is_multiple_of(n) {
        log::warn!(
            "dropping {} trailing rows that do not fill a sample of size {n}",
            obs.rows.len() % n
        );
    }
    let mut chart = Chart::new(setup.specs.clone(), setup.chart.with_limit(limit))?;
    (0..samples)
        .map(|k| {
            Ok(chart.step(
                &obs.sample_counts(&setup.specs, k * n, n),
                emit_local_scores,
            )?)
        })
        .collect()
}

pub fn write_monitor<W: Write>(
    mut out: W,
    setup: &MonitorSetup,
    points: &[ChartPoint],
    limit: f64,
) -> Result<()> {
    writeln!(
        out,
        "# statistic={} lambda={} sample_size={} streams={}",
        setup.chart.statistic,
        setup.chart.lambda,
        setup.chart.sample_size,
        setup.specs.len()
    )?;
    writeln!(
        out,
        "# k: sample index; value: chart statistic; ln_value: natural log of value ({} when value is 0); limit: control limit; alarm: 1 when value > limit",
        fmt_f64(ln_or_sentinel(0.0))
    )?;
    let with_scores = points.first().is_some_and(|p| p.local_scores.is_some());
    if with_scores {
        writeln!(out, "# u_<id>: local score of stream <id>")?;
    }
    let mut csv = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["k", "value", "ln_value", "limit", "alarm"]
        .map(String::from)
        .to_vec();
    if with_scores {
        header.extend(setup.ids.iter().map(|id| format!("u_{id}")));
    }
    csv.write_record(&header)?;
    for p in points {
        let mut record = vec![
            p.k.to_string(),
            fmt_f64(p.value),
            fmt_f64(ln_or_sentinel(p.value)),
            fmt_f64(limit),
            u8::from(p.alarm).to_string(),
        ];
        if let Some(scores) = &p.local_scores {
            record.extend(scores.iter().map(|&u| fmt_f64(u)));
        }
        csv.write_record(&record)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn cmd_monitor(
    config: &Path,
    data: &Path,
    out: &Path,
    emit_local_scores: bool,
) -> Result<Vec<ChartPoint>> {
    let setup = MonitorConfigFile::load(config)?;
    let obs = Observations::load(data)?;
    let limit = resolve_limit(&setup)?;
    let points = run_monitor(&setup, &obs, limit, emit_local_scores)?;
    write_monitor(create(out)?, &setup, &points, limit)?;
    Ok(points)
}

/// Bundled scenario name or path to a scenario file.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario> {
    if let Some(text) = scenarios::bundled(name_or_path) {
        return Ok(Scenario::from_toml(text)?);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        bail!(
            "`{name_or_path}` is neither a bundled scenario ({}) nor a file",
            scenarios::names().join(", ")
        );
    }
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Scenario::from_toml(&text).with_context(|| format!("in {}", path.display()))
}

pub struct SimulateOutput {
    pub table: ResultTable,
    pub files: Vec<PathBuf>,
}

pub fn cmd_simulate(
    scenario: &str,
    preset: Preset,
    out_dir: &Path,
    parallel_cells: bool,
) -> Result<SimulateOutput> {
    let scenario = load_scenario(scenario)?;
    let mut settings = RunSettings::for_scenario(&scenario, preset);
    settings.parallel_cells = parallel_cells;
    log::info!(
        "scenario {}: {} streams, {} rows, {} replications per cell",
        scenario.name,
        scenario.streams(),
        scenario.rows.len(),
        settings.reps
    );
    let table = run_table(&scenario, &settings, &mut CalibrationCache::new())?;
    let slug = label_slug(&scenario.name);
    let cells = out_dir.join(format!("{slug}_cells.csv"));
    let calibration = out_dir.join(format!("{slug}_calibration.csv"));
    let text = out_dir.join(format!("{slug}.txt"));
    let mut w = create(&cells)?;
    table.write_cells_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&calibration)?;
    table.write_calibrations_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&text)?;
    w.write_all(table.render_text().as_bytes())?;
    w.flush()?;
    Ok(SimulateOutput {
        table,
        files: vec![cells, calibration, text],
    })
}

pub const SCORES_HEADER: &str =
    "id,levels,latent,pi0,cutpoints,alpha,alpha_lambda_alpha,sum_pi_alpha";

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(";")
}

/// Score vectors of the ordinal streams; vector fields are `;`-separated.
pub fn render_scores(setup: &MonitorSetup) -> Result<String> {
    let mut out = Vec::new();
    writeln!(
        out,
        "# ordinal streams only; alpha_lambda_alpha = alpha' (diag(pi0) - pi0 pi0') alpha"
    )?;
    {
        let mut csv = csv::Writer::from_writer(&mut out);
        csv.write_record(SCORES_HEADER.split(','))?;
        for (id, spec) in setup.ids.iter().zip(&setup.specs) {
            let StreamKind::Ordinal(o) = &spec.kind else {
                continue;
            };
            let centre: f64 = o.pi0().iter().zip(o.alpha()).map(|(p, a)| p * a).sum();
            csv.write_record([
                id.clone(),
                o.levels().to_string(),
                format!("{:?}", o.family()).to_lowercase(),
                join(o.pi0()),
                join(o.cutpoints()),
                join(o.alpha()),
                fmt_f64(o.score_variance()),
                fmt_f64(centre),
            ])?;
        }
        csv.flush()?;
    }
    Ok(String::from_utf8(out)?)
}

pub fn cmd_scores(config: &Path) -> Result<String> {
    let setup = MonitorConfigFile::load(config)?;
    if !setup
        .specs
        .iter()
        .any(|s| matches!(s.kind, StreamKind::Ordinal(_)))
    {
        log::warn!("{} defines no ordinal streams", config.display());
    }
    render_scores(&setup)
}

pub struct DiscretizeArgs<'a> {
    pub data: &'a Path,
    pub labels: &'a Path,
    pub conforming: &'a str,
    pub out_dir: &'a Path,
    /// Apply an existing thresholds file instead of estimating one.
    pub thresholds: Option<&'a Path>,
    pub lambda: f64,
    pub sample_size: u32,
    pub statistic: Statistic,
}

#[derive(Debug)]
pub struct DiscretizeSummary {
    pub kept: usize,
    pub dropped: Vec<String>,
    pub rows: usize,
    pub groups: Vec<(String, usize)>,
}

pub fn cmd_discretize(args: &DiscretizeArgs) -> Result<DiscretizeSummary> {
    let data = ContinuousData::load(args.data)?;
    let labels = load_labels(args.labels)?;
    let (thresholds, estimated) = match args.thresholds {
        Some(path) => (Thresholds::load(path)?, false),
        None => (estimate_thresholds(&data, &labels, args.conforming)?, true),
    };
    let imputation = if estimated {
        Imputation::GroupMean
    } else {
        Imputation::Threshold
    };
    let obs = apply_thresholds(&data, &labels, &thresholds, imputation)?;
    let dropped: Vec<String> = thresholds
        .columns
        .iter()
        .filter(|c| c.status != crate::discretize::ColumnStatus::Kept)
        .map(|c| c.name.clone())
        .collect();
    if !dropped.is_empty() {
        log::info!("dropped {} columns: {}", dropped.len(), dropped.join(", "));
    }

    std::fs::create_dir_all(args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    if estimated {
        let mut w = create(&args.out_dir.join("thresholds.csv"))?;
        thresholds.write(&mut w)?;
        w.flush()?;
        let streams = thresholds
            .kept()
            .map(|c| StreamEntry::nominal(c.name.clone(), vec![c.p_level1, 1.0 - c.p_level1]))
            .collect();
        let config = MonitorConfigFile {
            schema_version: crate::config::CONFIG_SCHEMA_VERSION,
            lambda: args.lambda,
            sample_size: args.sample_size,
            statistic: args.statistic,
            limit: None,
            log_limit: None,
            seed: None,
            calibration: None,
            streams,
        };
        config
            .clone()
            .validate()
            .context("estimated configuration")?;
        let mut w = create(&args.out_dir.join("config.toml"))?;
        w.write_all(config.to_toml()?.as_bytes())?;
        w.flush()?;
    }
    let mut w = create(&args.out_dir.join("observations.csv"))?;
    obs.write(&mut w)?;
    w.flush()?;
    let mut groups: Vec<(String, usize)> = Vec::new();
    for label in &labels {
        match groups.iter_mut().find(|(l, _)| l == label) {
            Some(g) => g.1 += 1,
            None => groups.push((label.clone(), 1)),
        }
    }
    for (label, _) in &groups {
        let mut w = create(
            &args
                .out_dir
                .join(format!("observations_{}.csv", label_slug(label))),
        )?;
        select_group(&obs, &labels, label).write(&mut w)?;
        w.flush()?;
    }
    Ok(DiscretizeSummary {
        kept: obs.ids.len(),
        dropped,
        rows: obs.rows.len(),
        groups,
    })
}
