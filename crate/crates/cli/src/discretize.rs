//! Phase-I discretization of continuous measurements into two-level streams.
//!
//! Missing values are replaced by the mean of the observed values of the
//! same column within the same group. Each column's threshold is its mean
//! over the conforming group; values at or below it become level 1, values
//! above it level 2. Columns that are constant over the conforming group
//! carry no information and are dropped.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use catstream_core::report::fmt_f64;

use crate::observations::Observations;

const MISSING: [&str; 7] = ["", "na", "nan", "?", "null", "none", "-"];

fn is_missing(token: &str) -> bool {
    MISSING.contains(&token.to_ascii_lowercase().as_str())
}

fn split_line(line: &str, comma: bool) -> Vec<&str> {
    if comma {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// A numeric matrix with optional missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousData {
    pub names: Vec<String>,
    /// Row-major; `None` marks a missing value.
    pub rows: Vec<Vec<Option<f64>>>,
}

impl ContinuousData {
    /// Comma- or whitespace-separated values, detected from the first
    /// line. A first line that is not numeric is taken as column names;
    /// otherwise columns are named `x1, x2, ...`.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut names: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        let mut comma = None;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let comma = *comma.get_or_insert_with(|| trimmed.contains(','));
            let tokens = split_line(trimmed, comma);
            let parsed: Vec<Option<Option<f64>>> = tokens
                .iter()
                .map(|t| {
                    if is_missing(t) {
                        Some(None)
                    } else {
                        t.parse::<f64>().ok().filter(|v| v.is_finite()).map(Some)
                    }
                })
                .collect();
            if names.is_none() && rows.is_empty() && parsed.iter().any(Option::is_none) {
                names = Some(tokens.iter().map(|t| t.to_string()).collect());
                continue;
            }
            let width = names
                .as_ref()
                .map_or_else(|| rows.first().map(Vec::len), |h| Some(h.len()));
            if let Some(w) = width {
                if tokens.len() != w {
                    bail!("line {}: {} values, expected {w}", n + 1, tokens.len());
                }
            }
            let row = parsed
                .into_iter()
                .zip(&tokens)
                .map(|(v, t)| {
                    v.ok_or_else(|| anyhow::anyhow!("line {}: `{t}` is not a number", n + 1))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let width = names
            .as_ref()
            .map(Vec::len)
            .or_else(|| rows.first().map(Vec::len));
        let Some(width) = width else {
            bail!("data file is empty")
        };
        let names = names.unwrap_or_else(|| (1..=width).map(|j| format!("x{j}")).collect());
        Ok(Self { names, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file =
            std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read(std::io::BufReader::new(file)).with_context(|| format!("in {}", path.display()))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.names.join(","))?;
        for row in &self.rows {
            let fields: Vec<String> = row
                .iter()
                .map(|v| v.map_or_else(|| "NaN".to_string(), |x| format!("{x}")))
                .collect();
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// One group label per line (the first comma- or whitespace-separated token).
pub fn read_labels<R: BufRead>(reader: R) -> Result<Vec<String>> {
    let mut labels = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let token = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .next()
            .unwrap_or_default();
        labels.push(token.to_string());
    }
    Ok(labels)
}

pub fn load_labels(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_labels(std::io::BufReader::new(file)).with_context(|| format!("in {}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnStatus {
    Kept,
    /// Zero variance over the conforming group.
    Constant,
    /// No observed value in the conforming group.
    NoConformingData,
}

impl ColumnStatus {
    fn as_str(&self) -> &'static str {
        match self {
            ColumnStatus::Kept => "kept",
            ColumnStatus::Constant => "dropped_constant",
            ColumnStatus::NoConformingData => "dropped_no_conforming_data",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "kept" => ColumnStatus::Kept,
            "dropped_constant" => ColumnStatus::Constant,
            "dropped_no_conforming_data" => ColumnStatus::NoConformingData,
            _ => bail!("unknown column status `{s}`"),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnThreshold {
    /// 0-based position in the input data.
    pub column: usize,
    pub name: String,
    pub threshold: f64,
    /// Estimated `P(level 1)` in the conforming group.
    pub p_level1: f64,
    pub status: ColumnStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub columns: Vec<ColumnThreshold>,
}

pub const THRESHOLDS_HEADER: &str = "column,id,threshold,p_level1,p_level2,status";

impl Thresholds {
    pub fn kept(&self) -> impl Iterator<Item = &ColumnThreshold> {
        self.columns
            .iter()
            .filter(|c| c.status == ColumnStatus::Kept)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# column: 1-based input position; level 1 if value <= threshold, else level 2"
        )?;
        writeln!(
            out,
            "# p_level1, p_level2: estimated in-control probabilities (conforming group)"
        )?;
        let mut csv = csv::Writer::from_writer(out);
        csv.write_record(THRESHOLDS_HEADER.split(','))?;
        for c in &self.columns {
            csv.write_record([
                (c.column + 1).to_string(),
                c.name.clone(),
                fmt_f64(c.threshold),
                fmt_f64(c.p_level1),
                fmt_f64(1.0 - c.p_level1),
                c.status.as_str().to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(reader);
        let header: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != THRESHOLDS_HEADER {
            bail!("unexpected thresholds header `{}`", header.join(","));
        }
        let mut columns = Vec::new();
        for record in csv.records() {
            let r = record?;
            let column: usize = r[0].parse().context("column")?;
            if column == 0 {
                bail!("column positions are 1-based");
            }
            columns.push(ColumnThreshold {
                column: column - 1,
                name: r[1].to_string(),
                threshold: r[2].parse().context("threshold")?,
                p_level1: r[3].parse().context("p_level1")?,
                status: ColumnStatus::parse(&r[5])?,
            });
        }
        Ok(Self { columns })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file =
            std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read(std::io::BufReader::new(file)).with_context(|| format!("in {}", path.display()))
    }
}

fn group_indices(labels: &[String]) -> BTreeMap<&str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (t, l) in labels.iter().enumerate() {
        groups.entry(l.as_str()).or_default().push(t);
    }
    groups
}

fn mean_observed(data: &ContinuousData, rows: &[usize], j: usize) -> Option<f64> {
    let (sum, n) = rows
        .iter()
        .filter_map(|&t| data.rows[t][j])
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Column `j` with missing values replaced by per-group means. A group with
/// no observed value in the column takes `fallback`.
fn impute_column(
    data: &ContinuousData,
    groups: &BTreeMap<&str, Vec<usize>>,
    j: usize,
    fallback: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; data.rows.len()];
    for rows in groups.values() {
        let fill = mean_observed(data, rows, j).unwrap_or(fallback);
        for &t in rows {
            out[t] = data.rows[t][j].unwrap_or(fill);
        }
    }
    out
}

fn check_inputs(data: &ContinuousData, labels: &[String]) -> Result<()> {
    if data.rows.is_empty() {
        bail!("data file has no rows");
    }
    if labels.len() != data.rows.len() {
        bail!("{} labels for {} data rows", labels.len(), data.rows.len());
    }
    for (j, name) in data.names.iter().enumerate() {
        if data.rows.iter().all(|r| r[j].is_none()) {
            bail!("column `{name}` has no observed values");
        }
    }
    Ok(())
}

/// Estimates thresholds and in-control probabilities from the rows labelled
/// `conforming`.
pub fn estimate_thresholds(
    data: &ContinuousData,
    labels: &[String],
    conforming: &str,
) -> Result<Thresholds> {
    check_inputs(data, labels)?;
    let groups = group_indices(labels);
    let Some(conf_rows) = groups.get(conforming) else {
        bail!("no rows carry the conforming label `{conforming}`");
    };
    let mut columns = Vec::with_capacity(data.names.len());
    for (j, name) in data.names.iter().enumerate() {
        let Some(threshold) = mean_observed(data, conf_rows, j) else {
            columns.push(ColumnThreshold {
                column: j,
                name: name.clone(),
                threshold: f64::NAN,
                p_level1: f64::NAN,
                status: ColumnStatus::NoConformingData,
            });
            continue;
        };
        let values: Vec<f64> = conf_rows
            .iter()
            .map(|&t| data.rows[t][j].unwrap_or(threshold))
            .collect();
        let constant = values.iter().all(|&v| v == values[0]);
        let below = values.iter().filter(|&&v| v <= threshold).count();
        columns.push(ColumnThreshold {
            column: j,
            name: name.clone(),
            threshold,
            p_level1: below as f64 / values.len() as f64,
            status: if constant {
                ColumnStatus::Constant
            } else {
                ColumnStatus::Kept
            },
        });
    }
    Ok(Thresholds { columns })
}

/// How missing values are filled before dichotomising.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Imputation {
    /// Mean of the observed values in the row's label group (Phase I).
    GroupMean,
    /// The column threshold, i.e. the Phase-I conforming mean. Missing
    /// values then fall in level 1 as they did when the in-control
    /// probabilities were estimated, and labels are not consulted.
    Threshold,
}

/// Imputes and dichotomises every kept column.
pub fn apply_thresholds(
    data: &ContinuousData,
    labels: &[String],
    thresholds: &Thresholds,
    imputation: Imputation,
) -> Result<Observations> {
    check_inputs(data, labels)?;
    let groups = group_indices(labels);
    let kept: Vec<&ColumnThreshold> = thresholds.kept().collect();
    if kept.is_empty() {
        bail!("no columns left after dropping constant ones");
    }
    let mut rows = vec![Vec::with_capacity(kept.len()); data.rows.len()];
    for c in &kept {
        if c.column >= data.names.len() {
            bail!(
                "thresholds refer to column {} but the data has {}",
                c.column + 1,
                data.names.len()
            );
        }
        let values = match imputation {
            Imputation::GroupMean => impute_column(data, &groups, c.column, c.threshold),
            Imputation::Threshold => data
                .rows
                .iter()
                .map(|r| r[c.column].unwrap_or(c.threshold))
                .collect(),
        };
        for (row, v) in rows.iter_mut().zip(values) {
            row.push(if v <= c.threshold { 1 } else { 2 });
        }
    }
    Ok(Observations {
        ids: kept.iter().map(|c| c.name.clone()).collect(),
        rows,
    })
}

/// Rows of `obs` whose label is `label`, in order.
pub fn select_group(obs: &Observations, labels: &[String], label: &str) -> Observations {
    Observations {
        ids: obs.ids.clone(),
        rows: obs
            .rows
            .iter()
            .zip(labels)
            .filter(|(_, l)| l.as_str() == label)
            .map(|(r, _)| r.clone())
            .collect(),
    }
}

/// A file-name-safe rendering of a group label.
pub fn label_slug(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(cols: &[&[Option<f64>]]) -> ContinuousData {
        let n = cols[0].len();
        ContinuousData {
            names: (1..=cols.len()).map(|j| format!("x{j}")).collect(),
            rows: (0..n)
                .map(|t| cols.iter().map(|c| c[t]).collect())
                .collect(),
        }
    }

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn symmetric_column() {
        let d = data(&[&[Some(1.0), Some(2.0), Some(3.0), Some(4.0)]]);
        let l = labels(&["ok"; 4]);
        let th = estimate_thresholds(&d, &l, "ok").unwrap();
        assert_eq!(th.columns[0].threshold, 2.5);
        assert_eq!(th.columns[0].p_level1, 0.5);
        let obs = apply_thresholds(&d, &l, &th, Imputation::GroupMean).unwrap();
        assert_eq!(obs.rows, vec![vec![1], vec![1], vec![2], vec![2]]);
    }

    #[test]
    fn constant_column_is_dropped() {
        let d = data(&[
            &[Some(1.0); 4],
            &[Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
        ]);
        let l = labels(&["ok"; 4]);
        let th = estimate_thresholds(&d, &l, "ok").unwrap();
        assert_eq!(th.columns[0].status, ColumnStatus::Constant);
        let obs = apply_thresholds(&d, &l, &th, Imputation::GroupMean).unwrap();
        assert_eq!(obs.ids, vec!["x2"]);
    }

    #[test]
    fn missing_values_take_the_group_mean() {
        let d = data(&[&[Some(1.0), None, Some(3.0), Some(10.0), None]]);
        let l = labels(&["ok", "ok", "ok", "bad", "bad"]);
        let th = estimate_thresholds(&d, &l, "ok").unwrap();
        assert_eq!(th.columns[0].threshold, 2.0);
        // Imputed 2 sits on the threshold and so is level 1.
        assert!((th.columns[0].p_level1 - 2.0 / 3.0).abs() < 1e-15);
        let obs = apply_thresholds(&d, &l, &th, Imputation::GroupMean).unwrap();
        let levels: Vec<u16> = obs.rows.iter().map(|r| r[0]).collect();
        assert_eq!(levels, vec![1, 1, 2, 2, 2]);
        let bad = select_group(&obs, &l, "bad");
        assert_eq!(bad.rows.len(), 2);

        let monitored = apply_thresholds(&d, &l, &th, Imputation::Threshold).unwrap();
        let levels: Vec<u16> = monitored.rows.iter().map(|r| r[0]).collect();
        assert_eq!(levels, vec![1, 1, 2, 2, 1]);
    }

    #[test]
    fn group_without_data_falls_back_to_the_threshold() {
        let d = data(&[&[Some(1.0), Some(3.0), None]]);
        let l = labels(&["ok", "ok", "bad"]);
        let th = estimate_thresholds(&d, &l, "ok").unwrap();
        let obs = apply_thresholds(&d, &l, &th, Imputation::GroupMean).unwrap();
        assert_eq!(obs.rows[2], vec![1]);
    }

    #[test]
    fn error_cases() {
        let d = data(&[&[Some(1.0), Some(2.0)]]);
        assert!(estimate_thresholds(&d, &labels(&["a", "a"]), "ok").is_err());
        assert!(estimate_thresholds(&d, &labels(&["a"]), "a").is_err());
        let empty = data(&[&[None, None], &[Some(1.0), Some(2.0)]]);
        assert!(estimate_thresholds(&empty, &labels(&["a", "a"]), "a").is_err());
        let sparse = data(&[
            &[None, Some(5.0), Some(1.0)],
            &[Some(1.0), Some(2.0), Some(3.0)],
        ]);
        // One observed conforming value: the imputed column is constant.
        let th = estimate_thresholds(&sparse, &labels(&["ok", "bad", "ok"]), "ok").unwrap();
        assert_eq!(th.columns[0].status, ColumnStatus::Constant);
        let th = estimate_thresholds(&sparse, &labels(&["ok", "bad", "bad"]), "ok").unwrap();
        assert_eq!(th.columns[0].status, ColumnStatus::NoConformingData);
    }

    #[test]
    fn parses_comma_and_whitespace_files() {
        let csv = ContinuousData::read("a,b\n1,NaN\n2.5,3\n".as_bytes()).unwrap();
        assert_eq!(csv.names, vec!["a", "b"]);
        assert_eq!(csv.rows[0], vec![Some(1.0), None]);
        let ws = ContinuousData::read("1 NaN 3\n4 5 6\n".as_bytes()).unwrap();
        assert_eq!(ws.names, vec!["x1", "x2", "x3"]);
        assert_eq!(ws.rows[1], vec![Some(4.0), Some(5.0), Some(6.0)]);
        assert!(ContinuousData::read("1 2\n3\n".as_bytes()).is_err());
        assert!(ContinuousData::read("a,b\n1,zz\n".as_bytes()).is_err());
        let mut out = Vec::new();
        csv.write(&mut out).unwrap();
        assert_eq!(ContinuousData::read(&out[..]).unwrap(), csv);

        let l = read_labels("-1 \"19/07/2008 11:55:00\"\n1,x\n# c\n\n-1\n".as_bytes()).unwrap();
        assert_eq!(l, vec!["-1", "1", "-1"]);
    }

    #[test]
    fn thresholds_round_trip() {
        let d = data(&[&[Some(1.0), Some(2.0), Some(4.0)], &[Some(7.0); 3]]);
        let th = estimate_thresholds(&d, &labels(&["ok"; 3]), "ok").unwrap();
        let mut out = Vec::new();
        th.write(&mut out).unwrap();
        assert_eq!(Thresholds::read(&out[..]).unwrap(), th);
    }
}
