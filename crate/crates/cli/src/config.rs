//! Monitoring configuration files (TOML).
//!
//! ```toml
//! schema_version = 1
//! lambda = 0.1
//! sample_size = 4
//! statistic = "zhang"     # zhang | max | sum
//! limit = 48.87           # or log_limit = 3.889, or a [calibration] table
//! seed = 7                # seeds calibration when no limit is given
//!
//! [calibration]
//! arl0 = 500.0
//! reps = 2000
//!
//! [[streams]]
//! id = "f001"
//! kind = "nominal"        # nominal | ordinal
//! probs = [0.42, 0.58]    # ordinal streams take probs or cutpoints
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use catstream_core::calibration::{CalibrationOptions, DEFAULT_CAP, DEFAULT_TOL_REL};
use catstream_core::streams::StreamType;
use catstream_core::{ChartConfig, LatentFamily, RngSeed, Statistic, StreamDef, StreamSpec};
use serde::{Deserialize, Serialize};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamEntry {
    pub id: String,
    pub kind: StreamType,
    /// Optional cross-check on the number of levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutpoints: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<LatentFamily>,
}

impl StreamEntry {
    pub fn nominal(id: impl Into<String>, probs: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            kind: StreamType::Nominal,
            levels: Some(probs.len()),
            probs: Some(probs),
            cutpoints: None,
            latent: None,
        }
    }

    fn def(&self) -> StreamDef {
        StreamDef {
            kind: self.kind,
            probs: self.probs.clone(),
            cutpoints: self.cutpoints.clone(),
            latent: self.latent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub arl0: f64,
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_rel: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfigFile {
    pub schema_version: u32,
    pub lambda: f64,
    pub sample_size: u32,
    pub statistic: Statistic,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSection>,
    pub streams: Vec<StreamEntry>,
}

/// A parsed and validated configuration.
#[derive(Debug, Clone)]
pub struct MonitorSetup {
    pub file: MonitorConfigFile,
    pub ids: Vec<String>,
    pub specs: Vec<StreamSpec>,
    pub chart: ChartConfig,
}

impl MonitorConfigFile {
    pub fn parse(text: &str) -> Result<MonitorSetup> {
        let file: MonitorConfigFile = toml::from_str(text).context("invalid configuration")?;
        file.validate()
    }

    pub fn load(path: &Path) -> Result<MonitorSetup> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(self) -> Result<MonitorSetup> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            );
        }
        if self.streams.is_empty() {
            bail!("configuration defines no streams");
        }
        let mut chart = ChartConfig::new(self.lambda, self.sample_size, self.statistic)?;
        match (self.limit, self.log_limit) {
            (Some(_), Some(_)) => bail!("give either `limit` or `log_limit`, not both"),
            (Some(l), None) => {
                if l.is_nan() {
                    bail!("limit is NaN");
                }
                chart = chart.with_limit(l)
            }
            (None, Some(ll)) => {
                if ll.is_nan() {
                    bail!("log_limit is NaN");
                }
                chart = chart.with_limit(ll.exp())
            }
            (None, None) => {}
        }
        let mut ids = Vec::with_capacity(self.streams.len());
        let mut specs = Vec::with_capacity(self.streams.len());
        let mut seen = std::collections::HashSet::new();
        for (i, entry) in self.streams.iter().enumerate() {
            if !seen.insert(entry.id.as_str()) {
                bail!("duplicate stream id `{}`", entry.id);
            }
            let spec = entry
                .def()
                .build(i)
                .with_context(|| format!("stream `{}`", entry.id))?;
            if let Some(h) = entry.levels {
                if h != spec.levels() {
                    bail!(
                        "stream `{}` declares {h} levels but defines {}",
                        entry.id,
                        spec.levels()
                    );
                }
            }
            ids.push(entry.id.clone());
            specs.push(spec);
        }
        Ok(MonitorSetup {
            file: self,
            ids,
            specs,
            chart,
        })
    }

    /// Calibration options from the `[calibration]` table and `seed`.
    pub fn calibration_options(&self) -> Option<(f64, CalibrationOptions)> {
        let section = self.calibration?;
        let mut options =
            CalibrationOptions::new(section.reps, RngSeed::new(self.seed.unwrap_or(0), 0));
        options.cap = section.cap.unwrap_or(DEFAULT_CAP);
        options.tol_rel = section.tol_rel.unwrap_or(DEFAULT_TOL_REL);
        Some((section.arl0, options))
    }
}
