//! Synthetic stand-in for a semiconductor inspection dataset.
//!
//! Each row is one inspected unit with a few hundred continuous sensor
//! readings: a mix of symmetric, skewed and coarsely quantised features,
//! some constant columns and scattered missing values. Failing units
//! ("1") have the latent mean of a subset of features moved by a fixed
//! number of standard deviations; passing units are labelled "-1".
//!
//! Phase I is a large historical sample of both groups. Each Phase-II
//! run is a fresh sequence of passing units followed by failing ones, so
//! the chart should signal shortly after the first failing sample.

use std::path::{Path, PathBuf};

use anyhow::Result;
use catstream_core::RngSeed;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::discretize::ContinuousData;

pub const CONFORMING_LABEL: &str = "-1";
pub const NONCONFORMING_LABEL: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq)]
enum FeatureKind {
    Gaussian,
    LogNormal,
    Quantised,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Feature {
    kind: FeatureKind,
    mean: f64,
    sd: f64,
    /// Latent mean shift of failing units, in standard deviations.
    shift: f64,
}

impl Feature {
    fn draw<R: Rng>(&self, rng: &mut R, failing: bool) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let z = if failing { z + self.shift } else { z };
        match self.kind {
            FeatureKind::Gaussian => self.mean + self.sd * z,
            FeatureKind::LogNormal => self.mean * (0.6 * z).exp(),
            FeatureKind::Quantised => self.mean + self.sd * 0.5 * (2.0 * z).round(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudyFixture {
    pub informative: usize,
    pub constant: usize,
    pub phase1_conforming: usize,
    pub phase1_nonconforming: usize,
    pub phase2_conforming: usize,
    pub phase2_nonconforming: usize,
    pub shifted: usize,
    pub shift_sd: f64,
    pub missing_rate: f64,
    pub seed: u64,
}

impl Default for CaseStudyFixture {
    fn default() -> Self {
        Self {
            informative: 461,
            constant: 30,
            phase1_conforming: 1463,
            phase1_nonconforming: 104,
            phase2_conforming: 80,
            phase2_nonconforming: 104,
            shifted: 150,
            shift_sd: 1.0,
            missing_rate: 0.03,
            seed: 20_080_719,
        }
    }
}

/// Column layout: `None` for a constant column, else an informative feature.
type Layout = Vec<Option<Feature>>;

impl CaseStudyFixture {
    fn layout(&self) -> Layout {
        let mut rng = RngSeed::new(self.seed, 0).child(1).rng();
        let total = self.informative + self.constant;
        let mut layout: Layout = Vec::with_capacity(total);
        // Shift every third feature first (all kinds stay represented among
        // the rest), then the others in order if more are requested.
        let mut order: Vec<usize> = (0..self.informative).filter(|i| i % 3 == 0).collect();
        order.extend((0..self.informative).filter(|i| i % 3 != 0));
        let mut shifted = vec![false; self.informative];
        for &i in order.iter().take(self.shifted) {
            shifted[i] = true;
        }
        let mut informative = 0;
        for col in 0..total {
            // Spread the constant columns evenly through the file.
            let constant_due = (col + 1) * self.constant / total > (col * self.constant) / total;
            if constant_due {
                layout.push(None);
                continue;
            }
            let kind = match informative % 3 {
                0 => FeatureKind::Gaussian,
                1 => FeatureKind::LogNormal,
                _ => FeatureKind::Quantised,
            };
            let sign = if informative % 2 == 0 { 1.0 } else { -1.0 };
            layout.push(Some(Feature {
                kind,
                mean: rng.random_range(1.0..100.0),
                sd: rng.random_range(0.1..10.0),
                shift: if shifted[informative] {
                    sign * self.shift_sd
                } else {
                    0.0
                },
            }));
            informative += 1;
        }
        layout
    }

    fn names(&self) -> Vec<String> {
        (1..=self.informative + self.constant)
            .map(|j| format!("s{j:03}"))
            .collect()
    }

    fn rows(
        &self,
        layout: &Layout,
        seed: RngSeed,
        conforming: usize,
        nonconforming: usize,
    ) -> ContinuousData {
        let mut rng = seed.rng();
        let mut rows = Vec::with_capacity(conforming + nonconforming);
        for t in 0..conforming + nonconforming {
            let failing = t >= conforming;
            let row = layout
                .iter()
                .enumerate()
                .map(|(j, f)| match f {
                    None => Some(j as f64 * 0.5),
                    Some(feature) => {
                        let v = feature.draw(&mut rng, failing);
                        (rng.random::<f64>() >= self.missing_rate).then_some(v)
                    }
                })
                .collect();
            rows.push(row);
        }
        ContinuousData {
            names: self.names(),
            rows,
        }
    }

    fn labels(conforming: usize, nonconforming: usize) -> Vec<String> {
        std::iter::repeat_n(CONFORMING_LABEL.to_string(), conforming)
            .chain(std::iter::repeat_n(
                NONCONFORMING_LABEL.to_string(),
                nonconforming,
            ))
            .collect()
    }

    /// Historical data and labels.
    pub fn phase1(&self) -> (ContinuousData, Vec<String>) {
        let layout = self.layout();
        let data = self.rows(
            &layout,
            RngSeed::new(self.seed, 0).child(2),
            self.phase1_conforming,
            self.phase1_nonconforming,
        );
        (
            data,
            Self::labels(self.phase1_conforming, self.phase1_nonconforming),
        )
    }

    /// Monitoring data of run `run`: passing units, then failing ones.
    pub fn phase2(&self, run: u64) -> (ContinuousData, Vec<String>) {
        let layout = self.layout();
        let data = self.rows(
            &layout,
            RngSeed::new(self.seed, 0).child(3).with_stream(run),
            self.phase2_conforming,
            self.phase2_nonconforming,
        );
        (
            data,
            Self::labels(self.phase2_conforming, self.phase2_nonconforming),
        )
    }

    /// First sample (1-based) containing a failing unit at sample size `n`.
    pub fn change_point(&self, n: usize) -> usize {
        self.phase2_conforming / n + 1
    }

    /// Writes `phase1_data.csv`/`phase1_labels.txt` and, for each run,
    /// `phase2_<run>_data.csv`/`phase2_<run>_labels.txt`.
    pub fn write(&self, dir: &Path, runs: u64) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let mut emit =
            |stem: String, (data, labels): (ContinuousData, Vec<String>)| -> Result<()> {
                let data_path = dir.join(format!("{stem}_data.csv"));
                let labels_path = dir.join(format!("{stem}_labels.txt"));
                data.write(std::io::BufWriter::new(std::fs::File::create(&data_path)?))?;
                std::fs::write(&labels_path, labels.join("\n") + "\n")?;
                files.push(data_path);
                files.push(labels_path);
                Ok(())
            };
        emit("phase1".into(), self.phase1())?;
        for run in 0..runs {
            emit(format!("phase2_{run}"), self.phase2(run))?;
        }
        Ok(files)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::estimate_thresholds;

    #[test]
    fn default_fixture_has_the_expected_shape() {
        let f = CaseStudyFixture::default();
        let layout = f.layout();
        assert_eq!(layout.len(), 491);
        assert_eq!(layout.iter().filter(|c| c.is_none()).count(), 30);
        let shifted = layout.iter().flatten().filter(|c| c.shift != 0.0).count();
        assert_eq!(shifted, 150);
        assert_eq!(f.change_point(4), 21);
        let (data, labels) = f.phase1();
        assert_eq!(data.rows.len(), 1567);
        assert_eq!(
            labels.iter().filter(|l| *l == NONCONFORMING_LABEL).count(),
            104
        );
        let th = estimate_thresholds(&data, &labels, CONFORMING_LABEL).unwrap();
        assert_eq!(th.kept().count(), 461);
    }

    #[test]
    fn runs_are_reproducible_and_distinct() {
        let f = CaseStudyFixture::default();
        assert_eq!(f.phase2(3), f.phase2(3));
        assert_ne!(f.phase2(3).0, f.phase2(4).0);
        assert_eq!(f.phase2(0).0.rows.len(), 184);
    }

    #[test]
    fn extra_shifted_features_spill_into_other_kinds() {
        let f = CaseStudyFixture {
            informative: 30,
            constant: 0,
            shifted: 20,
            ..Default::default()
        };
        let shifted = f
            .layout()
            .iter()
            .flatten()
            .filter(|c| c.shift != 0.0)
            .count();
        assert_eq!(shifted, 20);
    }
}
