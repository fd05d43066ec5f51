//! Categorical observation files.
//!
//! Comma-separated text. Lines starting with `#` are comments. The first
//! remaining line names the streams and must match the configuration's
//! stream ids in order; every later line is one observation time, holding
//! the 1-based attribute level of each stream.

use std::io::{BufRead, Write};

use anyhow::{bail, Context, Result};
use catstream_core::{SampleCounts, StreamSpec};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observations {
    pub ids: Vec<String>,
    /// `rows[t][i]`: level of stream `i` at time `t`, 1-based.
    pub rows: Vec<Vec<u16>>,
}

impl Observations {
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let ids: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        if ids.is_empty() || ids.iter().all(String::is_empty) {
            bail!("observation file has no header");
        }
        let mut rows = Vec::new();
        for (t, record) in csv.records().enumerate() {
            let record = record.with_context(|| format!("observation row {}", t + 1))?;
            let row = record
                .iter()
                .enumerate()
                .map(|(i, field)| {
                    field.parse::<u16>().map_err(|_| {
                        anyhow::anyhow!(
                            "row {}, stream `{}`: `{field}` is not a level index",
                            t + 1,
                            ids[i]
                        )
                    })
                })
                .collect::<Result<Vec<u16>>>()?;
            rows.push(row);
        }
        Ok(Self { ids, rows })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let file =
            std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read(std::io::BufReader::new(file)).with_context(|| format!("in {}", path.display()))
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# one row per observation time; values are 1-based attribute levels"
        )?;
        let mut csv = csv::Writer::from_writer(out);
        csv.write_record(&self.ids)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(|l| l.to_string()))?;
        }
        csv.flush()?;
        Ok(())
    }

    /// Checks ids and level ranges against the configured streams.
    pub fn check(&self, ids: &[String], specs: &[StreamSpec]) -> Result<()> {
        if self.ids.len() != ids.len() {
            bail!(
                "observation file has {} streams but the configuration has {}",
                self.ids.len(),
                ids.len()
            );
        }
        if let Some(i) = (0..ids.len()).find(|&i| self.ids[i] != ids[i]) {
            bail!(
                "observation column {} is `{}` but the configuration expects `{}`",
                i + 1,
                self.ids[i],
                ids[i]
            );
        }
        for (t, row) in self.rows.iter().enumerate() {
            for (i, (&level, spec)) in row.iter().zip(specs).enumerate() {
                if level == 0 || level as usize > spec.levels() {
                    bail!(
                        "row {}, stream `{}`: level {level} outside 1..={}",
                        t + 1,
                        ids[i],
                        spec.levels()
                    );
                }
            }
        }
        Ok(())
    }

    /// Level counts of each stream over rows `start..start + n`.
    pub fn sample_counts(&self, specs: &[StreamSpec], start: usize, n: usize) -> Vec<SampleCounts> {
        let mut counts: Vec<SampleCounts> = specs
            .iter()
            .map(|s| SampleCounts(vec![0; s.levels()]))
            .collect();
        for row in &self.rows[start..start + n] {
            for (c, &level) in counts.iter_mut().zip(row) {
                c.0[level as usize - 1] += 1;
            }
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_and_writes() {
        let text = "# comment\na,b\n1,2\n2,3\n";
        let obs = Observations::read(text.as_bytes()).unwrap();
        assert_eq!(obs.ids, vec!["a", "b"]);
        assert_eq!(obs.rows, vec![vec![1, 2], vec![2, 3]]);
        let mut out = Vec::new();
        obs.write(&mut out).unwrap();
        assert_eq!(Observations::read(&out[..]).unwrap(), obs);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(Observations::read("a,b\n1,x\n".as_bytes()).is_err());
        assert!(Observations::read("a,b\n1\n".as_bytes()).is_err());
        assert!(Observations::read("a,b\n1,-1\n".as_bytes()).is_err());
    }

    #[test]
    fn checks_against_specs() {
        let specs = vec![
            StreamSpec::nominal(0, vec![0.5, 0.5]).unwrap(),
            StreamSpec::nominal(1, vec![0.2, 0.3, 0.5]).unwrap(),
        ];
        let ids = vec!["a".to_string(), "b".to_string()];
        let ok = Observations::read("a,b\n1,3\n2,1\n".as_bytes()).unwrap();
        ok.check(&ids, &specs).unwrap();
        let counts = ok.sample_counts(&specs, 0, 2);
        assert_eq!(counts[0].0, vec![1, 1]);
        assert_eq!(counts[1].0, vec![1, 0, 1]);
        let high = Observations::read("a,b\n3,1\n".as_bytes()).unwrap();
        assert!(high.check(&ids, &specs).is_err());
        let zero = Observations::read("a,b\n0,1\n".as_bytes()).unwrap();
        assert!(zero.check(&ids, &specs).is_err());
        let renamed = Observations::read("a,c\n1,1\n".as_bytes()).unwrap();
        assert!(renamed.check(&ids, &specs).is_err());
        assert!(ok.check(&ids[..1], &specs[..1]).is_err());
    }
}
