//! Seedable random streams and multinomial count sampling.
//!
//! Replications never share a generator: each one is built from an
//! [`RngSeed`] whose `stream_index` is the replication number, so results
//! do not depend on how work is scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_distr::{Binomial, Distribution};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The generator used for all simulation work.
pub type ChartRng = Xoshiro256PlusPlus;

/// Tolerance on `Σ p = 1` for probability vectors.
pub const SUM_TOLERANCE: f64 = 1e-12;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    /// A new master seed for a labelled sub-task (a scenario, a
    /// confirmation run, ...). Stream index resets to 0.
    pub fn child(&self, label: u64) -> RngSeed {
        let mixed = splitmix64(splitmix64(self.seed ^ splitmix64(self.stream_index)) ^ label);
        RngSeed::new(mixed, 0)
    }

    /// Same master seed, different stream.
    pub fn with_stream(&self, stream_index: u64) -> RngSeed {
        RngSeed::new(self.seed, stream_index)
    }

    pub fn rng(&self) -> ChartRng {
        // (seed, stream_index) -> (s0, s1) is injective since splitmix64 is a bijection.
        let words = [
            splitmix64(self.seed),
            splitmix64(self.stream_index ^ 0x5851_F42D_4C95_7F2D),
            splitmix64(self.seed.wrapping_add(0x1405_7B7E_F767_814F)),
            splitmix64(self.stream_index.wrapping_add(0xD1B5_4A32_D192_ED03)),
        ];
        let mut bytes = [0u8; 32];
        for (chunk, w) in bytes.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChartRng::from_seed(bytes)
    }
}

/// Checks that `probs` is a probability vector with at least two levels.
pub fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.len() < 2 {
        return Err(Error::InvalidDistribution(format!(
            "need at least 2 levels, got {}",
            probs.len()
        )));
    }
    if let Some(bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidDistribution(format!(
            "probability {bad} outside [0, 1]"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}"
        )));
    }
    Ok(())
}

/// Draws one `Multinomial(n, probs)` count vector by sequential
/// conditional binomials.
pub fn multinomial_sample<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Result<Vec<u64>> {
    validate_probs(probs)?;
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass_left = 1.0;
    let last = probs.len() - 1;
    for (j, &p) in probs[..last].iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let q = if mass_left > 0.0 {
            (p / mass_left).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?
            .sample(rng);
        counts[j] = draw;
        remaining -= draw;
        mass_left -= p;
    }
    counts[last] += remaining;
    Ok(counts)
}

/// Walker/Vose alias table over `0..len`, drawing with a single `u64`.
#[derive(Debug, Clone)]
struct AliasTable {
    threshold: Vec<u64>,
    alias: Vec<u32>,
}

impl AliasTable {
    fn new(weights: &[f64]) -> Self {
        let k = weights.len();
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * k as f64 / total).collect();
        let mut alias: Vec<u32> = (0..k as u32).collect();
        let mut small: Vec<usize> = Vec::new();
        let mut large: Vec<usize> = Vec::new();
        for (i, &s) in scaled.iter().enumerate() {
            if s < 1.0 {
                small.push(i);
            } else {
                large.push(i);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are full columns up to rounding.
        for i in small.into_iter().chain(large) {
            scaled[i] = 1.0;
            alias[i] = i as u32;
        }
        let threshold = scaled
            .iter()
            .map(|&s| {
                if s >= 1.0 {
                    u64::MAX
                } else {
                    (s * 18_446_744_073_709_551_616.0) as u64
                }
            })
            .collect();
        Self { threshold, alias }
    }

    #[inline]
    fn sample(&self, bits: u64) -> usize {
        let wide = bits as u128 * self.threshold.len() as u128;
        let column = (wide >> 64) as usize;
        let frac = wide as u64;
        if frac < self.threshold[column] {
            column
        } else {
            self.alias[column] as usize
        }
    }
}

fn binomial_pmf(m: u64, q: f64) -> Vec<f64> {
    let mut pmf = vec![0.0; m as usize + 1];
    if q <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if q >= 1.0 {
        pmf[m as usize] = 1.0;
        return pmf;
    }
    let (lq, lr) = (q.ln(), (-q).ln_1p());
    let lg_m = libm::lgamma(m as f64 + 1.0);
    for (k, slot) in pmf.iter_mut().enumerate() {
        let kf = k as f64;
        let mk = m as f64 - kf;
        *slot = (lg_m - libm::lgamma(kf + 1.0) - libm::lgamma(mk + 1.0) + kf * lq + mk * lr).exp();
    }
    pmf
}

/// Precomputed sampler for repeated `Multinomial(n, probs)` draws with a
/// fixed `(n, probs)`.
///
/// Stage `j` of the sequential-binomial scheme needs
/// `Binomial(m, π_j / (1 - Σ_{l<j} π_l))` for every remaining count `m`;
/// each of those is tabulated once as an alias table so that a draw costs
/// `h - 1` random words and no transcendental calls.
#[derive(Debug, Clone)]
pub struct MultinomialTable {
    n: u32,
    levels: usize,
    /// `stages[j][m]` samples level `j`'s count given `m` trials remain.
    stages: Vec<Vec<AliasTable>>,
}

impl MultinomialTable {
    /// Sample sizes above this use a direct binomial sampler instead.
    pub const MAX_TABULATED_N: u32 = 2000;

    pub fn new(n: u32, probs: &[f64]) -> Result<Self> {
        validate_probs(probs)?;
        if n > Self::MAX_TABULATED_N {
            return Err(Error::Domain(format!(
                "tabulated sampler supports n <= {}, got {n}",
                Self::MAX_TABULATED_N
            )));
        }
        let mut mass_left = 1.0;
        let mut stages = Vec::with_capacity(probs.len() - 1);
        for &p in &probs[..probs.len() - 1] {
            let q = if mass_left > 0.0 {
                (p / mass_left).clamp(0.0, 1.0)
            } else {
                1.0
            };
            stages.push(
                (0..=n as u64)
                    .map(|m| AliasTable::new(&binomial_pmf(m, q)))
                    .collect(),
            );
            mass_left -= p;
        }
        Ok(Self {
            n,
            levels: probs.len(),
            stages,
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn sample_size(&self) -> u32 {
        self.n
    }

    /// Writes one draw into `out` (length = number of levels).
    #[inline]
    pub fn sample_into<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [u32]) {
        debug_assert_eq!(out.len(), self.levels);
        let mut remaining = self.n;
        for (slot, stage) in out.iter_mut().zip(&self.stages) {
            let drawn = if remaining == 0 {
                0
            } else {
                stage[remaining as usize].sample(rng.next_u64()) as u32
            };
            *slot = drawn;
            remaining -= drawn;
        }
        out[self.levels - 1] = remaining;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_and_empty_draws() {
        let mut rng = RngSeed::new(1, 0).rng();
        assert_eq!(
            multinomial_sample(&mut rng, 5, &[1.0, 0.0]).unwrap(),
            vec![5, 0]
        );
        assert_eq!(
            multinomial_sample(&mut rng, 0, &[0.2, 0.8]).unwrap(),
            vec![0, 0]
        );
        assert_eq!(
            multinomial_sample(&mut rng, 7, &[0.0, 0.0, 1.0]).unwrap(),
            vec![0, 0, 7]
        );
    }

    #[test]
    fn rejects_malformed_probabilities() {
        let mut rng = RngSeed::new(1, 0).rng();
        assert!(multinomial_sample(&mut rng, 5, &[1.0]).is_err());
        assert!(multinomial_sample(&mut rng, 5, &[0.6, 0.6]).is_err());
        assert!(multinomial_sample(&mut rng, 5, &[-0.1, 1.1]).is_err());
        assert!(MultinomialTable::new(10, &[0.5, 0.4]).is_err());
    }

    #[test]
    fn mean_of_fair_binomial_component() {
        let mut rng = RngSeed::new(2024, 3).rng();
        let draws = 100_000;
        let total: u64 = (0..draws)
            .map(|_| multinomial_sample(&mut rng, 100, &[0.5, 0.5]).unwrap()[0])
            .sum();
        let mean = total as f64 / draws as f64;
        assert!((mean - 50.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn seeds_reproduce_and_differ() {
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = RngSeed::new(9, 4).rng();
                move |_| r.next_u64()
            })
            .collect();
        let b: Vec<u64> = (0..8)
            .map({
                let mut r = RngSeed::new(9, 4).rng();
                move |_| r.next_u64()
            })
            .collect();
        let c: Vec<u64> = (0..8)
            .map({
                let mut r = RngSeed::new(9, 5).rng();
                move |_| r.next_u64()
            })
            .collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RngSeed::new(9, 0).child(1), RngSeed::new(9, 0).child(2));
    }

    #[test]
    fn alias_table_matches_weights() {
        let weights = [0.1, 0.0, 0.6, 0.3];
        let table = AliasTable::new(&weights);
        let mut rng = RngSeed::new(77, 0).rng();
        let mut hits = [0usize; 4];
        let draws = 400_000;
        for _ in 0..draws {
            hits[table.sample(rng.next_u64())] += 1;
        }
        assert_eq!(hits[1], 0);
        for (h, w) in hits.iter().zip(weights) {
            let freq = *h as f64 / draws as f64;
            let se = (w * (1.0 - w) / draws as f64).sqrt();
            assert!((freq - w).abs() <= 5.0 * se + 1e-12, "{freq} vs {w}");
        }
    }

    #[test]
    fn tabulated_sampler_moments() {
        let probs = [0.2, 0.3, 0.1, 0.4];
        let table = MultinomialTable::new(100, &probs).unwrap();
        let mut rng = RngSeed::new(5, 0).rng();
        let draws = 200_000;
        let mut sums = [0f64; 4];
        let mut sq = [0f64; 4];
        let mut out = [0u32; 4];
        for _ in 0..draws {
            table.sample_into(&mut rng, &mut out);
            assert_eq!(out.iter().sum::<u32>(), 100);
            for j in 0..4 {
                sums[j] += out[j] as f64;
                sq[j] += (out[j] as f64).powi(2);
            }
        }
        for j in 0..4 {
            let mean = sums[j] / draws as f64;
            let var = sq[j] / draws as f64 - mean * mean;
            let expect_var = 100.0 * probs[j] * (1.0 - probs[j]);
            let se = (expect_var / draws as f64).sqrt();
            assert!(
                (mean - 100.0 * probs[j]).abs() < 5.0 * se,
                "level {j} mean {mean}"
            );
            assert!((var / expect_var - 1.0).abs() < 0.03, "level {j} var {var}");
        }
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        for (m, q) in [(0, 0.3), (1, 0.5), (100, 0.5), (100, 1e-9), (57, 0.999)] {
            let total: f64 = binomial_pmf(m, q).iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
