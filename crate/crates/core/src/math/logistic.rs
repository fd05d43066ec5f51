use super::check_probability;
use crate::error::Result;

#[inline]
pub fn logistic_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Standard logistic density `F(x)(1 - F(x))`. Returns 0 at ±∞.
#[inline]
pub fn logistic_pdf(x: f64) -> f64 {
    let f = logistic_cdf(x);
    f * (1.0 - f)
}

/// `ln(p / (1 - p))`, with `p = 0` and `p = 1` mapping to `∓∞`.
pub fn logistic_quantile(p: f64) -> Result<f64> {
    check_probability(p)?;
    if p == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if p == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok((p / (1.0 - p)).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(logistic_cdf(0.0), 0.5);
        assert_eq!(logistic_pdf(0.0), 0.25);
        assert!((logistic_quantile(0.9).unwrap() - 2.197_224_577_336_219).abs() < 1e-12);
        assert_eq!(logistic_pdf(f64::INFINITY), 0.0);
        assert_eq!(logistic_pdf(f64::NEG_INFINITY), 0.0);
        assert!(logistic_quantile(1.2).is_err());
    }

    #[test]
    fn round_trip() {
        for i in -300..=300 {
            let x = i as f64 / 20.0;
            assert!((logistic_quantile(logistic_cdf(x)).unwrap() - x).abs() < 1e-8);
            assert!((logistic_cdf(x) + logistic_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }
}
