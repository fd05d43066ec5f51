//! Number formatting shared by every machine-readable output.

/// Natural log emitted in place of `ln 0`.
pub const LN_ZERO_SENTINEL: f64 = -708.3964185322641;

/// Scientific notation with 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// `ln x` for chart output, with [`LN_ZERO_SENTINEL`] for `x <= 0`.
pub fn ln_or_sentinel(x: f64) -> f64 {
    if x > 0.0 {
        x.ln().max(LN_ZERO_SENTINEL)
    } else {
        LN_ZERO_SENTINEL
    }
}

/// Three significant digits, as in published ARL tables (136, 41.4, 6.44).
pub fn fmt_sig3(x: f64) -> String {
    if !x.is_finite() {
        return fmt_f64(x);
    }
    if x == 0.0 {
        return "0.00".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (2 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// `value (se)` with the standard error to two decimals, or to two
/// significant digits when two decimals would print as zero.
pub fn fmt_with_se(value: f64, se: f64) -> String {
    let mut s = format!("{se:.2}");
    if se > 0.0 && se < 0.005 {
        let d = (1 - se.log10().floor() as i32).max(0) as usize;
        s = format!("{se:.d$}");
    }
    format!("{} ({s})", fmt_sig3(value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_precision_round_trips() {
        for x in [
            0.1,
            1.0 / 3.0,
            6.02214076e23,
            -2.5e-300,
            370.0,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17);
        }
        assert_eq!(
            fmt_f64(f64::INFINITY).parse::<f64>().unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn log_sentinel() {
        assert_eq!(ln_or_sentinel(0.0), LN_ZERO_SENTINEL);
        assert_eq!(ln_or_sentinel(1.0), 0.0);
        assert_eq!(LN_ZERO_SENTINEL, f64::MIN_POSITIVE.ln());
        assert!(ln_or_sentinel(1e-320) >= LN_ZERO_SENTINEL);
    }

    #[test]
    fn table_style() {
        assert_eq!(fmt_sig3(136.2), "136");
        assert_eq!(fmt_sig3(41.44), "41.4");
        assert_eq!(fmt_sig3(6.444), "6.44");
        assert_eq!(fmt_sig3(1234.0), "1234");
        assert_eq!(fmt_with_se(6.444, 0.0141), "6.44 (0.01)");
        assert_eq!(fmt_with_se(136.2, 1.214), "136 (1.21)");
        assert_eq!(fmt_with_se(2.0, 0.0012), "2.00 (0.0012)");
    }
}
