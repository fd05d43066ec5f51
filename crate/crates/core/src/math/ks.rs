/// One-sample Kolmogorov–Smirnov test against `U(0, 1)`.
///
/// Returns `(D, p-value)`; the p-value uses the asymptotic Kolmogorov
/// distribution with Stephens' finite-sample correction.
pub fn ks_uniform(sample: &[f64]) -> (f64, f64) {
    let n = sample.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let u = u.clamp(0.0, 1.0);
            ((i as f64 + 1.0) / nf - u).max(u - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let root = nf.sqrt();
    (d, kolmogorov_sf((root + 0.12 + 0.11 / root) * d))
}

/// Survival function of the Kolmogorov distribution,
/// `2 Σ_{k≥1} (-1)^{k-1} exp(-2 k² t²)`.
pub fn kolmogorov_sf(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += sign * term;
        if term < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
