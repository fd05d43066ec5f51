//! Populations shared by the benchmarks.

use catstream_core::{
    ChartConfig, Engine, LatentFamily, OrdinalSpec, ShiftSpec, Statistic, StreamSpec,
};

/// 400 binary, 300 three-level and 300 four-level nominal streams.
pub fn nominal_population() -> Vec<StreamSpec> {
    let mut specs = Vec::with_capacity(1000);
    for i in 0..1000 {
        let probs = match i {
            0..=399 => vec![0.5, 0.5],
            400..=699 => vec![0.3, 0.4, 0.3],
            _ => vec![0.2, 0.3, 0.1, 0.4],
        };
        specs.push(StreamSpec::nominal(i, probs).expect("valid probabilities"));
    }
    specs
}

/// 1000 four-level ordinal streams with a normal latent variable.
pub fn ordinal_population() -> Vec<StreamSpec> {
    let spec = OrdinalSpec::from_cutpoints(vec![-1.0, 0.2, 0.8], LatentFamily::Normal)
        .expect("valid cut points");
    (0..1000)
        .map(|i| StreamSpec::ordinal(i, spec.clone()))
        .collect()
}

pub fn in_control_engine(specs: &[StreamSpec], statistic: Statistic) -> Engine {
    let shifts = vec![ShiftSpec::NoShift; specs.len()];
    let config = ChartConfig::new(0.1, 100, statistic).expect("valid chart");
    Engine::new(specs, &shifts, &config).expect("valid population")
}
