//! The compiled engine against the reference per-stream chart.

use catstream_core::local::SampleCounts;
use catstream_core::{
    Chart, ChartConfig, Engine, LatentFamily, OrdinalSpec, RngSeed, ShiftSpec, Statistic,
    StreamSpec,
};

fn mixed_population() -> (Vec<StreamSpec>, Vec<ShiftSpec>) {
    let mut specs = Vec::new();
    let mut shifts = Vec::new();
    let ordinal = OrdinalSpec::from_cutpoints(vec![-1.0, 0.2, 0.8], LatentFamily::Normal).unwrap();
    let logistic = OrdinalSpec::from_probs(vec![0.1, 0.6, 0.3], LatentFamily::Logistic).unwrap();
    for i in 0..60 {
        let (spec, shift) = match i % 5 {
            0 => (
                StreamSpec::nominal(i, vec![0.5, 0.5]).unwrap(),
                if i < 20 {
                    ShiftSpec::Nominal {
                        xi: vec![0.05, -0.05],
                    }
                } else {
                    ShiftSpec::NoShift
                },
            ),
            1 => (
                StreamSpec::nominal(i, vec![0.3, 0.4, 0.3]).unwrap(),
                ShiftSpec::NoShift,
            ),
            2 => (
                StreamSpec::nominal(i, vec![0.2, 0.3, 0.1, 0.4]).unwrap(),
                ShiftSpec::NoShift,
            ),
            3 => (
                StreamSpec::ordinal(i, ordinal.clone()),
                if i < 30 {
                    ShiftSpec::Ordinal { delta: 0.2 }
                } else {
                    ShiftSpec::NoShift
                },
            ),
            _ => (StreamSpec::ordinal(i, logistic.clone()), ShiftSpec::NoShift),
        };
        specs.push(spec);
        shifts.push(shift);
    }
    (specs, shifts)
}

fn assert_close(a: f64, b: f64, k: usize) {
    let tol = 1e-9 * a.abs().max(b.abs()).max(1.0);
    assert!(
        (a - b).abs() <= tol,
        "sample {k}: engine {a} vs reference {b}"
    );
}

#[test]
fn engine_matches_reference_chart_for_every_statistic() {
    let (specs, shifts) = mixed_population();
    for statistic in Statistic::ALL {
        let config = ChartConfig::new(0.1, 40, statistic).unwrap();
        let engine = Engine::new(&specs, &shifts, &config).unwrap();
        let mut run = engine.start(RngSeed::new(17, 3));
        let mut chart = Chart::new(specs.clone(), config).unwrap();
        let mut counts = Vec::new();
        for k in 1..=300 {
            let fast = engine.step_recording(&mut run, &mut counts);
            let samples: Vec<SampleCounts> =
                counts.iter().map(|c| SampleCounts(c.clone())).collect();
            let point = chart.step(&samples, false).unwrap();
            assert_eq!(point.k, k as u64);
            assert_close(fast, point.value, k);
        }
    }
}

#[test]
fn recorded_counts_have_the_right_shape() {
    let (specs, shifts) = mixed_population();
    let config = ChartConfig::new(0.2, 25, Statistic::Sum).unwrap();
    let engine = Engine::new(&specs, &shifts, &config).unwrap();
    let mut run = engine.start(RngSeed::new(1, 1));
    let mut counts = Vec::new();
    engine.step_recording(&mut run, &mut counts);
    assert_eq!(counts.len(), specs.len());
    for (c, s) in counts.iter().zip(&specs) {
        assert_eq!(c.len(), s.levels());
        assert_eq!(c.iter().sum::<u32>(), 25);
    }
    assert_eq!(run.samples_taken(), 1);
}

#[test]
fn shifted_streams_move_their_level_frequencies() {
    let specs = vec![StreamSpec::nominal(0, vec![0.5, 0.5]).unwrap(); 2];
    let shifts = vec![
        ShiftSpec::NoShift,
        ShiftSpec::Nominal {
            xi: vec![0.1, -0.1],
        },
    ];
    let config = ChartConfig::new(0.1, 100, Statistic::Max).unwrap();
    let engine = Engine::new(&specs, &shifts, &config).unwrap();
    let mut run = engine.start(RngSeed::new(5, 0));
    let mut counts = Vec::new();
    let mut first = [0u64; 2];
    let steps = 2000;
    for _ in 0..steps {
        engine.step_recording(&mut run, &mut counts);
        first[0] += counts[0][0] as u64;
        first[1] += counts[1][0] as u64;
    }
    let total = (steps * 100) as f64;
    // Binomial SE of a frequency over 200k trials is about 0.0011.
    assert!((first[0] as f64 / total - 0.5).abs() < 0.005);
    assert!((first[1] as f64 / total - 0.6).abs() < 0.005);
}
