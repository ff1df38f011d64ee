//! One inter-spike interval drawn exactly vs a fine improved-Euler grid.

use fpt_exact::baselines::{improved_euler_fpt, GridScheme, Scheme};
use fpt_exact::neuron::{sample_interval, simulate_spike_train, transform_neuron, AdaptiveThresholdState, NeuronParams, SpikeOptions};
use fpt_exact::parallel::{map_streams, stream_rng};
use fpt_exact::stats::ks_two_sample;

const N: usize = 5000;

fn compare(current: f64, epsilon: f64) -> f64 {
    let p = NeuronParams { current, ..NeuronParams::default() };
    let s = AdaptiveThresholdState::initial(&p);
    let iv = transform_neuron(&p, &s, 0.0, 7.0, epsilon).unwrap();
    let g = GridScheme::new(1.0 / 4096.0, 7.0, Scheme::ImprovedEuler).unwrap();
    let exact: Vec<f64> = map_streams(N, 11, 0, |_, r| sample_interval(&p, &iv, r))
        .unwrap()
        .iter()
        .map(|d| d.time)
        .collect();
    let grid: Vec<f64> = map_streams(N, 12, 0, |_, r| Ok(improved_euler_fpt(&iv.problem.sde, &iv.problem.threshold, &g, r)))
        .unwrap()
        .iter()
        .filter(|d| d.finite)
        .map(|d| d.time)
        .collect();
    ks_two_sample(&exact, &grid).unwrap().p_value
}

#[test]
fn strong_input_interval_matches_fine_grid() {
    let p = compare(10.0, 1.0 / 16.0);
    assert!(p > 1e-3, "p = {p}");
}

// With weak input the passage takes longer and the stopping gap of the
// curvy proposal matters; a small gap restores agreement.
#[test]
fn weak_input_interval_matches_with_small_gap() {
    let p = compare(2.0, 1.0 / 256.0);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn spike_trains_do_not_depend_on_worker_count() {
    let p = NeuronParams { current: 10.0, ..NeuronParams::default() };
    let opts = SpikeOptions::default();
    let run = |workers| {
        map_streams(8, 5, workers, |i, r| simulate_spike_train(&p, 2.0, i as u64, &opts, r)).unwrap()
    };
    assert_eq!(run(1), run(8));
    let mut r = stream_rng(5, 3);
    assert_eq!(simulate_spike_train(&p, 2.0, 3, &opts, &mut r).unwrap(), run(1)[3]);
}
