//! Finite-difference gradient verification harness.
//!
//! A graph builder is run twice per trial: once on a recording tape in f64
//! to collect analytic gradients, then repeatedly with single components
//! nudged by ±h to form central-difference estimates. Both routes share
//! nothing numerically: the analytic side exercises the tape's backward
//! rules, the numeric side only ever calls forward evaluation.

#![allow(dead_code)]

use super::oracles::{grads_agree, SplitMix64};
use dylo::tensor::{Tape, Tensor};

pub const FD_STEP: f64 = 1e-4;
pub const REL_TOL: f64 = 1e-4;

/// Builds a scalar loss tensor from the given parameter tensors.
pub type LossBuilder = dyn Fn(&mut Tape<f64>, &[Tensor<f64>]) -> Tensor<f64>;

/// Check analytic against central-difference gradients for every component
/// of every parameter. Panics with a description of the first mismatch.
pub fn check_gradients(name: &str, params: &[(Vec<f64>, Vec<usize>)], build: &LossBuilder) {
    // Analytic pass.
    let tensors: Vec<Tensor<f64>> = params
        .iter()
        .map(|(data, shape)| Tensor::param(data.clone(), shape).unwrap())
        .collect();
    let mut tape = Tape::new();
    let loss = build(&mut tape, &tensors);
    assert_eq!(loss.numel(), 1, "{name}: loss must be scalar");
    tape.backward(&loss).unwrap();
    let analytic: Vec<Vec<f64>> = tensors
        .iter()
        .map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();

    // Numeric pass: forward-only evaluation with nudged inputs.
    let eval = |probe: &[(Vec<f64>, Vec<usize>)]| -> f64 {
        let ts: Vec<Tensor<f64>> = probe
            .iter()
            .map(|(data, shape)| Tensor::new(data.clone(), shape).unwrap())
            .collect();
        let mut tape = Tape::inference();
        build(&mut tape, &ts).item()
    };

    let mut work: Vec<(Vec<f64>, Vec<usize>)> = params.to_vec();
    for (pi, (data, _)) in params.iter().enumerate() {
        for ci in 0..data.len() {
            let orig = work[pi].0[ci];
            work[pi].0[ci] = orig + FD_STEP;
            let up = eval(&work);
            work[pi].0[ci] = orig - FD_STEP;
            let down = eval(&work);
            work[pi].0[ci] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[pi][ci];
            assert!(
                grads_agree(a, numeric, REL_TOL),
                "{name}: grad mismatch at param {pi} component {ci}: \
                 analytic {a:.10e} vs numeric {numeric:.10e}"
            );
        }
    }
}

/// Uniform random buffer in [lo, hi).
pub fn rand_buf(rng: &mut SplitMix64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(lo, hi)).collect()
}

/// Uniform random buffer avoiding a band of half-width `margin` around
/// each value in `kinks` (keeps finite differences off non-smooth points).
pub fn rand_buf_avoiding(
    rng: &mut SplitMix64,
    n: usize,
    lo: f64,
    hi: f64,
    kinks: &[f64],
    margin: f64,
) -> Vec<f64> {
    (0..n)
        .map(|_| loop {
            let v = rng.uniform(lo, hi);
            if kinks.iter().all(|&k| (v - k).abs() > margin) {
                break v;
            }
        })
        .collect()
}

/// Reduce an op output to a scalar through a fixed random weighting, so
/// every output element influences the loss with a distinct coefficient.
pub fn weighted_sum(
    tape: &mut Tape<f64>,
    y: &Tensor<f64>,
    weights: &[f64],
) -> Tensor<f64> {
    let w = Tensor::new(weights.to_vec(), &y.shape()).unwrap();
    let prod = tape.mul(y, &w).unwrap();
    tape.sum(&prod).unwrap()
}
