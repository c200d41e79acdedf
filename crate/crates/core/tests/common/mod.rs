//! Independent brute-force references shared by the test targets.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use symwise_core::modem::{Constellation, LabelMap, SymbolPrior, LLR_CLIP};
use symwise_core::shaping::AmplitudeDistribution;

pub fn shaped_setup() -> (Constellation, SymbolPrior) {
    let map = LabelMap::new(6).unwrap();
    let dist = AmplitudeDistribution::from_weights(&[0.5764, 0.3148, 0.0926, 0.0162]).unwrap();
    (
        Constellation::new(map, &dist).unwrap(),
        SymbolPrior::shaped(&map, &dist).unwrap(),
    )
}

pub fn uniform_setup() -> (Constellation, SymbolPrior) {
    let map = LabelMap::new(6).unwrap();
    (Constellation::uniform(map), SymbolPrior::uniform(&map))
}

pub fn bit(label: usize, j: usize, m: usize) -> usize {
    (label >> (m - 1 - j)) & 1
}

/// `ln Σ exp(v)` over a list, naive max-shifted.
pub fn log_sum(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn clipped_ratio(zero: &[f64], one: &[f64]) -> f64 {
    (log_sum(zero) - log_sum(one)).clamp(-LLR_CLIP, LLR_CLIP)
}

pub fn awgn_oracle(y: Complex64, n0: f64, cons: &Constellation, prior: &SymbolPrior) -> Vec<f64> {
    let probs = prior.probs();
    (0..6)
        .map(|j| {
            let mut zero = Vec::new();
            let mut one = Vec::new();
            for (label, x) in cons.points().iter().enumerate() {
                let v = probs[label].ln() - (y - x).norm_sqr() / n0;
                if bit(label, j, 6) == 0 {
                    zero.push(v);
                } else {
                    one.push(v);
                }
            }
            clipped_ratio(&zero, &one)
        })
        .collect()
}

pub fn mimo_oracle(
    y: [Complex64; 2],
    h: [[Complex64; 2]; 2],
    n0: f64,
    cons: &Constellation,
    prior: &SymbolPrior,
) -> Vec<f64> {
    let probs = prior.probs();
    let pts = cons.points();
    let mut metric = Vec::with_capacity(4096);
    for a in 0..64 {
        for b in 0..64 {
            let r0 = y[0] - h[0][0] * pts[a] - h[0][1] * pts[b];
            let r1 = y[1] - h[1][0] * pts[a] - h[1][1] * pts[b];
            metric.push(probs[a].ln() + probs[b].ln() - (r0.norm_sqr() + r1.norm_sqr()) / n0);
        }
    }
    let mut out = Vec::with_capacity(12);
    for antenna in 0..2 {
        for j in 0..6 {
            let mut zero = Vec::new();
            let mut one = Vec::new();
            for a in 0..64 {
                for b in 0..64 {
                    let label = if antenna == 0 { a } else { b };
                    if bit(label, j, 6) == 0 {
                        zero.push(metric[a * 64 + b]);
                    } else {
                        one.push(metric[a * 64 + b]);
                    }
                }
            }
            out.push(clipped_ratio(&zero, &one));
        }
    }
    out
}

pub fn cgauss(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
    // Box-Muller, independent of the crate's sampler
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    let r = (-var * u1.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * std::f64::consts::PI * u2)
}
