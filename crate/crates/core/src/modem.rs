//! Gray-labeled square QAM built from two shaped ASK components.
//!
//! A label is `m` bits: two sign bits (in-phase, quadrature) followed by
//! `(m - 2) / 2` amplitude bits for the in-phase component and the same number
//! for the quadrature component. Labels are stored MSB-first, so label bit 1
//! is bit `m - 1` of the integer label.
//!
//! Soft outputs are natural-log LLRs `log P(b = 0 | y) / P(b = 1 | y)`,
//! computed exactly with log-sum-exp and clipped at [`LLR_CLIP`].

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::shaping::AmplitudeDistribution;

/// Magnitude limit for every LLR produced or consumed by the link.
pub const LLR_CLIP: f64 = 30.0;

/// Modem errors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModemError {
    #[error("bits per symbol must be even and at least 2, got {0}")]
    InvalidOrder(usize),
    #[error("amplitude {0} is not in the ASK alphabet")]
    InvalidAmplitude(u32),
    #[error("label length {got} is not a multiple of {m}")]
    LabelLength { got: usize, m: usize },
    #[error("distribution has {got} amplitudes, constellation needs {expected}")]
    DistributionSize { got: usize, expected: usize },
}

#[inline]
pub(crate) fn clip_llr(x: f64) -> f64 {
    x.clamp(-LLR_CLIP, LLR_CLIP)
}

/// Bit labeling of an M²-QAM constellation with sign/amplitude partitioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelMap {
    m: usize,
}

impl LabelMap {
    pub fn new(bits_per_symbol: usize) -> Result<Self, ModemError> {
        if bits_per_symbol < 2 || !bits_per_symbol.is_multiple_of(2) || bits_per_symbol > 16 {
            return Err(ModemError::InvalidOrder(bits_per_symbol));
        }
        Ok(Self { m: bits_per_symbol })
    }

    /// Bits per QAM symbol.
    pub fn bits_per_symbol(&self) -> usize {
        self.m
    }

    /// Amplitude bits per real dimension.
    pub fn amp_bits_per_dim(&self) -> usize {
        (self.m - 2) / 2
    }

    /// Amplitude bits per QAM symbol, `m - 2`.
    pub fn amp_bits(&self) -> usize {
        self.m - 2
    }

    /// ASK order `M` of each real dimension.
    pub fn ask_order(&self) -> usize {
        1 << (self.m / 2)
    }

    /// Number of amplitude levels `M / 2`.
    pub fn num_amplitudes(&self) -> usize {
        1 << self.amp_bits_per_dim()
    }

    /// Gray label of the amplitude with index `idx` (amplitude `2 idx + 1`).
    #[inline]
    pub fn gray(&self, idx: usize) -> usize {
        idx ^ (idx >> 1)
    }

    /// Amplitude index whose Gray label is `g`.
    #[inline]
    pub fn gray_inverse(&self, g: usize) -> usize {
        let mut idx = g;
        let mut shift = g >> 1;
        while shift != 0 {
            idx ^= shift;
            shift >>= 1;
        }
        idx
    }

    /// Amplitude bits (MSB first) of a single ASK amplitude.
    pub fn amplitude_bits(&self, amplitude: u32) -> Result<Vec<u8>, ModemError> {
        let idx = amplitude_index(amplitude, self.num_amplitudes())?;
        let g = self.gray(idx);
        let w = self.amp_bits_per_dim();
        Ok((0..w).map(|b| ((g >> (w - 1 - b)) & 1) as u8).collect())
    }

    /// Decomposes an integer label into `(sign_i, sign_q, amp_idx_i, amp_idx_q)`.
    #[inline]
    pub fn split(&self, label: usize) -> (u8, u8, usize, usize) {
        let w = self.amp_bits_per_dim();
        let mask = (1 << w) - 1;
        let sign_i = ((label >> (self.m - 1)) & 1) as u8;
        let sign_q = ((label >> (self.m - 2)) & 1) as u8;
        let g_i = (label >> w) & mask;
        let g_q = label & mask;
        (sign_i, sign_q, self.gray_inverse(g_i), self.gray_inverse(g_q))
    }

    /// Inverse of [`LabelMap::split`].
    #[inline]
    pub fn join(&self, sign_i: u8, sign_q: u8, amp_i: usize, amp_q: usize) -> usize {
        let w = self.amp_bits_per_dim();
        ((sign_i as usize) << (self.m - 1))
            | ((sign_q as usize) << (self.m - 2))
            | (self.gray(amp_i) << w)
            | self.gray(amp_q)
    }

    /// Packs `m` bits (MSB first) into an integer label.
    #[inline]
    pub fn pack(&self, bits: &[u8]) -> usize {
        bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
    }

    /// Bit `j` (0-based, MSB first) of an integer label.
    #[inline]
    pub fn bit(&self, label: usize, j: usize) -> u8 {
        ((label >> (self.m - 1 - j)) & 1) as u8
    }
}

pub(crate) fn amplitude_index(amplitude: u32, num_amplitudes: usize) -> Result<usize, ModemError> {
    if amplitude.is_multiple_of(2) || (amplitude as usize) >= 2 * num_amplitudes {
        return Err(ModemError::InvalidAmplitude(amplitude));
    }
    Ok((amplitude as usize - 1) / 2)
}

/// Per-label log prior `log P_X(x)`.
///
/// Signs are uniform; the two amplitudes are independent draws from the
/// amplitude distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPrior {
    log_probs: Vec<f64>,
}

impl SymbolPrior {
    pub fn uniform(map: &LabelMap) -> Self {
        let size = 1usize << map.bits_per_symbol();
        Self {
            log_probs: vec![-(size as f64).ln(); size],
        }
    }

    pub fn shaped(map: &LabelMap, dist: &AmplitudeDistribution) -> Result<Self, ModemError> {
        check_dist(map, dist)?;
        let p = dist.probs();
        let log_probs = (0..1usize << map.bits_per_symbol())
            .map(|label| {
                let (_, _, ai, aq) = map.split(label);
                (0.25 * p[ai] * p[aq]).ln()
            })
            .collect();
        Ok(Self { log_probs })
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_probs.iter().map(|l| l.exp()).collect()
    }
}

fn check_dist(map: &LabelMap, dist: &AmplitudeDistribution) -> Result<(), ModemError> {
    if dist.len() != map.num_amplitudes() {
        return Err(ModemError::DistributionSize {
            got: dist.len(),
            expected: map.num_amplitudes(),
        });
    }
    Ok(())
}

/// Constellation points indexed by integer label, normalized to unit
/// average energy under the distribution it was built for.
#[derive(Debug, Clone)]
pub struct Constellation {
    map: LabelMap,
    points: Vec<Complex64>,
    energy_scale: f64,
}

impl Constellation {
    /// Builds the constellation and scales it so that `E|x|² = 1` when the
    /// amplitudes follow `dist`.
    pub fn new(map: LabelMap, dist: &AmplitudeDistribution) -> Result<Self, ModemError> {
        check_dist(&map, dist)?;
        let energy_scale = 1.0 / (2.0 * dist.second_moment()).sqrt();
        let points = (0..1usize << map.bits_per_symbol())
            .map(|label| {
                let (si, sq, ai, aq) = map.split(label);
                let re = if si == 0 { 1.0 } else { -1.0 } * (2 * ai + 1) as f64;
                let im = if sq == 0 { 1.0 } else { -1.0 } * (2 * aq + 1) as f64;
                Complex64::new(re, im) * energy_scale
            })
            .collect();
        Ok(Self {
            map,
            points,
            energy_scale,
        })
    }

    pub fn uniform(map: LabelMap) -> Self {
        let dist =
            AmplitudeDistribution::uniform(map.ask_order() as u32).expect("label map always yields a valid ASK order");
        Self::new(map, &dist).expect("sizes agree by construction")
    }

    pub fn label_map(&self) -> &LabelMap {
        &self.map
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    /// Maps a flat bit sequence, `m` bits per symbol, to constellation points.
    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex64>, ModemError> {
        let m = self.map.bits_per_symbol();
        if !bits.len().is_multiple_of(m) {
            return Err(ModemError::LabelLength { got: bits.len(), m });
        }
        Ok(bits
            .chunks_exact(m)
            .map(|label| self.points[self.map.pack(label)])
            .collect())
    }

    /// Nearest-point label.
    pub fn hard_demap(&self, y: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (label, x) in self.points.iter().enumerate() {
            let d = (y - x).norm_sqr();
            if d < best_d {
                best_d = d;
                best = label;
            }
        }
        best
    }
}

/// Exact bitwise MAP LLRs for one received AWGN sample.
///
/// `noise_var` is the total complex noise variance `N0`.
pub fn demap_awgn(y: Complex64, noise_var: f64, cons: &Constellation, prior: &SymbolPrior) -> Vec<f64> {
    let mut out = vec![0.0; cons.map.bits_per_symbol()];
    demap_awgn_into(y, noise_var, cons, prior, &mut out);
    out
}

pub fn demap_awgn_into(y: Complex64, noise_var: f64, cons: &Constellation, prior: &SymbolPrior, out: &mut [f64]) {
    let m = cons.map.bits_per_symbol();
    let inv_n0 = 1.0 / noise_var;
    let metric = |label: usize| prior.log_probs[label] - (y - cons.points[label]).norm_sqr() * inv_n0;
    let max = (0..cons.points.len()).map(metric).fold(f64::NEG_INFINITY, f64::max);
    let mut zero = [0.0f64; 16];
    let mut one = [0.0f64; 16];
    for label in 0..cons.points.len() {
        let w = (metric(label) - max).exp();
        for j in 0..m {
            if (label >> (m - 1 - j)) & 1 == 0 {
                zero[j] += w;
            } else {
                one[j] += w;
            }
        }
    }
    for j in 0..m {
        out[j] = log_ratio(zero[j], one[j]);
    }
}

#[inline]
fn log_ratio(zero: f64, one: f64) -> f64 {
    if one == 0.0 {
        LLR_CLIP
    } else if zero == 0.0 {
        -LLR_CLIP
    } else {
        clip_llr(zero.ln() - one.ln())
    }
}

/// Exact bitwise LLRs for a 2×2 spatially multiplexed channel use,
/// marginalizing over every transmit hypothesis.
///
/// Output holds the `m` bits of antenna 1 followed by the `m` bits of
/// antenna 2.
pub fn demap_mimo_ml(
    y: [Complex64; 2],
    h: [[Complex64; 2]; 2],
    noise_var: f64,
    cons: &Constellation,
    prior: &SymbolPrior,
) -> Vec<f64> {
    let mut scratch = MimoScratch::default();
    let mut out = vec![0.0; 2 * cons.map.bits_per_symbol()];
    demap_mimo_ml_into(y, h, noise_var, cons, prior, &mut scratch, &mut out);
    out
}

/// Reusable buffers for [`demap_mimo_ml_into`].
#[derive(Debug, Default, Clone)]
pub struct MimoScratch {
    first: Vec<[Complex64; 2]>,
    second: Vec<[Complex64; 2]>,
    metric: Vec<f64>,
    row_sum: Vec<f64>,
    col_sum: Vec<f64>,
}

// Terms this far below the maximum metric are below f64 resolution of the sums.
const NEGLIGIBLE_METRIC: f64 = -60.0;

pub fn demap_mimo_ml_into(
    y: [Complex64; 2],
    h: [[Complex64; 2]; 2],
    noise_var: f64,
    cons: &Constellation,
    prior: &SymbolPrior,
    scratch: &mut MimoScratch,
    out: &mut [f64],
) {
    let m = cons.map.bits_per_symbol();
    let size = cons.points.len();
    let inv_n0 = 1.0 / noise_var;
    let s = scratch;
    s.first.clear();
    s.second.clear();
    for x in &cons.points {
        s.first.push([h[0][0] * x, h[1][0] * x]);
        s.second.push([h[0][1] * x, h[1][1] * x]);
    }
    s.metric.resize(size * size, 0.0);
    let lp = &prior.log_probs;
    let mut max = f64::NEG_INFINITY;
    for a in 0..size {
        let r0 = y[0] - s.first[a][0];
        let r1 = y[1] - s.first[a][1];
        let base = lp[a];
        let row = &mut s.metric[a * size..(a + 1) * size];
        for (b, slot) in row.iter_mut().enumerate() {
            let d = (r0 - s.second[b][0]).norm_sqr() + (r1 - s.second[b][1]).norm_sqr();
            let v = base + lp[b] - d * inv_n0;
            *slot = v;
            if v > max {
                max = v;
            }
        }
    }
    s.row_sum.clear();
    s.row_sum.resize(size, 0.0);
    s.col_sum.clear();
    s.col_sum.resize(size, 0.0);
    for a in 0..size {
        let row = &s.metric[a * size..(a + 1) * size];
        let mut acc = 0.0;
        for (b, v) in row.iter().enumerate() {
            let rel = v - max;
            if rel > NEGLIGIBLE_METRIC {
                let w = rel.exp();
                acc += w;
                s.col_sum[b] += w;
            }
        }
        s.row_sum[a] = acc;
    }
    for j in 0..m {
        let shift = m - 1 - j;
        let (mut z0, mut o0, mut z1, mut o1) = (0.0, 0.0, 0.0, 0.0);
        for label in 0..size {
            if (label >> shift) & 1 == 0 {
                z0 += s.row_sum[label];
                z1 += s.col_sum[label];
            } else {
                o0 += s.row_sum[label];
                o1 += s.col_sum[label];
            }
        }
        out[j] = log_ratio(z0, o0);
        out[m + j] = log_ratio(z1, o1);
    }
}

/// One point of a mutual-information reference curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiPoint {
    pub snr_db: f64,
    /// Monte Carlo estimate of `I(X; Y)` in bits per complex symbol.
    pub mi: f64,
    /// `log2(1 + SNR)`.
    pub gaussian_limit: f64,
}

/// Monte Carlo estimate of `I(X;Y)` over AWGN for inputs drawn from `prior`.
pub fn estimate_mi<R: Rng + ?Sized>(
    cons: &Constellation,
    prior: &SymbolPrior,
    snr_grid: &[f64],
    n_samples: usize,
    rng: &mut R,
) -> Vec<MiPoint> {
    let probs = prior.probs();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let lp = prior.log_probs();
    snr_grid
        .iter()
        .map(|&snr_db| {
            let snr = 10f64.powf(snr_db / 10.0);
            let n0 = 1.0 / snr;
            let sigma = (n0 / 2.0).sqrt();
            let mut total = 0.0;
            for _ in 0..n_samples {
                let u: f64 = rng.random::<f64>() * acc;
                let label = cdf.partition_point(|&c| c <= u).min(probs.len() - 1);
                let nr: f64 = rng.sample(StandardNormal);
                let ni: f64 = rng.sample(StandardNormal);
                let w = Complex64::new(nr * sigma, ni * sigma);
                let x = cons.points[label];
                let y = x + w;
                // log p(y|x) - log p(y), the Gaussian normalization cancels.
                let own = -w.norm_sqr() / n0;
                let term = |i: usize| lp[i] - (y - cons.points[i]).norm_sqr() / n0;
                let max = (0..cons.points.len()).map(term).fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = (0..cons.points.len()).map(|i| (term(i) - max).exp()).sum();
                total += own - (max + sum.ln());
            }
            MiPoint {
                snr_db,
                mi: total / n_samples as f64 / std::f64::consts::LN_2,
                gaussian_limit: (1.0 + snr).log2(),
            }
        })
        .collect()
}

/// Draws an integer label from the symbol prior.
pub fn sample_label<R: Rng + ?Sized>(prior: &SymbolPrior, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, lp) in prior.log_probs.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    prior.log_probs.len() - 1
}

/// Circularly symmetric complex Gaussian with total variance `var`.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let sigma = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * sigma, im * sigma)
}
