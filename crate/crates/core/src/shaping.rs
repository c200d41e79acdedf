//! Amplitude shaping.
//!
//! Maxwell-Boltzmann amplitude distributions, composition quantization, an
//! exact constant composition distribution matcher (CCDM) and the PS
//! encoder/decoder that turns `k` data bits into `k_c` LDPC information bits.
//!
//! The CCDM is arithmetic coding carried out with exact big-integer interval
//! arithmetic. The `k'` input bits are read as an integer `v` and select the
//! point `v / 2^k'` of the unit interval. The unit interval is partitioned
//! into `N` equal cells, one per sequence of the fixed composition in
//! lexicographic amplitude order, and the output is the sequence whose cell
//! contains the point. Since `N >= 2^k'` the map is injective.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::modem::{amplitude_index, LabelMap, ModemError};

/// Shaping errors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapingError {
    #[error("ASK order must be a power of two >= 2, got {0}")]
    InvalidOrder(u32),
    #[error("invalid amplitude distribution: {0}")]
    InvalidDistribution(String),
    #[error("target entropy {target} is outside (0, {max}]")]
    EntropyOutOfRange { target: f64, max: f64 },
    #[error("invalid composition: {0}")]
    InvalidComposition(String),
    #[error("{len} input bits exceed the matcher capacity of {capacity} bits")]
    InputTooLong { len: usize, capacity: usize },
    #[error("amplitude sequence does not have the matcher composition")]
    CompositionMismatch,
    #[error("amplitude sequence is not the image of any input")]
    OutsideCodeImage,
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("inconsistent shaping parameters: {0}")]
    InconsistentParams(String),
    #[error(transparent)]
    Modem(#[from] ModemError),
}

/// Probability vector over the ASK amplitudes `{1, 3, ..., M - 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeDistribution {
    probs: Vec<f64>,
    nu: Option<f64>,
}

impl AmplitudeDistribution {
    /// Normalizes nonnegative weights into a distribution. The number of
    /// weights must be `M / 2` for a power-of-two `M`.
    pub fn from_weights(weights: &[f64]) -> Result<Self, ShapingError> {
        if weights.is_empty() || !weights.len().is_power_of_two() {
            return Err(ShapingError::InvalidDistribution(format!(
                "{} amplitudes is not half a power-of-two ASK order",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ShapingError::InvalidDistribution(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(ShapingError::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
            nu: None,
        })
    }

    pub fn uniform(ask_order: u32) -> Result<Self, ShapingError> {
        mb_distribution(0.0, ask_order)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `{1, 3, ..., M - 1}`.
    pub fn amplitudes(&self) -> Vec<u32> {
        (0..self.probs.len() as u32).map(|i| 2 * i + 1).collect()
    }

    pub fn ask_order(&self) -> u32 {
        2 * self.probs.len() as u32
    }

    /// Maxwell-Boltzmann parameter, when the distribution was built from it.
    pub fn nu(&self) -> Option<f64> {
        self.nu
    }

    /// Entropy in bits per amplitude.
    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.probs)
    }

    /// `E[A²]`.
    pub fn second_moment(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| p * ((2 * i + 1) as f64).powi(2))
            .sum()
    }
}

fn entropy_bits(probs: &[f64]) -> f64 {
    probs.iter().filter(|p| **p > 0.0).map(|p| -p * p.log2()).sum()
}

/// `P(a) ∝ exp(-nu a²)` over the amplitudes of `M`-ASK.
pub fn mb_distribution(nu: f64, ask_order: u32) -> Result<AmplitudeDistribution, ShapingError> {
    if ask_order < 2 || !ask_order.is_power_of_two() {
        return Err(ShapingError::InvalidOrder(ask_order));
    }
    if !nu.is_finite() || nu < 0.0 {
        return Err(ShapingError::InvalidDistribution(format!("nu = {nu} must be >= 0")));
    }
    // Shift the exponent by the smallest energy so large nu cannot underflow
    // the dominant term.
    let weights: Vec<f64> = (0..ask_order / 2)
        .map(|i| {
            let a = (2 * i + 1) as f64;
            (-nu * (a * a - 1.0)).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(AmplitudeDistribution {
        probs: weights.iter().map(|w| w / total).collect(),
        nu: Some(nu),
    })
}

const NU_BRACKET: (f64, f64) = (0.0, 20.0);
const ENTROPY_TOL: f64 = 1e-9;

/// Finds the Maxwell-Boltzmann parameter whose entropy is `target_bits` by
/// bisection. Entropy strictly decreases in `nu`.
pub fn fit_nu_for_entropy(target_bits: f64, ask_order: u32) -> Result<f64, ShapingError> {
    if ask_order < 2 || !ask_order.is_power_of_two() {
        return Err(ShapingError::InvalidOrder(ask_order));
    }
    let max = ((ask_order / 2) as f64).log2();
    if !(target_bits > 0.0 && target_bits <= max + 1e-15) {
        return Err(ShapingError::EntropyOutOfRange {
            target: target_bits,
            max,
        });
    }
    let entropy = |nu: f64| -> f64 { mb_distribution(nu, ask_order).map(|d| d.entropy_bits()).unwrap_or(0.0) };
    if (entropy(0.0) - target_bits).abs() < ENTROPY_TOL {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = NU_BRACKET;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let h = entropy(mid);
        if (h - target_bits).abs() < ENTROPY_TOL {
            return Ok(mid);
        }
        if h > target_bits {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Fixed amplitude counts of every CCDM output sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Composition {
    counts: Vec<u32>,
}

impl Composition {
    pub fn new(counts: Vec<u32>) -> Result<Self, ShapingError> {
        if counts.is_empty() {
            return Err(ShapingError::InvalidComposition("no amplitudes".into()));
        }
        if counts.iter().map(|&c| c as u64).sum::<u64>() == 0 {
            return Err(ShapingError::InvalidComposition("zero-length sequence".into()));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Sequence length `n_d`.
    pub fn len(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Empirical distribution `counts / n_d`.
    pub fn distribution(&self) -> AmplitudeDistribution {
        let n = self.len() as f64;
        AmplitudeDistribution {
            probs: self.counts.iter().map(|&c| c as f64 / n).collect(),
            nu: None,
        }
    }

    /// Number of distinct sequences, `n_d! / prod(counts!)`.
    pub fn num_sequences(&self) -> BigUint {
        let mut total = BigUint::one();
        let mut placed = 0u32;
        for &c in &self.counts {
            for i in 1..=c {
                placed += 1;
                total = total * placed / i;
            }
        }
        total
    }
}

/// Rounds `n_d · probs` and repairs the sum one count at a time, always
/// touching the entry with the largest rounding error.
pub fn quantize_composition(dist: &AmplitudeDistribution, n_d: usize) -> Result<Composition, ShapingError> {
    if n_d == 0 {
        return Err(ShapingError::InvalidComposition("n_d must be positive".into()));
    }
    let target: Vec<f64> = dist.probs().iter().map(|p| p * n_d as f64).collect();
    let mut counts: Vec<i64> = target.iter().map(|t| t.round() as i64).collect();
    loop {
        let sum: i64 = counts.iter().sum();
        if sum == n_d as i64 {
            break;
        }
        if sum < n_d as i64 {
            let i = argmax(counts.iter().zip(&target).map(|(&c, t)| t - c as f64));
            counts[i] += 1;
        } else {
            let i = argmax(
                counts
                    .iter()
                    .zip(&target)
                    .map(|(&c, t)| if c > 0 { c as f64 - t } else { f64::NEG_INFINITY }),
            );
            counts[i] -= 1;
        }
    }
    Composition::new(counts.into_iter().map(|c| c as u32).collect())
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// `floor(log2(n_d! / prod(counts!)))`, the largest input length the
/// matcher can invert.
pub fn ccdm_max_input_length(comp: &Composition) -> usize {
    (comp.num_sequences().bits() - 1) as usize
}

/// Exact arithmetic-coding constant composition distribution matcher.
#[derive(Debug, Clone)]
pub struct Ccdm {
    composition: Composition,
    input_bits: usize,
    num_sequences: BigUint,
}

impl Ccdm {
    pub fn new(composition: Composition, input_bits: usize) -> Result<Self, ShapingError> {
        let capacity = ccdm_max_input_length(&composition);
        if input_bits > capacity {
            return Err(ShapingError::InputTooLong {
                len: input_bits,
                capacity,
            });
        }
        Ok(Self {
            num_sequences: composition.num_sequences(),
            composition,
            input_bits,
        })
    }

    pub fn composition(&self) -> &Composition {
        &self.composition
    }

    pub fn input_bits(&self) -> usize {
        self.input_bits
    }

    pub fn output_len(&self) -> usize {
        self.composition.len()
    }

    /// Maps `input_bits` bits to amplitude indices with the fixed composition.
    pub fn encode_indices(&self, bits: &[u8]) -> Result<Vec<usize>, ShapingError> {
        if bits.len() != self.input_bits {
            return Err(ShapingError::LengthMismatch {
                expected: self.input_bits,
                got: bits.len(),
            });
        }
        let v = bits_to_biguint(bits);
        // index of the cell containing v / 2^k
        let mut rank = (v * &self.num_sequences) >> self.input_bits;

        let mut remaining = self.composition.counts.clone();
        let mut left = self.composition.len() as u32;
        let mut cell = self.num_sequences.clone();
        let mut out = Vec::with_capacity(left as usize);
        while left > 0 {
            let mut chosen = None;
            for (a, c) in remaining.iter().enumerate() {
                if *c == 0 {
                    continue;
                }
                let sub = &cell * *c / left;
                if rank < sub {
                    cell = sub;
                    chosen = Some(a);
                    break;
                }
                rank -= sub;
            }
            let a = chosen.expect("rank is always below the current cell size");
            remaining[a] -= 1;
            left -= 1;
            out.push(a);
        }
        Ok(out)
    }

    /// Inverse of [`Ccdm::encode_indices`].
    pub fn decode_indices(&self, indices: &[usize]) -> Result<Vec<u8>, ShapingError> {
        let mut remaining = self.composition.counts.clone();
        if indices.len() != self.composition.len() {
            return Err(ShapingError::CompositionMismatch);
        }
        let mut left = self.composition.len() as u32;
        let mut cell = self.num_sequences.clone();
        let mut rank = BigUint::zero();
        for &a in indices {
            if a >= remaining.len() || remaining[a] == 0 {
                return Err(ShapingError::CompositionMismatch);
            }
            for c in remaining.iter().take(a) {
                if *c > 0 {
                    rank += &cell * *c / left;
                }
            }
            cell = &cell * remaining[a] / left;
            remaining[a] -= 1;
            left -= 1;
        }
        // smallest v with floor(v N / 2^k) = rank
        let scaled = rank.clone() << self.input_bits;
        let mut v = &scaled / &self.num_sequences;
        if &v * &self.num_sequences != scaled {
            v += 1u32;
        }
        if v.bits() as usize > self.input_bits || (&v * &self.num_sequences) >> self.input_bits != rank {
            return Err(ShapingError::OutsideCodeImage);
        }
        Ok(biguint_to_bits(&v, self.input_bits))
    }

    /// Encodes to amplitude values `{1, 3, ...}`.
    pub fn encode(&self, bits: &[u8]) -> Result<Vec<u32>, ShapingError> {
        Ok(self
            .encode_indices(bits)?
            .into_iter()
            .map(|a| 2 * a as u32 + 1)
            .collect())
    }

    pub fn decode(&self, amplitudes: &[u32]) -> Result<Vec<u8>, ShapingError> {
        let n = self.composition.counts.len();
        let indices = amplitudes
            .iter()
            .map(|&a| amplitude_index(a, n).map_err(|_| ShapingError::CompositionMismatch))
            .collect::<Result<Vec<_>, _>>()?;
        self.decode_indices(&indices)
    }
}

/// One-shot CCDM encode; the input length sets `k'`.
pub fn ccdm_encode(bits: &[u8], comp: &Composition) -> Result<Vec<u32>, ShapingError> {
    Ccdm::new(comp.clone(), bits.len())?.encode(bits)
}

/// One-shot CCDM decode for input length `k_prime`.
pub fn ccdm_decode(amplitudes: &[u32], comp: &Composition, k_prime: usize) -> Result<Vec<u8>, ShapingError> {
    Ccdm::new(comp.clone(), k_prime)?.decode(amplitudes)
}

fn bits_to_biguint(bits: &[u8]) -> BigUint {
    if bits.is_empty() {
        return BigUint::zero();
    }
    let pad = (8 - bits.len() % 8) % 8;
    let mut bytes = vec![0u8; (bits.len() + pad) / 8];
    for (i, &b) in bits.iter().enumerate() {
        let pos = i + pad;
        bytes[pos / 8] |= (b & 1) << (7 - pos % 8);
    }
    BigUint::from_bytes_be(&bytes)
}

fn biguint_to_bits(v: &BigUint, len: usize) -> Vec<u8> {
    (0..len).map(|i| v.bit((len - 1 - i) as u64) as u8).collect()
}

/// `β`: amplitude bits of an (in-phase, quadrature) amplitude pair.
pub fn beta_map(pair: (u32, u32), map: &LabelMap) -> Result<Vec<u8>, ShapingError> {
    let mut bits = map.amplitude_bits(pair.0)?;
    bits.extend(map.amplitude_bits(pair.1)?);
    Ok(bits)
}

/// Inverse of [`beta_map`].
pub fn beta_unmap(bits: &[u8], map: &LabelMap) -> Result<(u32, u32), ShapingError> {
    let w = map.amp_bits_per_dim();
    if bits.len() != 2 * w {
        return Err(ShapingError::LengthMismatch {
            expected: 2 * w,
            got: bits.len(),
        });
    }
    let gi = map.pack(&bits[..w]);
    let gq = map.pack(&bits[w..]);
    Ok((2 * map.gray_inverse(gi) as u32 + 1, 2 * map.gray_inverse(gq) as u32 + 1))
}

/// Block geometry of the shaped codeword.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsCodeParams {
    /// Data bits per block.
    pub k: usize,
    /// Bits consumed by the distribution matcher.
    pub k_prime: usize,
    /// Amplitude symbols produced by the matcher.
    pub n_d: usize,
    /// Amplitude bits, `n_d (m - 2) / 2`.
    pub k_a: usize,
    /// Sign bits: the unshaped data bits, the filler bits and the parity.
    pub k_s: usize,
    /// LDPC information length.
    pub k_c: usize,
    /// LDPC codeword length.
    pub n_c: usize,
    /// Known zero bits appended after the unshaped data bits.
    pub n_filler: usize,
    /// Bits per QAM symbol.
    pub m: usize,
}

impl PsCodeParams {
    /// Derives the geometry for an `n_c`-bit codeword carrying `k_c`
    /// information bits on `2^m`-QAM.
    pub fn new(k: usize, k_prime: usize, m: usize, n_c: usize, k_c: usize) -> Result<Self, ShapingError> {
        let bad = |msg: String| Err(ShapingError::InconsistentParams(msg));
        if m < 4 || !m.is_multiple_of(2) {
            return bad(format!("m = {m} must be even and >= 4 for shaping"));
        }
        if !n_c.is_multiple_of(m) {
            return bad(format!("n_c = {n_c} is not a multiple of m = {m}"));
        }
        if k_prime > k {
            return bad(format!("k' = {k_prime} exceeds k = {k}"));
        }
        let n = n_c / m;
        let n_d = 2 * n;
        let k_a = n_d * (m - 2) / 2;
        let k_s = n_c - k_a;
        if k_c < k_a + (k - k_prime) {
            return bad(format!(
                "k_c = {k_c} cannot hold {k_a} amplitude bits and {} unshaped bits",
                k - k_prime
            ));
        }
        if k_c > n_c {
            return bad(format!("k_c = {k_c} exceeds n_c = {n_c}"));
        }
        let params = Self {
            k,
            k_prime,
            n_d,
            k_a,
            k_s,
            k_c,
            n_c,
            n_filler: k_c - k_a - (k - k_prime),
            m,
        };
        params.check()?;
        Ok(params)
    }

    /// Symbols per codeword, `n_c / m`.
    pub fn symbols(&self) -> usize {
        self.n_c / self.m
    }

    /// Codeword positions `[start, end)` of the known filler bits.
    pub fn filler_range(&self) -> std::ops::Range<usize> {
        let start = self.k_a + self.k - self.k_prime;
        start..start + self.n_filler
    }

    /// Checks every geometry identity.
    pub fn check(&self) -> Result<(), ShapingError> {
        let m = self.m;
        let ok = self.k_a * 2 == self.n_d * (m - 2)
            && self.k_a * m == self.n_c * (m - 2)
            && self.k_a * 2 == self.k_s * (m - 2)
            && self.k_c == self.k_a + (self.k - self.k_prime) + self.n_filler
            && self.k_a + self.k_s == self.n_c;
        if ok {
            Ok(())
        } else {
            Err(ShapingError::InconsistentParams(format!("{self:?}")))
        }
    }

    /// Checks the geometry against a matcher composition.
    pub fn check_composition(&self, comp: &Composition) -> Result<(), ShapingError> {
        self.check()?;
        if comp.len() != self.n_d {
            return Err(ShapingError::InconsistentParams(format!(
                "composition length {} != n_d = {}",
                comp.len(),
                self.n_d
            )));
        }
        if comp.counts().len() != 1 << ((self.m - 2) / 2) {
            return Err(ShapingError::InconsistentParams(format!(
                "composition has {} amplitudes, expected {}",
                comp.counts().len(),
                1 << ((self.m - 2) / 2)
            )));
        }
        let capacity = ccdm_max_input_length(comp);
        if self.k_prime > capacity {
            return Err(ShapingError::InputTooLong {
                len: self.k_prime,
                capacity,
            });
        }
        Ok(())
    }
}

/// PS encoder/decoder for one parameter set.
#[derive(Debug, Clone)]
pub struct PsEncoder {
    params: PsCodeParams,
    map: LabelMap,
    ccdm: Ccdm,
}

impl PsEncoder {
    pub fn new(params: PsCodeParams, composition: Composition) -> Result<Self, ShapingError> {
        params.check_composition(&composition)?;
        Ok(Self {
            map: LabelMap::new(params.m)?,
            ccdm: Ccdm::new(composition, params.k_prime)?,
            params,
        })
    }

    pub fn params(&self) -> &PsCodeParams {
        &self.params
    }

    pub fn composition(&self) -> &Composition {
        self.ccdm.composition()
    }

    /// `u = β(A_1 A_2) ... β(A_{n_d-1} A_{n_d}) b_{k'+1} ... b_k 0 ... 0`.
    pub fn encode(&self, data: &[u8]) -> Result<Vec<u8>, ShapingError> {
        let p = &self.params;
        if data.len() != p.k {
            return Err(ShapingError::LengthMismatch {
                expected: p.k,
                got: data.len(),
            });
        }
        let amps = self.ccdm.encode_indices(&data[..p.k_prime])?;
        let w = self.map.amp_bits_per_dim();
        let mut u = Vec::with_capacity(p.k_c);
        for idx in amps {
            let g = self.map.gray(idx);
            u.extend((0..w).map(|b| ((g >> (w - 1 - b)) & 1) as u8));
        }
        u.extend_from_slice(&data[p.k_prime..]);
        u.resize(p.k_c, 0);
        Ok(u)
    }

    /// Recovers the data bits; fails when the amplitude bits no longer carry
    /// the matcher composition.
    pub fn decode(&self, u_hat: &[u8]) -> Result<Vec<u8>, ShapingError> {
        let p = &self.params;
        if u_hat.len() != p.k_c {
            return Err(ShapingError::LengthMismatch {
                expected: p.k_c,
                got: u_hat.len(),
            });
        }
        let w = self.map.amp_bits_per_dim();
        let amps: Vec<usize> = u_hat[..p.k_a]
            .chunks_exact(w)
            .map(|g| self.map.gray_inverse(self.map.pack(g)))
            .collect();
        let mut data = self.ccdm.decode_indices(&amps)?;
        data.extend_from_slice(&u_hat[p.k_a..p.k_a + p.k - p.k_prime]);
        Ok(data)
    }
}

pub fn ps_encode(data: &[u8], params: &PsCodeParams, comp: &Composition) -> Result<Vec<u8>, ShapingError> {
    PsEncoder::new(*params, comp.clone())?.encode(data)
}

pub fn ps_decode(u_hat: &[u8], params: &PsCodeParams, comp: &Composition) -> Result<Vec<u8>, ShapingError> {
    PsEncoder::new(*params, comp.clone())?.decode(u_hat)
}
