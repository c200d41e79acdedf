//! The IR-HARQ loop for one data block and the rate/throughput bookkeeping.
//!
//! A block is shaped and encoded once, then sent in up to `t_max` slices of
//! the label sequence. After every slice the receiver rebuilds the codeword
//! soft input from everything received so far, decodes, and either
//! acknowledges or asks for the next slice. Feedback is ideal and success is
//! judged by comparing the recovered data with the source.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{self, StreamRole};
use crate::fec::{load_code, BpDecoder, CodeRate, LdpcCode, LdpcError, DEFAULT_BP_ITERATIONS};
use crate::modem::{
    demap_awgn_into, demap_mimo_ml_into, Constellation, LabelMap, MimoScratch, ModemError, SymbolPrior, LLR_CLIP,
};
use crate::puncture::{
    apriori_llr, assemble_labels, inverse_puncture, natural_labels, sequential_labels, AprioriTable, LabelSequence,
    PunctureError, PunctureSchedule, Scheme,
};
use crate::shaping::{AmplitudeDistribution, Composition, PsCodeParams, PsEncoder, ShapingError};

#[derive(Debug, Error)]
pub enum HarqError {
    #[error("no LDPC code with {0} information bits")]
    NoCode(usize),
    #[error("shaped schemes need code rate at least {min:.4}, got {rate:.4}")]
    RateTooLow { rate: f64, min: f64 },
    #[error("uniform scheme needs k = k_c, got k = {k}, k_c = {k_c}")]
    UniformRate { k: usize, k_c: usize },
    #[error("shaped scheme needs a composition and k'")]
    MissingShaping,
    #[error("uniform scheme does not take shaping parameters")]
    UnexpectedShaping,
    #[error("2×2 channel needs an even number of symbols per transmission, got {0}")]
    OddMimoTransmission(usize),
    #[error(transparent)]
    Shaping(#[from] ShapingError),
    #[error(transparent)]
    Puncture(#[from] PunctureError),
    #[error(transparent)]
    Ldpc(#[from] LdpcError),
    #[error(transparent)]
    Modem(#[from] ModemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Awgn,
    /// 2×2 spatial multiplexing, fresh i.i.d. Rayleigh matrix per use.
    Rayleigh2x2,
}

/// Distribution matcher settings of a shaped link.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingConfig {
    pub k_prime: usize,
    pub composition: Composition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarqConfig {
    pub scheme: Scheme,
    /// Data bits per block.
    pub k: usize,
    /// Bits per QAM symbol.
    pub m: usize,
    /// LDPC information length `k_c`.
    pub k_c: usize,
    pub shaping: Option<ShapingConfig>,
    pub schedule: Vec<usize>,
    pub channel: ChannelKind,
    pub bp_iterations: usize,
    /// Demap with the shaped symbol prior.
    pub demapper_priors: bool,
    /// Pin the known filler bits to certain zeros before decoding.
    pub known_filler: bool,
}

impl HarqConfig {
    /// Defaults for everything but the scheme, code and schedule.
    pub fn new(scheme: Scheme, k: usize, k_c: usize, shaping: Option<ShapingConfig>, schedule: Vec<usize>) -> Self {
        Self {
            scheme,
            k,
            m: 6,
            k_c,
            shaping,
            schedule,
            channel: ChannelKind::Awgn,
            bp_iterations: DEFAULT_BP_ITERATIONS,
            demapper_priors: true,
            known_filler: true,
        }
    }

    pub fn t_max(&self) -> usize {
        self.schedule.len()
    }
}

/// Per-transmission modulation: which constellation scaling and prior apply.
#[derive(Debug, Clone)]
struct TxModem {
    constellation: Constellation,
    prior: SymbolPrior,
    /// Whether the transmission carries the matcher's amplitudes.
    shaped: bool,
}

/// A validated link with everything that does not change between blocks.
#[derive(Debug, Clone)]
pub struct HarqLink {
    cfg: HarqConfig,
    code: LdpcCode,
    schedule: PunctureSchedule,
    ps: Option<PsEncoder>,
    apriori: AprioriTable,
    modems: Vec<TxModem>,
}

/// Decoder result after one transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TxDecode {
    pub converged: bool,
    pub iterations: usize,
    /// Recovered data equals the source.
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockOutcome {
    pub success: bool,
    /// Transmissions sent, `1 ..= t_max`.
    pub t_used: usize,
    pub decodes: Vec<TxDecode>,
    /// Amplitude counts of the symbols sent in each transmission, indexed by
    /// amplitude `0 => 1, 1 => 3, ...`.
    pub amplitude_counts: Vec<Vec<u64>>,
}

/// The three random streams of one block.
#[derive(Debug, Clone)]
pub struct BlockRngs {
    pub data: ChaCha8Rng,
    pub noise: ChaCha8Rng,
    pub fading: ChaCha8Rng,
}

impl BlockRngs {
    pub fn new(seed: u64, point: u64, block: u64) -> Self {
        Self {
            data: channel::stream_rng(seed, point, block, StreamRole::Data),
            noise: channel::stream_rng(seed, point, block, StreamRole::Noise),
            fading: channel::stream_rng(seed, point, block, StreamRole::Fading),
        }
    }
}

impl HarqLink {
    pub fn new(cfg: HarqConfig) -> Result<Self, HarqError> {
        let rate = CodeRate::for_info_bits(cfg.k_c).ok_or(HarqError::NoCode(cfg.k_c))?;
        let code = load_code(rate);
        let map = LabelMap::new(cfg.m)?;
        let n = code.n() / cfg.m;
        if n * cfg.m != code.n() {
            return Err(PunctureError::LengthMismatch {
                got: code.n(),
                n,
                m: cfg.m,
            }
            .into());
        }

        let (schedule, ps, dist) = match (cfg.scheme.is_shaped(), &cfg.shaping) {
            (true, None) => return Err(HarqError::MissingShaping),
            (false, Some(_)) => return Err(HarqError::UnexpectedShaping),
            (true, Some(sh)) => {
                let code_rate = cfg.k_c as f64 / code.n() as f64;
                let min = (cfg.m - 2) as f64 / cfg.m as f64;
                if code_rate < min {
                    return Err(HarqError::RateTooLow { rate: code_rate, min });
                }
                let params = PsCodeParams::new(cfg.k, sh.k_prime, cfg.m, code.n(), cfg.k_c)?;
                let sched = PunctureSchedule::shaped(cfg.schedule.clone(), n, cfg.k, sh.k_prime, cfg.m)?;
                let dist = sh.composition.distribution();
                let ps = PsEncoder::new(params, sh.composition.clone())?;
                (sched, Some(ps), dist)
            }
            (false, None) => {
                if cfg.k != cfg.k_c {
                    return Err(HarqError::UniformRate { k: cfg.k, k_c: cfg.k_c });
                }
                let dist = AmplitudeDistribution::uniform(map.ask_order() as u32)?;
                (PunctureSchedule::new(cfg.schedule.clone(), n)?, None, dist)
            }
        };
        if cfg.channel == ChannelKind::Rayleigh2x2 {
            if let Some(&odd) = schedule.symbols().iter().find(|&&s| s % 2 == 1) {
                return Err(HarqError::OddMimoTransmission(odd));
            }
        }

        let shaped_modem = TxModem {
            constellation: Constellation::new(map, &dist)?,
            prior: if cfg.demapper_priors {
                SymbolPrior::shaped(&map, &dist)?
            } else {
                SymbolPrior::uniform(&map)
            },
            shaped: cfg.scheme.is_shaped(),
        };
        let uniform_modem = TxModem {
            constellation: Constellation::uniform(map),
            prior: SymbolPrior::uniform(&map),
            shaped: false,
        };
        let apriori = if cfg.scheme.is_shaped() {
            apriori_llr(&dist, &map)
        } else {
            AprioriTable::zeros(&map)
        };

        let mut link = Self {
            cfg,
            code,
            schedule,
            ps,
            apriori,
            modems: Vec::new(),
        };
        // The label layout does not depend on the bits, so a probe codeword
        // tells which transmissions carry aligned matcher amplitudes.
        let probe = link.labels(&vec![0; link.code.n()])?;
        link.modems = (1..=link.schedule.t_max())
            .map(|t| {
                if link.cfg.scheme.is_shaped() && link.carries_amplitudes(&probe, t) {
                    shaped_modem.clone()
                } else {
                    uniform_modem.clone()
                }
            })
            .collect();
        Ok(link)
    }

    pub fn config(&self) -> &HarqConfig {
        &self.cfg
    }

    pub fn code(&self) -> &LdpcCode {
        &self.code
    }

    pub fn schedule(&self) -> &PunctureSchedule {
        &self.schedule
    }

    pub fn apriori(&self) -> &AprioriTable {
        &self.apriori
    }

    pub fn ps_encoder(&self) -> Option<&PsEncoder> {
        self.ps.as_ref()
    }

    /// Whether transmission `t` (1-based) uses the shaped constellation.
    pub fn is_shaped_transmission(&self, t: usize) -> bool {
        self.modems[t - 1].shaped
    }

    pub fn constellation(&self, t: usize) -> &Constellation {
        &self.modems[t - 1].constellation
    }

    fn labels(&self, c: &[u8]) -> Result<LabelSequence, PunctureError> {
        let m = self.cfg.m;
        match self.cfg.scheme {
            Scheme::Symbolwise => assemble_labels(c, (m - 2) * (c.len() / m), m),
            Scheme::Sequential => sequential_labels(c, &self.schedule, m),
            Scheme::Uniform => natural_labels(c, m),
        }
    }

    fn carries_amplitudes(&self, seq: &LabelSequence, t: usize) -> bool {
        let amp = self.cfg.m - 2;
        let k_a = amp * self.schedule.total();
        self.schedule.range(t).expect("t within schedule").all(|i| {
            let p = &seq.provenance(i)[2..];
            p[0].is_multiple_of(amp) && p[0] + amp <= k_a && p.windows(2).all(|w| w[1] == w[0] + 1)
        })
    }

    /// Draws the data bits, transmits and decodes until success or `t_max`.
    pub fn run_block(&self, snr_db: f64, rngs: &mut BlockRngs) -> Result<BlockOutcome, HarqError> {
        let data: Vec<u8> = (0..self.cfg.k).map(|_| rngs.data.random_range(0..2u8)).collect();
        self.run_block_with(&data, snr_db, rngs)
    }

    /// [`HarqLink::run_block`] with caller-supplied data bits.
    pub fn run_block_with(&self, data: &[u8], snr_db: f64, rngs: &mut BlockRngs) -> Result<BlockOutcome, HarqError> {
        let m = self.cfg.m;
        let u = match &self.ps {
            Some(ps) => ps.encode(data)?,
            None => data.to_vec(),
        };
        let c = self.code.encode(&u)?;
        let seq = self.labels(&c)?;
        let map = *self.modems[0].constellation.label_map();

        let mut decoder = BpDecoder::new(&self.code, self.cfg.bp_iterations);
        let mut scratch = MimoScratch::default();
        let mut received: Vec<Vec<f64>> = Vec::with_capacity(self.schedule.t_max());
        let mut outcome = BlockOutcome {
            success: false,
            t_used: 0,
            decodes: Vec::new(),
            amplitude_counts: Vec::new(),
        };

        for t in 1..=self.schedule.t_max() {
            let modem = &self.modems[t - 1];
            let range = self.schedule.range(t)?;
            let bits = seq.slice(range.clone());
            let mut counts = vec![0u64; map.num_amplitudes()];
            for label in bits.chunks(m) {
                let (_, _, ai, aq) = map.split(map.pack(label));
                counts[ai] += 1;
                counts[aq] += 1;
            }
            outcome.amplitude_counts.push(counts);

            let x = modem.constellation.modulate(bits)?;
            let mut llrs = vec![0.0; bits.len()];
            match self.cfg.channel {
                ChannelKind::Awgn => {
                    let (y, n0) = channel::awgn(&x, snr_db, &mut rngs.noise);
                    for (yi, out) in y.iter().zip(llrs.chunks_mut(m)) {
                        demap_awgn_into(*yi, n0, &modem.constellation, &modem.prior, out);
                    }
                }
                ChannelKind::Rayleigh2x2 => {
                    let pairs: Vec<[Complex64; 2]> = x.chunks(2).map(|p| [p[0], p[1]]).collect();
                    let (uses, n0) = channel::rayleigh_2x2(&pairs, snr_db, &mut rngs.fading, &mut rngs.noise);
                    for (u, out) in uses.iter().zip(llrs.chunks_mut(2 * m)) {
                        demap_mimo_ml_into(u.y, u.h, n0, &modem.constellation, &modem.prior, &mut scratch, out);
                    }
                }
            }
            received.push(llrs);

            let k_a = (m - 2) * self.schedule.total();
            let (mut soft, _) = inverse_puncture(&received, &seq, &self.schedule, &self.apriori, k_a)?;
            if let (Some(ps), true) = (&self.ps, self.cfg.known_filler) {
                for p in ps.params().filler_range() {
                    soft.llrs[p] = LLR_CLIP;
                }
            }
            let dec = decoder.decode(&soft);
            let u_hat = &dec.bits[..self.cfg.k_c];
            let correct = match &self.ps {
                Some(ps) => ps.decode(u_hat).map(|d| d == data).unwrap_or(false),
                None => u_hat == data,
            };
            outcome.decodes.push(TxDecode {
                converged: dec.converged,
                iterations: dec.iterations,
                correct,
            });
            outcome.t_used = t;
            if correct {
                outcome.success = true;
                break;
            }
        }
        Ok(outcome)
    }
}

/// `R_t = k_c / (m Σ_{j<=t} n_j)`.
pub fn effective_rate(k_c: usize, m: usize, sched: &PunctureSchedule, t: usize) -> Result<f64, PunctureError> {
    sched.range(t)?;
    Ok(k_c as f64 / (m * sched.cumulative(t)) as f64)
}

/// `TP = Σ_t k / (Σ_{j<=t} n_j) · Pr{first success at t}`, in bits per symbol.
///
/// `success_probs[t - 1]` is the probability of first succeeding at `t`;
/// missing trailing entries count as zero.
pub fn throughput(k: usize, sched: &PunctureSchedule, success_probs: &[f64]) -> f64 {
    success_probs
        .iter()
        .take(sched.t_max())
        .enumerate()
        .map(|(i, &p)| k as f64 / sched.cumulative(i + 1) as f64 * p)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shaped_648(scheme: Scheme) -> HarqConfig {
        HarqConfig::new(
            scheme,
            648,
            972,
            Some(ShapingConfig {
                k_prime: 590,
                composition: Composition::new(vec![249, 136, 40, 7]).unwrap(),
            }),
            vec![180, 18, 18],
        )
    }

    fn uniform_648() -> HarqConfig {
        HarqConfig::new(Scheme::Uniform, 648, 648, None, vec![180, 18, 18])
    }

    #[test]
    fn rates() {
        let s = PunctureSchedule::new(vec![180, 18, 18], 216).unwrap();
        assert!((effective_rate(972, 6, &s, 1).unwrap() - 0.9).abs() < 1e-15);
        assert!((effective_rate(972, 6, &s, 3).unwrap() - 0.75).abs() < 1e-15);
        assert!(effective_rate(972, 6, &s, 2).unwrap() < 0.9);
        assert!(effective_rate(972, 6, &s, 4).is_err());
        // R_1 < 1 needs n_1 > 162
        let tight = PunctureSchedule::new(vec![162, 54], 216).unwrap();
        assert_eq!(effective_rate(972, 6, &tight, 1).unwrap(), 1.0);
    }

    #[test]
    fn throughput_cases() {
        let s = PunctureSchedule::new(vec![180, 18, 18], 216).unwrap();
        assert!((throughput(648, &s, &[1.0]) - 3.6).abs() < 1e-12);
        assert!((throughput(648, &s, &[0.0, 0.0, 1.0]) - 3.0).abs() < 1e-12);
        assert_eq!(throughput(648, &s, &[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(throughput(648, &s, &[]), 0.0);
    }

    proptest! {
        #[test]
        fn throughput_drops_when_success_moves_later(
            p in proptest::collection::vec(0.0f64..1.0, 3),
            from in 0usize..2,
            frac in 0.0f64..1.0,
        ) {
            let total: f64 = p.iter().sum::<f64>().max(1.0);
            let p: Vec<f64> = p.iter().map(|x| x / total).collect();
            let s = PunctureSchedule::new(vec![180, 18, 18], 216).unwrap();
            let mut q = p.clone();
            let moved = q[from] * frac;
            q[from] -= moved;
            q[from + 1] += moved;
            prop_assert!(throughput(648, &s, &q) <= throughput(648, &s, &p) + 1e-12);
        }
    }

    #[test]
    fn config_errors() {
        let mut cfg = shaped_648(Scheme::Symbolwise);
        cfg.shaping = None;
        assert!(matches!(HarqLink::new(cfg), Err(HarqError::MissingShaping)));

        let mut cfg = uniform_648();
        cfg.shaping = shaped_648(Scheme::Symbolwise).shaping;
        assert!(matches!(HarqLink::new(cfg), Err(HarqError::UnexpectedShaping)));

        let mut cfg = shaped_648(Scheme::Symbolwise);
        cfg.schedule = vec![150, 33, 33];
        assert!(matches!(
            HarqLink::new(cfg),
            Err(HarqError::Puncture(PunctureError::FirstTransmissionTooShort {
                n1: 150,
                min: 154
            }))
        ));

        let mut cfg = shaped_648(Scheme::Symbolwise);
        cfg.k_c = 648;
        assert!(matches!(HarqLink::new(cfg), Err(HarqError::RateTooLow { .. })));

        let mut cfg = uniform_648();
        cfg.k_c = 972;
        assert!(matches!(HarqLink::new(cfg), Err(HarqError::UniformRate { .. })));

        let mut cfg = shaped_648(Scheme::Symbolwise);
        cfg.channel = ChannelKind::Rayleigh2x2;
        cfg.schedule = vec![181, 17, 18];
        assert!(matches!(HarqLink::new(cfg), Err(HarqError::OddMimoTransmission(181))));

        assert!(matches!(
            HarqLink::new(HarqConfig::new(Scheme::Uniform, 100, 100, None, vec![216])),
            Err(HarqError::NoCode(100))
        ));
    }

    #[test]
    fn operative_constellations() {
        let sym = HarqLink::new(shaped_648(Scheme::Symbolwise)).unwrap();
        assert!((1..=3).all(|t| sym.is_shaped_transmission(t)));
        let seq = HarqLink::new(shaped_648(Scheme::Sequential)).unwrap();
        assert!(seq.is_shaped_transmission(1));
        assert!(!seq.is_shaped_transmission(2));
        assert!(!seq.is_shaped_transmission(3));
        let uni = HarqLink::new(uniform_648()).unwrap();
        assert!((1..=3).all(|t| !uni.is_shaped_transmission(t)));
        let e = |c: &Constellation| c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / 64.0;
        assert!((e(uni.constellation(1)) - 1.0).abs() < 1e-12);
        assert!((e(seq.constellation(2)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_blocks_succeed_first_time() {
        for cfg in [
            shaped_648(Scheme::Symbolwise),
            shaped_648(Scheme::Sequential),
            uniform_648(),
        ] {
            let link = HarqLink::new(cfg).unwrap();
            for b in 0..5 {
                let out = link.run_block(40.0, &mut BlockRngs::new(1, 0, b)).unwrap();
                assert!(out.success);
                assert_eq!(out.t_used, 1);
                assert_eq!(out.amplitude_counts.len(), 1);
                assert_eq!(out.amplitude_counts[0].iter().sum::<u64>(), 360);
            }
        }
    }

    #[test]
    fn hopeless_blocks_use_every_transmission() {
        let link = HarqLink::new(shaped_648(Scheme::Symbolwise)).unwrap();
        for b in 0..3 {
            let out = link.run_block(-20.0, &mut BlockRngs::new(2, 0, b)).unwrap();
            assert!(!out.success);
            assert_eq!(out.t_used, 3);
            assert_eq!(out.decodes.len(), 3);
            let all: Vec<u64> = (0..4)
                .map(|a| out.amplitude_counts.iter().map(|c| c[a]).sum())
                .collect();
            // symbol-wise puncturing sends every matcher amplitude exactly once
            assert_eq!(all, vec![249, 136, 40, 7]);
        }
    }

    #[test]
    fn sequential_first_transmission_is_matcher_prefix() {
        let link = HarqLink::new(shaped_648(Scheme::Sequential)).unwrap();
        let ps = link.ps_encoder().unwrap().clone();
        let mut rngs = BlockRngs::new(3, 0, 0);
        let data: Vec<u8> = (0..648).map(|_| rngs.data.random_range(0..2u8)).collect();
        let out = link.run_block_with(&data, -20.0, &mut rngs).unwrap();
        let u = ps.encode(&data).unwrap();
        let map = LabelMap::new(6).unwrap();
        let mut expect = vec![0u64; 4];
        for pair in u[..720].chunks(4) {
            let (a, b) = crate::shaping::beta_unmap(pair, &map).unwrap();
            expect[(a / 2) as usize] += 1;
            expect[(b / 2) as usize] += 1;
        }
        assert_eq!(out.amplitude_counts[0], expect);
    }

    #[test]
    fn replay_is_deterministic() {
        let mut cfg = shaped_648(Scheme::Symbolwise);
        cfg.channel = ChannelKind::Rayleigh2x2;
        let link = HarqLink::new(cfg).unwrap();
        let a = link.run_block(18.0, &mut BlockRngs::new(4, 2, 9)).unwrap();
        let b = link.run_block(18.0, &mut BlockRngs::new(4, 2, 9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mimo_noiseless_blocks_succeed() {
        let mut cfg = uniform_648();
        cfg.channel = ChannelKind::Rayleigh2x2;
        let link = HarqLink::new(cfg).unwrap();
        let out = link.run_block(60.0, &mut BlockRngs::new(5, 0, 0)).unwrap();
        assert!(out.success);
        assert_eq!(out.t_used, 1);
    }
}
