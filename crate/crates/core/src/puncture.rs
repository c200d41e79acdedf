//! Label assembly and the per-transmission puncturing schedules.
//!
//! Every scheme is expressed as a [`LabelSequence`]: `n` labels of `m` bits,
//! each bit tagged with the codeword position it came from. Transmission `t`
//! always sends the contiguous label slice `p_t ..= q_t`, so the schemes differ
//! only in how codeword bits are arranged into labels.
//!
//! * symbol-wise: label `i` carries sign bits `c[k_a + 2i]`, `c[k_a + 2i + 1]`
//!   and the amplitude bits `β(A_{2i-1} A_{2i})` from `c[(m-2) i ..]` (0-based).
//! * sequential: transmission `t` takes codeword bits `m (p_t - 1) .. m q_t` in
//!   order, fills the amplitude slots of its labels first and the sign slots
//!   with the rest.
//! * uniform: consecutive `m`-bit groups.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

use crate::fec::SoftCodeword;
use crate::modem::LabelMap;
use crate::shaping::AmplitudeDistribution;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PunctureError {
    #[error("schedule sums to {sum} symbols, codeword has {n}")]
    ScheduleSum { sum: usize, n: usize },
    #[error("schedule entries must be positive")]
    EmptyTransmission,
    #[error("first transmission has {n1} symbols, at least {min} are required")]
    FirstTransmissionTooShort { n1: usize, min: usize },
    #[error("transmission {t} outside 1..={t_max}")]
    TransmissionOutOfRange { t: usize, t_max: usize },
    #[error("codeword length {got} does not fit {n} labels of {m} bits")]
    LengthMismatch { got: usize, n: usize, m: usize },
    #[error("codeword position {0} received twice")]
    ProvenanceCollision(usize),
    #[error("transmission {t} carries {got} LLRs, expected {expected}")]
    TransmissionLength { t: usize, got: usize, expected: usize },
    #[error("unknown puncturing scheme {0:?}")]
    UnknownScheme(String),
}

/// How codeword bits are spread over transmissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Shaped, whole labels per transmission.
    Symbolwise,
    /// Shaped, codeword order.
    Sequential,
    /// Unshaped baseline.
    Uniform,
}

impl Scheme {
    pub fn is_shaped(self) -> bool {
        !matches!(self, Scheme::Uniform)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Symbolwise => "shaped-symbolwise",
            Scheme::Sequential => "shaped-sequential",
            Scheme::Uniform => "uniform",
        })
    }
}

impl FromStr for Scheme {
    type Err = PunctureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "shaped-symbolwise" | "symbolwise" => Ok(Scheme::Symbolwise),
            "shaped-sequential" | "sequential" => Ok(Scheme::Sequential),
            "uniform" => Ok(Scheme::Uniform),
            other => Err(PunctureError::UnknownScheme(other.to_string())),
        }
    }
}

/// Symbols per transmission, `n_1, ..., n_{t_max}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PunctureSchedule {
    symbols: Vec<usize>,
}

impl PunctureSchedule {
    pub fn new(symbols: Vec<usize>, n: usize) -> Result<Self, PunctureError> {
        if symbols.is_empty() || symbols.contains(&0) {
            return Err(PunctureError::EmptyTransmission);
        }
        let sum = symbols.iter().sum();
        if sum != n {
            return Err(PunctureError::ScheduleSum { sum, n });
        }
        Ok(Self { symbols })
    }

    /// Like [`PunctureSchedule::new`], and also enforces the minimum
    /// first-transmission length of a shaped block.
    pub fn shaped(symbols: Vec<usize>, n: usize, k: usize, k_prime: usize, m: usize) -> Result<Self, PunctureError> {
        let sched = Self::new(symbols, n)?;
        let min = min_first_tx_symbols(n, k, k_prime, m);
        if sched.symbols[0] < min {
            return Err(PunctureError::FirstTransmissionTooShort {
                n1: sched.symbols[0],
                min,
            });
        }
        Ok(sched)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn t_max(&self) -> usize {
        self.symbols.len()
    }

    pub fn total(&self) -> usize {
        self.symbols.iter().sum()
    }

    /// `Σ_{j <= t} n_j`.
    pub fn cumulative(&self, t: usize) -> usize {
        self.symbols[..t].iter().sum()
    }

    /// 0-based label range `p_t - 1 .. q_t` of transmission `t` (1-based).
    pub fn range(&self, t: usize) -> Result<Range<usize>, PunctureError> {
        if t == 0 || t > self.t_max() {
            return Err(PunctureError::TransmissionOutOfRange { t, t_max: self.t_max() });
        }
        Ok(self.cumulative(t - 1)..self.cumulative(t))
    }
}

/// Smallest `n_1` with `n_1 > ((m - 2) n + k - k') / m`.
pub fn min_first_tx_symbols(n: usize, k: usize, k_prime: usize, m: usize) -> usize {
    ((m - 2) * n + k - k_prime) / m + 1
}

/// `n` labels of `m` bits with the codeword position of every bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSequence {
    m: usize,
    bits: Vec<u8>,
    provenance: Vec<usize>,
}

impl LabelSequence {
    fn from_provenance(c: &[u8], m: usize, provenance: Vec<usize>) -> Self {
        let bits = provenance.iter().map(|&p| c[p]).collect();
        Self { m, bits, provenance }
    }

    pub fn bits_per_label(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.bits.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn label(&self, i: usize) -> &[u8] {
        &self.bits[i * self.m..(i + 1) * self.m]
    }

    /// Codeword positions of label `i`, in label bit order.
    pub fn provenance(&self, i: usize) -> &[usize] {
        &self.provenance[i * self.m..(i + 1) * self.m]
    }

    /// Flat bits of labels `range`.
    pub fn slice(&self, range: Range<usize>) -> &[u8] {
        &self.bits[range.start * self.m..range.end * self.m]
    }

    pub fn slice_provenance(&self, range: Range<usize>) -> &[usize] {
        &self.provenance[range.start * self.m..range.end * self.m]
    }

    /// Bits sent in transmission `t`.
    pub fn select(&self, sched: &PunctureSchedule, t: usize) -> Result<&[u8], PunctureError> {
        Ok(self.slice(sched.range(t)?))
    }
}

fn check_len(c: &[u8], m: usize) -> Result<usize, PunctureError> {
    if m < 2 || !c.len().is_multiple_of(m) {
        return Err(PunctureError::LengthMismatch {
            got: c.len(),
            n: c.len() / m.max(1),
            m,
        });
    }
    Ok(c.len() / m)
}

/// Symbol-wise labels `S_i = c_{k_a+2i-1} c_{k_a+2i} β(A_{2i-1} A_{2i})`.
pub fn assemble_labels(c: &[u8], k_a: usize, m: usize) -> Result<LabelSequence, PunctureError> {
    let n = check_len(c, m)?;
    if k_a != n * (m - 2) {
        return Err(PunctureError::LengthMismatch { got: c.len(), n, m });
    }
    let mut prov = Vec::with_capacity(c.len());
    for i in 0..n {
        prov.push(k_a + 2 * i);
        prov.push(k_a + 2 * i + 1);
        prov.extend((m - 2) * i..(m - 2) * (i + 1));
    }
    Ok(LabelSequence::from_provenance(c, m, prov))
}

/// Sequential-puncturing labels for the whole schedule.
pub fn sequential_labels(c: &[u8], sched: &PunctureSchedule, m: usize) -> Result<LabelSequence, PunctureError> {
    let n = check_len(c, m)?;
    if sched.total() != n {
        return Err(PunctureError::ScheduleSum { sum: sched.total(), n });
    }
    let mut prov = Vec::with_capacity(c.len());
    for t in 1..=sched.t_max() {
        let range = sched.range(t)?;
        let n_t = range.len();
        let chunk = m * range.start;
        let amp_slots = n_t * (m - 2);
        for l in 0..n_t {
            prov.push(chunk + amp_slots + 2 * l);
            prov.push(chunk + amp_slots + 2 * l + 1);
            prov.extend(chunk + l * (m - 2)..chunk + (l + 1) * (m - 2));
        }
    }
    Ok(LabelSequence::from_provenance(c, m, prov))
}

/// Labels of transmission `t` under sequential puncturing.
pub fn select_sequential(c: &[u8], sched: &PunctureSchedule, t: usize, m: usize) -> Result<Vec<u8>, PunctureError> {
    let seq = sequential_labels(c, sched, m)?;
    Ok(seq.select(sched, t)?.to_vec())
}

/// Labels of transmission `t` under symbol-wise puncturing.
pub fn select_symbolwise<'a>(
    seq: &'a LabelSequence,
    sched: &PunctureSchedule,
    t: usize,
) -> Result<&'a [u8], PunctureError> {
    seq.select(sched, t)
}

/// Unshaped labels: consecutive `m`-bit groups.
pub fn natural_labels(c: &[u8], m: usize) -> Result<LabelSequence, PunctureError> {
    check_len(c, m)?;
    Ok(LabelSequence::from_provenance(c, m, (0..c.len()).collect()))
}

/// A-priori LLRs of the `m - 2` amplitude bit positions of a label.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriTable {
    llrs: Vec<f64>,
}

impl AprioriTable {
    pub fn zeros(map: &LabelMap) -> Self {
        Self {
            llrs: vec![0.0; map.amp_bits()],
        }
    }

    /// LLR of amplitude bit `j` (0-based within the amplitude bits).
    pub fn llr(&self, j: usize) -> f64 {
        self.llrs[j]
    }

    pub fn llrs(&self) -> &[f64] {
        &self.llrs
    }
}

/// `L_{A,j} = log P_{B_j}(0) / P_{B_j}(1)` for the amplitude positions,
/// marginalizing the label distribution over all `2^m` labels.
pub fn apriori_llr(dist: &AmplitudeDistribution, map: &LabelMap) -> AprioriTable {
    let m = map.bits_per_symbol();
    let p = dist.probs();
    let mut zero = vec![0.0; m];
    let mut one = vec![0.0; m];
    for label in 0..1usize << m {
        let (_, _, ai, aq) = map.split(label);
        let pb = 0.25 * p[ai] * p[aq];
        for j in 0..m {
            if map.bit(label, j) == 0 {
                zero[j] += pb;
            } else {
                one[j] += pb;
            }
        }
    }
    AprioriTable {
        llrs: (2..m).map(|j| (zero[j] / one[j]).ln()).collect(),
    }
}

/// Where the soft buffer values came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FillCounts {
    pub channel: usize,
    pub apriori: usize,
    pub zero: usize,
}

/// Rebuilds the codeword soft input after transmissions `1..=received.len()`.
///
/// Channel LLRs are scattered to their codeword positions. Positions not yet
/// transmitted get the a-priori LLR if they are amplitude bits (codeword
/// positions below `k_a`), and 0 otherwise.
pub fn inverse_puncture(
    received: &[Vec<f64>],
    seq: &LabelSequence,
    sched: &PunctureSchedule,
    apriori: &AprioriTable,
    k_a: usize,
) -> Result<(SoftCodeword, FillCounts), PunctureError> {
    let n_c = seq.bits.len();
    let amp_bits = seq.m - 2;
    if received.len() > sched.t_max() {
        return Err(PunctureError::TransmissionOutOfRange {
            t: received.len(),
            t_max: sched.t_max(),
        });
    }
    let mut llrs = vec![0.0; n_c];
    let mut seen = vec![false; n_c];
    let mut counts = FillCounts::default();
    for (i, rx) in received.iter().enumerate() {
        let t = i + 1;
        let prov = seq.slice_provenance(sched.range(t)?);
        if rx.len() != prov.len() {
            return Err(PunctureError::TransmissionLength {
                t,
                got: rx.len(),
                expected: prov.len(),
            });
        }
        for (&pos, &l) in prov.iter().zip(rx) {
            if seen[pos] {
                return Err(PunctureError::ProvenanceCollision(pos));
            }
            seen[pos] = true;
            llrs[pos] = l;
            counts.channel += 1;
        }
    }
    for (pos, slot) in llrs.iter_mut().enumerate() {
        if seen[pos] {
            continue;
        }
        if pos < k_a && amp_bits > 0 {
            *slot = apriori.llr(pos % amp_bits);
            counts.apriori += 1;
        } else {
            counts.zero += 1;
        }
    }
    Ok((SoftCodeword { llrs }, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn indices(n_c: usize) -> Vec<u8> {
        // codeword whose "bits" are position tags mod 256, for layout checks
        (0..n_c).map(|i| (i % 251) as u8).collect()
    }

    #[test]
    fn label_layout_symbolwise() {
        let c = indices(1296);
        let seq = assemble_labels(&c, 864, 6).unwrap();
        assert_eq!(seq.len(), 216);
        // 1-based: S_1 = c865 c866 c1 c2 c3 c4
        assert_eq!(seq.provenance(0), &[864, 865, 0, 1, 2, 3]);
        // S_216 = c1295 c1296 c861 c862 c863 c864
        assert_eq!(seq.provenance(215), &[1294, 1295, 860, 861, 862, 863]);
        assert!(assemble_labels(&c[..1295], 860, 6).is_err());
        assert!(assemble_labels(&c, 860, 6).is_err());
    }

    #[test]
    fn provenance_is_a_bijection() {
        let c = indices(1296);
        let sched = PunctureSchedule::new(vec![180, 18, 18], 216).unwrap();
        for seq in [
            assemble_labels(&c, 864, 6).unwrap(),
            sequential_labels(&c, &sched, 6).unwrap(),
            natural_labels(&c, 6).unwrap(),
        ] {
            let mut p = seq.provenance.clone();
            p.sort_unstable();
            assert_eq!(p, (0..1296).collect::<Vec<_>>());
        }
    }

    #[test]
    fn schedule_ranges() {
        let fig4 = PunctureSchedule::new(vec![392, 60, 60], 512).unwrap();
        assert_eq!(fig4.range(2).unwrap(), 392..452); // labels 393..452
        let s = PunctureSchedule::new(vec![180, 18, 18], 216).unwrap();
        assert_eq!(s.range(1).unwrap(), 0..180);
        let s = PunctureSchedule::new(vec![192, 12, 12], 216).unwrap();
        assert_eq!(s.range(3).unwrap(), 204..216); // labels 205..216
        assert_eq!(
            s.range(4),
            Err(PunctureError::TransmissionOutOfRange { t: 4, t_max: 3 })
        );
        assert_eq!(
            s.range(0),
            Err(PunctureError::TransmissionOutOfRange { t: 0, t_max: 3 })
        );
        assert_eq!(
            PunctureSchedule::new(vec![180, 19, 18], 216),
            Err(PunctureError::ScheduleSum { sum: 217, n: 216 })
        );
        assert_eq!(
            PunctureSchedule::new(vec![216, 0], 216),
            Err(PunctureError::EmptyTransmission)
        );
    }

    #[test]
    fn first_transmission_bound() {
        assert_eq!(min_first_tx_symbols(216, 648, 590, 6), 154);
        assert_eq!(min_first_tx_symbols(216, 864, 700, 6), 172);
        assert_eq!(min_first_tx_symbols(216, 500, 500, 6), 145);
        assert!(PunctureSchedule::shaped(vec![180, 18, 18], 216, 648, 590, 6).is_ok());
        assert!(PunctureSchedule::shaped(vec![192, 12, 12], 216, 864, 700, 6).is_ok());
        assert_eq!(
            PunctureSchedule::shaped(vec![150, 33, 33], 216, 648, 590, 6),
            Err(PunctureError::FirstTransmissionTooShort { n1: 150, min: 154 })
        );
        assert!(PunctureSchedule::shaped(vec![154, 31, 31], 216, 648, 590, 6).is_ok());
        assert!(PunctureSchedule::shaped(vec![153, 32, 31], 216, 648, 590, 6).is_err());
    }

    #[test]
    fn sequential_chunks() {
        let c = indices(1296);
        let sched = PunctureSchedule::new(vec![180, 18, 18], 216).unwrap();
        let seq = sequential_labels(&c, &sched, 6).unwrap();
        let tx1 = seq.slice_provenance(sched.range(1).unwrap());
        let amp: Vec<usize> = tx1.chunks(6).flat_map(|l| l[2..].to_vec()).collect();
        let sign: Vec<usize> = tx1.chunks(6).flat_map(|l| l[..2].to_vec()).collect();
        assert_eq!(amp, (0..720).collect::<Vec<_>>());
        assert_eq!(sign, (720..1080).collect::<Vec<_>>());
        let tx2 = seq.slice_provenance(sched.range(2).unwrap());
        assert!(tx2.iter().all(|&p| (1080..1188).contains(&p)));
        assert!(tx2.iter().all(|&p| p >= 864));
        assert_eq!(select_sequential(&c, &sched, 2, 6).unwrap().len(), 108);
    }

    #[test]
    fn apriori_values() {
        let map = LabelMap::new(6).unwrap();
        let uni = AmplitudeDistribution::uniform(8).unwrap();
        assert!(apriori_llr(&uni, &map).llrs().iter().all(|&l| l.abs() < 1e-15));

        let d = AmplitudeDistribution::from_weights(&[0.5764, 0.3148, 0.0926, 0.0162]).unwrap();
        let a = apriori_llr(&d, &map);
        let hi = (0.8912f64 / 0.1088).ln();
        let lo = (0.5926f64 / 0.4074).ln();
        assert!((a.llr(0) - hi).abs() < 1e-12);
        assert!((a.llr(1) - lo).abs() < 1e-12);
        assert!((a.llr(0) - 2.1031).abs() < 1e-4);
        assert!((a.llr(1) - 0.3747).abs() < 1e-4);
        assert_eq!(a.llr(0), a.llr(2));
        assert_eq!(a.llr(1), a.llr(3));
    }

    fn received_for(seq: &LabelSequence, sched: &PunctureSchedule, t: usize) -> Vec<Vec<f64>> {
        (1..=t)
            .map(|tt| vec![1.5; sched.range(tt).unwrap().len() * seq.m])
            .collect()
    }

    #[test]
    fn inverse_puncture_fill_counts() {
        let c = indices(1296);
        let map = LabelMap::new(6).unwrap();
        let d = AmplitudeDistribution::from_weights(&[0.5764, 0.3148, 0.0926, 0.0162]).unwrap();
        let ap = apriori_llr(&d, &map);
        let sched = PunctureSchedule::new(vec![180, 18, 18], 216).unwrap();

        let sym = assemble_labels(&c, 864, 6).unwrap();
        let (soft, n) = inverse_puncture(&received_for(&sym, &sched, 1), &sym, &sched, &ap, 864).unwrap();
        assert_eq!(
            n,
            FillCounts {
                channel: 1080,
                apriori: 144,
                zero: 72
            }
        );
        // first untransmitted label is 181: amplitude bits c721..c724
        assert_eq!(&soft.llrs[720..724], ap.llrs());
        assert_eq!(soft.llrs[864 + 360], 0.0);

        let (_, n) = inverse_puncture(&received_for(&sym, &sched, 3), &sym, &sched, &ap, 864).unwrap();
        assert_eq!(
            n,
            FillCounts {
                channel: 1296,
                apriori: 0,
                zero: 0
            }
        );

        let seq = sequential_labels(&c, &sched, 6).unwrap();
        let (_, n) = inverse_puncture(&received_for(&seq, &sched, 1), &seq, &sched, &ap, 864).unwrap();
        assert_eq!(
            n,
            FillCounts {
                channel: 1080,
                apriori: 0,
                zero: 216
            }
        );
    }

    #[test]
    fn inverse_puncture_errors() {
        let c = indices(1296);
        let ap = AprioriTable::zeros(&LabelMap::new(6).unwrap());
        let sched = PunctureSchedule::new(vec![180, 18, 18], 216).unwrap();
        let seq = assemble_labels(&c, 864, 6).unwrap();
        let bad = vec![vec![0.0; 10]];
        assert!(matches!(
            inverse_puncture(&bad, &seq, &sched, &ap, 864),
            Err(PunctureError::TransmissionLength { t: 1, .. })
        ));
        let too_many = received_for(&seq, &sched, 3)
            .into_iter()
            .chain([vec![]])
            .collect::<Vec<_>>();
        assert!(inverse_puncture(&too_many, &seq, &sched, &ap, 864).is_err());
        // the same transmission slot used against a schedule that overlaps it
        let overlapping = PunctureSchedule {
            symbols: vec![180, 18, 18],
        };
        let mut dup = seq.clone();
        dup.provenance[1080] = 0;
        assert_eq!(
            inverse_puncture(&received_for(&dup, &overlapping, 2), &dup, &overlapping, &ap, 864),
            Err(PunctureError::ProvenanceCollision(0))
        );
    }

    #[test]
    fn inverse_puncture_is_repeatable() {
        let c = indices(1296);
        let map = LabelMap::new(6).unwrap();
        let d = AmplitudeDistribution::from_weights(&[0.4792, 0.3241, 0.1505, 0.0463]).unwrap();
        let ap = apriori_llr(&d, &map);
        let sched = PunctureSchedule::new(vec![192, 12, 12], 216).unwrap();
        let seq = assemble_labels(&c, 864, 6).unwrap();
        let rx = received_for(&seq, &sched, 2);
        assert_eq!(
            inverse_puncture(&rx, &seq, &sched, &ap, 864).unwrap(),
            inverse_puncture(&rx, &seq, &sched, &ap, 864).unwrap()
        );
    }

    proptest! {
        #[test]
        fn schedules_cover_each_bit_once(
            n1 in 1usize..60,
            n2 in 1usize..20,
            n3 in 1usize..20,
            m in prop_oneof![Just(4usize), Just(6), Just(8)],
        ) {
            let n = n1 + n2 + n3;
            let c: Vec<u8> = vec![0; n * m];
            let sched = PunctureSchedule::new(vec![n1, n2, n3], n).unwrap();
            let seqs = [
                assemble_labels(&c, n * (m - 2), m).unwrap(),
                sequential_labels(&c, &sched, m).unwrap(),
            ];
            for seq in seqs {
                let mut hits = vec![0u8; n * m];
                for t in 1..=3 {
                    for &p in seq.slice_provenance(sched.range(t).unwrap()) {
                        hits[p] += 1;
                    }
                }
                prop_assert!(hits.iter().all(|&h| h == 1));
            }
        }

        #[test]
        fn first_tx_bound_is_tight(n in 10usize..400, m in prop_oneof![Just(4usize), Just(6), Just(8)], extra in 0usize..50) {
            let k_prime = 100;
            let k = k_prime + extra;
            let min = min_first_tx_symbols(n, k, k_prime, m);
            // strict inequality n_1 m > (m - 2) n + k - k'
            prop_assert!(min * m > (m - 2) * n + k - k_prime);
            prop_assert!((min - 1) * m <= (m - 2) * n + k - k_prime);
        }
    }
}
