//! Quasi-cyclic LDPC codes of the WLAN family (n = 1296, Z = 54).
//!
//! Encoding uses the dual-diagonal parity structure of the base matrices;
//! decoding is flooding sum-product belief propagation in the LLR domain.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::modem::{clip_llr, LLR_CLIP};

/// Default iteration cap of the BP decoder.
pub const DEFAULT_BP_ITERATIONS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LdpcError {
    #[error("unknown code rate {0:?}; expected 1/2, 2/3, 3/4 or 5/6")]
    UnknownRate(String),
    #[error("malformed base matrix: {0}")]
    Malformed(String),
    #[error("base matrix parity part is not dual-diagonal: {0}")]
    NotDualDiagonal(String),
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// The four WLAN code rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeRate {
    R1_2,
    R2_3,
    R3_4,
    R5_6,
}

impl CodeRate {
    pub const ALL: [CodeRate; 4] = [CodeRate::R1_2, CodeRate::R2_3, CodeRate::R3_4, CodeRate::R5_6];

    fn base_matrix_text(self) -> &'static str {
        match self {
            CodeRate::R1_2 => include_str!("../data/wlan_n1296_r1_2.txt"),
            CodeRate::R2_3 => include_str!("../data/wlan_n1296_r2_3.txt"),
            CodeRate::R3_4 => include_str!("../data/wlan_n1296_r3_4.txt"),
            CodeRate::R5_6 => include_str!("../data/wlan_n1296_r5_6.txt"),
        }
    }

    /// The rate whose n = 1296 code has `k_c` information bits.
    pub fn for_info_bits(k_c: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.info_bits() == k_c)
    }

    pub fn info_bits(self) -> usize {
        match self {
            CodeRate::R1_2 => 648,
            CodeRate::R2_3 => 864,
            CodeRate::R3_4 => 972,
            CodeRate::R5_6 => 1080,
        }
    }
}

impl fmt::Display for CodeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeRate::R1_2 => "1/2",
            CodeRate::R2_3 => "2/3",
            CodeRate::R3_4 => "3/4",
            CodeRate::R5_6 => "5/6",
        })
    }
}

impl FromStr for CodeRate {
    type Err = LdpcError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "1/2" => Ok(CodeRate::R1_2),
            "2/3" => Ok(CodeRate::R2_3),
            "3/4" => Ok(CodeRate::R3_4),
            "5/6" => Ok(CodeRate::R5_6),
            other => Err(LdpcError::UnknownRate(other.to_string())),
        }
    }
}

/// An expanded quasi-cyclic LDPC code.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    base: Vec<Vec<i32>>,
    z: usize,
    n_c: usize,
    k_c: usize,
    /// Shift of the odd-one-out entry of the first parity column.
    p0_shift: usize,
    // Edge list in check-major order.
    check_start: Vec<usize>,
    edge_var: Vec<u32>,
    // Edge ids grouped by variable.
    var_start: Vec<usize>,
    var_edges: Vec<u32>,
}

/// Loads one of the shipped n = 1296 WLAN codes.
pub fn load_code(rate: CodeRate) -> LdpcCode {
    LdpcCode::from_base_matrix_text(rate.base_matrix_text()).expect("shipped base matrices are valid")
}

impl LdpcCode {
    /// Parses `rows cols Z` followed by `rows * cols` shift values, with -1
    /// for an all-zero block.
    pub fn from_base_matrix_text(text: &str) -> Result<Self, LdpcError> {
        let mut it = text.split_whitespace().map(|t| {
            t.parse::<i64>()
                .map_err(|_| LdpcError::Malformed(format!("not an integer: {t:?}")))
        });
        let mut header = || -> Result<usize, LdpcError> {
            let v = it
                .next()
                .ok_or_else(|| LdpcError::Malformed("missing header".into()))??;
            usize::try_from(v).map_err(|_| LdpcError::Malformed(format!("negative header value {v}")))
        };
        let rows = header()?;
        let cols = header()?;
        let z = header()?;
        if rows == 0 || cols <= rows || z == 0 {
            return Err(LdpcError::Malformed(format!("bad dimensions {rows} {cols} {z}")));
        }
        let mut base = vec![vec![-1i32; cols]; rows];
        for (r, row) in base.iter_mut().enumerate() {
            for (c, slot) in row.iter_mut().enumerate() {
                let v = it
                    .next()
                    .ok_or_else(|| LdpcError::Malformed(format!("missing entry ({r}, {c})")))??;
                if v < -1 || v >= z as i64 {
                    return Err(LdpcError::Malformed(format!("shift {v} at ({r}, {c}) out of range")));
                }
                *slot = v as i32;
            }
        }
        if it.next().is_some() {
            return Err(LdpcError::Malformed("trailing entries".into()));
        }
        Self::from_base_matrix(base, z)
    }

    pub fn from_base_matrix(base: Vec<Vec<i32>>, z: usize) -> Result<Self, LdpcError> {
        let rows = base.len();
        let cols = base[0].len();
        let kb = cols - rows;
        let p0_shift = check_dual_diagonal(&base, kb)?;

        let mut check_start = Vec::with_capacity(rows * z + 1);
        let mut edge_var = Vec::new();
        check_start.push(0);
        for row in &base {
            for i in 0..z {
                for (c, &s) in row.iter().enumerate() {
                    if s >= 0 {
                        edge_var.push((c * z + (i + s as usize) % z) as u32);
                    }
                }
                check_start.push(edge_var.len());
            }
        }
        let n_c = cols * z;
        let mut degree = vec![0usize; n_c];
        for &v in &edge_var {
            degree[v as usize] += 1;
        }
        let mut var_start = vec![0usize; n_c + 1];
        for v in 0..n_c {
            var_start[v + 1] = var_start[v] + degree[v];
        }
        let mut fill = var_start.clone();
        let mut var_edges = vec![0u32; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edges[fill[v as usize]] = e as u32;
            fill[v as usize] += 1;
        }

        Ok(Self {
            z,
            n_c,
            k_c: kb * z,
            p0_shift,
            base,
            check_start,
            edge_var,
            var_start,
            var_edges,
        })
    }

    pub fn n(&self) -> usize {
        self.n_c
    }

    pub fn k(&self) -> usize {
        self.k_c
    }

    pub fn lifting(&self) -> usize {
        self.z
    }

    pub fn base_matrix(&self) -> &[Vec<i32>] {
        &self.base
    }

    pub fn num_checks(&self) -> usize {
        self.check_start.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.edge_var.len()
    }

    /// Variable nodes of check `c`.
    pub fn check_vars(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.edge_var[self.check_start[c]..self.check_start[c + 1]]
            .iter()
            .map(|&v| v as usize)
    }

    /// Systematic encoding, `c = [u | p]`.
    pub fn encode(&self, u: &[u8]) -> Result<Vec<u8>, LdpcError> {
        if u.len() != self.k_c {
            return Err(LdpcError::LengthMismatch {
                expected: self.k_c,
                got: u.len(),
            });
        }
        let z = self.z;
        let rows = self.base.len();
        let kb = self.k_c / z;

        // lambda_r = sum_j P^{s(r, j)} u_j over the information columns
        let mut lambda = vec![0u8; rows * z];
        for (r, row) in self.base.iter().enumerate() {
            let acc = &mut lambda[r * z..(r + 1) * z];
            for (j, &s) in row[..kb].iter().enumerate() {
                if s < 0 {
                    continue;
                }
                let block = &u[j * z..(j + 1) * z];
                for (i, a) in acc.iter_mut().enumerate() {
                    *a ^= block[(i + s as usize) % z];
                }
            }
        }

        let mut c = Vec::with_capacity(self.n_c);
        c.extend_from_slice(u);
        c.resize(self.n_c, 0);
        let parity_at = |blk: usize| self.k_c + blk * z;

        // p_0 = P^{-s_mid} sum_r lambda_r
        let mut total = vec![0u8; z];
        for r in 0..rows {
            for i in 0..z {
                total[i] ^= lambda[r * z + i];
            }
        }
        let p0: Vec<u8> = (0..z).map(|i| total[(i + z - self.p0_shift) % z]).collect();
        c[parity_at(0)..parity_at(1)].copy_from_slice(&p0);

        // walk down the dual diagonal
        let mut prev = vec![0u8; z];
        for r in 0..rows - 1 {
            let s = self.base[r][kb];
            let mut next = vec![0u8; z];
            for i in 0..z {
                let mut b = lambda[r * z + i] ^ prev[i];
                if s >= 0 {
                    b ^= p0[(i + s as usize) % z];
                }
                next[i] = b;
            }
            c[parity_at(r + 1)..parity_at(r + 2)].copy_from_slice(&next);
            prev = next;
        }
        Ok(c)
    }

    /// `H c^T = 0`.
    pub fn syndrome_check(&self, c: &[u8]) -> bool {
        c.len() == self.n_c
            && (0..self.num_checks()).all(|chk| {
                self.edge_var[self.check_start[chk]..self.check_start[chk + 1]]
                    .iter()
                    .fold(0u8, |acc, &v| acc ^ c[v as usize])
                    == 0
            })
    }
}

/// Validates the dual-diagonal parity part and returns the shift of the
/// middle entry of the first parity column.
fn check_dual_diagonal(base: &[Vec<i32>], kb: usize) -> Result<usize, LdpcError> {
    let rows = base.len();
    if base.iter().any(|r| r.len() != kb + rows) {
        return Err(LdpcError::Malformed("ragged base matrix".into()));
    }
    if rows < 3 {
        return Err(LdpcError::NotDualDiagonal(format!("{rows} rows")));
    }
    let first: Vec<(usize, i32)> = (0..rows)
        .filter(|&r| base[r][kb] >= 0)
        .map(|r| (r, base[r][kb]))
        .collect();
    let ok = first.len() == 3 && first[0].0 == 0 && first[2].0 == rows - 1 && first[0].1 == first[2].1;
    if !ok {
        return Err(LdpcError::NotDualDiagonal(format!("first parity column {first:?}")));
    }
    for j in 1..rows {
        for (r, row) in base.iter().enumerate() {
            let expect = if r + 1 == j || r == j { 0 } else { -1 };
            if row[kb + j] != expect {
                return Err(LdpcError::NotDualDiagonal(format!(
                    "entry ({r}, {}) = {}, expected {expect}",
                    kb + j,
                    row[kb + j]
                )));
            }
        }
    }
    Ok(first[1].1 as usize)
}

/// Channel soft input for the decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftCodeword {
    pub llrs: Vec<f64>,
}

impl SoftCodeword {
    pub fn zeros(n: usize) -> Self {
        Self { llrs: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    /// Syndrome satisfied with no undecided (zero-LLR) bit.
    pub converged: bool,
    /// Message-passing iterations run; 0 when the channel decisions already
    /// formed a codeword.
    pub iterations: usize,
}

/// Flooding sum-product decoder with per-decoder scratch buffers.
#[derive(Debug, Clone)]
pub struct BpDecoder<'a> {
    code: &'a LdpcCode,
    max_iter: usize,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    post: Vec<f64>,
    tanh_buf: Vec<f64>,
    prefix: Vec<f64>,
}

impl<'a> BpDecoder<'a> {
    pub fn new(code: &'a LdpcCode, max_iter: usize) -> Self {
        let e = code.num_edges();
        Self {
            code,
            max_iter,
            v2c: vec![0.0; e],
            c2v: vec![0.0; e],
            post: vec![0.0; code.n_c],
            tanh_buf: Vec::new(),
            prefix: Vec::new(),
        }
    }

    pub fn decode(&mut self, soft: &SoftCodeword) -> DecodeOutcome {
        let code = self.code;
        assert_eq!(soft.llrs.len(), code.n_c, "soft input length");
        let channel: Vec<f64> = soft.llrs.iter().map(|&l| clip_llr(l)).collect();
        debug_assert!(channel.iter().all(|l| l.is_finite()));

        self.post.copy_from_slice(&channel);
        let mut bits = vec![0u8; code.n_c];
        if self.decide(&mut bits) {
            return DecodeOutcome {
                bits,
                converged: true,
                iterations: 0,
            };
        }
        for (e, &v) in code.edge_var.iter().enumerate() {
            self.v2c[e] = channel[v as usize];
        }
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            iterations += 1;
            self.check_update();
            // variable update
            for (v, &ch) in channel.iter().enumerate().take(code.n_c) {
                let edges = &code.var_edges[code.var_start[v]..code.var_start[v + 1]];
                let total = ch + edges.iter().map(|&e| self.c2v[e as usize]).sum::<f64>();
                self.post[v] = total;
                for &e in edges {
                    self.v2c[e as usize] = clip_llr(total - self.c2v[e as usize]);
                }
            }
            if self.decide(&mut bits) {
                converged = true;
                break;
            }
        }
        DecodeOutcome {
            bits,
            converged,
            iterations,
        }
    }

    fn check_update(&mut self) {
        let code = self.code;
        for chk in 0..code.num_checks() {
            let (lo, hi) = (code.check_start[chk], code.check_start[chk + 1]);
            let deg = hi - lo;
            self.tanh_buf.clear();
            self.tanh_buf.extend(self.v2c[lo..hi].iter().map(|&m| half_tanh(m)));
            self.prefix.clear();
            let mut acc = 1.0;
            for &t in &self.tanh_buf {
                self.prefix.push(acc);
                acc *= t;
            }
            let mut suffix = 1.0;
            for i in (0..deg).rev() {
                let prod = self.prefix[i] * suffix;
                suffix *= self.tanh_buf[i];
                self.c2v[lo + i] = clip_llr(double_atanh(prod));
            }
        }
    }

    /// Hard decisions from the current posteriors; true when they form a
    /// codeword and none of them is a tie.
    fn decide(&self, bits: &mut [u8]) -> bool {
        let mut tie = false;
        for (b, &l) in bits.iter_mut().zip(&self.post) {
            *b = (l < 0.0) as u8;
            tie |= l == 0.0;
        }
        !tie && self.code.syndrome_check(bits)
    }
}

/// `tanh(x / 2)`, written with `exp_m1` which is cheaper than `tanh`.
fn half_tanh(x: f64) -> f64 {
    let e = x.exp_m1();
    if e.is_infinite() {
        1.0
    } else {
        e / (e + 2.0)
    }
}

/// `2 atanh(p) = ln(1 + 2p / (1 - p))`.
fn double_atanh(p: f64) -> f64 {
    (2.0 * p / (1.0 - p)).ln_1p()
}

/// One-shot BP decode.
pub fn bp_decode(soft: &SoftCodeword, code: &LdpcCode, max_iter: usize) -> DecodeOutcome {
    BpDecoder::new(code, max_iter).decode(soft)
}

/// `±LLR_CLIP` LLRs of a hard codeword.
pub fn noiseless_llrs(c: &[u8], magnitude: f64) -> SoftCodeword {
    let mag = magnitude.min(LLR_CLIP);
    SoftCodeword {
        llrs: c.iter().map(|&b| if b == 0 { mag } else { -mag }).collect(),
    }
}
