//! Monte Carlo sweeps over an SNR grid.
//!
//! Every block draws its randomness from `(seed, snr, block index)`, and a
//! point's statistics are integer counts summed in block order, so results do
//! not depend on the number of workers.

use std::time::Instant;

use rayon::prelude::*;

use crate::harq::{throughput, BlockOutcome, BlockRngs, HarqLink};
use crate::modem::{estimate_mi, Constellation, LabelMap, MiPoint, SymbolPrior};
use crate::puncture::PunctureSchedule;
use crate::shaping::AmplitudeDistribution;

use super::config::{ConfigError, SimConfig};

/// Statistics of one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub snr_db: f64,
    pub blocks: u64,
    /// Data bits per block.
    pub k: usize,
    /// `Σ_{j<=t} n_j` for every `t`.
    pub cumulative_symbols: Vec<usize>,
    /// Blocks first decoded after transmission `t` (index `t - 1`).
    pub successes: Vec<u64>,
    /// Amplitude counts of the symbols sent in transmission `t`, over all
    /// blocks that reached `t`.
    pub amplitude_counts: Vec<Vec<u64>>,
    /// Seconds spent on the point. Not part of the CSV unless asked for.
    pub wall_time: f64,
}

impl SweepRecord {
    fn empty(snr_db: f64, link: &HarqLink) -> Self {
        let sched = link.schedule();
        let t_max = sched.t_max();
        let amps = 1usize << (link.config().m / 2 - 1);
        Self {
            snr_db,
            blocks: 0,
            k: link.config().k,
            cumulative_symbols: (1..=t_max).map(|t| sched.cumulative(t)).collect(),
            successes: vec![0; t_max],
            amplitude_counts: vec![vec![0; amps]; t_max],
            wall_time: 0.0,
        }
    }

    fn add(&mut self, out: &BlockOutcome) {
        self.blocks += 1;
        if out.success {
            self.successes[out.t_used - 1] += 1;
        }
        for (acc, counts) in self.amplitude_counts.iter_mut().zip(&out.amplitude_counts) {
            for (a, c) in acc.iter_mut().zip(counts) {
                *a += c;
            }
        }
    }

    pub fn t_max(&self) -> usize {
        self.successes.len()
    }

    /// `Pr{first success at t}`, index `t - 1`.
    pub fn success_probs(&self) -> Vec<f64> {
        self.successes.iter().map(|&s| s as f64 / self.blocks as f64).collect()
    }

    /// Blocks dropped after the last transmission.
    pub fn failures(&self) -> u64 {
        self.blocks - self.successes.iter().sum::<u64>()
    }

    pub fn failure_prob(&self) -> f64 {
        self.failures() as f64 / self.blocks as f64
    }

    /// Block error probability after `t` transmissions, index `t - 1`.
    pub fn bler_after(&self) -> Vec<f64> {
        let mut left = self.blocks;
        self.successes
            .iter()
            .map(|&s| {
                left -= s;
                left as f64 / self.blocks as f64
            })
            .collect()
    }

    /// Blocks that used transmission `t`, index `t - 1`.
    pub fn reached(&self) -> Vec<u64> {
        let mut left = self.blocks;
        self.successes
            .iter()
            .map(|&s| {
                let r = left;
                left -= s;
                r
            })
            .collect()
    }

    fn rates(&self) -> Vec<f64> {
        self.cumulative_symbols
            .iter()
            .map(|&s| self.k as f64 / s as f64)
            .collect()
    }

    /// Average data bits per symbol.
    pub fn throughput(&self) -> f64 {
        let sched = PunctureSchedule::new(
            self.per_transmission_symbols(),
            *self.cumulative_symbols.last().unwrap(),
        )
        .expect("record holds a valid schedule");
        throughput(self.k, &sched, &self.success_probs())
    }

    fn per_transmission_symbols(&self) -> Vec<usize> {
        let mut prev = 0;
        self.cumulative_symbols
            .iter()
            .map(|&c| {
                let n = c - prev;
                prev = c;
                n
            })
            .collect()
    }

    /// Standard error of [`SweepRecord::throughput`] as a mean of per-block
    /// rewards (`k / Σ_{j<=t} n_j` on first success at `t`, 0 if dropped).
    pub fn throughput_se(&self) -> f64 {
        let tp = self.throughput();
        let mut var = self.failure_prob() * tp * tp;
        for (p, r) in self.success_probs().iter().zip(self.rates()) {
            var += p * (r - tp) * (r - tp);
        }
        (var / self.blocks as f64).sqrt()
    }

    /// Empirical amplitude distribution of transmission `t`, index `t - 1`.
    /// All zeros for a transmission no block reached.
    pub fn distributions(&self) -> Vec<Vec<f64>> {
        self.amplitude_counts.iter().map(|c| normalize(c)).collect()
    }

    /// Amplitude distribution over every transmitted symbol.
    pub fn aggregate_distribution(&self) -> Vec<f64> {
        let amps = self.amplitude_counts.first().map_or(0, Vec::len);
        let total: Vec<u64> = (0..amps)
            .map(|a| self.amplitude_counts.iter().map(|c| c[a]).sum())
            .collect();
        normalize(&total)
    }
}

fn normalize(counts: &[u64]) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    counts
        .iter()
        .map(|&c| if n == 0 { 0.0 } else { c as f64 / n as f64 })
        .collect()
}

/// Runs every grid point of `cfg` on `workers` threads (0 = rayon default).
pub fn run_sweep(cfg: &SimConfig, workers: usize) -> Result<Vec<SweepRecord>, ConfigError> {
    run_sweep_with(cfg, workers, |_| {})
}

/// [`run_sweep`], calling `progress` after each point.
pub fn run_sweep_with<F: FnMut(&SweepRecord)>(
    cfg: &SimConfig,
    workers: usize,
    mut progress: F,
) -> Result<Vec<SweepRecord>, ConfigError> {
    let link = cfg.link()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    let mut records = Vec::new();
    for snr in cfg.snr.points() {
        let rec = pool.install(|| run_point(&link, cfg.seed, snr, cfg.blocks))?;
        progress(&rec);
        records.push(rec);
    }
    Ok(records)
}

/// Simulates `blocks` blocks at one SNR.
pub fn run_point(link: &HarqLink, seed: u64, snr_db: f64, blocks: u64) -> Result<SweepRecord, ConfigError> {
    let start = Instant::now();
    let outcomes: Vec<BlockOutcome> = (0..blocks)
        .into_par_iter()
        .map(|b| link.run_block(snr_db, &mut BlockRngs::new(seed, snr_db.to_bits(), b)))
        .collect::<Result<_, _>>()?;
    let mut rec = SweepRecord::empty(snr_db, link);
    for out in &outcomes {
        rec.add(out);
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    assert!(rec.throughput().is_finite() && rec.throughput_se().is_finite());
    Ok(rec)
}

/// Per-transmission amplitude statistics at one SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionAudit {
    pub snr_db: f64,
    pub blocks: u64,
    /// Blocks that used transmission `t`, index `t - 1`.
    pub reached: Vec<u64>,
    pub per_transmission: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    /// Over all transmitted symbols.
    pub all: Vec<f64>,
}

/// Amplitude histograms of the symbols actually sent in each transmission.
pub fn audit_distribution(
    cfg: &SimConfig,
    snr_db: f64,
    blocks: u64,
    workers: usize,
) -> Result<DistributionAudit, ConfigError> {
    let link = cfg.link()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool");
    let rec = pool.install(|| run_point(&link, cfg.seed, snr_db, blocks))?;
    Ok(DistributionAudit {
        snr_db,
        blocks,
        reached: rec.reached(),
        per_transmission: rec.distributions(),
        counts: rec.amplitude_counts.clone(),
        all: rec.aggregate_distribution(),
    })
}

/// Mutual information of uniform and shaped 2^m-QAM over AWGN.
#[derive(Debug, Clone, PartialEq)]
pub struct MiRecord {
    pub snr_db: f64,
    pub uniform: f64,
    pub shaped: Option<f64>,
    pub gaussian_limit: f64,
}

/// Reference MI curves on the config's SNR grid, `samples` draws per point.
pub fn mi_curves(cfg: &SimConfig, samples: usize) -> Result<Vec<MiRecord>, ConfigError> {
    let map = LabelMap::new(cfg.m).map_err(|e| ConfigError::Link(e.into()))?;
    let grid = cfg.snr.points();
    let mut rng = crate::channel::stream_rng(cfg.seed, u64::MAX, 0, crate::channel::StreamRole::Noise);
    let uni = Constellation::uniform(map);
    let uniform: Vec<MiPoint> = estimate_mi(&uni, &SymbolPrior::uniform(&map), &grid, samples, &mut rng);
    let shaped: Option<Vec<MiPoint>> = match cfg.composition()? {
        Some(comp) => {
            let dist: AmplitudeDistribution = comp.distribution();
            let cons = Constellation::new(map, &dist).map_err(|e| ConfigError::Link(e.into()))?;
            let prior = SymbolPrior::shaped(&map, &dist).map_err(|e| ConfigError::Link(e.into()))?;
            Some(estimate_mi(&cons, &prior, &grid, samples, &mut rng))
        }
        None => None,
    };
    Ok(uniform
        .iter()
        .enumerate()
        .map(|(i, u)| MiRecord {
            snr_db: u.snr_db,
            uniform: u.mi,
            shaped: shaped.as_ref().map(|s| s[i].mi),
            gaussian_limit: u.gaussian_limit,
        })
        .collect())
}
