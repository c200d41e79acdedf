//! `symwise`: run shaped IR-HARQ link simulations from the command line.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symwise_core::fec::bp_decode;
use symwise_core::puncture::min_first_tx_symbols;
use symwise_core::sim::{self, ConfigError, CsvOptions, SimConfig};

#[derive(Parser)]
#[command(
    name = "symwise",
    version,
    about = "Probabilistic shaping over IR-HARQ link simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Throughput and per-transmission BLER over an SNR grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Add a wall-clock column (output no longer reproducible byte for byte).
        #[arg(long)]
        timing: bool,
    },
    /// Amplitude distribution of each transmission at one SNR.
    Audit {
        #[command(flatten)]
        common: Common,
    },
    /// Mutual information of uniform and shaped QAM over AWGN.
    Mi {
        #[command(flatten)]
        common: Common,
        /// Monte Carlo samples per SNR point.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Check the configuration and run quick self-tests of the code chain.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// shaped-symbolwise, shaped-sequential or uniform.
    #[arg(long)]
    scheme: Option<String>,
    /// Data bits per block (648 and 864 have presets).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Blocks per SNR point.
    #[arg(long)]
    blocks: Option<u64>,
    /// SNR grid `start:stop:step` in dB, or a single value.
    #[arg(long)]
    snr: Option<String>,
    /// awgn or rayleigh2x2.
    #[arg(long)]
    channel: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Extra `key=value` settings, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<SimConfig> {
        let text = match &self.config {
            Some(path) => std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?,
            None => String::new(),
        };
        let mut overrides: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| overrides.push((k.to_string(), v));
        if let Some(s) = &self.scheme {
            put("scheme", s.clone());
        }
        if let Some(k) = self.k {
            put("k", k.to_string());
        }
        if let Some(s) = self.seed {
            put("seed", s.to_string());
        }
        if let Some(b) = self.blocks {
            put("blocks", b.to_string());
        }
        if let Some(s) = &self.snr {
            put("snr", s.clone());
        }
        if let Some(c) = &self.channel {
            put("channel", c.clone());
        }
        if let Some(o) = &self.output {
            put("output", o.display().to_string());
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects KEY=VALUE, got {kv:?}");
            };
            overrides.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(SimConfig::parse(&text, &overrides)?)
    }
}

fn config_comments(cfg: &SimConfig) -> Vec<String> {
    // the output path is left out so reruns into other files stay identical
    cfg.to_text()
        .lines()
        .filter(|l| !l.starts_with("output"))
        .map(|l| format!("config: {l}"))
        .collect()
}

fn sweep(common: &Common, timing: bool) -> Result<()> {
    let cfg = common.load()?;
    let records = sim::run_sweep_with(&cfg, common.workers, |r| {
        eprintln!(
            "snr {:>7.3} dB  TP {:.4} ± {:.4}  BLER after t: {:?}",
            r.snr_db,
            r.throughput(),
            r.throughput_se(),
            r.bler_after()
        );
    })?;
    let opts = CsvOptions { timing };
    let comments = config_comments(&cfg);
    match &cfg.output {
        Some(path) => sim::write_sweep_csv(path, &records, &comments, opts)?,
        None => sim::write_sweep(io::stdout().lock(), &records, &comments, opts)?,
    }
    Ok(())
}

fn audit(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let points = cfg.snr.points();
    let [snr] = points[..] else {
        bail!("audit takes a single SNR value, got {} points", points.len());
    };
    let report = sim::audit_distribution(&cfg, snr, cfg.blocks, common.workers)?;
    let comments = config_comments(&cfg);
    match &cfg.output {
        Some(path) => sim::write_audit_csv(path, &report, &comments)?,
        None => sim::write_audit(io::stdout().lock(), &report, &comments)?,
    }
    Ok(())
}

fn mi(common: &Common, samples: usize) -> Result<()> {
    let cfg = common.load()?;
    let records = sim::mi_curves(&cfg, samples)?;
    match &cfg.output {
        Some(path) => sim::write_mi_csv(path, &records)?,
        None => sim::write_mi(io::stdout().lock(), &records)?,
    }
    Ok(())
}

fn validate(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let link = cfg.link()?;
    let hc = link.config();
    let mut out = io::stdout().lock();
    writeln!(out, "scheme          {}", hc.scheme)?;
    writeln!(
        out,
        "code            n = {}, k_c = {} (rate {})",
        link.code().n(),
        hc.k_c,
        cfg.code_rate
    )?;
    writeln!(out, "schedule        {:?}", link.schedule().symbols())?;
    if let Some(ps) = link.ps_encoder() {
        let p = ps.params();
        let min = min_first_tx_symbols(p.symbols(), p.k, p.k_prime, p.m);
        writeln!(out, "k, k'           {}, {}", p.k, p.k_prime)?;
        writeln!(out, "composition     {:?}", ps.composition().counts())?;
        writeln!(out, "filler bits     {}", p.n_filler)?;
        writeln!(
            out,
            "min n_1         {min} (configured {})",
            link.schedule().symbols()[0]
        )?;
        writeln!(out, "a-priori LLRs   {:?}", link.apriori().llrs())?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..20 {
        let data: Vec<u8> = (0..hc.k).map(|_| rng.random_range(0..2u8)).collect();
        let u = match link.ps_encoder() {
            Some(ps) => ps.encode(&data)?,
            None => data.clone(),
        };
        let c = link.code().encode(&u)?;
        if !link.code().syndrome_check(&c) {
            bail!("encoder produced a word failing the parity checks");
        }
        let dec = bp_decode(
            &symwise_core::fec::noiseless_llrs(&c, 10.0),
            link.code(),
            hc.bp_iterations,
        );
        if dec.bits != c || !dec.converged {
            bail!("decoder did not return a noiseless codeword");
        }
        if let Some(ps) = link.ps_encoder() {
            if ps.decode(&c[..hc.k_c])? != data {
                bail!("shaping round trip failed");
            }
        }
    }
    writeln!(out, "self-tests      ok")?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep { common, timing } => sweep(common, *timing),
        Command::Audit { common } => audit(common),
        Command::Mi { common, samples } => mi(common, *samples),
        Command::Validate { common } => validate(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
