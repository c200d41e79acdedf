//! CSV files for sweeps, distribution audits and MI curves.
//!
//! Files start with `#` comment lines stating the conventions, followed by a
//! header row and one row per record. Floating point columns use 17
//! significant digits so that values read back exactly.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::sweep::{DistributionAudit, MiRecord, SweepRecord};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

/// Options for [`write_sweep_csv`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// Add a `wall_time_s` column. Makes the file run-dependent.
    pub timing: bool,
}

const CONVENTIONS: &[&str] = &[
    "snr_db: AWGN Es/N0 with unit average symbol energy; 2x2 Rayleigh: E|Hx|^2/(2 N0) per receive antenna, in dB (10 log10)",
    "throughput: data bits per transmitted QAM symbol, sum_t k/(n_1+..+n_t) Pr{first success at t}",
    "throughput_se: standard error of the throughput over blocks",
    "success_t*: blocks first decoded after transmission t; p_success_t*: the same as a probability",
    "bler_after_t*: probability that a block is still undecoded after t transmissions",
    "amp_t*_a*: count of amplitude a sent in transmission t; dist_t*_a*: normalized per transmission",
    "dist_all_a*: amplitude distribution over all transmitted symbols",
];

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ReportError + '_ {
    move |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn amplitude_label(index: usize) -> usize {
    2 * index + 1
}

fn sweep_header(t_max: usize, amps: usize, opts: CsvOptions) -> Vec<String> {
    let mut h: Vec<String> = ["snr_db", "blocks", "k", "throughput", "throughput_se", "p_fail"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for t in 1..=t_max {
        h.push(format!("symbols_t{t}"));
        h.push(format!("success_t{t}"));
        h.push(format!("p_success_t{t}"));
        h.push(format!("bler_after_t{t}"));
    }
    for t in 1..=t_max {
        for a in 0..amps {
            h.push(format!("amp_t{t}_a{}", amplitude_label(a)));
        }
        for a in 0..amps {
            h.push(format!("dist_t{t}_a{}", amplitude_label(a)));
        }
    }
    for a in 0..amps {
        h.push(format!("dist_all_a{}", amplitude_label(a)));
    }
    if opts.timing {
        h.push("wall_time_s".into());
    }
    h
}

/// Writes sweep records to any writer. `comments` are extra `#` lines placed
/// after the conventions (for instance the configuration).
pub fn write_sweep<W: Write>(
    out: W,
    records: &[SweepRecord],
    comments: &[String],
    opts: CsvOptions,
) -> Result<(), csv::Error> {
    let mut out = out;
    for line in CONVENTIONS
        .iter()
        .map(|s| s.to_string())
        .chain(comments.iter().cloned())
    {
        writeln!(out, "# {line}")?;
    }
    let t_max = records.first().map_or(0, SweepRecord::t_max);
    let amps = records
        .first()
        .and_then(|r| r.amplitude_counts.first())
        .map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(sweep_header(t_max, amps, opts))?;
    for r in records {
        let mut row = vec![
            f(r.snr_db),
            r.blocks.to_string(),
            r.k.to_string(),
            f(r.throughput()),
            f(r.throughput_se()),
            f(r.failure_prob()),
        ];
        let p = r.success_probs();
        let bler = r.bler_after();
        for t in 0..t_max {
            row.push(r.cumulative_symbols[t].to_string());
            row.push(r.successes[t].to_string());
            row.push(f(p[t]));
            row.push(f(bler[t]));
        }
        let dists = r.distributions();
        for (counts, dist) in r.amplitude_counts.iter().zip(&dists).take(t_max) {
            row.extend(counts.iter().map(u64::to_string));
            row.extend(dist.iter().map(|&x| f(x)));
        }
        row.extend(r.aggregate_distribution().into_iter().map(f));
        if opts.timing {
            row.push(f(r.wall_time));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv(
    path: &Path,
    records: &[SweepRecord],
    comments: &[String],
    opts: CsvOptions,
) -> Result<(), ReportError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_sweep(BufWriter::new(file), records, comments, opts).map_err(csv_err(path))
}

/// Reads a file written by [`write_sweep_csv`]. Derived columns are ignored;
/// the record is rebuilt from its counts.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>, ReportError> {
    let bad = |reason: String| ReportError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err(path))?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let t_max = (1..).take_while(|t| col(&format!("success_t{t}")).is_some()).count();
    let amps = (0..)
        .take_while(|&a| col(&format!("amp_t1_a{}", amplitude_label(a))).is_some())
        .count();
    let need = |name: &str| col(name).ok_or_else(|| bad(format!("missing column {name}")));
    let i_snr = need("snr_db")?;
    let i_blocks = need("blocks")?;
    let i_k = need("k")?;
    let i_sym: Vec<usize> = (1..=t_max)
        .map(|t| need(&format!("symbols_t{t}")))
        .collect::<Result<_, _>>()?;
    let i_succ: Vec<usize> = (1..=t_max)
        .map(|t| need(&format!("success_t{t}")))
        .collect::<Result<_, _>>()?;
    let i_amp: Vec<Vec<usize>> = (1..=t_max)
        .map(|t| {
            (0..amps)
                .map(|a| need(&format!("amp_t{t}_a{}", amplitude_label(a))))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()?;
    let i_time = col("wall_time_s");

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(csv_err(path))?;
        let num =
            |i: usize| -> Result<f64, ReportError> { row[i].parse().map_err(|e| bad(format!("{:?}: {e}", &row[i]))) };
        let int =
            |i: usize| -> Result<u64, ReportError> { row[i].parse().map_err(|e| bad(format!("{:?}: {e}", &row[i]))) };
        records.push(SweepRecord {
            snr_db: num(i_snr)?,
            blocks: int(i_blocks)?,
            k: int(i_k)? as usize,
            cumulative_symbols: i_sym
                .iter()
                .map(|&i| int(i).map(|v| v as usize))
                .collect::<Result<_, _>>()?,
            successes: i_succ.iter().map(|&i| int(i)).collect::<Result<_, _>>()?,
            amplitude_counts: i_amp
                .iter()
                .map(|cols| cols.iter().map(|&i| int(i)).collect::<Result<_, _>>())
                .collect::<Result<_, _>>()?,
            wall_time: match i_time {
                Some(i) => num(i)?,
                None => 0.0,
            },
        });
    }
    Ok(records)
}

/// One row per transmission plus an `all` row.
pub fn write_audit_csv(path: &Path, audit: &DistributionAudit, comments: &[String]) -> Result<(), ReportError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_audit(BufWriter::new(file), audit, comments).map_err(csv_err(path))
}

pub fn write_audit<W: Write>(out: W, audit: &DistributionAudit, comments: &[String]) -> Result<(), csv::Error> {
    let mut out = out;
    writeln!(
        out,
        "# amplitude distribution of the symbols sent in each transmission, at snr_db = {}",
        f(audit.snr_db)
    )?;
    writeln!(
        out,
        "# blocks: blocks that used the transmission; symbols: amplitudes counted"
    )?;
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    let amps = audit.all.len();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["transmission".to_string(), "blocks".into(), "symbols".into()];
    header.extend((0..amps).map(|a| format!("p_a{}", amplitude_label(a))));
    w.write_record(&header)?;
    for (t, dist) in audit.per_transmission.iter().enumerate() {
        let mut row = vec![
            (t + 1).to_string(),
            audit.reached[t].to_string(),
            audit.counts[t].iter().sum::<u64>().to_string(),
        ];
        row.extend(dist.iter().map(|&x| f(x)));
        w.write_record(&row)?;
    }
    let mut row = vec![
        "all".to_string(),
        audit.blocks.to_string(),
        audit.counts.iter().flatten().sum::<u64>().to_string(),
    ];
    row.extend(audit.all.iter().map(|&x| f(x)));
    w.write_record(&row)?;
    w.flush()?;
    Ok(())
}

pub fn write_mi_csv(path: &Path, records: &[MiRecord]) -> Result<(), ReportError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_mi(BufWriter::new(file), records).map_err(csv_err(path))
}

pub fn write_mi<W: Write>(out: W, records: &[MiRecord]) -> Result<(), csv::Error> {
    let mut out = out;
    writeln!(
        out,
        "# mutual information in bits (log base 2) per complex symbol over AWGN"
    )?;
    writeln!(out, "# snr_db: Es/N0 in dB with unit average symbol energy")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["snr_db", "mi_uniform", "mi_shaped", "gaussian_limit"])?;
    for r in records {
        w.write_record([
            f(r.snr_db),
            f(r.uniform),
            r.shaped.map(f).unwrap_or_default(),
            f(r.gaussian_limit),
        ])?;
    }
    w.flush()?;
    Ok(())
}
