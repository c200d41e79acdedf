//! End-to-end behaviour of the simulation front end.

use std::fs;

use symwise_core::harq::{BlockRngs, ChannelKind};
use symwise_core::puncture::Scheme;
use symwise_core::sim::{self, ConfigError, CsvOptions, SimConfig};

fn small(scheme: Scheme, snr: &str, blocks: u64) -> SimConfig {
    let mut cfg = SimConfig::preset(scheme, 648).unwrap();
    cfg.snr = snr.parse().unwrap();
    cfg.blocks = blocks;
    cfg.seed = 42;
    cfg
}

#[test]
fn config_file_errors_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        fs::write(&p, text).unwrap();
        p
    };
    let ok = write("ok.cfg", "scheme = shaped-symbolwise\nk = 648\nschedule = 180,18,18\n");
    assert!(SimConfig::from_file(&ok).is_ok());

    let short = write(
        "short.cfg",
        "scheme = shaped-symbolwise\nk = 648\nschedule = 150,33,33\n",
    );
    assert!(matches!(
        SimConfig::from_file(&short),
        Err(ConfigError::FirstTransmissionTooShort { n1: 150, min: 154 })
    ));
    let sum = write("sum.cfg", "scheme = uniform\nk = 648\nschedule = 180,18,19\n");
    assert!(matches!(
        SimConfig::from_file(&sum),
        Err(ConfigError::ScheduleSum { sum: 217, n: 216 })
    ));
    let scheme = write("scheme.cfg", "scheme = type-iii\nk = 648\n");
    assert!(matches!(
        SimConfig::from_file(&scheme),
        Err(ConfigError::UnknownScheme(_))
    ));
    let missing = dir.path().join("nope.cfg");
    let err = SimConfig::from_file(&missing).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }));
    assert!(err.to_string().contains("nope.cfg"));

    let k864 = write(
        "k864.cfg",
        "scheme = shaped-sequential\nk = 864\nschedule = 171,22,23\n",
    );
    assert!(matches!(
        SimConfig::from_file(&k864),
        Err(ConfigError::FirstTransmissionTooShort { n1: 171, min: 172 })
    ));
}

#[test]
fn sweep_csv_round_trips_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Scheme::Symbolwise, "11:13:1", 24);
    let recs = sim::run_sweep(&cfg, 1).unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    sim::write_sweep_csv(&a, &recs, &[], CsvOptions::default()).unwrap();
    let back = sim::read_sweep_csv(&a).unwrap();
    let mut expect = recs.clone();
    expect.iter_mut().for_each(|r| r.wall_time = 0.0);
    assert_eq!(back, expect);

    let again = sim::run_sweep(&cfg, 3).unwrap();
    sim::write_sweep_csv(&b, &again, &[], CsvOptions::default()).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn per_transmission_bler_is_nested() {
    let recs = sim::run_sweep(&small(Scheme::Sequential, "11:14:1.5", 30), 0).unwrap();
    for r in &recs {
        let b = r.bler_after();
        assert!(b.windows(2).all(|w| w[1] <= w[0]), "{b:?}");
        let total: u64 = r.successes.iter().sum::<u64>() + r.failures();
        assert_eq!(total, r.blocks);
    }
}

#[test]
fn first_transmissions_of_both_shaped_schemes_agree() {
    // Under both layouts Tx-1 carries the first 360 matcher amplitudes.
    let sym = small(Scheme::Symbolwise, "11", 1).link().unwrap();
    let seq = small(Scheme::Sequential, "11", 1).link().unwrap();
    for b in 0..20 {
        let x = sym.run_block(11.0, &mut BlockRngs::new(5, 0, b)).unwrap();
        let y = seq.run_block(11.0, &mut BlockRngs::new(5, 0, b)).unwrap();
        assert_eq!(x.amplitude_counts[0], y.amplitude_counts[0]);
    }
}

#[test]
fn uniform_audit_is_flat() {
    let cfg = small(Scheme::Uniform, "11", 60);
    let audit = sim::audit_distribution(&cfg, 11.0, 60, 0).unwrap();
    for dist in &audit.per_transmission {
        for p in dist {
            assert!((p - 0.25).abs() < 0.03, "{dist:?}");
        }
    }
    assert_eq!(audit.reached[0], 60);
}

#[test]
fn mimo_sweep_runs_at_high_snr() {
    let mut cfg = small(Scheme::Uniform, "40", 6);
    cfg.channel = ChannelKind::Rayleigh2x2;
    let recs = sim::run_sweep(&cfg, 0).unwrap();
    assert_eq!(recs[0].successes, vec![6, 0, 0]);
    assert_eq!(recs[0].throughput(), 3.6);
}

#[test]
fn mi_csv_has_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Scheme::Symbolwise, "0:20:5", 1);
    let recs = sim::mi_curves(&cfg, 2_000).unwrap();
    assert_eq!(recs.len(), 5);
    for w in recs.windows(2) {
        assert!(w[1].gaussian_limit > w[0].gaussian_limit);
    }
    for r in &recs {
        assert!(r.uniform <= r.gaussian_limit + 0.05);
        assert!(r.shaped.is_some());
    }
    let path = dir.path().join("mi.csv");
    sim::write_mi_csv(&path, &recs).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 6);
}
