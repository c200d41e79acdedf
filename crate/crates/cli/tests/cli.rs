//! The `symwise` binary end to end.

use std::fs;
use std::process::{Command, Output};

fn symwise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symwise"))
        .args(args)
        .output()
        .expect("run symwise")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn validate_reports_geometry() {
    let out = symwise(&["validate", "--scheme", "shaped-symbolwise", "--k", "648"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("min n_1         154"), "{text}");
    assert!(text.contains("[249, 136, 40, 7]"), "{text}");
    assert!(text.contains("self-tests      ok"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "scheme = shaped-symbolwise\nk = 648\nschedule = 150,33,33\n").unwrap();
    let out = symwise(&["validate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("154"));

    let missing = dir.path().join("missing.cfg");
    let out = symwise(&["validate", "-c", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.cfg"));

    let out = symwise(&["validate", "--scheme", "type-iii"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |path: &str, workers: &str| {
        symwise(&[
            "sweep",
            "--scheme",
            "shaped-sequential",
            "--k",
            "648",
            "--snr",
            "12:14:2",
            "--blocks",
            "6",
            "--seed",
            "3",
            "--workers",
            workers,
            "-o",
            path,
        ])
    };
    assert!(args(a.to_str().unwrap(), "1").status.success());
    assert!(args(b.to_str().unwrap(), "2").status.success());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.contains("# config: scheme = shaped-sequential"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("snr_db,blocks,k,throughput"));
    assert!(!rows[0].contains("wall_time"));
}

#[test]
fn set_overrides_apply_last() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("u.cfg");
    fs::write(&cfg, "scheme = uniform\nk = 648\nblocks = 100\n").unwrap();
    let out = symwise(&["sweep", "-c", cfg.to_str().unwrap(), "--snr", "30", "--set", "blocks=4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("# config: blocks = 4"), "{text}");
    let row = text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
    assert!(row.split(',').nth(1) == Some("4"), "{row}");

    let out = symwise(&["sweep", "--set", "no_such_key=1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn audit_needs_a_single_snr() {
    let out = symwise(&[
        "audit",
        "--scheme",
        "shaped-symbolwise",
        "--k",
        "648",
        "--snr",
        "10:12:1",
        "--blocks",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = symwise(&[
        "audit",
        "--scheme",
        "shaped-symbolwise",
        "--k",
        "648",
        "--snr",
        "11",
        "--blocks",
        "4",
    ]);
    assert!(out.status.success());
    assert!(
        stdout(&out).lines().any(|l| l.starts_with("transmission")),
        "{}",
        stdout(&out)
    );
}
