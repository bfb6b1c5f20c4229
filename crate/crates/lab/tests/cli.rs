use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mpcorr::record::{self, RECORDS_FILE};

fn mpcorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpcorr")).args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn first_moment_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpcorr(&["moments", "--m", "1", "--n", "1000", "--sequence", "monomial,lattice", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = record::read(&dir.path().join(RECORDS_FILE)).unwrap();
    assert_eq!(recs.len(), 1);
    let r = &recs[0];
    assert!(r.pass);
    assert_eq!(r.config["eps"], "5e-2");
    assert_eq!(r.defaults_version, 1);
    assert!((r.scalars["monomial.m1.n1000.value"] - 0.75).abs() < 1e-10);
    assert!(r.sidecar_path(dir.path(), "moments-lattice").exists());
}

#[test]
fn unknown_keys_fail_loudly() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpcorr(&["moments", "--set", "thetta=0.3", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key `thetta`"));

    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "kind = moments\n# fine\nmm = 3\n").unwrap();
    let o = mpcorr(&["moments", "--config", cfg.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.conf:3: unknown key `mm`"), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join(RECORDS_FILE).exists());
}

#[test]
fn kind_must_match_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.conf");
    fs::write(&cfg, "kind = sweep\n").unwrap();
    let o = mpcorr(&["moments", "--config", cfg.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_certificate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpcorr(&["moments", "--m", "1", "--n", "500", "--time-limit", "1e-9", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let recs = record::read(&dir.path().join(RECORDS_FILE)).unwrap();
    assert_eq!(recs[0].failed(), vec!["time_limit"]);
}

#[test]
fn same_seed_same_scalars_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["correlate", "--theta", "0.2", "--m", "3", "--n", "2000,20000", "--control", "true", "--control-n", "3000", "--samples", "4", "--seed", "7"];
    for threads in ["1", "3", "1"] {
        let mut args = base.to_vec();
        args.extend(["--threads", threads, "--out", dir.path().to_str().unwrap()]);
        let o = mpcorr(&args);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let recs = record::read(&dir.path().join(RECORDS_FILE)).unwrap();
    assert_eq!(recs.len(), 3);
    assert_eq!(recs[1].workers, 3);
    for r in &recs[1..] {
        assert_eq!(r.config_hash, recs[0].config_hash);
        assert_eq!(r.grids, recs[0].grids);
        let a: Vec<u64> = r.scalars.values().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = recs[0].scalars.values().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn report_summarizes_and_deduplicates() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    for _ in 0..2 {
        let o = mpcorr(&["sweep", "--theta", "0.1,0.3", "--m", "2", "--n", "1000,10000", "--out", &out]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let o = mpcorr(&["report", "--out", &out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let md = fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert_eq!(md.matches("| sweep | sweep |").count(), 1, "{md}");
    assert!(md.contains("Log-log fits"));
    assert!(dir.path().join("series-sweep.sweep-m2.theta0.1.abs_deviation.csv").exists());

    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let o = mpcorr(&["report", empty.to_str().unwrap(), "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut count = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.file_name().unwrap().to_str().unwrap().starts_with("acc") {
            let c = mpcorr::ConfigBuilder::new().file(&p).unwrap().build().unwrap();
            assert!(c.time_limit.is_some(), "{}", p.display());
            count += 1;
        }
    }
    assert_eq!(count, 12);
}
