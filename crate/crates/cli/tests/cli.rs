use std::path::Path;
use std::process::{Command, Output};

use neurocomm::jscc::final_accuracy;
use neurocomm::paramfile::load_pipeline;
use neurocomm::seed;
use neurocomm::spkt::load_spkt;

fn neurocomm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurocomm"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = neurocomm(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn data(dir: &Path) {
    let common = ["--channels", "16", "--horizon", "20", "--count", "40", "--seed", "7"];
    ok(dir, &[&["gen-data"][..], &common, &["--out", "train.spkt"]].concat());
    ok(dir, &[&["gen-data"][..], &common, &["--offset", "5000", "--out", "test.spkt"]].concat());
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn gen_data_writes_a_loadable_reproducible_file() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "gen-data", "--classes", "2", "--channels", "64", "--horizon", "40", "--count", "200", "--seed", "7",
    ];
    ok(dir.path(), &[&args[..], &["--out", "a.spkt"]].concat());
    ok(dir.path(), &[&args[..], &["--out", "b.spkt"]].concat());
    let set = load_spkt(&dir.path().join("a.spkt")).unwrap();
    assert_eq!((set.channels(), set.horizon(), set.len(), set.class_count()), (64, 40, 200, 2));
    assert_eq!(
        std::fs::read(dir.path().join("a.spkt")).unwrap(),
        std::fs::read(dir.path().join("b.spkt")).unwrap()
    );
}

#[test]
fn invalid_density_is_a_config_error_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out = neurocomm(dir.path(), &["gen-data", "--density", "1.5", "--out", "x.spkt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--density"));
    assert!(!dir.path().join("x.spkt").exists());
}

#[test]
fn fl_sweep_covers_the_grid_with_a_provenance_header() {
    let dir = tempfile::tempdir().unwrap();
    data(dir.path());
    ok(
        dir.path(),
        &[
            "fl-train", "--data", "train.spkt", "--test", "test.spkt", "--delta-t", "1,10", "--delta-j", "1,8,80",
            "--rounds", "2", "--hidden", "2", "--repeats", "3", "--out", "fl.csv",
        ],
    );
    let csv = read(dir.path(), "fl.csv");
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# neurocomm fl-train "));
    assert!(header.contains("delta-j=1,8,80") && header.contains("seed=0") && header.contains("repeats=3"));
    assert_eq!(
        lines.next().unwrap(),
        "delta_t,delta_j,round,phase,wall_step,accuracy_mean,accuracy_rep1,accuracy_rep2,accuracy_rep3"
    );
    let curves: std::collections::BTreeSet<(String, String)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    assert_eq!(curves.len(), 6);
}

#[test]
fn config_file_values_sit_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    data(dir.path());
    std::fs::write(dir.path().join("run.cfg"), "# sweep\nrounds = 2\nhidden = 1\ndelta-t = 10\ndelta-j = 2\nrepeats = 1\nlr = 0.5\n").unwrap();
    ok(
        dir.path(),
        &["fl-train", "--config", "run.cfg", "--data", "train.spkt", "--test", "test.spkt", "--lr", "0.1", "--out", "fl.csv"],
    );
    let header = read(dir.path(), "fl.csv").lines().next().unwrap().to_string();
    assert!(header.contains(" rounds=2 ") && header.contains(" hidden=1 ") && header.contains(" lr=0.1 "));

    std::fs::write(dir.path().join("bad.cfg"), "round = 2\n").unwrap();
    let out = neurocomm(
        dir.path(),
        &["fl-train", "--config", "bad.cfg", "--data", "train.spkt", "--test", "test.spkt", "--out", "fl.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_schedules_and_missing_data_fail_before_training() {
    let dir = tempfile::tempdir().unwrap();
    data(dir.path());
    let out = neurocomm(
        dir.path(),
        &["fl-train", "--data", "train.spkt", "--test", "test.spkt", "--delta-t", "0", "--out", "fl.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = neurocomm(dir.path(), &["fl-train", "--data", "nope.spkt", "--test", "test.spkt", "--out", "fl.csv"]);
    assert_eq!(out.status.code(), Some(3));
    std::fs::write(dir.path().join("junk.spkt"), b"JUNK").unwrap();
    let out = neurocomm(dir.path(), &["jscc-train", "--data", "junk.spkt", "--out", "m.njsc"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("offset 0"));
    assert!(!dir.path().join("fl.csv").exists());
}

#[test]
fn non_integer_lane_count_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    data(dir.path());
    let out = neurocomm(dir.path(), &["jscc-train", "--data", "train.spkt", "--rate", "3/7", "--out", "m.njsc"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lanes"));
}

#[test]
fn jscc_runs_are_byte_reproducible_and_include_the_baseline() {
    let run = |dir: &Path| {
        data(dir);
        ok(
            dir,
            &[
                "jscc-train", "--data", "train.spkt", "--train-snr-db", "0", "--epochs", "1", "--baseline", "uncoded",
                "--out", "m/model.njsc", "--log", "m/train.csv",
            ],
        );
        ok(
            dir,
            &[
                "jscc-eval", "--model", "m/model.njsc", "--test", "test.spkt", "--snr-db", "-8", "--repeats", "2",
                "--baseline", "uncoded", "--out", "eval",
            ],
        );
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path());
    run(b.path());
    for f in [
        "m/model.njsc",
        "m/model.njsc.manifest",
        "m/model.njsc.uncoded",
        "m/train.csv",
        "eval/accuracy_vs_time.csv",
        "eval/accuracy_vs_snr.csv",
        "eval/plot.py",
    ] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let time = read(a.path(), "eval/accuracy_vs_time.csv");
    assert_eq!(time.lines().nth(1), Some("t,neurojscc,uncoded"));
    assert_eq!(time.lines().count(), 2 + 20);
    let snr = read(a.path(), "eval/accuracy_vs_snr.csv");
    assert_eq!(snr.lines().count(), 2 + 5);
    assert!(snr.lines().next().unwrap().contains("snr-grid=-12,-8,-4,0,6"));
}

#[test]
fn noiseless_sanity_run_matches_direct_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    data(dir.path());
    ok(dir.path(), &["jscc-train", "--data", "train.spkt", "--epochs", "1", "--out", "model.njsc"]);
    ok(
        dir.path(),
        &[
            "jscc-eval", "--model", "model.njsc", "--test", "test.spkt", "--snr-grid", "40", "--repeats", "3", "--seed",
            "4", "--out", "eval",
        ],
    );
    let (mut p, _) = load_pipeline(&dir.path().join("model.njsc")).unwrap();
    p.set_channel(None).unwrap();
    let test = load_spkt(&dir.path().join("test.spkt")).unwrap();
    let direct = (0..3)
        .map(|r| final_accuracy(&p, &test, seed::derive(4, seed::stream::REPEAT, r)).unwrap())
        .sum::<f64>()
        / 3.0;
    let csv = read(dir.path(), "eval/accuracy_vs_snr.csv");
    let row = csv.lines().nth(2).unwrap();
    let reported: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((reported - direct).abs() <= 0.01, "{reported} vs {direct}");
}
