use std::path::Path;
use std::process::{Command, Output};

use segfuse::{read_label_map, write_label_map};
use segfuse_core::Segmentation;

/// Runs the binary with `cmd` split on whitespace.
fn segfuse(cmd: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segfuse")).args(cmd.split_whitespace()).output().expect("binary runs")
}

fn ok(cmd: &str) -> String {
    let out = segfuse(cmd);
    assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(cmd: &str) -> Option<i32> {
    segfuse(cmd).status.code()
}

/// A 7-band 24x20 synthetic image in `dir/img`.
fn synth(dir: &Path) -> (String, String) {
    let img = dir.join("img");
    ok(&format!("synth --width 24 --height 20 --classes 4 --seed 5 --out-dir {}", img.display()));
    let p = |name: &str| img.join(name).display().to_string();
    (p("manifest.txt"), p("truth.pgm"))
}

#[test]
fn segment_writes_one_map_per_band() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, _) = synth(dir.path());
    let out = dir.path().join("seg");
    ok(&format!("segment --image {manifest} --k 6 --per-band --seed 1 --out-dir {}", out.display()));
    let list = std::fs::read_to_string(out.join("members.txt")).unwrap();
    assert_eq!(list.lines().count(), 7);
    for name in list.lines() {
        let (m, _) = read_label_map(&out.join(name)).unwrap();
        assert_eq!((m.width(), m.height()), (24, 20));
    }
    let provenance = std::fs::read_to_string(out.join("provenance.csv")).unwrap();
    assert_eq!(provenance.lines().count(), 8);

    let whole = dir.path().join("whole");
    ok(&format!("segment --image {manifest} --k 4 --out-dir {}", whole.display()));
    assert_eq!(std::fs::read_to_string(whole.join("members.txt")).unwrap().lines().count(), 1);
}

#[test]
fn usage_errors_and_missing_inputs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display();
    let out = segfuse(&format!("segment --image {d}/nope.txt --k 3 --out-dir {d}"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.txt"));
    assert_eq!(code("fuse --bogus"), Some(2));
    assert_eq!(code("frobnicate"), Some(2));
    assert_eq!(code("fuse --members a.pgm --out x.pgm --lambda -1"), Some(2));
    assert_eq!(code("--help"), Some(0));
}

#[test]
fn runtime_failures_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display();
    std::fs::write(dir.path().join("a.csv"), "0,1\n1,0\n").unwrap();
    std::fs::write(dir.path().join("b.csv"), "0,1,1\n").unwrap();
    std::fs::write(dir.path().join("c.txt"), "ML 0 1\nML 1 2\nCL 0 2\n").unwrap();
    assert_eq!(code(&format!("fuse --members {d}/a.csv {d}/b.csv --out {d}/o.csv")), Some(1));
    let inconsistent =
        format!("fuse --mode sssf --members {d}/a.csv {d}/a.csv --constraints {d}/c.txt --out {d}/o.csv");
    assert_eq!(code(&inconsistent), Some(1));
}

#[test]
fn identical_members_fuse_to_themselves() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display();
    let m = Segmentation::from_labels(vec![0, 0, 1, 1, 2, 2, 0, 1, 2], 3, 3).unwrap();
    write_label_map(&dir.path().join("m.pgm"), &m, None).unwrap();
    ok(&format!(
        "fuse --mode usf --members {d}/m.pgm {d}/m.pgm {d}/m.pgm --beta 0.9 --T 1000 --seed 7 --out {d}/s.pgm"
    ));
    assert_eq!(read_label_map(&dir.path().join("s.pgm")).unwrap().0, m);
    let log = std::fs::read_to_string(dir.path().join("s.log.csv")).unwrap();
    assert!(log.starts_with("t,member,objective,best_entry,pixel,from,to\n"));
    assert!(log.lines().skip(1).all(|l| l.ends_with(",,,")));
    assert!(!dir.path().join("s.weights.csv").exists());
}

fn weight_column(text: &str) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn semi_supervised_fuse_writes_simplex_weights() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display();
    let (manifest, truth) = synth(dir.path());
    ok(&format!("segment --image {manifest} --k 4 --per-band --seed 2 --out-dir {d}/seg"));
    ok(&format!("constraints --truth {truth} --fraction 0.02 --seed 3 --out {d}/c.txt"));
    ok(&format!(
        "fuse --mode sssf --member-list {d}/seg/members.txt --constraints {d}/c.txt --lambda auto --classes 4 \
         --out {d}/s.csv"
    ));
    let weights = std::fs::read_to_string(dir.path().join("s.weights.csv")).unwrap();
    let w = weight_column(&weights);
    assert_eq!(w.len(), 7);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(w.iter().all(|&x| x >= 0.0));

    let table = ok(&format!("evaluate --truth {truth} --outputs {d}/s.csv {truth} {d}/seg/member_00.pgm"));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0].split(',').count(), 4);
    // the truth column scores 1 on every metric
    for l in &lines[1..] {
        assert_eq!(l.split(',').nth(2), Some("1"));
    }

    // frozen weights read back from the CSV
    ok(&format!(
        "fuse --mode sssf --member-list {d}/seg/members.txt --weights {d}/s.weights.csv --frozen --lambda 3.5 \
         --out {d}/f.pgm"
    ));
    let again = std::fs::read_to_string(dir.path().join("f.weights.csv")).unwrap();
    assert_eq!(weight_column(&again), w);
}

#[test]
fn config_files_feed_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display();
    let m = Segmentation::from_labels(vec![0, 1, 1, 0], 2, 2).unwrap();
    write_label_map(&dir.path().join("m.csv"), &m, None).unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, format!("mode = sssf\nmembers = {d}/m.csv {d}/m.csv\nT = 20\nbeta = 2.0\n")).unwrap();
    // beta 2.0 from the file is invalid; the flag replaces it
    assert_eq!(code(&format!("fuse --config {d}/run.conf --out {d}/o.csv")), Some(1));
    ok(&format!("fuse --config {d}/run.conf --out {d}/o.csv --beta 0.5"));
    assert!(dir.path().join("o.weights.csv").exists());

    std::fs::write(&conf, "not a pair\n").unwrap();
    assert_eq!(code(&format!("fuse --config {d}/run.conf")), Some(1));
    assert_eq!(code(&format!("fuse --config {d}/none.conf")), Some(2));
}

#[test]
fn experiment_writes_its_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().display();
    let (manifest, truth) = synth(dir.path());
    let stdout = ok(&format!(
        "experiment --image {manifest} --truth {truth} --classes 4 --train-rows 0:10 --test-rows 10:20 --T 200 \
         --out-dir {d}/exp"
    ));
    assert_eq!(stdout, std::fs::read_to_string(dir.path().join("exp/report.csv")).unwrap());
    assert!(stdout.starts_with("phase,metric,average_base,usf,sssf\n"));
    let (t, _) = read_label_map(&dir.path().join("exp/test_sssf.pgm")).unwrap();
    assert_eq!((t.width(), t.height()), (24, 10));
}
