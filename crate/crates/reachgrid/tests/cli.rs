//! Integration tests for the `reachgrid` binary: exit codes, determinism
//! across reruns and worker counts, and artifact compatibility checks.

use reachgrid::fixture::{write_tdrive_dir, SynthConfig};
use reachgrid::hash::sha256_file;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_reachgrid")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn binary")
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn binary")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    raw: PathBuf,
    dump: PathBuf,
}

fn fixture(records_per_taxi: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let raw = root.join("raw");
    write_tdrive_dir(
        &raw,
        &SynthConfig {
            taxis: 3,
            records_per_taxi,
            city_span_tiles: 256,
            road_spacing_tiles: 16,
            seed: 5,
            ..Default::default()
        },
    )
    .unwrap();
    Fixture {
        _dir: dir,
        root,
        raw,
        dump: PathBuf::new(),
    }
}

fn ingested(records_per_taxi: usize) -> Fixture {
    let mut f = fixture(records_per_taxi);
    f.dump = f.root.join("traj.tsv");
    let out = run(&[
        "ingest",
        "--input",
        f.raw.to_str().unwrap(),
        "--out",
        f.dump.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    f
}

fn summarize(f: &Fixture, out_name: &str, extra: &[&str]) -> (PathBuf, Output) {
    let out_path = f.root.join(out_name);
    let mut args = vec![
        "summarize".to_string(),
        "--traj".into(),
        f.dump.display().to_string(),
        "--out".into(),
        out_path.display().to_string(),
        "--r".into(),
        "4".into(),
        "--h-max".into(),
        "6".into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run(&args);
    (out_path, out)
}

#[test]
fn missing_input_dir_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "ingest",
        "--input",
        dir.path().join("nope").to_str().unwrap(),
        "--out",
        dir.path().join("x.tsv").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn window_excluding_everything_warns_and_succeeds() {
    let f = fixture(50);
    let dump = f.root.join("traj.tsv");
    let out = run(&[
        "ingest",
        "--input",
        f.raw.to_str().unwrap(),
        "--out",
        dump.to_str().unwrap(),
        "--t0",
        "0",
        "--delta-t",
        "10",
    ]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert_eq!(std::fs::read_to_string(&dump).unwrap(), "");
}

#[test]
fn zero_radius_is_usage_error() {
    let f = ingested(60);
    let (_, out) = summarize(&f, "x.rsum", &["--r", "0"]);
    // later --r wins in clap; exit must be 2
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_scheme_is_usage_error() {
    let f = ingested(60);
    let (_, out) = summarize(&f, "x.rsum", &["--scheme", "quantile"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn worker_count_does_not_change_archive_hash() {
    let f = ingested(400);
    let (p1, o1) = summarize(&f, "w1.rsum", &["--workers", "1"]);
    let (p4, o4) = summarize(&f, "w4.rsum", &["--workers", "4"]);
    assert_eq!(code(&o1), 0);
    assert_eq!(code(&o4), 0);
    assert_eq!(sha256_file(&p1).unwrap(), sha256_file(&p4).unwrap());
}

#[test]
fn rerun_is_byte_identical() {
    let f = ingested(300);
    let (p, o) = summarize(&f, "a.rsum", &[]);
    assert_eq!(code(&o), 0);
    let first = sha256_file(&p).unwrap();
    let (_, o2) = summarize(&f, "a.rsum", &[]);
    assert_eq!(code(&o2), 0);
    assert_eq!(sha256_file(&p).unwrap(), first);
}

#[test]
fn threads_env_sets_default_workers() {
    let f = ingested(200);
    let out_path = f.root.join("env.rsum");
    let out = run_env(
        &[
            "summarize",
            "--traj",
            f.dump.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
            "--r",
            "4",
        ],
        &[("REACHGRID_THREADS", "3")],
    );
    assert_eq!(code(&out), 0);
    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(reachgrid::cli::manifest_path(&out_path)).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["parameters"]["workers"], "3");
}

#[test]
fn embed_with_mismatched_radius_is_artifact_error() {
    let f = ingested(400);
    let (rsum4, o) = summarize(&f, "r4.rsum", &[]);
    assert_eq!(code(&o), 0);
    // Model trained on r=4 summaries.
    let model = f.root.join("model.cae");
    let out = run(&[
        "train",
        "--archive",
        rsum4.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--epochs",
        "1",
        "--d-r",
        "4",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    // Archive with a different radius.
    let r6 = f.root.join("r6.rsum");
    let out = run(&[
        "summarize",
        "--traj",
        f.dump.to_str().unwrap(),
        "--out",
        r6.to_str().unwrap(),
        "--r",
        "6",
    ]);
    assert_eq!(code(&out), 0);

    let out = run(&[
        "embed",
        "--model",
        model.to_str().unwrap(),
        "--archive",
        r6.to_str().unwrap(),
        "--out",
        f.root.join("e.emb").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("r"));
}

#[test]
fn bench_requires_baseline_worker() {
    let f = ingested(150);
    let out = run(&[
        "bench",
        "--traj",
        f.dump.to_str().unwrap(),
        "--out",
        f.root.join("b.csv").to_str().unwrap(),
        "--workers",
        "2,4",
        "--r",
        "4",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bench_emits_csv_with_baseline_speedup() {
    let f = ingested(300);
    let csv_path = f.root.join("bench.csv");
    let out = run(&[
        "bench",
        "--traj",
        f.dump.to_str().unwrap(),
        "--out",
        csv_path.to_str().unwrap(),
        "--workers",
        "1,2,4",
        "--r",
        "4",
        "--h-max",
        "6",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "workers,wall_s,speedup,efficiency,events_per_s");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("1,"));
    let speedup: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(speedup, 1.0);
}

#[test]
fn train_embed_dimension_flows_through() {
    let f = ingested(400);
    let (rsum, o) = summarize(&f, "s.rsum", &[]);
    assert_eq!(code(&o), 0);
    let model = f.root.join("m16.cae");
    let out = run(&[
        "train",
        "--archive",
        rsum.to_str().unwrap(),
        "--out",
        model.to_str().unwrap(),
        "--epochs",
        "1",
        "--d-r",
        "16",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let emb = f.root.join("e.emb");
    let out = run(&[
        "embed",
        "--model",
        model.to_str().unwrap(),
        "--archive",
        rsum.to_str().unwrap(),
        "--out",
        emb.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let (vectors, manifest) = reachgrid::store::read_embeddings_file(&emb).unwrap();
    assert_eq!(manifest.d_r, 16);
    assert!(vectors.iter().all(|v| v.values.len() == 16));
    // Training log exists next to the model by default.
    assert!(Path::new(&format!("{}.train_log.csv", model.display())).exists());
    let log = std::fs::read_to_string(format!("{}.train_log.csv", model.display())).unwrap();
    assert!(log.starts_with("epoch,recon_mse,contractive,total\n"));
}

#[test]
fn corrupt_archive_is_artifact_error() {
    let f = ingested(100);
    let bogus = f.root.join("bogus.rsum");
    std::fs::write(&bogus, b"NOTANARCHIVE\nend_header\n").unwrap();
    let out = run(&[
        "train",
        "--archive",
        bogus.to_str().unwrap(),
        "--out",
        f.root.join("m.cae").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    // Unknown subcommand is a usage error.
    assert_eq!(code(&run(&["frobnicate"])), 2);
}
