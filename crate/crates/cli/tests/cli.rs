//! End-to-end tests of the command-line interface: subcommand wiring, exit
//! codes, output files, and manifest-driven reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_slotalign")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("spawn slotalign")
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("exit code")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

/// A path graph on three nodes and its copy relabeled by 0->2, 1->0, 2->1,
/// with features that identify each node pair.
fn write_p3(dir: &Path) -> [PathBuf; 5] {
    let s_edges = dir.join("s.edges");
    let s_feats = dir.join("s.feats");
    let t_edges = dir.join("t.edges");
    let t_feats = dir.join("t.feats");
    let anchors = dir.join("anchors.txt");
    fs::write(&s_edges, "n 3\n0 1\n1 2\n").unwrap();
    fs::write(&s_feats, "3 2\n1 0\n0 1\n1 1\n").unwrap();
    fs::write(&t_edges, "n 3\n0 1\n0 2\n").unwrap();
    fs::write(&t_feats, "3 2\n0 1\n1 1\n1 0\n").unwrap();
    fs::write(&anchors, "0 2\n1 0\n2 1\n").unwrap();
    [s_edges, s_feats, t_edges, t_feats, anchors]
}

fn hash01(i: u64, j: u64) -> f64 {
    let mut z = i
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(j.wrapping_mul(0xbf58476d1ce4e5b9))
        .wrapping_add(0x94d049bb133111eb);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// A deterministic 30-node graph: a ring plus chords, with hashed features.
fn write_ring30(dir: &Path) -> [PathBuf; 2] {
    let n = 30;
    let edges_path = dir.join("g.edges");
    let feats_path = dir.join("g.feats");
    let mut edges = format!("n {n}\n");
    for i in 0..n {
        edges.push_str(&format!("{} {}\n", i, (i + 1) % n));
    }
    for i in 0..n {
        for j in (i + 2)..n {
            if hash01(1000 + i as u64, j as u64) < 0.08 && (i, j) != (0, n - 1) {
                edges.push_str(&format!("{i} {j}\n"));
            }
        }
    }
    fs::write(&edges_path, edges).unwrap();
    let d = 12;
    let mut feats = format!("{n} {d}\n");
    for i in 0..n {
        let row: Vec<String> = (0..d)
            .map(|j| format!("{}", hash01(i as u64, j as u64)))
            .collect();
        feats.push_str(&row.join(" "));
        feats.push('\n');
    }
    fs::write(&feats_path, feats).unwrap();
    [edges_path, feats_path]
}

fn align_p3(dir: &Path, out: &Path, extra: &[&str]) -> Output {
    let [s_edges, s_feats, t_edges, t_feats, anchors] = write_p3(dir);
    let mut args = vec![
        "align",
        "--source-edges",
        path_str(&s_edges),
        "--source-feats",
        path_str(&s_feats),
        "--target-edges",
        path_str(&t_edges),
        "--target-feats",
        path_str(&t_feats),
        "--anchors",
        path_str(&anchors),
        "-K",
        "2",
        "--tau",
        "0.1",
        "--out-dir",
        path_str(out),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn align_p3_recovers_the_permutation() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let output = align_p3(dir.path(), &out, &[]);
    let exit = code(&output);
    assert!(
        exit == 0 || exit == 4,
        "unexpected exit {exit}: {}",
        stderr(&output)
    );
    let metrics = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert!(metrics.contains("Hit@1: 100.00"), "metrics:\n{metrics}");
    assert!(out.join("matches.csv").exists());
    assert!(out.join("trace.csv").exists());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("mode = slotalign"));
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,objective,alpha_step_norm,pi_step_norm\n"));
}

#[test]
fn align_missing_target_edges_exits_2_with_usage() {
    let dir = TempDir::new().unwrap();
    let [s_edges, ..] = write_p3(dir.path());
    let output = run(&["align", "--source-edges", path_str(&s_edges)]);
    assert_eq!(code(&output), 2);
    let err = stderr(&output);
    assert!(err.contains("--target-edges"), "stderr:\n{err}");
    assert!(err.to_lowercase().contains("usage"), "stderr:\n{err}");
}

#[test]
fn align_frozen_single_basis_records_gwd_mode() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let [edges, _] = write_ring30(dir.path());
    let output = run(&[
        "align",
        "--source-edges",
        path_str(&edges),
        "--target-edges",
        path_str(&edges),
        "-K",
        "1",
        "--freeze-weights",
        "--init",
        "uniform",
        "--out-dir",
        path_str(&out),
    ]);
    let exit = code(&output);
    assert!(
        exit == 0 || exit == 4,
        "unexpected exit {exit}: {}",
        stderr(&output)
    );
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("mode = gwd"), "manifest:\n{manifest}");
    assert!(manifest.contains("freeze_weights = true"));
    assert!(manifest.contains("num_bases = 1"));
}

#[test]
fn align_exhausted_budget_exits_4_with_results() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let output = align_p3(dir.path(), &out, &["--kmax", "1"]);
    assert_eq!(code(&output), 4, "stderr:\n{}", stderr(&output));
    assert!(out.join("matches.csv").exists());
    assert!(out.join("metrics.txt").exists());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("converged = false"));
    assert!(manifest.contains("iterations = 1"));
}

#[test]
fn align_manifest_rerun_reproduces_outputs_bitwise() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let output = align_p3(dir.path(), &out, &["--dump-coupling"]);
    let exit = code(&output);
    assert!(exit == 0 || exit == 4, "unexpected exit {exit}");

    let names = ["matches.csv", "trace.csv", "metrics.txt", "coupling.csv"];
    let before: Vec<Vec<u8>> = names.iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
    let manifest_path = out.join("manifest.txt");

    let rerun = run(&["align", "--manifest", path_str(&manifest_path)]);
    let exit = code(&rerun);
    assert!(exit == 0 || exit == 4, "rerun stderr:\n{}", stderr(&rerun));
    for (name, old) in names.iter().zip(&before) {
        let new = fs::read(out.join(name)).unwrap();
        assert_eq!(&new, old, "{name} changed across the manifest rerun");
    }
}

#[test]
fn align_manifest_rerun_rejects_modified_inputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let output = align_p3(dir.path(), &out, &[]);
    let exit = code(&output);
    assert!(exit == 0 || exit == 4, "unexpected exit {exit}");

    fs::write(dir.path().join("s.feats"), "3 2\n1 0\n0 1\n1 0.5\n").unwrap();
    let manifest_path = out.join("manifest.txt");
    let rerun = run(&["align", "--manifest", path_str(&manifest_path)]);
    assert_eq!(code(&rerun), 3, "stderr:\n{}", stderr(&rerun));
    assert!(stderr(&rerun).contains("digest mismatch"));
}

#[test]
fn align_manifest_conflicts_with_direct_flags() {
    let dir = TempDir::new().unwrap();
    let [s_edges, ..] = write_p3(dir.path());
    let output = run(&[
        "align",
        "--manifest",
        "whatever.txt",
        "--source-edges",
        path_str(&s_edges),
    ]);
    assert_eq!(code(&output), 2);
}

#[test]
fn perturb_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let [edges, feats] = write_ring30(dir.path());
    let run_once = |out: &Path| {
        let output = run(&[
            "perturb",
            "--edges",
            path_str(&edges),
            "--feats",
            path_str(&feats),
            "--edge-ratio",
            "0.2",
            "--feature-op",
            "permute",
            "--feature-ratio",
            "0.5",
            "--seed",
            "7",
            "--out-dir",
            path_str(out),
        ]);
        assert_eq!(code(&output), 0, "stderr:\n{}", stderr(&output));
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_once(&out_a);
    run_once(&out_b);
    for name in ["target.edges", "target.feats", "anchors.txt"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identically seeded runs");
    }
}

#[test]
fn perturb_identity_keeps_the_graph_size() {
    let dir = TempDir::new().unwrap();
    let [edges, feats] = write_ring30(dir.path());
    let out = dir.path().join("out");
    let output = run(&[
        "perturb",
        "--edges",
        path_str(&edges),
        "--feats",
        path_str(&feats),
        "--edge-ratio",
        "0",
        "--feature-op",
        "none",
        "--seed",
        "3",
        "--out-dir",
        path_str(&out),
    ]);
    assert_eq!(code(&output), 0, "stderr:\n{}", stderr(&output));
    let original = fs::read_to_string(&edges).unwrap();
    let relabeled = fs::read_to_string(out.join("target.edges")).unwrap();
    assert_eq!(original.lines().count(), relabeled.lines().count());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("edge_ratio = 0"));
    assert!(manifest.contains("feature_op = none"));
}

#[test]
fn perturb_truncate_all_columns_exits_2() {
    let dir = TempDir::new().unwrap();
    let [edges, feats] = write_ring30(dir.path());
    let output = run(&[
        "perturb",
        "--edges",
        path_str(&edges),
        "--feats",
        path_str(&feats),
        "--feature-op",
        "truncate",
        "--feature-ratio",
        "1.0",
        "--out-dir",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(code(&output), 2, "stderr:\n{}", stderr(&output));
}

#[test]
fn eval_scores_a_dumped_coupling() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let output = align_p3(dir.path(), &out, &["--dump-coupling"]);
    let exit = code(&output);
    assert!(exit == 0 || exit == 4, "unexpected exit {exit}");
    let metrics_out = dir.path().join("eval.txt");
    let eval = run(&[
        "eval",
        "--coupling",
        path_str(&out.join("coupling.csv")),
        "--anchors",
        path_str(&dir.path().join("anchors.txt")),
        "--ks",
        "1,5",
        "--out",
        path_str(&metrics_out),
    ]);
    assert_eq!(code(&eval), 0, "stderr:\n{}", stderr(&eval));
    let text = stdout(&eval);
    assert!(text.contains("Hit@1: 100.00"), "stdout:\n{text}");
    assert!(text.contains("Hit@5: 100.00"), "stdout:\n{text}");
    let written = fs::read_to_string(&metrics_out).unwrap();
    assert!(written.contains("Hit@1: 100.00"));
}

#[test]
fn bench_edge_sweep_level_zero_is_near_perfect() {
    let dir = TempDir::new().unwrap();
    let [edges, feats] = write_ring30(dir.path());
    let out = dir.path().join("out");
    let output = run(&[
        "bench",
        "--edges",
        path_str(&edges),
        "--feats",
        path_str(&feats),
        "--sweep",
        "edge",
        "--levels",
        "0",
        "--seed",
        "5",
        "--out-dir",
        path_str(&out),
    ]);
    let exit = code(&output);
    assert!(exit == 0 || exit == 4, "stderr:\n{}", stderr(&output));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(lines.next(), Some("level,hit1,hit5,hit10,hit30,seconds"));
    let row = lines.next().expect("level row");
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells[0], "0");
    let hit1: f64 = cells[1].parse().unwrap();
    assert!(hit1 >= 95.0, "Hit@1 at level 0 was {hit1}");
}

#[test]
fn bench_permute_sweep_is_invariant_across_levels() {
    let dir = TempDir::new().unwrap();
    let [edges, feats] = write_ring30(dir.path());
    let out = dir.path().join("out");
    let output = run(&[
        "bench",
        "--edges",
        path_str(&edges),
        "--feats",
        path_str(&feats),
        "--sweep",
        "permute",
        "--levels",
        "0,30,70",
        "--init",
        "uniform",
        "--seed",
        "9",
        "--out-dir",
        path_str(&out),
    ]);
    let exit = code(&output);
    assert!(exit == 0 || exit == 4, "stderr:\n{}", stderr(&output));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let hits: Vec<&str> = results
        .lines()
        .skip(1)
        .map(|line| line.split(',').nth(1).expect("hit1 cell"))
        .collect();
    assert_eq!(hits.len(), 3);
    assert_eq!(hits[0], hits[1], "results:\n{results}");
    assert_eq!(hits[1], hits[2], "results:\n{results}");
}

#[test]
fn bench_unknown_sweep_exits_2() {
    let dir = TempDir::new().unwrap();
    let [edges, feats] = write_ring30(dir.path());
    let output = run(&[
        "bench",
        "--edges",
        path_str(&edges),
        "--feats",
        path_str(&feats),
        "--sweep",
        "rewire",
    ]);
    assert_eq!(code(&output), 2, "stderr:\n{}", stderr(&output));
}

#[test]
fn bench_rejects_out_of_range_levels() {
    let dir = TempDir::new().unwrap();
    let [edges, feats] = write_ring30(dir.path());
    let output = run(&[
        "bench",
        "--edges",
        path_str(&edges),
        "--feats",
        path_str(&feats),
        "--sweep",
        "edge",
        "--levels",
        "0,150",
    ]);
    assert_eq!(code(&output), 2, "stderr:\n{}", stderr(&output));
}

#[test]
fn align_missing_input_file_exits_3() {
    let dir = TempDir::new().unwrap();
    let [s_edges, ..] = write_p3(dir.path());
    let output = run(&[
        "align",
        "--source-edges",
        path_str(&s_edges),
        "--target-edges",
        path_str(&dir.path().join("nope.edges")),
        "--out-dir",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(code(&output), 3, "stderr:\n{}", stderr(&output));
}

#[test]
fn align_invalid_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let [s_edges, s_feats, t_edges, t_feats, _] = write_p3(dir.path());
    let output = run(&[
        "align",
        "--source-edges",
        path_str(&s_edges),
        "--source-feats",
        path_str(&s_feats),
        "--target-edges",
        path_str(&t_edges),
        "--target-feats",
        path_str(&t_feats),
        "--tau=-1",
        "--out-dir",
        path_str(&dir.path().join("out")),
    ]);
    assert_eq!(code(&output), 2, "stderr:\n{}", stderr(&output));
    assert!(stderr(&output).contains("error"), "stderr:\n{}", stderr(&output));
}
