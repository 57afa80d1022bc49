use std::path::Path;
use std::process::Command;

use utilrank::cli::{main_with, parse_args, ParseError};

fn run<S: AsRef<str>>(args: &[S]) -> (i32, String, String) {
    let mut argv = vec!["utilrank"];
    argv.extend(args.iter().map(|s| s.as_ref()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = main_with(&argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn write_config(dir: &Path, extra: &str) -> String {
    let mut text = String::from("num_topics = 8\ntopic_a = 3\nlda_iterations = 40\n");
    for key in [
        "corpus", "dataset", "test_dataset", "index", "topic_model", "features", "utilities",
        "model", "linear_model", "run", "predictions", "report",
    ] {
        text.push_str(&format!("{key} = {}\n", dir.join(key).display()));
    }
    text.push_str(extra);
    let path = dir.join("cfg");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn ok<S: AsRef<str> + std::fmt::Debug>(args: &[S]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, 0, "{args:?}: {err}");
    out
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("train-reranker") && out.contains("--n-retrieve"));
    let (code, out, _) = run(&["train-reranker", "--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("lambdamart"));
    let (code, out, _) = run(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.contains("model format v1") && out.contains("index format v1"));
}

#[test]
fn usage_errors_exit_one() {
    let (code, _, err) = run(&["index", "--no-such-flag"]);
    assert_eq!(code, 1);
    assert!(err.contains("--no-such-flag"));
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run::<&str>(&[]).0, 1);
    let (code, _, err) = run(&["index", "--n-retrieve", "many"]);
    assert_eq!(code, 1);
    assert!(err.contains("--n-retrieve"));
    assert_eq!(run(&["index", "--context-size", "11"]).0, 1);
    assert_eq!(run(&["train-reranker", "forest"]).0, 1);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mystery_key = 3\n");
    let (code, _, err) = run(&["index", "--config", &cfg]);
    assert_eq!(code, 1);
    assert!(err.contains("mystery_key"));
}

#[test]
fn overrides_are_recorded() {
    let inv = parse_args(["utilrank", "train-reranker", "lambdamart", "--num-trees", "50"]).unwrap();
    assert_eq!(inv.command, "train-reranker");
    assert_eq!(inv.config.num_trees, 50);
    assert_eq!(inv.overrides, vec![("num_trees".to_string(), "50".to_string())]);
    let inv = parse_args(["utilrank", "train-lda", "--topics", "7", "--iters", "9", "--topic-a", "2", "--seed", "5"]).unwrap();
    assert_eq!((inv.config.num_topics, inv.config.lda_iterations, inv.config.seed), (7, 9, 5));
    assert!(matches!(parse_args(["utilrank", "--help"]), Err(ParseError::Display(_))));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let (code, _, err) = run(&["rerank", "--index", "/nonexistent/idx.json"]);
    assert_eq!(code, 2);
    assert!(err.contains("/nonexistent/idx.json"));
}

#[test]
fn full_flow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, "");
    let with = |args: &[&str]| -> Vec<String> {
        let mut v: Vec<String> = args.iter().map(|s| s.to_string()).collect();
        v.extend(["--config".to_string(), cfg.clone()]);
        v
    };

    ok(&with(&["make-synthetic", "--train-queries", "30", "--test-queries", "10"]));
    ok(&with(&["index"]));
    ok(&with(&["train-lda"]));
    assert!(ok(&with(&["label-utility"])).contains("300 pairs"));
    ok(&with(&["build-features"]));
    ok(&with(&["train-reranker", "lambdamart", "--num-trees", "20"]));
    ok(&with(&["train-reranker", "linear"]));

    let table = ok(&with(&["feature-importance"]));
    let shares: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect();
    assert_eq!(shares.len(), 14);
    assert!(shares.windows(2).all(|w| w[0] >= w[1]));
    assert!((shares.iter().sum::<f64>() - 1.0).abs() < 2e-3);

    ok(&with(&["rerank"]));
    let run_file = std::fs::read_to_string(d.join("run")).unwrap();
    assert_eq!(run_file.lines().count(), 100);
    assert!(run_file.lines().next().unwrap().ends_with(" utilrank"));

    ok(&with(&["infer", "k_shot", "--predictions", d.join("k.jsonl").to_str().unwrap()]));
    ok(&with(&["infer", "lambdamart"]));
    let k = format!("k_shot={}", d.join("k.jsonl").display());
    let l = format!("lambdamart={}", d.join("predictions").display());
    let table = ok(&with(&["evaluate", &k, &l]));
    assert!(table.contains("k_shot") && table.contains("lambdamart") && table.contains("accuracy"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report")).unwrap()).unwrap();
    assert_eq!(report["systems"].as_array().unwrap().len(), 2);

    let compare = ok(&with(&["compare"]));
    for s in ["zero_shot", "k_shot", "lambdamart", "linear_pairwise"] {
        assert!(compare.contains(s));
    }

    // misaligned prediction sets
    let preds = std::fs::read_to_string(d.join("k.jsonl")).unwrap();
    let short: String = preds.lines().skip(1).map(|l| format!("{l}\n")).collect();
    std::fs::write(d.join("short.jsonl"), short).unwrap();
    let s = format!("short={}", d.join("short.jsonl").display());
    let (code, _, err) = run(&with(&["evaluate", &s]));
    assert_eq!(code, 2);
    assert!(err.contains("misaligned"));
}

#[test]
fn split_passages_command() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("long.jsonl");
    let words: Vec<String> = (0..250).map(|i| format!("w{i}")).collect();
    std::fs::write(
        &input,
        format!("{}\n", serde_json::json!({"doc_id": "big", "text": words.join(" ")})),
    )
    .unwrap();
    let out = dir.path().join("passages.jsonl");
    let msg = ok(&[
        "split-passages",
        "--input",
        input.to_str().unwrap(),
        "--corpus",
        out.to_str().unwrap(),
    ]);
    assert!(msg.starts_with("3 passages"));
    let docs = utilrank::corpus::read_corpus(&out).unwrap();
    assert_eq!(docs[2].doc_id, "big#2");
    assert_eq!(docs[2].tokens.len(), 50);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_utilrank");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    assert_eq!(status(&["--help"]).status.code(), Some(0));
    let o = status(&["index", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bogus"));
    let o = status(&["index", "--corpus", "/nonexistent/c.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}
