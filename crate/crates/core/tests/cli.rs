use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_protorecon")).args(args).output().unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(cli(&["bogus"]).status.code(), Some(2));
    assert_eq!(cli(&["decode"]).status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let data = write(tmp.path(), "d.tsv", "id\tproto\tA\ns1\tp a\tp a\n");
    let out = cli(&["run", "--dataset", &data, "--lambda", "-1", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(cli(&["split", "--dataset", &data, "--ratios", "0.5,0.5,0.5"]).status.code(), Some(2));
}

#[test]
fn data_and_io_errors_exit_with_three() {
    let out = cli(&["eval", "--pred", "/nonexistent/pred.tsv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/pred.tsv"));
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.tsv", "id\tproto\tA\ns1\tp a\tp a\textra\n");
    let out = cli(&["ingest", "--dataset", &bad]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn eval_scores_a_prediction_file() {
    let tmp = tempfile::tempdir().unwrap();
    let pred = write(tmp.path(), "p.tsv", "id\tgold\tpred\ns1\tp a\tp a\ns2\tt i\tt e\n");
    let text = stdout(&["eval", "--pred", &pred]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ACC%\tTED\tTER\tFER\tBCFS");
    let row: Vec<&str> = lines[1].split('\t').collect();
    assert_eq!(&row[..3], ["50.0000", "0.5000", "0.2500"]);
}

#[test]
fn correlate_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let xy = write(tmp.path(), "xy.tsv", "x\ty\n1\t3\n2\t5\n4\t9\n");
    assert!(stdout(&["correlate", "--input", &xy, "--x", "x", "--y", "y"]).contains("3\t1.0000"));
    let a = write(tmp.path(), "a.tsv", "ACC%\tTER\n50\t0.2\n60\t0.1\n55\t0.15\n");
    let b = write(tmp.path(), "b.tsv", "ACC%\tTER\n40\t0.3\n45\t0.25\n42\t0.3\n");
    let text = stdout(&["compare", &a, &b, "--resamples", "1000"]);
    let acc = text.lines().find(|l| l.starts_with("ACC%")).unwrap();
    assert!(acc.contains("greater") && acc.contains("5.0000e-2"), "{acc}");
    let ter = text.lines().find(|l| l.starts_with("TER")).unwrap();
    assert!(ter.contains("less"), "{ter}");
    assert_eq!(text, stdout(&["compare", &a, &b, "--resamples", "1000"]));
}

#[test]
fn synth_split_and_ingest_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("s.tsv").display().to_string();
    let rules = stdout(&["synth", "--sets", "50", "--seed", "9", "--out", &data]);
    let first = std::fs::read(&data).unwrap();
    assert_eq!(rules, stdout(&["synth", "--sets", "50", "--seed", "9", "--out", &data]));
    assert_eq!(first, std::fs::read(&data).unwrap());
    let split = stdout(&["split", "--dataset", &data, "--seed", "4"]);
    assert_eq!(split, stdout(&["split", "--dataset", &data, "--seed", "4"]));
    assert_eq!(split.lines().filter(|l| !l.starts_with('#')).count(), 51);
    let summary = stdout(&["ingest", "--dataset", &data]);
    assert!(summary.contains("sets\t50"), "{summary}");
}

#[test]
fn train_decode_rerank_round() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n).display().to_string();
    let data = p("s.tsv");
    stdout(&["synth", "--sets", "60", "--seed", "2", "--out", &data]);
    let (recon, reflex) = (p("r.ckpt"), p("f.ckpt"));
    let log = stdout(&["train-recon", "--dataset", &data, "--preset", "synthetic", "--max-epochs", "1", "--out", &recon]);
    assert!(log.starts_with("epoch\t"), "{log}");
    stdout(&["train-reflex", "--dataset", &data, "--preset", "synthetic", "--max-epochs", "1", "--out", &reflex]);
    let beams = stdout(&["decode", "--model", &recon, "--dataset", &data, "--beam-size", "2"]);
    assert!(beams.lines().any(|l| l.starts_with("id\trank\ttokens\tm")));
    let reranked = stdout(&["rerank", "--recon", &recon, "--reflex", &reflex, "--dataset", &data, "--lambda", "2"]);
    let header = reranked.lines().find(|l| l.starts_with("id\t")).unwrap();
    assert!(header.ends_with("r\trerank_rank\ts"), "{header}");
    // swapped checkpoints are rejected
    let out = cli(&["rerank", "--recon", &reflex, "--reflex", &recon, "--dataset", &data, "--lambda", "2"]);
    assert_eq!(out.status.code(), Some(3));
}
