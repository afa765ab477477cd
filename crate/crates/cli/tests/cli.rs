use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn semcom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semcom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fixture(dir: &Path) -> PathBuf {
    let out = semcom(&["fixture", "--out", dir.to_str().unwrap(), "--seed", "2"]);
    PathBuf::from(stdout(&out).trim())
}

#[test]
fn fixture_writes_a_loadable_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path());
    assert!(config.exists());
    for name in [
        "kg.tsv",
        "corpus.txt",
        "templates.tsv",
        "synonyms.tsv",
        "user0.tsv",
        "user1.tsv",
    ] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    assert_eq!(
        fs::read_to_string(dir.path().join("kg.tsv"))
            .unwrap()
            .lines()
            .count(),
        200
    );
}

#[test]
fn run_writes_csv_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path());
    let cfg = config.to_str().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    stdout(&semcom(&[
        "run",
        "--config",
        cfg,
        "--out",
        a.to_str().unwrap(),
        "--parallel",
        "3",
    ]));
    stdout(&semcom(&[
        "run",
        "--config",
        cfg,
        "--out",
        b.to_str().unwrap(),
        "--parallel",
        "1",
    ]));
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "pipeline,sweep,trials,sim_mean,bleu_mean,ter,bits_semantic,bits_fixed7,bits_huffman,seed"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 5);
    assert!(
        rows[0].starts_with("single_user_bsc,0.0,1000,1.0,1.0,0.0,"),
        "{}",
        rows[0]
    );
}

#[test]
fn run_prints_to_stdout_without_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path());
    let src = fs::read_to_string(&config).unwrap();
    let mut trimmed: String = src
        .lines()
        .filter(|l| !l.starts_with("output") && !l.starts_with("trials"))
        .map(|l| format!("{l}\n"))
        .collect();
    trimmed.push_str("trials = 20\n");
    fs::write(&config, trimmed).unwrap();
    let text = stdout(&semcom(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--no-correction",
    ]));
    assert!(text.starts_with("pipeline,sweep,"));
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().nth(1).unwrap().contains(",20,"));
}

#[test]
fn report_prints_corpus_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path());
    let text = stdout(&semcom(&["report", "--config", config.to_str().unwrap()]));
    let get = |key: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key}\t")))
            .unwrap_or_else(|| panic!("{key} missing from {text}"))
            .to_owned()
    };
    assert_eq!(get("messages"), "200");
    let h_m: f64 = get("H(M)").parse().unwrap();
    let h_s: f64 = get("H(S)").parse().unwrap();
    assert!(h_s <= h_m + 1e-9);
    let semantic: u64 = get("bits_semantic").parse().unwrap();
    let fixed: u64 = get("bits_fixed7").parse().unwrap();
    assert!(semantic < fixed);
}

#[test]
fn train_embeddings_saves_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture(dir.path());
    let src = fs::read_to_string(&config).unwrap();
    fs::write(&config, format!("{src}holdout = 20\n")).unwrap();
    let ckpt = dir.path().join("model.ckpt");
    let text = stdout(&semcom(&[
        "train-embeddings",
        "--config",
        config.to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
    ]));
    assert!(ckpt.exists());
    assert!(text.contains("train_triplets\t180"), "{text}");
    assert!(text.contains("hits@3\t"), "{text}");
}

#[test]
fn bad_config_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "pipeline = \"warp_drive\"\n").unwrap();
    let out = semcom(&["run", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");

    let missing = semcom(&[
        "run",
        "--config",
        dir.path().join("nope.toml").to_str().unwrap(),
    ]);
    assert!(!missing.status.success());
    assert!(!missing.stderr.is_empty());
}
