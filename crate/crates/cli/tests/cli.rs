use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossling"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

const SMALL: &str = r#"
[data]
train = "syn/train_a.tsv"
test = "syn/test_a.tsv"

[seeds]
runs = 2

[synth]
vocab_size = 40
num_topics = 2
num_train = 120
num_test = 40
toxic_lexicon_size = 4

[embedding]
dim = 8
epochs = 1
subsample_t = 0.0

[classifier]
heads = 2
num_blocks = 1
max_len = 12
epochs = 2
"#;

#[test]
fn missing_data_file_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["stats", "--data", "nope.tsv"], tmp.path());
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_config_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.toml"), "[embedding]\ndimension = 3\n").unwrap();
    let out = run(&["--config", "bad.toml", "synth"], tmp.path());
    assert_eq!(code(&out), 1);

    std::fs::write(tmp.path().join("neg.toml"), "[classifier]\ndropout_p = 1.5\n").unwrap();
    let out = run(&["--config", "neg.toml", "synth"], tmp.path());
    assert_eq!(code(&out), 1);

    assert_eq!(code(&run(&["no-such-command"], tmp.path())), 1);
    assert_eq!(code(&run(&["--help"], tmp.path())), 0);
}

#[test]
fn divergent_training_is_a_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("epochs = 1\n", "epochs = 1\nlr0 = 1e38\n");
    std::fs::write(tmp.path().join("exp.toml"), cfg).unwrap();
    assert_eq!(code(&run(&["--config", "exp.toml", "synth", "--out", "syn"], tmp.path())), 0);
    let out = run(&["--config", "exp.toml", "train-embed"], tmp.path());
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn end_to_end_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("exp.toml"), SMALL).unwrap();
    let c = ["--config", "exp.toml"];
    let ok = |args: &[&str]| {
        let out = run(args, dir);
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };

    ok(&[&c[..], &["synth", "--out", "syn"]].concat());
    for f in ["train_a.tsv", "test_a.tsv", "train_b.tsv", "test_b.tsv", "pairs.tsv"] {
        assert!(dir.join("syn").join(f).is_file(), "{f}");
    }
    ok(&[&c[..], &["stats", "--data", "syn/train_a.tsv", "--out", "st"]].concat());
    let stats = std::fs::read_to_string(dir.join("st/stats.json")).unwrap();
    assert!(stats.contains("vocab_size"));

    ok(&[&c[..], &["train-embed", "--out", "emb"]].concat());
    assert!(dir.join("emb/embedding/manifest.toml").is_file());
    ok(&[&c[..], &["train-clf", "--embedding", "emb/embedding", "--out", "clf"]].concat());

    let metrics = std::fs::read_to_string(dir.join("clf/metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("run,epoch,split,metric,value"));
    // epoch 0 eval rows, then 1 train + 3 eval rows per epoch, for 2 runs
    assert_eq!(lines.count(), 2 * (3 + 2 * 4));
    assert!(dir.join("clf/aggregate.csv").is_file());

    ok(&["eval", "--bundle", "clf/run0", "--data", "syn/test_a.tsv", "--out", "ev"]);
    let eval = std::fs::read_to_string(dir.join("ev/eval.csv")).unwrap();
    assert!(eval.contains("accuracy"));

    let tr = SMALL.replace("train_a", "train_b").replace("test_a", "test_b") + "\n[transfer]\ninit = \"xavier_fresh\"\n";
    std::fs::write(dir.join("tr.toml"), tr).unwrap();
    ok(&["--config", "tr.toml", "transfer", "--source", "clf/run0", "--mode", "fix_embedding", "--out", "tr"]);
    ok(&["translate", "--source", "clf/run0", "--target", "tr/run0", "--pairs", "syn/pairs.tsv", "--out", "rk"]);
    let ranks = std::fs::read_to_string(dir.join("rk/ranks.tsv")).unwrap();
    assert!(ranks.lines().count() > 1);

    // a bundle saved by a newer format version is rejected as a data error
    let manifest = dir.join("clf/run1/manifest.toml");
    let text = std::fs::read_to_string(&manifest).unwrap();
    std::fs::write(&manifest, text.replace("format_version = 1", "format_version = 99")).unwrap();
    let out = run(&["eval", "--bundle", "clf/run1", "--data", "syn/test_a.tsv", "--out", "ev2"], dir);
    assert_eq!(code(&out), 2);
}
