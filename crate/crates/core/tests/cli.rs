use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use evpred::corpus::tokenize;
use evpred::eval::ParaphraseInventory;

fn evpred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evpred"))
        .args(args)
        .output()
        .expect("run evpred")
}

fn ok(args: &[&str]) -> String {
    let out = evpred(args);
    assert!(
        out.status.success(),
        "evpred {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    evpred(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

fn write(path: &Path, text: &str) -> PathBuf {
    fs::write(path, text).unwrap();
    path.to_path_buf()
}

/// Four pairs forming a cycle, repeated; every sentence has four tokens.
fn toy_corpus(dir: &Path, name: &str, copies: usize) -> PathBuf {
    let lines = [
        "take out the pan\tput in the cake",
        "put in the cake\tbake it a while",
        "bake it a while\tlet it cool down",
        "let it cool down\ttake out the pan",
    ];
    let text: String = (0..copies)
        .flat_map(|_| lines.iter().map(|l| format!("{l}\n")))
        .collect();
    write(&dir.join(name), &text)
}

fn train_args<'a>(train: &'a str, dev: &'a str, out: &'a str, epochs: &'a str) -> Vec<&'a str> {
    vec![
        "train",
        "--quiet",
        "--train",
        train,
        "--dev",
        dev,
        "--out",
        out,
        "--layers",
        "1",
        "--hidden",
        "16",
        "--embed-dim",
        "8",
        "--dropout",
        "0",
        "--batch",
        "4",
        "--lr",
        "0.02",
        "--epochs",
        epochs,
        "--seed",
        "3",
    ]
}

#[test]
fn split_descript_counts() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = (0..29_150).map(|i| format!("s{i}\tt{i}\n")).collect();
    let input = write(&dir.path().join("big.tsv"), &text);
    let out = ok(&["split", p(&input)]);
    assert_eq!(out, "train=23320\ndev=2915\ntest=2915\n");
    assert_eq!(line_count(&dir.path().join("big.train.tsv")), 23_320);
    assert_eq!(line_count(&dir.path().join("big.dev.tsv")), 2_915);
    assert_eq!(line_count(&dir.path().join("big.test.tsv")), 2_915);
    let dev = fs::read_to_string(dir.path().join("big.dev.tsv")).unwrap();
    assert!(dev.starts_with("s4\tt4\ns14\tt14\n"));
    assert_eq!(
        fs::read_to_string(dir.path().join("big.counts.txt")).unwrap(),
        "train=23320\ndev=2915\ntest=2915\n"
    );
}

#[test]
fn split_random_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = (0..97).map(|i| format!("s{i}\tt{i}\n")).collect();
    let input = write(&dir.path().join("c.tsv"), &text);
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        ok(&[
            "split",
            p(&input),
            "--mode",
            "random",
            "--seed",
            "9",
            "--out-dir",
            p(&out_dir),
        ]);
        outputs.push(["train", "dev", "test"].map(|part| fs::read(out_dir.join(format!("c.{part}.tsv"))).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let out = ok(&[
        "split",
        p(&input),
        "--mode",
        "random",
        "--out-dir",
        p(&dir.path().join("c")),
    ]);
    assert_eq!(out, "train=77\ndev=10\ntest=10\n");
}

#[test]
fn split_empty_and_malformed() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(&dir.path().join("empty.tsv"), "");
    assert_eq!(ok(&["split", p(&empty)]), "train=0\ndev=0\ntest=0\n");
    for part in ["train", "dev", "test"] {
        assert_eq!(fs::read(dir.path().join(format!("empty.{part}.tsv"))).unwrap(), b"");
    }
    let bad = write(&dir.path().join("bad.tsv"), "a\tb\nno tab here\n");
    let out = evpred(&["split", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.tsv:2"));
}

#[test]
fn argument_errors_exit_2() {
    assert_eq!(code(&["train", "--layers", "many"]), 2);
    assert_eq!(code(&["nonsense"]), 2);
    assert_eq!(code(&["train", "--quiet"]), 2);
    assert_eq!(code(&["--version"]), 0);
}

#[test]
fn train_smoke_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let train = toy_corpus(dir.path(), "train.tsv", 2);
    let dev = toy_corpus(dir.path(), "dev.tsv", 1);
    let runs: Vec<PathBuf> = ["r1", "r2"].iter().map(|r| dir.path().join(r)).collect();
    for run in &runs {
        let out = ok(&train_args(p(&train), p(&dev), p(run), "1"));
        assert!(out.starts_with("best_epoch=1\n"));
    }
    let history = fs::read_to_string(runs[0].join("history.tsv")).unwrap();
    assert_eq!(history.lines().count(), 2);
    assert!(history.starts_with("epoch\ttrain_loss\tdev_bleu\n1\t"));
    for file in ["history.tsv", "checkpoint.evp", "vocab.txt"] {
        assert_eq!(
            fs::read(runs[0].join(file)).unwrap(),
            fs::read(runs[1].join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }

    let configs: Vec<String> = runs
        .iter()
        .map(|r| fs::read_to_string(r.join("config.txt")).unwrap().replace(p(r), "RUN"))
        .collect();
    assert_eq!(configs[0], configs[1]);

    // The written config reproduces the run on its own.
    let rerun = dir.path().join("r3");
    let config = fs::read_to_string(runs[0].join("config.txt")).unwrap();
    let config = write(&dir.path().join("cfg.txt"), &config.replace(p(&runs[0]), p(&rerun)));
    ok(&["train", "--quiet", "--config", p(&config)]);
    assert_eq!(
        fs::read(runs[0].join("checkpoint.evp")).unwrap(),
        fs::read(rerun.join("checkpoint.evp")).unwrap()
    );
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("cfg.txt"), "layers=2\nwhat=ever\n");
    let out = evpred(&["train", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cfg.txt:2"));
}

#[test]
fn train_predict_evaluate_compose() {
    let dir = tempfile::tempdir().unwrap();
    let train = toy_corpus(dir.path(), "train.tsv", 4);
    let dev = toy_corpus(dir.path(), "dev.tsv", 1);
    let run = dir.path().join("run");
    let summary = ok(&train_args(p(&train), p(&dev), p(&run), "30"));
    let best: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("best_dev_bleu="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(best > 0.5, "dev BLEU too low to make the comparison meaningful: {best}");

    let ckpt = run.join("checkpoint.evp");
    let vocab = run.join("vocab.txt");
    let preds = dir.path().join("dev.pred");
    ok(&[
        "predict",
        "--checkpoint",
        p(&ckpt),
        "--vocab",
        p(&vocab),
        "--input",
        p(&dev),
        "--output",
        p(&preds),
    ]);
    assert_eq!(line_count(&preds), 4);
    let threaded = ok(&[
        "predict",
        "--checkpoint",
        p(&ckpt),
        "--vocab",
        p(&vocab),
        "--input",
        p(&dev),
        "--workers",
        "3",
    ]);
    assert_eq!(threaded, fs::read_to_string(&preds).unwrap());

    let report = ok(&["evaluate", "--predictions", p(&preds), "--pairs", p(&dev)]);
    let bleu: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("bleu="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((bleu - best).abs() < 1e-9);
    assert!(!report.contains("accuracy"));
}

#[test]
fn predict_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let train = toy_corpus(dir.path(), "train.tsv", 1);
    let run = dir.path().join("run");
    ok(&train_args(p(&train), p(&train), p(&run), "1"));
    let ckpt = run.join("checkpoint.evp");
    let vocab = run.join("vocab.txt");

    let empty = write(&dir.path().join("empty.txt"), "");
    let out = ok(&[
        "predict",
        "--checkpoint",
        p(&ckpt),
        "--vocab",
        p(&vocab),
        "--input",
        p(&empty),
    ]);
    assert_eq!(out, "");

    let sources = write(
        &dir.path().join("src.txt"),
        "take out the pan\n\nunknown words here\nbake it\n",
    );
    let out = ok(&[
        "predict",
        "--checkpoint",
        p(&ckpt),
        "--vocab",
        p(&vocab),
        "--input",
        p(&sources),
    ]);
    assert_eq!(out.lines().count(), 4);
    assert_eq!(out.lines().nth(1), Some(""));

    let other = write(&dir.path().join("other_vocab.txt"), "<pad>\n<unk>\n<s>\n</s>\nzzz\n");
    assert_eq!(
        code(&[
            "predict",
            "--checkpoint",
            p(&ckpt),
            "--vocab",
            p(&other),
            "--input",
            p(&sources)
        ]),
        3
    );
    let mut bytes = fs::read(&ckpt).unwrap();
    let n = bytes.len();
    bytes.truncate(n - 3);
    let broken = dir.path().join("broken.evp");
    fs::write(&broken, bytes).unwrap();
    assert_eq!(
        code(&[
            "predict",
            "--checkpoint",
            p(&broken),
            "--vocab",
            p(&vocab),
            "--input",
            p(&sources)
        ]),
        3
    );
}

#[test]
fn overfit_checkpoint_reproduces_target() {
    let dir = tempfile::tempdir().unwrap();
    let pair = write(
        &dir.path().join("one.tsv"),
        "crack the eggs into a bowl\twhisk the eggs with sugar\n",
    );
    let run = dir.path().join("run");
    ok(&train_args(p(&pair), p(&pair), p(&run), "60"));
    let out = ok(&[
        "predict",
        "--checkpoint",
        p(&run.join("checkpoint.evp")),
        "--vocab",
        p(&run.join("vocab.txt")),
        "--input",
        p(&pair),
    ]);
    assert_eq!(out, "whisk the eggs with sugar\n");
}

#[test]
fn evaluate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let sources = write(
        &dir.path().join("src.txt"),
        "put cake in oven\nwait a bit\nturn on the shower\n",
    );
    let refs = write(
        &dir.path().join("ref.txt"),
        "remove the cake now\nlet it cool down\ndry off with towel\n",
    );
    let out = ok(&[
        "evaluate",
        "--predictions",
        p(&refs),
        "--references",
        p(&refs),
        "--sources",
        p(&sources),
    ]);
    assert!(out.contains("\nbleu=1.0\n"));
    assert!(out.contains("bucket.le5.pairs=3\n"));
    assert!(!out.contains("accuracy="));

    let inventory = write(
        &dir.path().join("inv.tsv"),
        "baking\ttake_out\tremove the cake now\nbaking\ttake_out\ttake it from the oven\nbaking\tcool\tlet it cool down\n",
    );
    let preds = write(
        &dir.path().join("pred.txt"),
        "Take it from the  oven\nremove the cake now\ndry off with towel\n",
    );
    let near = dir.path().join("near.tsv");
    let out = ok(&[
        "evaluate",
        "--predictions",
        p(&preds),
        "--references",
        p(&refs),
        "--sources",
        p(&sources),
        "--inventory",
        p(&inventory),
        "--near-miss",
        p(&near),
    ]);
    assert!(out.contains("\nevaluated_pairs=2\ncorrect=1\naccuracy=0.5\n"), "{out}");
    assert_eq!(
        fs::read_to_string(&near).unwrap(),
        "wait a bit\tlet it cool down\tremove the cake now\n"
    );

    ok(&[
        "evaluate",
        "--predictions",
        p(&preds),
        "--references",
        p(&refs),
        "--sources",
        p(&sources),
        "--inventory",
        p(&inventory),
    ]);
    assert!(dir.path().join("pred.txt.nearmiss.tsv").exists());

    let short = write(&dir.path().join("short.txt"), "remove the cake now\n");
    assert_eq!(
        code(&[
            "evaluate",
            "--predictions",
            p(&short),
            "--references",
            p(&refs),
            "--sources",
            p(&sources)
        ]),
        2
    );
    let clash = write(&dir.path().join("clash.tsv"), "baking\ta\tmix it\nbaking\tb\tmix it\n");
    assert_eq!(
        code(&[
            "evaluate",
            "--predictions",
            p(&preds),
            "--references",
            p(&refs),
            "--sources",
            p(&sources),
            "--inventory",
            p(&clash)
        ]),
        3
    );
}

#[test]
fn gradcheck_command() {
    let out = ok(&["gradcheck"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines.iter().all(|l| l.ends_with("PASS")), "{out}");

    let one = ok(&["gradcheck", "--variant", "gru-l2-att"]);
    assert_eq!(one.lines().count(), 1);
    assert!(one.starts_with("gru-l2-att\t"));

    let out = evpred(&["gradcheck", "--variant", "lstm-l1-noatt", "--corrupt-gradient"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).ends_with("FAIL\n"));
    assert_eq!(code(&["gradcheck", "--variant", "rnn-l1-att"]), 2);
}

#[test]
fn synth_command() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = ok(&["synth", "--out", p(d), "--seed", "4"]);
        assert!(out.starts_with("pairs=150\nsets=50\n"));
    }
    for f in ["corpus.tsv", "inventory.tsv", "successors.tsv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }

    // Every target is a paraphrase of the listed successor of its source event.
    let inventory = ParaphraseInventory::read(&a.join("inventory.tsv")).unwrap();
    let successors = fs::read_to_string(a.join("successors.tsv")).unwrap();
    let next: std::collections::HashMap<(String, String), String> = successors
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            ((f[0].to_string(), f[2].to_string()), f[3].to_string())
        })
        .collect();
    for line in fs::read_to_string(a.join("corpus.tsv")).unwrap().lines() {
        let (src, tgt) = line.split_once('\t').unwrap();
        let s = inventory.set_of(&tokenize(src)).unwrap().unwrap();
        let t = inventory.set_of(&tokenize(tgt)).unwrap().unwrap();
        assert_eq!(s.scenario, t.scenario);
        assert_eq!(next[&(s.scenario.clone(), s.id.clone())], t.id);
    }

    let wide = dir.path().join("wide");
    let out = ok(&["synth", "--out", p(&wide), "--scenarios", "3", "--events", "26"]);
    assert!(out.contains("sets=78\n"));
    let inv = ParaphraseInventory::read(&wide.join("inventory.tsv")).unwrap();
    assert!(inv.scenario_sizes().values().all(|&n| n == 26));
    assert_eq!(code(&["synth", "--out", p(&wide), "--branching", "5"]), 2);
}
