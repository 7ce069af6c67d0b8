use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn seld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seld")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

// Small enough to run a full pipeline in a few seconds.
const TINY: [&str; 8] = [
    "dataset.train=2",
    "dataset.test=1",
    "dataset.duration=4",
    "bank.examples_per_class=3",
    "bank.test_examples_per_class=1",
    "model.seq_len=32",
    "train.epochs=2",
    "train.batch_size=4",
];

fn tiny<'a>(cmd: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd, "--out", out];
    v.extend(TINY);
    v.extend(extra);
    v
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&seld(&["frobnicate"])), 1);
    assert_eq!(code(&seld(&["train", "--seed", "x"])), 1);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = seld(&["generate", "--out", out, "model.no_such_key=3"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));
    // An unknown config name is a missing file, not a usage error.
    assert_eq!(code(&seld(&["generate", "--config", "no-such-preset", "--out", out])), 2);
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = seld(&["train", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("generate"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn presets_are_listed() {
    let o = seld(&["presets"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for p in ["ansyn-mini", "resyn-mini", "cansyn-mini", "shifted-grid"] {
        assert!(text.contains(p));
    }
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn pipeline_runs_end_to_end_and_repeats_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let out = out.to_str().unwrap();
        for cmd in ["generate", "train", "evaluate", "music", "report"] {
            let o = seld(&tiny(cmd, out, &["--seed", "5"]));
            assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        runs.push(files(Path::new(out)));
    }
    let names: Vec<&str> = runs[0].iter().map(|f| f.0.as_str()).collect();
    for expected in ["data/manifest.json", "history.csv", "best.ckpt", "eval_test/report.txt", "music/report.txt", "report/summary.csv"] {
        assert!(names.iter().any(|n| n.ends_with(expected)), "missing {expected} in {names:?}");
    }
    // Paths are recorded in config.txt, so compare everything else.
    let strip = |v: &Vec<(String, Vec<u8>)>| v.iter().filter(|f| !f.0.ends_with("config.txt")).cloned().collect::<Vec<_>>();
    assert_eq!(strip(&runs[0]), strip(&runs[1]));

    let report = fs::read_to_string(dir.path().join("a/eval_test/report.txt")).unwrap();
    assert!(report.contains("seld_score = "));
}

#[test]
fn different_seed_changes_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&seld(&tiny("generate", a.to_str().unwrap(), &["--seed", "1"]))), 0);
    assert_eq!(code(&seld(&tiny("generate", b.to_str().unwrap(), &["--seed", "2"]))), 0);
    let wav = |d: &Path| {
        let w = d.join("data/wav");
        let mut names: Vec<_> = fs::read_dir(&w).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        fs::read(&names[0]).unwrap()
    };
    assert_ne!(wav(&a), wav(&b));
}
