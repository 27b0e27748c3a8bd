use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_morphdis"))
}

fn core_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core")
}

fn micro(name: &str) -> PathBuf {
    core_dir().join("data/micro").join(name)
}

fn fixture(name: &str) -> PathBuf {
    core_dir().join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn evaluate_against_itself_is_perfect() {
    let gold = micro("corpus.tsv");
    let o = run(&["evaluate", "--gold", p(&gold), "--system", p(&gold)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("pos=1.0000 tags=1.0000 lex=1.0000 diac=1.0000 full=1.0000"), "{out}");
}

#[test]
fn evaluate_hand_scored_fixture() {
    let o = run(&[
        "evaluate",
        "--gold",
        p(&fixture("eval_gold.tsv")),
        "--system",
        p(&fixture("eval_system.tsv")),
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tokens"], 10);
    assert_eq!(v["pos"], 1.0);
    assert_eq!(v["tags"], 0.9);
    assert_eq!(v["lex"], 1.0);
    assert_eq!(v["diac"], 1.0);
    assert_eq!(v["full"], 0.9);
}

#[test]
fn misaligned_evaluation_is_a_data_error() {
    let o = run(&[
        "evaluate",
        "--gold",
        p(&micro("corpus.tsv")),
        "--system",
        p(&fixture("eval_gold.tsv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error kind=data"), "{}", stderr(&o));
}

#[test]
fn gradcheck_passes() {
    let o = run(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains("status=pass")).count(), 7, "{out}");
}

#[test]
fn unknown_setting_is_a_usage_error() {
    let o = run(&["gradcheck", "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error kind=usage"), "{}", stderr(&o));
}

#[test]
fn missing_file_is_a_data_error() {
    let o = run(&["evaluate", "--gold", "/nonexistent/gold.tsv", "--system", "/nonexistent/sys.tsv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

fn train_into(dir: &Path) -> Output {
    run(&[
        "train",
        "--config",
        p(&micro("micro.cfg")),
        "--epochs",
        "2",
        "--out",
        p(dir),
    ])
}

#[test]
fn train_is_reproducible_and_feeds_the_other_commands() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = train_into(a.path());
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert!(stdout(&oa).starts_with("best_epoch="), "{}", stdout(&oa));
    let ob = train_into(b.path());
    assert_eq!(ob.status.code(), Some(0), "{}", stderr(&ob));
    for f in ["model.ckpt", "train_log.txt"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
    assert_eq!(std::fs::read_to_string(a.path().join("train_log.txt")).unwrap().lines().count(), 2);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["epochs"].as_array().unwrap().len(), 2);
    let resolved = std::fs::read_to_string(a.path().join("config.resolved")).unwrap();
    assert!(resolved.lines().any(|l| l == "epochs=2"), "{resolved}");

    let ckpt = a.path().join("model.ckpt");
    let o = run(&["inspect", "--checkpoint", p(&ckpt)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!stdout(&o).is_empty());

    let out = a.path().join("out.tsv");
    let o = run(&[
        "disambiguate",
        "--checkpoint",
        p(&ckpt),
        "--input",
        p(&fixture("eval_gold.tsv")),
        "--dictionary",
        p(&micro("dictionary.tsv")),
        "--output",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    assert_eq!(rows.len(), 10);
    // every token is in the dictionary, so every row is a ranked analysis
    assert!(rows.iter().all(|r| r.ends_with("\tanalyzer\tiv")), "{text}");

    // the output is itself a corpus the evaluator accepts
    let o = run(&["evaluate", "--gold", p(&fixture("eval_gold.tsv")), "--system", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    // resuming a finished run changes nothing
    let c = tempfile::tempdir().unwrap();
    let o = run(&[
        "train",
        "--config",
        p(&micro("micro.cfg")),
        "--epochs",
        "2",
        "--resume",
        p(&ckpt),
        "--out",
        p(c.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read(c.path().join("model.ckpt")).unwrap(), std::fs::read(&ckpt).unwrap());
}

#[test]
fn damaged_checkpoint_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, b"not a checkpoint").unwrap();
    let o = run(&["inspect", "--checkpoint", p(&path)]);
    assert_eq!(o.status.code(), Some(2));
}
