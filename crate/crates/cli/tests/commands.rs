use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::AtomicBool;

use decisionflow_cli::*;
use decisionflow_pipeline::{DatasetKind, Mode, PredictionFile};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_decisionflow"))
}

fn config(name: &str, o: Overrides) -> CliConfig {
    CliConfig::load(&fixtures().join(format!("{name}.run.json")), &o).unwrap()
}

fn out(dir: &tempfile::TempDir, mode: Option<Mode>) -> Overrides {
    Overrides {
        output_dir: Some(dir.path().to_path_buf()),
        mode,
        ..Overrides::default()
    }
}

#[test]
fn replayed_mta_run_predicts_every_id() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let status = bin()
        .args(["run", "--config"])
        .arg(fixtures().join("mta.run.json"))
        .arg("--out")
        .arg(&run_dir)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(run_dir.join("predictions.jsonl")).unwrap();
    let preds = PredictionFile::parse(&text).unwrap();
    assert_eq!(preds.rows.len(), 12);
    assert!(preds.rows.iter().all(|r| r.answer.is_some()));
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!((manifest.exit_code, manifest.gateway.network_calls), (0, 0));
    assert!(run_dir.join("traces/mta-risk-high/decisionflow-r0.json").is_file());
    assert_eq!(read_runs(&run_dir.join("runs.jsonl")).unwrap().len(), 12);
}

#[test]
fn abstentions_exit_two() {
    // The joint prompt for mta-desert-high has no JSON answer in the corpus.
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--mode", "joint", "--config"])
        .arg(fixtures().join("mta.run.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));
    let text = std::fs::read_to_string(dir.path().join("predictions.jsonl")).unwrap();
    let abstained: Vec<_> = PredictionFile::parse(&text)
        .unwrap()
        .rows
        .into_iter()
        .filter(|r| r.abstain.is_some())
        .collect();
    assert_eq!(abstained.len(), 1);
    assert_eq!(abstained[0].id, "mta-desert-high");
    assert_eq!(abstained[0].abstain.as_deref(), Some("joint:parse"));
}

#[test]
fn replay_miss_exits_one_and_names_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    // Only repeats 0..3 were recorded.
    let output = bin()
        .args(["run", "--repeats", "5", "--max-concurrency", "1", "--config"])
        .arg(fixtures().join("case_studies.run.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("replay miss"), "{stderr}");
    let manifest: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    let fatal = manifest.fatal.unwrap();
    assert!(fatal.contains("replay_miss"), "{fatal}");
    assert!(fatal.split_whitespace().any(|w| w.len() == 64 && w.chars().all(|c| c.is_ascii_hexdigit())), "{fatal}");
    assert!(manifest.runs_completed < manifest.runs_planned);
}

#[test]
fn config_errors_exit_one_before_any_run() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["run", "--transcript-dir", "/nonexistent/corpus", "--config"])
        .arg(fixtures().join("mta.run.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(1));
    assert!(!dir.path().join("manifest.json").exists());

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\":\"x\"}\n").unwrap();
    let status = bin()
        .args(["run", "--config"])
        .arg(fixtures().join("mta.run.json"))
        .arg("--dataset")
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(1));

    let status = bin().args(["run"]).output().unwrap().status;
    assert_eq!(status.code(), Some(1));
}

#[test]
fn self_consistency_attempts_are_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "mta",
        Overrides {
            repeats: Some(3),
            ..out(&dir, Some(Mode::SelfConsistency))
        },
    );
    let outcome = execute_run(&cfg, &AtomicBool::new(false)).unwrap();
    assert_eq!(outcome.exit, Exit::Ok);
    for (id, s) in &outcome.manifest.per_problem {
        assert_eq!(s.runs, 3, "{id}");
        assert_eq!(s.completions, 9, "{id}");
        let mut attempts = s.attempts.clone();
        attempts.sort_unstable();
        assert_eq!(attempts, (0..9).collect::<Vec<u32>>(), "{id}");
    }
}

#[test]
fn eval_is_idempotent_and_rejects_foreign_ids() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("dellma", out(&dir, None));
    execute_run(&cfg, &AtomicBool::new(false)).unwrap();
    let preds = dir.path().join("predictions.jsonl");
    let ds = fixtures().join("dellma.jsonl");
    let runs = dir.path().join("runs.jsonl");
    let mut outputs = Vec::new();
    for k in 0..2 {
        let target = dir.path().join(format!("eval{k}"));
        let status = bin()
            .arg("eval")
            .arg("--predictions")
            .arg(&preds)
            .arg("--dataset")
            .arg(&ds)
            .args(["--dataset-kind", "dellma", "--runs"])
            .arg(&runs)
            .arg("--out")
            .arg(&target)
            .output()
            .unwrap()
            .status;
        assert_eq!(status.code(), Some(0));
        outputs.push((
            std::fs::read(target.join("report.json")).unwrap(),
            std::fs::read(target.join("report.md")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let md = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert!(md.contains("| Mode | 2 | 3 | 4 | 5 | 6 | 7 | All |"), "{md}");

    let err = execute_eval(&preds, &fixtures().join("mta.jsonl"), DatasetKind::Mta, None, dir.path()).unwrap_err();
    assert!(matches!(err, CliError::Eval(_)), "{err}");
}

#[test]
fn top_k_sweep_writes_four_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("dellma", out(&dir, None));
    let policies = parse_top_k("1,2,3,none").unwrap();
    let outcome = execute_sweep(&cfg, "top_k", &policies, &AtomicBool::new(false)).unwrap();
    assert_eq!(outcome.summary.rows.len(), 4);
    for label in ["top1", "top2", "top3", "none"] {
        assert!(dir.path().join(format!("top_k-{label}/report.json")).is_file(), "{label}");
    }
    assert_eq!(outcome.manifest.total.requests, outcome.manifest.reference.requests);
    assert_eq!(outcome.manifest.total.network_calls, 0);
    let md = std::fs::read_to_string(dir.path().join("sweep.md")).unwrap();
    assert!(md.contains("| top_k | 2 | 3 | 4 | 5 | 6 | 7 | All |"), "{md}");
}

#[test]
fn empty_sweep_list_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args(["sweep", "--epsilons", " , ", "--config"])
        .arg(fixtures().join("mta.run.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("usage"));
    let cfg = config("mta", out(&dir, None));
    assert!(matches!(
        execute_sweep(&cfg, "epsilon", &[], &AtomicBool::new(false)),
        Err(CliError::Usage(_))
    ));
}

#[test]
fn replay_verify_reports_gaps() {
    let cfg = config("case_studies", Overrides::default());
    let report = execute_verify(&cfg, &AtomicBool::new(false)).unwrap();
    assert!(report.complete(), "{report:?}");

    let cfg = config(
        "case_studies",
        Overrides {
            repeats: Some(4),
            ..Overrides::default()
        },
    );
    let report = execute_verify(&cfg, &AtomicBool::new(false)).unwrap();
    assert!(!report.complete());
    assert_eq!(report.gaps.len(), 2);
    assert!(report.gaps.iter().all(|g| g.repeat == 3 && g.detail.len() == 64));

    let status = bin()
        .args(["replay-verify", "--repeats", "4", "--config"])
        .arg(fixtures().join("case_studies.run.json"))
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(1));
}

#[test]
fn cancelled_run_flushes_a_partial_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("mta", out(&dir, None));
    let outcome = execute_run(&cfg, &AtomicBool::new(true)).unwrap();
    assert_eq!(outcome.exit, Exit::Fatal);
    assert!(outcome.manifest.interrupted);
    let on_disk: Manifest =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(on_disk, outcome.manifest);
}
