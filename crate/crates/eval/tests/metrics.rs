mod common;

use common::*;
use decisionflow_core::{Trace, Usage};
use decisionflow_eval::*;
use decisionflow_pipeline::{Alignment, Group, Mode, RunRecord};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 0.01
}

#[test]
fn decisionflow_mta_row_is_reproduced() {
    let ds = mta(200, 200);
    let mut rows = rows_with(&ids_with_prefix(&ds, "high-"), 181, Mode::Decisionflow, 0);
    rows.extend(rows_with(&ids_with_prefix(&ds, "low-"), 136, Mode::Decisionflow, 0));
    let report = EvalReport::build(&file(rows), &ds, &[]).unwrap();
    let m = &report.modes[0];
    assert!(close(m.high_acc.unwrap(), 90.50));
    assert!(close(m.low_acc.unwrap(), 68.00));
    assert!(close(m.avg_acc.unwrap(), 79.25));
    assert!(close(m.bias.unwrap(), 22.50));
    let md = report.to_markdown();
    assert!(md.contains("High-acc | Low-acc | Avg-acc"));
    assert!(md.contains("| decisionflow | 90.50 | 68.00 | 79.25 | 22.50 | 22.50 | 400 | 0 |"), "{md}");
}

#[test]
fn bias_examples() {
    assert!(close(bias(85.50, 14.50), 71.00));
    assert!(close(bias(90.50, 68.00), 22.50));
    assert_eq!(bias(42.0, 42.0), 0.0);
    assert!(bias(10.0, 30.0) < 0.0);
}

#[test]
fn zero_shot_bias_row_from_rates() {
    let ds = mta(200, 200);
    let mut rows = rows_with(&ids_with_prefix(&ds, "high-"), 171, Mode::ZeroShot, 0);
    rows.extend(rows_with(&ids_with_prefix(&ds, "low-"), 29, Mode::ZeroShot, 0));
    let m = &EvalReport::build(&file(rows), &ds, &[]).unwrap().modes[0];
    assert!(close(m.high_acc.unwrap(), 85.50) && close(m.low_acc.unwrap(), 14.50));
    assert!(close(m.bias.unwrap(), 71.00));
}

#[test]
fn trivial_accuracies() {
    let ds = mta(3, 3);
    let ids = ds.ids();
    let all = rows_with(&ids, ids.len(), Mode::Cot, 0);
    let acc = accuracy(&all, &ds).unwrap();
    assert_eq!(acc.all.percent(), Some(100.0));

    let abstain: Vec<_> = ids.iter().map(|id| row(id, Mode::Cot, 0, None)).collect();
    let acc = accuracy(&abstain, &ds).unwrap();
    assert_eq!(acc.all.percent(), Some(0.0));
    assert_eq!(acc.high(), Some(0.0));
}

#[test]
fn empty_group_is_absent() {
    let ds = mta(2, 2);
    let rows = rows_with(&ids_with_prefix(&ds, "high-"), 1, Mode::Cot, 0);
    let acc = accuracy(&rows, &ds).unwrap();
    assert_eq!(acc.high(), Some(50.0));
    assert_eq!(acc.low(), None);
    assert!(!acc.groups.contains_key(&Group::Alignment(Alignment::Low)));
    let m = &EvalReport::build(&file(rows), &ds, &[]).unwrap().modes[0];
    assert_eq!((m.avg_acc, m.bias), (None, None));
    assert!(EvalReport::build(&file(vec![]), &ds, &[]).unwrap().modes.is_empty());
}

#[test]
fn unknown_id_is_an_error() {
    let ds = mta(1, 1);
    let rows = vec![row("high-0", Mode::Cot, 0, Some(0)), row("ghost", Mode::Cot, 0, Some(0))];
    assert_eq!(accuracy(&rows, &ds).unwrap_err(), EvalError::UnknownId("ghost".into()));
    assert!(EvalReport::build(&file(rows), &ds, &[]).is_err());
}

#[test]
fn action_count_cells_from_pooled_repeats() {
    // 120 instances (21, 35, 35, 21, 7, 1 by action count), three repeats pooled.
    let counts = [21, 35, 35, 21, 7, 1];
    let correct_per_repeat = [[18, 26, 25, 14, 5, 1], [18, 26, 25, 14, 5, 0], [18, 26, 25, 14, 5, 0]];
    let ds = dellma(&counts);
    let mut rows = Vec::new();
    for (repeat, correct) in correct_per_repeat.iter().enumerate() {
        for (i, &c) in correct.iter().enumerate() {
            rows.extend(rows_with(&ids_with_prefix(&ds, &format!("a{}-", i + 2)), c, Mode::Decisionflow, repeat as u32));
        }
    }
    let report = EvalReport::build(&file(rows), &ds, &[]).unwrap();
    let m = &report.modes[0];
    let expected = [("2", 85.71), ("3", 74.29), ("4", 71.43), ("5", 66.67), ("6", 71.43), ("7", 33.33)];
    for (k, want) in expected {
        assert!(close(m.by_action_count[k], want), "{k}: {}", m.by_action_count[k]);
    }
    // Pooled over all 360 rows: (54 + 78 + 75 + 42 + 15 + 1) / 360.
    assert!(close(m.by_action_count["all"], 265.0 / 360.0 * 100.0));
    let md = report.to_markdown();
    assert!(md.contains("| Mode | 2 | 3 | 4 | 5 | 6 | 7 | All |"), "{md}");
    assert!(md.contains("| decisionflow | 85.71 | 74.29 | 71.43 | 66.67 | 71.43 | 33.33 | 73.61 |"), "{md}");
}

#[test]
fn missing_action_counts_render_as_dashes() {
    let ds = dellma(&[2, 0, 3]);
    let rows = rows_with(&ds.ids(), 5, Mode::Cot, 0);
    let md = EvalReport::build(&file(rows), &ds, &[]).unwrap().to_markdown();
    assert!(md.contains("| cot | 100.00 | - | 100.00 | - | - | - | 100.00 |"), "{md}");
}

#[test]
fn repeat_spread_uses_sample_std() {
    let ds = mta(100, 100);
    let high = ids_with_prefix(&ds, "high-");
    let low = ids_with_prefix(&ds, "low-");
    let mut rows = Vec::new();
    for (repeat, (h, l)) in [(64, 80), (65, 80), (66, 80)].into_iter().enumerate() {
        rows.extend(rows_with(&high, h, Mode::Decisionflow, repeat as u32));
        rows.extend(rows_with(&low, l, Mode::Decisionflow, repeat as u32));
    }
    let m = &EvalReport::build(&file(rows), &ds, &[]).unwrap().modes[0];
    let s = m.repeats["high_acc"];
    assert_eq!((s.mean, s.sample_std, s.repeats, s.single), (65.0, 1.0, 3, false));
    assert_eq!(m.repeats["low_acc"].sample_std, 0.0);
    assert!(m.high_acc.unwrap() == 65.0);

    let one = rows_with(&high, 50, Mode::Cot, 0);
    let m = &EvalReport::build(&file(one), &ds, &[]).unwrap().modes[0];
    assert!(m.repeats["all_acc"].single);
    assert!(m.to_owned().repeats.values().all(|s| s.sample_std == 0.0));
}

fn run(id: &str, mode: Mode, prompt: u64, response: u64, latency: f64, approximate: bool) -> RunRecord {
    RunRecord {
        problem_id: id.into(),
        mode,
        repeat: 0,
        answer: Some(0),
        abstain: None,
        utilities: Vec::new(),
        rationale: String::new(),
        degenerate: false,
        usage: Usage {
            prompt_tokens: prompt,
            response_tokens: response,
            approximate,
        },
        completions: 1,
        latency_secs: latency,
        wall_secs: 0.0,
        trace: Trace::default(),
    }
}

#[test]
fn runtime_means() {
    let two = [run("high-0", Mode::Cot, 300, 10, 1.0, false), run("high-1", Mode::Cot, 340, 20, 2.0, false)];
    let s = runtime_stats(&two).unwrap();
    assert_eq!(s.mean_prompt_tokens, 320.0);
    assert_eq!(s.mean_response_tokens, 15.0);
    assert!(!s.approximate);
    assert!(runtime_stats(&[]).is_none());
}

#[test]
fn runtime_fixture_matches_cot_high_row() {
    // Ten runs: prompt tokens sum to 3191, response tokens to 1829, latency to 22.2 s.
    let ds = mta(10, 0);
    let records: Vec<RunRecord> = (0..10)
        .map(|k| {
            let prompt = if k == 0 { 320 } else { 319 };
            let response = if k == 0 { 182 } else { 183 };
            let latency = if k % 2 == 0 { 2.0 } else { 2.44 };
            run(&format!("high-{k}"), Mode::Cot, prompt, response, latency, k == 3)
        })
        .collect();
    let report = runtime_report(&records, &ds).unwrap();
    let high = report["cot"]["high"];
    assert_eq!(high.mean_prompt_tokens, 3191.0 / 10.0);
    assert_eq!(high.mean_response_tokens, 1829.0 / 10.0);
    assert!((high.mean_latency_secs - 2.22).abs() < 1e-12);
    assert_eq!(
        (fmt2(high.mean_prompt_tokens), fmt2(high.mean_response_tokens), fmt2(high.mean_latency_secs)),
        ("319.10".to_string(), "182.90".to_string(), "2.22".to_string())
    );
    assert!(high.approximate);
    assert!(!report["cot"].contains_key("low"));
    assert_eq!(report["cot"]["all"], high);

    let rows = rows_with(&ds.ids(), 10, Mode::Cot, 0);
    let md = EvalReport::build(&file(rows), &ds, &records).unwrap().to_markdown();
    assert!(md.contains("| cot | high | 10 | 319.10 | 182.90 | 2.22 | yes |"), "{md}");
}

#[test]
fn emission_is_deterministic() {
    let ds = mta(5, 5);
    let mut rows = rows_with(&ids_with_prefix(&ds, "high-"), 3, Mode::Decisionflow, 0);
    rows.extend(rows_with(&ids_with_prefix(&ds, "low-"), 2, Mode::Decisionflow, 0));
    rows.extend(rows_with(&ds.ids(), 4, Mode::Cot, 0));
    let report = EvalReport::build(&file(rows.clone()), &ds, &[]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let json = dir.path().join(format!("r{k}.json"));
        let md = dir.path().join(format!("r{k}.md"));
        emit_report(&report, ReportFormat::Json, &json).unwrap();
        emit_report(&report, ReportFormat::Markdown, &md).unwrap();
        outputs.push((std::fs::read(json).unwrap(), std::fs::read(md).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    rows.reverse();
    let shuffled = EvalReport::build(&file(rows), &ds, &[]).unwrap();
    assert_eq!(shuffled.to_json(), report.to_json());
    let back: EvalReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn sweep_summary_layout() {
    let ds = mta(4, 4);
    let rows_for = |h, l| {
        let mut r = rows_with(&ids_with_prefix(&ds, "high-"), h, Mode::Decisionflow, 0);
        r.extend(rows_with(&ids_with_prefix(&ds, "low-"), l, Mode::Decisionflow, 0));
        EvalReport::build(&file(r), &ds, &[]).unwrap()
    };
    let summary = SweepSummary {
        parameter: "epsilon".into(),
        rows: vec![
            SweepRow { setting: "0.1".into(), mean_surviving_cells: Some(3.5), report: rows_for(4, 1) },
            SweepRow { setting: "0.3".into(), mean_surviving_cells: Some(2.0), report: rows_for(3, 3) },
        ],
    };
    let md = summary.to_markdown();
    assert!(md.contains("| epsilon | High-acc | Low-acc | Avg-acc | Bias | Surviving cells |"));
    assert!(md.contains("| 0.1 | 100.00 | 25.00 | 62.50 | 75.00 | 3.50 |"), "{md}");
    assert!(md.contains("| 0.3 | 75.00 | 75.00 | 75.00 | 0.00 | 2.00 |"), "{md}");
}
