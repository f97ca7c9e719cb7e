//! End-to-end tests through the compiled binary: artifact layout, exit
//! codes, determinism, and the cache/evaluate/oracle surfaces.

use std::path::Path;
use std::process::{Command, Output};

fn lectsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lectsum"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout_of(out),
        stderr_of(out)
    );
}

fn gen_deck(dir: &Path, seed: u64) {
    let out = lectsum(&["gen-deck", "--out", dir.to_str().unwrap(), "--seed", &seed.to_string()]);
    assert_exit(&out, 0);
}

fn summarize_deck(deck: &Path, out_dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "summarize",
        deck.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    lectsum(&args)
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

fn json_of(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&read(path)).unwrap_or_else(|e| panic!("parsing {}: {e}", path.display()))
}

#[test]
fn deck_summarize_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = tmp.path().join("deck");
    let run = tmp.path().join("run");
    gen_deck(&deck, 3);
    for name in ["frame_000.png", "frame_009.png", "timing.json", "annotations.json", "truth.json"] {
        assert!(deck.join(name).exists(), "{name} missing from deck");
    }

    let out = summarize_deck(
        &deck,
        &run,
        &[
            "--text-annotations",
            deck.join("annotations.json").to_str().unwrap(),
            "--segment-id",
            "demo",
        ],
    );
    assert_exit(&out, 0);

    let summary = json_of(&run.join("summary.json"));
    assert_eq!(summary["segment_id"], "demo");
    assert_eq!(summary["method"], "greedy");
    let selected = summary["selected"].as_array().unwrap();
    assert_eq!(selected.len(), 4);

    let run_record = json_of(&run.join("run.json"));
    assert_eq!(run_record["summary_size"], 4);
    assert_eq!(run_record["transition"]["dwell_frames"], 2);

    let objects = json_of(&run.join("diagnostics").join("objects.json"));
    let objects = objects.as_array().unwrap();
    assert_eq!(objects.len(), 4, "the deck plants exactly four diagrams");
    for object in objects {
        let id = object["id"].as_u64().unwrap();
        let crop = run
            .join("diagnostics")
            .join("objects")
            .join(format!("object_{id:03}.png"));
        assert!(crop.exists(), "missing crop for object {id}");
    }

    let matrix = json_of(&run.join("diagnostics").join("distance_matrix.json"));
    assert_eq!(matrix.as_array().unwrap().len(), 4);
    let importance = json_of(&run.join("diagnostics").join("importance.json"));
    assert_eq!(importance.as_array().unwrap().len(), 4);
    let transitions = json_of(&run.join("diagnostics").join("transitions.json"));
    assert_eq!(transitions.as_array().unwrap().len(), 4);
}

#[test]
fn summaries_are_byte_identical_across_runs_and_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = tmp.path().join("deck");
    gen_deck(&deck, 5);
    let annotations = deck.join("annotations.json");

    let run_a = tmp.path().join("a");
    let run_b = tmp.path().join("b");
    let shared = [
        "--text-annotations",
        annotations.to_str().unwrap(),
        "--segment-id",
        "seg",
    ];
    let mut with_one: Vec<&str> = shared.to_vec();
    with_one.extend_from_slice(&["--workers", "1"]);
    let mut with_four: Vec<&str> = shared.to_vec();
    with_four.extend_from_slice(&["--workers", "4"]);
    assert_exit(&summarize_deck(&deck, &run_a, &with_one), 0);
    assert_exit(&summarize_deck(&deck, &run_b, &with_four), 0);

    for rel in [
        "summary.png",
        "summary.json",
        "run.json",
        "diagnostics/distance_matrix.json",
        "diagnostics/importance.json",
        "diagnostics/objects.json",
        "diagnostics/transitions.json",
        "diagnostics/objects/object_000.png",
    ] {
        assert_eq!(read(&run_a.join(rel)), read(&run_b.join(rel)), "{rel} differs");
    }
}

#[test]
fn builtin_text_detection_runs_without_annotations() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = tmp.path().join("deck");
    gen_deck(&deck, 9);
    let run = tmp.path().join("run");
    let out = summarize_deck(&deck, &run, &["--segment-id", "seg"]);
    assert_exit(&out, 0);
    let objects = json_of(&run.join("diagnostics").join("objects.json"));
    assert_eq!(
        objects.as_array().unwrap().len(),
        4,
        "text blocks must be masked, leaving the four planted diagrams"
    );
}

#[test]
fn exhaustive_objective_never_exceeds_greedy() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = tmp.path().join("deck");
    gen_deck(&deck, 13);
    let annotations = deck.join("annotations.json");

    let mut objectives = Vec::new();
    for method in ["greedy", "exhaustive"] {
        let run = tmp.path().join(method);
        let out = summarize_deck(
            &deck,
            &run,
            &[
                "--text-annotations",
                annotations.to_str().unwrap(),
                "--segment-id",
                "seg",
                "--method",
                method,
                "--summary-size",
                "2",
            ],
        );
        assert_exit(&out, 0);
        let summary = json_of(&run.join("summary.json"));
        assert_eq!(summary["method"], method);
        assert_eq!(summary["selected"].as_array().unwrap().len(), 2);
        objectives.push(summary["objective"].as_f64().unwrap());
    }
    assert!(
        objectives[1] <= objectives[0] + 1e-12,
        "exhaustive {} must not exceed greedy {}",
        objectives[1],
        objectives[0]
    );
}

#[test]
fn kmedoid_method_is_recorded_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = tmp.path().join("deck");
    gen_deck(&deck, 21);
    let run = tmp.path().join("run");
    let out = summarize_deck(
        &deck,
        &run,
        &["--segment-id", "seg", "--method", "kmedoid", "--summary-size", "2"],
    );
    assert_exit(&out, 0);
    let summary = json_of(&run.join("summary.json"));
    assert_eq!(summary["method"], "kmedoid");
}

#[test]
fn empty_frames_dir_is_a_stage_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let frames = tmp.path().join("frames");
    std::fs::create_dir(&frames).unwrap();
    let out = summarize_deck(&frames, &tmp.path().join("run"), &[]);
    assert_exit(&out, 1);
    assert!(stderr_of(&out).contains("no .png or .jpg frames"));
}

#[test]
fn config_problems_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = tmp.path().join("deck");
    gen_deck(&deck, 3);

    let zero_size = tmp.path().join("zero.toml");
    std::fs::write(&zero_size, "summary_size = 0\n").unwrap();
    let out = summarize_deck(
        &deck,
        &tmp.path().join("r1"),
        &["--config", zero_size.to_str().unwrap()],
    );
    assert_exit(&out, 2);

    let typo = tmp.path().join("typo.toml");
    std::fs::write(&typo, "summery_size = 4\n").unwrap();
    let out = summarize_deck(
        &deck,
        &tmp.path().join("r2"),
        &["--config", typo.to_str().unwrap()],
    );
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("summery_size"));

    let missing = tmp.path().join("nope.toml");
    let out = summarize_deck(
        &deck,
        &tmp.path().join("r3"),
        &["--config", missing.to_str().unwrap()],
    );
    assert_exit(&out, 2);

    let out = summarize_deck(&deck, &tmp.path().join("r4"), &["--summary-size", "0"]);
    assert_exit(&out, 2);
}

#[test]
fn per_segment_flags_reject_multiple_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let deck_a = tmp.path().join("deck-a");
    let deck_b = tmp.path().join("deck-b");
    gen_deck(&deck_a, 3);
    gen_deck(&deck_b, 4);
    let out = lectsum(&[
        "summarize",
        deck_a.to_str().unwrap(),
        deck_b.to_str().unwrap(),
        "--out",
        tmp.path().join("run").to_str().unwrap(),
        "--segment-id",
        "x",
    ]);
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("--segment-id"));
}

#[test]
fn multiple_segments_nest_under_their_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let deck_a = tmp.path().join("lecture-a");
    let deck_b = tmp.path().join("lecture-b");
    gen_deck(&deck_a, 6);
    gen_deck(&deck_b, 7);
    let run = tmp.path().join("run");
    let out = lectsum(&[
        "summarize",
        deck_a.to_str().unwrap(),
        deck_b.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_exit(&out, 0);
    for id in ["lecture-a", "lecture-b"] {
        assert!(run.join(id).join("summary.png").exists());
        let summary = json_of(&run.join(id).join("summary.json"));
        assert_eq!(summary["segment_id"], id);
    }
}

#[test]
fn similarity_cache_hits_reproduce_and_corruption_is_loud() {
    let tmp = tempfile::tempdir().unwrap();
    let deck = tmp.path().join("deck");
    gen_deck(&deck, 11);
    let cache = tmp.path().join("cache");
    let run_a = tmp.path().join("a");
    let run_b = tmp.path().join("b");
    let flags = [
        "--segment-id",
        "seg",
        "--cache",
    ];

    let mut args_a: Vec<&str> = flags.to_vec();
    let cache_str = cache.to_str().unwrap().to_string();
    args_a.push(&cache_str);
    assert_exit(&summarize_deck(&deck, &run_a, &args_a), 0);
    let entry = cache.join("seg.json");
    assert!(entry.exists(), "first run must populate the cache");

    let before = read(&entry);
    assert_exit(&summarize_deck(&deck, &run_b, &args_a), 0);
    assert_eq!(read(&entry), before, "a cache hit must not rewrite the entry");
    assert_eq!(read(&run_a.join("summary.json")), read(&run_b.join("summary.json")));
    assert_eq!(read(&run_a.join("summary.png")), read(&run_b.join("summary.png")));

    std::fs::write(&entry, b"not json").unwrap();
    let out = summarize_deck(&deck, &tmp.path().join("c"), &args_a);
    assert_exit(&out, 1);
    assert!(stderr_of(&out).contains("cache"));
}

#[test]
fn oracle_check_planted_mode_always_matches() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let args = |dir: &Path| {
        vec![
            "oracle-check".to_string(),
            "--mode".into(),
            "planted".into(),
            "--instances".into(),
            "50".into(),
            "--n-range".into(),
            "8..12".into(),
            "--m".into(),
            "4".into(),
            "--seed".into(),
            "40".into(),
            "--out".into(),
            dir.to_str().unwrap().into(),
        ]
    };
    let run_a = lectsum(&args(&out_a).iter().map(String::as_str).collect::<Vec<_>>());
    assert_exit(&run_a, 0);
    let report = json_of(&out_a.join("report.json"));
    assert_eq!(report["match_rate"], 1.0);
    assert_eq!(report["max_ratio"], 1.0);
    assert_eq!(report["failures"].as_array().unwrap().len(), 0);

    let run_b = lectsum(&args(&out_b).iter().map(String::as_str).collect::<Vec<_>>());
    assert_exit(&run_b, 0);
    assert_eq!(read(&out_a.join("report.json")), read(&out_b.join("report.json")));
}

#[test]
fn oracle_check_saves_replayable_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("oracle");
    let out = lectsum(&[
        "oracle-check",
        "--mode",
        "random",
        "--instances",
        "40",
        "--n-range",
        "6..10",
        "--m",
        "4",
        "--seed",
        "11",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);
    let report = json_of(&out_dir.join("report.json"));
    let failures = report["failures"].as_array().unwrap();
    assert!(
        !failures.is_empty(),
        "seed 11 on uniform instances is known to produce mismatches"
    );
    let file = failures[0]["file"].as_str().unwrap();
    let replay = lectsum(&["oracle-check", "--replay", out_dir.join(file).to_str().unwrap()]);
    assert_exit(&replay, 0);
    assert!(stdout_of(&replay).contains("MISMATCH"));
}

#[test]
fn oracle_check_rejects_degenerate_parameters() {
    let out = lectsum(&["oracle-check", "--n-range", "9..6"]);
    assert_exit(&out, 2);
    let out = lectsum(&["oracle-check", "--mode", "planted", "--n-range", "6..12", "--m", "4"]);
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("planted"));
}

fn write_survey(path: &Path) {
    let survey = serde_json::json!({
        "segments": [
            {
                "segment_id": "seg-a",
                "n_images": 6,
                "duration_s": 180.0,
                "responses": [
                    {
                        "participant_id": "p1",
                        "selected": [0, 1, 2, 3],
                        "similar": {"4": "0"},
                        "quality": 1,
                        "familiarity": 2
                    },
                    {
                        "participant_id": "p2",
                        "selected": [0, 1, 2, 3],
                        "quality": 2,
                        "familiarity": 1
                    },
                    {
                        "participant_id": "p3",
                        "selected": [0, 1, 2, 3],
                        "quality": 1,
                        "familiarity": 4
                    }
                ]
            },
            {
                "segment_id": "seg-b",
                "n_images": 5,
                "duration_s": 240.0,
                "responses": [
                    {
                        "participant_id": "p1",
                        "selected": [0, 1, 2, 4],
                        "quality": 2,
                        "familiarity": 2
                    }
                ]
            }
        ]
    });
    std::fs::write(path, serde_json::to_string_pretty(&survey).unwrap()).unwrap();
}

fn write_summary(path: &Path, segment_id: &str, selected: &[usize]) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let manifest = serde_json::json!({
        "segment_id": segment_id,
        "method": "greedy",
        "selected": selected,
        "objective": 0.05
    });
    std::fs::write(path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
}

#[test]
fn evaluate_scores_both_manifest_layouts() {
    let tmp = tempfile::tempdir().unwrap();
    let survey = tmp.path().join("survey.json");
    write_survey(&survey);
    let summaries = tmp.path().join("summaries");
    write_summary(&summaries.join("seg-a").join("summary.json"), "seg-a", &[0, 1, 2, 3]);
    write_summary(&summaries.join("seg-b.json"), "seg-b", &[0, 1, 2, 4]);

    let report_path = tmp.path().join("report.json");
    let csv_path = tmp.path().join("report.csv");
    let out = lectsum(&[
        "evaluate",
        "--survey",
        survey.to_str().unwrap(),
        "--summaries",
        summaries.to_str().unwrap(),
        "--report",
        report_path.to_str().unwrap(),
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_exit(&out, 0);

    let report = json_of(&report_path);
    assert_eq!(report["segments"].as_array().unwrap().len(), 2);
    let means = report["means"].as_array().unwrap();
    assert_eq!(means.len(), 4, "all four formulations by default");
    let top4 = &means[0];
    assert_eq!(top4["formulation"], "top4");
    assert_eq!(top4["f1"], 1.0, "summaries equal the consensus picks");
    assert_eq!(report["orphan_rate"]["strict_unselected"], 0.0);
    assert_eq!(report["consensus_miss"]["strict"], 0.0);
    assert_eq!(report["dataset"]["segments"], 2);

    let csv = String::from_utf8(read(&csv_path)).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 4, "header plus segments times formulations");
    assert!(lines[0].starts_with("segment_id,formulation,"));
    assert!(lines[1].starts_with("seg-a,top4,"));
}

#[test]
fn evaluate_lists_every_missing_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let survey = tmp.path().join("survey.json");
    write_survey(&survey);
    let summaries = tmp.path().join("summaries");
    write_summary(&summaries.join("seg-a").join("summary.json"), "seg-a", &[0, 1, 2, 3]);

    let out = lectsum(&[
        "evaluate",
        "--survey",
        survey.to_str().unwrap(),
        "--summaries",
        summaries.to_str().unwrap(),
        "--report",
        tmp.path().join("report.json").to_str().unwrap(),
    ]);
    assert_exit(&out, 1);
    assert!(stderr_of(&out).contains("seg-b"));
}

#[test]
fn evaluate_respects_formulation_filters() {
    let tmp = tempfile::tempdir().unwrap();
    let survey = tmp.path().join("survey.json");
    write_survey(&survey);
    let summaries = tmp.path().join("summaries");
    write_summary(&summaries.join("seg-a.json"), "seg-a", &[0, 1, 2, 3]);
    write_summary(&summaries.join("seg-b.json"), "seg-b", &[0, 1, 2, 4]);

    let report_path = tmp.path().join("report.json");
    let out = lectsum(&[
        "evaluate",
        "--survey",
        survey.to_str().unwrap(),
        "--summaries",
        summaries.to_str().unwrap(),
        "--report",
        report_path.to_str().unwrap(),
        "--formulation",
        "top4",
        "--formulation",
        "all-grouped",
    ]);
    assert_exit(&out, 0);
    let report = json_of(&report_path);
    let means = report["means"].as_array().unwrap();
    assert_eq!(means.len(), 2);
    assert_eq!(means[0]["formulation"], "top4");
    assert_eq!(means[1]["formulation"], "all_grouped");
}

#[test]
fn evaluate_rejects_invalid_survey_data() {
    let tmp = tempfile::tempdir().unwrap();
    let survey = tmp.path().join("survey.json");
    // A similarity statement must point at a selected image.
    std::fs::write(
        &survey,
        serde_json::json!({
            "segments": [{
                "segment_id": "seg",
                "n_images": 5,
                "responses": [{
                    "participant_id": "p1",
                    "selected": [0, 1, 2, 3],
                    "similar": {"4": "4"},
                    "quality": 1,
                    "familiarity": 1
                }]
            }]
        })
        .to_string(),
    )
    .unwrap();
    let out = lectsum(&[
        "evaluate",
        "--survey",
        survey.to_str().unwrap(),
        "--summaries",
        tmp.path().to_str().unwrap(),
        "--report",
        tmp.path().join("report.json").to_str().unwrap(),
    ]);
    assert_exit(&out, 1);
}

#[test]
fn gen_deck_is_seed_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let deck_a = tmp.path().join("a");
    let deck_b = tmp.path().join("b");
    gen_deck(&deck_a, 17);
    gen_deck(&deck_b, 17);
    assert_eq!(read(&deck_a.join("frame_000.png")), read(&deck_b.join("frame_000.png")));
    assert_eq!(read(&deck_a.join("timing.json")), read(&deck_b.join("timing.json")));
    assert_eq!(read(&deck_a.join("truth.json")), read(&deck_b.join("truth.json")));

    let timing = json_of(&deck_a.join("timing.json"));
    assert_eq!(timing.as_object().unwrap().len(), 10);
    let truth = json_of(&deck_a.join("truth.json"));
    assert_eq!(truth["diagrams"].as_array().unwrap().len(), 4);
}
