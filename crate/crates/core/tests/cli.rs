mod common;

use common::*;
use scout_core::ingest::ledger::read_records;
use scout_core::ingest::{ledger_verify, CustodyAction};

fn small_corpus(case: &Case) {
    case.put("net/slashdot.pcap", &slashdot_pcap());
    case.put("docs/tampered.docx", &tampered_docx());
    case.put("docs/clean.docx", &clean_docx());
    case.put("mail/inbox.mbox", &mbox(5, 7).bytes);
    case.put("img/photo.png", &png(40, 30));
    case.put("notes.txt", b"meet at the dock\n");
}

/// Run every subcommand in order, checking the evidence snapshot after each.
#[test]
fn full_pipeline_leaves_evidence_untouched() {
    let mock = MockEndpoint::start(Mode::Hashed);
    let case = Case::new(&config_toml(&mock.chat_url(), Some(&mock.asr_url())));
    small_corpus(&case);
    case.put("audio/call.wav", &wav());
    case.put("video/clip.mp4", &mp4(12));
    let before = snapshot(&case.evidence);

    let (code, out, err) = case.scan();
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("registered 8 items"), "{out}");
    assert_eq!(snapshot(&case.evidence), before);

    let (code, _, err) = case.run(&["analyze"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(snapshot(&case.evidence), before);
    assert!(mock.hits() >= 8);

    let (code, _, err) = case.run(&["report"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(snapshot(&case.evidence), before);
    assert!(case.workspace.join("report.md").exists());

    let (code, out, _) = case.run(&["verify"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.starts_with("ok: 8 items intact"), "{out}");
    assert_eq!(snapshot(&case.evidence), before);

    let report = case.report_json();
    let entries = report["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 8);
    assert!(entries.iter().all(|e| e["status"] == "analyzed"), "{report:#}");
    let ranks: Vec<u64> = entries.iter().map(|e| e["rank"].as_u64().unwrap()).collect();
    assert_eq!(ranks, (1..=8).collect::<Vec<_>>());
    let caveats = report["caveats"].as_array().unwrap();
    assert!(caveats.iter().any(|c| c.as_str().unwrap().contains("False negatives")));

    let actions: Vec<CustodyAction> =
        read_records(&case.workspace.join("ledger.jsonl")).unwrap().into_iter().map(|r| r.action).collect();
    assert_eq!(actions.iter().filter(|a| **a == CustodyAction::Registered).count(), 8);
    assert_eq!(actions.iter().filter(|a| **a == CustodyAction::Extracted).count(), 8);
    assert!(actions.contains(&CustodyAction::Analyzed));
    assert!(actions.contains(&CustodyAction::Reported));
    assert_eq!(actions.last(), Some(&CustodyAction::Verified));
}

#[test]
fn media_reaches_the_wire_as_data_urls() {
    let mock = MockEndpoint::start(Mode::Uniform(3));
    let case = Case::new(&config_toml(&mock.chat_url(), None));
    case.put("photo.png", &png(2048, 16));
    case.put("clip.mp4", &mp4(3000));
    assert_eq!(case.scan().0, 0);
    assert_eq!(case.run(&["analyze"]).0, 0);
    let bodies = mock.bodies.lock().unwrap().clone();
    // One image request plus two video segments.
    assert_eq!(bodies.len(), 3);
    let image = bodies.iter().find(|b| b.contains("\"image_url\"")).expect("image request");
    assert!(image.contains("data:image/png;base64,"));
    assert!(image.contains("1024x8 (downscaled)"), "{image}");
    let videos: Vec<&String> = bodies.iter().filter(|b| b.contains("\"video_url\"")).collect();
    assert_eq!(videos.len(), 2);
    assert!(videos.iter().any(|b| b.contains("#t=0.000,1500.000")));
    assert!(videos.iter().any(|b| b.contains("#t=1500.000,3000.000")));
}

#[test]
fn verify_reports_a_flipped_byte() {
    let mock = MockEndpoint::start(Mode::Uniform(1));
    let case = Case::new(&config_toml(&mock.chat_url(), None));
    small_corpus(&case);
    assert_eq!(case.scan().0, 0);
    let path = case.evidence.join("notes.txt");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] ^= 0x01;
    std::fs::write(&path, bytes).unwrap();
    let (code, out, err) = case.run(&["verify"]);
    assert_eq!(code, 2, "{out}{err}");
    assert!(out.contains("MISMATCH notes.txt"), "{out}");
}

#[test]
fn verify_reports_a_broken_ledger_without_appending() {
    let case = Case::new(&config_toml(&dead_url(), None));
    small_corpus(&case);
    assert_eq!(case.scan().0, 0);
    let ledger = case.workspace.join("ledger.jsonl");
    let mut bytes = std::fs::read(&ledger).unwrap();
    let second_line = bytes.iter().position(|&b| b == b'\n').unwrap() + 1;
    let pos = second_line + bytes[second_line..].windows(6).position(|w| w == b"\"seq\":").unwrap() + 6;
    bytes[pos] = b'7';
    std::fs::write(&ledger, &bytes).unwrap();
    let (code, out, _) = case.run(&["verify"]);
    assert_eq!(code, 2);
    assert!(out.contains("ledger broken at seq 1"), "{out}");
    assert_eq!(std::fs::read(&ledger).unwrap(), bytes);
    // Every command that appends refuses a corrupt ledger.
    assert_eq!(case.run(&["report"]).0, 2);
    assert_eq!(case.run(&["analyze"]).0, 2);
}

#[test]
fn workspace_inside_evidence_is_refused() {
    let case = Case::new(&config_toml(&dead_url(), None));
    small_corpus(&case);
    let inside = case.evidence.join("ws");
    let (code, _, err) = scout(&[
        "scan",
        case.evidence.to_str().unwrap(),
        "--workspace",
        inside.to_str().unwrap(),
        "--case",
        case.case_file.to_str().unwrap(),
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("inside evidence root"), "{err}");
    assert!(!inside.exists());
}

#[test]
fn second_scan_is_refused() {
    let case = Case::new(&config_toml(&dead_url(), None));
    small_corpus(&case);
    assert_eq!(case.scan().0, 0);
    let (code, _, err) = case.scan();
    assert_eq!(code, 1);
    assert!(err.contains("already holds a manifest"), "{err}");
}

#[test]
fn analyze_resumes_without_repeating_model_calls() {
    let mock = MockEndpoint::start(Mode::Hashed);
    let case = Case::new(&config_toml(&mock.chat_url(), None));
    small_corpus(&case);
    assert_eq!(case.scan().0, 0);
    assert_eq!(case.run(&["analyze"]).0, 0);
    let first = mock.hits();
    assert_eq!(first, 6, "one request per single-chunk item");

    let (code, out, _) = case.run(&["analyze"]);
    assert_eq!(code, 0);
    assert!(out.contains("6 already complete"), "{out}");
    assert_eq!(mock.hits(), first);

    // Lose one run: exactly that run is redone.
    let runs = case.workspace.join("runs");
    let victim = std::fs::read_dir(&runs).unwrap().next().unwrap().unwrap().path();
    std::fs::remove_file(&victim).unwrap();
    assert_eq!(case.run(&["analyze"]).0, 0);
    assert_eq!(mock.hits(), first + 1);
    assert!(victim.exists());

    // More repetitions only add the missing ones.
    assert_eq!(case.run(&["analyze", "--runs", "2"]).0, 0);
    assert_eq!(mock.hits(), first + 1 + 6);
}

#[test]
fn dead_endpoint_still_yields_a_report_and_resume_recovers() {
    let case = Case::new(&config_toml(&dead_url(), None));
    small_corpus(&case);
    assert_eq!(case.scan().0, 0);
    let (code, _, err) = case.run(&["analyze"]);
    assert_eq!(code, 0);
    assert!(err.contains("got no model response"), "{err}");
    assert_eq!(case.run(&["report", "--format", "json"]).0, 0);
    assert!(!case.workspace.join("report.md").exists());
    let report = case.report_json();
    let entries = report["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    let tampered = entries.iter().find(|e| e["path"] == "docs/tampered.docx").unwrap();
    // Rule flags keep the tampered document on top with no model output.
    assert_eq!(tampered["rank"], 1);
    assert!(entries.iter().all(|e| e["model_flags"].as_array().unwrap().iter().any(|f| f["label"] == "model-unavailable")));

    // Bring an endpoint up and point the workspace at it.
    let mock = MockEndpoint::start(Mode::Uniform(4));
    std::fs::write(case.workspace.join("config"), config_toml(&mock.chat_url(), None)).unwrap();
    assert_eq!(case.run(&["analyze"]).0, 0);
    assert_eq!(mock.hits(), 6);
    assert_eq!(case.run(&["report"]).0, 0);
    let report = case.report_json();
    assert!(report["entries"]
        .as_array()
        .unwrap()
        .iter()
        .all(|e| e["findings"].as_array().unwrap().iter().all(|f| f["parse_status"] == "structured")));
}

#[test]
fn prose_answers_are_degraded_not_fatal() {
    let mock = MockEndpoint::start(Mode::Prose("This capture looks suspicious: periodic beaconing.".into()));
    let case = Case::new(&config_toml(&mock.chat_url(), None));
    case.put("a.pcap", &slashdot_pcap());
    assert_eq!(case.scan().0, 0);
    assert_eq!(case.run(&["analyze"]).0, 0);
    assert_eq!(case.run(&["report"]).0, 0);
    let report = case.report_json();
    let f = &report["entries"][0]["findings"][0];
    assert_eq!(f["parse_status"], "degraded");
    assert_eq!(f["relevance"], 5);
}

#[test]
fn models_ping() {
    let mock = MockEndpoint::start(Mode::Uniform(0));
    let case = Case::new(&config_toml(&mock.chat_url(), None));
    assert_eq!(case.scan().0, 0);
    let (code, out, _) = case.run(&["models", "ping"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("mock-text: ok") && out.contains("mock-vision: ok"), "{out}");
    // Ping is not an evidence interaction.
    assert_eq!(read_records(&case.workspace.join("ledger.jsonl")).unwrap().len(), 0);

    std::fs::write(case.workspace.join("config"), config_toml(&dead_url(), None)).unwrap();
    let (code, out, _) = case.run(&["models", "ping"]);
    assert_eq!(code, 3);
    assert!(out.contains("FAILED"), "{out}");
}

#[test]
fn unknown_profile_is_a_usage_error() {
    let case = Case::new(&config_toml(&dead_url(), None));
    small_corpus(&case);
    assert_eq!(case.scan().0, 0);
    let (code, _, err) = case.run(&["analyze", "--models", "nope"]);
    assert_eq!(code, 1);
    assert!(err.contains("nope"), "{err}");
    assert_eq!(case.run(&["analyze", "--runs", "0"]).0, 1);
}

#[test]
fn workspace_from_environment() {
    let mock = MockEndpoint::start(Mode::Uniform(2));
    let case = Case::new(&config_toml(&mock.chat_url(), None));
    case.put("notes.txt", b"hello\n");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_scout"))
        .args(["scan", case.evidence.to_str().unwrap(), "--case", case.case_file.to_str().unwrap()])
        .arg("--config")
        .arg(&case.config_file)
        .env("SCOUT_WORKSPACE", &case.workspace)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let verify = std::process::Command::new(env!("CARGO_BIN_EXE_scout"))
        .arg("verify")
        .env("SCOUT_WORKSPACE", &case.workspace)
        .output()
        .unwrap();
    assert_eq!(verify.status.code(), Some(0));
    assert!(ledger_verify(&case.workspace.join("ledger.jsonl")).unwrap().is_ok());
    let missing = std::process::Command::new(env!("CARGO_BIN_EXE_scout")).arg("verify").env_remove("SCOUT_WORKSPACE").output().unwrap();
    assert_eq!(missing.status.code(), Some(1));
}
