//! Command-level integration tests against mock backends: per-method score
//! behavior, partial-failure exit codes, evaluation from records and from
//! live QA + judging, and the pointwise/pairwise rescoring paths.

mod common;

use std::path::Path;

use common::{
    assert_close, assert_exit, behaviorism_set, read_manifest, run_cli, spawn_pageview_server,
    EASY_CORRECT, HARD_CORRECT, QA_MODELS, SPLIT_SCORES,
};
use qdaps::datastore::{load_jsonl, save_json, save_jsonl, CandidateFile, ScoreRecord};
use qdaps::engine::{attempt_temperature, build_generation_prompt};
use qdaps::eval::{EvalRecord, JudgeVerdict};
use qdaps::gateway::{serialize_candidate_list, LlmRequest, MockBackend, RawCandidateRecord};
use qdaps::prompts;
use qdaps::types::{GoldPolicy, Question, ScoringConfig};

fn write_behaviorism_dir(dir: &Path) {
    let question = Question::new(
        "behaviorism",
        "Who is regarded as the father of modern behaviorism?",
    )
    .with_gold("John B. Watson");
    let file = CandidateFile {
        question,
        set: behaviorism_set(),
        popularity_resolved: true,
        popularity_convention: Some("iqr-winsorize-then-minmax".into()),
    };
    std::fs::create_dir_all(dir).unwrap();
    save_json(&dir.join("behaviorism.candidates.json"), &file).unwrap();
}

#[test]
fn score_reproduces_worked_example_via_cli() {
    let root = tempfile::tempdir().unwrap();
    let candidates = root.path().join("candidates");
    write_behaviorism_dir(&candidates);

    let out_dir = root.path().join("qdaps");
    let out = run_cli(
        &[
            "score",
            "--input",
            candidates.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
            "--alpha",
            "0.5",
            "--n",
            "20",
        ],
        &[],
    );
    assert_exit(&out, 0, "score");
    let results: Vec<ScoreRecord> = load_jsonl(&out_dir.join("results.jsonl")).unwrap();
    assert_eq!(results.len(), 1);
    assert_close(results[0].difficulty, 0.9186, 5e-3, "worked-example difficulty");
    let detail = results[0].detail.as_ref().unwrap();
    assert_eq!(detail.n_used, 20);
    assert!(detail.debiased);

    // Mean plausibility of the same table.
    let avg_dir = root.path().join("avg");
    let out = run_cli(
        &[
            "score",
            "--input",
            candidates.to_str().unwrap(),
            "--output",
            avg_dir.to_str().unwrap(),
            "--method",
            "avg",
            "--no-debias",
            "--n",
            "20",
        ],
        &[],
    );
    assert_exit(&out, 0, "avg score");
    let results: Vec<ScoreRecord> = load_jsonl(&avg_dir.join("results.jsonl")).unwrap();
    assert_close(results[0].difficulty, 0.31, 1e-12, "mean plausibility");
}

#[test]
fn alpha_zero_equals_no_debias_byte_for_byte() {
    let root = tempfile::tempdir().unwrap();
    let candidates = root.path().join("candidates");
    write_behaviorism_dir(&candidates);

    let zero = root.path().join("alpha-zero");
    let off = root.path().join("no-debias");
    for (dir, extra) in [(&zero, ["--alpha", "0"]), (&off, ["--no-debias", "--alpha"])] {
        let mut args = vec![
            "score",
            "--input",
            candidates.to_str().unwrap(),
            "--output",
            dir.to_str().unwrap(),
            "--n",
            "20",
        ];
        if extra[0] == "--alpha" {
            args.extend(["--alpha", "0"]);
        } else {
            args.extend(["--no-debias"]);
        }
        let out = run_cli(&args, &[]);
        assert_exit(&out, 0, "score variant");
    }
    let a = std::fs::read(zero.join("results.jsonl")).unwrap();
    let mut b = std::fs::read(off.join("results.jsonl")).unwrap();
    // The records embed the alpha and debias settings, which legitimately
    // differ; difficulties and breakdowns must agree exactly.
    let parse = |bytes: &[u8]| -> Vec<ScoreRecord> {
        String::from_utf8(bytes.to_vec())
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    };
    let ra = parse(&a);
    let rb = parse(&b);
    assert_eq!(ra.len(), rb.len());
    for (x, y) in ra.iter().zip(&rb) {
        assert_eq!(x.difficulty.to_bits(), y.difficulty.to_bits());
        let (dx, dy) = (x.detail.as_ref().unwrap(), y.detail.as_ref().unwrap());
        assert_eq!(dx.entropy.to_bits(), dy.entropy.to_bits());
        for (cx, cy) in dx
            .candidates
            .candidates
            .iter()
            .zip(&dy.candidates.candidates)
        {
            assert_eq!(cx.debiased, cy.debiased);
            assert_eq!(cx.share, cy.share);
        }
    }
    b.clear();
}

#[test]
fn generate_continues_past_failing_questions() {
    let root = tempfile::tempdir().unwrap();
    let dataset = root.path().join("questions.jsonl");
    let fixtures = root.path().join("fixtures");
    std::fs::create_dir_all(&fixtures).unwrap();

    let questions: Vec<Question> = (0..3)
        .map(|i| {
            Question::new(format!("q{i}"), format!("Question number {i}?"))
                .with_gold(format!("Gold {i}"))
        })
        .collect();
    let lines: Vec<String> = questions
        .iter()
        .map(|q| {
            serde_json::json!({"id": q.id, "question": q.text, "answer": q.gold_answer})
                .to_string()
        })
        .collect();
    std::fs::write(&dataset, lines.join("\n") + "\n").unwrap();

    let config = ScoringConfig {
        model_id: "mock".into(),
        n_candidates: 20,
        ..ScoringConfig::default()
    };
    let good: Vec<RawCandidateRecord> = (0..20)
        .map(|i| RawCandidateRecord {
            answer: format!("Answer {i}"),
            plausibility: Some(10.0 + i as f64),
            justification: "fits".into(),
        })
        .collect();
    for (qi, question) in questions.iter().enumerate() {
        if qi == 1 {
            // Question q1 never validates: every attempt replies prose.
            for attempt in 0..config.max_attempts {
                let request = build_generation_prompt(
                    question,
                    20,
                    GoldPolicy::WithGold,
                    &config,
                    attempt_temperature(0.0, attempt),
                )
                .unwrap();
                MockBackend::write_fixture(&fixtures, &request, "cannot comply").unwrap();
            }
        } else {
            let request =
                build_generation_prompt(question, 20, GoldPolicy::WithGold, &config, 0.0).unwrap();
            MockBackend::write_fixture(&fixtures, &request, &serialize_candidate_list(&good))
                .unwrap();
        }
    }

    let out_dir = root.path().join("out");
    let out = run_cli(
        &[
            "generate",
            "--input",
            dataset.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
            "--fixtures",
            fixtures.to_str().unwrap(),
        ],
        &[],
    );
    assert_exit(&out, 2, "partial failure exits 2");
    assert!(out_dir.join("q0.candidates.json").exists());
    assert!(!out_dir.join("q1.candidates.json").exists());
    assert!(out_dir.join("q2.candidates.json").exists());
    let manifest = read_manifest(&out_dir);
    let failed = manifest["failed"].as_array().unwrap();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0]["id"], "q1");
}

fn worked_example_records() -> Vec<EvalRecord> {
    let mut records = Vec::new();
    for (m, model) in QA_MODELS.iter().enumerate() {
        for q in 0..5 {
            for (offset, correct) in [(1, EASY_CORRECT[m][q]), (6, HARD_CORRECT[m][q])] {
                records.push(EvalRecord {
                    question_id: format!("q{}", q + offset),
                    qa_model_id: model.to_string(),
                    answer: String::new(),
                    judge_verdicts: vec![],
                    correct,
                });
            }
        }
    }
    records
}

fn worked_example_scores() -> Vec<ScoreRecord> {
    SPLIT_SCORES
        .iter()
        .map(|(id, value)| ScoreRecord {
            question: Question::new(*id, format!("Placeholder for {id}?")).with_gold("gold"),
            method: "qdaps".into(),
            difficulty: *value,
            detail: None,
        })
        .collect()
}

#[test]
fn evaluate_from_records_reproduces_worked_example() {
    let root = tempfile::tempdir().unwrap();
    let scores_path = root.path().join("results.jsonl");
    save_jsonl(&scores_path, &worked_example_scores()).unwrap();
    let records_path = root.path().join("records.jsonl");
    save_jsonl(&records_path, &worked_example_records()).unwrap();

    let out_dir = root.path().join("eval");
    let out = run_cli(
        &[
            "evaluate",
            "--input",
            scores_path.to_str().unwrap(),
            "--records",
            records_path.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_exit(&out, 0, "evaluate from records");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_close(summary["threshold"].as_f64().unwrap(), 0.69, 1e-12, "threshold");
    assert_close(summary["mu_easy"].as_f64().unwrap(), 0.86, 1e-12, "mu_easy");
    assert_close(summary["mu_hard"].as_f64().unwrap(), 0.2, 1e-12, "mu_hard");
    assert_close(summary["cohens_d"].as_f64().unwrap(), 3.697, 0.02, "d");
    assert_eq!(read_manifest(&out_dir)["llm_calls"].as_u64(), Some(0));
}

#[test]
fn evaluate_perfect_monotone_fixture_gives_rho_minus_one() {
    let root = tempfile::tempdir().unwrap();
    // Five questions whose difficulty decreases as more models answer them.
    let scores: Vec<ScoreRecord> = (0..5)
        .map(|k| ScoreRecord {
            question: Question::new(format!("q{k}"), format!("Q{k}?")).with_gold("gold"),
            method: "qdaps".into(),
            difficulty: 1.0 - 0.2 * k as f64,
            detail: None,
        })
        .collect();
    let mut records = Vec::new();
    for k in 0..5usize {
        for m in 0..4usize {
            records.push(EvalRecord {
                question_id: format!("q{k}"),
                qa_model_id: format!("m{m}"),
                answer: String::new(),
                judge_verdicts: vec![],
                correct: m < k,
            });
        }
    }
    let scores_path = root.path().join("results.jsonl");
    let records_path = root.path().join("records.jsonl");
    save_jsonl(&scores_path, &scores).unwrap();
    save_jsonl(&records_path, &records).unwrap();

    let out_dir = root.path().join("eval");
    let out = run_cli(
        &[
            "evaluate",
            "--input",
            scores_path.to_str().unwrap(),
            "--records",
            records_path.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
        ],
        &[],
    );
    assert_exit(&out, 0, "evaluate");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["spearman_rho"].as_f64(), Some(-1.0));
}

#[test]
fn evaluate_missing_records_path_is_fatal() {
    let root = tempfile::tempdir().unwrap();
    let scores_path = root.path().join("results.jsonl");
    save_jsonl(&scores_path, &worked_example_scores()).unwrap();
    let out = run_cli(
        &[
            "evaluate",
            "--input",
            scores_path.to_str().unwrap(),
            "--records",
            root.path().join("missing.jsonl").to_str().unwrap(),
            "--output",
            root.path().join("eval").to_str().unwrap(),
        ],
        &[],
    );
    assert_exit(&out, 1, "missing records file is fatal");
}

#[test]
fn evaluate_runs_qa_and_judging_against_mock() {
    let root = tempfile::tempdir().unwrap();
    let fixtures = root.path().join("fixtures");
    let cache = root.path().join("cache");
    std::fs::create_dir_all(&fixtures).unwrap();

    // Four questions straddling the median; two QA models; three judges.
    let questions: Vec<(Question, f64)> = (0..4)
        .map(|k| {
            (
                Question::new(format!("q{k}"), format!("Evaluated question {k}?"))
                    .with_gold(format!("Gold {k}")),
                0.2 + 0.2 * k as f64,
            )
        })
        .collect();
    let scores: Vec<ScoreRecord> = questions
        .iter()
        .map(|(q, difficulty)| ScoreRecord {
            question: q.clone(),
            method: "qdaps".into(),
            difficulty: *difficulty,
            detail: None,
        })
        .collect();
    let scores_path = root.path().join("results.jsonl");
    save_jsonl(&scores_path, &scores).unwrap();

    let qa_models = ["qa-alpha", "qa-beta"];
    let judges = ["judge-1", "judge-2", "judge-3"];
    for (k, (question, _)) in questions.iter().enumerate() {
        for (mi, model) in qa_models.iter().enumerate() {
            // Model answers: qa-alpha echoes the gold for the two easiest
            // questions, qa-beta for the three easiest.
            let correct = if mi == 0 { k < 2 } else { k < 3 };
            let answer = if correct {
                format!("Gold {k}")
            } else {
                format!("Wrong guess {k}")
            };
            let request = prompts::qa_request(model, &question.text);
            MockBackend::write_fixture(&fixtures, &request, &answer).unwrap();
            for (ji, judge) in judges.iter().enumerate() {
                // Two judges verdict faithfully; the third is unparseable,
                // exercising the count-as-No fallback without flipping the
                // majority.
                let reply = if ji == 2 {
                    "cannot decide".to_string()
                } else if correct {
                    "The candidate matches. Yes".to_string()
                } else {
                    "No".to_string()
                };
                let content =
                    prompts::render_gpt_eval(&question.text, &format!("Gold {k}"), &answer);
                let request = LlmRequest::new(*judge, content);
                MockBackend::write_fixture(&fixtures, &request, &reply).unwrap();
            }
        }
    }

    let out_dir = root.path().join("eval");
    let run = |dir: &Path| {
        run_cli(
            &[
                "evaluate",
                "--input",
                scores_path.to_str().unwrap(),
                "--output",
                dir.to_str().unwrap(),
                "--qa-models",
                "qa-alpha,qa-beta",
                "--judges",
                "judge-1,judge-2,judge-3",
                "--fixtures",
                fixtures.to_str().unwrap(),
                "--cache-dir",
                cache.to_str().unwrap(),
            ],
            &[],
        )
    };
    let out = run(&out_dir);
    assert_exit(&out, 0, "evaluate with QA + judging");

    let records: Vec<EvalRecord> = load_jsonl(&out_dir.join("records.jsonl")).unwrap();
    assert_eq!(records.len(), 8, "one record per (question, model)");
    for record in &records {
        assert_eq!(record.judge_verdicts.len(), 3);
        // The unparseable third judge always lands on No.
        assert!(!record.judge_verdicts[2].correct);
        let majority = record
            .judge_verdicts
            .iter()
            .filter(|v: &&JudgeVerdict| v.correct)
            .count()
            * 2
            > 3;
        assert_eq!(record.correct, majority);
    }
    let correct_by = |model: &str| {
        records
            .iter()
            .filter(|r| r.qa_model_id == model && r.correct)
            .count()
    };
    assert_eq!(correct_by("qa-alpha"), 2);
    assert_eq!(correct_by("qa-beta"), 3);

    let first = read_manifest(&out_dir);
    assert!(first["llm_calls"].as_u64().unwrap() > 0);

    // Warm rerun: everything is served from the cache.
    let rerun_dir = root.path().join("eval2");
    let out = run(&rerun_dir);
    assert_exit(&out, 0, "warm evaluate");
    let second = read_manifest(&rerun_dir);
    assert_eq!(second["llm_calls"].as_u64(), Some(0), "warm evaluate makes no calls");
    let a = std::fs::read(out_dir.join("records.jsonl")).unwrap();
    let b = std::fs::read(rerun_dir.join("records.jsonl")).unwrap();
    assert_eq!(a, b, "records identical under warm cache");
}

#[test]
fn pointwise_and_pairwise_modes_rescore_candidates() {
    let root = tempfile::tempdir().unwrap();
    let dataset = root.path().join("questions.jsonl");
    let fixtures = root.path().join("fixtures");
    let cache = root.path().join("cache");
    std::fs::create_dir_all(&fixtures).unwrap();

    let question =
        Question::new("q0", "Which of these is the right entity?").with_gold("Gold entity");
    std::fs::write(
        &dataset,
        serde_json::json!({"id": "q0", "question": question.text, "answer": "Gold entity"})
            .to_string()
            + "\n",
    )
    .unwrap();

    let config = ScoringConfig {
        model_id: "mock".into(),
        n_candidates: 20,
        ..ScoringConfig::default()
    };
    let answers: Vec<String> = (0..20).map(|i| format!("Entity {i}")).collect();
    let generation: Vec<RawCandidateRecord> = answers
        .iter()
        .enumerate()
        .map(|(i, answer)| RawCandidateRecord {
            answer: answer.clone(),
            plausibility: Some(50.0),
            justification: format!("candidate {i}"),
        })
        .collect();
    let request = build_generation_prompt(&question, 20, GoldPolicy::WithGold, &config, 0.0).unwrap();
    MockBackend::write_fixture(&fixtures, &request, &serialize_candidate_list(&generation)).unwrap();

    // Pointwise: candidate i is rescored to i + 1.
    for (i, answer) in answers.iter().enumerate() {
        let content = prompts::render_pointwise(&question.text, "Gold entity", answer);
        let mut request = LlmRequest::new("mock", content);
        request.temperature = 0.0;
        let record = RawCandidateRecord {
            answer: answer.clone(),
            plausibility: Some(i as f64 + 1.0),
            justification: "rescored".into(),
        };
        MockBackend::write_fixture(&fixtures, &request, &serialize_candidate_list(&[record]))
            .unwrap();
    }
    // Pairwise: the lower-indexed candidate always wins.
    for i in 0..20 {
        for j in (i + 1)..20 {
            let content = prompts::render_pairwise(
                &question.text,
                "Gold entity",
                &answers[i],
                &answers[j],
            );
            let mut request = LlmRequest::new("mock", content);
            request.temperature = 0.0;
            MockBackend::write_fixture(&fixtures, &request, "1").unwrap();
        }
    }

    let pointwise_dir = root.path().join("pointwise");
    let out = run_cli(
        &[
            "generate",
            "--input",
            dataset.to_str().unwrap(),
            "--output",
            pointwise_dir.to_str().unwrap(),
            "--mode",
            "pointwise",
            "--fixtures",
            fixtures.to_str().unwrap(),
            "--cache-dir",
            cache.to_str().unwrap(),
        ],
        &[],
    );
    assert_exit(&out, 0, "pointwise generate");
    let file: CandidateFile =
        qdaps::datastore::load_json(&pointwise_dir.join("q0.candidates.json")).unwrap();
    assert_eq!(file.set.mode, qdaps::types::Mode::Pointwise);
    for (i, candidate) in file.set.candidates.iter().enumerate() {
        assert_eq!(candidate.plausibility, i as f64 + 1.0);
    }
    // 1 generation call + 20 pointwise calls.
    assert_eq!(read_manifest(&pointwise_dir)["llm_calls"].as_u64(), Some(21));

    let pairwise_dir = root.path().join("pairwise");
    let out = run_cli(
        &[
            "generate",
            "--input",
            dataset.to_str().unwrap(),
            "--output",
            pairwise_dir.to_str().unwrap(),
            "--mode",
            "pairwise",
            "--fixtures",
            fixtures.to_str().unwrap(),
            "--cache-dir",
            cache.to_str().unwrap(),
        ],
        &[],
    );
    assert_exit(&out, 0, "pairwise generate");
    let file: CandidateFile =
        qdaps::datastore::load_json(&pairwise_dir.join("q0.candidates.json")).unwrap();
    assert_eq!(file.set.mode, qdaps::types::Mode::Pairwise);
    // An unbeaten first candidate maps to 100; strengths decay with rank.
    assert_close(file.set.candidates[0].plausibility, 100.0, 1e-9, "top strength");
    for pair in file.set.candidates.windows(2) {
        assert!(pair[0].plausibility > pair[1].plausibility);
    }
    // The listwise generation was already cached: exactly C(20,2) calls.
    assert_eq!(read_manifest(&pairwise_dir)["llm_calls"].as_u64(), Some(190));
}

#[test]
fn readability_prompt_and_popularity_methods() {
    let root = tempfile::tempdir().unwrap();
    let dataset = root.path().join("questions.jsonl");
    let lines = [
        serde_json::json!({"id": "short", "question": "What is the capital of China?", "answer": "Beijing"}),
        serde_json::json!({"id": "long", "question": "Considering the intergovernmental organizations established immediately following the conclusion of international hostilities, which multilateral institution subsequently administered humanitarian operations?", "answer": "Nonexistent Entity Xyz"}),
    ];
    std::fs::write(
        &dataset,
        lines.map(|l| l.to_string()).join("\n") + "\n",
    )
    .unwrap();

    for method in ["fk", "fog"] {
        let out_dir = root.path().join(method);
        let out = run_cli(
            &[
                "score",
                "--input",
                dataset.to_str().unwrap(),
                "--output",
                out_dir.to_str().unwrap(),
                "--method",
                method,
            ],
            &[],
        );
        assert_exit(&out, 0, method);
        let results: Vec<ScoreRecord> = load_jsonl(&out_dir.join("results.jsonl")).unwrap();
        assert_eq!(results.len(), 2);
        assert!(
            results[1].difficulty > results[0].difficulty,
            "{method}: the long question grades harder"
        );
    }

    // Prompt-based difficulty through the mock backend.
    let fixtures = root.path().join("fixtures");
    std::fs::create_dir_all(&fixtures).unwrap();
    for (question, reply) in [
        ("What is the capital of China?", "12"),
        (
            "Considering the intergovernmental organizations established immediately following the conclusion of international hostilities, which multilateral institution subsequently administered humanitarian operations?",
            "Difficulty: 88/100",
        ),
    ] {
        let request = LlmRequest::new("mock", prompts::render_prompt_difficulty(question));
        MockBackend::write_fixture(&fixtures, &request, reply).unwrap();
    }
    let out_dir = root.path().join("prompt");
    let out = run_cli(
        &[
            "score",
            "--input",
            dataset.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
            "--method",
            "prompt",
            "--fixtures",
            fixtures.to_str().unwrap(),
        ],
        &[],
    );
    assert_exit(&out, 0, "prompt method");
    let results: Vec<ScoreRecord> = load_jsonl(&out_dir.join("results.jsonl")).unwrap();
    assert_eq!(results[0].difficulty, 12.0);
    assert_eq!(results[1].difficulty, 88.0);

    // Gold-answer popularity proxy: known page easy, missing page hardest.
    let (url, _) = spawn_pageview_server(vec![("Beijing".into(), 5000)]);
    let out_dir = root.path().join("popularity");
    let out = run_cli(
        &[
            "score",
            "--input",
            dataset.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
            "--method",
            "popularity",
            "--cache-dir",
            root.path().join("cache").to_str().unwrap(),
        ],
        &[("QDAPS_PAGEVIEWS_BASE_URL", &url)],
    );
    assert_exit(&out, 0, "popularity method");
    let results: Vec<ScoreRecord> = load_jsonl(&out_dir.join("results.jsonl")).unwrap();
    assert_eq!(results[0].difficulty, 0.0, "batch-max gold page");
    assert_eq!(results[1].difficulty, 1.0, "unresolved gold page");
}

#[test]
fn generate_with_stratified_sample_flag() {
    let root = tempfile::tempdir().unwrap();
    let dataset = root.path().join("questions.jsonl");
    let fixtures = root.path().join("fixtures");
    std::fs::create_dir_all(&fixtures).unwrap();

    // 6 who / 4 what; sampling 5 should draw 3 + 2.
    let mut questions = Vec::new();
    for i in 0..6 {
        questions.push(Question::new(format!("who{i}"), format!("Who did thing {i}?")).with_gold("G"));
    }
    for i in 0..4 {
        questions.push(Question::new(format!("what{i}"), format!("What is thing {i}?")).with_gold("G"));
    }
    let lines: Vec<String> = questions
        .iter()
        .map(|q| serde_json::json!({"id": q.id, "question": q.text, "answer": "G"}).to_string())
        .collect();
    std::fs::write(&dataset, lines.join("\n") + "\n").unwrap();

    let config = ScoringConfig {
        model_id: "mock".into(),
        n_candidates: 20,
        ..ScoringConfig::default()
    };
    let good: Vec<RawCandidateRecord> = (0..20)
        .map(|i| RawCandidateRecord {
            answer: format!("Option {i}"),
            plausibility: Some(1.0 + i as f64),
            justification: "j".into(),
        })
        .collect();
    for question in &questions {
        let request =
            build_generation_prompt(question, 20, GoldPolicy::WithGold, &config, 0.0).unwrap();
        MockBackend::write_fixture(&fixtures, &request, &serialize_candidate_list(&good)).unwrap();
    }

    let out_dir = root.path().join("out");
    let out = run_cli(
        &[
            "generate",
            "--input",
            dataset.to_str().unwrap(),
            "--output",
            out_dir.to_str().unwrap(),
            "--fixtures",
            fixtures.to_str().unwrap(),
            "--sample",
            "5",
            "--seed",
            "7",
        ],
        &[],
    );
    assert_exit(&out, 0, "sampled generate");
    let files: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().to_string())
        .filter(|n| n.ends_with(".candidates.json"))
        .collect();
    assert_eq!(files.len(), 5);
    let who = files.iter().filter(|n| n.starts_with("who")).count();
    assert_eq!(who, 3, "proportional allocation draws 3 of 6 who-questions");
}
