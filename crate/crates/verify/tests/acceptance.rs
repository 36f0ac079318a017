//! Release acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tower::ServiceExt;
use tutorloop_core::gateway::{MockGateway, MockScript};
use tutorloop_core::irt::io::read_interactions;
use tutorloop_core::irt::{
    learning_gain, prob_correct, Ability, CalibrationConfig, CalibrationObjective, InteractionRecord, ItemParams,
};
use tutorloop_core::item_bank::{Choice, Concept, Exercise, ItemBank, ItemRole};
use tutorloop_core::orchestrator::{replay, FinishReason, Journey, JourneyContext, Phase, SessionEvent};
use tutorloop_core::prompt::{parse_summary_reply, render_materials, render_summary_reply, PromptEngine};
use tutorloop_core::sim::{
    random_walk, recovery_check, run_cohort, synthetic_log, transcript_stats_from_paths, SelectionPolicy, SyntheticLog,
};
use tutorloop_core::student_model::{
    discrepancy, init_profile, OnboardingSurvey, ParsedSummary, Perception, Processing, ProficiencyLabel,
    StudentProfile, Understanding,
};
use tutorloop_service::api::{router, AppState};
use tutorloop_service::config::DEMO_MOCK_SCRIPT;
use tutorloop_service::store::FileStore;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn core_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core")
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: f64, detail: String) -> Outcome {
    let secs = elapsed.as_secs_f64();
    check(
        secs < limit_secs,
        format!("{detail}; {secs:.2}s of {limit_secs}s budget"),
    )
}

// ---- response model --------------------------------------------------------

fn eq1_exactness() -> Outcome {
    let start = Instant::now();
    let half = prob_correct(&ItemParams::new("x", 1.0, 0.0), &Ability::new(0.0)).map_err(|e| e.to_string())?;
    if half != 0.5 {
        return Err(format!("P(a=1, d=0, theta=0) = {half:e}"));
    }
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0f64;
    for _ in 0..10_000 {
        let a = rng.random_range(0.2..3.0);
        let d = rng.random_range(-3.0..3.0);
        let theta = rng.random_range(-4.0..4.0);
        let item = ItemParams::new("x", a, d);
        let p = prob_correct(&item, &Ability::new(theta)).unwrap();
        let q = prob_correct(&item, &Ability::new(2.0 * d - theta)).unwrap();
        worst = worst.max((p + q - 1.0).abs());
    }
    if worst > 1e-12 {
        return Err(format!("symmetry residual {worst:e} > 1e-12"));
    }
    within(
        start.elapsed(),
        1.0,
        format!("P=0.5 exactly; worst symmetry residual {worst:.1e} over 10000 draws"),
    )
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let log = synthetic_log(40, 15, 11).map_err(|e| e.to_string())?;
    let obj = CalibrationObjective::new(&log.records, &CalibrationConfig::default()).map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(5);
    let h = 1e-5;
    let mut worst = 0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..obj.dimension()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g = obj.gradient(&x);
        let mut diff = 0.0;
        let mut norm = 0.0;
        for k in 0..x.len() {
            let (mut up, mut down) = (x.clone(), x.clone());
            up[k] += h;
            down[k] -= h;
            let fd = (obj.value(&up) - obj.value(&down)) / (2.0 * h);
            diff += (g[k] - fd).powi(2);
            norm += g[k].powi(2).max(fd.powi(2));
        }
        worst = worst.max((diff / norm.max(1e-300)).sqrt());
    }
    if worst > 1e-5 {
        return Err(format!("worst relative error {worst:.2e} > 1e-5"));
    }
    within(
        start.elapsed(),
        5.0,
        format!(
            "worst relative error {worst:.2e} at 100 points, dim {}",
            obj.dimension()
        ),
    )
}

fn bundled_synthetic_log() -> Result<SyntheticLog, String> {
    let dir = core_dir().join("data/synthetic");
    let file = std::fs::File::open(dir.join("responses.jsonl")).map_err(|e| e.to_string())?;
    let records: Vec<InteractionRecord> = read_interactions(BufReader::new(file)).map_err(|e| e.to_string())?;
    let truth: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("truth.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let items: Vec<ItemParams> = serde_json::from_value(truth["items"].clone()).map_err(|e| e.to_string())?;
    let thetas: BTreeMap<String, f64> = serde_json::from_value(truth["thetas"].clone()).map_err(|e| e.to_string())?;
    Ok(SyntheticLog { records, items, thetas })
}

fn parameter_recovery() -> Outcome {
    let log = bundled_synthetic_log()?;
    let start = Instant::now();
    let r = recovery_check(&log, 0.2, 7, &CalibrationConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let detail = format!(
        "r(d)={:.4} r(a)={:.4} r(theta)={:.4} held-out AUC={:.4} ({} responses), {} iterations",
        r.pearson_difficulty, r.pearson_discrimination, r.pearson_theta, r.held_out_auc, r.n_held_out, r.iterations
    );
    if r.pearson_difficulty < 0.9 || r.held_out_auc < 0.70 {
        return Err(format!("{detail}; need r(d) >= 0.9 and AUC >= 0.70"));
    }
    within(elapsed, 60.0, detail)
}

fn selection_mechanism() -> Outcome {
    let start = Instant::now();
    let report = run_cohort(1000, &ItemBank::bundled(), 42, SelectionPolicy::Adaptive).map_err(|e| e.to_string())?;
    let ratio = report.correctness_ratio_first_response;
    let detail = format!(
        "ratio {ratio:.4} ({}/{} first attempts)",
        report.first_correct, report.first_attempts
    );
    if !(0.45..=0.60).contains(&ratio) {
        return Err(format!("{detail}; outside [0.45, 0.60]"));
    }
    within(start.elapsed(), 30.0, detail)
}

fn learning_gain_oracle() -> Outcome {
    let gain = |pre: f64, post: f64, items: &[ItemParams]| {
        learning_gain(&Ability::new(pre), &Ability::new(post), items).map_err(|e| e.to_string())
    };
    let mixed = [ItemParams::new("x", 1.7, 0.3), ItemParams::new("y", 0.6, -1.1)];
    let zero = gain(0.42, 0.42, &mixed)?;
    let single = gain(0.0, 3f64.ln(), &[ItemParams::new("x", 1.0, 0.0)])?;
    let triple_items = [
        ItemParams::new("a", 1.0, -1.0),
        ItemParams::new("b", 1.0, 0.0),
        ItemParams::new("c", 1.0, 1.0),
    ];
    let triple = gain(0.0, 1.0, &triple_items)?;
    let mut failures = Vec::new();
    if zero != 0.0 {
        failures.push(format!("equal abilities gave {zero:e}"));
    }
    if single != 0.25 {
        failures.push(format!("single item gave {single:.17}"));
    }
    if (triple - 0.1936).abs() > 1e-3 {
        failures.push(format!(
            "3-item fixture gave {triple:.6}, expected 0.1936 +/- 1e-3 (|diff| = {:.4})",
            (triple - 0.1936).abs()
        ));
    }
    let detail = format!("zero={zero}, single={single}, 3-item={triple:.6}");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", failures.join("; ")))
    }
}

// ---- prompts ---------------------------------------------------------------

const SESSION1: &str = include_str!("../../core/tests/fixtures/session1_prompt.golden.txt");
const SESSION2: &str = include_str!("../../core/tests/fixtures/session2_prompt.golden.txt");
const SUMMARY_REPLY: &str = include_str!("../../core/tests/fixtures/session1_summary_reply.txt");
const MATERIALS: &str = include_str!("../../core/tests/fixtures/materials_two_items.golden.txt");
const UNDERCONFIDENT: &str = "- The student has self-reported his/her proficiency about this concept as “Weak”, but the measured proficiency is “Strong”. Encourage the student by telling that he/she is better than he/she thinks according to the pre-test result.\n";
const OVERCONFIDENT: &str = "- The student has self-reported his/her proficiency about this concept as “Strong”, but the measured proficiency is “Weak”. The pre-test suggests room to grow, so check the student's understanding at each step without discouraging him/her.\n";

fn exercise(id: &str, stem: &str, choices: &[&str], answer: &str, explanation: &str) -> Exercise {
    Exercise {
        item_id: id.into(),
        concept: Concept::Pronouns,
        stem: stem.into(),
        choices: choices
            .iter()
            .zip(["A", "B", "C", "D", "E"])
            .map(|(t, l)| Choice {
                label: l.into(),
                text: (*t).into(),
            })
            .collect(),
        answer: answer.into(),
        explanation: explanation.into(),
        params: None,
        role_tags: [ItemRole::Tutoring].into(),
    }
}

fn participant(self_reported: ProficiencyLabel, measured: ProficiencyLabel, struggled: bool) -> StudentProfile {
    let survey = OnboardingSurvey {
        perception: Some(Perception::Intuitive),
        processing: Some(Processing::Active),
        understanding: Some(Understanding::Global),
        self_reported: Concept::ALL.iter().map(|c| (*c, self_reported)).collect(),
        demographics: Default::default(),
    };
    let mut profile = init_profile("p-07", &survey, &Concept::ALL).unwrap();
    for state in profile.concept_states.values_mut() {
        state.measured = Some(measured);
        state.discrepancy = Some(discrepancy(self_reported, measured));
    }
    let ratio = if struggled { 0.25 } else { 0.75 };
    profile
        .set_first_response_ratio(Concept::Pronouns, Some(ratio))
        .unwrap();
    profile
}

fn random_field(rng: &mut StdRng) -> String {
    const WORDS: &[&str] = &[
        "pronoun",
        "antecedent",
        "comma",
        "however,",
        "the",
        "student's",
        "3.5",
        "(example)",
        "“quoted”",
        "é",
        "semicolon;",
        "Transitions",
        "-",
        "again.",
    ];
    const SEPS: &[&str] = &[" ", " ", " ", "\n", ", ", "\n\n", ". "];
    let n = rng.random_range(1..30);
    let mut s = String::new();
    for _ in 0..n {
        s.push_str(WORDS[rng.random_range(0..WORDS.len())]);
        s.push_str(SEPS[rng.random_range(0..SEPS.len())]);
    }
    s.trim().to_string()
}

fn prompt_goldens() -> Outcome {
    use ProficiencyLabel::{Strong, Weak};
    let engine = PromptEngine::default();
    let materials = vec![
        exercise("x1", "Stem one?", &["alpha", "beta"], "B", "Because beta."),
        exercise(
            "x2",
            "Stem two?",
            &["gamma", "delta", "epsilon"],
            "C",
            "Because epsilon.",
        ),
    ];
    if render_materials(&materials) != MATERIALS {
        return Err("materials block differs from golden".into());
    }
    let summary = engine
        .parse_summary(SUMMARY_REPLY, Concept::Pronouns)
        .map_err(|e| e.to_string())?;
    let struggle_start = SESSION2
        .find("- The student had difficulty")
        .ok_or("golden lacks struggle block")?;
    let struggle_end = SESSION2
        .find("- If the student gives the correct answer")
        .ok_or("golden lacks rules")?;
    let no_struggle = format!("{}{}", &SESSION2[..struggle_start], &SESSION2[struggle_end..]);

    let mut cases = 0;
    for (self_reported, measured, line) in [
        (Weak, Strong, UNDERCONFIDENT),
        (Strong, Strong, ""),
        (Strong, Weak, OVERCONFIDENT),
    ] {
        for struggled in [true, false] {
            let profile = participant(self_reported, measured, struggled);
            let s1 = engine
                .build_system_prompt(&profile, Concept::Pronouns, &materials, 1, None)
                .map_err(|e| e.to_string())?;
            let want1 = format!("{}{MATERIALS}", SESSION1.replace(UNDERCONFIDENT, line));
            let s2 = engine
                .build_system_prompt(&profile, Concept::Punctuation, &materials, 2, Some(&summary))
                .map_err(|e| e.to_string())?;
            let base2 = if struggled {
                SESSION2.to_string()
            } else {
                no_struggle.clone()
            };
            let want2 = format!("{}{MATERIALS}", base2.replace(UNDERCONFIDENT, line));
            for (session, got, want) in [(1, s1, want1), (2, s2, want2)] {
                if got != want {
                    return Err(format!(
                        "session {session} prompt differs (self={self_reported:?}, measured={measured:?}, struggled={struggled})"
                    ));
                }
                cases += 1;
            }
        }
    }

    let mut rng = StdRng::seed_from_u64(2024);
    for k in 0..1000 {
        let s = ParsedSummary {
            specific_topics: random_field(&mut rng),
            response_level_actions: random_field(&mut rng),
            learning_style_actions: random_field(&mut rng),
            session_concept: Concept::ALL[k % 3],
        };
        let reply = render_summary_reply(&s);
        for strict in [false, true] {
            match parse_summary_reply(&reply, s.session_concept, strict) {
                Ok(parsed) if parsed == s => {}
                other => return Err(format!("summary round trip {k} (strict={strict}) gave {other:?}")),
            }
        }
    }
    Ok(format!("{cases} prompt variants byte-exact; 1000 summaries round-trip"))
}

// ---- end to end ------------------------------------------------------------

struct Client {
    app: Router,
    id: String,
    token: String,
}

async fn send(
    app: &Router,
    method: Method,
    uri: &str,
    token: Option<&str>,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(t) = token {
        req = req.header("authorization", format!("Bearer {t}"));
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

impl Client {
    async fn post(&self, path: &str, body: Value) -> Result<Value, String> {
        let uri = format!("/v1/students/{}{path}", self.id);
        match send(&self.app, Method::POST, &uri, Some(&self.token), Some(body)).await {
            (StatusCode::OK, v) => Ok(v),
            (s, v) => Err(format!("POST {path}: {s} {v}")),
        }
    }

    async fn get(&self, path: &str) -> Result<Value, String> {
        let uri = format!("/v1/students/{}{path}", self.id);
        match send(&self.app, Method::GET, &uri, Some(&self.token), None).await {
            (StatusCode::OK, v) => Ok(v),
            (s, v) => Err(format!("GET {path}: {s} {v}")),
        }
    }
}

fn answer_all(bank: &ItemBank, form: &Value, correct: impl Fn(usize) -> bool) -> Value {
    let answers: serde_json::Map<String, Value> = form["items"]
        .as_array()
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(k, item)| {
            let id = item["item_id"].as_str().unwrap_or_default();
            let e = bank.get(id).expect("form item in bank");
            let label = if correct(k) {
                e.answer.clone()
            } else {
                e.choices.iter().find(|c| c.label != e.answer).unwrap().label.clone()
            };
            (id.to_string(), json!(label))
        })
        .collect();
    json!({ "answers": answers })
}

fn recover(dir: &Path) -> Result<Arc<AppState>, String> {
    let ctx = Arc::new(JourneyContext::new(ItemBank::bundled()));
    let gateway = Arc::new(MockGateway::new(
        MockScript::load(DEMO_MOCK_SCRIPT).map_err(|e| e.to_string())?,
    ));
    let store = Arc::new(FileStore::open(dir).map_err(|e| e.to_string())?);
    let (state, _) = AppState::recover(ctx, gateway, store, chrono::Duration::hours(1)).map_err(|e| e.to_string())?;
    Ok(state)
}

async fn scripted_journey(dir: &Path) -> Result<(Journey, usize), String> {
    let bank = ItemBank::bundled();
    let state = recover(dir)?;
    let app = router(state.clone());
    let (status, created) = send(
        &app,
        Method::POST,
        "/v1/students",
        None,
        Some(json!({ "student_id": "accept-01" })),
    )
    .await;
    if status != StatusCode::CREATED {
        return Err(format!("create student: {status} {created}"));
    }
    let c = Client {
        app,
        id: "accept-01".into(),
        token: created["token"].as_str().unwrap_or_default().into(),
    };

    let survey = json!({
        "perception": "intuitive", "processing": "active", "understanding": "global",
        "self_reported": { "Pronouns": "Weak", "Punctuation": "Moderate", "Transitions": "Strong" },
    });
    let onboarded = c.post("/survey", survey).await?;
    let mut body = c
        .post("/pretest", answer_all(&bank, &onboarded["pretest"], |k| k % 3 != 1))
        .await?;
    let mut turns = 0;
    for round in 0..3 {
        if body["state"]["phase"] != "TutoringSession" {
            return Err(format!("round {round} did not start a session: {body}"));
        }
        let finished = loop {
            turns += 1;
            if turns > 200 {
                return Err("tutor never finished".into());
            }
            let reply = c
                .post(
                    "/session/messages",
                    json!({ "content": if turns % 2 == 1 { "B" } else { "Could you explain?" } }),
                )
                .await?;
            if reply["finished"] == true {
                break reply;
            }
        };
        if finished["reply"].as_str().is_none_or(|r| r.contains("FINISHED.")) {
            return Err(format!("closing reply missing or shows the sentinel: {finished}"));
        }
        let post = c
            .post("/posttest", answer_all(&bank, &finished["posttest"], |k| k % 2 == 0))
            .await?;
        if post["report"]["gain"].as_f64().is_none() {
            return Err(format!("no gain in post-test response: {post}"));
        }
        if round < 2 {
            let done: Vec<&str> = post["state"]["completed_concepts"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(Value::as_str)
                .collect();
            let next = ["Pronouns", "Punctuation", "Transitions"]
                .into_iter()
                .find(|x| !done.contains(x))
                .unwrap();
            body = c.post("/concept", json!({ "concept": next })).await?;
        } else if post["state"]["phase"] != "Completed" {
            return Err(format!("journey did not complete: {}", post["state"]));
        }
    }
    let state_view = c.get("").await?;
    if state_view["profile"]["sessions_completed"] != 3 {
        return Err(format!("expected 3 summarized sessions: {state_view}"));
    }
    let journey = state.slot("accept-01").ok_or("student vanished")?.journey();
    Ok(((*journey).clone(), turns))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runtime = tokio::runtime::Builder::new_current_thread()
        .build()
        .map_err(|e| e.to_string())?;
    let (live, turns) = runtime.block_on(scripted_journey(dir.path()))?;

    if live.phase() != Phase::Completed || live.state.sessions.len() != 3 {
        return Err(format!(
            "final phase {} with {} sessions",
            live.phase(),
            live.state.sessions.len()
        ));
    }
    if let Some(s) = live.state.sessions.iter().find(|s| s.reason != FinishReason::Sentinel) {
        return Err(format!("session {} ended by {:?}", s.session_index, s.reason));
    }
    let summaries = live.profile.as_ref().and_then(|p| p.last_summary()).is_some();
    if !summaries {
        return Err("no parsed summary on the profile".into());
    }

    let log = std::fs::read_to_string(dir.path().join("students/accept-01/events.jsonl")).map_err(|e| e.to_string())?;
    let events: Vec<SessionEvent> = log
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let ctx = JourneyContext::new(ItemBank::bundled());
    let replayed = replay("accept-01", events.iter().map(|e| &e.event), &ctx).map_err(|e| e.to_string())?;
    if replayed != live {
        return Err("replayed journey differs from the live one".into());
    }
    let restarted = recover(dir.path())?
        .slot("accept-01")
        .ok_or("student lost on restart")?
        .journey();
    if *restarted != live {
        return Err("journey recovered on restart differs from the live one".into());
    }
    within(
        start.elapsed(),
        10.0,
        format!(
            "3 concepts, {turns} student turns, {} events replay identically",
            events.len()
        ),
    )
}

// ---- transcripts and state machine -------------------------------------------

fn transcript_stats() -> Outcome {
    let dir = core_dir().join("data/transcripts");
    let files: Vec<PathBuf> = ["pronouns", "punctuation", "transitions"]
        .iter()
        .map(|c| dir.join(format!("{c}.jsonl")))
        .collect();
    let s = transcript_stats_from_paths(&files).map_err(|e| e.to_string())?;
    // Counted by hand from the three fixture files.
    let expected = (3, 23, 13, 10, 99, 21);
    let got = (
        s.dialogues,
        s.total_turns,
        s.tutor_utterances,
        s.student_utterances,
        s.tutor_words,
        s.student_words,
    );
    let table = s.to_string();
    let row_ok = table
        .lines()
        .any(|l| l.starts_with("Avg. Turns per dialogue") && l.ends_with("7.67"));
    check(
        got == expected && s.avg_turns_per_dialogue == 23.0 / 3.0 && row_ok,
        format!(
            "dialogues={} turns={} avg turns={:.2} words/tutor utt={:.2} words/student utt={:.2}",
            s.dialogues,
            s.total_turns,
            s.avg_turns_per_dialogue,
            s.avg_words_per_tutor_utterance,
            s.avg_words_per_student_utterance
        ),
    )
}

fn state_machine_safety() -> Outcome {
    let ctx = JourneyContext::new(ItemBank::bundled());
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get()).min(8) as u64;
    let results: Vec<(usize, usize, Vec<String>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let ctx = &ctx;
                scope.spawn(move || {
                    let (mut steps, mut completed, mut violations) = (0, 0, Vec::new());
                    for seed in (t..10_000).step_by(threads as usize) {
                        let r = random_walk(seed, 400, ctx);
                        steps += r.steps;
                        completed += usize::from(r.phases.last() == Some(&Phase::Completed));
                        violations.extend(r.violations.into_iter().map(|v| format!("seed {seed}: {v}")));
                    }
                    (steps, completed, violations)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let steps: usize = results.iter().map(|r| r.0).sum();
    let completed: usize = results.iter().map(|r| r.1).sum();
    let violations: Vec<&String> = results.iter().flat_map(|r| &r.2).collect();
    let detail = format!(
        "10000 walks, {steps} events, {completed} reached Completed, {} violations",
        violations.len()
    );
    match violations.first() {
        None => Ok(detail),
        Some(v) => Err(format!("{detail}; first: {v}")),
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("response-model exactness", eq1_exactness),
        ("calibration gradient", gradient_check),
        ("parameter recovery", parameter_recovery),
        ("selection mechanism", selection_mechanism),
        ("learning-gain oracle", learning_gain_oracle),
        ("prompt goldens", prompt_goldens),
        ("end-to-end journey", end_to_end),
        ("transcript stats", transcript_stats),
        ("state-machine safety", state_machine_safety),
    ];
    println!("\nrunning {} acceptance criteria", criteria.len());
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<26} {secs:>7.2}s  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name:<26} {secs:>7.2}s  {detail}");
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed\n", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
