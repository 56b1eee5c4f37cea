mod common;

use std::collections::BTreeMap;

use cosynth::finding::{Finding, FindingKind};
use cosynth::frontends::parse_cisco;
use cosynth::llm::{default_iips, read_transcript, write_transcript, Origin, ReplayProvider, Role, ScriptedProvider};
use cosynth::orchestrator::{
    compute_leverage, run_local_synthesis, run_translation, synthesis_findings, translation_findings, Leverage, Limits,
    NoHuman, ScriptedHuman, Status, WorkflowOutcome, FULL_CONFIG_REQUEST,
};
use cosynth::topology::{generate_star, load_snapshot, local_policy_specs, Topology};

fn source() -> String {
    common::read("translation/source.cfg")
}

fn fenced(cfg: &str) -> String {
    format!("```\n{cfg}```\n")
}

fn scripted_translation() -> WorkflowOutcome {
    let (replies, humans) = common::translation_script();
    run_translation(
        &source(),
        &mut ScriptedProvider::new(replies),
        &default_iips(),
        Limits::default(),
        &mut ScriptedHuman::new(humans),
    )
    .unwrap()
}

fn scripted_synthesis(dir: Option<&std::path::Path>) -> (Topology, WorkflowOutcome) {
    let (replies, humans) = common::synthesis_script();
    let t = generate_star(6).unwrap();
    let out = run_local_synthesis(
        &t,
        &mut ScriptedProvider::new(replies),
        &default_iips(),
        Limits::default(),
        &mut ScriptedHuman::new(humans),
        dir,
    )
    .unwrap();
    (t, out)
}

/// First finding of every round, in order.
fn sent_kinds(out: &WorkflowOutcome) -> Vec<FindingKind> {
    let mut seen = BTreeMap::new();
    for (round, f) in &out.findings_history {
        seen.entry(*round).or_insert(f.kind());
    }
    seen.into_values().collect()
}

fn stage_ordering_holds(out: &WorkflowOutcome) -> bool {
    let mut rounds: BTreeMap<u32, Vec<&Finding>> = BTreeMap::new();
    for (r, f) in &out.findings_history {
        rounds.entry(*r).or_default().push(f);
    }
    rounds
        .values()
        .all(|fs| !fs.iter().any(|f| f.is_syntax()) || fs.iter().all(|f| f.is_syntax()))
}

#[test]
fn translation_script_reaches_verified_with_leverage_ten() {
    let out = scripted_translation();
    assert_eq!(out.status, Status::Verified);
    assert_eq!((out.leverage.automated_count, out.leverage.human_count), (20, 2));
    assert_eq!(
        out.leverage.leverage,
        Leverage::Ratio {
            automated: 10,
            human: 1
        }
    );
    use FindingKind::*;
    assert_eq!(
        sent_kinds(&out),
        vec![
            SyntaxWarning,
            Structural,
            Attribute,
            Attribute,
            PolicyBehavior,
            PolicyBehavior,
            SyntaxError,
            SyntaxError,
            PolicyBehavior,
            PolicyBehavior,
            PolicyBehavior,
            PolicyBehavior,
            PolicyBehavior,
            PolicyBehavior,
            SyntaxWarning,
            Attribute,
            PolicyBehavior,
            Attribute,
            SyntaxError,
        ]
    );
    assert!(stage_ordering_holds(&out));
    let full_requests = out.transcript.iter().filter(|m| m.text == FULL_CONFIG_REQUEST).count();
    assert_eq!(full_requests, 2);
}

#[test]
fn verified_translation_passes_the_verifier_chain_again() {
    let out = scripted_translation();
    let src = parse_cisco(&source()).config;
    let artifact = &out.artifacts["border1"];
    assert_eq!(translation_findings(&src, artifact).unwrap(), vec![]);
}

#[test]
fn perfect_translation_needs_no_corrections() {
    let reply = fenced(&common::read("translation/correct.junos"));
    let out = run_translation(
        &source(),
        &mut ScriptedProvider::new(vec![reply]),
        &default_iips(),
        Limits::default(),
        &mut NoHuman,
    )
    .unwrap();
    assert_eq!(out.status, Status::Verified);
    assert_eq!((out.leverage.automated_count, out.leverage.human_count), (0, 1));
    assert_eq!(out.leverage.leverage, Leverage::Ratio { automated: 0, human: 1 });
    assert!(out.findings_history.is_empty());
}

#[test]
fn oscillating_model_punts_at_the_automation_budget() {
    let a = fenced(&common::read("translation/faults/ospf_cost.junos"));
    let b = fenced(&common::read("translation/faults/ospf_passive.junos"));
    let limits = Limits::default();
    let out = run_translation(
        &source(),
        &mut ScriptedProvider::cycling(vec![a, b]),
        &default_iips(),
        limits,
        &mut NoHuman,
    )
    .unwrap();
    assert_eq!(out.status, Status::PuntedUnresolved);
    assert_eq!(out.leverage.automated_count, u64::from(limits.max_total_automated));
    assert!(out.artifacts.contains_key("border1"));
}

#[test]
fn repeated_syntax_error_punts_after_the_syntax_limit() {
    let bad = fenced(&common::read("translation/faults/prefix_list_syntax.junos"));
    let limits = Limits {
        max_syntax_retries: 2,
        ..Limits::default()
    };
    let out = run_translation(
        &source(),
        &mut ScriptedProvider::cycling(vec![bad]),
        &default_iips(),
        limits,
        &mut NoHuman,
    )
    .unwrap();
    assert_eq!(out.status, Status::PuntedUnresolved);
    assert_eq!(out.leverage.automated_count, 2);
    assert!(out.findings_history.iter().all(|(_, f)| f.is_syntax()));
}

#[test]
fn unparseable_source_is_rejected() {
    let err = run_translation(
        "ip community-list 1 permit .+\n",
        &mut ScriptedProvider::new(vec![]),
        &default_iips(),
        Limits::default(),
        &mut NoHuman,
    );
    assert!(err.is_err());
}

#[test]
fn replaying_the_recorded_translation_is_idempotent() {
    let path = common::fixture("transcripts/translation.jsonl");
    let recorded = read_transcript(&path).unwrap();
    let run = || {
        run_translation(
            &source(),
            &mut ReplayProvider::load(&path, true).unwrap(),
            &default_iips(),
            Limits::default(),
            &mut ScriptedHuman::from_transcript(&recorded),
        )
        .unwrap()
    };
    let (first, second) = (run(), run());
    assert_eq!(first, second);
    assert_eq!(first.transcript, recorded);
    assert_eq!(first.status, Status::Verified);
}

#[test]
fn synthesis_script_reaches_verified_with_leverage_six() {
    let dir = tempfile::tempdir().unwrap();
    let (t, out) = scripted_synthesis(Some(dir.path()));
    assert_eq!(out.status, Status::Verified);
    assert_eq!((out.leverage.automated_count, out.leverage.human_count), (12, 2));
    assert_eq!(out.leverage.leverage, Leverage::Ratio { automated: 6, human: 1 });
    assert!(out.violations.is_empty());
    assert!(stage_ordering_holds(&out));
    use FindingKind::*;
    let mut expected = vec![SyntaxError, Topology, Topology, Topology];
    expected.extend([SemanticPolicy; 6]);
    expected.extend([Topology; 3]);
    assert_eq!(sent_kinds(&out), expected);

    let snapshot = load_snapshot(&t, dir.path()).unwrap();
    assert_eq!(snapshot.len(), 6);
    let specs = local_policy_specs(&t).unwrap();
    for (router, text) in &out.artifacts {
        assert_eq!(synthesis_findings(text, &t, router, &specs[router]).unwrap(), vec![]);
    }
}

#[test]
fn iip_messages_lead_every_router_session() {
    let (_, out) = scripted_synthesis(None);
    for r in ["R1", "R2", "R3", "R4", "R5", "R6"] {
        let msgs: Vec<_> = out
            .transcript
            .iter()
            .filter(|m| m.session.as_deref() == Some(r))
            .collect();
        assert_eq!(msgs[0].role, Role::System);
        assert!(msgs
            .iter()
            .take_while(|m| m.role == Role::System)
            .all(|m| m.origin == Origin::Iip));
        let prompt = msgs.iter().find(|m| m.role == Role::User).unwrap();
        assert_eq!(prompt.origin, Origin::Iip);
        assert!(prompt.text.contains(&format!("{r}.cfg")));
    }
}

#[test]
fn reference_solution_verifies_without_corrections() {
    let replies = ["R1", "R2", "R3", "R4", "R5", "R6"]
        .map(|r| format!("{r}.cfg:\n{}", fenced(&common::read(&format!("star6/{r}.cfg")))))
        .to_vec();
    let t = generate_star(6).unwrap();
    let out = run_local_synthesis(
        &t,
        &mut ScriptedProvider::new(replies),
        &default_iips(),
        Limits::default(),
        &mut NoHuman,
        None,
    )
    .unwrap();
    assert_eq!(out.status, Status::Verified);
    assert_eq!(out.leverage.automated_count, 0);
    assert!(out.violations.is_empty());
}

#[test]
fn and_semantics_filter_draws_the_semantic_prompt() {
    let mut replies = vec![format!("R1.cfg:\n{}", fenced(&common::hub_with_and_filter()))];
    replies.push(format!("R1.cfg:\n{}", fenced(&common::read("star6/R1.cfg"))));
    let t = generate_star(6).unwrap();
    for r in ["R2", "R3", "R4", "R5", "R6"] {
        replies.push(format!(
            "{r}.cfg:\n{}",
            fenced(&common::read(&format!("star6/{r}.cfg")))
        ));
    }
    let out = run_local_synthesis(
        &t,
        &mut ScriptedProvider::new(replies),
        &default_iips(),
        Limits::default(),
        &mut NoHuman,
        None,
    )
    .unwrap();
    assert_eq!(out.status, Status::Verified);
    let sent: Vec<_> = out
        .transcript
        .iter()
        .filter(|m| m.origin == Origin::Automated)
        .collect();
    assert_eq!(sent.len(), 1);
    assert_eq!(
        sent[0].text,
        "The route-map FILTER_COMM_OUT_R2 permits routes that have the community 101:1. However, they should be denied."
    );
}

#[test]
fn global_violation_is_punted_not_fed_back() {
    let r2 = common::read("star6/R2.cfg").replace(
        " neighbor 1.0.0.1 remote-as 1\n",
        " neighbor 1.0.0.1 remote-as 1\n neighbor 1.0.0.1 route-map DROP in\n!\nroute-map DROP deny 10\n",
    );
    let mut replies = vec![format!("R1.cfg:\n{}", fenced(&common::read("star6/R1.cfg")))];
    replies.push(format!("R2.cfg:\n{}", fenced(&r2)));
    for r in ["R3", "R4", "R5", "R6"] {
        replies.push(format!(
            "{r}.cfg:\n{}",
            fenced(&common::read(&format!("star6/{r}.cfg")))
        ));
    }
    let t = generate_star(6).unwrap();
    let out = run_local_synthesis(
        &t,
        &mut ScriptedProvider::new(replies),
        &default_iips(),
        Limits::default(),
        &mut NoHuman,
        None,
    )
    .unwrap();
    assert_eq!(out.status, Status::PuntedUnresolved);
    assert!(!out.violations.is_empty());
    assert_eq!(out.leverage.automated_count, 0);
    assert!(out
        .findings_history
        .iter()
        .all(|(_, f)| f.kind() == FindingKind::Global));
}

#[test]
fn replaying_the_recorded_synthesis_is_idempotent() {
    let path = common::fixture("transcripts/synthesis.jsonl");
    let recorded = read_transcript(&path).unwrap();
    let t = generate_star(6).unwrap();
    let run = || {
        run_local_synthesis(
            &t,
            &mut ReplayProvider::load(&path, true).unwrap(),
            &default_iips(),
            Limits::default(),
            &mut ScriptedHuman::from_transcript(&recorded),
            None,
        )
        .unwrap()
    };
    let (first, second) = (run(), run());
    assert_eq!(first, second);
    assert_eq!(first.transcript, recorded);
    assert_eq!(compute_leverage(&recorded), first.leverage);
}

/// Rewrites the recorded transcripts from the scripted runs.
/// Run with `cargo test --test orchestrator -- --ignored`.
#[test]
#[ignore]
fn regenerate_transcripts() {
    write_transcript(
        &common::fixture("transcripts/translation.jsonl"),
        &scripted_translation().transcript,
    )
    .unwrap();
    write_transcript(
        &common::fixture("transcripts/synthesis.jsonl"),
        &scripted_synthesis(None).1.transcript,
    )
    .unwrap();
}

#[test]
fn recorded_transcripts_match_the_scripts() {
    assert_eq!(
        scripted_translation().transcript,
        read_transcript(&common::fixture("transcripts/translation.jsonl")).unwrap()
    );
    assert_eq!(
        scripted_synthesis(None).1.transcript,
        read_transcript(&common::fixture("transcripts/synthesis.jsonl")).unwrap()
    );
}
