#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vu::fixture::{build_fixture, Fixture, FixtureTargets};
use vu::formats::starter_lexicon;
use vu::platform::{FamiliarityRequest, LoopRequest, Platform, RegisterRequest, ResponseRequest};
use vu::store::EventLog;
use vu_core::design::{StimulusManifest, StudyDefinition};
use vu_core::events::{EventPayload, EventRecord, Registration, StudySnapshot};
use vu_core::metrics::Evaluation;
use vu_core::model::{
    AreaId, FamiliarityLevel, FreeTextItem, GroupView, Guess, ParticipantGroup, ParticipantId, ParticipantRecord,
    SequenceId, StudyArea,
};
use vu_core::semantic::{element_frequencies, map_terms, normalize_tokens, SemanticLexicon, SemanticOptions, ThematicGroup};
use vu_core::session::Phase;

pub const T0: u64 = 1_700_000_000_000;

pub fn fixture(seed: u64) -> Fixture {
    build_fixture(&FixtureTargets::tokyo(), &starter_lexicon(), seed).expect("shipped targets are satisfiable")
}

pub fn fixture_log(seed: u64) -> EventLog {
    fixture(seed).to_log(T0).expect("fixture passes the event rules")
}

/// Published comparison table: per group, UIL column then familiarity
/// column, top to bottom.
pub const PUBLISHED_RANKINGS: [(GroupView, [(&str, u32); 9], [(&str, u32); 9]); 3] = [
    (
        GroupView::General,
        [
            ("asakusa", 100), ("harajuku", 100), ("shimokitazawa", 86), ("shibuya", 83), ("ikebukuro", 75),
            ("ueno", 75), ("roppongi", 72), ("yanesen", 69), ("kagurazaka", 67),
        ],
        [
            ("shibuya", 69), ("ueno", 62), ("harajuku", 60), ("ikebukuro", 58), ("shimokitazawa", 53),
            ("asakusa", 51), ("roppongi", 49), ("kagurazaka", 32), ("yanesen", 19),
        ],
    ),
    (
        GroupView::Local,
        [
            ("asakusa", 100), ("harajuku", 100), ("ueno", 90), ("shimokitazawa", 90), ("shibuya", 90),
            ("ikebukuro", 90), ("kagurazaka", 85), ("yanesen", 85), ("roppongi", 80),
        ],
        [
            ("shibuya", 69), ("ueno", 63), ("shimokitazawa", 61), ("harajuku", 57), ("asakusa", 57),
            ("ikebukuro", 54), ("roppongi", 51), ("kagurazaka", 44), ("yanesen", 32),
        ],
    ),
    (
        GroupView::Foreign,
        [
            ("asakusa", 100), ("harajuku", 100), ("shimokitazawa", 81), ("shibuya", 75), ("roppongi", 63),
            ("ueno", 56), ("ikebukuro", 56), ("yanesen", 50), ("kagurazaka", 44),
        ],
        [
            ("shibuya", 68), ("harajuku", 63), ("ikebukuro", 62), ("ueno", 60), ("roppongi", 46),
            ("shimokitazawa", 44), ("asakusa", 44), ("kagurazaka", 19), ("yanesen", 5),
        ],
    ),
];

/// Published top-three elements per area.
pub const PUBLISHED_ELEMENTS: [(&str, [(ThematicGroup, &str, u64); 3]); 9] = {
    use ThematicGroup::*;
    [
        ("shimokitazawa", [(Typology, "Shops", 31), (Element, "Clothing", 25), (Quality, "Small", 17)]),
        ("harajuku", [(Typology, "Shops", 24), (Quality, "Colorful", 22), (Element, "Fashion", 12)]),
        ("yanesen", [(Quality, "Old", 16), (Typology, "Private House", 12), (Characteristic, "Narrow", 10)]),
        ("kagurazaka", [(Quality, "Traditional", 12), (Element, "River", 10), (Characteristic, "Narrow", 10)]),
        ("asakusa", [(Color, "Red", 38), (Quality, "Traditional", 23), (Typology, "Temples", 10)]),
        ("ueno", [(Environment, "Park", 21), (Typology, "Izakaya", 13), (Characteristic, "Wide", 14)]),
        ("shibuya", [(Element, "Signage", 32), (Characteristic, "High", 25), (Environment, "River", 20)]),
        ("ikebukuro", [(Element, "Signage", 21), (Quality, "Cluttered", 10), (Color, "Red", 9)]),
        ("roppongi", [(Material, "Glass", 10), (Typology, "\u{201c}Glass\u{201d} Buildings", 10), (Element, "Bridge", 10)]),
    ]
};

/// Compares published and computed rows as multisets; the order within a
/// published row is not always by count.
pub fn same_triples(published: &[(ThematicGroup, &str, u64)], got: &[(ThematicGroup, String, u64)]) -> bool {
    let mut a: Vec<(ThematicGroup, String, u64)> = published.iter().map(|(g, t, c)| (*g, t.to_string(), *c)).collect();
    let mut b = got.to_vec();
    a.sort();
    b.sort();
    a == b
}

/// Flips `flips` random correct responses one at a time and checks that
/// only the flipped area loses counts, by exactly that response's hits.
/// Returns the violations.
pub fn gating_violations(snap: &StudySnapshot, lexicon: &SemanticLexicon, flips: usize, seed: u64) -> Vec<String> {
    let study = snap.study.as_ref().expect("created");
    let responses = snap.responses_in_order();
    let ev = Evaluation::new(study, &snap.participants, &responses);
    let opts = SemanticOptions::default();
    let base = element_frequencies(&ev, lexicon, &opts);
    let correct: Vec<usize> = (0..responses.len()).filter(|&i| ev.is_correct(&responses[i])).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = Vec::new();
    let as_map = |v: &[vu_core::semantic::ElementCount]| -> BTreeMap<(ThematicGroup, String), u64> {
        v.iter().map(|e| ((e.group, e.canonical_term.clone()), e.count)).collect()
    };
    for _ in 0..flips {
        let i = *correct.choose(&mut rng).expect("fixture has correct responses");
        let area = study.sequence_area(&responses[i].sequence_id).expect("known").clone();
        let wrong = study.areas.iter().map(|a| &a.area_id).filter(|a| **a != area).collect::<Vec<_>>();
        let mut flipped = responses.clone();
        flipped[i].guessed_area_id = Guess::Area((*wrong.choose(&mut rng).expect("several areas")).clone());
        let ev2 = Evaluation::new(study, &snap.participants, &flipped);
        let after = element_frequencies(&ev2, lexicon, &opts);
        // independent recount of the flipped response's hits
        let mut hits: BTreeMap<(ThematicGroup, String), u64> = BTreeMap::new();
        for item in FreeTextItem::ALL {
            let toks = normalize_tokens(responses[i].text(item), Some(lexicon));
            for h in map_terms(&toks, lexicon, Some(&area)).hits {
                *hits.entry((h.group, h.canonical_term)).or_default() += 1;
            }
        }
        for a in &study.areas {
            let before = as_map(&base.areas[&a.area_id]);
            let now = as_map(&after.areas[&a.area_id]);
            let mut expected = before.clone();
            if a.area_id == area {
                for (k, n) in &hits {
                    let e = expected.get_mut(k).expect("hit terms were counted");
                    *e -= n;
                    if *e == 0 {
                        expected.remove(k);
                    }
                }
            }
            if now != expected {
                bad.push(format!("flip of response {i} ({area}) changed {} unexpectedly", a.area_id));
            }
        }
    }
    bad
}

/// Study with `n` areas and one sequence each.
pub fn small_study(n: usize, familiarization_loops: u32, in_depth_loops: u32) -> StudyDefinition {
    let areas: Vec<StudyArea> = (0..n)
        .map(|i| StudyArea { area_id: format!("a{i}").into(), display_name: format!("Area {i}"), origin_rank: i as u32 + 1 })
        .collect();
    let stimuli = (0..n)
        .map(|i| StimulusManifest {
            sequence_id: format!("s{i}").into(),
            area_id: format!("a{i}").into(),
            media_uri: format!("media/a{i}.mp4"),
            duration_s: 30.0,
            frame_count: 385,
            nominal_fps: 12.83,
            denoising_strength: 0.6,
        })
        .collect();
    let mut s = StudyDefinition::new("small", areas, stimuli);
    s.schedule.familiarization_loops = familiarization_loops;
    s.schedule.in_depth_loops_per_sequence = in_depth_loops;
    s
}

fn full_profile(study: &StudyDefinition) -> BTreeMap<AreaId, FamiliarityLevel> {
    study.areas.iter().map(|a| (a.area_id.clone(), FamiliarityLevel::QuickVisits)).collect()
}

#[derive(Debug, Default)]
pub struct Exploration {
    pub states: usize,
    pub transitions: usize,
    pub completed_states: usize,
    pub violations: Vec<String>,
}

/// Breadth-first search over every reachable session state of one
/// participant, applying each candidate event through the snapshot. Loop
/// counters are capped one past their targets so the space is finite.
pub fn explore_sessions(sequences: usize, familiarization_loops: u32) -> Exploration {
    let study = small_study(sequences, familiarization_loops, 1);
    let pid = ParticipantId::from("P1");
    let seqs: Vec<SequenceId> = study.sequence_ids();
    let mut snap = StudySnapshot::new();
    let mut id = 0;
    let mut push = |snap: &mut StudySnapshot, payload: EventPayload| {
        id += 1;
        snap.apply(&EventRecord { event_id: id, recorded_at: T0, payload }).expect("setup events apply");
    };
    push(&mut snap, EventPayload::StudyCreated(study.clone()));
    push(
        &mut snap,
        EventPayload::ParticipantRegistered(Registration {
            participant: ParticipantRecord::new(pid.clone(), ParticipantGroup::Local),
            token: None,
        }),
    );
    push(&mut snap, EventPayload::SessionStarted { participant_id: pid.clone(), presentation_order: seqs.clone() });

    let mut partial = full_profile(&study);
    partial.pop_first();
    let mut actions: Vec<EventPayload> = vec![
        EventPayload::FamiliaritySubmitted { participant_id: pid.clone(), profile: full_profile(&study) },
        EventPayload::FamiliaritySubmitted { participant_id: pid.clone(), profile: partial },
        EventPayload::LoopRecorded { participant_id: pid.clone(), sequence_id: "nope".into() },
    ];
    for to in [Phase::PreViewing, Phase::Familiarization, Phase::InDepth, Phase::Complete] {
        actions.push(EventPayload::PhaseAdvanced { participant_id: pid.clone(), to });
    }
    for s in &seqs {
        actions.push(EventPayload::LoopRecorded { participant_id: pid.clone(), sequence_id: s.clone() });
        let r = vu_core::model::SequenceResponse::new(pid.clone(), s.clone(), Guess::Area("a0".into()));
        actions.push(EventPayload::ResponseSubmitted(r.clone()));
        actions.push(EventPayload::ResponseAmended(r));
    }

    let key = |s: &StudySnapshot| {
        let sess = &s.sessions[&pid];
        let mut sess = sess.clone();
        sess.phase_started_at = 0;
        let keys: Vec<&SequenceId> = s.responses.keys().map(|(_, q)| q).collect();
        serde_json::to_string(&(sess, keys)).expect("serializable")
    };
    let capped = |s: &StudySnapshot| {
        let sess = &s.sessions[&pid];
        sess.familiarization_views.values().any(|&v| v > familiarization_loops + 1)
            || sess.in_depth_loops.values().any(|&v| v > 2)
    };
    let mut out = Exploration::default();
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    seen.insert(key(&snap));
    queue.push_back(snap);
    while let Some(s) = queue.pop_front() {
        out.states += 1;
        let rules = s.rules().expect("created").clone();
        let cur = &s.sessions[&pid];
        if cur.phase == Phase::Complete {
            out.completed_states += 1;
            if seqs.iter().any(|q| s.response(&pid, q).is_none()) {
                out.violations.push(format!("complete without every final response: {}", key(&s)));
            }
        }
        out.violations.extend(cur.invariant_violations(&rules));
        for a in &actions {
            let mut next = s.clone();
            let rec = EventRecord { event_id: next.next_event_id(), recorded_at: T0, payload: a.clone() };
            match next.apply(&rec) {
                Ok(()) => {
                    out.transitions += 1;
                    let after = &next.sessions[&pid];
                    if after.phase < cur.phase {
                        out.violations.push(format!("{:?} went back to {:?} via {}", cur.phase, after.phase, a.kind()));
                    }
                    if capped(&next) {
                        continue;
                    }
                    if seen.insert(key(&next)) {
                        queue.push_back(next);
                    }
                }
                Err(_) => {
                    if next.sessions[&pid] != s.sessions[&pid] || next.last_event_id != s.last_event_id {
                        out.violations.push(format!("rejected {} changed the snapshot", a.kind()));
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Default)]
pub struct FuzzOutcome {
    pub sequences: usize,
    pub calls: usize,
    pub accepted: usize,
    pub violations: Vec<String>,
}

const KNOWN_CODES: &[&str] = &[
    "unknown_token", "unknown_sequence", "unknown_area", "wrong_phase", "phase_already_passed",
    "incomplete_profile", "gate_unmet", "already_complete", "invalid_request",
];

/// Random call sequences against an in-memory platform; after every call
/// the phase must not have moved backwards, error codes must be known and
/// every session must satisfy its invariants.
pub fn fuzz_platform(sequences: usize, max_len: usize, seed: u64) -> FuzzOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = FuzzOutcome { sequences, ..FuzzOutcome::default() };
    for n in 0..sequences {
        let tick = Arc::new(AtomicU64::new(T0));
        let t = tick.clone();
        let platform = Platform::in_memory(Arc::new(move || t.fetch_add(1, Ordering::Relaxed)));
        let study = small_study(2 + n % 2, 2, 2);
        platform.create_study(study.clone(), false).expect("valid study");
        let tokens: Vec<String> = (0..2)
            .map(|_| {
                let req = RegisterRequest { group: Some(ParticipantGroup::Foreign), ..RegisterRequest::default() };
                platform.register("small", req).expect("registers").token
            })
            .collect();
        let mut phases: BTreeMap<String, Phase> = BTreeMap::new();
        let seqs: Vec<SequenceId> = study.sequence_ids();
        let len = rng.random_range(1..=max_len);
        for _ in 0..len {
            out.calls += 1;
            let token = if rng.random_bool(0.05) { "not-a-token".to_string() } else { tokens.choose(&mut rng).unwrap().clone() };
            let seq = if rng.random_bool(0.1) { SequenceId::from("zzz") } else { seqs.choose(&mut rng).unwrap().clone() };
            let result = match rng.random_range(0..7) {
                0 => platform.start_session(&token),
                1 => {
                    let mut profile = full_profile(&study);
                    match rng.random_range(0..4) {
                        0 => {
                            profile.pop_last();
                        }
                        1 => {
                            profile.insert("elsewhere".into(), FamiliarityLevel::NotFamiliar);
                        }
                        _ => {}
                    }
                    platform.submit_familiarity(&token, FamiliarityRequest { profile })
                }
                2 | 3 => platform.record_loop(&token, LoopRequest { sequence_id: seq }),
                4 => platform.advance(&token),
                5 => {
                    let guess = match rng.random_range(0..4) {
                        0 => None,
                        1 => Some(AreaId::from("atlantis")),
                        _ => Some(study.areas.choose(&mut rng).unwrap().area_id.clone()),
                    };
                    let req = ResponseRequest {
                        sequence_id: seq,
                        guessed_area_id: guess,
                        q2_text: "narrow streets".into(),
                        loops_viewed: rng.random_range(0..4),
                        ..ResponseRequest::default()
                    };
                    platform.submit_response(&token, req).map(|r| r.session)
                }
                _ => platform.get_session(&token),
            };
            match result {
                Ok(view) => {
                    out.accepted += 1;
                    let prev = phases.insert(token.clone(), view.phase);
                    if prev.is_some_and(|p| p > view.phase) {
                        out.violations.push(format!("phase moved back from {prev:?} to {:?}", view.phase));
                    }
                    if view.phase == Phase::Complete && !view.missing_responses.is_empty() {
                        out.violations.push("complete view with missing responses".into());
                    }
                }
                Err(e) => {
                    if !KNOWN_CODES.contains(&e.code()) {
                        out.violations.push(format!("unexpected error code {} ({e})", e.code()));
                    }
                }
            }
            out.violations.extend(platform.invariant_violations("small").expect("study exists"));
        }
        let snap = platform.snapshot("small").expect("study exists");
        let rules = snap.rules().expect("created");
        for s in snap.sessions.values() {
            let answered: BTreeSet<&SequenceId> =
                snap.responses.keys().filter(|(p, _)| *p == s.participant_id).map(|(_, q)| q).collect();
            if answered != s.responded.iter().collect() {
                out.violations.push(format!("{}: session and stored responses disagree", s.participant_id));
            }
            let _ = rules;
        }
    }
    out
}

pub fn report(log: &EventLog, kind: vu::report::ReportKind, group: GroupView) -> vu::report::ReportDocument {
    vu::report::build_report(log.snapshot(), &starter_lexicon(), kind, group, &vu::report::ReportOptions::default())
        .expect("fixture reports build")
}

pub fn metrics(log: &EventLog, group: GroupView) -> vu::report::MetricsBody {
    match report(log, vu::report::ReportKind::Metrics, group).body {
        vu::report::ReportBody::Metrics(m) => m,
        other => panic!("expected metrics, got {other:?}"),
    }
}

pub fn semantic(log: &EventLog) -> vu::report::SemanticBody {
    match report(log, vu::report::ReportKind::Semantic, GroupView::General).body {
        vu::report::ReportBody::Semantic(s) => s,
        other => panic!("expected semantic, got {other:?}"),
    }
}

pub fn histogram(log: &EventLog) -> vu::report::HistogramBody {
    match report(log, vu::report::ReportKind::Histogram, GroupView::General).body {
        vu::report::ReportBody::Histogram(h) => h,
        other => panic!("expected histogram, got {other:?}"),
    }
}

/// Mismatches between a metrics report and the published table, by value
/// and by column order (tied values may appear in either order).
pub fn ranking_mismatches(log: &EventLog) -> Vec<String> {
    let mut bad = Vec::new();
    for (group, uil, fr) in PUBLISHED_RANKINGS {
        let m = metrics(log, group);
        for (area, want) in uil {
            if m.uil_display(area) != Some(want) {
                bad.push(format!("{group:?} UIL {area}: want {want}, got {:?}", m.uil_display(area)));
            }
        }
        for (area, want) in fr {
            if m.fr_display(area) != Some(want) {
                bad.push(format!("{group:?} FR {area}: want {want}, got {:?}", m.fr_display(area)));
            }
        }
        let uil_col: Vec<Option<u32>> = m.rows.iter().map(|r| r.uil_display).collect();
        let fr_col: Vec<Option<u32>> = m.rows.iter().map(|r| r.fr_display).collect();
        if uil_col != uil.iter().map(|(_, v)| Some(*v)).collect::<Vec<_>>() {
            bad.push(format!("{group:?} UIL column order {uil_col:?}"));
        }
        if fr_col != fr.iter().map(|(_, v)| Some(*v)).collect::<Vec<_>>() {
            bad.push(format!("{group:?} FR column order {fr_col:?}"));
        }
    }
    bad
}

pub fn element_mismatches(log: &EventLog) -> Vec<String> {
    let s = semantic(log);
    PUBLISHED_ELEMENTS
        .iter()
        .filter(|(area, want)| !same_triples(want, &s.elements(area)))
        .map(|(area, want)| format!("{area}: want {want:?}, got {:?}", s.elements(area)))
        .collect()
}

/// Display rounding written out by hand: half away from zero.
pub fn percent(num: u64, den: u64) -> u32 {
    ((200 * num + den) / (2 * den)) as u32
}
