use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use proptest::prelude::*;

use vu_core::design::{assign_heights, build_sector_grid, HeightRange, StimulusManifest, StudyDefinition};
use vu_core::events::{EventPayload, EventRecord, Registration, StudySnapshot};
use vu_core::metrics::{
    divergence_markers, familiarity_rate, rank_table, BlankPolicy, Evaluation, MetricKind, RatePercent,
};
use vu_core::model::{
    partition_cohort, AreaId, FamiliarityLevel, GroupView, Guess, ParticipantGroup, ParticipantRecord,
    SequenceResponse, StudyArea,
};
use vu_core::semantic::{map_terms, normalize_tokens, LexiconEntry, SemanticLexicon, ThematicGroup};
use vu_core::session::{Phase, SessionRules, SessionState};

fn study(n: usize) -> StudyDefinition {
    let areas = (0..n)
        .map(|i| StudyArea { area_id: format!("a{i}").into(), display_name: format!("A{i}"), origin_rank: i as u32 + 1 })
        .collect();
    let stimuli = (0..n)
        .map(|i| StimulusManifest {
            sequence_id: format!("s{i}").into(),
            area_id: format!("a{i}").into(),
            media_uri: format!("media/s{i}.mp4"),
            duration_s: 30.0,
            frame_count: 385,
            nominal_fps: 12.83,
            denoising_strength: 0.5,
        })
        .collect();
    StudyDefinition::new("prop", areas, stimuli)
}

fn level() -> impl Strategy<Value = FamiliarityLevel> {
    prop::sample::select(FamiliarityLevel::ALL.to_vec())
}

/// (is_local, per-sequence guess index: 0 = blank, k = area k-1)
fn cohort(n_areas: usize) -> impl Strategy<Value = Vec<(bool, Vec<usize>)>> {
    prop::collection::vec((any::<bool>(), prop::collection::vec(0..=n_areas, n_areas)), 1..30)
}

fn build(study: &StudyDefinition, c: &[(bool, Vec<usize>)]) -> (Vec<ParticipantRecord>, Vec<SequenceResponse>) {
    let mut ps = Vec::new();
    let mut rs = Vec::new();
    for (i, (local, guesses)) in c.iter().enumerate() {
        let pid = format!("P{i}");
        let group = if *local { ParticipantGroup::Local } else { ParticipantGroup::Foreign };
        ps.push(ParticipantRecord::new(pid.as_str(), group));
        for (j, g) in guesses.iter().enumerate() {
            let guess = match g {
                0 => Guess::Blank,
                k => Guess::Area(study.areas[k - 1].area_id.clone()),
            };
            rs.push(SequenceResponse::new(pid.as_str(), study.stimuli[j].sequence_id.clone(), guess));
        }
    }
    (ps, rs)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn general_uil_pools_local_and_foreign(c in cohort(4), incorrect in any::<bool>()) {
        let st = study(4);
        let (ps, rs) = build(&st, &c);
        let policy = if incorrect { BlankPolicy::BlanksCountIncorrect } else { BlankPolicy::ExcludeFromT };
        let part = partition_cohort(&ps).unwrap();
        prop_assert_eq!(part.local.len() + part.foreign.len(), part.general.len());
        let ev = Evaluation::new(&st, &ps, &rs);
        for s in &st.stimuli {
            let l = ev.sequence_tally(&s.sequence_id, GroupView::Local);
            let f = ev.sequence_tally(&s.sequence_id, GroupView::Foreign);
            let g = ev.sequence_tally(&s.sequence_id, GroupView::General);
            let (cl, tl) = (l.correct, l.considered(policy));
            let (cf, tf) = (f.correct, f.considered(policy));
            match ev.uil_per_sequence(&s.sequence_id, GroupView::General, policy) {
                Ok(r) => prop_assert_eq!(r.rate.exact(), Ratio::new(cl + cf, tl + tf)),
                Err(_) => prop_assert_eq!(tl + tf, 0),
            }
            prop_assert_eq!(g.considered(policy), tl + tf);
        }
    }

    #[test]
    fn familiarity_rate_is_order_free(mut levels in prop::collection::vec(level(), 1..40), seed in any::<u64>()) {
        let a = familiarity_rate(&levels).unwrap();
        // deterministic rotation + reversal as the permutation
        let k = (seed as usize) % levels.len();
        levels.rotate_left(k);
        levels.reverse();
        prop_assert_eq!(familiarity_rate(&levels).unwrap(), a);
    }

    #[test]
    fn raising_one_answer_never_lowers_the_rate(levels in prop::collection::vec(level(), 1..40), idx in any::<prop::sample::Index>(), to in level()) {
        let i = idx.index(levels.len());
        let before = familiarity_rate(&levels).unwrap();
        let mut raised = levels.clone();
        raised[i] = to;
        let after = familiarity_rate(&raised).unwrap();
        if to.weight_tenths() >= levels[i].weight_tenths() {
            prop_assert!(after >= before);
        } else {
            prop_assert!(after < before);
        }
        // oracle: sum of tenths over 10n
        let tenths: u64 = levels.iter().map(|l| l.weight_tenths()).sum();
        prop_assert_eq!(before.exact(), Ratio::new(tenths, 10 * levels.len() as u64));
    }

    #[test]
    fn display_rounds_half_away_from_zero((n, d) in (1u64..10_000).prop_flat_map(|d| (0..=d, Just(d)))) {
        let r = RatePercent::new(n, d).unwrap();
        // oracle: quotient, bumped when the remainder is at least half
        let (q, rem) = (100 * n / d, 100 * n % d);
        let expect = q + u64::from(2 * rem >= d);
        prop_assert_eq!(u64::from(r.display()), expect);
        prop_assert!((100.0 * r.as_f64() - r.display() as f64).abs() <= 0.5 + 1e-9);
    }

    #[test]
    fn ranks_are_a_permutation_and_markers_balance(vals in prop::collection::vec((0u64..=10, 0u64..=10), 2..9)) {
        let st = study(vals.len());
        let uil: BTreeMap<AreaId, RatePercent> = vals.iter().enumerate()
            .map(|(i, (u, _))| (format!("a{i}").into(), RatePercent::new(*u, 10).unwrap())).collect();
        let fr: BTreeMap<AreaId, RatePercent> = vals.iter().enumerate()
            .map(|(i, (_, f))| (format!("a{i}").into(), RatePercent::new(*f, 10).unwrap())).collect();
        let ut = rank_table(&uil, MetricKind::Uil, GroupView::General, &st.areas);
        let ft = rank_table(&fr, MetricKind::FamiliarityRate, GroupView::General, &st.areas);
        let ranks: BTreeSet<u32> = ut.rows.iter().map(|r| r.rank).collect();
        prop_assert_eq!(ranks, (1..=vals.len() as u32).collect::<BTreeSet<_>>());
        prop_assert!(ut.rows.windows(2).all(|w| w[0].metric >= w[1].metric));
        let ms = divergence_markers(&ut, &ft, 2, &BTreeSet::new()).unwrap();
        prop_assert_eq!(ms.iter().map(|m| m.rank_delta).sum::<i64>(), 0);
        for m in &ms {
            let expected = ft.rank_of(&m.area_id).unwrap() as i64 - ut.rank_of(&m.area_id).unwrap() as i64;
            prop_assert_eq!(m.rank_delta, expected);
        }
    }

    #[test]
    fn tokens_are_normalized_and_stable(text in "[ a-zA-Z0-9,.;!?-]{0,80}") {
        let toks = normalize_tokens(&text, None);
        for t in &toks {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(|c| c.is_alphanumeric() && !c.is_uppercase()));
        }
        prop_assert_eq!(normalize_tokens(&toks.join(" "), None), toks);
    }

    #[test]
    fn every_token_is_matched_or_not(words in prop::collection::vec(prop::sample::select(vec!["red", "glass", "buildings", "old", "street", "narrow"]), 0..30)) {
        let lex = SemanticLexicon::new("p", vec![
            LexiconEntry::global("red", "Red", ThematicGroup::Color),
            LexiconEntry::global("glass", "Glass", ThematicGroup::Material),
            LexiconEntry::global("glass buildings", "\"Glass\" Buildings", ThematicGroup::Typology),
            LexiconEntry::global("narrow street", "Narrow", ThematicGroup::Characteristic),
        ]).unwrap();
        let toks = normalize_tokens(&words.join(" "), Some(&lex));
        let m = map_terms(&toks, &lex, None);
        prop_assert_eq!(m.matched_tokens + m.unmatched_tokens, toks.len());
        let reds = toks.iter().filter(|t| *t == "red").count();
        prop_assert_eq!(m.hits.iter().filter(|h| h.canonical_term == "Red").count(), reds);
    }

    #[test]
    fn heights_stay_in_their_zone(seed in any::<u64>(), lo in 1u32..50, span in 0u32..50) {
        let assignments = (0..4u32).flat_map(|r| (0..4u32).map(move |c| ((r, c), AreaId::from(if c < 2 { "a0" } else { "a1" })))).collect();
        let grid = build_sector_grid(800, 200, &assignments).unwrap();
        let limits: BTreeMap<AreaId, HeightRange> = [
            ("a0".into(), HeightRange { min_m: lo as f64, max_m: (lo + span) as f64 }),
            ("a1".into(), HeightRange { min_m: 1.0, max_m: 2.0 }),
        ].into_iter().collect();
        let h = assign_heights(&grid, &limits, seed).unwrap();
        prop_assert_eq!(&h, &assign_heights(&grid, &limits, seed).unwrap());
        for s in &grid.sectors {
            let z = &limits[&s.assigned_area_id];
            prop_assert!(h[&s.sector_id] >= z.min_m && h[&s.sector_id] <= z.max_m);
        }
    }
}

#[test]
fn familiarity_extremes_are_exact() {
    for n in 1..50 {
        let none = vec![FamiliarityLevel::NotFamiliar; n];
        let full = vec![FamiliarityLevel::ContinuousResidence; n];
        assert_eq!(familiarity_rate(&none).unwrap().exact(), Ratio::from_integer(0));
        assert_eq!(familiarity_rate(&none).unwrap().display(), 0);
        assert_eq!(familiarity_rate(&full).unwrap().exact(), Ratio::from_integer(1));
        assert_eq!(familiarity_rate(&full).unwrap().display(), 100);
    }
}

#[derive(Debug, Clone)]
enum Op {
    Familiarity(bool),
    Loop(usize),
    Advance,
    Respond(usize, u32),
}

fn op(n: usize) -> impl Strategy<Value = Op> {
    prop_oneof![
        any::<bool>().prop_map(Op::Familiarity),
        (0..n + 1).prop_map(Op::Loop),
        Just(Op::Advance),
        (0..n + 1, 0u32..7).prop_map(|(s, l)| Op::Respond(s, l)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sessions_only_move_forward(ops in prop::collection::vec(op(3), 0..60)) {
        let rules = SessionRules {
            sequences: vec!["s0".into(), "s1".into(), "s2".into()],
            areas: vec!["a0".into(), "a1".into(), "a2".into()],
            familiarization_loops: 2,
            in_depth_loops: 5,
        };
        let mut s = SessionState::start("P".into(), rules.sequences.clone(), 0);
        for (t, o) in ops.iter().enumerate() {
            let before = s.clone();
            let now = t as u64 + 1;
            let res = match o {
                Op::Familiarity(complete) => {
                    let skip = usize::from(!complete);
                    let p = rules.areas.iter().skip(skip).map(|a| (a.clone(), FamiliarityLevel::NotFamiliar)).collect();
                    s.submit_familiarity(&rules, &p, now).map(|_| ())
                }
                Op::Loop(i) => s.record_loop(&rules, &format!("s{i}").into()),
                Op::Advance => s.advance(&rules, now).map(|_| ()),
                Op::Respond(i, l) => s.submit_response(&rules, &format!("s{i}").into(), *l, now).map(|_| ()),
            };
            if res.is_err() {
                prop_assert_eq!(&s, &before);
            }
            prop_assert!(s.phase >= before.phase);
            prop_assert!(s.invariant_violations(&rules).is_empty(), "{:?}", s.invariant_violations(&rules));
            for (k, v) in &before.familiarization_views {
                prop_assert!(s.familiarization_views[k] >= *v);
            }
        }
        if s.phase == Phase::Complete {
            prop_assert_eq!(s.responded.len(), 3);
        }
    }

    #[test]
    fn rejected_events_leave_the_snapshot_untouched(picks in prop::collection::vec((0usize..6, 0usize..4, 0usize..4), 1..40)) {
        let st = study(3);
        let mut snap = StudySnapshot::new();
        let mut log = Vec::new();
        let mut id = 1;
        let created = EventRecord { event_id: 1, recorded_at: 0, payload: EventPayload::StudyCreated(st.clone()) };
        snap.apply(&created).unwrap();
        log.push(created);
        for (kind, p, s) in picks {
            id = snap.next_event_id();
            let pid = format!("P{p}");
            let r = SequenceResponse::new(pid.as_str(), format!("s{s}"), Guess::Area(format!("a{s}").into()));
            let payload = match kind {
                0 | 1 => EventPayload::ParticipantRegistered(Registration {
                    participant: ParticipantRecord::new(pid.as_str(), ParticipantGroup::Local),
                    token: None,
                }),
                2 | 3 => EventPayload::ResponseSubmitted(r),
                4 => EventPayload::ResponseAmended(r),
                _ => EventPayload::LoopRecorded { participant_id: pid.as_str().into(), sequence_id: format!("s{s}").into() },
            };
            let e = EventRecord { event_id: id, recorded_at: id * 10, payload };
            let before = snap.clone();
            if snap.apply(&e).is_ok() {
                log.push(e);
            } else {
                prop_assert_eq!(&snap, &before);
                prop_assert_eq!(snap.last_recorded_at, before.last_recorded_at);
            }
        }
        let _ = id;
        let replayed = StudySnapshot::replay(&log).unwrap();
        prop_assert_eq!(&replayed, &snap);
        let again = StudySnapshot::replay(&log).unwrap();
        prop_assert_eq!(replayed, again);
    }
}
