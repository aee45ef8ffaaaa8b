mod common;

use vu::formats::starter_lexicon;
use vu::report::{
    build_report, from_csv, from_json, render, to_csv, to_json, to_text, Render, ReportBody, ReportError, ReportKind,
    ReportOptions,
};
use vu::store::EventLog;
use vu_core::events::EventPayload;
use vu_core::metrics::BlankPolicy;
use vu_core::model::{FamiliarityPooling, FreeTextItem, GroupView};

const KINDS: [ReportKind; 4] = [ReportKind::Metrics, ReportKind::Semantic, ReportKind::Demographics, ReportKind::Histogram];

#[test]
fn json_and_csv_round_trip_every_kind_and_group() {
    let log = common::fixture_log(0);
    for kind in KINDS {
        for group in GroupView::ALL {
            let doc = common::report(&log, kind, group);
            let json = to_json(&doc);
            assert_eq!(from_json(&json).unwrap(), doc, "{kind:?} {group:?} json");
            let csv = to_csv(&doc);
            assert_eq!(from_csv(&csv).unwrap(), doc, "{kind:?} {group:?} csv");
            assert_eq!(render(&doc, Render::Json), json);
            assert_eq!(render(&doc, Render::Csv), csv);
        }
    }
}

fn empty_study() -> EventLog {
    let mut log = EventLog::memory();
    log.append(EventPayload::StudyCreated(common::fixture(0).study), common::T0).unwrap();
    log
}

#[test]
fn empty_groups_report_insufficient_data() {
    let log = empty_study();
    for kind in KINDS {
        let doc = common::report(&log, kind, GroupView::Foreign);
        assert!(matches!(doc.body, ReportBody::InsufficientData { .. }), "{kind:?}: {:?}", doc.body);
        assert_eq!(from_json(&to_json(&doc)).unwrap(), doc);
        assert_eq!(from_csv(&to_csv(&doc)).unwrap(), doc);
        assert!(to_text(&doc).contains("insufficient"), "{}", to_text(&doc));
    }
}

#[test]
fn option_errors() {
    let log = common::fixture_log(0);
    let lex = starter_lexicon();
    let snap = log.snapshot();
    let run = |o: ReportOptions, kind| build_report(snap, &lex, kind, GroupView::General, &o).map(|_| ());
    assert_eq!(run(ReportOptions { k: 0, ..Default::default() }, ReportKind::Semantic), Err(ReportError::InvalidK));
    assert_eq!(run(ReportOptions { threshold: 0, ..Default::default() }, ReportKind::Metrics), Err(ReportError::InvalidThreshold));
    assert_eq!(run(ReportOptions { items: vec![], ..Default::default() }, ReportKind::Semantic), Err(ReportError::NoItems));
    let empty = EventLog::memory();
    let err = build_report(empty.snapshot(), &lex, ReportKind::Metrics, GroupView::General, &ReportOptions::default()).unwrap_err();
    assert_eq!(err.code(), "study_not_created");
}

#[test]
fn options_are_resolved_in_document() {
    let log = common::fixture_log(0);
    let o = ReportOptions { items: vec![FreeTextItem::Q4, FreeTextItem::Q2, FreeTextItem::Q4], ..Default::default() };
    let doc = build_report(log.snapshot(), &starter_lexicon(), ReportKind::Semantic, GroupView::General, &o).unwrap();
    assert_eq!(doc.options.items, vec![FreeTextItem::Q2, FreeTextItem::Q4]);
    assert_eq!(doc.options.familiarity_pooling, Some(FamiliarityPooling::GroupMean));
    assert_eq!(doc.study_id, "tokyo-microcosms");
    assert!(doc.generated_at.ends_with('Z'), "{}", doc.generated_at);
}

#[test]
fn fewer_items_never_add_mentions() {
    let log = common::fixture_log(0);
    let all = common::semantic(&log);
    let o = ReportOptions { items: vec![FreeTextItem::Q3], k: 50, ..Default::default() };
    let doc = build_report(log.snapshot(), &starter_lexicon(), ReportKind::Semantic, GroupView::General, &o).unwrap();
    let ReportBody::Semantic(q3) = doc.body else { panic!() };
    let full_opts = ReportOptions { k: 50, ..Default::default() };
    let ReportBody::Semantic(full) =
        build_report(log.snapshot(), &starter_lexicon(), ReportKind::Semantic, GroupView::General, &full_opts).unwrap().body
    else {
        panic!()
    };
    for (area, _) in common::PUBLISHED_ELEMENTS {
        for (g, term, n) in q3.elements(area) {
            let whole = full.elements(area).into_iter().find(|(g2, t2, _)| *g2 == g && *t2 == term).map(|x| x.2);
            assert!(whole.is_some_and(|w| w >= n), "{area} {term}");
        }
        assert!(all.elements(area).len() <= 3);
    }
}

#[test]
fn blank_policy_changes_denominators_only_when_blanks_exist() {
    let log = common::fixture_log(0);
    let lex = starter_lexicon();
    let o = ReportOptions { policy: BlankPolicy::BlanksCountIncorrect, ..Default::default() };
    let doc = build_report(log.snapshot(), &lex, ReportKind::Metrics, GroupView::General, &o).unwrap();
    let ReportBody::Metrics(m) = doc.body else { panic!() };
    let base = common::metrics(&log, GroupView::General);
    for (row, b) in m.rows.iter().zip(&base.rows) {
        assert!(row.uil_considered >= b.uil_considered);
        assert_eq!(row.uil_correct.is_some(), b.uil_correct.is_some());
    }
}

#[test]
fn text_render_lists_markers() {
    let log = common::fixture_log(0);
    let text = to_text(&common::report(&log, ReportKind::Metrics, GroupView::General));
    assert!(text.contains('\u{25bc}') && text.contains('\u{25b2}'), "{text}");
}

#[test]
fn malformed_inputs_fail_to_parse() {
    assert!(from_json("{").is_err());
    assert!(from_csv("no metadata\n").is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn log() -> &'static EventLog {
        static LOG: OnceLock<EventLog> = OnceLock::new();
        LOG.get_or_init(|| common::fixture_log(0))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn any_options_round_trip(
            k in 1usize..12,
            threshold in 1u32..9,
            incorrect in any::<bool>(),
            items in proptest::sample::subsequence(FreeTextItem::ALL.to_vec(), 1..=4),
            kind in 0usize..4,
            group in 0usize..3,
        ) {
            let o = ReportOptions {
                k,
                threshold,
                policy: if incorrect { BlankPolicy::BlanksCountIncorrect } else { BlankPolicy::ExcludeFromT },
                items,
                ..Default::default()
            };
            let doc = build_report(log().snapshot(), &starter_lexicon(), KINDS[kind], GroupView::ALL[group], &o).unwrap();
            prop_assert_eq!(from_json(&to_json(&doc)).unwrap(), doc.clone());
            prop_assert_eq!(from_csv(&to_csv(&doc)).unwrap(), doc.clone());
            if let ReportBody::Semantic(s) = &doc.body {
                for (area, _) in common::PUBLISHED_ELEMENTS {
                    prop_assert!(s.elements(area).len() <= k);
                }
            }
        }
    }
}
