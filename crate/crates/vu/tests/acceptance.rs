//! Acceptance checks: one line per criterion, non-zero exit if any fail.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vu_core::design::{
    assign_heights, build_sector_grid, validate_dataset_composition, validate_sequence_manifest, DatasetManifest,
    GridError, HeightRange, ImageRecord, StimulusManifest, Typology, DEFAULT_FPS_TOLERANCE,
};
use vu_core::metrics::{familiarity_rate, BlankPolicy, Evaluation, RatePercent};
use vu_core::model::{
    partition_cohort, AreaId, FamiliarityLevel, GroupView, Guess, ParticipantGroup, ParticipantRecord, SequenceResponse,
};

type Outcome = Result<String, String>;

fn check(ok: bool, pass: String, fail: String) -> Outcome {
    if ok {
        Ok(pass)
    } else {
        Err(fail)
    }
}

fn comparison_table() -> Outcome {
    let log = common::fixture_log(0);
    let bad = common::ranking_mismatches(&log);
    let mut uil = 0;
    let mut fr = 0;
    for (group, _, _) in common::PUBLISHED_RANKINGS {
        let m = common::metrics(&log, group);
        uil += m.rows.iter().filter(|r| r.uil_display.is_some()).count();
        fr += m.rows.iter().filter(|r| r.fr_display.is_some()).count();
    }
    check(
        bad.is_empty() && uil == 27 && fr == 27,
        format!("{uil} UIL and {fr} FR display values match, column order included"),
        format!("{} mismatches: {bad:?}", bad.len()),
    )
}

fn cohort_stats() -> Outcome {
    let h = common::histogram(&common::fixture_log(0));
    let mean = h.cohort_mean.as_ref().map(|c| c.display);
    check(
        h.bin(44) == 3 && h.bin(100) == 14 && mean == Some(81),
        format!("44% bin {}, 100% bin {}, mean {mean:?}%", h.bin(44), h.bin(100)),
        format!("44% bin {}, 100% bin {}, mean {mean:?}", h.bin(44), h.bin(100)),
    )
}

fn random_cohort(rng: &mut ChaCha8Rng) -> (vu_core::design::StudyDefinition, Vec<ParticipantRecord>, Vec<SequenceResponse>) {
    let areas = rng.random_range(1..=9);
    let study = common::small_study(areas, 1, 1);
    let n = rng.random_range(0..=40);
    let participants: Vec<ParticipantRecord> = (0..n)
        .map(|i| {
            let g = if rng.random_bool(0.5) { ParticipantGroup::Local } else { ParticipantGroup::Foreign };
            ParticipantRecord::new(format!("P{i}"), g)
        })
        .collect();
    let mut responses = Vec::new();
    for p in &participants {
        for s in &study.stimuli {
            if rng.random_bool(0.1) {
                continue;
            }
            let guess = match rng.random_range(0..10) {
                0 => Guess::Blank,
                1..=5 => Guess::Area(s.area_id.clone()),
                _ => Guess::Area(AreaId::new(format!("a{}", rng.random_range(0..areas)))),
            };
            responses.push(SequenceResponse::new(p.participant_id.clone(), s.sequence_id.clone(), guess));
        }
    }
    (study, participants, responses)
}

fn group_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut bad = Vec::new();
    let mut checked = 0;
    for i in 0..1000 {
        let (study, participants, responses) = random_cohort(&mut rng);
        let part = partition_cohort(&participants).expect("unique ids");
        if part.local.len() + part.foreign.len() != part.general.len() {
            bad.push(format!("cohort {i}: partition sizes"));
        }
        let ev = Evaluation::new(&study, &participants, &responses);
        for policy in [BlankPolicy::ExcludeFromT, BlankPolicy::BlanksCountIncorrect] {
            let g = ev.uil_by_area(GroupView::General, policy);
            let l = ev.uil_by_area(GroupView::Local, policy);
            let f = ev.uil_by_area(GroupView::Foreign, policy);
            for a in study.area_ids() {
                let parts = |m: &BTreeMap<AreaId, vu_core::metrics::AccuracyResult>| {
                    m.get(&a).map_or((0, 0), |r| (r.inputs.correct, r.inputs.considered))
                };
                let (cl, tl) = parts(&l);
                let (cf, tf) = parts(&f);
                checked += 1;
                match g.get(&a) {
                    Some(r) => {
                        if Some(r.rate) != RatePercent::new(cl + cf, tl + tf) {
                            bad.push(format!("cohort {i} {a}: general {:?} vs ({cl}+{cf})/({tl}+{tf})", r.rate));
                        }
                    }
                    None if tl + tf == 0 => {}
                    None => bad.push(format!("cohort {i} {a}: general missing")),
                }
            }
        }
    }
    check(
        bad.is_empty(),
        format!("1000 random cohorts, {checked} area/policy cells: general = pooled counts, |L|+|F| = |G|"),
        format!("{} violations, first: {:?}", bad.len(), bad.first()),
    )
}

fn familiarity_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut bad = Vec::new();
    let tenths = |l: FamiliarityLevel| match l {
        FamiliarityLevel::NotFamiliar => 0u64,
        FamiliarityLevel::QuickVisits => 4,
        FamiliarityLevel::RegularAttendance => 7,
        FamiliarityLevel::ContinuousResidence => 10,
    };
    for i in 0..1000 {
        let n = rng.random_range(1..=50);
        let levels: Vec<FamiliarityLevel> =
            (0..n).map(|_| FamiliarityLevel::ALL[rng.random_range(0..4)]).collect();
        let rate = familiarity_rate(&levels).expect("non-empty");
        let sum: u64 = levels.iter().map(|l| tenths(*l)).sum();
        if Some(rate) != RatePercent::new(sum, 10 * n as u64) {
            bad.push(format!("profile {i}: value"));
        }
        let mut shuffled = levels.clone();
        shuffled.shuffle(&mut rng);
        if familiarity_rate(&shuffled).ok() != Some(rate) {
            bad.push(format!("profile {i}: permutation"));
        }
        let j = rng.random_range(0..n);
        let up = FamiliarityLevel::ALL[rng.random_range(0..4)];
        if tenths(up) >= tenths(levels[j]) {
            let mut raised = levels.clone();
            raised[j] = up;
            if familiarity_rate(&raised).expect("non-empty").exact() < rate.exact() {
                bad.push(format!("profile {i}: monotonicity"));
            }
        }
        let none = familiarity_rate(&vec![FamiliarityLevel::NotFamiliar; n]).expect("non-empty");
        let all = familiarity_rate(&vec![FamiliarityLevel::ContinuousResidence; n]).expect("non-empty");
        if none.display() != 0 || all.display() != 100 {
            bad.push(format!("profile {i}: bounds"));
        }
    }
    check(
        bad.is_empty(),
        "1000 profiles: exact value, permutation invariance, monotonicity, 0 and 100 bounds".into(),
        format!("{} violations, first: {:?}", bad.len(), bad.first()),
    )
}

fn element_table() -> Outcome {
    let log = common::fixture_log(0);
    let bad = common::element_mismatches(&log);
    let s = common::semantic(&log);
    let triples: usize = common::PUBLISHED_ELEMENTS.iter().map(|(a, _)| s.elements(a).len()).sum();
    check(
        bad.is_empty() && triples == 27,
        format!("{triples} (group, term, count) triples match"),
        format!("{bad:?}"),
    )
}

fn gating() -> Outcome {
    let log = common::fixture_log(0);
    let bad = common::gating_violations(log.snapshot(), &vu::formats::starter_lexicon(), 200, 31);
    check(
        bad.is_empty(),
        "200 flips: flipped area loses exactly that response's hits, other areas unchanged".into(),
        format!("{} violations, first: {:?}", bad.len(), bad.first()),
    )
}

fn dataset(n: usize) -> DatasetManifest {
    let street = (n as f64 * 0.63).round() as usize;
    let facade = (n as f64 * 0.35).round() as usize;
    let records = (0..n)
        .map(|i| ImageRecord {
            image_id: format!("img{i}"),
            typology: if i < street {
                Typology::StreetView
            } else if i < street + facade {
                Typology::Facade
            } else {
                Typology::Detail
            },
            width_px: 1024,
            height_px: 1024,
        })
        .collect();
    DatasetManifest::new("shibuya", records)
}

fn manifest_validators() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let m = StimulusManifest {
        sequence_id: "seq".into(),
        area_id: "shibuya".into(),
        media_uri: "media/shibuya.mp4".into(),
        duration_s: 30.0,
        frame_count: 385,
        nominal_fps: 12.83,
        denoising_strength: 0.68,
    };
    let r = validate_sequence_manifest(&m, DEFAULT_FPS_TOLERANCE);
    let fps = r.derived.get("fps").copied().unwrap_or(f64::NAN);
    ok &= r.passed() && format!("{fps:.2}") == "12.83";
    notes.push(format!("385 frames/30 s passes at {fps:.2} fps"));

    let r = validate_sequence_manifest(&StimulusManifest { denoising_strength: 0.681, ..m }, DEFAULT_FPS_TOLERANCE);
    ok &= !r.passed();
    notes.push(format!("denoise 0.681 {}", if r.passed() { "PASSED" } else { "rejected" }));

    for n in [59, 60, 66, 67] {
        let r = validate_dataset_composition(&dataset(n), 3.0);
        let expect_pass = (60..=66).contains(&n);
        ok &= r.passed() == expect_pass;
        notes.push(format!("{n} images {}", if r.passed() { "pass" } else { "rejected" }));
    }

    let full = |n: u32| (0..n).flat_map(|r| (0..n).map(move |c| ((r, c), AreaId::from("z")))).collect::<BTreeMap<_, _>>();
    match build_sector_grid(1600, 200, &full(8)) {
        Ok(g) => {
            ok &= g.sectors.len() == 64;
            notes.push(format!("1600/200 gives {} sectors", g.sectors.len()));
        }
        Err(e) => {
            ok = false;
            notes.push(format!("1600/200 failed: {e}"));
        }
    }
    match build_sector_grid(1500, 200, &full(7)) {
        Err(GridError::NonIntegerRatio { ratio, remainder_m, .. }) => {
            ok &= ratio == 7.5 && remainder_m == 100;
            notes.push(format!("1500/200 rejected, ratio {ratio}, remainder {remainder_m} m"));
        }
        other => {
            ok = false;
            notes.push(format!("1500/200 not rejected: {other:?}"));
        }
    }
    let notes = notes.join("; ");
    check(ok, notes.clone(), notes)
}

fn sessions() -> Outcome {
    let e = common::explore_sessions(2, 2);
    let f = common::fuzz_platform(10_000, 20, 7);
    let ok = e.violations.is_empty() && e.completed_states > 0 && f.violations.is_empty();
    check(
        ok,
        format!(
            "{} states, {} transitions, {} complete, no violations; fuzz {} sequences / {} calls ({} accepted), 0 violations",
            e.states, e.transitions, e.completed_states, f.sequences, f.calls, f.accepted
        ),
        format!("model: {:?}; fuzz: {:?}", e.violations.first(), f.violations.first()),
    )
}

fn run_pipeline(root: &Path) -> Result<Vec<u8>, String> {
    let data = root.join("data");
    let fx = root.join("fx");
    let vu = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_vu"))
            .arg("--data-dir")
            .arg(&data)
            .args(args)
            .env_remove("VU_DATA_DIR")
            .env("SOURCE_DATE_EPOCH", "1700000000")
            .output()
            .map_err(|e| e.to_string())
    };
    for args in [vec!["fixture", "--out", fx.to_str().unwrap(), "--seed", "9"], vec!["ingest", fx.to_str().unwrap()]] {
        let o = vu(&args)?;
        if !o.status.success() {
            return Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)));
        }
    }
    let mut out = Vec::new();
    for kind in ["metrics", "semantic", "demographics", "histogram"] {
        let o = vu(&["report", kind, "--study", "tokyo-microcosms"])?;
        if !o.status.success() {
            return Err(format!("report {kind}: {}", String::from_utf8_lossy(&o.stderr)));
        }
        let again = vu(&["report", kind, "--study", "tokyo-microcosms"])?;
        if again.stdout != o.stdout {
            return Err(format!("report {kind} differs between two runs on the same data"));
        }
        out.extend(o.stdout);
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ra = run_pipeline(a.path())?;
    let rb = run_pipeline(b.path())?;
    let full = (0..8u32).flat_map(|r| (0..8).map(move |c| ((r, c), AreaId::new(format!("z{}", (r + c) % 3))))).collect();
    let grid = build_sector_grid(1600, 200, &full).map_err(|e| e.to_string())?;
    let limits: BTreeMap<AreaId, HeightRange> =
        (0..3).map(|i| (AreaId::new(format!("z{i}")), HeightRange { min_m: 3.0 + i as f64, max_m: 40.0 * (i + 1) as f64 })).collect();
    let h1 = assign_heights(&grid, &limits, 1234).map_err(|e| e.to_string())?;
    let h2 = assign_heights(&grid, &limits, 1234).map_err(|e| e.to_string())?;
    check(
        ra == rb && !ra.is_empty() && h1 == h2 && h1.len() == 64,
        format!("repeated reports byte-identical; two pipelines with a pinned clock identical ({} bytes); 64 heights identical for seed 1234", ra.len()),
        format!("reports equal: {}, heights equal: {}", ra == rb, h1 == h2),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("comparison table reproduced", comparison_table),
        ("cohort accuracy distribution", cohort_stats),
        ("group identity", group_identity),
        ("familiarity rate properties", familiarity_properties),
        ("element frequency table reproduced", element_table),
        ("correctness gating", gating),
        ("manifest and grid validators", manifest_validators),
        ("session state machine", sessions),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
