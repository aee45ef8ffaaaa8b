//! Generator for the nine-area Tokyo reference dataset.
//!
//! Nothing is hard-coded at the row level: per-area correct counts are
//! searched from the published display percentages, per-participant totals
//! from the histogram endpoints, familiarity sums from the published rates,
//! and the free-text corpus from the element counts. Each stage re-checks
//! its result and fails with [`FixtureError::Unsatisfiable`] naming the
//! constraint it could not meet.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use vu_core::design::StudyDefinition;
use vu_core::design::StimulusManifest;
use vu_core::events::{EventPayload, Registration};
use vu_core::metrics::RatePercent;
use vu_core::model::{
    AreaId, FamiliarityLevel, FamiliarityPooling, Guess, ParticipantGroup, ParticipantRecord, ResidenceBucket,
    SequenceId, SequenceResponse, StudyArea,
};
use vu_core::semantic::{map_terms, normalize_tokens, SemanticLexicon, ThematicGroup};

use crate::formats::{study_to_toml, write_lexicon};
use crate::ingest::{export_participants, export_responses, ImportFormat};
use crate::store::EventLog;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementTarget {
    pub group: ThematicGroup,
    pub term: &'static str,
    pub count: u64,
}

/// Published figures for one area. Percentages are display values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AreaTarget {
    pub area_id: &'static str,
    pub display_name: &'static str,
    pub origin_rank: u32,
    pub uil: [u32; 3],
    pub fr: [u32; 3],
    /// Ranked elements; entries past the published top three only pad the
    /// table below them.
    pub elements: Vec<ElementTarget>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureTargets {
    pub local: usize,
    pub foreign: usize,
    pub areas: Vec<AreaTarget>,
    pub familiarity_pooling: FamiliarityPooling,
    /// `(display percent, participants)` at the bottom and top of the
    /// per-participant accuracy range.
    pub lowest_bin: (u32, usize),
    pub highest_bin: (u32, usize),
    pub cohort_mean: u32,
    pub residence: [(ResidenceBucket, usize); 4],
    pub age_range: (u32, u32),
    pub highlighted: Vec<&'static str>,
}

/// Index into the `[local, foreign, general]` arrays of [`AreaTarget`].
const L: usize = 0;
const F: usize = 1;
const G: usize = 2;

fn el(group: ThematicGroup, term: &'static str, count: u64) -> ElementTarget {
    ElementTarget { group, term, count }
}

impl FixtureTargets {
    /// Tokyo Microcosms pilot: 20 local and 16 foreign participants.
    pub fn tokyo() -> Self {
        use ThematicGroup::*;
        let a = |area_id, display_name, origin_rank, uil, fr, elements| AreaTarget {
            area_id,
            display_name,
            origin_rank,
            uil,
            fr,
            elements,
        };
        Self {
            local: 20,
            foreign: 16,
            areas: vec![
                a("shimokitazawa", "Shimokitazawa", 1, [90, 81, 86], [61, 44, 53], vec![
                    el(Typology, "Shops", 31), el(Element, "Clothing", 25), el(Quality, "Small", 17), el(Typology, "Cafes", 9),
                ]),
                a("harajuku", "Harajuku", 2, [100, 100, 100], [57, 63, 60], vec![
                    el(Typology, "Shops", 24), el(Quality, "Colorful", 22), el(Element, "Fashion", 12), el(Quality, "Crowded", 8),
                ]),
                a("yanesen", "Yanesen", 3, [85, 50, 69], [32, 5, 19], vec![
                    el(Quality, "Old", 16), el(Typology, "Private House", 12), el(Characteristic, "Narrow", 10), el(Element, "Cats", 6),
                ]),
                a("kagurazaka", "Kagurazaka", 4, [85, 44, 67], [44, 19, 32], vec![
                    el(Quality, "Traditional", 12), el(Element, "River", 10), el(Characteristic, "Narrow", 10), el(Material, "Stone Paving", 7),
                ]),
                a("asakusa", "Asakusa", 5, [100, 100, 100], [57, 44, 51], vec![
                    el(Color, "Red", 38), el(Quality, "Traditional", 23), el(Typology, "Temples", 10), el(Element, "Lanterns", 8),
                ]),
                a("ueno", "Ueno", 6, [90, 56, 75], [63, 60, 62], vec![
                    el(Environment, "Park", 21), el(Typology, "Izakaya", 13), el(Characteristic, "Wide", 14), el(Typology, "Museums", 9),
                ]),
                a("shibuya", "Shibuya", 7, [90, 75, 83], [69, 68, 69], vec![
                    el(Element, "Signage", 32), el(Characteristic, "High", 25), el(Environment, "River", 20), el(Quality, "Crowded", 15),
                ]),
                a("ikebukuro", "Ikebukuro", 8, [90, 56, 75], [54, 62, 58], vec![
                    el(Element, "Signage", 21), el(Quality, "Cluttered", 10), el(Color, "Red", 9), el(Quality, "Crowded", 7),
                ]),
                a("roppongi", "Roppongi", 9, [80, 63, 72], [51, 46, 49], vec![
                    el(Material, "Glass", 10), el(Typology, "\u{201c}Glass\u{201d} Buildings", 10), el(Element, "Bridge", 10), el(Environment, "Greenery", 6),
                ]),
            ],
            familiarity_pooling: FamiliarityPooling::GroupMean,
            lowest_bin: (44, 3),
            highest_bin: (100, 14),
            cohort_mean: 81,
            residence: [
                (ResidenceBucket::UpToOneYear, 3),
                (ResidenceBucket::OneToThreeYears, 14),
                (ResidenceBucket::ThreeToFiveYears, 5),
                (ResidenceBucket::FiveYearsOrMore, 14),
            ],
            age_range: (21, 42),
            highlighted: vec!["shimokitazawa", "harajuku", "shibuya", "roppongi"],
        }
    }

}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("unsatisfiable constraint `{constraint}`: {detail}")]
    Unsatisfiable { constraint: String, detail: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("fixture rejected by the event log: {0}")]
    Store(#[from] crate::store::StoreError),
}

fn unsat(constraint: impl Into<String>, detail: impl Into<String>) -> FixtureError {
    FixtureError::Unsatisfiable { constraint: constraint.into(), detail: detail.into() }
}

fn display(n: u64, d: u64) -> u32 {
    RatePercent::new(n, d).map_or(u32::MAX, |r| r.display())
}

/// Correct counts `(local, foreign)` per area whose displays match the
/// targets; the first pair in ascending order wins.
pub fn solve_uil_counts(t: &FixtureTargets) -> Result<Vec<(u64, u64)>, FixtureError> {
    let (nl, nf) = (t.local as u64, t.foreign as u64);
    t.areas
        .iter()
        .map(|a| {
            let cl: Vec<u64> = (0..=nl).filter(|&c| display(c, nl) == a.uil[L]).collect();
            if cl.is_empty() {
                return Err(unsat(format!("uil.local.{}", a.area_id), format!("no count out of {nl} displays as {}%", a.uil[L])));
            }
            let cf: Vec<u64> = (0..=nf).filter(|&c| display(c, nf) == a.uil[F]).collect();
            if cf.is_empty() {
                return Err(unsat(format!("uil.foreign.{}", a.area_id), format!("no count out of {nf} displays as {}%", a.uil[F])));
            }
            cl.iter()
                .flat_map(|&l| cf.iter().map(move |&f| (l, f)))
                .find(|&(l, f)| display(l + f, nl + nf) == a.uil[G])
                .ok_or_else(|| {
                    unsat(format!("uil.general.{}", a.area_id), format!("no local/foreign split pools to {}%", a.uil[G]))
                })
        })
        .collect()
}

/// Whether a 0/1 matrix with these row and column sums exists.
pub fn gale_ryser(rows: &[u64], cols: &[u64]) -> bool {
    let mut r = rows.to_vec();
    r.sort_unstable_by(|a, b| b.cmp(a));
    if r.iter().sum::<u64>() != cols.iter().sum::<u64>() {
        return false;
    }
    let mut prefix = 0;
    for (k, x) in r.iter().enumerate() {
        prefix += x;
        let cap: u64 = cols.iter().map(|&c| c.min(k as u64 + 1)).sum();
        if prefix > cap {
            return false;
        }
    }
    true
}

/// Ryser's greedy fill: rows in descending order of sum, each taking the
/// columns with the most remaining demand. Returns one 0/1 row per input
/// row, in input order.
pub fn ryser_matrix(rows: &[u64], cols: &[u64]) -> Option<Vec<Vec<bool>>> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].cmp(&rows[a]).then(a.cmp(&b)));
    let mut left = cols.to_vec();
    let mut out = vec![vec![false; cols.len()]; rows.len()];
    for i in order {
        let mut idx: Vec<usize> = (0..cols.len()).filter(|&j| left[j] > 0).collect();
        idx.sort_by(|&a, &b| left[b].cmp(&left[a]).then(a.cmp(&b)));
        if idx.len() < rows[i] as usize {
            return None;
        }
        for &j in idx.iter().take(rows[i] as usize) {
            out[i][j] = true;
            left[j] -= 1;
        }
    }
    left.iter().all(|&x| x == 0).then_some(out)
}

/// Spreads `total` over `m` values as evenly as possible, larger first.
fn even_split(total: u64, m: usize) -> Vec<u64> {
    if m == 0 {
        return Vec::new();
    }
    let (q, r) = (total / m as u64, (total % m as u64) as usize);
    (0..m).map(|i| q + u64::from(i < r)).collect()
}

/// Per-participant correct counts for each group. The top and bottom bins
/// are split between the groups, local taking as many top scores and as
/// few bottom scores as feasibility allows; every other participant lands
/// strictly between the two bins, spread evenly.
pub fn solve_row_sums(t: &FixtureTargets, counts: &[(u64, u64)]) -> Result<[Vec<u64>; 2], FixtureError> {
    let n_seq = t.areas.len() as u64;
    let value_for = |display_target: u32, what: &str| {
        (0..=n_seq)
            .find(|&c| display(c, n_seq) == display_target)
            .ok_or_else(|| unsat(what, format!("no score out of {n_seq} displays as {display_target}%")))
    };
    let lo = value_for(t.lowest_bin.0, "histogram.lowest_bin")?;
    let hi = value_for(t.highest_bin.0, "histogram.highest_bin")?;
    if lo + 1 >= hi {
        return Err(unsat("histogram.range", "no room between the lowest and highest bins"));
    }
    let cols: [Vec<u64>; 2] = [counts.iter().map(|c| c.0).collect(), counts.iter().map(|c| c.1).collect()];
    let sizes = [t.local, t.foreign];
    let totals = [cols[0].iter().sum::<u64>(), cols[1].iter().sum::<u64>()];
    let total = totals[0] + totals[1];
    let n = (t.local + t.foreign) as u64;
    if display(total, n * n_seq) != t.cohort_mean {
        return Err(unsat("cohort_mean", format!("{total}/{} does not display as {}%", n * n_seq, t.cohort_mean)));
    }
    let rows_for = |g: usize, top: usize, bottom: usize| -> Option<Vec<u64>> {
        let m = sizes[g].checked_sub(top + bottom)?;
        let rest = totals[g].checked_sub(hi * top as u64 + lo * bottom as u64)?;
        let middle = even_split(rest, m);
        if middle.iter().any(|&x| x <= lo || x >= hi) || (m == 0 && rest != 0) {
            return None;
        }
        let mut rows = vec![hi; top];
        rows.extend(middle);
        rows.extend(std::iter::repeat_n(lo, bottom));
        gale_ryser(&rows, &cols[g]).then_some(rows)
    };
    let (top, bottom) = (t.highest_bin.1, t.lowest_bin.1);
    for top_local in (0..=top.min(t.local)).rev() {
        for bottom_local in 0..=bottom.min(t.local) {
            let local = rows_for(L, top_local, bottom_local);
            let foreign = rows_for(F, top - top_local, bottom - bottom_local);
            if let (Some(l), Some(f)) = (local, foreign) {
                return Ok([l, f]);
            }
        }
    }
    Err(unsat("histogram.rows", "no split of participant scores meets the bins and the per-area counts"))
}

/// Familiarity sums in tenths `(local, foreign)` per area; first pair in
/// ascending order whose three displays match and which both decompose
/// into available levels.
pub fn solve_familiarity_sums(t: &FixtureTargets) -> Result<Vec<(u64, u64)>, FixtureError> {
    let (nl, nf) = (t.local as u64, t.foreign as u64);
    t.areas
        .iter()
        .map(|a| {
            let fl: Vec<u64> =
                (0..=10 * nl).filter(|&s| display(s, 10 * nl) == a.fr[L] && decompose(s, nl).is_some()).collect();
            let ff: Vec<u64> =
                (0..=10 * nf).filter(|&s| display(s, 10 * nf) == a.fr[F] && decompose(s, nf).is_some()).collect();
            if fl.is_empty() {
                return Err(unsat(format!("fr.local.{}", a.area_id), format!("no profile sum displays as {}%", a.fr[L])));
            }
            if ff.is_empty() {
                return Err(unsat(format!("fr.foreign.{}", a.area_id), format!("no profile sum displays as {}%", a.fr[F])));
            }
            let general = |l: u64, f: u64| match t.familiarity_pooling {
                FamiliarityPooling::Respondents => display(l + f, 10 * (nl + nf)),
                FamiliarityPooling::GroupMean => display(l * nf + f * nl, 20 * nl * nf),
            };
            fl.iter()
                .flat_map(|&l| ff.iter().map(move |&f| (l, f)))
                .find(|&(l, f)| general(l, f) == a.fr[G])
                .ok_or_else(|| {
                    unsat(
                        format!("fr.general.{}", a.area_id),
                        format!("no local/foreign sums give {}% under {} pooling", a.fr[G], t.familiarity_pooling.as_str()),
                    )
                })
        })
        .collect()
}

/// Counts `(continuous, regular, quick)` with weights 10, 7, 4 summing to
/// `tenths` over at most `n` respondents; fewest continuous residents first,
/// then fewest quick visits.
pub fn decompose(tenths: u64, n: u64) -> Option<(u64, u64, u64)> {
    (0..=tenths / 10).find_map(|c| {
        let rest = tenths - 10 * c;
        (0..=rest / 7).rev().find_map(|b| {
            let r = rest - 7 * b;
            (r.is_multiple_of(4) && c + b + r / 4 <= n).then_some((c, b, r / 4))
        })
    })
}

fn levels_for(tenths: u64, n: u64) -> Vec<FamiliarityLevel> {
    let (c, b, a) = decompose(tenths, n).expect("sums were chosen decomposable");
    let mut v = vec![FamiliarityLevel::ContinuousResidence; c as usize];
    v.extend(std::iter::repeat_n(FamiliarityLevel::RegularAttendance, b as usize));
    v.extend(std::iter::repeat_n(FamiliarityLevel::QuickVisits, a as usize));
    v.resize(n as usize, FamiliarityLevel::NotFamiliar);
    v
}

/// A generated dataset.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub study: StudyDefinition,
    pub participants: Vec<ParticipantRecord>,
    pub responses: Vec<SequenceResponse>,
    pub lexicon: SemanticLexicon,
}

const FILLER: &[&str] = &[
    "the", "area", "felt", "like", "with", "many", "and", "lots", "of", "very", "quite", "saw", "there", "were",
    "some", "everywhere", "noticed", "mostly", "also", "really", "a", "bit", "feeling", "mood", "overall", "vibe",
    "looked", "seemed", "around", "corner",
];

fn check_filler(lex: &SemanticLexicon) -> Result<(), FixtureError> {
    match FILLER.iter().find(|w| lex.mentions_token(w)) {
        Some(w) => Err(unsat("corpus.filler", format!("filler word `{w}` is part of a lexicon surface form"))),
        None => Ok(()),
    }
}

/// Surface forms that map, on their own and within `area`, to exactly the
/// given element.
fn surfaces_for(lex: &SemanticLexicon, area: &AreaId, e: &ElementTarget) -> Vec<String> {
    lex.entries()
        .iter()
        .filter(|x| x.canonical_term == e.term && x.group == e.group)
        .filter(|x| x.area.as_ref().is_none_or(|a| a == area))
        .map(|x| x.surface.clone())
        .filter(|s| {
            let m = map_terms(&normalize_tokens(s, Some(lex)), lex, Some(area));
            m.unmatched_tokens == 0
                && m.hits.len() == 1
                && m.hits[0].canonical_term == e.term
                && m.hits[0].group == e.group
        })
        .collect()
}

fn pad_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| *FILLER.choose(rng).expect("non-empty")).collect()
}

/// Joins mentions with at least one filler word between neighbours.
fn compose(rng: &mut ChaCha8Rng, mentions: &[String]) -> String {
    let n = rng.random_range(1..=3);
    let mut words: Vec<String> = pad_words(rng, n).into_iter().map(String::from).collect();
    for m in mentions {
        words.push(m.clone());
        let n = rng.random_range(1..=3);
        words.extend(pad_words(rng, n).into_iter().map(String::from));
    }
    words.join(" ")
}

/// Builds the dataset. `seed` only changes filler wording and which wrong
/// area an incorrect answer names.
pub fn build_fixture(t: &FixtureTargets, lexicon: &SemanticLexicon, seed: u64) -> Result<Fixture, FixtureError> {
    let counts = solve_uil_counts(t)?;
    let rows = solve_row_sums(t, &counts)?;
    let fam = solve_familiarity_sums(t)?;
    check_filler(lexicon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let areas: Vec<StudyArea> = t
        .areas
        .iter()
        .map(|a| StudyArea { area_id: a.area_id.into(), display_name: a.display_name.into(), origin_rank: a.origin_rank })
        .collect();
    let seq_of = |a: &str| SequenceId::new(format!("seq-{a}"));
    let stimuli = t
        .areas
        .iter()
        .map(|a| StimulusManifest {
            sequence_id: seq_of(a.area_id),
            area_id: a.area_id.into(),
            media_uri: format!("media/{}.mp4", a.area_id),
            duration_s: 30.0,
            frame_count: 385,
            nominal_fps: 12.83,
            denoising_strength: 0.68,
        })
        .collect();
    let mut study = StudyDefinition::new("tokyo-microcosms", areas, stimuli);
    study.title = "Virtual Urbanism and Tokyo Microcosms".into();
    study.familiarity_pooling = t.familiarity_pooling;
    study.highlighted_areas = t.highlighted.iter().map(|&a| AreaId::from(a)).collect();

    // participants: locals first, demographics dealt out deterministically
    let groups = [(ParticipantGroup::Local, t.local), (ParticipantGroup::Foreign, t.foreign)];
    let mut residence: Vec<ResidenceBucket> =
        t.residence.iter().flat_map(|&(b, n)| std::iter::repeat_n(b, n)).collect();
    // longest residence to locals, shortest to foreign participants
    residence.reverse();
    if residence.len() != t.local + t.foreign {
        return Err(unsat("residence", "bucket counts do not add up to the cohort"));
    }
    let (age_lo, age_hi) = t.age_range;
    let span = age_hi - age_lo + 1;
    let professions = ["architecture student", "architect", "engineer", "academic", "employee"];
    let ai = ["occasional", "occasional", "none", "regular academic use", "regular professional use"];
    let mut participants = Vec::new();
    for (g, size) in groups {
        for _ in 0..size {
            let i = participants.len();
            let mut p = ParticipantRecord::new(format!("P{}", i + 1), g);
            p.age = Some(age_lo + (i as u32 * 7) % span);
            p.residence = Some(residence[i]);
            p.profession = Some(professions[i % professions.len()].into());
            p.ai_familiarity = Some(ai[i % ai.len()].into());
            participants.push(p);
        }
    }
    for (k, a) in t.areas.iter().enumerate() {
        let sums = [fam[k].0, fam[k].1];
        let mut start = 0;
        for (g, (_, size)) in groups.iter().enumerate() {
            let levels = levels_for(sums[g], *size as u64);
            for (j, level) in levels.iter().enumerate() {
                let who = start + (j + 7 * k) % size;
                participants[who].familiarity_profile.insert(a.area_id.into(), *level);
            }
            start += size;
        }
    }

    // correctness matrix per group, participant order within the group
    let mut correct: Vec<Vec<bool>> = Vec::new();
    for (g, (_, _)) in groups.iter().enumerate() {
        let cols: Vec<u64> = counts.iter().map(|c| if g == L { c.0 } else { c.1 }).collect();
        let m = ryser_matrix(&rows[g], &cols)
            .ok_or_else(|| unsat("histogram.rows", "greedy construction failed for feasible sums"))?;
        correct.extend(m);
    }

    // corpus: each area's mentions dealt round-robin over its correct
    // responses, then over the four free-text items
    let mut texts: BTreeMap<(usize, usize), [Vec<String>; 4]> = BTreeMap::new();
    for (k, a) in t.areas.iter().enumerate() {
        let area = AreaId::from(a.area_id);
        let responders: Vec<usize> = (0..participants.len()).filter(|&i| correct[i][k]).collect();
        if responders.is_empty() && a.elements.iter().any(|e| e.count > 0) {
            return Err(unsat(format!("corpus.{}", a.area_id), "elements but no correct responses"));
        }
        let mut slot = 0;
        for e in &a.elements {
            let surfaces = surfaces_for(lexicon, &area, e);
            if surfaces.is_empty() {
                return Err(unsat(
                    format!("corpus.{}.{}", a.area_id, e.term),
                    format!("no lexicon surface maps to {} {} in this area", e.group.as_str(), e.term),
                ));
            }
            for n in 0..e.count as usize {
                let who = responders[slot % responders.len()];
                let item = (slot / responders.len()) % 4;
                texts.entry((who, k)).or_default()[item].push(surfaces[n % surfaces.len()].clone());
                slot += 1;
            }
        }
    }

    let mut responses = Vec::new();
    for (i, p) in participants.iter().enumerate() {
        for (k, a) in t.areas.iter().enumerate() {
            let guess = if correct[i][k] {
                AreaId::from(a.area_id)
            } else {
                let others: Vec<&AreaTarget> = t.areas.iter().filter(|o| o.area_id != a.area_id).collect();
                AreaId::from(others.choose(&mut rng).expect("several areas").area_id)
            };
            let mentions = match texts.remove(&(i, k)) {
                Some(m) => m,
                None if correct[i][k] => Default::default(),
                // wrong answers still describe what the participant saw
                None => {
                    let wrong = t.areas.iter().find(|o| o.area_id == guess.as_str()).expect("known area");
                    let mut m: [Vec<String>; 4] = Default::default();
                    if let Some(e) = wrong.elements.first() {
                        m[0] = surfaces_for(lexicon, &guess, e).into_iter().take(1).collect();
                    }
                    m
                }
            };
            let mut r = SequenceResponse::new(p.participant_id.clone(), seq_of(a.area_id), Guess::Area(guess));
            r.q2_text = compose(&mut rng, &mentions[0]);
            r.q3_text = compose(&mut rng, &mentions[1]);
            r.q4_text = compose(&mut rng, &mentions[2]);
            r.q5_text = compose(&mut rng, &mentions[3]);
            r.loops_viewed = study.schedule.in_depth_loops_per_sequence;
            responses.push(r);
        }
    }
    verify_corpus(&study, lexicon, &responses, t)?;
    Ok(Fixture { study, participants, responses, lexicon: lexicon.clone() })
}

/// Recounts mentions over the generated text of correct responses.
fn verify_corpus(
    study: &StudyDefinition,
    lexicon: &SemanticLexicon,
    responses: &[SequenceResponse],
    t: &FixtureTargets,
) -> Result<(), FixtureError> {
    let mut counts: BTreeMap<(&str, ThematicGroup, String), u64> = BTreeMap::new();
    for r in responses {
        let area = study.sequence_area(&r.sequence_id).expect("fixture sequences exist");
        if r.guessed_area_id.area() != Some(area) {
            continue;
        }
        let a = t.areas.iter().find(|a| a.area_id == area.as_str()).expect("fixture areas exist");
        for text in [&r.q2_text, &r.q3_text, &r.q4_text, &r.q5_text] {
            for h in map_terms(&normalize_tokens(text, Some(lexicon)), lexicon, Some(area)).hits {
                *counts.entry((a.area_id, h.group, h.canonical_term)).or_default() += 1;
            }
        }
    }
    for a in &t.areas {
        for e in &a.elements {
            let got = counts.remove(&(a.area_id, e.group, e.term.to_string())).unwrap_or(0);
            if got != e.count {
                return Err(unsat(
                    format!("corpus.{}.{}", a.area_id, e.term),
                    format!("recount found {got} mentions, expected {}", e.count),
                ));
            }
        }
    }
    if let Some(((area, g, term), n)) = counts.into_iter().next() {
        return Err(unsat(format!("corpus.{area}"), format!("stray mentions of {} {term} ({n})", g.as_str())));
    }
    Ok(())
}

pub const STUDY_FILE: &str = "study.toml";
pub const PARTICIPANTS_FILE: &str = "participants.csv";
pub const RESPONSES_FILE: &str = "responses.csv";
pub const LEXICON_FILE: &str = "lexicon.tsv";

impl Fixture {
    /// Runs the dataset through an in-memory event log, which applies the
    /// same checks as a live study.
    pub fn to_log(&self, recorded_at: u64) -> Result<EventLog, FixtureError> {
        let mut log = EventLog::memory();
        log.append(EventPayload::StudyCreated(self.study.clone()), recorded_at)?;
        for p in &self.participants {
            log.append(EventPayload::ParticipantRegistered(Registration { participant: p.clone(), token: None }), recorded_at)?;
        }
        for r in &self.responses {
            let mut r = r.clone();
            r.submitted_at = recorded_at;
            log.append(EventPayload::ResponseSubmitted(r), recorded_at)?;
        }
        Ok(log)
    }

    /// Writes the study definition, participant and response tables and the
    /// lexicon into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, FixtureError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| FixtureError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let log = self.to_log(0)?;
        let mut participants = Vec::new();
        export_participants(log.snapshot(), ImportFormat::Csv, &mut participants).map_err(io(dir))?;
        let mut responses = Vec::new();
        export_responses(log.snapshot(), ImportFormat::Csv, &mut responses).map_err(io(dir))?;
        let files: [(&str, Vec<u8>); 4] = [
            (STUDY_FILE, study_to_toml(&self.study).into_bytes()),
            (PARTICIPANTS_FILE, participants),
            (RESPONSES_FILE, responses),
            (LEXICON_FILE, write_lexicon(&self.lexicon).into_bytes()),
        ];
        let mut out = Vec::new();
        for (name, bytes) in files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io(&path))?;
            out.push(path);
        }
        Ok(out)
    }
}
