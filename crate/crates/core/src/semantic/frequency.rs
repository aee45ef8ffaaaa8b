use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexicon::{SemanticLexicon, ThematicGroup};
use super::tokenize::normalize_tokens;
use crate::metrics::Evaluation;
use crate::model::{AreaId, FreeTextItem, GroupView};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TermHit {
    pub canonical_term: String,
    pub group: ThematicGroup,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermMatches {
    pub hits: Vec<TermHit>,
    /// Tokens consumed by hits (a phrase consumes several).
    pub matched_tokens: usize,
    pub unmatched_tokens: usize,
}

/// Greedy longest-phrase matching over the token stream. Area-scoped
/// entries win over global ones of the same length.
pub fn map_terms(tokens: &[String], lexicon: &SemanticLexicon, area: Option<&AreaId>) -> TermMatches {
    let mut m = TermMatches::default();
    let mut i = 0;
    while i < tokens.len() {
        let max = lexicon.max_phrase().min(tokens.len() - i);
        let found = (1..=max)
            .rev()
            .find_map(|len| lexicon.lookup(&tokens[i..i + len], area).map(|e| (len, e)));
        match found {
            Some((len, e)) => {
                m.hits.push(TermHit { canonical_term: e.canonical_term.clone(), group: e.group });
                m.matched_tokens += len;
                i += len;
            }
            None => {
                m.unmatched_tokens += 1;
                i += 1;
            }
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementCount {
    pub group: ThematicGroup,
    pub canonical_term: String,
    pub count: u64,
}

/// Bookkeeping over the correct-identification corpus of one area.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AreaTermStats {
    pub responses: usize,
    pub tokens: usize,
    pub hits: u64,
    pub matched_tokens: usize,
    pub unmatched_tokens: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementFrequencyTable {
    /// Sorted by count descending, then group order, then term.
    pub areas: BTreeMap<AreaId, Vec<ElementCount>>,
    pub stats: BTreeMap<AreaId, AreaTermStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticOptions {
    /// Free-text items feeding the corpus.
    pub items: BTreeSet<FreeTextItem>,
    pub group: GroupView,
}

impl Default for SemanticOptions {
    fn default() -> Self {
        Self { items: FreeTextItem::ALL.into_iter().collect(), group: GroupView::General }
    }
}

fn sort_elements(v: &mut [ElementCount]) {
    v.sort_by(|a, b| {
        b.count
            .cmp(&a.count)
            .then_with(|| a.group.cmp(&b.group))
            .then_with(|| a.canonical_term.cmp(&b.canonical_term))
    });
}

/// Per-mention element counts, per area, over responses that correctly
/// identified the area's sequence.
pub fn element_frequencies(
    eval: &Evaluation<'_>,
    lexicon: &SemanticLexicon,
    options: &SemanticOptions,
) -> ElementFrequencyTable {
    let members: BTreeSet<_> = eval
        .participants
        .iter()
        .filter(|p| options.group.contains(p.group))
        .map(|p| &p.participant_id)
        .collect();
    let mut counts: BTreeMap<AreaId, BTreeMap<(ThematicGroup, String), u64>> = BTreeMap::new();
    let mut stats: BTreeMap<AreaId, AreaTermStats> = BTreeMap::new();
    for a in &eval.study.areas {
        counts.insert(a.area_id.clone(), BTreeMap::new());
        stats.insert(a.area_id.clone(), AreaTermStats::default());
    }
    for r in eval.responses {
        if !members.contains(&r.participant_id) || !eval.is_correct(r) {
            continue;
        }
        let area = eval.study.sequence_area(&r.sequence_id).expect("correct responses have a known sequence");
        let st = stats.entry(area.clone()).or_default();
        let area_counts = counts.entry(area.clone()).or_default();
        st.responses += 1;
        for item in &options.items {
            let tokens = normalize_tokens(r.text(*item), Some(lexicon));
            let m = map_terms(&tokens, lexicon, Some(area));
            st.tokens += tokens.len();
            st.matched_tokens += m.matched_tokens;
            st.unmatched_tokens += m.unmatched_tokens;
            st.hits += m.hits.len() as u64;
            for h in m.hits {
                *area_counts.entry((h.group, h.canonical_term)).or_default() += 1;
            }
        }
    }
    let areas = counts
        .into_iter()
        .map(|(area, c)| {
            let mut v: Vec<ElementCount> = c
                .into_iter()
                .map(|((group, canonical_term), count)| ElementCount { group, canonical_term, count })
                .collect();
            sort_elements(&mut v);
            (area, v)
        })
        .collect();
    ElementFrequencyTable { areas, stats }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("k must be at least 1")]
pub struct InvalidK;

pub const DEFAULT_TOP_K: usize = 3;

/// First `k` rows per area.
pub fn top_k_elements(table: &ElementFrequencyTable, k: usize) -> Result<ElementFrequencyTable, InvalidK> {
    if k == 0 {
        return Err(InvalidK);
    }
    Ok(ElementFrequencyTable {
        areas: table
            .areas
            .iter()
            .map(|(a, v)| (a.clone(), v.iter().take(k).cloned().collect()))
            .collect(),
        stats: table.stats.clone(),
    })
}
