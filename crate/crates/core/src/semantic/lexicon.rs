use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tokenize::{is_unspaced, surface_tokens};
use crate::model::AreaId;

/// Category of an identity element. The declaration order is the tie-break
/// order used when ranking elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ThematicGroup {
    Element,
    Environment,
    Typology,
    Color,
    Quality,
    Characteristic,
    Material,
}

/// The coarser five-theme view; Quality, Characteristic and Material
/// collapse into qualitative characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Theme {
    Elements,
    Environment,
    Typology,
    Color,
    QualitativeCharacteristics,
}

impl ThematicGroup {
    pub const ALL: [ThematicGroup; 7] = [
        ThematicGroup::Element,
        ThematicGroup::Environment,
        ThematicGroup::Typology,
        ThematicGroup::Color,
        ThematicGroup::Quality,
        ThematicGroup::Characteristic,
        ThematicGroup::Material,
    ];

    pub fn theme(self) -> Theme {
        match self {
            ThematicGroup::Element => Theme::Elements,
            ThematicGroup::Environment => Theme::Environment,
            ThematicGroup::Typology => Theme::Typology,
            ThematicGroup::Color => Theme::Color,
            ThematicGroup::Quality | ThematicGroup::Characteristic | ThematicGroup::Material => {
                Theme::QualitativeCharacteristics
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ThematicGroup::Element => "Element",
            ThematicGroup::Environment => "Environment",
            ThematicGroup::Typology => "Typology",
            ThematicGroup::Color => "Color",
            ThematicGroup::Quality => "Quality",
            ThematicGroup::Characteristic => "Characteristic",
            ThematicGroup::Material => "Material",
        }
    }

    /// Case-insensitive; accepts `Colour` as well.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("colour") {
            return Some(ThematicGroup::Color);
        }
        Self::ALL.into_iter().find(|g| g.as_str().eq_ignore_ascii_case(s))
    }
}

/// One surface form. `area` restricts the entry to responses about that
/// area; an area-scoped entry takes precedence over a global one with the
/// same surface form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub surface: String,
    pub canonical_term: String,
    pub group: ThematicGroup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<AreaId>,
}

impl LexiconEntry {
    pub fn global(surface: &str, canonical: &str, group: ThematicGroup) -> Self {
        Self { surface: surface.into(), canonical_term: canonical.into(), group, area: None }
    }

    pub fn scoped(area: &str, surface: &str, canonical: &str, group: ThematicGroup) -> Self {
        Self { area: Some(area.into()), ..Self::global(surface, canonical, group) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexiconError {
    #[error("entry {index}: surface form is empty after normalization")]
    EmptySurface { index: usize },
    #[error("entry {index}: canonical term is empty")]
    EmptyCanonical { index: usize },
    #[error("surface form `{surface}` is declared twice{}", scope_suffix(.area))]
    DuplicateSurface { surface: String, area: Option<AreaId> },
}

fn scope_suffix(area: &Option<AreaId>) -> String {
    match area {
        Some(a) => alloc::format!(" for area `{a}`"),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Default)]
struct Scoped {
    global: Option<usize>,
    by_area: BTreeMap<AreaId, usize>,
}

/// Versioned mapping from normalized surface forms to canonical elements.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "LexiconRepr", into = "LexiconRepr")]
pub struct SemanticLexicon {
    version: String,
    entries: Vec<LexiconEntry>,
    index: BTreeMap<Vec<String>, Scoped>,
    max_phrase: usize,
    unspaced: BTreeSet<String>,
    max_unspaced_chars: usize,
}

#[derive(Serialize, Deserialize)]
struct LexiconRepr {
    version: String,
    entries: Vec<LexiconEntry>,
}

impl TryFrom<LexiconRepr> for SemanticLexicon {
    type Error = LexiconError;
    fn try_from(r: LexiconRepr) -> Result<Self, LexiconError> {
        SemanticLexicon::new(r.version, r.entries)
    }
}

impl From<SemanticLexicon> for LexiconRepr {
    fn from(l: SemanticLexicon) -> Self {
        LexiconRepr { version: l.version, entries: l.entries }
    }
}

impl PartialEq for SemanticLexicon {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version && self.entries == other.entries
    }
}

impl SemanticLexicon {
    pub fn new(version: impl Into<String>, entries: Vec<LexiconEntry>) -> Result<Self, LexiconError> {
        let mut index: BTreeMap<Vec<String>, Scoped> = BTreeMap::new();
        let mut unspaced = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.canonical_term.trim().is_empty() {
                return Err(LexiconError::EmptyCanonical { index: i });
            }
            let key = surface_tokens(&e.surface);
            if key.is_empty() {
                return Err(LexiconError::EmptySurface { index: i });
            }
            for t in &key {
                if t.chars().any(is_unspaced) {
                    unspaced.insert(t.clone());
                }
            }
            let slot = index.entry(key.clone()).or_default();
            let dup = match &e.area {
                None => slot.global.replace(i).is_some(),
                Some(a) => slot.by_area.insert(a.clone(), i).is_some(),
            };
            if dup {
                return Err(LexiconError::DuplicateSurface { surface: key.join(" "), area: e.area.clone() });
            }
        }
        Ok(Self {
            version: version.into(),
            max_phrase: index.keys().map(Vec::len).max().unwrap_or(0),
            max_unspaced_chars: unspaced.iter().map(|s| s.chars().count()).max().unwrap_or(0),
            entries,
            index,
            unspaced,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn max_phrase(&self) -> usize {
        self.max_phrase
    }

    pub(crate) fn max_unspaced_chars(&self) -> usize {
        self.max_unspaced_chars
    }

    pub(crate) fn has_unspaced_form(&self, s: &str) -> bool {
        self.unspaced.contains(s)
    }

    /// Entry for an exact token sequence, preferring the area-scoped one.
    pub fn lookup(&self, tokens: &[String], area: Option<&AreaId>) -> Option<&LexiconEntry> {
        let slot = self.index.get(tokens)?;
        area.and_then(|a| slot.by_area.get(a)).or(slot.global.as_ref()).map(|&i| &self.entries[i])
    }

    /// Whether a single normalized token is the surface form (or part of a
    /// phrase) of any entry.
    pub fn mentions_token(&self, token: &str) -> bool {
        self.index.keys().any(|k| k.iter().any(|t| t == token))
    }

    /// Distinct canonical terms with their group.
    pub fn canonical_terms(&self) -> BTreeSet<(ThematicGroup, String)> {
        self.entries.iter().map(|e| (e.group, e.canonical_term.to_string())).collect()
    }
}
