//! Frequency-based semantic analysis of free-text answers: surface forms
//! are mapped through a lexicon to canonical identity elements, and counted
//! per area over responses that identified the area correctly.

mod frequency;
mod lexicon;
mod tokenize;

pub use frequency::{
    element_frequencies, map_terms, top_k_elements, AreaTermStats, ElementCount, ElementFrequencyTable, InvalidK,
    SemanticOptions, TermHit, TermMatches, DEFAULT_TOP_K,
};
pub use lexicon::{LexiconEntry, LexiconError, SemanticLexicon, Theme, ThematicGroup};
pub use tokenize::normalize_tokens;
