//! Study definition files (TOML or JSON) and lexicon tables (TSV).

use std::fs;
use std::path::Path;

use thiserror::Error;
use vu_core::design::StudyDefinition;
use vu_core::semantic::{LexiconEntry, LexiconError, SemanticLexicon, ThematicGroup};

/// Lexicon shipped with the crate; covers the identity elements of the nine
/// Tokyo case-study areas with English and Japanese surface forms.
pub const STARTER_LEXICON: &str = include_str!("../data/starter_lexicon.tsv");

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: invalid TOML: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("{path}: invalid JSON: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("lexicon line {line}: {message}")]
    LexiconLine { line: usize, message: String },
    #[error("lexicon: {0}")]
    Lexicon(#[from] LexiconError),
}

fn read(path: &Path) -> Result<String, FormatError> {
    fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })
}

/// Loads a study definition; `.json` files are read as JSON, anything else
/// as TOML.
pub fn load_study(path: &Path) -> Result<StudyDefinition, FormatError> {
    let text = read(path)?;
    let p = path.display().to_string();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).map_err(|source| FormatError::Json { path: p, source })
    } else {
        toml::from_str(&text).map_err(|source| FormatError::Toml { path: p, source })
    }
}

pub fn study_to_toml(def: &StudyDefinition) -> String {
    toml::to_string(def).expect("study definitions serialize to TOML")
}

/// Parses a lexicon table: `surface<TAB>canonical<TAB>group[<TAB>area]`.
/// Blank lines and `#` comments are skipped; a `# version: X` comment sets
/// the version, which otherwise defaults to `default_version`.
pub fn parse_lexicon(text: &str, default_version: &str) -> Result<SemanticLexicon, FormatError> {
    let mut version = default_version.to_string();
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.trim_start().strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("version:") {
                version = v.trim().to_string();
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
        let err = |message: String| FormatError::LexiconLine { line: i + 1, message };
        if !(3..=4).contains(&cols.len()) {
            return Err(err(format!("expected 3 or 4 tab-separated columns, found {}", cols.len())));
        }
        let group = ThematicGroup::parse(cols[2]).ok_or_else(|| err(format!("unknown group `{}`", cols[2])))?;
        let entry = match cols.get(3).filter(|a| !a.is_empty()) {
            Some(area) => LexiconEntry::scoped(area, cols[0], cols[1], group),
            None => LexiconEntry::global(cols[0], cols[1], group),
        };
        entries.push(entry);
    }
    Ok(SemanticLexicon::new(version, entries)?)
}

pub fn load_lexicon(path: &Path) -> Result<SemanticLexicon, FormatError> {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_lexicon(&read(path)?, &stem)
}

pub fn starter_lexicon() -> SemanticLexicon {
    parse_lexicon(STARTER_LEXICON, "starter").expect("starter lexicon is valid")
}

pub fn write_lexicon(lex: &SemanticLexicon) -> String {
    let mut out = format!("# version: {}\n# surface\tcanonical\tgroup\tarea\n", lex.version());
    for e in lex.entries() {
        out.push_str(&format!("{}\t{}\t{}", e.surface, e.canonical_term, e.group.as_str()));
        if let Some(a) = &e.area {
            out.push_str(&format!("\t{a}"));
        }
        out.push('\n');
    }
    out
}
