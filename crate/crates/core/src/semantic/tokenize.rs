use alloc::string::String;
use alloc::vec::Vec;

use super::lexicon::SemanticLexicon;

/// Scripts written without spaces between words.
pub(crate) fn is_unspaced(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x309F      // hiragana
        | 0x30A0..=0x30FF    // katakana
        | 0x31F0..=0x31FF
        | 0x3400..=0x4DBF    // CJK extension A
        | 0x4E00..=0x9FFF    // CJK unified ideographs
        | 0xF900..=0xFAFF
        | 0xFF66..=0xFF9F    // half-width katakana
        | 0x20000..=0x2FFFF)
}

#[derive(Clone, Copy)]
enum RunMode<'a> {
    /// Unspaced runs are emitted whole (used for lexicon surface forms).
    Whole,
    /// Unspaced runs are split by longest match, falling back to characters.
    Segment(Option<&'a SemanticLexicon>),
}

fn tokenize(text: &str, mode: RunMode<'_>) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    let mut run = String::new();
    let flush_run = |run: &mut String, out: &mut Vec<String>| {
        if run.is_empty() {
            return;
        }
        match mode {
            RunMode::Whole => out.push(core::mem::take(run)),
            RunMode::Segment(lex) => {
                segment_run(run, lex, out);
                run.clear();
            }
        }
    };
    for c in text.chars().flat_map(char::to_lowercase) {
        if is_unspaced(c) {
            if !word.is_empty() {
                out.push(core::mem::take(&mut word));
            }
            run.push(c);
        } else if c.is_alphanumeric() {
            flush_run(&mut run, &mut out);
            word.push(c);
        } else {
            flush_run(&mut run, &mut out);
            if !word.is_empty() {
                out.push(core::mem::take(&mut word));
            }
        }
    }
    flush_run(&mut run, &mut out);
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn segment_run(run: &str, lexicon: Option<&SemanticLexicon>, out: &mut Vec<String>) {
    let chars: Vec<char> = run.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let mut taken = 1;
        if let Some(lex) = lexicon {
            let max = lex.max_unspaced_chars().min(chars.len() - i);
            for len in (2..=max).rev() {
                let cand: String = chars[i..i + len].iter().collect();
                if lex.has_unspaced_form(&cand) {
                    taken = len;
                    break;
                }
            }
        }
        out.push(chars[i..i + taken].iter().collect());
        i += taken;
    }
}

/// Case-folds, strips punctuation and splits on whitespace. Runs of
/// unspaced script are segmented by longest match against the lexicon's
/// surface forms, with unmatched characters emitted one by one.
pub fn normalize_tokens(text: &str, lexicon: Option<&SemanticLexicon>) -> Vec<String> {
    tokenize(text, RunMode::Segment(lexicon))
}

/// Tokens of a lexicon surface form; unspaced runs stay whole.
pub(crate) fn surface_tokens(surface: &str) -> Vec<String> {
    tokenize(surface, RunMode::Whole)
}
