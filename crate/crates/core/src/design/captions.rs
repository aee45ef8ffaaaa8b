use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::semantic::normalize_tokens;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStat {
    pub occurrences: u64,
    pub captions_containing: u64,
}

impl TokenStat {
    /// Occurrences per caption that contains the token.
    pub fn repetition_ratio(&self) -> Ratio<u64> {
        Ratio::new(self.occurrences, self.captions_containing)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenFrequencyReport {
    pub captions: usize,
    pub empty_captions: usize,
    pub tokens: BTreeMap<String, TokenStat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("caption list is empty")]
pub struct EmptyCaptions;

pub fn caption_token_stats<S: AsRef<str>>(captions: &[S]) -> Result<TokenFrequencyReport, EmptyCaptions> {
    if captions.is_empty() {
        return Err(EmptyCaptions);
    }
    let mut report = TokenFrequencyReport {
        captions: captions.len(),
        empty_captions: 0,
        tokens: BTreeMap::new(),
    };
    for caption in captions {
        let tokens = normalize_tokens(caption.as_ref(), None);
        if tokens.is_empty() {
            report.empty_captions += 1;
        }
        let mut distinct = BTreeSet::new();
        for t in tokens {
            let stat = report
                .tokens
                .entry(t.clone())
                .or_insert(TokenStat { occurrences: 0, captions_containing: 0 });
            stat.occurrences += 1;
            if distinct.insert(t) {
                stat.captions_containing += 1;
            }
        }
    }
    Ok(report)
}
