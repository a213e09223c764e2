//! Report data model, rule preprocessing, BIO codec, JSONL I/O and the
//! synthetic annotated-corpus generator.

mod bio;
mod io;
mod preprocess;
mod synth;

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bio::{decode_tags, encode_tags, Tag, TagSequence, LABEL_COUNT};
pub use io::{read_jsonl, read_jsonl_str, to_jsonl_string, write_jsonl};
pub use preprocess::{
    filter_report, mentions_keyword, split_report, split_report_ranges, SectionRanges,
    Sections, SplitConfig, DEFAULT_KEYWORDS,
};
pub use synth::{generate_corpus, SyntheticSpec, VocabularyTables};

/// The three extracted report attributes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AttributeType {
    PrimarySite,
    LesionSize,
    MetastasisSite,
}

impl AttributeType {
    pub const ALL: [AttributeType; 3] = [
        AttributeType::PrimarySite,
        AttributeType::LesionSize,
        AttributeType::MetastasisSite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttributeType::PrimarySite => "PRIMARY_SITE",
            AttributeType::LesionSize => "LESION_SIZE",
            AttributeType::MetastasisSite => "METASTASIS_SITE",
        }
    }

    /// Two-letter code used in BIO label names.
    pub fn code(self) -> &'static str {
        match self {
            AttributeType::PrimarySite => "PS",
            AttributeType::LesionSize => "LS",
            AttributeType::MetastasisSite => "MS",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for AttributeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttributeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown attribute type `{s}`")))
    }
}

/// A typed half-open interval over the unicode code points of a report.
///
/// Identity is the `(start, end, kind)` triple; `text` is derived from the
/// report and does not take part in comparisons.
#[derive(Clone, Debug)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub kind: AttributeType,
    pub text: String,
}

impl Span {
    pub fn new(start: usize, end: usize, kind: AttributeType) -> Self {
        Span {
            start,
            end,
            kind,
            text: String::new(),
        }
    }

    /// Builds a span and fills its text from `chars`.
    pub fn with_text(start: usize, end: usize, kind: AttributeType, chars: &[char]) -> Self {
        let text = chars[start..end].iter().collect();
        Span {
            start,
            end,
            kind,
            text,
        }
    }

    pub fn key(&self) -> (usize, usize, AttributeType) {
        (self.start, self.end, self.kind)
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn fill_text(&mut self, chars: &[char]) {
        self.text = chars[self.start..self.end].iter().collect();
    }
}

impl PartialEq for Span {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Span {}

impl Hash for Span {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl PartialOrd for Span {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Span {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Checks the span invariants against a text of `len` characters: ranges
/// in bounds and non-empty, no two spans overlapping.
pub fn validate_spans(spans: &[Span], len: usize) -> Result<()> {
    for s in spans {
        if s.start >= s.end || s.end > len {
            return Err(Error::InvalidInput(format!(
                "span [{}, {}) {} out of range for text of length {len}",
                s.start, s.end, s.kind
            )));
        }
    }
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for pair in sorted.windows(2) {
        if pair[0].overlaps(pair[1]) {
            return Err(Error::InvalidInput(format!(
                "overlapping spans [{}, {}) and [{}, {})",
                pair[0].start, pair[0].end, pair[1].start, pair[1].end
            )));
        }
    }
    Ok(())
}

/// One imaging report.
///
/// `kept` is `None` until the report has been through [`filter_report`];
/// preprocessed reports carry the extracted sections alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub id: String,
    pub text: String,
    pub impression: String,
    pub findings_first: String,
    pub gold_spans: Vec<Span>,
    pub kept: Option<bool>,
}

impl Report {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Report {
            id: id.into(),
            text: text.into(),
            impression: String::new(),
            findings_first: String::new(),
            gold_spans: Vec::new(),
            kept: None,
        }
    }

    pub fn chars(&self) -> Vec<char> {
        self.text.chars().collect()
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Replaces the gold spans, filling their text and sorting by start.
    pub fn with_spans(mut self, mut spans: Vec<Span>) -> Self {
        let chars = self.chars();
        for s in &mut spans {
            s.fill_text(&chars);
        }
        spans.sort();
        self.gold_spans = spans;
        self
    }

    /// Runs the cancer filter and section split, recording the outcome.
    pub fn preprocess(&mut self, keywords: &[&str], split: &SplitConfig) -> bool {
        let kept = filter_report(self, keywords);
        let sections = split_report(&self.text, split);
        self.impression = sections.impression;
        self.findings_first = sections.findings_first;
        kept
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attribute_names_round_trip() {
        for a in AttributeType::ALL {
            assert_eq!(a.as_str().parse::<AttributeType>().unwrap(), a);
            assert_eq!(
                serde_json::to_string(&a).unwrap(),
                format!("\"{}\"", a.as_str())
            );
        }
        assert!("PRIMARY".parse::<AttributeType>().is_err());
    }

    #[test]
    fn span_identity_ignores_text() {
        let chars: Vec<char> = "左肺癌".chars().collect();
        let a = Span::with_text(0, 2, AttributeType::PrimarySite, &chars);
        assert_eq!(a.text, "左肺");
        assert_eq!(a, Span::new(0, 2, AttributeType::PrimarySite));
        assert_ne!(a, Span::new(0, 2, AttributeType::MetastasisSite));
    }

    #[test]
    fn validate_rejects_overlap_and_range() {
        let ok = vec![
            Span::new(0, 2, AttributeType::PrimarySite),
            Span::new(2, 3, AttributeType::LesionSize),
        ];
        assert!(validate_spans(&ok, 3).is_ok());
        let overlap = vec![
            Span::new(0, 2, AttributeType::PrimarySite),
            Span::new(1, 3, AttributeType::LesionSize),
        ];
        assert!(validate_spans(&overlap, 3).is_err());
        assert!(validate_spans(&[Span::new(2, 4, AttributeType::LesionSize)], 3).is_err());
        assert!(validate_spans(&[Span::new(2, 2, AttributeType::LesionSize)], 3).is_err());
    }
}
