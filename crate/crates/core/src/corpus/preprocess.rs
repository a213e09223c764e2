use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::Report;

/// Keywords whose presence marks a report as cancer-related. `癌` rather
/// than `癌症` so that compounds such as `肺癌` match.
pub const DEFAULT_KEYWORDS: [&str; 3] = ["癌", "肿瘤", "转移"];

/// True iff any keyword occurs in `text`.
pub fn mentions_keyword<S: AsRef<str>>(text: &str, keywords: &[S]) -> bool {
    keywords
        .iter()
        .map(AsRef::as_ref)
        .any(|k| !k.is_empty() && text.contains(k))
}

/// Applies the cancer filter and records the result in `report.kept`.
pub fn filter_report<S: AsRef<str>>(report: &mut Report, keywords: &[S]) -> bool {
    let kept = mentions_keyword(&report.text, keywords);
    report.kept = Some(kept);
    kept
}

/// Section markers and sentence delimiters for [`split_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub impression_markers: Vec<String>,
    pub findings_markers: Vec<String>,
    /// Characters ending the first findings sentence.
    pub sentence_delimiters: Vec<char>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            impression_markers: vec!["印象".into(), "意见".into(), "诊断".into()],
            findings_markers: vec!["所见".into(), "描述".into()],
            sentence_delimiters: vec!['。', '；', ';'],
        }
    }
}

/// A marker counts as a section header only when a colon follows it.
const HEADER_COLONS: [char; 2] = ['：', ':'];
/// Characters after which a new header may begin (`检查所见` starts after the
/// previous sentence, not at `所见`).
const HEADER_BOUNDARIES: [char; 8] = ['。', '；', ';', '！', '!', '？', '?', '\n'];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sections {
    pub impression: String,
    pub findings_first: String,
}

/// Character ranges of the extracted sections within the report text.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SectionRanges {
    pub impression: Range<usize>,
    pub findings_first: Range<usize>,
}

#[derive(Clone, Copy)]
struct Header {
    /// After the last boundary before the marker.
    start: usize,
    marker: usize,
    content_start: usize,
}

fn find_header(chars: &[char], markers: &[String]) -> Option<Header> {
    let mut best: Option<(usize, usize)> = None;
    for marker in markers {
        let m: Vec<char> = marker.chars().collect();
        if m.is_empty() || m.len() >= chars.len() {
            continue;
        }
        let hit = (0..chars.len() - m.len()).find(|&p| {
            chars[p..p + m.len()] == m[..] && HEADER_COLONS.contains(&chars[p + m.len()])
        });
        if let Some(p) = hit {
            if best.is_none_or(|(bp, _)| p < bp) {
                best = Some((p, p + m.len() + 1));
            }
        }
    }
    best.map(|(marker_pos, content_start)| {
        let start = chars[..marker_pos]
            .iter()
            .rposition(|c| HEADER_BOUNDARIES.contains(c))
            .map_or(0, |p| p + 1);
        Header {
            start,
            marker: marker_pos,
            content_start,
        }
    })
}

fn trim(chars: &[char], mut r: Range<usize>) -> Range<usize> {
    while r.start < r.end && chars[r.start].is_whitespace() {
        r.start += 1;
    }
    while r.end > r.start && chars[r.end - 1].is_whitespace() {
        r.end -= 1;
    }
    r
}

fn first_sentence(chars: &[char], r: Range<usize>, delimiters: &[char]) -> Range<usize> {
    let r = trim(chars, r);
    let end = chars[r.clone()]
        .iter()
        .position(|c| delimiters.contains(c))
        .map_or(r.end, |p| r.start + p + 1);
    trim(chars, r.start..end)
}

/// Locates the impression section and the first findings sentence.
///
/// Headers are found by marker regardless of order; a section runs until the
/// next header begins or the text ends. Without any header, the impression is
/// empty and the first sentence of the whole text stands in for the findings.
pub fn split_report_ranges(text: &str, cfg: &SplitConfig) -> SectionRanges {
    let chars: Vec<char> = text.chars().collect();
    let impression = find_header(&chars, &cfg.impression_markers);
    let findings = find_header(&chars, &cfg.findings_markers);
    let headers: Vec<Header> = impression.iter().chain(findings.iter()).copied().collect();
    let section = |h: Header| {
        let end = headers
            .iter()
            .filter(|o| o.marker >= h.content_start)
            .map(|o| o.start.max(h.content_start))
            .min()
            .unwrap_or(chars.len());
        trim(&chars, h.content_start..end.max(h.content_start))
    };
    match (impression, findings) {
        (None, None) => SectionRanges {
            impression: 0..0,
            findings_first: first_sentence(&chars, 0..chars.len(), &cfg.sentence_delimiters),
        },
        (imp, fin) => SectionRanges {
            impression: imp.map_or(0..0, section),
            findings_first: fin.map_or(0..0, |h| {
                first_sentence(&chars, section(h), &cfg.sentence_delimiters)
            }),
        },
    }
}

pub fn split_report(text: &str, cfg: &SplitConfig) -> Sections {
    let ranges = split_report_ranges(text, cfg);
    let chars: Vec<char> = text.chars().collect();
    let take = |r: Range<usize>| chars[r].iter().collect::<String>();
    Sections {
        impression: take(ranges.impression),
        findings_first: take(ranges.findings_first),
    }
}
