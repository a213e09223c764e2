use std::fmt;

use crate::corpus::{validate_spans, AttributeType, Span};
use crate::error::{Error, Result};

/// Size of the BIO label set: `O` plus `B-x`/`I-x` for each attribute.
pub const LABEL_COUNT: usize = 1 + 2 * AttributeType::ALL.len();

/// One BIO label, indexed `O=0, B-PS=1, I-PS=2, B-LS=3, I-LS=4, B-MS=5, I-MS=6`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag(u8);

impl Tag {
    pub const O: Tag = Tag(0);

    pub fn from_index(index: usize) -> Result<Tag> {
        if index < LABEL_COUNT {
            Ok(Tag(index as u8))
        } else {
            Err(Error::InvalidInput(format!(
                "label index {index} out of range (0..{LABEL_COUNT})"
            )))
        }
    }

    pub fn begin(kind: AttributeType) -> Tag {
        Tag(1 + 2 * kind.index() as u8)
    }

    pub fn inside(kind: AttributeType) -> Tag {
        Tag(2 + 2 * kind.index() as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn kind(self) -> Option<AttributeType> {
        if self.0 == 0 {
            None
        } else {
            AttributeType::from_index((self.0 as usize - 1) / 2)
        }
    }

    pub fn is_begin(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn is_inside(self) -> bool {
        self.0 != 0 && self.0 % 2 == 0
    }

    pub fn all() -> impl Iterator<Item = Tag> {
        (0..LABEL_COUNT as u8).map(Tag)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            None => f.write_str("O"),
            Some(k) if self.is_begin() => write!(f, "B-{}", k.code()),
            Some(k) => write!(f, "I-{}", k.code()),
        }
    }
}

/// One tag per character of the tagged text.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TagSequence(pub Vec<Tag>);

impl TagSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0.iter().map(|t| t.index()).collect()
    }

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        indices
            .iter()
            .map(|&i| Tag::from_index(i))
            .collect::<Result<Vec<_>>>()
            .map(TagSequence)
    }

    /// True when every `I-x` continues a run of the same type.
    pub fn is_well_formed(&self) -> bool {
        let mut prev: Option<AttributeType> = None;
        for &t in &self.0 {
            if t.is_inside() && prev != t.kind() {
                return false;
            }
            prev = t.kind();
        }
        true
    }
}

pub fn encode_tags(spans: &[Span], length: usize) -> Result<TagSequence> {
    validate_spans(spans, length)?;
    let mut tags = vec![Tag::O; length];
    for s in spans {
        tags[s.start] = Tag::begin(s.kind);
        for t in &mut tags[s.start + 1..s.end] {
            *t = Tag::inside(s.kind);
        }
    }
    Ok(TagSequence(tags))
}

/// Decodes maximal `B-x (I-x)*` runs into spans. A stray `I-x` opens a new
/// span of type `x`. Spans come out sorted by start with empty text.
pub fn decode_tags(tags: &[Tag]) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<(usize, AttributeType)> = None;
    for (pos, &tag) in tags.iter().enumerate() {
        let kind = tag.kind();
        let continues = tag.is_inside() && open.map(|(_, k)| Some(k)) == Some(kind);
        if continues {
            continue;
        }
        if let Some((start, k)) = open.take() {
            spans.push(Span::new(start, pos, k));
        }
        if let Some(k) = kind {
            open = Some((pos, k));
        }
    }
    if let Some((start, k)) = open {
        spans.push(Span::new(start, tags.len(), k));
    }
    spans
}
