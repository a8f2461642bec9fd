//! Sentence embeddings and the corpus structure laid over them.
//!
//! Embedding file layout (`SLMB`, all integers little-endian):
//!
//! ```text
//! offset  size        field
//! 0       4           magic "SLMB"
//! 4       4           format version (u32) = 1
//! 8       8           row count (u64)
//! 16      4           row width / dim (u32, > 0)
//! 20      4*count*dim row-major f32 values
//! ```
//!
//! Sentence ids are global row indices. Which story a sentence belongs to,
//! and at which position, is recorded only in the index file: a header line
//! `sentences_per_story=<k>\tcontext_len=<t>` followed by one story per line
//! as tab-separated ids.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const EMBEDDING_MAGIC: [u8; 4] = *b"SLMB";
pub const EMBEDDING_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

pub type SentenceId = u32;

/// Immutable `count x dim` matrix of sentence embeddings, one row per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    count: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dim must be positive".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        let m = Self {
            dim,
            count: data.len() / dim,
            data,
        };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f32>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::Dimension(format!(
                    "row {i} has {} values, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteRow {
                row: pos / self.dim,
                col: pos % self.dim,
            });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn row(&self, id: SentenceId) -> &[f32] {
        let i = id as usize * self.dim;
        &self.data[i..i + self.dim]
    }

    pub fn contains(&self, id: SentenceId) -> bool {
        (id as usize) < self.count
    }

    pub fn check_id(&self, id: SentenceId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "sentence id {id} out of range for {} embeddings",
                self.count
            )))
        }
    }

    /// Serializes to the `SLMB` byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len() * 4);
        out.extend_from_slice(&EMBEDDING_MAGIC);
        out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.count as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Length {
                expected: HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        if bytes[0..4] != EMBEDDING_MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected \"SLMB\"",
                String::from_utf8_lossy(&bytes[0..4])
            )));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != EMBEDDING_VERSION {
            return Err(Error::Format(format!(
                "unsupported embedding format version {version}"
            )));
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let dim = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
        if dim == 0 {
            return Err(Error::Format("embedding dim is zero".into()));
        }
        if count > u64::from(u32::MAX) {
            return Err(Error::Format(format!("row count {count} exceeds id space")));
        }
        let expected = count
            .checked_mul(u64::from(dim))
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_LEN as u64))
            .ok_or_else(|| Error::Format("header sizes overflow".into()))?;
        if bytes.len() as u64 != expected {
            return Err(Error::Length {
                expected,
                found: bytes.len() as u64,
            });
        }
        let data: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let m = Self {
            dim: dim as usize,
            count: count as usize,
            data,
        };
        m.check_finite()?;
        Ok(m)
    }
}

pub fn write_embeddings(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    matrix.check_finite()?;
    fs::write(path, matrix.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingMatrix::from_bytes(&bytes)
}

/// Parses a whitespace-separated text matrix, one row per line. Blank lines
/// are skipped.
pub fn parse_text_matrix(text: &str) -> Result<EmbeddingMatrix> {
    let mut dim = None;
    let mut data = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f32 = tok.parse().map_err(|_| Error::ValidationAt {
                line: lineno + 1,
                message: format!("not a number: {tok:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::ValidationAt {
                    line: lineno + 1,
                    message: format!("non-finite value {tok:?}"),
                });
            }
            data.push(v);
        }
        let width = data.len() - before;
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(Error::ValidationAt {
                    line: lineno + 1,
                    message: format!("row has {width} values, expected {d}"),
                })
            }
            _ => {}
        }
    }
    let dim = dim.ok_or_else(|| Error::Validation("text matrix has no rows".into()))?;
    EmbeddingMatrix::new(dim, data)
}

/// Story structure over an [`EmbeddingMatrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusIndex {
    pub sentences_per_story: usize,
    pub context_len: usize,
    pub stories: Vec<Vec<SentenceId>>,
}

fn parse_header_field(field: &str, key: &str) -> Option<usize> {
    field
        .trim()
        .strip_prefix(key)?
        .strip_prefix('=')?
        .parse()
        .ok()
}

impl CorpusIndex {
    pub fn new(
        sentences_per_story: usize,
        context_len: usize,
        stories: Vec<Vec<SentenceId>>,
    ) -> Result<Self> {
        let idx = Self {
            sentences_per_story,
            context_len,
            stories,
        };
        idx.check_shape()?;
        Ok(idx)
    }

    fn check_shape(&self) -> Result<()> {
        if self.sentences_per_story == 0 || self.context_len == 0 {
            return Err(Error::Validation(
                "sentences_per_story and context_len must be positive".into(),
            ));
        }
        if self.context_len >= self.sentences_per_story {
            return Err(Error::Validation(format!(
                "context_len {} must be smaller than sentences_per_story {}",
                self.context_len, self.sentences_per_story
            )));
        }
        let mut seen = HashSet::new();
        for (i, story) in self.stories.iter().enumerate() {
            let line = i + 2;
            if story.len() != self.sentences_per_story {
                return Err(Error::ValidationAt {
                    line,
                    message: format!(
                        "story has {} sentences, expected {}",
                        story.len(),
                        self.sentences_per_story
                    ),
                });
            }
            for &id in story {
                if !seen.insert(id) {
                    return Err(Error::ValidationAt {
                        line,
                        message: format!("duplicate sentence id {id}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Checks every id against the embedding row count.
    pub fn validate_against(&self, matrix: &EmbeddingMatrix) -> Result<()> {
        for (i, story) in self.stories.iter().enumerate() {
            for &id in story {
                if !matrix.contains(id) {
                    return Err(Error::ValidationAt {
                        line: i + 2,
                        message: format!(
                            "sentence id {id} out of range for {} embeddings",
                            matrix.count()
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::ValidationAt {
            line: 1,
            message: "missing header line".into(),
        })?;
        let mut fields = header.split('\t');
        let bad_header = || Error::ValidationAt {
            line: 1,
            message: format!(
                "header must be \"sentences_per_story=<k>\\tcontext_len=<t>\", got {header:?}"
            ),
        };
        let sps = fields
            .next()
            .and_then(|f| parse_header_field(f, "sentences_per_story"))
            .ok_or_else(bad_header)?;
        let ctx = fields
            .next()
            .and_then(|f| parse_header_field(f, "context_len"))
            .ok_or_else(bad_header)?;
        if fields.next().is_some() {
            return Err(bad_header());
        }
        let mut stories = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let story = line
                .split('\t')
                .map(|t| {
                    t.trim().parse::<SentenceId>().map_err(|_| Error::ValidationAt {
                        line: i + 2,
                        message: format!("not a sentence id: {t:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            stories.push(story);
        }
        Self::new(sps, ctx, stories)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "sentences_per_story={}\tcontext_len={}\n",
            self.sentences_per_story, self.context_len
        );
        for story in &self.stories {
            for (j, id) in story.iter().enumerate() {
                if j > 0 {
                    out.push('\t');
                }
                write!(out, "{id}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Ids of every sentence at `position` in its story, in story order.
    pub fn candidate_pool(&self, position: usize) -> Result<Vec<SentenceId>> {
        if position >= self.sentences_per_story {
            return Err(Error::Domain(format!(
                "position {position} outside stories of length {}",
                self.sentences_per_story
            )));
        }
        Ok(self.stories.iter().map(|s| s[position]).collect())
    }

    /// Context ids and true next id for every story: sentences
    /// `0..context_len` predict sentence `context_len`.
    pub fn examples(&self) -> impl Iterator<Item = (&[SentenceId], SentenceId)> + '_ {
        let t = self.context_len;
        self.stories.iter().map(move |s| (&s[..t], s[t]))
    }
}

pub fn load_corpus(
    embeddings: impl AsRef<Path>,
    index: impl AsRef<Path>,
) -> Result<(EmbeddingMatrix, CorpusIndex)> {
    let matrix = read_embeddings(embeddings)?;
    let idx = CorpusIndex::read(index)?;
    idx.validate_against(&matrix)?;
    Ok((matrix, idx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ending {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClozeItem {
    pub context: Vec<SentenceId>,
    pub ending_a: SentenceId,
    pub ending_b: SentenceId,
    pub label: Ending,
}

impl ClozeItem {
    pub fn correct(&self) -> SentenceId {
        match self.label {
            Ending::A => self.ending_a,
            Ending::B => self.ending_b,
        }
    }
}

/// Two-ending cloze items; one per line: context ids, ending a, ending b,
/// label `a` or `b`, tab-separated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClozeEvalSet {
    pub context_len: usize,
    pub items: Vec<ClozeItem>,
}

impl ClozeEvalSet {
    pub fn parse(text: &str) -> Result<Self> {
        let mut items = Vec::new();
        let mut context_len = None;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() < 4 {
                return Err(Error::ValidationAt {
                    line: line_no,
                    message: format!("expected at least 4 fields, found {}", fields.len()),
                });
            }
            let t = fields.len() - 3;
            match context_len {
                None => context_len = Some(t),
                Some(c) if c != t => {
                    return Err(Error::ValidationAt {
                        line: line_no,
                        message: format!("context has {t} ids, earlier lines had {c}"),
                    })
                }
                _ => {}
            }
            let ids = fields[..t + 2]
                .iter()
                .map(|f| {
                    f.parse::<SentenceId>().map_err(|_| Error::ValidationAt {
                        line: line_no,
                        message: format!("not a sentence id: {f:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let label = match fields[t + 2] {
                "a" => Ending::A,
                "b" => Ending::B,
                other => {
                    return Err(Error::ValidationAt {
                        line: line_no,
                        message: format!("label must be \"a\" or \"b\", got {other:?}"),
                    })
                }
            };
            items.push(ClozeItem {
                context: ids[..t].to_vec(),
                ending_a: ids[t],
                ending_b: ids[t + 1],
                label,
            });
        }
        let context_len =
            context_len.ok_or_else(|| Error::Validation("cloze set has no items".into()))?;
        Ok(Self { context_len, items })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            for id in &item.context {
                write!(out, "{id}\t").unwrap();
            }
            let label = match item.label {
                Ending::A => "a",
                Ending::B => "b",
            };
            writeln!(out, "{}\t{}\t{label}", item.ending_a, item.ending_b).unwrap();
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn validate_against(&self, matrix: &EmbeddingMatrix) -> Result<()> {
        for (i, item) in self.items.iter().enumerate() {
            for &id in item.context.iter().chain([&item.ending_a, &item.ending_b]) {
                if !matrix.contains(id) {
                    return Err(Error::ValidationAt {
                        line: i + 1,
                        message: format!(
                            "sentence id {id} out of range for {} embeddings",
                            matrix.count()
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}
