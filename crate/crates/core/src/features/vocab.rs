use std::collections::HashMap;
use std::fmt::Write as _;

use indexmap::IndexSet;

use super::{derive_fields, FeatureError, Field, LR_FIELDS};
use crate::logdata::{AuctionCase, LogRecord};

const HEADER: &str = "# rtb-vocabulary v1";

/// One-hot index assignment. Index 0 is the bias; features occupy
/// `1..dimension`, grouped by field in [`LR_FIELDS`] order and by first
/// appearance within a field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    tables: HashMap<Field, HashMap<String, u32>>,
    entries: Vec<(Field, String)>,
}

/// Active one-hot indices (all values 1), strictly increasing. The bias is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseFeatureVector {
    pub indices: Vec<u32>,
}

impl Vocabulary {
    pub fn dimension(&self) -> usize {
        self.entries.len() + 1
    }

    pub fn index_of(&self, field: Field, value: &str) -> Option<u32> {
        self.tables.get(&field)?.get(value).copied()
    }

    /// The (field, value) behind feature index `index` (>= 1).
    pub fn entry(&self, index: u32) -> Option<(Field, &str)> {
        let (f, v) = self.entries.get((index as usize).checked_sub(1)?)?;
        Some((*f, v.as_str()))
    }

    fn push(&mut self, field: Field, value: String) {
        let idx = self.dimension() as u32;
        self.tables.entry(field).or_default().insert(value.clone(), idx);
        self.entries.push((field, value));
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\tdimension={}\n", self.dimension());
        for (i, (field, value)) in self.entries.iter().enumerate() {
            writeln!(s, "{}\t{}\t{}", i + 1, field, value).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, FeatureError> {
        let bad = |m: String| FeatureError::Format(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty vocabulary file".into()))?;
        let dim: usize = header
            .strip_prefix(HEADER)
            .and_then(|r| r.trim().strip_prefix("dimension="))
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| bad(format!("bad header {header:?}")))?;
        let mut vocab = Vocabulary::default();
        for (n, line) in lines.enumerate() {
            let mut parts = line.splitn(3, '\t');
            let (Some(idx), Some(field), Some(value)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad(format!("line {}: expected index, field, value", n + 2)));
            };
            let field = Field::from_name(field).ok_or_else(|| bad(format!("unknown field {field:?}")))?;
            if idx.parse::<usize>().ok() != Some(vocab.dimension()) {
                return Err(bad(format!("line {}: indices must be contiguous", n + 2)));
            }
            vocab.push(field, value.to_string());
        }
        if vocab.dimension() != dim {
            return Err(bad(format!("header says dimension {dim}, file has {}", vocab.dimension())));
        }
        Ok(vocab)
    }
}

/// Builds the one-hot vocabulary from training cases.
pub fn build_vocabulary(train: &[AuctionCase]) -> Result<Vocabulary, FeatureError> {
    if train.is_empty() {
        return Err(FeatureError::EmptyTrainingSet);
    }
    let mut seen: Vec<IndexSet<String>> = vec![IndexSet::new(); LR_FIELDS.len()];
    for case in train {
        let r = &case.record;
        let derived = derive_fields(r);
        for (slot, field) in LR_FIELDS.iter().enumerate() {
            match field.value(r, &derived) {
                Some(v) => {
                    seen[slot].insert(v);
                }
                None => {
                    for t in &r.user_tags {
                        seen[slot].insert(t.to_string());
                    }
                }
            }
        }
    }
    let mut vocab = Vocabulary::default();
    for (field, values) in LR_FIELDS.iter().zip(seen) {
        for v in values {
            vocab.push(*field, v);
        }
    }
    Ok(vocab)
}

/// One-hot encodes a record. Values missing from the vocabulary contribute nothing.
pub fn binarize(record: &LogRecord, vocab: &Vocabulary) -> SparseFeatureVector {
    let derived = derive_fields(record);
    let mut indices = Vec::with_capacity(LR_FIELDS.len() + record.user_tags.len());
    for field in LR_FIELDS {
        match field.value(record, &derived) {
            Some(v) => indices.extend(vocab.index_of(field, &v)),
            None => {
                for t in &record.user_tags {
                    indices.extend(vocab.index_of(field, &t.to_string()));
                }
            }
        }
    }
    indices.sort_unstable();
    indices.dedup();
    SparseFeatureVector { indices }
}
