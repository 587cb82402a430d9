use crate::error::{Error, Result};

/// Side information for one feature: multi-hot tags over a shared vocabulary
/// plus an optional scalar in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMeta {
    pub feature: usize,
    pub tags: Vec<bool>,
    pub scalar: Option<f64>,
}

/// Metadata for every feature of a dataset, indexed by feature.
#[derive(Clone, Debug, PartialEq)]
pub struct MetadataTable {
    vocab: Vec<String>,
    entries: Vec<FeatureMeta>,
    has_scalar: bool,
}

impl MetadataTable {
    pub fn new(vocab: Vec<String>, entries: Vec<FeatureMeta>) -> Result<Self> {
        for (i, m) in entries.iter().enumerate() {
            if m.feature != i {
                return Err(Error::invalid(format!(
                    "metadata entry {i} describes feature {}",
                    m.feature
                )));
            }
            if m.tags.len() != vocab.len() {
                return Err(Error::invalid(format!(
                    "feature {i} has {} tags, vocabulary has {}",
                    m.tags.len(),
                    vocab.len()
                )));
            }
            if let Some(s) = m.scalar {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::invalid(format!("feature {i}: scalar {s} outside [0,1]")));
                }
            }
        }
        let with_scalar = entries.iter().filter(|m| m.scalar.is_some()).count();
        if with_scalar != 0 && with_scalar != entries.len() {
            return Err(Error::invalid(format!(
                "scalar metadata present for {with_scalar} of {} features; need all or none",
                entries.len()
            )));
        }
        Ok(Self {
            vocab,
            has_scalar: with_scalar > 0,
            entries,
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn entries(&self) -> &[FeatureMeta] {
        &self.entries
    }

    pub fn get(&self, feature: usize) -> &FeatureMeta {
        &self.entries[feature]
    }

    pub fn has_scalar(&self) -> bool {
        self.has_scalar
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Length of the vector produced by [`MetadataTable::encode`].
    pub fn input_dim(&self) -> usize {
        self.vocab.len() + usize::from(self.has_scalar)
    }

    /// `[tags ; scalar]` as f64.
    pub fn encode(&self, feature: usize) -> Vec<f64> {
        let m = &self.entries[feature];
        let mut v: Vec<f64> = m.tags.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
        if let Some(s) = m.scalar {
            v.push(s);
        }
        v
    }
}
