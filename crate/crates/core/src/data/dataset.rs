use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Continuous,
    Binary,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Continuous => "continuous",
            FeatureKind::Binary => "binary",
        })
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "continuous" => Ok(FeatureKind::Continuous),
            "binary" => Ok(FeatureKind::Binary),
            other => Err(Error::invalid(format!(
                "unknown feature kind {other:?} (expected continuous or binary)"
            ))),
        }
    }
}

/// Min-max normalisation constants mapping original units onto `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scale {
    pub min: f64,
    pub max: f64,
}

impl Scale {
    pub const UNIT: Scale = Scale { min: 0.0, max: 1.0 };

    pub fn span(&self) -> f64 {
        self.max - self.min
    }

    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.min) / self.span()
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        self.min + v * self.span()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub feature: usize,
    pub value: f64,
}

/// Partially observed matrix stored as normalised `(row, feature, value)`
/// triplets with per-row and per-feature indexes.
///
/// Binary features hold values in `{0, 1}`; continuous features are already
/// normalised to `[0, 1]` and carry the [`Scale`] needed to map back.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDataset {
    n_rows: usize,
    triplets: Vec<Triplet>,
    kinds: Vec<FeatureKind>,
    scales: Vec<Scale>,
    row_ids: Vec<String>,
    feature_ids: Vec<String>,
    by_row: Vec<Vec<(usize, f64)>>,
    by_feature: Vec<Vec<(usize, f64)>>,
}

impl SparseDataset {
    /// Builds a dataset from normalised triplets. Ids default to the decimal
    /// indices and scales to the unit interval.
    pub fn new(n_rows: usize, kinds: Vec<FeatureKind>, triplets: Vec<Triplet>) -> Result<Self> {
        let scales = vec![Scale::UNIT; kinds.len()];
        Self::with_scales(n_rows, kinds, scales, triplets)
    }

    pub fn with_scales(
        n_rows: usize,
        kinds: Vec<FeatureKind>,
        scales: Vec<Scale>,
        mut triplets: Vec<Triplet>,
    ) -> Result<Self> {
        let n_features = kinds.len();
        if scales.len() != n_features {
            return Err(Error::invalid("one scale per feature is required"));
        }
        if let Some((f, s)) = scales
            .iter()
            .enumerate()
            .find(|(_, s)| !(s.span() > 0.0 && s.min.is_finite() && s.max.is_finite()))
        {
            return Err(Error::invalid(format!("feature {f} has a degenerate scale {s:?}")));
        }
        let mut seen = HashSet::with_capacity(triplets.len());
        for t in &triplets {
            let loc = format!("triplet (row {}, feature {})", t.row, t.feature);
            if t.row >= n_rows || t.feature >= n_features {
                return Err(Error::data(loc, "index out of range"));
            }
            if !seen.insert((t.row, t.feature)) {
                return Err(Error::data(loc, "duplicate observation"));
            }
            match kinds[t.feature] {
                FeatureKind::Binary if t.value != 0.0 && t.value != 1.0 => {
                    return Err(Error::data(loc, format!("binary value {} not in {{0,1}}", t.value)));
                }
                FeatureKind::Continuous if !(0.0..=1.0).contains(&t.value) => {
                    return Err(Error::data(
                        loc,
                        format!("normalised value {} outside [0,1]", t.value),
                    ));
                }
                _ => {}
            }
        }
        triplets.sort_by_key(|t| (t.row, t.feature));

        let mut by_row = vec![Vec::new(); n_rows];
        let mut by_feature = vec![Vec::new(); n_features];
        for t in &triplets {
            by_row[t.row].push((t.feature, t.value));
            by_feature[t.feature].push((t.row, t.value));
        }
        Ok(Self {
            n_rows,
            triplets,
            kinds,
            scales,
            row_ids: (0..n_rows).map(|i| i.to_string()).collect(),
            feature_ids: (0..n_features).map(|i| i.to_string()).collect(),
            by_row,
            by_feature,
        })
    }

    /// Replaces the original row and feature ids used when writing files.
    pub fn with_ids(mut self, row_ids: Vec<String>, feature_ids: Vec<String>) -> Result<Self> {
        if row_ids.len() != self.n_rows || feature_ids.len() != self.n_features() {
            return Err(Error::invalid("id lists must match the dataset dimensions"));
        }
        self.row_ids = row_ids;
        self.feature_ids = feature_ids;
        Ok(self)
    }

    pub fn empty() -> Self {
        Self::new(0, Vec::new(), Vec::new()).expect("empty dataset is valid")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.kinds.len()
    }

    /// Triplets sorted by `(row, feature)`.
    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn kind(&self, feature: usize) -> FeatureKind {
        self.kinds[feature]
    }

    pub fn scale(&self, feature: usize) -> Scale {
        self.scales[feature]
    }

    pub fn scales(&self) -> &[Scale] {
        &self.scales
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn feature_index(&self, id: &str) -> Option<usize> {
        self.feature_ids.iter().position(|f| f == id)
    }

    /// Observed `(feature, value)` pairs of a row, ascending by feature.
    pub fn row(&self, row: usize) -> &[(usize, f64)] {
        &self.by_row[row]
    }

    /// Observed `(row, value)` pairs of a feature, ascending by row.
    pub fn feature_observations(&self, feature: usize) -> &[(usize, f64)] {
        &self.by_feature[feature]
    }

    pub fn observed_count(&self, feature: usize) -> usize {
        self.by_feature[feature].len()
    }

    pub fn value(&self, row: usize, feature: usize) -> Option<f64> {
        let r = &self.by_row[row];
        r.binary_search_by_key(&feature, |&(f, _)| f)
            .ok()
            .map(|i| r[i].1)
    }

    /// Observations of `row` restricted to features flagged in `allowed`.
    pub fn row_restricted(&self, row: usize, allowed: &[bool]) -> Vec<(usize, f64)> {
        self.by_row[row]
            .iter()
            .copied()
            .filter(|&(f, _)| allowed[f])
            .collect()
    }

    /// Mean of every observed value over `features`; `None` when nothing is
    /// observed.
    pub fn mean_over(&self, features: &[usize]) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for &f in features {
            for &(_, v) in &self.by_feature[f] {
                sum += v;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}
