use super::{FeatureKind, FeatureMeta, MetadataTable, SparseDataset, Triplet};
use crate::error::{Error, Result};
use crate::numerics::{dot, sigmoid, Matrix, Rng};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_rows: usize,
    pub n_features: usize,
    pub rank: usize,
    pub noise_sd: f64,
    pub obs_prob: f64,
    pub kind: FeatureKind,
    pub n_tag_groups: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_rows: 500,
            n_features: 60,
            rank: 3,
            noise_sd: 0.0,
            obs_prob: 0.12,
            kind: FeatureKind::Binary,
            n_tag_groups: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub dataset: SparseDataset,
    pub metadata: MetadataTable,
    /// `n_rows x rank`
    pub row_factors: Matrix,
    /// `n_features x rank`
    pub feature_factors: Matrix,
}

/// Low-rank logistic data: score `u_i . v_j + noise`, squashed by a sigmoid
/// (continuous) or used as a Bernoulli logit (binary). Each cell is observed
/// independently with probability `obs_prob`.
///
/// Factors, noise, labels and the observation pattern use separate derived
/// streams, and every cell consumes a draw from each, so changing `obs_prob`
/// leaves the underlying values untouched.
pub fn generate_synthetic(cfg: &SynthConfig, rng: &Rng) -> Result<SyntheticData> {
    if cfg.rank == 0 {
        return Err(Error::invalid("rank must be at least 1"));
    }
    if !(cfg.obs_prob > 0.0 && cfg.obs_prob <= 1.0) {
        return Err(Error::invalid(format!("obs_prob must lie in (0, 1], got {}", cfg.obs_prob)));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
        return Err(Error::invalid("noise_sd must be finite and non-negative"));
    }
    if cfg.n_tag_groups == 0 {
        return Err(Error::invalid("need at least one tag group"));
    }
    let mut factor_rng = rng.derive("factors");
    let mut normal_matrix = |rows, cols| {
        let data = (0..rows * cols).map(|_| factor_rng.normal()).collect();
        Matrix::from_vec(rows, cols, data)
    };
    let row_factors = normal_matrix(cfg.n_rows, cfg.rank)?;
    let feature_factors = normal_matrix(cfg.n_features, cfg.rank)?;

    let mut noise_rng = rng.derive("noise");
    let mut label_rng = rng.derive("labels");
    let mut observe_rng = rng.derive("observe");
    let mut triplets = Vec::new();
    for i in 0..cfg.n_rows {
        for j in 0..cfg.n_features {
            let eps = noise_rng.normal();
            let u = label_rng.uniform();
            let seen = observe_rng.bernoulli(cfg.obs_prob);
            let p = sigmoid(dot(row_factors.row(i), feature_factors.row(j)) + cfg.noise_sd * eps);
            let value = match cfg.kind {
                FeatureKind::Continuous => p,
                FeatureKind::Binary => f64::from(u8::from(u < p)),
            };
            if seen {
                triplets.push(Triplet {
                    row: i,
                    feature: j,
                    value,
                });
            }
        }
    }
    let dataset = SparseDataset::new(cfg.n_rows, vec![cfg.kind; cfg.n_features], triplets)?;

    let groups = tag_groups(&feature_factors, cfg.n_tag_groups);
    let vocab = (0..cfg.n_tag_groups).map(|g| format!("group{g}")).collect();
    let entries = groups
        .iter()
        .enumerate()
        .map(|(feature, &g)| FeatureMeta {
            feature,
            tags: (0..cfg.n_tag_groups).map(|t| t == g).collect(),
            scalar: None,
        })
        .collect();
    let metadata = MetadataTable::new(vocab, entries)?;
    Ok(SyntheticData {
        dataset,
        metadata,
        row_factors,
        feature_factors,
    })
}

/// Groups features by the sign pattern of their leading factor coordinates:
/// `ceil(log2 n_groups)` coordinates (wrapping around the rank) form a binary
/// code, reduced modulo `n_groups`.
pub fn tag_groups(feature_factors: &Matrix, n_groups: usize) -> Vec<usize> {
    let bits = (usize::BITS - (n_groups.max(1) - 1).leading_zeros()) as usize;
    let rank = feature_factors.cols().max(1);
    (0..feature_factors.rows())
        .map(|j| {
            let v = feature_factors.row(j);
            let code: usize = (0..bits)
                .filter(|&b| v.get(b % rank).is_some_and(|&x| x > 0.0))
                .map(|b| 1 << b)
                .sum();
            code % n_groups
        })
        .collect()
}
