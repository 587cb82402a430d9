use sha2::{Digest, Sha256};

use super::SparseDataset;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Largest context size drawn during meta-training.
pub const MAX_CONTEXT_SIZE: usize = 32;

/// A feature's revealed context rows and hidden target rows, both sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub feature: usize,
    /// Context size asked for; `k` is what the data allowed.
    pub requested: usize,
    pub k: usize,
    pub context: Vec<(usize, f64)>,
    pub target: Vec<(usize, f64)>,
}

impl Episode {
    pub fn context_rows(&self) -> Vec<usize> {
        self.context.iter().map(|&(r, _)| r).collect()
    }

    pub fn target_rows(&self) -> Vec<usize> {
        self.target.iter().map(|&(r, _)| r).collect()
    }

    /// Short hex digest of the feature and context rows.
    pub fn context_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.feature as u64).to_le_bytes());
        for &(r, _) in &self.context {
            h.update((r as u64).to_le_bytes());
        }
        h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Keeps at most `cap` targets, chosen uniformly.
    pub fn cap_targets(&mut self, cap: usize, rng: &mut Rng) {
        if self.target.len() > cap {
            let mut keep = rng.sample_indices(self.target.len(), cap);
            keep.sort_unstable();
            self.target = keep.into_iter().map(|i| self.target[i]).collect();
        }
    }
}

/// Uniform on `{0, ..., MAX_CONTEXT_SIZE}`.
pub fn sample_context_size(rng: &mut Rng) -> usize {
    rng.below(MAX_CONTEXT_SIZE + 1)
}

/// Splits the observed rows of `feature` into a uniformly drawn context of
/// `min(k, observed)` rows and a target of the rest.
pub fn sample_episode(
    ds: &SparseDataset,
    feature: usize,
    k: usize,
    rng: &mut Rng,
) -> Result<Episode> {
    if feature >= ds.n_features() {
        return Err(Error::invalid(format!("feature {feature} out of range")));
    }
    let obs = ds.feature_observations(feature);
    if obs.is_empty() {
        return Err(Error::invalid(format!("feature {feature} has no observations")));
    }
    let take = k.min(obs.len());
    let mut in_context = vec![false; obs.len()];
    for i in rng.sample_indices(obs.len(), take) {
        in_context[i] = true;
    }
    let (context, target) = obs
        .iter()
        .zip(&in_context)
        .fold((Vec::new(), Vec::new()), |(mut c, mut t), (&o, &inc)| {
            if inc { c.push(o) } else { t.push(o) }
            (c, t)
        });
    Ok(Episode {
        feature,
        requested: k,
        k: take,
        context,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureKind, Triplet};

    fn ds() -> SparseDataset {
        let t = |row, value| Triplet {
            row,
            feature: 0,
            value,
        };
        SparseDataset::new(
            8,
            vec![FeatureKind::Binary, FeatureKind::Binary],
            vec![t(2, 1.0), t(5, 0.0), t(7, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn zero_shot_targets_everything() {
        let e = sample_episode(&ds(), 0, 0, &mut Rng::new(1)).unwrap();
        assert!(e.context.is_empty());
        assert_eq!(e.target_rows(), vec![2, 5, 7]);
    }

    #[test]
    fn saturated_context() {
        let e = sample_episode(&ds(), 0, 10, &mut Rng::new(1)).unwrap();
        assert_eq!((e.requested, e.k), (10, 3));
        assert_eq!(e.context_rows(), vec![2, 5, 7]);
        assert!(e.target.is_empty());
    }

    #[test]
    fn partitions_observed_rows() {
        for seed in 0..20 {
            let e = sample_episode(&ds(), 0, 2, &mut Rng::new(seed)).unwrap();
            assert_eq!(e.k, 2);
            let mut all = [e.context_rows(), e.target_rows()].concat();
            all.sort_unstable();
            assert_eq!(all, vec![2, 5, 7]);
        }
    }

    #[test]
    fn unobserved_feature_rejected() {
        assert!(sample_episode(&ds(), 1, 1, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn context_size_is_uniform() {
        let mut rng = Rng::new(11);
        let n = 100_000;
        let mut counts = [0usize; MAX_CONTEXT_SIZE + 1];
        for _ in 0..n {
            counts[sample_context_size(&mut rng)] += 1;
        }
        let p = 1.0 / 33.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for (k, &c) in counts.iter().enumerate() {
            let freq = c as f64 / n as f64;
            assert!((freq - p).abs() < 3.0 * se, "k={k} freq={freq}");
            assert!(c > 0);
        }
        let a: Vec<usize> = (0..10).map(|_| sample_context_size(&mut Rng::new(4))).collect();
        assert!(a.iter().all(|&x| x == a[0]));
    }

    #[test]
    fn target_cap() {
        let obs: Vec<(usize, f64)> = (0..300).map(|r| (r, 0.0)).collect();
        let mut e = Episode {
            feature: 0,
            requested: 0,
            k: 0,
            context: vec![],
            target: obs,
        };
        e.cap_targets(256, &mut Rng::new(2));
        assert_eq!(e.target.len(), 256);
        assert!(e.target.windows(2).all(|w| w[0].0 < w[1].0));
    }
}
