use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub meta_train: f64,
    pub meta_test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, meta_train: f64, meta_test: f64) -> Result<Self> {
        let f = Self {
            train,
            meta_train,
            meta_test,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.meta_train, self.meta_test];
        if parts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::invalid(format!("split fractions must be positive, got {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions must sum to 1, got {parts:?}")));
        }
        Ok(())
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.6,
            meta_train: 0.3,
            meta_test: 0.1,
        }
    }
}

pub enum SplitMode<'a> {
    Random(&'a mut Rng),
    /// Ascending by key, earliest to train; ties keep index order.
    Ordered(&'a [f64]),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureRole {
    Train,
    MetaTrain,
    MetaTest,
}

/// Disjoint feature sets, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureSplit {
    pub train: Vec<usize>,
    pub meta_train: Vec<usize>,
    pub meta_test: Vec<usize>,
}

impl FeatureSplit {
    pub fn n_features(&self) -> usize {
        self.train.len() + self.meta_train.len() + self.meta_test.len()
    }

    pub fn role(&self, feature: usize) -> Option<FeatureRole> {
        if self.train.binary_search(&feature).is_ok() {
            Some(FeatureRole::Train)
        } else if self.meta_train.binary_search(&feature).is_ok() {
            Some(FeatureRole::MetaTrain)
        } else if self.meta_test.binary_search(&feature).is_ok() {
            Some(FeatureRole::MetaTest)
        } else {
            None
        }
    }

    /// Membership mask over all features for the train set.
    pub fn train_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_features()];
        for &f in &self.train {
            mask[f] = true;
        }
        mask
    }
}

/// Splits `n_features` into train / meta-train / meta-test. Meta sets get
/// `floor(n * fraction)` features and the remainder goes to train.
pub fn split_features(
    n_features: usize,
    fractions: SplitFractions,
    mode: SplitMode<'_>,
) -> Result<FeatureSplit> {
    fractions.validate()?;
    if n_features < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 features to split, got {n_features}"
        )));
    }
    let n = n_features as f64;
    // The epsilon keeps exact products such as 10 * 0.3 from flooring low.
    let n_meta_train = (n * fractions.meta_train + 1e-9).floor() as usize;
    let n_meta_test = (n * fractions.meta_test + 1e-9).floor() as usize;
    if n_meta_train == 0 || n_meta_test == 0 || n_meta_train + n_meta_test >= n_features {
        return Err(Error::invalid(format!(
            "fractions {fractions:?} leave an empty set for {n_features} features"
        )));
    }
    let order: Vec<usize> = match mode {
        SplitMode::Random(rng) => {
            let mut order: Vec<usize> = (0..n_features).collect();
            rng.shuffle(&mut order);
            order
        }
        SplitMode::Ordered(keys) => {
            if keys.len() != n_features {
                return Err(Error::invalid(format!(
                    "{} ordering keys for {n_features} features",
                    keys.len()
                )));
            }
            if keys.iter().any(|k| k.is_nan()) {
                return Err(Error::invalid("ordering keys must not be NaN"));
            }
            let mut order: Vec<usize> = (0..n_features).collect();
            order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
            order
        }
    };
    let n_train = n_features - n_meta_train - n_meta_test;
    let sorted = |s: &[usize]| {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    };
    Ok(FeatureSplit {
        train: sorted(&order[..n_train]),
        meta_train: sorted(&order[n_train..n_train + n_meta_train]),
        meta_test: sorted(&order[n_train + n_meta_train..]),
    })
}
