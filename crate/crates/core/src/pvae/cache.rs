use super::{HeadParams, PvaeModel};
use crate::data::SparseDataset;
use crate::error::{Error, Result};

/// Per-row latent means and trunk outputs of a frozen base model.
///
/// Every adaptation method reads rows through the frozen encoder, so the
/// encodings are computed once per dataset.
#[derive(Clone, Debug)]
pub struct BaseCache {
    z: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
    model_hash: String,
}

impl BaseCache {
    pub fn new(model: &PvaeModel, dataset: &SparseDataset) -> Result<Self> {
        if !model.is_frozen() {
            return Err(Error::Contract("encodings can only be cached for a frozen model".into()));
        }
        if dataset.n_features() != model.n_features() {
            return Err(Error::invalid("dataset and model disagree on the feature count"));
        }
        let mut z = Vec::with_capacity(dataset.n_rows());
        let mut d = Vec::with_capacity(dataset.n_rows());
        for r in 0..dataset.n_rows() {
            let zr = model.latent_mean(&model.encoder_inputs(dataset.row(r)))?;
            d.push(model.trunk(&zr)?);
            z.push(zr);
        }
        Ok(Self {
            z,
            d,
            model_hash: model.hash(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self, row: usize) -> &[f64] {
        &self.z[row]
    }

    pub fn d(&self, row: usize) -> &[f64] {
        &self.d[row]
    }

    pub fn model_hash(&self) -> &str {
        &self.model_hash
    }

    /// Prediction for `row` under `head`, in normalised units.
    pub fn predict(&self, head: &HeadParams, row: usize) -> Result<f64> {
        head.predict(&self.d[row])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureKind, Triplet};
    use crate::numerics::Rng;
    use crate::pvae::{Link, PvaeConfig};

    #[test]
    fn matches_direct_evaluation() {
        let kinds = vec![FeatureKind::Binary; 4];
        let cfg = PvaeConfig {
            embedding_dim: 3,
            set_dim: 4,
            latent_dim: 2,
            encoder_hidden: vec![4],
            decoder_layers: vec![3],
            ..PvaeConfig::default()
        };
        let mut m = PvaeModel::new(&cfg, kinds.clone(), &[0, 1], &mut Rng::new(1)).unwrap();
        let t = |row, feature, value| Triplet { row, feature, value };
        let ds = SparseDataset::new(
            3,
            kinds,
            vec![t(0, 0, 1.0), t(0, 3, 1.0), t(1, 1, 0.0), t(2, 2, 1.0)],
        )
        .unwrap();
        assert!(BaseCache::new(&m, &ds).is_err());
        m.freeze();
        let cache = BaseCache::new(&m, &ds).unwrap();
        let head = HeadParams { w: vec![0.2, -0.4, 1.0], b: -0.1, link: Link::Sigmoid };
        for r in 0..3 {
            assert_eq!(cache.z(r), m.latent_mean(&m.encoder_inputs(ds.row(r))).unwrap());
            assert_eq!(cache.predict(&head, r).unwrap(), m.predict_feature(&head, ds.row(r)).unwrap());
        }
        // row 2 only observes a headless feature, so it encodes like the empty set
        assert_eq!(cache.z(2), m.latent_mean(&[]).unwrap());
    }
}
