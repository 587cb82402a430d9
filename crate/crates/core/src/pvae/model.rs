use std::collections::BTreeMap;

use super::{HeadParams, Link};
use crate::data::FeatureKind;
use crate::error::{Error, Result};
use crate::numerics::{param_hash, Activation, Matrix, Mlp, Parameters, Rng, Tape};

/// Architecture of the base model.
#[derive(Clone, Debug, PartialEq)]
pub struct PvaeConfig {
    pub embedding_dim: usize,
    pub set_dim: usize,
    pub latent_dim: usize,
    /// Hidden widths of the per-observation network inside the set encoder.
    pub point_hidden: Vec<usize>,
    pub encoder_hidden: Vec<usize>,
    /// Widths of the shared decoder layers; the last one is the trunk output
    /// that every head reads.
    pub decoder_layers: Vec<usize>,
    pub output_variance: f64,
}

impl Default for PvaeConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 30,
            set_dim: 30,
            latent_dim: 20,
            point_hidden: Vec::new(),
            encoder_hidden: vec![30],
            decoder_layers: vec![30],
            output_variance: 0.1,
        }
    }
}

/// Every trainable tensor of the base model. Also used as its own gradient
/// buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct PvaeParams {
    /// `n_features x embedding_dim`
    pub embeddings: Matrix,
    /// `[e_j; x_j] -> set contribution`, tanh output.
    pub point_net: Mlp,
    /// `set embedding -> [mu; logvar]`, identity output.
    pub encoder: Mlp,
    /// `z -> d`, tanh output.
    pub decoder: Mlp,
    /// Decoder heads keyed by feature.
    pub heads: BTreeMap<usize, HeadParams>,
}

impl PvaeParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            embeddings: Matrix::zeros(self.embeddings.rows(), self.embeddings.cols()),
            point_net: self.point_net.zeros_like(),
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
            heads: self
                .heads
                .iter()
                .map(|(&f, h)| (f, HeadParams::zeros(h.d_dim(), h.link)))
                .collect(),
        }
    }
}

impl Parameters for PvaeParams {
    fn visit(&self, f: &mut dyn FnMut(&str, usize, usize, &[f64])) {
        let e = &self.embeddings;
        f("embeddings", e.rows(), e.cols(), e.data());
        self.point_net
            .visit(&mut |n, r, c, d| f(&format!("point_net.{n}"), r, c, d));
        self.encoder
            .visit(&mut |n, r, c, d| f(&format!("encoder.{n}"), r, c, d));
        self.decoder
            .visit(&mut |n, r, c, d| f(&format!("decoder.{n}"), r, c, d));
        for (feature, h) in &self.heads {
            h.visit(&mut |n, r, c, d| f(&format!("head{feature}.{n}"), r, c, d));
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, usize, usize, &mut [f64])) {
        let (r, c) = (self.embeddings.rows(), self.embeddings.cols());
        f("embeddings", r, c, self.embeddings.data_mut());
        self.point_net
            .visit_mut(&mut |n, r, c, d| f(&format!("point_net.{n}"), r, c, d));
        self.encoder
            .visit_mut(&mut |n, r, c, d| f(&format!("encoder.{n}"), r, c, d));
        self.decoder
            .visit_mut(&mut |n, r, c, d| f(&format!("decoder.{n}"), r, c, d));
        for (feature, h) in self.heads.iter_mut() {
            h.visit_mut(&mut |n, r, c, d| f(&format!("head{feature}.{n}"), r, c, d));
        }
    }
}

/// Activations recorded while encoding one set of observations.
#[derive(Clone, Debug)]
pub struct EncodeTrace {
    /// Observations in the order they were summed (ascending feature).
    pub observed: Vec<(usize, f64)>,
    pub point_tapes: Vec<Tape>,
    pub encoder_tape: Tape,
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
}

/// Partial VAE: a sum-pooled set encoder over `(feature, value)` pairs, a
/// Gaussian latent, a shared decoder trunk and one linear head per feature.
///
/// Only features with a head are fed to the encoder, so features added
/// after training never leak into the latent code.
#[derive(Clone, Debug, PartialEq)]
pub struct PvaeModel {
    params: PvaeParams,
    kinds: Vec<FeatureKind>,
    output_variance: f64,
    frozen: bool,
}

impl PvaeModel {
    /// Fresh model with embeddings for every feature and heads for
    /// `head_features`.
    pub fn new(
        config: &PvaeConfig,
        kinds: Vec<FeatureKind>,
        head_features: &[usize],
        rng: &mut Rng,
    ) -> Result<Self> {
        let e_dim = config.embedding_dim;
        let n = kinds.len();
        if n == 0 {
            return Err(Error::invalid("the base model needs at least one feature"));
        }
        if config.decoder_layers.is_empty() {
            return Err(Error::invalid("the decoder needs at least one shared layer"));
        }
        let mut emb_rng = rng.derive("embeddings");
        let data = (0..n * e_dim)
            .map(|_| emb_rng.normal() / (e_dim as f64).sqrt())
            .collect();
        let embeddings = Matrix::from_vec(n, e_dim, data)?;

        let dims = |input: usize, hidden: &[usize], output: usize| {
            let mut d = vec![input];
            d.extend_from_slice(hidden);
            d.push(output);
            d
        };
        let point_net = Mlp::new(
            &dims(e_dim + 1, &config.point_hidden, config.set_dim),
            Activation::Tanh,
            &mut rng.derive("point_net"),
        )?;
        let encoder = Mlp::new(
            &dims(config.set_dim, &config.encoder_hidden, 2 * config.latent_dim),
            Activation::Identity,
            &mut rng.derive("encoder"),
        )?;
        let d_dim = *config.decoder_layers.last().unwrap();
        let decoder = Mlp::new(
            &dims(config.latent_dim, &config.decoder_layers[..config.decoder_layers.len() - 1], d_dim),
            Activation::Tanh,
            &mut rng.derive("decoder"),
        )?;
        let mut head_rng = rng.derive("heads");
        let mut heads = BTreeMap::new();
        for &f in head_features {
            if f >= n {
                return Err(Error::invalid(format!("head feature {f} out of range")));
            }
            let w = crate::numerics::xavier_init(d_dim, 1, &mut head_rng)?;
            heads.insert(
                f,
                HeadParams {
                    w: w.data().to_vec(),
                    b: 0.0,
                    link: Link::for_kind(kinds[f]),
                },
            );
        }
        Self::from_params(
            PvaeParams {
                embeddings,
                point_net,
                encoder,
                decoder,
                heads,
            },
            kinds,
            config.output_variance,
        )
    }

    /// Assembles a model from existing tensors after checking that their
    /// shapes agree.
    pub fn from_params(
        params: PvaeParams,
        kinds: Vec<FeatureKind>,
        output_variance: f64,
    ) -> Result<Self> {
        if !(output_variance > 0.0 && output_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "output variance must be positive, got {output_variance}"
            )));
        }
        let e = &params.embeddings;
        if e.rows() != kinds.len() {
            return Err(Error::invalid("one embedding row per feature is required"));
        }
        if params.point_net.input_dim() != e.cols() + 1 {
            return Err(Error::invalid("point network input must be embedding_dim + 1"));
        }
        if params.encoder.input_dim() != params.point_net.output_dim() {
            return Err(Error::invalid("encoder input must match the set embedding"));
        }
        if !params.encoder.output_dim().is_multiple_of(2)
            || params.decoder.input_dim() != params.encoder.output_dim() / 2
        {
            return Err(Error::invalid("encoder must emit [mu; logvar] of the latent size"));
        }
        if params.point_net.output_activation() != Activation::Tanh
            || params.encoder.output_activation() != Activation::Identity
            || params.decoder.output_activation() != Activation::Tanh
        {
            return Err(Error::invalid("unexpected output activation in the base model"));
        }
        let d_dim = params.decoder.output_dim();
        for (&f, h) in &params.heads {
            if f >= kinds.len() {
                return Err(Error::invalid(format!("head for unknown feature {f}")));
            }
            if h.d_dim() != d_dim {
                return Err(Error::invalid(format!("head {f} has the wrong width")));
            }
            if h.link != Link::for_kind(kinds[f]) {
                return Err(Error::invalid(format!("head {f} link does not match its kind")));
            }
        }
        Ok(Self {
            params,
            kinds,
            output_variance,
            frozen: false,
        })
    }

    pub fn params(&self) -> &PvaeParams {
        &self.params
    }

    /// Mutable access to the base parameters; refused once frozen.
    pub fn params_mut(&mut self) -> Result<&mut PvaeParams> {
        if self.frozen {
            return Err(Error::Contract("the base model is frozen".into()));
        }
        Ok(&mut self.params)
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// SHA-256 over every base tensor.
    pub fn hash(&self) -> String {
        param_hash(&self.params)
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn n_features(&self) -> usize {
        self.kinds.len()
    }

    pub fn output_variance(&self) -> f64 {
        self.output_variance
    }

    pub fn latent_dim(&self) -> usize {
        self.params.decoder.input_dim()
    }

    pub fn d_dim(&self) -> usize {
        self.params.decoder.output_dim()
    }

    pub fn embedding_dim(&self) -> usize {
        self.params.embeddings.cols()
    }

    pub fn has_head(&self, feature: usize) -> bool {
        self.params.heads.contains_key(&feature)
    }

    pub fn head(&self, feature: usize) -> Option<&HeadParams> {
        self.params.heads.get(&feature)
    }

    pub fn head_features(&self) -> Vec<usize> {
        self.params.heads.keys().copied().collect()
    }

    /// Link a new head for `feature` must use.
    pub fn link_for(&self, feature: usize) -> Result<Link> {
        self.kinds
            .get(feature)
            .map(|&k| Link::for_kind(k))
            .ok_or_else(|| Error::invalid(format!("feature {feature} out of range")))
    }

    /// Keeps only the observations the encoder is allowed to see.
    pub fn encoder_inputs(&self, observations: &[(usize, f64)]) -> Vec<(usize, f64)> {
        observations
            .iter()
            .copied()
            .filter(|(f, _)| self.has_head(*f))
            .collect()
    }

    fn sorted_observations(&self, observed: &[(usize, f64)]) -> Result<Vec<(usize, f64)>> {
        if let Some(&(f, _)) = observed.iter().find(|(f, _)| *f >= self.n_features()) {
            return Err(Error::invalid(format!("unknown feature index {f}")));
        }
        let mut obs = observed.to_vec();
        obs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Ok(obs)
    }

    fn point_input(&self, feature: usize, value: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.embedding_dim() + 1);
        x.extend_from_slice(self.params.embeddings.row(feature));
        x.push(value);
        x
    }

    /// Sum of point contributions in ascending feature order; empty sets give
    /// the zero vector.
    fn set_embedding(&self, obs: &[(usize, f64)]) -> Result<Vec<f64>> {
        let mut c = vec![0.0; self.params.point_net.output_dim()];
        for &(f, v) in obs {
            let p = self.params.point_net.predict(&self.point_input(f, v))?;
            crate::numerics::axpy(1.0, &p, &mut c);
        }
        Ok(c)
    }

    /// Posterior `(mu, logvar)` given observed pairs; invariant to their
    /// order.
    pub fn encode_partial(&self, observed: &[(usize, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
        let obs = self.sorted_observations(observed)?;
        let out = self.params.encoder.predict(&self.set_embedding(&obs)?)?;
        let latent = self.latent_dim();
        Ok((out[..latent].to_vec(), out[latent..].to_vec()))
    }

    /// [`PvaeModel::encode_partial`] with the activations needed for
    /// backpropagation.
    pub fn encode_traced(&self, observed: &[(usize, f64)]) -> Result<EncodeTrace> {
        let obs = self.sorted_observations(observed)?;
        let mut c = vec![0.0; self.params.point_net.output_dim()];
        let mut point_tapes = Vec::with_capacity(obs.len());
        for &(f, v) in &obs {
            let (p, tape) = self.params.point_net.forward(&self.point_input(f, v))?;
            crate::numerics::axpy(1.0, &p, &mut c);
            point_tapes.push(tape);
        }
        let (out, encoder_tape) = self.params.encoder.forward(&c)?;
        let latent = self.latent_dim();
        Ok(EncodeTrace {
            observed: obs,
            point_tapes,
            encoder_tape,
            mu: out[..latent].to_vec(),
            logvar: out[latent..].to_vec(),
        })
    }

    /// Backpropagates `(dmu, dlogvar)` through the encoder, point network and
    /// embeddings, accumulating into `grads`.
    pub fn encode_backward(
        &self,
        trace: &EncodeTrace,
        dmu: &[f64],
        dlogvar: &[f64],
        grads: &mut PvaeParams,
    ) -> Result<()> {
        let dout = [dmu, dlogvar].concat();
        let dc = self
            .params
            .encoder
            .backward_into(&trace.encoder_tape, &dout, &mut grads.encoder)?;
        let e_dim = self.embedding_dim();
        for (&(f, _), tape) in trace.observed.iter().zip(&trace.point_tapes) {
            let dx = self
                .params
                .point_net
                .backward_into(tape, &dc, &mut grads.point_net)?;
            crate::numerics::axpy(1.0, &dx[..e_dim], grads.embeddings.row_mut(f));
        }
        Ok(())
    }

    /// Posterior mean; consumes no randomness.
    pub fn latent_mean(&self, observed: &[(usize, f64)]) -> Result<Vec<f64>> {
        Ok(self.encode_partial(observed)?.0)
    }

    /// Shared decoder output `d` for a latent vector.
    pub fn trunk(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.params.decoder.predict(z)
    }

    /// Pre-link outputs of the requested heads at `z`.
    pub fn decode(&self, z: &[f64], features: &[usize]) -> Result<Vec<f64>> {
        let missing = features.iter().find(|f| !self.has_head(**f));
        if let Some(f) = missing {
            return Err(Error::invalid(format!("feature {f} has no decoder head")));
        }
        let d = self.trunk(z)?;
        features
            .iter()
            .map(|f| self.params.heads[f].eta(&d))
            .collect()
    }

    /// Prediction for a feature under an external head, in normalised units
    /// (a probability for binary features).
    pub fn predict_feature(&self, head: &HeadParams, observed: &[(usize, f64)]) -> Result<f64> {
        if head.d_dim() != self.d_dim() {
            return Err(Error::invalid(format!(
                "head has width {}, trunk outputs {}",
                head.d_dim(),
                self.d_dim()
            )));
        }
        let z = self.latent_mean(&self.encoder_inputs(observed))?;
        head.predict(&self.trunk(&z)?)
    }

    /// Adds a head for a feature that has none. Refused once frozen.
    pub fn attach_head(&mut self, feature: usize, head: HeadParams) -> Result<()> {
        let link = self.link_for(feature)?;
        if head.link != link || head.d_dim() != self.d_dim() {
            return Err(Error::invalid("head does not fit this model"));
        }
        if self.has_head(feature) {
            return Err(Error::invalid(format!("feature {feature} already has a head")));
        }
        self.params_mut()?.heads.insert(feature, head);
        Ok(())
    }
}
