use crate::error::{Error, Result};
use crate::numerics::{Activation, Mlp, Parameters, Rng, Tape};
use crate::pvae::{HeadParams, Link};

#[derive(Clone, Debug, PartialEq)]
pub struct ChnConfig {
    /// Width of each encoded context point.
    pub point_dim: usize,
    pub point_hidden: Vec<usize>,
    pub context_dim: usize,
    pub context_hidden: Vec<usize>,
    pub meta_dim: usize,
    pub meta_hidden: Vec<usize>,
    pub pred_hidden: Vec<usize>,
}

impl Default for ChnConfig {
    fn default() -> Self {
        Self {
            point_dim: 25,
            point_hidden: vec![50],
            context_dim: 25,
            context_hidden: vec![50],
            meta_dim: 5,
            meta_hidden: vec![10],
            pred_hidden: vec![64, 64],
        }
    }
}

/// Hypernetwork weights. Also used as its own gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct ChnParams {
    /// `[z; x] -> point`, tanh output.
    pub point_net: Mlp,
    /// `sum of points -> context vector`.
    pub context_net: Mlp,
    /// `metadata -> metadata embedding`; absent when the data has no
    /// metadata, in which case the embedding is a zero vector.
    pub meta_net: Option<Mlp>,
    /// `[context; metadata embedding] -> [w; b]`.
    pub pred_net: Mlp,
}

impl ChnParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            point_net: self.point_net.zeros_like(),
            context_net: self.context_net.zeros_like(),
            meta_net: self.meta_net.as_ref().map(Mlp::zeros_like),
            pred_net: self.pred_net.zeros_like(),
        }
    }
}

impl Parameters for ChnParams {
    fn visit(&self, f: &mut dyn FnMut(&str, usize, usize, &[f64])) {
        self.point_net
            .visit(&mut |n, r, c, d| f(&format!("point_net.{n}"), r, c, d));
        self.context_net
            .visit(&mut |n, r, c, d| f(&format!("context_net.{n}"), r, c, d));
        if let Some(h) = &self.meta_net {
            h.visit(&mut |n, r, c, d| f(&format!("meta_net.{n}"), r, c, d));
        }
        self.pred_net
            .visit(&mut |n, r, c, d| f(&format!("pred_net.{n}"), r, c, d));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, usize, usize, &mut [f64])) {
        self.point_net
            .visit_mut(&mut |n, r, c, d| f(&format!("point_net.{n}"), r, c, d));
        self.context_net
            .visit_mut(&mut |n, r, c, d| f(&format!("context_net.{n}"), r, c, d));
        if let Some(h) = &mut self.meta_net {
            h.visit_mut(&mut |n, r, c, d| f(&format!("meta_net.{n}"), r, c, d));
        }
        self.pred_net
            .visit_mut(&mut |n, r, c, d| f(&format!("pred_net.{n}"), r, c, d));
    }
}

/// One context observation: the row's latent code and the new feature's
/// value there.
#[derive(Clone, Copy, Debug)]
pub struct ContextPoint<'a> {
    pub z: &'a [f64],
    pub x: f64,
}

/// Activations of one head prediction, for backpropagation.
#[derive(Clone, Debug)]
pub struct HeadTrace {
    point_tapes: Vec<Tape>,
    context_tape: Tape,
    meta_tape: Option<Tape>,
    pred_tape: Tape,
}

/// Contextual hypernetwork: maps a context set and feature metadata to the
/// decoder head of a new feature in one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Chn {
    params: ChnParams,
    latent_dim: usize,
    d_dim: usize,
    meta_dim: usize,
}

fn dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend_from_slice(hidden);
    d.push(output);
    d
}

impl Chn {
    /// `meta_input_dim` is the length of encoded metadata, or `None` when the
    /// dataset has none. The prediction network's last layer starts at zero,
    /// so an untrained hypernetwork emits `w = 0, b = 0`.
    pub fn new(
        cfg: &ChnConfig,
        latent_dim: usize,
        d_dim: usize,
        meta_input_dim: Option<usize>,
        rng: &mut Rng,
    ) -> Result<Self> {
        let point_net = Mlp::new(
            &dims(latent_dim + 1, &cfg.point_hidden, cfg.point_dim),
            Activation::Tanh,
            &mut rng.derive("point_net"),
        )?;
        let context_net = Mlp::new(
            &dims(cfg.point_dim, &cfg.context_hidden, cfg.context_dim),
            Activation::Identity,
            &mut rng.derive("context_net"),
        )?;
        let meta_net = match meta_input_dim {
            Some(0) => return Err(Error::invalid("metadata input must be non-empty")),
            Some(n) => Some(Mlp::new(
                &dims(n, &cfg.meta_hidden, cfg.meta_dim),
                Activation::Identity,
                &mut rng.derive("meta_net"),
            )?),
            None => None,
        };
        let mut pred_net = Mlp::new(
            &dims(cfg.context_dim + cfg.meta_dim, &cfg.pred_hidden, d_dim + 1),
            Activation::Identity,
            &mut rng.derive("pred_net"),
        )?;
        pred_net.zero_output_layer();
        Self::from_params(
            ChnParams {
                point_net,
                context_net,
                meta_net,
                pred_net,
            },
            latent_dim,
        )
    }

    /// Rebuilds a hypernetwork from tensors, inferring every width.
    pub fn from_params(params: ChnParams, latent_dim: usize) -> Result<Self> {
        if params.point_net.input_dim() != latent_dim + 1 {
            return Err(Error::invalid("point network input must be latent_dim + 1"));
        }
        if params.context_net.input_dim() != params.point_net.output_dim() {
            return Err(Error::invalid("context network input must match point width"));
        }
        let context_dim = params.context_net.output_dim();
        let pred_in = params.pred_net.input_dim();
        if pred_in <= context_dim {
            return Err(Error::invalid("prediction network input too narrow"));
        }
        let meta_dim = pred_in - context_dim;
        if let Some(h) = &params.meta_net {
            if h.output_dim() != meta_dim {
                return Err(Error::invalid("metadata embedding width mismatch"));
            }
        }
        if params.pred_net.output_dim() < 2 {
            return Err(Error::invalid("prediction network must emit [w; b]"));
        }
        if params.point_net.output_activation() != Activation::Tanh
            || params.context_net.output_activation() != Activation::Identity
            || params.pred_net.output_activation() != Activation::Identity
            || params
                .meta_net
                .as_ref()
                .is_some_and(|h| h.output_activation() != Activation::Identity)
        {
            return Err(Error::invalid("unexpected output activation in the hypernetwork"));
        }
        let d_dim = params.pred_net.output_dim() - 1;
        Ok(Self {
            params,
            latent_dim,
            d_dim,
            meta_dim,
        })
    }

    pub fn params(&self) -> &ChnParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ChnParams {
        &mut self.params
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn d_dim(&self) -> usize {
        self.d_dim
    }

    pub fn meta_dim(&self) -> usize {
        self.meta_dim
    }

    pub fn uses_metadata(&self) -> bool {
        self.params.meta_net.is_some()
    }

    fn point_input(&self, p: &ContextPoint<'_>) -> Result<Vec<f64>> {
        if p.z.len() != self.latent_dim {
            return Err(Error::invalid(format!(
                "context latent has length {}, expected {}",
                p.z.len(),
                self.latent_dim
            )));
        }
        let mut v = Vec::with_capacity(self.latent_dim + 1);
        v.extend_from_slice(p.z);
        v.push(p.x);
        Ok(v)
    }

    /// Context vector from points given in a fixed order (ascending row);
    /// an empty context sums to the zero vector.
    pub fn encode_context(&self, points: &[ContextPoint<'_>]) -> Result<Vec<f64>> {
        let mut sum = vec![0.0; self.params.point_net.output_dim()];
        for p in points {
            let out = self.params.point_net.predict(&self.point_input(p)?)?;
            crate::numerics::axpy(1.0, &out, &mut sum);
        }
        self.params.context_net.predict(&sum)
    }

    fn check_meta(&self, meta: Option<&[f64]>) -> Result<()> {
        match (&self.params.meta_net, meta) {
            (Some(h), Some(m)) if m.len() == h.input_dim() => Ok(()),
            (Some(h), Some(m)) => Err(Error::invalid(format!(
                "metadata has length {}, expected {}",
                m.len(),
                h.input_dim()
            ))),
            (Some(_), None) => Err(Error::invalid("this hypernetwork requires metadata")),
            (None, _) => Ok(()),
        }
    }

    /// Metadata embedding; zero when the hypernetwork has no metadata
    /// network, whatever is passed in.
    pub fn encode_metadata(&self, meta: Option<&[f64]>) -> Result<Vec<f64>> {
        self.check_meta(meta)?;
        match (&self.params.meta_net, meta) {
            (Some(h), Some(m)) => h.predict(m),
            _ => Ok(vec![0.0; self.meta_dim]),
        }
    }

    fn unpack(&self, out: &[f64], link: Link) -> HeadParams {
        HeadParams {
            w: out[..self.d_dim].to_vec(),
            b: out[self.d_dim],
            link,
        }
    }

    /// Head parameters for a new feature from its context and metadata.
    pub fn predict_head(
        &self,
        points: &[ContextPoint<'_>],
        meta: Option<&[f64]>,
        link: Link,
    ) -> Result<HeadParams> {
        let c = self.encode_context(points)?;
        let m = self.encode_metadata(meta)?;
        let out = self.params.pred_net.predict(&[c, m].concat())?;
        Ok(self.unpack(&out, link))
    }

    /// [`Chn::predict_head`] keeping the activations for
    /// [`Chn::head_backward`].
    pub fn predict_head_traced(
        &self,
        points: &[ContextPoint<'_>],
        meta: Option<&[f64]>,
        link: Link,
    ) -> Result<(HeadParams, HeadTrace)> {
        self.check_meta(meta)?;
        let mut sum = vec![0.0; self.params.point_net.output_dim()];
        let mut point_tapes = Vec::with_capacity(points.len());
        for p in points {
            let (out, tape) = self.params.point_net.forward(&self.point_input(p)?)?;
            crate::numerics::axpy(1.0, &out, &mut sum);
            point_tapes.push(tape);
        }
        let (c, context_tape) = self.params.context_net.forward(&sum)?;
        let (m, meta_tape) = match (&self.params.meta_net, meta) {
            (Some(h), Some(md)) => {
                let (m, t) = h.forward(md)?;
                (m, Some(t))
            }
            _ => (vec![0.0; self.meta_dim], None),
        };
        let (out, pred_tape) = self.params.pred_net.forward(&[c, m].concat())?;
        Ok((
            self.unpack(&out, link),
            HeadTrace {
                point_tapes,
                context_tape,
                meta_tape,
                pred_tape,
            },
        ))
    }

    /// Accumulates into `grads` the gradient of a scalar whose gradient with
    /// respect to the predicted head is `head_grad`.
    pub fn head_backward(
        &self,
        trace: &HeadTrace,
        head_grad: &HeadParams,
        grads: &mut ChnParams,
    ) -> Result<()> {
        let mut dout = head_grad.w.clone();
        dout.push(head_grad.b);
        let p = &self.params;
        let dcm = p
            .pred_net
            .backward_into(&trace.pred_tape, &dout, &mut grads.pred_net)?;
        let context_dim = p.context_net.output_dim();
        if let (Some(h), Some(t), Some(gh)) = (&p.meta_net, &trace.meta_tape, &mut grads.meta_net) {
            h.backward_into(t, &dcm[context_dim..], gh)?;
        }
        let dsum = p
            .context_net
            .backward_into(&trace.context_tape, &dcm[..context_dim], &mut grads.context_net)?;
        for tape in &trace.point_tapes {
            p.point_net.backward_into(tape, &dsum, &mut grads.point_net)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(meta: Option<usize>, seed: u64) -> Chn {
        let cfg = ChnConfig {
            point_dim: 3,
            point_hidden: vec![4],
            context_dim: 3,
            context_hidden: vec![],
            meta_dim: 2,
            meta_hidden: vec![3],
            pred_hidden: vec![4],
        };
        Chn::new(&cfg, 2, 3, meta, &mut Rng::new(seed)).unwrap()
    }

    #[test]
    fn untrained_head_is_neutral() {
        let chn = small(Some(3), 0);
        let z = [0.4, -0.2];
        let pts = [ContextPoint { z: &z, x: 1.0 }];
        let h = chn.predict_head(&pts, Some(&[1.0, 0.0, 0.5]), Link::Sigmoid).unwrap();
        assert_eq!(h, HeadParams::zeros(3, Link::Sigmoid));
    }

    #[test]
    fn empty_context_uses_zero_sum() {
        let chn = small(None, 1);
        let c = chn.encode_context(&[]).unwrap();
        assert_eq!(c, chn.params().context_net.predict(&[0.0; 3]).unwrap());
        assert_eq!(chn.encode_metadata(None).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn duplicating_a_point_changes_context() {
        let chn = small(None, 2);
        let z = [0.4, -0.2];
        let p = ContextPoint { z: &z, x: 1.0 };
        assert_ne!(chn.encode_context(&[p]).unwrap(), chn.encode_context(&[p, p]).unwrap());
    }

    #[test]
    fn metadata_checks() {
        let chn = small(Some(3), 3);
        assert!(chn.encode_metadata(Some(&[1.0])).is_err());
        assert!(chn.encode_metadata(None).is_err());
        let a = chn.encode_metadata(Some(&[1.0, 0.0, 0.2])).unwrap();
        assert_eq!(a, chn.encode_metadata(Some(&[1.0, 0.0, 0.2])).unwrap());
        let mut zeroed = chn.clone();
        for l in zeroed.params_mut().meta_net.as_mut().unwrap().layers_mut() {
            l.bias.fill(0.0);
        }
        assert_eq!(zeroed.encode_metadata(Some(&[0.0; 3])).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn traced_matches_untraced() {
        let mut chn = small(Some(2), 4);
        let mut rng = Rng::new(9);
        for l in chn.params_mut().pred_net.layers_mut() {
            l.weight.data_mut().iter_mut().for_each(|v| *v = rng.normal());
        }
        let z1 = [0.1, 0.3];
        let z2 = [-1.0, 0.5];
        let pts = [ContextPoint { z: &z1, x: 0.0 }, ContextPoint { z: &z2, x: 1.0 }];
        let meta = [1.0, 0.0];
        let a = chn.predict_head(&pts, Some(&meta), Link::Identity).unwrap();
        let (b, _) = chn.predict_head_traced(&pts, Some(&meta), Link::Identity).unwrap();
        assert_eq!(a, b);
    }
}
