use crate::data::FeatureKind;
use crate::error::{Error, Result};
use crate::numerics::{bernoulli_nll_grad, dot, gaussian_nll_grad, sigmoid, Parameters};

/// Output link of a decoder head.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    /// Bernoulli likelihood, `eta` is a logit.
    Sigmoid,
    /// Gaussian likelihood with fixed variance, `eta` is the mean.
    Identity,
}

impl Link {
    pub fn for_kind(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::Binary => Link::Sigmoid,
            FeatureKind::Continuous => Link::Identity,
        }
    }

    pub fn apply(self, eta: f64) -> f64 {
        match self {
            Link::Sigmoid => sigmoid(eta),
            Link::Identity => eta,
        }
    }

    /// Negative log-likelihood of `x` and its derivative with respect to
    /// `eta`. `variance` only matters for the identity link.
    pub fn nll_grad(self, x: f64, eta: f64, variance: f64) -> Result<(f64, f64)> {
        match self {
            Link::Sigmoid => Ok(bernoulli_nll_grad(x, eta)),
            Link::Identity => gaussian_nll_grad(x, eta, variance),
        }
    }
}

/// Feature-specific decoder parameters: `eta = w . d + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub w: Vec<f64>,
    pub b: f64,
    pub link: Link,
}

impl HeadParams {
    pub fn zeros(d_dim: usize, link: Link) -> Self {
        Self {
            w: vec![0.0; d_dim],
            b: 0.0,
            link,
        }
    }

    pub fn d_dim(&self) -> usize {
        self.w.len()
    }

    /// Pre-link output for a trunk activation `d`.
    pub fn eta(&self, d: &[f64]) -> Result<f64> {
        if d.len() != self.w.len() {
            return Err(Error::invalid(format!(
                "head expects {} trunk outputs, got {}",
                self.w.len(),
                d.len()
            )));
        }
        Ok(dot(&self.w, d) + self.b)
    }

    pub fn predict(&self, d: &[f64]) -> Result<f64> {
        Ok(self.link.apply(self.eta(d)?))
    }

    /// Accumulates `scale * d(nll)/d(w, b)` at trunk output `d` and returns
    /// the unscaled NLL and its derivative with respect to `eta`.
    pub fn accumulate_nll_grad(
        &self,
        d: &[f64],
        x: f64,
        variance: f64,
        scale: f64,
        grad: &mut HeadParams,
    ) -> Result<(f64, f64)> {
        let (nll, g) = self.link.nll_grad(x, self.eta(d)?, variance)?;
        for (gw, dv) in grad.w.iter_mut().zip(d) {
            *gw += scale * g * dv;
        }
        grad.b += scale * g;
        Ok((nll, g))
    }
}

impl Parameters for HeadParams {
    fn visit(&self, f: &mut dyn FnMut(&str, usize, usize, &[f64])) {
        f("w", 1, self.w.len(), &self.w);
        f("b", 1, 1, std::slice::from_ref(&self.b));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, usize, usize, &mut [f64])) {
        let n = self.w.len();
        f("w", 1, n, &mut self.w);
        f("b", 1, 1, std::slice::from_mut(&mut self.b));
    }
}
