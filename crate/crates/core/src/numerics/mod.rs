//! Dense f64 numerics: matrices, tanh MLPs with exact reverse-mode gradients,
//! Adam, Xavier initialisation, seeded random streams and the Gaussian and
//! Bernoulli primitives the models are assembled from.
//!
//! Every reduction runs in a fixed index order so that repeated runs are
//! bit-identical.

mod adam;
mod init;
mod matrix;
mod mlp;
mod params;
mod prob;
mod rng;

pub use adam::{Adam, AdamConfig};
pub use init::xavier_init;
pub use matrix::Matrix;
pub use mlp::{Activation, Dense, Mlp, Tape};
pub use params::{param_hash, Parameters};
pub use prob::{
    bernoulli_nll_from_logit, bernoulli_nll_grad, clamp_logvar, gaussian_nll, gaussian_nll_grad,
    kl_standard_normal, kl_standard_normal_grad, logit, reparameterize, reparameterize_backward,
    sigmoid, Reparameterized, LOGVAR_MAX, LOGVAR_MIN,
};
pub use rng::Rng;

/// Dot product with left-to-right accumulation.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `acc += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], acc: &mut [f64]) {
    debug_assert_eq!(x.len(), acc.len());
    for (a, v) in acc.iter_mut().zip(x) {
        *a += alpha * v;
    }
}
