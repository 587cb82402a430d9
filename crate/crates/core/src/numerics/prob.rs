use super::Rng;
use crate::error::{Error, Result};

/// Log-variances are clamped to this range before exponentiation; the clamp
/// has zero gradient outside it.
pub const LOGVAR_MIN: f64 = -10.0;
pub const LOGVAR_MAX: f64 = 10.0;

#[inline]
pub fn clamp_logvar(lv: f64) -> f64 {
    lv.clamp(LOGVAR_MIN, LOGVAR_MAX)
}

#[inline]
fn clamp_passes_gradient(lv: f64) -> bool {
    (LOGVAR_MIN..=LOGVAR_MAX).contains(&lv)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn check_same_len(mu: &[f64], logvar: &[f64]) -> Result<()> {
    if mu.len() != logvar.len() {
        return Err(Error::invalid(format!(
            "mu has length {} but logvar has length {}",
            mu.len(),
            logvar.len()
        )));
    }
    Ok(())
}

/// A reparameterised draw together with the standard-normal noise behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct Reparameterized {
    pub z: Vec<f64>,
    pub noise: Vec<f64>,
}

/// `z = mu + exp(logvar / 2) * eps` with `eps ~ N(0, I)`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], rng: &mut Rng) -> Result<Reparameterized> {
    check_same_len(mu, logvar)?;
    let noise: Vec<f64> = (0..mu.len()).map(|_| rng.normal()).collect();
    let z = mu
        .iter()
        .zip(logvar)
        .zip(&noise)
        .map(|((m, lv), e)| m + (0.5 * clamp_logvar(*lv)).exp() * e)
        .collect();
    Ok(Reparameterized { z, noise })
}

/// Pulls `dz` back to `(dmu, dlogvar)`.
pub fn reparameterize_backward(
    dz: &[f64],
    logvar: &[f64],
    noise: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let dmu = dz.to_vec();
    let dlogvar = dz
        .iter()
        .zip(logvar)
        .zip(noise)
        .map(|((g, lv), e)| {
            if clamp_passes_gradient(*lv) {
                g * 0.5 * (0.5 * lv).exp() * e
            } else {
                0.0
            }
        })
        .collect();
    (dmu, dlogvar)
}

/// `KL(N(mu, exp(logvar)) || N(0, I)) = 1/2 sum(mu^2 + exp(lv) - 1 - lv)`, in nats.
pub fn kl_standard_normal(mu: &[f64], logvar: &[f64]) -> Result<f64> {
    check_same_len(mu, logvar)?;
    let mut acc = 0.0;
    for (m, lv) in mu.iter().zip(logvar) {
        let lv = clamp_logvar(*lv);
        acc += m * m + lv.exp() - 1.0 - lv;
    }
    Ok(0.5 * acc)
}

pub fn kl_standard_normal_grad(mu: &[f64], logvar: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dmu = mu.to_vec();
    let dlv = logvar
        .iter()
        .map(|&lv| {
            if clamp_passes_gradient(lv) {
                0.5 * (lv.exp() - 1.0)
            } else {
                0.0
            }
        })
        .collect();
    (dmu, dlv)
}

/// `1/2 ln(2 pi var) + (x - mu)^2 / (2 var)`
pub fn gaussian_nll(x: f64, mu: f64, var: f64) -> Result<f64> {
    Ok(gaussian_nll_grad(x, mu, var)?.0)
}

/// Gaussian NLL and its derivative with respect to `mu`.
pub fn gaussian_nll_grad(x: f64, mu: f64, var: f64) -> Result<(f64, f64)> {
    if !(var > 0.0) {
        return Err(Error::invalid(format!("variance must be positive, got {var}")));
    }
    let r = x - mu;
    let nll = 0.5 * (2.0 * std::f64::consts::PI * var).ln() + r * r / (2.0 * var);
    Ok((nll, -r / var))
}

/// `-[x ln s(l) + (1 - x) ln(1 - s(l))]`, evaluated as `softplus(l) - x l`.
pub fn bernoulli_nll_from_logit(x: f64, logit: f64) -> f64 {
    bernoulli_nll_grad(x, logit).0
}

/// Bernoulli NLL and its derivative with respect to the logit.
pub fn bernoulli_nll_grad(x: f64, logit: f64) -> (f64, f64) {
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    (softplus - x * logit, sigmoid(logit) - x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn kl_closed_forms() {
        assert_eq!(kl_standard_normal(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(kl_standard_normal(&[1.0], &[0.0]).unwrap(), 0.5);
        // 1/2 (4 - 1 - ln 4)
        let kl = kl_standard_normal(&[0.0], &[4f64.ln()]).unwrap();
        assert!((kl - 0.806_852_819_440_054_7).abs() < 1e-12);
        assert!(kl_standard_normal(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn kl_matches_monte_carlo() {
        // E_q[log q(z) - log p(z)] with q = N(0, 4)
        let mut rng = Rng::new(5);
        let n = 200_000;
        let sd = 2.0f64;
        let mut acc = 0.0;
        for _ in 0..n {
            let z = sd * rng.normal();
            let log_q = -0.5 * (2.0 * PI * 4.0).ln() - z * z / 8.0;
            let log_p = -0.5 * (2.0 * PI).ln() - z * z / 2.0;
            acc += log_q - log_p;
        }
        let mc = acc / n as f64;
        let exact = kl_standard_normal(&[0.0], &[4f64.ln()]).unwrap();
        // per-sample sd of (3/8) z^2 is (3/8) * 4 * sqrt(2) ~ 2.1
        assert!((mc - exact).abs() < 4.0 * 2.2 / (n as f64).sqrt());
    }

    #[test]
    fn kl_non_negative_and_zero_only_at_prior() {
        let mut rng = Rng::new(9);
        for _ in 0..1000 {
            let mu: Vec<f64> = (0..3).map(|_| 3.0 * rng.normal()).collect();
            let lv: Vec<f64> = (0..3).map(|_| 4.0 * rng.normal()).collect();
            let kl = kl_standard_normal(&mu, &lv).unwrap();
            assert!(kl >= 0.0);
        }
        assert!(kl_standard_normal(&[1e-3], &[0.0]).unwrap() > 0.0);
        assert!(kl_standard_normal(&[0.0], &[1e-3]).unwrap() > 0.0);
    }

    #[test]
    fn gaussian_nll_values() {
        let v = gaussian_nll(0.3, 0.3, 0.1).unwrap();
        assert!((v - 0.5 * (0.2 * PI).ln()).abs() < 1e-15);
        assert!((v - -0.232_354_013_292_350_1).abs() < 1e-12);
        assert!(gaussian_nll(1.0, 1.0, 1.0 / (2.0 * PI)).unwrap().abs() < 1e-15);
        let v = gaussian_nll(2.0, 1.0, 0.5).unwrap();
        assert!((v - (0.5 * PI.ln() + 1.0)).abs() < 1e-14);
        assert!(gaussian_nll(0.0, 0.0, 0.0).is_err());
        assert!(gaussian_nll(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn bernoulli_nll_values() {
        assert!((bernoulli_nll_from_logit(1.0, 0.0) - LN_2).abs() < 1e-15);
        assert!((bernoulli_nll_from_logit(0.0, 0.0) - LN_2).abs() < 1e-15);
        let v = bernoulli_nll_from_logit(1.0, 500.0);
        assert!(v.is_finite() && v >= 0.0 && v < 1e-100);
        let v = bernoulli_nll_from_logit(0.0, 500.0);
        assert!((v - 500.0).abs() < 1e-9);
        let v = bernoulli_nll_from_logit(0.0, -500.0);
        assert!(v.is_finite() && v < 1e-100);
    }

    #[test]
    fn likelihood_gradients_match_finite_differences() {
        let eps = 1e-5;
        for &(x, l) in &[(1.0, 0.3), (0.0, -1.7), (1.0, 4.0)] {
            let (_, g) = bernoulli_nll_grad(x, l);
            let fd = (bernoulli_nll_from_logit(x, l + eps) - bernoulli_nll_from_logit(x, l - eps))
                / (2.0 * eps);
            assert!((fd - g).abs() < 1e-8);
        }
        let (_, g) = gaussian_nll_grad(0.2, 0.7, 0.1).unwrap();
        let fd = (gaussian_nll(0.2, 0.7 + eps, 0.1).unwrap()
            - gaussian_nll(0.2, 0.7 - eps, 0.1).unwrap())
            / (2.0 * eps);
        assert!((fd - g).abs() < 1e-6);
    }

    #[test]
    fn reparameterize_zero_variance_limit() {
        let mut rng = Rng::new(1);
        let r = reparameterize(&[0.7, -1.2], &[-1e6, -1e6], &mut rng).unwrap();
        // logvar clamps at -10, so the residual scale is exp(-5)
        for ((z, m), e) in r.z.iter().zip([0.7, -1.2]).zip(&r.noise) {
            assert!((z - m).abs() <= (-5f64).exp() * e.abs() + 1e-15);
        }
        let (_, dlv) = reparameterize_backward(&[1.0, 1.0], &[-1e6, -1e6], &r.noise);
        assert_eq!(dlv, vec![0.0, 0.0]);
    }

    #[test]
    fn reparameterize_standard_normal_moments() {
        let mut rng = Rng::new(2024);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let z = reparameterize(&[0.0], &[0.0], &mut rng).unwrap().z[0];
            sum += z;
            sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn reparameterize_reproducible() {
        let a = reparameterize(&[1.0], &[0.0], &mut Rng::new(77)).unwrap();
        let b = reparameterize(&[1.0], &[0.0], &mut Rng::new(77)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.z[0], 1.0 + a.noise[0]);
        assert!(reparameterize(&[1.0], &[0.0, 0.0], &mut Rng::new(0)).is_err());
    }

    #[test]
    fn reparameterize_gradient_matches_finite_differences() {
        let mu = [0.4, -0.3];
        let lv = [0.2, -0.6];
        let r = reparameterize(&mu, &lv, &mut Rng::new(3)).unwrap();
        let dz = [1.3, -0.8];
        let (dmu, dlv) = reparameterize_backward(&dz, &lv, &r.noise);
        let f = |mu: &[f64], lv: &[f64]| -> f64 {
            mu.iter()
                .zip(lv)
                .zip(&r.noise)
                .zip(&dz)
                .map(|(((m, l), e), g)| g * (m + (0.5 * l).exp() * e))
                .sum()
        };
        let eps = 1e-5;
        for i in 0..2 {
            let mut lp = lv;
            lp[i] += eps;
            let mut lm = lv;
            lm[i] -= eps;
            let fd = (f(&mu, &lp) - f(&mu, &lm)) / (2.0 * eps);
            assert!((fd - dlv[i]).abs() < 1e-8);
            assert_eq!(dmu[i], dz[i]);
        }
    }
}
