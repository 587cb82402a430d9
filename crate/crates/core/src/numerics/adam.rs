use super::Parameters;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction:
///
/// ```text
/// m <- b1 m + (1 - b1) g
/// v <- b2 v + (1 - b2) g^2
/// p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// ```
///
/// `weight_decay` adds an L2 term `wd * p` to the gradient before the moment
/// updates. Moment buffers are flat and follow the parameters' visit order.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    shapes: Vec<(usize, usize)>,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            shapes: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One descent step on `params` along `grads`.
    pub fn step<P: Parameters>(
        &mut self,
        params: &mut P,
        grads: &P,
        lr: f64,
        weight_decay: f64,
    ) -> Result<()> {
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be >= 0, got {lr}")));
        }
        let mut shapes = Vec::new();
        params.visit(&mut |_, r, c, _| shapes.push((r, c)));
        let mut grad_shapes = Vec::new();
        grads.visit(&mut |_, r, c, _| grad_shapes.push((r, c)));
        if shapes != grad_shapes {
            return Err(Error::invalid("gradient shapes do not match parameters"));
        }
        let g = grads.flatten();
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient entry {} at flat index {i}",
                g[i]
            )));
        }
        if self.step == 0 {
            self.shapes = shapes;
            self.m = vec![0.0; g.len()];
            self.v = vec![0.0; g.len()];
        } else if self.shapes != shapes {
            return Err(Error::invalid("parameter shapes changed between Adam steps"));
        }

        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut offset = 0;
        params.visit_mut(&mut |_, _, _, data| {
            for p in data.iter_mut() {
                let i = offset;
                offset += 1;
                let gi = g[i] + weight_decay * *p;
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Activation, Mlp, Rng};

    struct Scalar(f64);

    impl Parameters for Scalar {
        fn visit(&self, f: &mut dyn FnMut(&str, usize, usize, &[f64])) {
            f("x", 1, 1, std::slice::from_ref(&self.0));
        }
        fn visit_mut(&mut self, f: &mut dyn FnMut(&str, usize, usize, &mut [f64])) {
            f("x", 1, 1, std::slice::from_mut(&mut self.0));
        }
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut net = Mlp::new(&[3, 4, 2], Activation::Identity, &mut Rng::new(0)).unwrap();
        let before = net.clone();
        let grads = net.zeros_like();
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..3 {
            adam.step(&mut net, &grads, 0.1, 0.0).unwrap();
        }
        assert_eq!(net, before);
        assert_eq!(adam.step_count(), 3);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        for g in [0.3, -2.0, 1e3] {
            let mut p = Scalar(1.0);
            let mut adam = Adam::new(AdamConfig::default());
            adam.step(&mut p, &Scalar(g), 0.01, 0.0).unwrap();
            // m_hat = g, v_hat = g^2, so the step is lr * |g| / (|g| + eps)
            let expected = 0.01 * g.abs() / (g.abs() + 1e-8);
            assert!(((1.0 - p.0).abs() - expected).abs() < 1e-15);
            assert_eq!((1.0 - p.0).signum(), g.signum());
        }
    }

    #[test]
    fn non_finite_gradient_is_numerical_error() {
        let mut p = Scalar(1.0);
        let mut adam = Adam::new(AdamConfig::default());
        let err = adam.step(&mut p, &Scalar(f64::NAN), 0.01, 0.0).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        assert_eq!(p.0, 1.0);
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut p = Scalar(2.0);
            let mut adam = Adam::new(AdamConfig::default());
            let mut traj = Vec::new();
            for _ in 0..50 {
                let g = Scalar(2.0 * p.0 - 1.0);
                adam.step(&mut p, &g, 0.05, 1e-3).unwrap();
                traj.push(p.0.to_bits());
            }
            traj
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut p = Scalar(5.0);
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..2000 {
            let g = Scalar(2.0 * (p.0 - 1.5));
            adam.step(&mut p, &g, 0.05, 0.0).unwrap();
        }
        assert!((p.0 - 1.5).abs() < 1e-3);
    }
}
