use super::{params::Parameters, xavier_init, Matrix, Rng};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// One affine layer, `weight` is `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Feed-forward network: tanh on hidden layers, configurable output activation
/// (identity unless a consumer needs otherwise).
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    output_activation: Activation,
}

/// Activations cached by [`Mlp::forward`]; `activations[0]` is the input and
/// `activations[i + 1]` the post-activation output of layer `i`.
#[derive(Clone, Debug)]
pub struct Tape {
    activations: Vec<Vec<f64>>,
}

impl Tape {
    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }

    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("tape is never empty")
    }
}

impl Mlp {
    /// Xavier-initialised weights and zero biases. `dims` lists every width
    /// from input to output, so `[4, 8, 2]` is one hidden layer of 8.
    pub fn new(dims: &[usize], output_activation: Activation, rng: &mut Rng) -> Result<Self> {
        validate_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| {
                Ok(Dense {
                    weight: xavier_init(w[0], w[1], rng)?,
                    bias: vec![0.0; w[1]],
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            layers,
            output_activation,
        })
    }

    pub fn zeros(dims: &[usize], output_activation: Activation) -> Result<Self> {
        validate_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| Dense {
                weight: Matrix::zeros(w[1], w[0]),
                bias: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self {
            layers,
            output_activation,
        })
    }

    pub fn from_layers(layers: Vec<Dense>, output_activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("an MLP needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weight.rows() {
                return Err(Error::invalid(format!(
                    "layer {i}: bias length {} does not match {} outputs",
                    l.bias.len(),
                    l.weight.rows()
                )));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].weight.rows() != w[1].weight.cols() {
                return Err(Error::invalid(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].weight.rows(),
                    i + 1,
                    w[1].weight.cols()
                )));
            }
        }
        Ok(Self {
            layers,
            output_activation,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            output_activation: self.output_activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.rows()
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output_activation
        } else {
            Activation::Tanh
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "MLP expects input of length {}, got {}",
                self.input_dim(),
                input.len()
            )));
        }
        Ok(())
    }

    /// Output only, without recording a tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation_of(i);
            let mut y = vec![0.0; layer.weight.rows()];
            layer.weight.matvec(&x, &mut y);
            for (v, b) in y.iter_mut().zip(&layer.bias) {
                *v = act.apply(*v + b);
            }
            x = y;
        }
        Ok(x)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation_of(i);
            let mut y = vec![0.0; layer.weight.rows()];
            layer.weight.matvec(&activations[i], &mut y);
            for (v, b) in y.iter_mut().zip(&layer.bias) {
                *v = act.apply(*v + b);
            }
            activations.push(y);
        }
        let out = activations[activations.len() - 1].clone();
        Ok((out, Tape { activations }))
    }

    /// Gradients of `output_grad . output` with respect to the input and all
    /// parameters.
    pub fn backward(&self, tape: &Tape, output_grad: &[f64]) -> Result<(Vec<f64>, Mlp)> {
        let mut grads = self.zeros_like();
        let input_grad = self.backward_into(tape, output_grad, &mut grads)?;
        Ok((input_grad, grads))
    }

    /// Like [`Mlp::backward`] but accumulates parameter gradients into `grads`.
    pub fn backward_into(
        &self,
        tape: &Tape,
        output_grad: &[f64],
        grads: &mut Mlp,
    ) -> Result<Vec<f64>> {
        if tape.activations.len() != self.layers.len() + 1
            || tape.input().len() != self.input_dim()
        {
            return Err(Error::invalid("tape does not come from this network"));
        }
        if output_grad.len() != self.output_dim() {
            return Err(Error::invalid(format!(
                "output gradient has length {}, network outputs {}",
                output_grad.len(),
                self.output_dim()
            )));
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::invalid("gradient buffer has the wrong layer count"));
        }
        let mut delta = output_grad.to_vec();
        for i in (0..self.layers.len()).rev() {
            let act = self.activation_of(i);
            let y = &tape.activations[i + 1];
            for (d, &yv) in delta.iter_mut().zip(y) {
                *d *= act.derivative_from_output(yv);
            }
            let x = &tape.activations[i];
            let g = &mut grads.layers[i];
            g.weight.add_outer(&delta, x);
            for (gb, d) in g.bias.iter_mut().zip(&delta) {
                *gb += d;
            }
            let mut prev = vec![0.0; x.len()];
            self.layers[i].weight.matvec_t_acc(&delta, &mut prev);
            delta = prev;
        }
        Ok(delta)
    }

    /// Zeroes the weights and bias of the final layer.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.len() - 1;
        let l = &mut self.layers[last];
        l.weight.data_mut().fill(0.0);
        l.bias.fill(0.0);
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::invalid("an MLP needs input and output widths"));
    }
    if dims.contains(&0) {
        return Err(Error::invalid(format!("zero-width layer in {dims:?}")));
    }
    Ok(())
}

impl Parameters for Mlp {
    fn visit(&self, f: &mut dyn FnMut(&str, usize, usize, &[f64])) {
        for (i, l) in self.layers.iter().enumerate() {
            f(
                &format!("layer{i}.weight"),
                l.weight.rows(),
                l.weight.cols(),
                l.weight.data(),
            );
            f(&format!("layer{i}.bias"), 1, l.bias.len(), &l.bias);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, usize, usize, &mut [f64])) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            let (r, c) = (l.weight.rows(), l.weight.cols());
            f(&format!("layer{i}.weight"), r, c, l.weight.data_mut());
            let n = l.bias.len();
            f(&format!("layer{i}.bias"), 1, n, &mut l.bias);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed_two_layer() -> Mlp {
        // 2 -> 2 (tanh) -> 1
        Mlp::from_layers(
            vec![
                Dense {
                    weight: Matrix::from_vec(2, 2, vec![0.5, -0.25, 0.1, 0.3]).unwrap(),
                    bias: vec![0.1, -0.2],
                },
                Dense {
                    weight: Matrix::from_vec(1, 2, vec![1.5, -0.7]).unwrap(),
                    bias: vec![0.05],
                },
            ],
            Activation::Identity,
        )
        .unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::zeros(&[3, 5, 2], Activation::Identity).unwrap();
        let (y, _) = net.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = Mlp::from_layers(
            vec![Dense {
                weight: Matrix::identity(3),
                bias: vec![0.0; 3],
            }],
            Activation::Identity,
        )
        .unwrap();
        assert_eq!(net.predict(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn two_layer_matches_hand_evaluation() {
        let net = fixed_two_layer();
        // h1 = tanh(0.5*1 - 0.25*2 + 0.1) = tanh(0.1)
        // h2 = tanh(0.1*1 + 0.3*2 - 0.2) = tanh(0.5)
        let expected = 1.5 * 0.1f64.tanh() - 0.7 * 0.5f64.tanh() + 0.05;
        let y = net.predict(&[1.0, 2.0]).unwrap();
        assert!((y[0] - expected).abs() < 1e-15);
        let (y2, tape) = net.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(y, y2);
        assert_eq!(tape.output(), &y[..]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net = fixed_two_layer();
        assert!(matches!(net.forward(&[1.0]), Err(Error::InvalidArgument(_))));
        let (_, tape) = net.forward(&[1.0, 2.0]).unwrap();
        assert!(net.backward(&tape, &[1.0, 1.0]).is_err());
        assert!(Mlp::zeros(&[3], Activation::Identity).is_err());
        assert!(Mlp::zeros(&[3, 0, 1], Activation::Identity).is_err());
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let net = fixed_two_layer();
        let (_, tape) = net.forward(&[0.3, -0.4]).unwrap();
        let (gx, grads) = net.backward(&tape, &[0.0]).unwrap();
        assert!(gx.iter().all(|&v| v == 0.0));
        assert!(grads.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_linear_gradients() {
        let net = Mlp::from_layers(
            vec![Dense {
                weight: Matrix::from_vec(1, 1, vec![2.0]).unwrap(),
                bias: vec![0.0],
            }],
            Activation::Identity,
        )
        .unwrap();
        let (_, tape) = net.forward(&[3.0]).unwrap();
        let (gx, grads) = net.backward(&tape, &[1.0]).unwrap();
        assert_eq!(gx, vec![2.0]);
        assert_eq!(grads.layers()[0].weight.get(0, 0), 3.0);
        assert_eq!(grads.layers()[0].bias[0], 1.0);
    }

    fn loss(net: &Mlp, x: &[f64], g: &[f64]) -> f64 {
        let y = net.predict(x).unwrap();
        y.iter().zip(g).map(|(a, b)| a * b).sum()
    }

    #[test]
    fn gradients_match_central_differences() {
        let eps = 1e-5;
        for seed in 0..5u64 {
            let mut rng = Rng::new(seed);
            for act in [Activation::Identity, Activation::Tanh] {
                let mut net = Mlp::new(&[3, 4, 5, 2], act, &mut rng).unwrap();
                // Non-zero biases so every parameter is exercised.
                net.visit_mut(&mut |_, _, _, d| {
                    for v in d.iter_mut() {
                        *v += 0.1;
                    }
                });
                let x = [0.3, -0.7, 0.5];
                let g = [0.9, -1.1];
                let (_, tape) = net.forward(&x).unwrap();
                let (gx, grads) = net.backward(&tape, &g).unwrap();

                let analytic = grads.flatten();
                let mut flat = net.flatten();
                for i in 0..flat.len() {
                    let orig = flat[i];
                    flat[i] = orig + eps;
                    net.assign(&flat);
                    let up = loss(&net, &x, &g);
                    flat[i] = orig - eps;
                    net.assign(&flat);
                    let down = loss(&net, &x, &g);
                    flat[i] = orig;
                    net.assign(&flat);
                    let fd = (up - down) / (2.0 * eps);
                    let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-8);
                    assert!(rel < 1e-6, "param {i}: fd={fd} analytic={}", analytic[i]);
                }
                for i in 0..x.len() {
                    let mut xp = x;
                    xp[i] += eps;
                    let mut xm = x;
                    xm[i] -= eps;
                    let fd = (loss(&net, &xp, &g) - loss(&net, &xm, &g)) / (2.0 * eps);
                    let rel = (fd - gx[i]).abs() / fd.abs().max(gx[i].abs()).max(1e-8);
                    assert!(rel < 1e-6, "input {i}: fd={fd} analytic={}", gx[i]);
                }
            }
        }
    }
}
