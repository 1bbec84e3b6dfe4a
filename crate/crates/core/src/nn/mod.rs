//! Small dense networks with hand-written reverse-mode gradients.
//!
//! All parameters of a network live in one flat `Vec<f64>` so optimizers,
//! Polyak averaging and snapshots work on plain slices. Per layer the layout
//! is the row-major weight matrix (`out x in`), the bias, and, for hidden
//! layers of layer-normalized networks, the normalization gain and offset.

mod adam;
mod gaussian;
mod snapshot;

pub use adam::Adam;
pub use gaussian::{GaussianSample, PolicyHead, LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS};
pub use snapshot::{read_snapshot, write_snapshot};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub const INIT_STD: f64 = 0.1;
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Activation::Linear),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Parse(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerLayout {
    inputs: usize,
    outputs: usize,
    weights: usize,
    bias: usize,
    /// Gain and offset offsets for normalized hidden layers.
    norm: Option<(usize, usize)>,
}

/// Feed-forward network: affine -> (layer norm) -> ReLU for hidden layers,
/// affine -> `output` for the last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    layer_norm: bool,
    output: Activation,
    layout: Vec<LayerLayout>,
    pub params: Vec<f64>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    /// Post-normalization (or pre-activation) values of hidden layers.
    pre: Vec<Vec<f64>>,
    /// Normalized values and inverse std per normalized layer.
    norm: Vec<Option<(Vec<f64>, f64)>>,
    output: Vec<f64>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

fn build_layout(sizes: &[usize], layer_norm: bool) -> (Vec<LayerLayout>, usize) {
    let mut layout = Vec::with_capacity(sizes.len() - 1);
    let mut at = 0;
    let last = sizes.len() - 2;
    for (i, w) in sizes.windows(2).enumerate() {
        let (inputs, outputs) = (w[0], w[1]);
        let weights = at;
        at += inputs * outputs;
        let bias = at;
        at += outputs;
        let norm = if layer_norm && i < last {
            let g = at;
            at += 2 * outputs;
            Some((g, g + outputs))
        } else {
            None
        };
        layout.push(LayerLayout {
            inputs,
            outputs,
            weights,
            bias,
            norm,
        });
    }
    (layout, at)
}

impl Mlp {
    /// Zero-initialized network (normalization gains set to one).
    pub fn zeros(sizes: &[usize], layer_norm: bool, output: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Domain("a network needs at least two layer sizes".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::Domain("layer sizes must be positive".into()));
        }
        let (layout, n) = build_layout(sizes, layer_norm);
        let mut params = vec![0.0; n];
        for l in &layout {
            if let Some((g, _)) = l.norm {
                params[g..g + l.outputs].fill(1.0);
            }
        }
        Ok(Mlp {
            sizes: sizes.to_vec(),
            layer_norm,
            output,
            layout,
            params,
        })
    }

    /// Weights drawn from `N(0, std^2)`, zero biases, unit norm gains.
    pub fn new<R: Rng + ?Sized>(
        rng: &mut R,
        sizes: &[usize],
        layer_norm: bool,
        output: Activation,
        std: f64,
    ) -> Result<Self> {
        let mut net = Mlp::zeros(sizes, layer_norm, output)?;
        net.reinitialize(rng, std)?;
        Ok(net)
    }

    /// Redraws all weights and resets biases and normalization parameters.
    pub fn reinitialize<R: Rng + ?Sized>(&mut self, rng: &mut R, std: f64) -> Result<()> {
        let normal = Normal::new(0.0, std).map_err(|e| Error::Domain(e.to_string()))?;
        for l in &self.layout {
            for w in &mut self.params[l.weights..l.weights + l.inputs * l.outputs] {
                *w = normal.sample(rng);
            }
            self.params[l.bias..l.bias + l.outputs].fill(0.0);
            if let Some((g, o)) = l.norm {
                self.params[g..g + l.outputs].fill(1.0);
                self.params[o..o + l.outputs].fill(0.0);
            }
        }
        Ok(())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layer_norm(&self) -> bool {
        self.layer_norm
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Weight matrix of layer `i` as a row-major slice.
    pub fn weights(&self, i: usize) -> &[f64] {
        let l = &self.layout[i];
        &self.params[l.weights..l.weights + l.inputs * l.outputs]
    }

    pub fn weights_mut(&mut self, i: usize) -> &mut [f64] {
        let l = self.layout[i];
        &mut self.params[l.weights..l.weights + l.inputs * l.outputs]
    }

    pub fn bias(&self, i: usize) -> &[f64] {
        let l = &self.layout[i];
        &self.params[l.bias..l.bias + l.outputs]
    }

    pub fn bias_mut(&mut self, i: usize) -> &mut [f64] {
        let l = self.layout[i];
        &mut self.params[l.bias..l.bias + l.outputs]
    }

    pub fn forward(&self, x: &[f64]) -> Result<Cache> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let p = &self.params;
        let n_layers = self.layout.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut norm = Vec::with_capacity(n_layers - 1);
        let mut a = x.to_vec();
        for (i, l) in self.layout.iter().enumerate() {
            let w = &p[l.weights..l.weights + l.inputs * l.outputs];
            let b = &p[l.bias..l.bias + l.outputs];
            let mut z: Vec<f64> = w
                .chunks_exact(l.inputs)
                .zip(b)
                .map(|(row, &bi)| row.iter().zip(&a).map(|(w, x)| w * x).sum::<f64>() + bi)
                .collect();
            inputs.push(std::mem::take(&mut a));
            if i + 1 == n_layers {
                if self.output == Activation::Tanh {
                    z.iter_mut().for_each(|v| *v = v.tanh());
                }
                a = z;
                break;
            }
            if let Some((g, o)) = l.norm {
                let n = z.len() as f64;
                let mean = z.iter().sum::<f64>() / n;
                let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
                let xhat: Vec<f64> = z.iter().map(|v| (v - mean) * inv).collect();
                for (j, v) in z.iter_mut().enumerate() {
                    *v = p[g + j] * xhat[j] + p[o + j];
                }
                norm.push(Some((xhat, inv)));
            } else {
                norm.push(None);
            }
            a = z.iter().map(|v| v.max(0.0)).collect();
            pre.push(z);
        }
        Ok(Cache {
            inputs,
            pre,
            norm,
            output: a,
        })
    }

    /// Forward pass returning only the output.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.output)
    }

    /// Adds the parameter gradient of a scalar loss with output gradient
    /// `grad_out` into `grads` and returns the gradient with respect to the
    /// network input.
    pub fn backward(&self, cache: &Cache, grad_out: &[f64], grads: &mut [f64]) -> Result<Vec<f64>> {
        self.backward_impl(cache, grad_out, Some(grads))
    }

    /// Gradient with respect to the input only; parameter gradients are not
    /// formed.
    pub fn input_gradient(&self, cache: &Cache, grad_out: &[f64]) -> Result<Vec<f64>> {
        self.backward_impl(cache, grad_out, None)
    }

    fn backward_impl(
        &self,
        cache: &Cache,
        grad_out: &[f64],
        mut grads: Option<&mut [f64]>,
    ) -> Result<Vec<f64>> {
        if grad_out.len() != self.output_dim() {
            return Err(Error::Dimension {
                context: "output gradient",
                expected: self.output_dim(),
                got: grad_out.len(),
            });
        }
        if let Some(g) = &grads {
            if g.len() != self.params.len() {
                return Err(Error::Dimension {
                    context: "gradient buffer",
                    expected: self.params.len(),
                    got: g.len(),
                });
            }
        }
        if cache.inputs.len() != self.layout.len() || cache.output.len() != self.output_dim() {
            return Err(Error::Domain("cache does not belong to this network".into()));
        }
        let p = &self.params;
        let n_layers = self.layout.len();
        let mut delta: Vec<f64> = match self.output {
            Activation::Linear => grad_out.to_vec(),
            Activation::Tanh => grad_out
                .iter()
                .zip(&cache.output)
                .map(|(g, y)| g * (1.0 - y * y))
                .collect(),
        };
        for i in (0..n_layers).rev() {
            let l = &self.layout[i];
            if i + 1 < n_layers {
                // ReLU then the optional normalization.
                let z = &cache.pre[i];
                for (d, &v) in delta.iter_mut().zip(z) {
                    if v <= 0.0 {
                        *d = 0.0;
                    }
                }
                if let (Some((g, o)), Some((xhat, inv))) = (l.norm, &cache.norm[i]) {
                    let n = delta.len() as f64;
                    let mut dxhat = vec![0.0; delta.len()];
                    for j in 0..delta.len() {
                        dxhat[j] = delta[j] * p[g + j];
                    }
                    if let Some(grads) = grads.as_deref_mut() {
                        for j in 0..delta.len() {
                            grads[g + j] += delta[j] * xhat[j];
                            grads[o + j] += delta[j];
                        }
                    }
                    let s1: f64 = dxhat.iter().sum();
                    let s2: f64 = dxhat.iter().zip(xhat).map(|(d, x)| d * x).sum();
                    for j in 0..delta.len() {
                        delta[j] = inv / n * (n * dxhat[j] - s1 - xhat[j] * s2);
                    }
                }
            }
            let x = &cache.inputs[i];
            let w = &p[l.weights..l.weights + l.inputs * l.outputs];
            if let Some(grads) = grads.as_deref_mut() {
                let gw = &mut grads[l.weights..l.weights + l.inputs * l.outputs];
                for (r, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (gv, xv) in gw[r * l.inputs..(r + 1) * l.inputs].iter_mut().zip(x) {
                        *gv += d * xv;
                    }
                }
                for (gb, d) in grads[l.bias..l.bias + l.outputs].iter_mut().zip(&delta) {
                    *gb += d;
                }
            }
            let mut dx = vec![0.0; l.inputs];
            for (r, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (dv, wv) in dx.iter_mut().zip(&w[r * l.inputs..(r + 1) * l.inputs]) {
                    *dv += d * wv;
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// `target <- tau * self + (1 - tau) * target`.
    pub fn polyak_into(&self, target: &mut Mlp, tau: f64) -> Result<()> {
        polyak(&mut target.params, &self.params, tau)
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }
}

/// Elementwise `target <- tau * online + (1 - tau) * target`.
pub fn polyak(target: &mut [f64], online: &[f64], tau: f64) -> Result<()> {
    if target.len() != online.len() {
        return Err(Error::Dimension {
            context: "Polyak update",
            expected: target.len(),
            got: online.len(),
        });
    }
    for (t, &o) in target.iter_mut().zip(online) {
        *t = tau * o + (1.0 - tau) * *t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs().max(b.abs()).max(1e-8))
    }

    /// Scalar test loss `sum_i c_i y_i^2 / 2 + d_i y_i` and its output
    /// gradient.
    fn loss(y: &[f64]) -> (f64, Vec<f64>) {
        let mut l = 0.0;
        let mut g = Vec::with_capacity(y.len());
        for (i, &v) in y.iter().enumerate() {
            let c = 0.5 + 0.25 * i as f64;
            let d = 0.3 - 0.2 * i as f64;
            l += 0.5 * c * v * v + d * v;
            g.push(c * v + d);
        }
        (l, g)
    }

    fn check_gradients(net: &mut Mlp, x: &[f64]) {
        let cache = net.forward(x).unwrap();
        let (_, gout) = loss(cache.output());
        let mut grads = vec![0.0; net.num_params()];
        let gx = net.backward(&cache, &gout, &mut grads).unwrap();
        let h = 1e-6;
        for k in 0..net.num_params() {
            let orig = net.params[k];
            net.params[k] = orig + h;
            let lp = loss(&net.predict(x).unwrap()).0;
            net.params[k] = orig - h;
            let lm = loss(&net.predict(x).unwrap()).0;
            net.params[k] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                rel_err(grads[k], fd) <= 1e-6 || (grads[k] - fd).abs() < 1e-10,
                "param {k}: analytic {} vs fd {fd}",
                grads[k]
            );
        }
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            xp[i] = x[i] + h;
            let lp = loss(&net.predict(&xp).unwrap()).0;
            xp[i] = x[i] - h;
            let lm = loss(&net.predict(&xp).unwrap()).0;
            xp[i] = x[i];
            let fd = (lp - lm) / (2.0 * h);
            assert!(rel_err(gx[i], fd) <= 1e-6 || (gx[i] - fd).abs() < 1e-10);
        }
    }

    fn random_input(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = stream(seed, Stream::Policy);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (ln, act) in [
            (false, Activation::Linear),
            (false, Activation::Tanh),
            (true, Activation::Linear),
            (true, Activation::Tanh),
        ] {
            let mut rng = stream(21, Stream::AgentInit);
            // Larger init keeps the ReLUs away from their kinks in practice.
            let mut net = Mlp::new(&mut rng, &[6, 8, 8, 4], ln, act, 0.5).unwrap();
            if ln {
                for v in net.params.iter_mut() {
                    *v += 0.05;
                }
            }
            check_gradients(&mut net, &random_input(1, 6));
        }
    }

    #[test]
    fn init_statistics() {
        let mut rng = stream(2, Stream::AgentInit);
        let net = Mlp::new(&mut rng, &[512, 512], false, Activation::Linear, INIT_STD).unwrap();
        let w = net.weights(0);
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let sd = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((0.095..=0.105).contains(&sd));
        assert!(net.bias(0).iter().all(|&b| b == 0.0));
        let again =
            Mlp::new(&mut stream(2, Stream::AgentInit), &[512, 512], false, Activation::Linear, INIT_STD)
                .unwrap();
        assert_eq!(net, again);
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 5, 2], false, Activation::Linear).unwrap();
        assert_eq!(net.predict(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn relu_identity_net() {
        let mut net = Mlp::zeros(&[1, 1, 1], false, Activation::Linear).unwrap();
        net.weights_mut(0)[0] = 1.0;
        net.weights_mut(1)[0] = 1.0;
        assert_eq!(net.predict(&[-3.0]).unwrap(), vec![0.0]);
        assert_eq!(net.predict(&[2.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn layer_norm_standardizes() {
        let mut rng = stream(4, Stream::AgentInit);
        let net = Mlp::new(&mut rng, &[5, 16, 3], true, Activation::Linear, 0.5).unwrap();
        let cache = net.forward(&random_input(3, 5)).unwrap();
        let (xhat, inv) = cache.norm[0].as_ref().unwrap();
        let n = xhat.len() as f64;
        let mean = xhat.iter().sum::<f64>() / n;
        let var = xhat.iter().map(|v| v * v).sum::<f64>() / n;
        assert!(mean.abs() < 1e-12);
        // var(xhat) = var / (var + eps) exactly; eps keeps it just under one.
        let raw_var = (1.0 / (inv * inv)) - LAYER_NORM_EPS;
        assert!((var - raw_var / (raw_var + LAYER_NORM_EPS)).abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-3);
    }

    #[test]
    fn linear_input_gradient_is_transpose_action() {
        let mut rng = stream(5, Stream::AgentInit);
        let net = Mlp::new(&mut rng, &[3, 2], false, Activation::Linear, 1.0).unwrap();
        let cache = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let g = [0.7, -1.3];
        let mut grads = vec![0.0; net.num_params()];
        let gx = net.backward(&cache, &g, &mut grads).unwrap();
        let w = net.weights(0);
        for i in 0..3 {
            let want = w[i] * g[0] + w[3 + i] * g[1];
            assert!((gx[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn input_gradient_matches_full_backward() {
        let mut rng = stream(7, Stream::AgentInit);
        let net = Mlp::new(&mut rng, &[5, 9, 9, 1], true, Activation::Linear, 0.4).unwrap();
        let cache = net.forward(&random_input(5, 5)).unwrap();
        let mut grads = vec![0.0; net.num_params()];
        let full = net.backward(&cache, &[-0.25], &mut grads).unwrap();
        assert_eq!(net.input_gradient(&cache, &[-0.25]).unwrap(), full);
    }

    #[test]
    fn zero_output_gradient_gives_zero_gradients() {
        let mut rng = stream(6, Stream::AgentInit);
        let net = Mlp::new(&mut rng, &[4, 8, 2], true, Activation::Tanh, 0.3).unwrap();
        let cache = net.forward(&random_input(2, 4)).unwrap();
        let mut grads = vec![0.0; net.num_params()];
        let gx = net.backward(&cache, &[0.0, 0.0], &mut grads).unwrap();
        assert!(grads.iter().all(|&v| v == 0.0));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forward_checks_dimensions() {
        let net = Mlp::zeros(&[3, 2], false, Activation::Linear).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(Error::Dimension { .. })));
        let other = Mlp::zeros(&[3, 4, 2], false, Activation::Linear).unwrap();
        let cache = other.forward(&[0.0; 3]).unwrap();
        let mut grads = vec![0.0; net.num_params()];
        assert!(net.backward(&cache, &[0.0, 0.0], &mut grads).is_err());
        assert!(Mlp::zeros(&[3], false, Activation::Linear).is_err());
    }

    #[test]
    fn polyak_examples() {
        let mut t = vec![0.0, 5.0];
        polyak(&mut t, &[2.0, 1.0], 1.0).unwrap();
        assert_eq!(t, vec![2.0, 1.0]);
        let mut t = vec![0.0, 5.0];
        polyak(&mut t, &[2.0, 1.0], 0.0).unwrap();
        assert_eq!(t, vec![0.0, 5.0]);
        let mut t = vec![0.0];
        polyak(&mut t, &[2.0], 0.001).unwrap();
        assert!((t[0] - 0.002).abs() < 1e-18);
        assert!(polyak(&mut t, &[1.0, 2.0], 0.5).is_err());
    }
}
