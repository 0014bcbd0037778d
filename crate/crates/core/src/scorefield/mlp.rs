//! Fully connected network with SiLU activations, flat parameter storage and
//! hand-written reverse-mode gradients.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Silu,
    Tanh,
}

impl Activation {
    fn code(self) -> u32 {
        match self {
            Activation::Silu => 0,
            Activation::Tanh => 1,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Silu),
            1 => Some(Activation::Tanh),
            _ => None,
        }
    }

    pub(crate) fn to_code(self) -> u32 {
        self.code()
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Silu => z / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s + z * s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Layer widths `[input, hidden..., output]` plus parameters laid out layer by
/// layer as row-major `W (out x in)` followed by `b (out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

pub fn parameter_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

/// Intermediate values kept for the backward pass.
pub struct Tape {
    /// Layer inputs, `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` initialization.
    pub fn new<R: Rng + ?Sized>(sizes: Vec<usize>, activation: Activation, rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let mut params = Vec::with_capacity(parameter_count(&sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] + w[1] {
                params.push(rng.gen_range(-bound..bound));
            }
        }
        Ok(Self { sizes, activation, params })
    }

    pub fn from_params(sizes: Vec<usize>, activation: Activation, params: Vec<f64>) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        let expected = parameter_count(&sizes);
        if params.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(Self { sizes, activation, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    fn layer_views(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.sizes.len() - 1);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            out.push((off, off + w[0] * w[1]));
            off += w[0] * w[1] + w[1];
        }
        out
    }

    /// Batched forward pass; rows are samples.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward_tape(x).0
    }

    pub fn forward_tape(&self, x: ArrayView2<f64>) -> (Array2<f64>, Tape) {
        let layers = self.layer_views();
        let last = layers.len() - 1;
        let mut inputs = Vec::with_capacity(layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut h = x.to_owned();
        for (l, &(w_off, b_off)) in layers.iter().enumerate() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[w_off..b_off]).expect("layer shape");
            let b = ArrayView1::from(&self.params[b_off..b_off + fan_out]);
            let mut z = h.dot(&w.t());
            z += &b;
            inputs.push(h);
            if l == last {
                h = z;
            } else {
                let act = self.activation;
                h = z.mapv(|v| act.apply(v));
                pre.push(z);
            }
        }
        (h, Tape { inputs, pre })
    }

    /// Parameter gradient given `dL/d(output)`.
    pub fn backward(&self, tape: &Tape, grad_out: Array2<f64>) -> Vec<f64> {
        let layers = self.layer_views();
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = grad_out;
        for l in (0..layers.len()).rev() {
            let (w_off, b_off) = layers[l];
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let gw = delta.t().dot(&tape.inputs[l]);
            grad[w_off..b_off].copy_from_slice(gw.as_slice().expect("standard layout"));
            let gb: Array1<f64> = delta.sum_axis(Axis(0));
            grad[b_off..b_off + fan_out].copy_from_slice(gb.as_slice().expect("contiguous"));
            if l > 0 {
                let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[w_off..b_off]).expect("layer shape");
                let mut d = delta.dot(&w);
                let act = self.activation;
                d.zip_mut_with(&tape.pre[l - 1], |g, &z| *g *= act.derivative(z));
                delta = d;
            }
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parameter_count_matches_layout() {
        assert_eq!(parameter_count(&[3, 4, 2]), 3 * 4 + 4 + 4 * 2 + 2);
        let m = Mlp::new(vec![5, 7, 7, 1], Activation::Silu, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(m.params().len(), parameter_count(&[5, 7, 7, 1]));
        assert!(Mlp::from_params(vec![2, 1], Activation::Silu, vec![0.0; 2]).is_err());
        assert!(Mlp::new(vec![2], Activation::Silu, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        for act in [Activation::Silu, Activation::Tanh] {
            for &z in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
                let h = 1e-6;
                let fd = (act.apply(z + h) - act.apply(z - h)) / (2.0 * h);
                assert!((fd - act.derivative(z)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = Mlp::new(vec![3, 6, 5, 2], Activation::Silu, &mut rng).unwrap();
        let x = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
        // L = sum(output^2) / 2, so dL/dout = out.
        let (out, tape) = m.forward_tape(x.view());
        let g = m.backward(&tape, out);
        for k in 0..m.params().len() {
            let h = 1e-5;
            let orig = m.params()[k];
            m.params_mut()[k] = orig + h;
            let lp = m.forward(x.view()).mapv(|v| v * v).sum() / 2.0;
            m.params_mut()[k] = orig - h;
            let lm = m.forward(x.view()).mapv(|v| v * v).sum() / 2.0;
            m.params_mut()[k] = orig;
            let fd = (lp - lm) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7 * (1.0 + g[k].abs()), "param {k}: {fd} vs {}", g[k]);
        }
    }
}
