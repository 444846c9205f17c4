//! Small dense networks with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected layer, `weight` stored row-major as `outputs x inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weight = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Dense {
            inputs,
            outputs,
            weight,
            bias: vec![0.0; outputs],
        }
    }

    pub fn forward(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inputs);
        debug_assert_eq!(y.len(), self.outputs);
        for (o, out) in y.iter_mut().enumerate() {
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            *out = self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients into `grad` and, when requested,
    /// input gradients into `dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        for (o, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let row = &mut grad.weight[o * self.inputs..(o + 1) * self.inputs];
            for (w, v) in row.iter_mut().zip(x) {
                *w += g * v;
            }
        }
        if let Some(dx) = dx {
            for (o, &g) in dy.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
                for (d, w) in dx.iter_mut().zip(row) {
                    *d += g * w;
                }
            }
        }
    }
}

/// One tanh hidden layer followed by a linear output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub hidden: Dense,
    pub output: Dense,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpTrace {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpShape {
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
}

impl Mlp {
    pub fn zeros(shape: MlpShape) -> Self {
        Mlp {
            hidden: Dense::zeros(shape.inputs, shape.hidden),
            output: Dense::zeros(shape.hidden, shape.outputs),
        }
    }

    pub fn init<R: Rng + ?Sized>(shape: MlpShape, rng: &mut R) -> Self {
        Mlp {
            hidden: Dense::init(shape.inputs, shape.hidden, rng),
            output: Dense::init(shape.hidden, shape.outputs, rng),
        }
    }

    pub fn shape(&self) -> MlpShape {
        MlpShape {
            inputs: self.hidden.inputs,
            hidden: self.hidden.outputs,
            outputs: self.output.outputs,
        }
    }

    pub fn forward(&self, x: &[f64]) -> MlpTrace {
        let mut hidden = vec![0.0; self.hidden.outputs];
        self.hidden.forward(x, &mut hidden);
        for h in &mut hidden {
            *h = h.tanh();
        }
        let mut output = vec![0.0; self.output.outputs];
        self.output.forward(&hidden, &mut output);
        MlpTrace { hidden, output }
    }

    pub fn backward(
        &self,
        x: &[f64],
        trace: &MlpTrace,
        d_output: &[f64],
        grad: &mut Mlp,
        dx: Option<&mut [f64]>,
    ) {
        let mut d_hidden = vec![0.0; self.hidden.outputs];
        self.output
            .backward(&trace.hidden, d_output, &mut grad.output, Some(&mut d_hidden));
        for (d, h) in d_hidden.iter_mut().zip(&trace.hidden) {
            *d *= 1.0 - h * h;
        }
        self.hidden.backward(x, &d_hidden, &mut grad.hidden, dx);
    }

    /// Parameter tensors in a fixed order.
    pub fn tensors(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("hidden.weight", &self.hidden.weight),
            ("hidden.bias", &self.hidden.bias),
            ("output.weight", &self.output.weight),
            ("output.bias", &self.output.bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 4] {
        [
            ("hidden.weight", &mut self.hidden.weight),
            ("hidden.bias", &mut self.hidden.bias),
            ("output.weight", &mut self.output.weight),
            ("output.bias", &mut self.output.bias),
        ]
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = p.iter().sum();
    for v in &mut p {
        *v /= sum;
    }
    p
}

/// `log softmax`, computed without going through `ln(p)`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn softmax_normalizes() {
        let p = softmax(&[1000.0, 999.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let lp = log_softmax(&[1000.0, 999.0, -5.0]);
        for (a, b) in p.iter().zip(&lp) {
            assert!((a.ln() - b).abs() < 1e-9 || *a == 0.0);
        }
    }

    #[test]
    fn mlp_backward_matches_finite_differences() {
        let mut r = rng::stream(3, "nn-test", &[]);
        let shape = MlpShape {
            inputs: 3,
            hidden: 5,
            outputs: 2,
        };
        let mut mlp = Mlp::init(shape, &mut r);
        for b in &mut mlp.hidden.bias {
            *b = r.random_range(-0.5..0.5);
        }
        let x = [0.3, -0.7, 1.1];
        let c = [0.4, -1.3];
        let loss = |m: &Mlp| -> f64 {
            m.forward(&x)
                .output
                .iter()
                .zip(&c)
                .map(|(o, c)| o * c)
                .sum()
        };
        let trace = mlp.forward(&x);
        let mut grad = Mlp::zeros(shape);
        let mut dx = vec![0.0; 3];
        mlp.backward(&x, &trace, &c, &mut grad, Some(&mut dx));
        let eps = 1e-6;
        for t in 0..4 {
            let len = mlp.tensors()[t].1.len();
            for k in 0..len {
                let mut plus = mlp.clone();
                plus.tensors_mut()[t].1[k] += eps;
                let mut minus = mlp.clone();
                minus.tensors_mut()[t].1[k] -= eps;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
                assert!((fd - grad.tensors()[t].1[k]).abs() < 1e-7);
            }
        }
    }
}
