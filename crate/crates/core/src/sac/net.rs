//! Minimal dense networks with manual backprop, stored as flat parameter
//! vectors so that weight export and federation averaging are trivial.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected net: ReLU hidden layers, linear output. Parameters live
/// in one flat vector, layer by layer, weights (row-major out x in) then
/// biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Post-activation values per layer, kept for the backward pass.
pub struct ForwardCache {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("non-empty cache")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes
        .windows(2)
        .map(|w| w[0] * w[1] + w[1])
        .sum()
}

impl Mlp {
    /// He-uniform initialization.
    pub fn new<R: Rng>(sizes: Vec<usize>, rng: &mut R) -> Mlp {
        assert!(sizes.len() >= 2);
        let mut params = Vec::with_capacity(param_count(&sizes));
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / n_in as f64).sqrt();
            for _ in 0..n_in * n_out {
                params.push(rng.gen_range(-limit..limit));
            }
            params.extend(std::iter::repeat(0.0).take(n_out));
        }
        Mlp { sizes, params }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).activations.pop_output()
    }

    pub fn forward_cached(&self, input: &[f64]) -> ForwardCache {
        assert_eq!(input.len(), self.sizes[0]);
        let n_layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(self.sizes.len());
        activations.push(input.to_vec());
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let biases = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let prev = activations.last().expect("non-empty");
            let mut out = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &weights[o * n_in..(o + 1) * n_in];
                let mut z = biases[o];
                for (wi, xi) in row.iter().zip(prev.iter()) {
                    z += wi * xi;
                }
                if l + 1 < n_layers {
                    z = z.max(0.0); // ReLU on hidden layers
                }
                out.push(z);
            }
            activations.push(out);
        }
        ForwardCache { activations }
    }

    /// Backpropagates `d_output` (dL/d output) through the cached forward
    /// pass, accumulating parameter gradients into `grad`.
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        let n_layers = self.sizes.len() - 1;
        let mut layer_offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            layer_offsets.push(offset);
            offset += w[0] * w[1] + w[1];
        }

        let mut delta = d_output.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let base = layer_offsets[l];
            let input = &cache.activations[l];
            // dW, db
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut grad[base + o * n_in..base + (o + 1) * n_in];
                    for (g, xi) in row.iter_mut().zip(input.iter()) {
                        *g += d * xi;
                    }
                }
                grad[base + n_in * n_out + o] += d;
            }
            if l == 0 {
                break;
            }
            // d input, gated by the ReLU that produced this layer's input
            let weights = &self.params[base..base + n_in * n_out];
            let mut d_in = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    for (acc, wi) in d_in.iter_mut().zip(row.iter()) {
                        *acc += d * wi;
                    }
                }
            }
            for (di, h) in d_in.iter_mut().zip(input.iter()) {
                if *h <= 0.0 {
                    *di = 0.0;
                }
            }
            delta = d_in;
        }
    }
}

trait PopOutput {
    fn pop_output(self) -> Vec<f64>;
}

impl PopOutput for Vec<Vec<f64>> {
    fn pop_output(mut self) -> Vec<f64> {
        self.pop().expect("non-empty")
    }
}

/// Plain Adam optimizer over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n: usize) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_matches_hand_computation() {
        // 2-2-1 net with known weights.
        let mlp = Mlp {
            sizes: vec![2, 2, 1],
            // W0 = [[1, -1], [0.5, 0.5]], b0 = [0, -1], W1 = [[2, 3]], b1 = [0.25]
            params: vec![1.0, -1.0, 0.5, 0.5, 0.0, -1.0, 2.0, 3.0, 0.25],
        };
        let out = mlp.forward(&[1.0, 2.0]);
        // h = relu([1-2, 0.5+1-1]) = [0, 0.5]; y = 2*0 + 3*0.5 + 0.25
        assert!((out[0] - 1.75).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut mlp = Mlp::new(vec![3, 5, 2], &mut rng);
        let x = [0.3, -0.7, 1.1];
        // L = sum of outputs
        let loss = |m: &Mlp| m.forward(&x).iter().sum::<f64>();
        let mut grad = vec![0.0; mlp.n_params()];
        let cache = mlp.forward_cached(&x);
        mlp.backward(&cache, &[1.0, 1.0], &mut grad);

        let eps = 1e-6;
        for i in 0..mlp.n_params() {
            let orig = mlp.params[i];
            mlp.params[i] = orig + eps;
            let up = loss(&mlp);
            mlp.params[i] = orig - eps;
            let down = loss(&mlp);
            mlp.params[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            assert!(
                (grad[i] - numeric).abs() < 1e-6,
                "param {i}: analytic {} vs numeric {numeric}",
                grad[i]
            );
        }
    }

    #[test]
    fn adam_reduces_a_quadratic() {
        let mut adam = Adam::new(0.1, 1);
        let mut p = vec![5.0];
        for _ in 0..500 {
            let grad = vec![2.0 * p[0]];
            adam.step(&mut p, &grad);
        }
        assert!(p[0].abs() < 0.1);
    }
}
