//! Small multilayer perceptron over one-hot pixel inputs.
//!
//! The input layer is sparse: an example is the list of active input
//! indices (each with value 1). Hidden layers use ReLU; the output layer is
//! linear. Weights are stored input-major (`w[i * out + j]`) followed by the
//! biases of each layer.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Pre-activations of every layer for one example.
#[derive(Debug, Clone)]
pub struct Trace {
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

impl Mlp {
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let n = Self::param_count(&sizes);
        Self {
            sizes,
            params: vec![0.0; n],
        }
    }

    /// He-uniform hidden layers; the output layer starts near zero so that
    /// initial policies are close to uniform and initial values close to 0.
    /// `active_inputs` is the number of ones per example, used as fan-in of
    /// the sparse first layer.
    pub fn random<R: Rng + ?Sized>(sizes: Vec<usize>, active_inputs: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let layers = net.sizes.len() - 1;
        let mut offset = 0;
        for l in 0..layers {
            let (inp, out) = (net.sizes[l], net.sizes[l + 1]);
            let fan_in = if l == 0 { active_inputs.max(1) } else { inp };
            let bound = if l + 1 == layers {
                0.01
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            for w in &mut net.params[offset..offset + inp * out] {
                *w = rng.random_range(-bound..bound);
            }
            offset += inp * out + out;
        }
        net
    }

    pub fn from_params(sizes: Vec<usize>, params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && Self::param_count(&sizes) == params.len()).then_some(Self { sizes, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
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
        *self.sizes.last().unwrap()
    }

    fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.sizes
            .windows(2)
            .map(|w| {
                let weights = off;
                let biases = off + w[0] * w[1];
                off = biases + w[1];
                (weights, biases)
            })
            .collect()
    }

    pub fn forward(&self, active: &[usize]) -> Trace {
        let offsets = self.layer_offsets();
        let mut pre = Vec::with_capacity(offsets.len());
        for (l, &(w_off, b_off)) in offsets.iter().enumerate() {
            let (inp, out) = (self.sizes[l], self.sizes[l + 1]);
            let mut z = self.params[b_off..b_off + out].to_vec();
            if l == 0 {
                for &i in active {
                    debug_assert!(i < inp);
                    let row = &self.params[w_off + i * out..w_off + (i + 1) * out];
                    z.iter_mut().zip(row).for_each(|(z, w)| *z += w);
                }
            } else {
                let prev: &Vec<f64> = &pre[l - 1];
                for (i, &x) in prev.iter().enumerate() {
                    let a = relu(x);
                    if a == 0.0 {
                        continue;
                    }
                    let row = &self.params[w_off + i * out..w_off + (i + 1) * out];
                    z.iter_mut().zip(row).for_each(|(z, w)| *z += a * w);
                }
            }
            pre.push(z);
        }
        Trace { pre }
    }

    pub fn output(&self, active: &[usize]) -> Vec<f64> {
        self.forward(active).output().to_vec()
    }

    /// Accumulates `dL/dparams` into `grad` given `dL/doutput`.
    pub fn backward(&self, active: &[usize], trace: &Trace, grad_out: &[f64], grad: &mut [f64]) {
        let offsets = self.layer_offsets();
        let mut delta = grad_out.to_vec();
        for l in (0..offsets.len()).rev() {
            let (w_off, b_off) = offsets[l];
            let (inp, out) = (self.sizes[l], self.sizes[l + 1]);
            grad[b_off..b_off + out]
                .iter_mut()
                .zip(&delta)
                .for_each(|(g, d)| *g += d);
            if l == 0 {
                for &i in active {
                    grad[w_off + i * out..w_off + (i + 1) * out]
                        .iter_mut()
                        .zip(&delta)
                        .for_each(|(g, d)| *g += d);
                }
            } else {
                let prev = &trace.pre[l - 1];
                let mut next_delta = vec![0.0; inp];
                for i in 0..inp {
                    let a = relu(prev[i]);
                    let row = w_off + i * out;
                    if a != 0.0 {
                        grad[row..row + out]
                            .iter_mut()
                            .zip(&delta)
                            .for_each(|(g, d)| *g += a * d);
                    }
                    if prev[i] > 0.0 {
                        next_delta[i] = self.params[row..row + out]
                            .iter()
                            .zip(&delta)
                            .map(|(w, d)| w * d)
                            .sum();
                    }
                }
                delta = next_delta;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_layout() {
        assert_eq!(Mlp::param_count(&[4, 3, 2]), 4 * 3 + 3 + 3 * 2 + 2);
        assert!(Mlp::from_params(vec![2, 1], vec![0.0; 2]).is_none());
        assert!(Mlp::from_params(vec![2, 1], vec![0.0; 3]).is_some());
    }

    #[test]
    fn linear_forward_by_hand() {
        // in=3, out=2: w = [[1,2],[3,4],[5,6]], b = [0.5, -0.5]
        let net = Mlp::from_params(vec![3, 2], vec![1., 2., 3., 4., 5., 6., 0.5, -0.5]).unwrap();
        assert_eq!(net.output(&[0, 2]), vec![6.5, 7.5]);
        assert_eq!(net.output(&[]), vec![0.5, -0.5]);
    }

    #[test]
    fn relu_hidden_layer_by_hand() {
        // in=2 -> hidden=2 -> out=1
        let params = vec![
            1.0, -1.0, // input 0
            2.0, -3.0, // input 1
            0.0, 0.0, // hidden biases
            1.0, 10.0, // hidden -> out
            0.25, // out bias
        ];
        let net = Mlp::from_params(vec![2, 2, 1], params).unwrap();
        // active {0,1}: z_h = [3, -4] -> a_h = [3, 0] -> out = 3 + 0.25
        assert_eq!(net.output(&[0, 1]), vec![3.25]);
    }

    #[test]
    fn random_init_is_seeded() {
        let a = Mlp::random(vec![10, 4, 2], 3, &mut ChaCha8Rng::seed_from_u64(5));
        let b = Mlp::random(vec![10, 4, 2], 3, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert!(a.params().iter().all(|p| p.is_finite()));
    }
}
