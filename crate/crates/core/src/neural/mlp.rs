use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{all_finite, sigmoid, Scalar};

/// One-hidden-layer perceptron with logistic hidden units and a linear output.
///
/// Parameters are stored as a single flat vector, hidden unit by hidden unit
/// (`n_in` input weights followed by the bias), then the `n_hidden` output
/// weights and the output bias:
///
/// ```text
/// [w_00 .. w_0(n_in-1) b_0 | .. | w_(H-1)0 .. b_(H-1) | v_0 .. v_(H-1) c]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<S> {
    n_in: usize,
    n_hidden: usize,
    weights: Vec<S>,
}

/// Output, input gradient and parameter gradient from one forward pass.
#[derive(Debug, Clone)]
pub struct MlpEval<S> {
    pub output: S,
    pub input_jacobian: Vec<S>,
    pub weight_jacobian: Vec<S>,
}

pub fn param_count(n_in: usize, n_hidden: usize) -> usize {
    n_hidden * (n_in + 1) + n_hidden + 1
}

impl<S: Scalar> Mlp<S> {
    pub fn zeros(n_in: usize, n_hidden: usize) -> Self {
        Self {
            n_in,
            n_hidden,
            weights: vec![S::zero(); param_count(n_in, n_hidden)],
        }
    }

    pub fn from_weights(n_in: usize, n_hidden: usize, weights: Vec<S>) -> Result<Self> {
        let p = param_count(n_in, n_hidden);
        if weights.len() != p {
            return Err(Error::shape(format!(
                "expected {p} weights for {n_in}-{n_hidden}-1 network, got {}",
                weights.len()
            )));
        }
        if !all_finite(&weights) {
            return Err(Error::NonFinite("network weights".into()));
        }
        Ok(Self {
            n_in,
            n_hidden,
            weights,
        })
    }

    /// Uniform weights in `[-0.5, 0.5]` from a seeded generator.
    pub fn random(n_in: usize, n_hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_with(n_in, n_hidden, &mut rng)
    }

    pub fn random_with<R: Rng + ?Sized>(n_in: usize, n_hidden: usize, rng: &mut R) -> Self {
        let weights = (0..param_count(n_in, n_hidden))
            .map(|_| S::of(rng.random_range(-0.5..=0.5)))
            .collect();
        Self {
            n_in,
            n_hidden,
            weights,
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_params(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: &[S]) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::shape(format!(
                "expected {} weights, got {}",
                self.weights.len(),
                weights.len()
            )));
        }
        if !all_finite(weights) {
            return Err(Error::NonFinite("network weights".into()));
        }
        self.weights.copy_from_slice(weights);
        Ok(())
    }

    /// Index of the output bias in the flat parameter vector.
    pub fn output_bias_index(&self) -> usize {
        self.weights.len() - 1
    }

    /// Index of the output weight of hidden unit `j`.
    pub fn output_weight_index(&self, j: usize) -> usize {
        self.n_hidden * (self.n_in + 1) + j
    }

    /// Index of the weight from input `i` to hidden unit `j`.
    pub fn hidden_weight_index(&self, j: usize, i: usize) -> usize {
        j * (self.n_in + 1) + i
    }

    pub fn hidden_bias_index(&self, j: usize) -> usize {
        j * (self.n_in + 1) + self.n_in
    }

    fn check_input(&self, x: &[S]) -> Result<()> {
        if x.len() != self.n_in {
            return Err(Error::shape(format!(
                "network expects {} inputs, got {}",
                self.n_in,
                x.len()
            )));
        }
        Ok(())
    }

    fn hidden_activations(&self, x: &[S]) -> Vec<S> {
        let stride = self.n_in + 1;
        (0..self.n_hidden)
            .map(|j| {
                let w = &self.weights[j * stride..(j + 1) * stride];
                let a = w[..self.n_in]
                    .iter()
                    .zip(x)
                    .fold(w[self.n_in], |acc, (&wi, &xi)| acc + wi * xi);
                sigmoid(a)
            })
            .collect()
    }

    fn output_from_hidden(&self, h: &[S]) -> S {
        let off = self.n_hidden * (self.n_in + 1);
        let v = &self.weights[off..off + self.n_hidden];
        v.iter()
            .zip(h)
            .fold(self.weights[off + self.n_hidden], |acc, (&vj, &hj)| {
                acc + vj * hj
            })
    }

    pub fn forward(&self, x: &[S]) -> Result<S> {
        self.check_input(x)?;
        let h = self.hidden_activations(x);
        Ok(self.output_from_hidden(&h))
    }

    /// `∂y/∂x_i` for every input.
    pub fn input_jacobian(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_input(x)?;
        let h = self.hidden_activations(x);
        Ok(self.input_jacobian_from_hidden(&h))
    }

    /// `∂y/∂θ_j` for every parameter, in storage order.
    pub fn weight_jacobian(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_input(x)?;
        let h = self.hidden_activations(x);
        Ok(self.weight_jacobian_from_hidden(x, &h))
    }

    /// Forward pass together with both Jacobians, sharing the hidden layer.
    pub fn eval(&self, x: &[S]) -> Result<MlpEval<S>> {
        self.check_input(x)?;
        let h = self.hidden_activations(x);
        Ok(MlpEval {
            output: self.output_from_hidden(&h),
            input_jacobian: self.input_jacobian_from_hidden(&h),
            weight_jacobian: self.weight_jacobian_from_hidden(x, &h),
        })
    }

    fn input_jacobian_from_hidden(&self, h: &[S]) -> Vec<S> {
        let stride = self.n_in + 1;
        let off = self.n_hidden * stride;
        let mut g = vec![S::zero(); self.n_in];
        for (j, &hj) in h.iter().enumerate() {
            let delta = self.weights[off + j] * hj * (S::one() - hj);
            if delta == S::zero() {
                continue;
            }
            let w = &self.weights[j * stride..j * stride + self.n_in];
            for (gi, &wi) in g.iter_mut().zip(w) {
                *gi += delta * wi;
            }
        }
        g
    }

    fn weight_jacobian_from_hidden(&self, x: &[S], h: &[S]) -> Vec<S> {
        let stride = self.n_in + 1;
        let off = self.n_hidden * stride;
        let mut g = vec![S::zero(); self.weights.len()];
        for (j, &hj) in h.iter().enumerate() {
            let delta = self.weights[off + j] * hj * (S::one() - hj);
            let row = &mut g[j * stride..(j + 1) * stride];
            for (gi, &xi) in row.iter_mut().zip(x) {
                *gi = delta * xi;
            }
            row[self.n_in] = delta;
            g[off + j] = hj;
        }
        g[off + self.n_hidden] = S::one();
        g
    }

    /// Converts the weights to another scalar type.
    pub fn cast<T: Scalar>(&self) -> Mlp<T> {
        Mlp {
            n_in: self.n_in,
            n_hidden: self.n_hidden,
            weights: self.weights.iter().map(|w| T::of(w.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_layout() {
        let net = Mlp::<f64>::zeros(3, 4);
        assert_eq!(net.n_params(), 4 * 4 + 5);
        assert_eq!(net.hidden_weight_index(1, 2), 6);
        assert_eq!(net.hidden_bias_index(1), 7);
        assert_eq!(net.output_weight_index(0), 16);
        assert_eq!(net.output_bias_index(), 20);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Mlp::<f64>::zeros(4, 3);
        assert_eq!(net.forward(&[1.0, -2.0, 3.0, 9.0]).unwrap(), 0.0);
        assert!(net
            .input_jacobian(&[1.0, 2.0, 3.0, 4.0])
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn half_activation_case() {
        // hidden weight 0, hidden bias 0, output weight 2, output bias 1
        let net = Mlp::from_weights(1, 1, vec![0.0, 0.0, 2.0, 1.0]).unwrap();
        assert_eq!(net.forward(&[5.0]).unwrap(), 2.0);
    }

    #[test]
    fn rejects_wrong_input_length() {
        let net = Mlp::<f64>::random(3, 2, 1);
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
        assert!(net.input_jacobian(&[1.0; 4]).is_err());
        assert!(net.weight_jacobian(&[]).is_err());
    }

    #[test]
    fn rejects_non_finite_weights() {
        assert!(matches!(
            Mlp::from_weights(1, 1, vec![0.0, f64::NAN, 1.0, 0.0]),
            Err(Error::NonFinite(_))
        ));
        let mut net = Mlp::<f64>::zeros(1, 1);
        assert!(net.set_weights(&[0.0, 0.0, f64::INFINITY, 0.0]).is_err());
        assert!(net.weights().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn bias_and_output_weight_derivatives() {
        let net = Mlp::<f64>::random(3, 5, 17);
        let x = [0.3, -1.2, 0.8];
        let g = net.weight_jacobian(&x).unwrap();
        assert_eq!(g[net.output_bias_index()], 1.0);
        let h = net.hidden_activations(&x);
        for (j, hj) in h.iter().enumerate() {
            assert_eq!(g[net.output_weight_index(j)], *hj);
        }
    }

    #[test]
    fn zero_output_weights_give_zero_input_jacobian() {
        let mut net = Mlp::<f64>::random(4, 3, 5);
        let mut w = net.weights().to_vec();
        for j in 0..3 {
            w[net.output_weight_index(j)] = 0.0;
        }
        net.set_weights(&w).unwrap();
        assert!(net
            .input_jacobian(&[0.1, 0.2, 0.3, 0.4])
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn seeded_initialisation_is_reproducible_and_bounded() {
        let a = Mlp::<f64>::random(5, 8, 99);
        let b = Mlp::<f64>::random(5, 8, 99);
        assert_eq!(a, b);
        assert!(a.weights().iter().all(|w| w.abs() <= 0.5));
        assert_ne!(a, Mlp::<f64>::random(5, 8, 100));
    }

    #[test]
    fn single_precision_tracks_double() {
        let a = Mlp::<f64>::random(3, 6, 2);
        let b: Mlp<f32> = a.cast();
        let x = [0.4, -0.7, 1.1];
        let xf = [0.4f32, -0.7, 1.1];
        let ya = a.forward(&x).unwrap();
        let yb = b.forward(&xf).unwrap();
        assert!((ya - yb as f64).abs() < 1e-5);
    }
}
