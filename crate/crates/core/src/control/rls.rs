use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::{all_finite, Scalar};

/// Controller weights and the inverse approximate Hessian `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState<S> {
    pub w: Vec<S>,
    pub p: Matrix<S>,
    pub delta: S,
}

/// Speed and opacity weights of the training criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionWeights {
    pub eta_y: f64,
    pub eta_z: f64,
}

impl CriterionWeights {
    /// Speed weight fixed to one, opacity weight `eta_op`.
    pub fn opacity(eta_op: f64) -> Self {
        Self {
            eta_y: 1.0,
            eta_z: eta_op,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_y > 0.0 && self.eta_y.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta_y must be positive, got {}", self.eta_y)));
        }
        if !(self.eta_z >= 0.0 && self.eta_z.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eta_z must be non-negative, got {}",
                self.eta_z
            )));
        }
        Ok(())
    }
}

/// Error sensitivities `Ψ = ∂e/∂W` and errors for the speed (`y`) and
/// opacity (`z`) outputs at one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityPair<S> {
    pub psi_y: Vec<S>,
    pub psi_z: Vec<S>,
    pub e_y: S,
    pub e_z: S,
}

impl<S: Scalar> RlsState<S> {
    /// `P = δ·I`.
    pub fn new(w: Vec<S>, delta: S) -> Result<Self> {
        if !(delta > S::zero() && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        if !all_finite(&w) {
            return Err(Error::NonFinite("initial weights".into()));
        }
        let n = w.len();
        Ok(Self {
            w,
            p: Matrix::scaled_identity(n, delta),
            delta,
        })
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn reset_covariance(&mut self) {
        self.p = Matrix::scaled_identity(self.n(), self.delta);
    }

    fn check_psi(&self, psi: &[S], what: &str) -> Result<()> {
        if psi.len() != self.n() {
            return Err(Error::shape(format!(
                "{what} has {} entries for {} weights",
                psi.len(),
                self.n()
            )));
        }
        if !all_finite(psi) {
            return Err(Error::NonFinite(what.into()));
        }
        Ok(())
    }

    /// Rank-one inversion-lemma step `P ← P − PψψᵀP / (1 + ψᵀPψ)`.
    fn lemma(p: &mut Matrix<S>, psi: &[S]) -> Result<()> {
        let pp = p.mul_vec(psi);
        let denom = S::one() + dot(psi, &pp);
        if !(denom > S::zero() && denom.is_finite()) {
            return Err(Error::Numerical(format!("inversion lemma denominator {denom}")));
        }
        p.add_outer(-S::one() / denom, &pp, &pp);
        Ok(())
    }

    fn commit(&mut self, p: Matrix<S>, g: &[S]) -> Result<()> {
        let mut p = p;
        p.symmetrize();
        let step = p.mul_vec(g);
        let w: Vec<S> = self.w.iter().zip(&step).map(|(w, s)| *w - *s).collect();
        if !p.is_finite() || !all_finite(&w) {
            return Err(Error::NonFinite("RLS update".into()));
        }
        self.p = p;
        self.w = w;
        Ok(())
    }

    /// Single-output Gauss-Newton step: lemma update of `P`, then
    /// `W ← W − P e ψ`. On error the state is left unchanged.
    pub fn update_single(&mut self, e: S, psi: &[S]) -> Result<()> {
        self.check_psi(psi, "psi")?;
        if !e.is_finite() {
            return Err(Error::NonFinite("error signal".into()));
        }
        let mut p = self.p.clone();
        Self::lemma(&mut p, psi)?;
        let g: Vec<S> = psi.iter().map(|v| e * *v).collect();
        self.commit(p, &g)
    }

    /// Two-output step: lemma with `Ψ_y` then with `Ψ_z`, then
    /// `W ← W − P(η_y e_y Ψ_y + η_z e_z Ψ_z)`. The weights only enter the
    /// gradient term. On error the state is left unchanged.
    pub fn update_multi(&mut self, pair: &SensitivityPair<S>, weights: &CriterionWeights) -> Result<()> {
        self.check_psi(&pair.psi_y, "psi_y")?;
        self.check_psi(&pair.psi_z, "psi_z")?;
        if !(pair.e_y.is_finite() && pair.e_z.is_finite()) {
            return Err(Error::NonFinite("error signal".into()));
        }
        let mut p = self.p.clone();
        Self::lemma(&mut p, &pair.psi_y)?;
        Self::lemma(&mut p, &pair.psi_z)?;
        let ay = S::of(weights.eta_y) * pair.e_y;
        let az = S::of(weights.eta_z) * pair.e_z;
        let g: Vec<S> = pair
            .psi_y
            .iter()
            .zip(&pair.psi_z)
            .map(|(y, z)| ay * *y + az * *z)
            .collect();
        self.commit(p, &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stream(n: usize, len: usize, seed: u64) -> Vec<(f64, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| {
                let e = rng.random_range(-1.0..1.0);
                (e, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            })
            .collect()
    }

    #[test]
    fn zero_error_keeps_weights() {
        let mut s = RlsState::new(vec![0.3, -0.2, 0.1], 1000.0).unwrap();
        let p0 = s.p.clone();
        s.update_single(0.0, &[1.0, 0.5, -0.5]).unwrap();
        assert_eq!(s.w, vec![0.3, -0.2, 0.1]);
        assert_ne!(s.p, p0);
    }

    #[test]
    fn zero_psi_is_identity() {
        let mut s = RlsState::new(vec![0.3, -0.2, 0.1], 1000.0).unwrap();
        let before = s.clone();
        s.update_single(5.0, &[0.0; 3]).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn zero_weights_in_multi_keep_w() {
        let mut s = RlsState::new(vec![0.3, -0.2], 10.0).unwrap();
        let pair = SensitivityPair {
            psi_y: vec![1.0, 2.0],
            psi_z: vec![-1.0, 0.5],
            e_y: 0.7,
            e_z: -0.2,
        };
        s.update_multi(&pair, &CriterionWeights { eta_y: 0.0, eta_z: 0.0 }).unwrap();
        assert_eq!(s.w, vec![0.3, -0.2]);
    }

    #[test]
    fn non_finite_input_leaves_state() {
        let mut s = RlsState::new(vec![0.0; 2], 1.0).unwrap();
        let before = s.clone();
        assert!(s.update_single(f64::NAN, &[1.0, 1.0]).is_err());
        assert!(s.update_single(1.0, &[f64::INFINITY, 1.0]).is_err());
        assert!(s.update_single(1.0, &[1.0]).is_err());
        assert_eq!(s, before);
    }

    /// Steepest descent with a fixed step; the Gauss-Newton path with `P = I`
    /// and no covariance update.
    fn steepest_descent(w: &mut [f64], e: f64, psi: &[f64], mu: f64) {
        for (wi, p) in w.iter_mut().zip(psi) {
            *wi -= mu * e * p;
        }
    }

    #[test]
    fn first_step_matches_scaled_steepest_descent() {
        // With P0 = δI the first Gauss-Newton step is steepest descent with
        // step δ / (1 + δ ψᵀψ).
        let (e, psi) = (0.4, vec![0.2, -0.1, 0.3]);
        let delta = 50.0;
        let mut s = RlsState::new(vec![0.1, 0.2, 0.3], delta).unwrap();
        s.update_single(e, &psi).unwrap();
        let mut w = vec![0.1, 0.2, 0.3];
        let mu = delta / (1.0 + delta * dot(&psi, &psi));
        steepest_descent(&mut w, e, &psi, mu);
        for (a, b) in s.w.iter().zip(&w) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_match_explicit_inverse_recursion() {
        let n = 6;
        let delta = 1000.0;
        let mut s = RlsState::new(vec![0.0; n], delta).unwrap();
        let mut r = Matrix::scaled_identity(n, 1.0 / delta);
        let mut w = vec![0.0; n];
        for (e, psi) in stream(n, 100, 3) {
            s.update_single(e, &psi).unwrap();
            r.add_outer(1.0, &psi, &psi);
            let p = r.inverse().unwrap();
            let step = p.mul_vec(&psi);
            for (wi, si) in w.iter_mut().zip(&step) {
                *wi -= e * si;
            }
        }
        let scale = w.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in s.w.iter().zip(&w) {
            assert!((a - b).abs() / scale < 1e-8, "{a} vs {b}");
        }
    }
}
