use super::tiles::SparseFeatures;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

fn sparse_dot(weights: &[f64], phi: &SparseFeatures) -> f64 {
    phi.indices().iter().map(|&i| weights[i]).sum()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let z = x.exp();
        z / (1.0 + z)
    }
}

/// Linear Q-value head with small random initial weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearQHead {
    weights: Vec<f64>,
}

impl LinearQHead {
    /// Weights drawn from uniform `[-0.01, 0.01]`.
    pub fn new(num_features: usize, rng: &mut SeededRng) -> Self {
        let weights = (0..num_features)
            .map(|_| rng.uniform_range(-0.01, 0.01))
            .collect();
        Self { weights }
    }

    pub fn from_weights(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn predict(&self, phi: &SparseFeatures) -> f64 {
        sparse_dot(&self.weights, phi)
    }

    /// Semi-gradient Q-learning step toward `r + gamma q(next)`.
    ///
    /// `next` holds the features of the greedy successor pair, `None` when
    /// the transition ended the episode. The step size is split across the
    /// active features. Returns the TD error.
    pub fn td_step(
        &mut self,
        phi: &SparseFeatures,
        reward: f64,
        next: Option<&SparseFeatures>,
        gamma: f64,
        alpha: f64,
    ) -> Result<f64> {
        let bootstrap = next.map_or(0.0, |n| self.predict(n));
        let delta = reward + gamma * bootstrap - self.predict(phi);
        if !delta.is_finite() {
            return Err(Error::Divergence(format!("linear Q TD error is {delta}")));
        }
        let step = alpha / phi.len() as f64 * delta;
        for &i in phi.indices() {
            self.weights[i] += step;
        }
        Ok(delta)
    }
}

/// Logistic E-value head; zero weights give `E = 0.5` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticEHead {
    weights: Vec<f64>,
}

impl LogisticEHead {
    pub fn new(num_features: usize) -> Self {
        Self {
            weights: vec![0.0; num_features],
        }
    }

    pub fn from_weights(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn predict(&self, phi: &SparseFeatures) -> f64 {
        sigmoid(sparse_dot(&self.weights, phi))
    }

    /// `ln E` without the round trip through `E` (no underflow for large
    /// negative pre-activations).
    pub fn ln_predict(&self, phi: &SparseFeatures) -> f64 {
        let x = sparse_dot(&self.weights, phi);
        // ln sigmoid(x) = -ln(1 + e^-x)
        if x >= 0.0 {
            -(-x).exp().ln_1p()
        } else {
            x - x.exp().ln_1p()
        }
    }

    /// SARSA step toward `gamma_E E(next)` through the logistic output:
    /// each active weight moves by `alpha/n * delta * E (1 - E)`.
    pub fn td_step(
        &mut self,
        phi: &SparseFeatures,
        next: Option<&SparseFeatures>,
        gamma_e: f64,
        alpha_e: f64,
    ) -> f64 {
        let target = next.map_or(0.0, |n| gamma_e * self.predict(n));
        let e = self.predict(phi);
        let delta = target - e;
        let step = alpha_e / phi.len() as f64 * delta * e * (1.0 - e);
        for &i in phi.indices() {
            self.weights[i] += step;
        }
        delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::TileCoder;
    use crate::env::ContinuousState;
    use crate::mdp::ActionId;
    use approx::assert_abs_diff_eq;

    fn phi() -> SparseFeatures {
        TileCoder::mountain_car().features(ContinuousState::new(-0.5, 0.0), ActionId(1))
    }

    #[test]
    fn zero_weight_predictions() {
        let n = TileCoder::mountain_car().num_features();
        assert_eq!(LogisticEHead::new(n).predict(&phi()), 0.5);
        assert_eq!(LinearQHead::from_weights(vec![0.0; n]).predict(&phi()), 0.0);
    }

    #[test]
    fn random_init_is_small() {
        let mut rng = SeededRng::new(0);
        let head = LinearQHead::new(1000, &mut rng);
        assert!(head.weights().iter().all(|w| w.abs() <= 0.01));
        assert!(head.weights().iter().any(|&w| w != 0.0));
    }

    #[test]
    fn logistic_of_ln3() {
        let n = TileCoder::mountain_car().num_features();
        let f = phi();
        let mut w = vec![0.0; n];
        for &i in f.indices() {
            w[i] = 3f64.ln() / f.len() as f64;
        }
        let head = LogisticEHead::from_weights(w);
        assert_abs_diff_eq!(head.predict(&f), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(head.ln_predict(&f), 0.75f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn terminal_q_step_from_zero() {
        let n = TileCoder::mountain_car().num_features();
        let mut head = LinearQHead::from_weights(vec![0.0; n]);
        let f = phi();
        head.td_step(&f, 1.0, None, 0.9, 0.1).unwrap();
        for &i in f.indices() {
            assert_abs_diff_eq!(head.weights()[i], 0.1 / 8.0, epsilon = 1e-15);
        }
        let before = head.clone();
        let q = head.predict(&f);
        let delta = head.td_step(&f, q, None, 0.9, 0.1).unwrap();
        assert_eq!(delta, 0.0);
        assert_eq!(head, before);
    }

    #[test]
    fn repeated_terminal_updates_converge() {
        let n = TileCoder::mountain_car().num_features();
        let mut head = LinearQHead::from_weights(vec![0.0; n]);
        let f = phi();
        for _ in 0..1000 {
            head.td_step(&f, 1.0, None, 0.9, 0.1).unwrap();
        }
        // q_k = 1 - 0.9^k
        assert_abs_diff_eq!(head.predict(&f), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn divergence_is_reported() {
        let mut head = LinearQHead::from_weights(vec![f64::MAX; 64 * 81 * 3]);
        let f = phi();
        assert!(head.td_step(&f, 0.0, None, 0.9, 0.1).is_err());
    }

    #[test]
    fn fresh_e_step_on_terminal() {
        let n = TileCoder::mountain_car().num_features();
        let mut head = LogisticEHead::new(n);
        let f = phi();
        head.td_step(&f, None, 0.9, 0.1);
        for &i in f.indices() {
            assert_abs_diff_eq!(head.weights()[i], -(0.1 / 8.0) * 0.5 * 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn repeated_terminal_e_steps_decrease() {
        let n = TileCoder::mountain_car().num_features();
        let mut head = LogisticEHead::new(n);
        let f = phi();
        let mut prev = head.predict(&f);
        for _ in 0..1000 {
            head.td_step(&f, None, 0.99, 0.1);
            let e = head.predict(&f);
            assert!(e < prev && e > 0.0);
            prev = e;
        }
    }

    #[test]
    fn zero_discount_matches_terminal() {
        let n = TileCoder::mountain_car().num_features();
        let coder = TileCoder::mountain_car();
        let f = phi();
        let g = coder.features(ContinuousState::new(0.1, 0.02), ActionId(0));
        let mut a = LogisticEHead::new(n);
        let mut b = LogisticEHead::new(n);
        a.td_step(&f, Some(&g), 0.0, 0.1);
        b.td_step(&f, None, 0.5, 0.1);
        assert_eq!(a, b);
    }
}
