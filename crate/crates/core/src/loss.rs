//! Loss abstractions: convex losses on the simplex (stochastic setting) and
//! per-expert loss vectors (oblivious setting).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::SimplexPoint;

/// A convex loss on the simplex with a value/gradient oracle and declared
/// ℓ1-Lipschitz (`alpha`) and ℓ1-smoothness (`beta`) constants.
pub trait StochasticLoss: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn eval(&self, x: &SimplexPoint) -> f64;

    /// Adds `scale · ∇l(x)` to `acc`.
    fn accumulate_grad(&self, x: &SimplexPoint, scale: f64, acc: &mut [f64]);

    fn alpha(&self) -> f64;

    fn beta(&self) -> f64;

    fn grad(&self, x: &SimplexPoint) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.accumulate_grad(x, 1.0, &mut g);
        g
    }

    /// Loss at every vertex `c_1..c_d`, i.e. the loss of each fixed expert.
    fn eval_vertices(&self) -> Vec<f64> {
        let d = self.dim();
        (1..=d)
            .map(|n| self.eval(&SimplexPoint::vertex(n, d).expect("vertex in range")))
            .collect()
    }
}

pub type LossRef = Arc<dyn StochasticLoss>;

/// Batch-mean gradient `(1/|B|) Σ_{l∈B} ∇l(x)` over `indices` of `dataset`.
pub fn batch_gradient(dataset: &[LossRef], indices: &[usize], x: &SimplexPoint) -> Vec<f64> {
    let mut g = vec![0.0; x.dim()];
    if indices.is_empty() {
        return g;
    }
    let scale = 1.0 / indices.len() as f64;
    for &i in indices {
        dataset[i].accumulate_grad(x, scale, &mut g);
    }
    g
}

/// Per-expert losses of one round, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExpertLossVector(Vec<f64>);

impl ExpertLossVector {
    pub fn new(losses: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = losses
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::param(format!(
                "loss {} of expert {} outside [0, 1]",
                v,
                i + 1
            )));
        }
        Ok(Self(losses))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Loss of 1-indexed expert `n`.
    pub fn get(&self, n: usize) -> f64 {
        self.0[n - 1]
    }
}

/// `l(x) = <c, x>`; α = max|c_n|, β = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLoss {
    coef: Vec<f64>,
}

impl LinearLoss {
    pub fn new(coef: Vec<f64>) -> Self {
        Self { coef }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }
}

impl From<&ExpertLossVector> for LinearLoss {
    fn from(v: &ExpertLossVector) -> Self {
        Self::new(v.as_slice().to_vec())
    }
}

impl StochasticLoss for LinearLoss {
    fn dim(&self) -> usize {
        self.coef.len()
    }

    fn eval(&self, x: &SimplexPoint) -> f64 {
        x.dot(&self.coef)
    }

    fn accumulate_grad(&self, _x: &SimplexPoint, scale: f64, acc: &mut [f64]) {
        for (a, c) in acc.iter_mut().zip(&self.coef) {
            *a += scale * c;
        }
    }

    fn alpha(&self) -> f64 {
        self.coef.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn beta(&self) -> f64 {
        0.0
    }

    fn eval_vertices(&self) -> Vec<f64> {
        self.coef.clone()
    }
}

/// Smoothed cross-entropy `l(x) = −Σ_k p_k ln((1−γ)x_k + γ/d)` against a
/// target distribution `p`.
///
/// Mixing with the uniform distribution keeps the argument of the logarithm at
/// least `γ/d`, which bounds the gradient: α = (1−γ)/(γ/d), β = α².
#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropyLoss {
    target: Vec<f64>,
    gamma: f64,
}

impl CrossEntropyLoss {
    pub fn new(target: SimplexPoint, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::param(format!(
                "smoothing gamma {gamma} outside (0, 1)"
            )));
        }
        Ok(Self {
            target: target.weights().to_vec(),
            gamma,
        })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn floor(&self) -> f64 {
        self.gamma / self.target.len() as f64
    }

    pub fn lipschitz_bound(gamma: f64, d: usize) -> f64 {
        (1.0 - gamma) / (gamma / d as f64)
    }
}

impl StochasticLoss for CrossEntropyLoss {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn eval(&self, x: &SimplexPoint) -> f64 {
        let (mix, floor) = (1.0 - self.gamma, self.floor());
        -self
            .target
            .iter()
            .zip(x.weights())
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, xk)| p * (mix * xk + floor).ln())
            .sum::<f64>()
    }

    fn accumulate_grad(&self, x: &SimplexPoint, scale: f64, acc: &mut [f64]) {
        let (mix, floor) = (1.0 - self.gamma, self.floor());
        for ((a, p), xk) in acc.iter_mut().zip(&self.target).zip(x.weights()) {
            *a -= scale * p * mix / (mix * xk + floor);
        }
    }

    fn alpha(&self) -> f64 {
        Self::lipschitz_bound(self.gamma, self.dim())
    }

    fn beta(&self) -> f64 {
        self.alpha().powi(2)
    }

    fn eval_vertices(&self) -> Vec<f64> {
        // At c_n the argument is (1−γ)+γ/d for k = n and γ/d elsewhere.
        let floor = self.floor();
        let (hi, lo) = ((1.0 - self.gamma + floor).ln(), floor.ln());
        self.target
            .iter()
            .map(|p| -(p * hi + (1.0 - p) * lo))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expert_loss_vector_range() {
        assert!(ExpertLossVector::new(vec![0.0, 1.0, 0.5]).is_ok());
        assert!(ExpertLossVector::new(vec![1.01]).is_err());
        assert!(ExpertLossVector::new(vec![-0.01]).is_err());
        assert!(ExpertLossVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn linear_gradient_is_coefficients() {
        let l = LinearLoss::new(vec![0.2, 0.7, 0.1]);
        let x = SimplexPoint::uniform(3).unwrap();
        assert_eq!(l.grad(&x), vec![0.2, 0.7, 0.1]);
        assert!((l.eval(&x) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_vertex_shortcut_matches_eval() {
        let p = SimplexPoint::new(vec![0.1, 0.6, 0.3]).unwrap();
        let l = CrossEntropyLoss::new(p, 0.05).unwrap();
        let fast = l.eval_vertices();
        for n in 1..=3 {
            let slow = l.eval(&SimplexPoint::vertex(n, 3).unwrap());
            assert!((fast[n - 1] - slow).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_rejects_gamma() {
        let p = SimplexPoint::uniform(2).unwrap();
        assert!(CrossEntropyLoss::new(p.clone(), 0.0).is_err());
        assert!(CrossEntropyLoss::new(p, 1.0).is_err());
    }

    #[test]
    fn empty_batch_gradient_is_zero() {
        let x = SimplexPoint::uniform(2).unwrap();
        assert_eq!(batch_gradient(&[], &[], &x), vec![0.0, 0.0]);
    }
}
