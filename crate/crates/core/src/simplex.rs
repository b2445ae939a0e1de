//! Points of the probability simplex over `d` experts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the unit-sum constraint.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A probability distribution over `d` experts.
///
/// Entries are nonnegative and sum to one within [`SIMPLEX_TOL`]. Vertices of
/// the simplex (a single unit entry) identify individual experts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexPoint {
    weights: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::param("simplex point needs at least one coordinate"));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::param(format!(
                "weight {} at expert {} is not a nonnegative real",
                w,
                i + 1
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::param(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// The uniform distribution `(1/d, ..., 1/d)`.
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        Ok(Self {
            weights: vec![1.0 / d as f64; d],
        })
    }

    /// Vertex `c_n` of the simplex; `n` is 1-indexed.
    pub fn vertex(n: usize, d: usize) -> Result<Self> {
        if n == 0 || n > d {
            return Err(Error::Index { index: n, len: d });
        }
        let mut weights = vec![0.0; d];
        weights[n - 1] = 1.0;
        Ok(Self { weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `<self, v>`.
    pub fn dot(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim());
        self.weights.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// `‖self − other‖₁`.
    pub fn l1_distance(&self, other: &SimplexPoint) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// 1-indexed expert carrying the largest mass (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = i;
            }
        }
        best + 1
    }

    /// `(1 − eta)·self + eta·w`, renormalized to absorb rounding drift.
    pub fn convex_combination(&self, w: &SimplexPoint, eta: f64) -> Result<SimplexPoint> {
        convex_combination(self, w, eta)
    }
}

/// `(1 − eta)·x + eta·w` for `eta ∈ [0, 1]`.
pub fn convex_combination(x: &SimplexPoint, w: &SimplexPoint, eta: f64) -> Result<SimplexPoint> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::param(format!("step size {eta} outside [0, 1]")));
    }
    if x.dim() != w.dim() {
        return Err(Error::shape(format!(
            "combining points of dimension {} and {}",
            x.dim(),
            w.dim()
        )));
    }
    let mut weights: Vec<f64> = x
        .weights
        .iter()
        .zip(&w.weights)
        .map(|(a, b)| ((1.0 - eta) * a + eta * b).max(0.0))
        .collect();
    let sum: f64 = weights.iter().sum();
    if sum != 1.0 {
        weights.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(SimplexPoint { weights })
}

/// Free-function form of [`SimplexPoint::vertex`].
pub fn simplex_vertex(n: usize, d: usize) -> Result<SimplexPoint> {
    SimplexPoint::vertex(n, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vertices() {
        assert_eq!(simplex_vertex(1, 3).unwrap().weights(), &[1.0, 0.0, 0.0]);
        assert_eq!(simplex_vertex(3, 3).unwrap().weights(), &[0.0, 0.0, 1.0]);
        assert!(matches!(
            simplex_vertex(4, 3),
            Err(Error::Index { index: 4, len: 3 })
        ));
        assert!(simplex_vertex(0, 3).is_err());
    }

    #[test]
    fn combination_endpoints_and_midpoint() {
        let x = simplex_vertex(1, 2).unwrap();
        let w = simplex_vertex(2, 2).unwrap();
        assert_eq!(convex_combination(&x, &w, 0.0).unwrap(), x);
        assert_eq!(convex_combination(&x, &w, 1.0).unwrap(), w);
        assert_eq!(
            convex_combination(&x, &w, 0.5).unwrap().weights(),
            &[0.5, 0.5]
        );
    }

    #[test]
    fn combination_rejects_bad_eta() {
        let x = SimplexPoint::uniform(3).unwrap();
        assert!(matches!(
            convex_combination(&x, &x, 1.5),
            Err(Error::Parameter(_))
        ));
        assert!(convex_combination(&x, &x, -0.1).is_err());
        assert!(convex_combination(&x, &x, f64::NAN).is_err());
    }

    #[test]
    fn validation() {
        assert!(SimplexPoint::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
    }

    fn point(d: usize) -> impl Strategy<Value = SimplexPoint> {
        proptest::collection::vec(0.0f64..1.0, d).prop_map(|mut v| {
            v[0] += 1e-3;
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            SimplexPoint::new(v).unwrap()
        })
    }

    proptest! {
        #[test]
        fn combination_stays_on_simplex(
            (x, w) in (1usize..12).prop_flat_map(|d| (point(d), point(d))),
            eta in 0.0f64..=1.0,
        ) {
            let z = convex_combination(&x, &w, eta).unwrap();
            prop_assert!(z.weights().iter().all(|v| *v >= 0.0));
            prop_assert!((z.weights().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
            for i in 0..z.dim() {
                let expect = (1.0 - eta) * x.weights()[i] + eta * w.weights()[i];
                prop_assert!((z.weights()[i] - expect).abs() < 1e-12);
            }
        }
    }
}
