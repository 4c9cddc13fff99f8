//! Dense coefficient vectors in the spectral eigenbasis.
//!
//! A `CoeffVector` holds the coordinates of an element of the solution space (or
//! of the noise space) with respect to the Dirichlet eigenbasis `e_j` on (0,1).
//! Scalars are represented as one-dimensional vectors so functionals and fields
//! can share one value type.

use serde::{Deserialize, Serialize};

/// Coefficients `x_j` with respect to a fixed orthonormal eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffVector(pub Vec<f64>);

impl CoeffVector {
    pub fn zeros(dim: usize) -> Self {
        CoeffVector(vec![0.0; dim])
    }

    pub fn scalar(v: f64) -> Self {
        CoeffVector(vec![v])
    }

    /// The value of a one-dimensional vector.
    pub fn as_scalar(&self) -> f64 {
        assert_eq!(self.0.len(), 1, "not a scalar value");
        self.0[0]
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn add(&self, other: &CoeffVector) -> CoeffVector {
        assert_eq!(self.0.len(), other.0.len());
        CoeffVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &CoeffVector) -> CoeffVector {
        assert_eq!(self.0.len(), other.0.len());
        CoeffVector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: f64) -> CoeffVector {
        CoeffVector(self.0.iter().map(|a| c * a).collect())
    }

    /// Euclidean (H-space) inner product of the coefficient sequences.
    pub fn dot(&self, other: &CoeffVector) -> f64 {
        assert_eq!(self.0.len(), other.0.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// In-place `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &CoeffVector) {
        assert_eq!(self.0.len(), other.0.len());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    /// Largest relative component difference against `other`, with an absolute
    /// floor for components near zero. Used by exact-pathwise identity checks.
    pub fn rel_err(&self, other: &CoeffVector) -> f64 {
        assert_eq!(self.0.len(), other.0.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let scale = a.abs().max(b.abs()).max(1.0);
                (a - b).abs() / scale
            })
            .fold(0.0, f64::max)
    }
}

impl From<Vec<f64>> for CoeffVector {
    fn from(v: Vec<f64>) -> Self {
        CoeffVector(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_roundtrip() {
        let a = CoeffVector(vec![1.0, -2.0, 3.0]);
        let b = CoeffVector(vec![0.5, 0.25, -1.0]);
        let s = a.add(&b).sub(&b);
        assert_eq!(s, a);
        assert_eq!(a.dot(&b), 1.0 * 0.5 + -2.0 * 0.25 + 3.0 * -1.0);
    }

    #[test]
    fn rel_err_uses_absolute_floor_near_zero() {
        let a = CoeffVector(vec![0.0]);
        let b = CoeffVector(vec![1e-14]);
        assert!(a.rel_err(&b) < 1e-10);
    }
}
