//! Finite probability spaces and random variables on them.
//!
//! A [`FiniteSpace`] holds strictly positive weights summing to one, so the
//! essential infimum and supremum of a random variable are the minimum and
//! maximum of its values. [`RandomVariable`]s share their space through an
//! [`Arc`] and are immutable.

mod document;
mod normal;
mod quadrature;

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{invalid, Error, Result};

pub use document::{load_document, parse_document, SpaceDocument};
pub use normal::{black_scholes_call, d_minus, d_plus, normal_cdf, normal_pdf};
pub use quadrature::{gauss_hermite, gauss_legendre, LognormalQuadrature, DEFAULT_NODES};

/// Tolerance on the sum of probability weights.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// A finite outcome space with strictly positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSpace {
    probabilities: Vec<f64>,
}

impl FiniteSpace {
    /// Validates and wraps a weight vector.
    pub fn new(probabilities: Vec<f64>) -> Result<Arc<Self>> {
        if probabilities.is_empty() {
            return invalid("probabilities: at least one outcome is required");
        }
        for (i, &p) in probabilities.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return invalid(format!(
                    "probabilities: weight {i} is {p}, every weight must be strictly positive"
                ));
            }
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return invalid(format!(
                "probabilities: weights sum to {sum}, must sum to 1 within {PROB_SUM_TOL:e}"
            ));
        }
        Ok(Arc::new(Self { probabilities }))
    }

    /// `n` equally likely outcomes.
    pub fn uniform(n: usize) -> Result<Arc<Self>> {
        if n == 0 {
            return invalid("probabilities: at least one outcome is required");
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}

/// A real random variable on a [`FiniteSpace`].
#[derive(Debug, Clone)]
pub struct RandomVariable {
    values: Vec<f64>,
    space: Arc<FiniteSpace>,
}

impl RandomVariable {
    pub fn new(space: &Arc<FiniteSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::Dimension {
                expected: space.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("random variable value {i}")));
        }
        Ok(Self {
            values,
            space: Arc::clone(space),
        })
    }

    pub fn constant(space: &Arc<FiniteSpace>, c: f64) -> Self {
        Self {
            values: vec![c; space.len()],
            space: Arc::clone(space),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn space(&self) -> &Arc<FiniteSpace> {
        &self.space
    }

    pub fn probabilities(&self) -> &[f64] {
        self.space.probabilities()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when both variables live on the same weights.
    pub fn same_space(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || self.space == other.space
    }

    pub fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: other.len(),
            });
        }
        if !self.same_space(other) {
            return invalid("random variables live on different probability spaces");
        }
        Ok(())
    }

    /// Statewise transform.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            space: Arc::clone(&self.space),
        }
    }

    /// Statewise binary transform; fails on mismatched spaces.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            space: Arc::clone(&self.space),
        })
    }

    pub fn min(&self, c: f64) -> Self {
        self.map(|v| v.min(c))
    }

    pub fn max(&self, c: f64) -> Self {
        self.map(|v| v.max(c))
    }

    pub fn expect(&self) -> f64 {
        expect(self)
    }

    pub fn variance(&self) -> f64 {
        variance(self)
    }
}

fn assert_same(a: &RandomVariable, b: &RandomVariable) {
    assert!(
        a.len() == b.len() && a.same_space(b),
        "arithmetic on random variables from different spaces"
    );
}

macro_rules! binop {
    ($tr:ident, $method:ident, $op:tt) => {
        impl $tr<&RandomVariable> for &RandomVariable {
            type Output = RandomVariable;
            /// Panics when the operands live on different spaces; use
            /// [`RandomVariable::zip_map`] for a checked version.
            fn $method(self, rhs: &RandomVariable) -> RandomVariable {
                assert_same(self, rhs);
                RandomVariable {
                    values: self.values.iter().zip(&rhs.values).map(|(a, b)| a $op b).collect(),
                    space: Arc::clone(&self.space),
                }
            }
        }
        impl $tr<f64> for &RandomVariable {
            type Output = RandomVariable;
            fn $method(self, rhs: f64) -> RandomVariable {
                self.map(|a| a $op rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Mul<&RandomVariable> for f64 {
    type Output = RandomVariable;
    fn mul(self, rhs: &RandomVariable) -> RandomVariable {
        rhs.map(|v| self * v)
    }
}

impl Neg for &RandomVariable {
    type Output = RandomVariable;
    fn neg(self) -> RandomVariable {
        self.map(|v| -v)
    }
}

/// Σ values·weights.
pub fn expect(f: &RandomVariable) -> f64 {
    f.values
        .iter()
        .zip(f.probabilities())
        .map(|(v, p)| v * p)
        .sum()
}

/// E[f²] − E[f]², computed in centred form.
pub fn variance(f: &RandomVariable) -> f64 {
    let m = expect(f);
    f.values
        .iter()
        .zip(f.probabilities())
        .map(|(v, p)| p * (v - m) * (v - m))
        .sum()
}

pub fn covariance(f: &RandomVariable, g: &RandomVariable) -> Result<f64> {
    f.check_same_space(g)?;
    let mf = expect(f);
    let mg = expect(g);
    Ok(f.values
        .iter()
        .zip(&g.values)
        .zip(f.probabilities())
        .map(|((a, b), p)| p * (a - mf) * (b - mg))
        .sum())
}

/// Support minimum and maximum.
pub fn ess_bounds(f: &RandomVariable) -> (f64, f64) {
    f.values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// E[f · 1_A] / P(A) for the event given by `mask`; `None` when P(A) = 0.
pub fn conditional_expect(f: &RandomVariable, mask: &[bool]) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for ((v, p), &m) in f.values.iter().zip(f.probabilities()).zip(mask) {
        if m {
            num += v * p;
            den += p;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// P(A) for the event given by `mask`.
pub fn probability(space: &FiniteSpace, mask: &[bool]) -> f64 {
    space
        .probabilities()
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(p, _)| p)
        .sum()
}
