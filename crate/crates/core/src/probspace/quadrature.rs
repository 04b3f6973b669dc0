//! Quadrature for E[g(M)] with M = exp(−y√v − v/2), y standard normal.
//!
//! Smooth payoffs use Gauss-Hermite nodes. A payoff with one kink at
//! M = K is integrated piecewise with composite Gauss-Legendre on each side
//! of the kink's preimage y_K = −(ln K + v/2)/√v, over a window wide enough
//! that the truncated Gaussian mass is below double precision.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{invalid, Error, Result};

/// Default node count.
pub const DEFAULT_NODES: usize = 200;

/// Nodes per Gauss-Legendre panel in the kinked rule.
const PANEL: usize = 20;

/// Half-width of the integration window in y, before the √v allowance.
const HALF_WIDTH: f64 = 14.0;

/// Gauss-Hermite rule for the weight e^{−x²}: (nodes, weights), weights
/// summing to √π. Golub-Welsch eigenvalues polished by Newton steps on the
/// orthonormal recurrence, which also yields the weights.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut x: Vec<f64> = nalgebra::SymmetricEigen::new(jacobi)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    x.sort_by(|a, b| b.total_cmp(a));
    let nf = n as f64;
    let eval = |z: f64| {
        let (mut p1, mut p2) = (PIM4, 0.0);
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        }
        (p1, (2.0 * nf).sqrt() * p2)
    };
    let mut w = vec![0.0; n];
    for (z, w) in x.iter_mut().zip(w.iter_mut()) {
        for _ in 0..3 {
            let (p, dp) = eval(*z);
            *z -= p / dp;
        }
        let (_, dp) = eval(*z);
        *w = 2.0 / (dp * dp);
    }
    // enforce exact symmetry
    for i in 0..n / 2 {
        let (z, wt) = (0.5 * (x[i] - x[n - 1 - i]), 0.5 * (w[i] + w[n - 1 - i]));
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = wt;
        w[n - 1 - i] = wt;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss-Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Nodes and weights of a rule.
type Rule = Arc<Vec<(f64, f64)>>;

/// Probabilists' rule (weights summing to one), cached per node count.
fn probabilists_hermite(nodes: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().expect("cache lock").get(&nodes) {
        return Arc::clone(rule);
    }
    let (x, w) = gauss_hermite(nodes);
    let norm = std::f64::consts::PI.sqrt();
    let rule: Rule = Arc::new(
        x.iter()
            .zip(&w)
            .map(|(&x, &w)| (std::f64::consts::SQRT_2 * x, w / norm))
            .collect(),
    );
    cache
        .lock()
        .expect("cache lock")
        .insert(nodes, Arc::clone(&rule));
    rule
}

/// Precomputed rules for lognormal expectations.
#[derive(Debug, Clone)]
pub struct LognormalQuadrature {
    nodes: usize,
    /// Probabilists' Hermite nodes and weights (weights sum to one).
    hermite: Rule,
    legendre: Vec<(f64, f64)>,
}

impl Default for LognormalQuadrature {
    fn default() -> Self {
        Self::new(DEFAULT_NODES).expect("default node count is valid")
    }
}

impl LognormalQuadrature {
    pub fn new(nodes: usize) -> Result<Self> {
        if !(PANEL..=2000).contains(&nodes) {
            return invalid(format!(
                "quadrature nodes must lie in [{PANEL}, 2000], got {nodes}"
            ));
        }
        let hermite = probabilists_hermite(nodes);
        let (x, w) = gauss_legendre(PANEL);
        Ok(Self {
            nodes,
            hermite,
            legendre: x.into_iter().zip(w).collect(),
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// E[payoff(M)] for a smooth payoff.
    pub fn expect(&self, v: f64, payoff: impl Fn(f64) -> f64) -> Result<f64> {
        if let Some(r) = degenerate(v, &payoff)? {
            return Ok(r);
        }
        let sv = v.sqrt();
        let mut acc = 0.0;
        for &(y, w) in self.hermite.iter() {
            if w == 0.0 {
                continue;
            }
            acc += w * checked(&payoff, (-y * sv - 0.5 * v).exp())?;
        }
        Ok(acc)
    }

    /// E[payoff(M)] for a payoff whose only kink sits at M = `kink`.
    /// A non-positive or non-finite kink is ignored.
    pub fn expect_kinked(&self, v: f64, kink: f64, payoff: impl Fn(f64) -> f64) -> Result<f64> {
        if let Some(r) = degenerate(v, &payoff)? {
            return Ok(r);
        }
        let sv = v.sqrt();
        let half = HALF_WIDTH + 2.0 * sv;
        let (lo, hi) = (-sv - half, -sv + half);
        let yk = if kink > 0.0 && kink.is_finite() {
            -(kink.ln() + 0.5 * v) / sv
        } else {
            f64::NAN
        };
        let panels = (self.nodes / PANEL).max(2);
        let f = |y: f64| -> Result<f64> {
            Ok(super::normal_pdf(y) * checked(&payoff, (-y * sv - 0.5 * v).exp())?)
        };
        if yk > lo && yk < hi {
            let left = (((yk - lo) / (hi - lo)) * panels as f64).round() as usize;
            let left = left.clamp(1, panels - 1);
            Ok(self.composite(lo, yk, left, &f)? + self.composite(yk, hi, panels - left, &f)?)
        } else {
            self.composite(lo, hi, panels, &f)
        }
    }

    fn composite(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        f: &impl Fn(f64) -> Result<f64>,
    ) -> Result<f64> {
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for k in 0..panels {
            let mid = a + (k as f64 + 0.5) * h;
            for &(x, w) in &self.legendre {
                acc += 0.5 * h * w * f(mid + 0.5 * h * x)?;
            }
        }
        Ok(acc)
    }
}

fn degenerate(v: f64, payoff: &impl Fn(f64) -> f64) -> Result<Option<f64>> {
    if !(v >= 0.0) || !v.is_finite() {
        return invalid(format!(
            "lognormal variance must be finite and ≥ 0, got {v}"
        ));
    }
    if v == 0.0 {
        return checked(payoff, 1.0).map(Some);
    }
    Ok(None)
}

fn checked(payoff: &impl Fn(f64) -> f64, m: f64) -> Result<f64> {
    let r = payoff(m);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::NonFinite(format!("payoff evaluated at m = {m}")))
    }
}
