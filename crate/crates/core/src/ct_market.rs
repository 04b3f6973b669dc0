//! Deterministic-coefficient Black-Scholes market.
//!
//! Coefficients r, σ and ϑ are piecewise-linear curves on [0, T]. The
//! state-price density is Λ_t = exp(−∫₀ᵗ ϑ dW − ½∫₀ᵗ ϑ²), so that
//! Λ_T/Λ_t is lognormal with log-variance ∫ₜᵀ ϑ² and mean one.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Continuous piecewise-linear curve given by knots; constant beyond the
/// first and last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct Curve {
    knots: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for Curve {
    type Error = Error;
    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        Curve::new(knots)
    }
}

impl From<Curve> for Vec<(f64, f64)> {
    fn from(c: Curve) -> Self {
        c.knots
    }
}

impl Curve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return invalid("curve needs at least one knot");
        }
        if knots.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return invalid("curve knots must be finite");
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return invalid("curve knot times must be strictly increasing");
        }
        Ok(Self { knots })
    }

    pub fn constant(v: f64) -> Self {
        Self {
            knots: vec![(0.0, v)],
        }
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = &self.knots;
        if t <= k[0].0 {
            return k[0].1;
        }
        let last = k[k.len() - 1];
        if t >= last.0 {
            return last.1;
        }
        let i = k.partition_point(|(s, _)| *s <= t);
        let (t0, v0) = k[i - 1];
        let (t1, v1) = k[i];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Breakpoints of the integrand on [a, b], endpoints included.
    fn pieces(&self, a: f64, b: f64) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(a)
            .chain(
                self.knots
                    .iter()
                    .map(|k| k.0)
                    .filter(move |&t| t > a && t < b),
            )
            .chain(std::iter::once(b))
    }

    /// Sum of `f(t0, t1)` over consecutive breakpoints on [a, b].
    fn over_pieces(&self, a: f64, b: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut it = self.pieces(a, b);
        let mut prev = it.next().unwrap_or(a);
        it.map(|t| {
            let v = f(prev, t);
            prev = t;
            v
        })
        .sum()
    }

    /// ∫ₐᵇ curve, exact on each linear piece.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        self.over_pieces(a, b, |t0, t1| {
            0.5 * (t1 - t0) * (self.eval(t0) + self.eval(t1))
        })
    }

    /// ∫ₐᵇ curve², exact on each linear piece.
    pub fn integrate_sq(&self, a: f64, b: f64) -> f64 {
        self.over_pieces(a, b, |t0, t1| {
            let (y0, y1) = (self.eval(t0), self.eval(t1));
            (t1 - t0) * (y0 * y0 + y0 * y1 + y1 * y1) / 3.0
        })
    }

    fn min_over(&self, a: f64, b: f64) -> f64 {
        self.pieces(a, b)
            .map(|t| self.eval(t))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Market coefficients on [0, T].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MarketSpec")]
pub struct CtMarket {
    r: Curve,
    sigma: Curve,
    theta: Curve,
    horizon: f64,
}

#[derive(Deserialize)]
struct MarketSpec {
    r: Curve,
    sigma: Curve,
    #[serde(alias = "theta_mkt")]
    theta: Curve,
    #[serde(alias = "T")]
    horizon: f64,
}

impl TryFrom<MarketSpec> for CtMarket {
    type Error = Error;
    fn try_from(s: MarketSpec) -> Result<Self> {
        CtMarket::new(s.r, s.sigma, s.theta, s.horizon)
    }
}

/// Smallest admissible volatility.
pub const SIGMA_FLOOR: f64 = 1e-8;

impl CtMarket {
    pub fn new(r: Curve, sigma: Curve, theta: Curve, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return invalid(format!("horizon T must be positive, got {horizon}"));
        }
        if sigma.min_over(0.0, horizon) <= SIGMA_FLOOR {
            return invalid("sigma must stay above 1e-8 on [0, T]");
        }
        if theta.min_over(0.0, horizon) < 0.0 {
            return invalid("market price of risk must be nonnegative on [0, T]");
        }
        Ok(Self {
            r,
            sigma,
            theta,
            horizon,
        })
    }

    /// Constant coefficients.
    pub fn constant(r: f64, sigma: f64, theta: f64, horizon: f64) -> Result<Self> {
        Self::new(
            Curve::constant(r),
            Curve::constant(sigma),
            Curve::constant(theta),
            horizon,
        )
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn r_at(&self, t: f64) -> f64 {
        self.r.eval(t)
    }

    pub fn sigma_at(&self, t: f64) -> f64 {
        self.sigma.eval(t)
    }

    pub fn theta_at(&self, t: f64) -> f64 {
        self.theta.eval(t)
    }

    pub fn r_curve(&self) -> &Curve {
        &self.r
    }

    pub fn sigma_curve(&self) -> &Curve {
        &self.sigma
    }

    pub fn theta_curve(&self) -> &Curve {
        &self.theta
    }

    pub(crate) fn check(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return invalid(format!("time {t} outside [0, {}]", self.horizon));
        }
        Ok(())
    }

    /// ∫ₜᵀ r.
    pub fn int_r(&self, t: f64) -> f64 {
        self.r.integrate(t, self.horizon)
    }

    /// ∫ₜᵀ ϑ².
    pub fn int_theta2(&self, t: f64) -> f64 {
        self.theta.integrate_sq(t, self.horizon)
    }

    /// ∫ₜᵀ curve for a checked t.
    pub fn integrate(&self, curve: &Curve, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(curve.integrate(t, self.horizon))
    }
}

/// Closed-form models of the floor ζ in continuous time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ZetaModel {
    /// ζ ≡ ζ₀ ∈ [0, 1).
    Constant { zeta0: f64 },
    /// ζ = a + b Λ_T with a, b ≥ 0 and a + b < 1.
    AffineLambda { a: f64, b: f64 },
}

impl ZetaModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ZetaModel::Constant { zeta0 } if (0.0..1.0).contains(&zeta0) => Ok(()),
            ZetaModel::Constant { zeta0 } => {
                invalid(format!("zeta0 must lie in [0, 1), got {zeta0}"))
            }
            ZetaModel::AffineLambda { a, b } if a >= 0.0 && b >= 0.0 && a + b < 1.0 => Ok(()),
            ZetaModel::AffineLambda { a, b } => invalid(format!(
                "affine zeta needs a, b ≥ 0 and a + b < 1, got a={a}, b={b}"
            )),
        }
    }

    /// (a, b) with ζ = a + bΛ_T.
    pub fn coefficients(&self) -> (f64, f64) {
        match *self {
            ZetaModel::Constant { zeta0 } => (zeta0, 0.0),
            ZetaModel::AffineLambda { a, b } => (a, b),
        }
    }

    /// E[ζ].
    pub fn mean(&self) -> f64 {
        let (a, b) = self.coefficients();
        a + b
    }

    /// κ = 1 − E[ζ].
    pub fn kappa(&self) -> f64 {
        1.0 - self.mean()
    }

    /// ζ given the terminal density level Λ_T.
    pub fn at_terminal(&self, lambda_t: f64) -> f64 {
        let (a, b) = self.coefficients();
        a + b * lambda_t
    }

    /// E[ζ | F_t] given Λ_t.
    pub fn cond_mean(&self, lam: f64) -> f64 {
        let (a, b) = self.coefficients();
        a + b * lam
    }

    /// η_t in dE[ζ|F_t] = η_t dW_t.
    pub fn eta(&self, market: &CtMarket, t: f64, lam: f64) -> f64 {
        let (_, b) = self.coefficients();
        -b * lam * market.theta_at(t)
    }

    /// E[ζ² | F_t].
    pub fn cond_second_moment(&self, market: &CtMarket, t: f64, lam: f64) -> f64 {
        let (a, b) = self.coefficients();
        a * a + 2.0 * a * b * lam + b * b * lam * lam * market.int_theta2(t).exp()
    }

    /// E^P̃[ζ | F_t], the conditional mean under dP̃/dP = Λ_T.
    pub fn tilde_cond_mean(&self, market: &CtMarket, t: f64, lam: f64) -> f64 {
        let (a, b) = self.coefficients();
        a + b * lam * market.int_theta2(t).exp()
    }

    /// η̃_t in dE^P̃[ζ|F_t] = η̃_t (dW_t + ϑ_t dt).
    pub fn eta_tilde(&self, market: &CtMarket, t: f64, lam: f64) -> f64 {
        let (_, b) = self.coefficients();
        -b * market.theta_at(t) * lam * market.int_theta2(t).exp()
    }
}

/// c* = x₀e^{∫₀ᵀ r} + (e^{∫₀ᵀ ϑ²} − 1)/θ.
pub fn mv_cstar(market: &CtMarket, theta: f64, x0: f64) -> f64 {
    x0 * market.int_r(0.0).exp() + (market.int_theta2(0.0).exp() - 1.0) / theta
}

/// −(ϑ_t/σ_t)(x e^{∫ₜᵀ r} − c − 1/θ) e^{−∫ₜᵀ r}.
pub fn mv_feedback(market: &CtMarket, theta: f64, c: f64, t: f64, x: f64) -> Result<f64> {
    market.check(t)?;
    let sigma = market.sigma_at(t);
    if sigma == 0.0 {
        return Err(Error::Validation(format!("sigma vanishes at t = {t}")));
    }
    let g = market.int_r(t).exp();
    Ok(-(market.theta_at(t) / sigma) * (x * g - c - 1.0 / theta) / g)
}

/// Whether ζ ≤ Λ_T almost surely, in which case SMMV and MV agree.
pub fn consistency_condition(market: &CtMarket, zeta: &ZetaModel) -> bool {
    let degenerate = market.int_theta2(0.0) == 0.0;
    match *zeta {
        // Λ_T ≡ 1 and ζ < 1 by construction
        _ if degenerate => zeta.mean() <= 1.0,
        ZetaModel::Constant { zeta0 } => zeta0 == 0.0,
        ZetaModel::AffineLambda { a, b } => a == 0.0 && b <= 1.0,
    }
}
