//! Closed-form saddle points and value fields of the continuous-time game.
//!
//! The investor controls the risky amount π in
//! dX = rX ds + πσ(dW + ϑ ds); the adversary controls γ in dZ = γ dW.
//! Conditional quantities of ζ are read off the [`ZetaModel`] at the
//! current density level Λ_s, which is carried in [`GameState`].

mod duality;

pub use duality::{
    black_scholes_form_excluded, linear_regime_holds, solve_constant_zeta_bs,
    solve_embedding_duality, system_residuals, terminal_z_and_strategy, w_lower_bound, w_natural,
    DualityContext, EmbeddingDualitySolution, EmbeddingStrategy, Regime, SolverPath, TerminalZ,
    RESIDUAL_TOL,
};

use crate::ct_market::{mv_feedback, CtMarket, ZetaModel};
use crate::error::{invalid, Result};

/// (t, x, z) together with the density level Λ_t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameState {
    pub t: f64,
    pub x: f64,
    pub z: f64,
    /// Λ_t; equal to one at t = 0.
    pub lambda: f64,
}

impl GameState {
    /// State at time zero, where Λ₀ = 1.
    pub fn initial(x: f64, z: f64) -> Self {
        Self {
            t: 0.0,
            x,
            z,
            lambda: 1.0,
        }
    }

    pub fn validate(&self, market: &CtMarket) -> Result<()> {
        if !(self.t >= 0.0 && self.t < market.horizon()) {
            return invalid(format!("state time {} outside [0, T)", self.t));
        }
        if !(self.z >= 0.0) {
            return invalid(format!("adversary state z must be ≥ 0, got {}", self.z));
        }
        if !(self.lambda > 0.0) || !self.x.is_finite() {
            return invalid("state needs finite x and Λ_t > 0");
        }
        Ok(())
    }
}

/// Quadratic penalty (ρ/2)E[(X_T − c)²].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub rho: f64,
    pub c: f64,
}

impl PenaltyParams {
    pub fn new(rho: f64, c: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() || !c.is_finite() {
            return invalid(format!(
                "penalty needs rho > 0 and finite c, got rho={rho}, c={c}"
            ));
        }
        Ok(Self { rho, c })
    }
}

/// A feedback pair (π, γ) evaluated along a path.
pub trait Strategy: Sync {
    fn pi(&self, s: &GameState) -> f64;
    fn gamma(&self, s: &GameState) -> f64;
}

/// Evaluation of a saddle point at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddlePoint {
    pub pi: f64,
    pub gamma: f64,
    pub value: f64,
}

fn check_theta(theta: f64, zeta: &ZetaModel) -> Result<()> {
    if !(theta > 0.0) || !theta.is_finite() {
        return invalid(format!("theta must be positive, got {theta}"));
    }
    zeta.validate()
}

/// Saddle point of the game without the constraint Z ≥ 0.
#[derive(Debug, Clone)]
pub struct Unconstrained {
    market: CtMarket,
    theta: f64,
    zeta: ZetaModel,
}

impl Unconstrained {
    pub fn new(market: &CtMarket, theta: f64, zeta: ZetaModel) -> Result<Self> {
        check_theta(theta, &zeta)?;
        Ok(Self {
            market: market.clone(),
            theta,
            zeta,
        })
    }

    /// E[ζ|F_s] + κz.
    fn mass(&self, s: &GameState) -> f64 {
        self.zeta.cond_mean(s.lambda) + self.zeta.kappa() * s.z
    }

    /// x A e^{∫r} + A² e^{∫ϑ²}/(2θ) − E[ζ²|F_t]/(2θ) with A = E[ζ|F_t] + κz.
    pub fn value(&self, s: &GameState) -> f64 {
        let m = &self.market;
        let a = self.mass(s);
        s.x * a * m.int_r(s.t).exp() + a * a * m.int_theta2(s.t).exp() / (2.0 * self.theta)
            - self.zeta.cond_second_moment(m, s.t, s.lambda) / (2.0 * self.theta)
    }
}

impl Strategy for Unconstrained {
    fn pi(&self, s: &GameState) -> f64 {
        let m = &self.market;
        let growth = (m.int_theta2(s.t) - m.int_r(s.t)).exp();
        m.theta_at(s.t) / (self.theta * m.sigma_at(s.t)) * self.mass(s) * growth
    }

    fn gamma(&self, s: &GameState) -> f64 {
        let m = &self.market;
        let th = m.theta_at(s.t);
        let k = self.zeta.kappa();
        -(self.zeta.cond_mean(s.lambda) * th + self.zeta.eta(m, s.t, s.lambda)) / k - s.z * th
    }
}

/// Terminal value x(ζ + κz) + κζz/θ + κ²z²/(2θ).
pub fn unconstrained_terminal(theta: f64, zeta: &ZetaModel, lambda_t: f64, x: f64, z: f64) -> f64 {
    let k = zeta.kappa();
    let zt = zeta.at_terminal(lambda_t);
    x * (zt + k * z) + k * zt * z / theta + k * k * z * z / (2.0 * theta)
}

pub fn unconstrained_saddle(
    market: &CtMarket,
    theta: f64,
    zeta: ZetaModel,
    state: &GameState,
) -> Result<SaddlePoint> {
    state.validate(market)?;
    let u = Unconstrained::new(market, theta, zeta)?;
    Ok(SaddlePoint {
        pi: u.pi(state),
        gamma: u.gamma(state),
        value: u.value(state),
    })
}

/// Mean-variance feedback for target c, with the adversary inactive.
#[derive(Debug, Clone)]
pub struct MeanVariance {
    market: CtMarket,
    theta: f64,
    c: f64,
}

impl MeanVariance {
    pub fn new(market: &CtMarket, theta: f64, c: f64) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() || !c.is_finite() {
            return invalid(format!("need θ > 0 and finite c, got θ = {theta}, c = {c}"));
        }
        Ok(Self {
            market: market.clone(),
            theta,
            c,
        })
    }
}

impl Strategy for MeanVariance {
    fn pi(&self, s: &GameState) -> f64 {
        mv_feedback(&self.market, self.theta, self.c, s.t, s.x).unwrap_or(f64::NAN)
    }

    fn gamma(&self, _: &GameState) -> f64 {
        0.0
    }
}

/// Saddle point of the penalised game without the constraint Z ≥ 0.
#[derive(Debug, Clone)]
pub struct Approximate {
    market: CtMarket,
    theta: f64,
    zeta: ZetaModel,
    penalty: PenaltyParams,
}

impl Approximate {
    pub fn new(
        market: &CtMarket,
        theta: f64,
        zeta: ZetaModel,
        penalty: PenaltyParams,
    ) -> Result<Self> {
        check_theta(theta, &zeta)?;
        PenaltyParams::new(penalty.rho, penalty.c)?;
        Ok(Self {
            market: market.clone(),
            theta,
            zeta,
            penalty,
        })
    }

    /// 1 + (ρ/θ)e^{∫ₛᵀϑ²}.
    pub fn damping(&self, t: f64) -> f64 {
        1.0 + self.penalty.rho / self.theta * self.market.int_theta2(t).exp()
    }

    /// ρc − ρx e^{∫r} + κz + E[ζ|F_s].
    pub fn bracket(&self, s: &GameState) -> f64 {
        let PenaltyParams { rho, c } = self.penalty;
        rho * c - rho * s.x * self.market.int_r(s.t).exp()
            + self.zeta.kappa() * s.z
            + self.zeta.cond_mean(s.lambda)
    }

    /// Open-loop bracket at (s, Λ_s) started from `from`:
    /// 𝕍_s = 𝕍_t D_s Λ_s / (D_t Λ_t).
    pub fn open_loop_bracket(&self, from: &GameState, s: f64, lambda_s: f64) -> f64 {
        self.bracket(from) * self.damping(s) * lambda_s / (self.damping(from.t) * from.lambda)
    }

    pub fn value(&self, s: &GameState) -> f64 {
        let m = &self.market;
        let PenaltyParams { rho, c } = self.penalty;
        let th = self.theta;
        let a = self.zeta.cond_mean(s.lambda) + self.zeta.kappa() * s.z;
        let er = m.int_r(s.t).exp();
        let v = m.int_theta2(s.t);
        let ev = v.exp();
        let gap = c - s.x * er;
        s.x * a * er + a * a * ev / (2.0 * th)
            - self.zeta.cond_second_moment(m, s.t, s.lambda) / (2.0 * th)
            - 0.5 * rho * (-v).exp() * gap * gap
            - 0.5 * rho * (-(-v).exp_m1()) / self.damping(s.t) * (gap - a * ev / th).powi(2)
    }
}

impl Strategy for Approximate {
    fn pi(&self, s: &GameState) -> f64 {
        let m = &self.market;
        let growth = (m.int_theta2(s.t) - m.int_r(s.t)).exp();
        m.theta_at(s.t) * growth / (self.theta * m.sigma_at(s.t) * self.damping(s.t))
            * self.bracket(s)
    }

    fn gamma(&self, s: &GameState) -> f64 {
        let m = &self.market;
        let k = self.zeta.kappa();
        -m.theta_at(s.t) / (k * self.damping(s.t)) * self.bracket(s)
            - self.zeta.eta(m, s.t, s.lambda) / k
    }
}

/// Terminal value of the penalised game.
pub fn approx_terminal(
    theta: f64,
    zeta: &ZetaModel,
    penalty: &PenaltyParams,
    lambda_t: f64,
    x: f64,
    z: f64,
) -> f64 {
    unconstrained_terminal(theta, zeta, lambda_t, x, z)
        - 0.5 * penalty.rho * (x - penalty.c).powi(2)
}

pub fn approx_saddle(
    market: &CtMarket,
    theta: f64,
    zeta: ZetaModel,
    state: &GameState,
    penalty: PenaltyParams,
) -> Result<SaddlePoint> {
    state.validate(market)?;
    let a = Approximate::new(market, theta, zeta, penalty)?;
    Ok(SaddlePoint {
        pi: a.pi(state),
        gamma: a.gamma(state),
        value: a.value(state),
    })
}

/// Optimal investment when the adversary sits at z = 0.
#[derive(Debug, Clone)]
pub struct Boundary {
    market: CtMarket,
    zeta: ZetaModel,
    penalty: PenaltyParams,
}

impl Boundary {
    pub fn new(market: &CtMarket, zeta: ZetaModel, penalty: PenaltyParams) -> Result<Self> {
        zeta.validate()?;
        PenaltyParams::new(penalty.rho, penalty.c)?;
        Ok(Self {
            market: market.clone(),
            zeta,
            penalty,
        })
    }

    /// c E[ζ|F_t] + E[ζ²|F_t]/(2ρ) − e^{−∫ϑ²}(ρc − ρx e^{∫r} + E^P̃[ζ|F_t])²/(2ρ).
    pub fn value(&self, s: &GameState) -> f64 {
        let m = &self.market;
        let PenaltyParams { rho, c } = self.penalty;
        let b =
            rho * c - rho * s.x * m.int_r(s.t).exp() + self.zeta.tilde_cond_mean(m, s.t, s.lambda);
        c * self.zeta.cond_mean(s.lambda)
            + self.zeta.cond_second_moment(m, s.t, s.lambda) / (2.0 * rho)
            - (-m.int_theta2(s.t)).exp() * b * b / (2.0 * rho)
    }
}

impl Strategy for Boundary {
    fn pi(&self, s: &GameState) -> f64 {
        let m = &self.market;
        let PenaltyParams { rho, c } = self.penalty;
        let er = m.int_r(s.t).exp();
        let b = rho * c - rho * s.x * er + self.zeta.tilde_cond_mean(m, s.t, s.lambda);
        (b * m.theta_at(s.t) + self.zeta.eta_tilde(m, s.t, s.lambda)) / (rho * m.sigma_at(s.t) * er)
    }

    fn gamma(&self, _: &GameState) -> f64 {
        0.0
    }
}

/// Terminal value xζ − ρ(x − c)²/2.
pub fn boundary_terminal(zeta: &ZetaModel, penalty: &PenaltyParams, lambda_t: f64, x: f64) -> f64 {
    x * zeta.at_terminal(lambda_t) - 0.5 * penalty.rho * (x - penalty.c).powi(2)
}

/// (value, π♭) at (t, x) with density level Λ_t.
pub fn boundary_value(
    market: &CtMarket,
    zeta: ZetaModel,
    t: f64,
    x: f64,
    lambda: f64,
    penalty: PenaltyParams,
) -> Result<(f64, f64)> {
    let s = GameState {
        t,
        x,
        z: 0.0,
        lambda,
    };
    s.validate(market)?;
    let b = Boundary::new(market, zeta, penalty)?;
    Ok((b.value(&s), b.pi(&s)))
}
