//! Embedding-duality system for the constrained game and its solution.
//!
//! Write L = Λ_T/Λ_t, V = ∫ₜᵀϑ², g = θρ/(θ+ρ) and ζ = a + bΛ_t L. For a pair
//! (h, w) the terminal adversary density is
//!
//! κZ_T = g (i + sL)_+,  i = h/κ − c − a/g,  s = w − bΛ_t/g,
//!
//! and (h, w) solves
//!
//! g E[(i + sL)_+] = κz,
//! ρwe^V − ρ(c − xe^{∫r}) − E^P̃[ζ|F_t] − g E[L (i + sL)_+] = 0.

use super::{GameState, PenaltyParams, Strategy};
use crate::ct_market::{CtMarket, ZetaModel};
use crate::error::{invalid, Error, Result};
use crate::probspace::{black_scholes_call, d_minus, d_plus, normal_cdf, LognormalQuadrature};
use crate::roots::{bisect, expand};

/// Relative tolerance on both residuals of the system.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Relative slack when testing the linear-regime inequalities.
const REGIME_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Regime {
    /// Z_T is affine in L; the kink is never reached.
    Linear,
    /// Z_T vanishes on part of the support of L.
    Kinked,
    /// z = 0: the adversary is absorbed and Z ≡ 0.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SolverPath {
    ClosedForm,
    NestedBisection,
    BlackScholesNewton,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EmbeddingDualitySolution {
    pub h: f64,
    pub w: f64,
    /// Relative residuals of the two equations.
    pub residuals: (f64, f64),
    pub regime: Regime,
    pub path: SolverPath,
}

impl EmbeddingDualitySolution {
    /// (ρh, ρw), the pair entering the printed terminal density.
    pub fn scaled(&self, rho: f64) -> (f64, f64) {
        (rho * self.h, rho * self.w)
    }
}

/// Problem data at one state, with cached integrals.
#[derive(Debug, Clone)]
pub struct DualityContext {
    market: CtMarket,
    theta: f64,
    zeta: ZetaModel,
    state: GameState,
    penalty: PenaltyParams,
    quad: LognormalQuadrature,
    v: f64,
    growth: f64,
    g: f64,
}

impl DualityContext {
    pub fn new(
        market: &CtMarket,
        theta: f64,
        zeta: ZetaModel,
        state: GameState,
        penalty: PenaltyParams,
    ) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return invalid(format!("theta must be positive, got {theta}"));
        }
        zeta.validate()?;
        state.validate(market)?;
        let penalty = PenaltyParams::new(penalty.rho, penalty.c)?;
        Ok(Self {
            market: market.clone(),
            theta,
            zeta,
            state,
            penalty,
            quad: LognormalQuadrature::default(),
            v: market.int_theta2(state.t),
            growth: market.int_r(state.t).exp(),
            g: theta * penalty.rho / (theta + penalty.rho),
        })
    }

    pub fn with_quadrature(mut self, quad: LognormalQuadrature) -> Self {
        self.quad = quad;
        self
    }

    pub fn market(&self) -> &CtMarket {
        &self.market
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn zeta(&self) -> ZetaModel {
        self.zeta
    }

    pub fn state(&self) -> GameState {
        self.state
    }

    pub fn penalty(&self) -> PenaltyParams {
        self.penalty
    }

    pub fn quadrature(&self) -> &LognormalQuadrature {
        &self.quad
    }

    /// ∫ₜᵀϑ², the log-variance of L.
    pub fn variance(&self) -> f64 {
        self.v
    }

    /// θρ/(θ+ρ).
    pub fn g(&self) -> f64 {
        self.g
    }

    fn kappa(&self) -> f64 {
        self.zeta.kappa()
    }

    /// ρc − ρxe^{∫r} + κz + E[ζ|F_t].
    pub fn bracket(&self) -> f64 {
        let PenaltyParams { rho, c } = self.penalty;
        let s = &self.state;
        rho * c - rho * s.x * self.growth + self.kappa() * s.z + self.zeta.cond_mean(s.lambda)
    }

    fn tilde_zeta(&self) -> f64 {
        self.zeta
            .tilde_cond_mean(&self.market, self.state.t, self.state.lambda)
    }

    /// (i, s) for a pair (h, w).
    pub fn affine(&self, h: f64, w: f64) -> (f64, f64) {
        let (a, b) = self.zeta.coefficients();
        (
            h / self.kappa() - self.penalty.c - a / self.g,
            w - b * self.state.lambda / self.g,
        )
    }

    /// h for a given intercept i.
    fn h_of(&self, i: f64) -> f64 {
        let (a, _) = self.zeta.coefficients();
        self.kappa() * (i + self.penalty.c + a / self.g)
    }

    /// E[(i + sL)_+] and E[L (i + sL)_+].
    pub fn moments(&self, i: f64, s: f64) -> Result<(f64, f64)> {
        let kink = if s != 0.0 { -i / s } else { f64::NAN };
        let m0 = self
            .quad
            .expect_kinked(self.v, kink, |l| (i + s * l).max(0.0))?;
        let m1 = self
            .quad
            .expect_kinked(self.v, kink, |l| l * (i + s * l).max(0.0))?;
        Ok((m0, m1))
    }

    fn first_eq(&self, i: f64, s: f64) -> Result<f64> {
        let m0 = self
            .quad
            .expect_kinked(self.v, -i / s, |l| (i + s * l).max(0.0))?;
        Ok(self.g * m0 - self.kappa() * self.state.z)
    }

    /// Unscaled residuals (F1, F2) together with their magnitudes.
    fn raw_residuals(&self, h: f64, w: f64) -> Result<([f64; 2], [f64; 2])> {
        let (i, s) = self.affine(h, w);
        let (m0, m1) = self.moments(i, s)?;
        let kz = self.kappa() * self.state.z;
        let PenaltyParams { rho, c } = self.penalty;
        let ev = self.v.exp();
        let terms = [
            rho * w * ev,
            rho * (c - self.state.x * self.growth),
            self.tilde_zeta(),
            self.g * m1,
        ];
        let f1 = self.g * m0 - kz;
        let f2 = terms[0] - terms[1] - terms[2] - terms[3];
        let scale2 = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        // i and s are differences of larger terms; measure F1 against those
        let (a, b) = self.zeta.coefficients();
        let parts = [
            h / self.kappa(),
            c,
            a / self.g,
            w,
            b * self.state.lambda / self.g,
        ];
        let scale1 = parts
            .iter()
            .fold(kz.max(self.g * m0), |m, t| m.max(self.g * t.abs()));
        Ok(([f1, f2], [scale1, scale2]))
    }

    /// Residuals of the system at (h, w), each relative to its largest term.
    pub fn residuals(&self, h: f64, w: f64) -> Result<(f64, f64)> {
        let (f, scale) = self.raw_residuals(h, w)?;
        let rel = |f: f64, s: f64| if s > 0.0 { f.abs() / s } else { f.abs() };
        Ok((rel(f[0], scale[0]), rel(f[1], scale[1])))
    }

    /// Intercept i solving the first equation for a fixed slope s.
    pub fn inner_intercept(&self, s: f64) -> Result<f64> {
        let kz = self.kappa() * self.state.z;
        if kz <= 0.0 {
            return invalid("inner solve needs z > 0");
        }
        // E[(i + sL)_+] ≥ i + s, so this end is non-negative
        let hi = kz / self.g - s;
        let f = |i: f64| self.first_eq(i, s);
        let lo_start = hi.min(0.0);
        let lo = if f(lo_start)? < 0.0 {
            lo_start
        } else {
            expand(f, lo_start, -(s.abs() + hi.abs() + 1.0), false)?
        };
        let root = bisect(f, lo, hi, 1e-15 * kz)?;
        Ok(root.x)
    }

    /// w ↦ F2(ĥ(w), w), strictly increasing.
    pub fn outer(&self, w: f64) -> Result<f64> {
        let (_, s) = self.affine(0.0, w);
        let i = self.inner_intercept(s)?;
        let (f, _) = self.raw_residuals(self.h_of(i), w)?;
        Ok(f[1])
    }

    /// ĥ(w).
    pub fn h_hat(&self, w: f64) -> Result<f64> {
        let (_, s) = self.affine(0.0, w);
        Ok(self.h_of(self.inner_intercept(s)?))
    }

    /// ŵ(h): the w solving the second equation for fixed h.
    pub fn w_hat(&self, h: f64) -> Result<f64> {
        let f = |w: f64| -> Result<f64> { Ok(self.raw_residuals(h, w)?.0[1]) };
        let lo = w_lower_bound(self);
        let lo = if f(lo)? <= 0.0 {
            lo
        } else {
            expand(f, lo, -(lo.abs() + 1.0), false)?
        };
        let hi = expand(f, lo, lo.abs() + 1.0, true)?;
        Ok(bisect(f, lo, hi, 0.0)?.x)
    }
}

/// e^{−V}(ρ(c − xe^{∫r}) + E^P̃[ζ|F_t])/ρ, a lower bound for w.
pub fn w_lower_bound(ctx: &DualityContext) -> f64 {
    let PenaltyParams { rho, c } = ctx.penalty;
    (-ctx.v).exp() * (rho * (c - ctx.state.x * ctx.growth) + ctx.tilde_zeta()) / rho
}

/// Linear-regime solution (1/ρ)((θ+ρ)/(θ+ρe^V)) B.
pub fn w_natural(ctx: &DualityContext) -> f64 {
    let PenaltyParams { rho, .. } = ctx.penalty;
    let th = ctx.theta;
    (th + rho) / (rho * (th + rho * ctx.v.exp())) * ctx.bracket()
}

/// κz + bΛ_t ≥ θB/(θ + ρe^V) ≥ bΛ_t.
pub fn linear_regime_holds(ctx: &DualityContext) -> bool {
    let (_, b) = ctx.zeta.coefficients();
    let bl = b * ctx.state.lambda;
    let kz = ctx.kappa() * ctx.state.z;
    let mid = ctx.theta * ctx.bracket() / (ctx.theta + ctx.penalty.rho * ctx.v.exp());
    let slack = REGIME_TOL * (kz.abs() + bl.abs() + mid.abs()).max(f64::MIN_POSITIVE);
    if ctx.v == 0.0 {
        // L ≡ 1: only i + s ≥ 0 is needed, and that is κz ≥ 0
        return kz >= 0.0;
    }
    kz + bl + slack >= mid && mid + slack >= bl
}

/// κze^V/θ ≥ c − xe^{∫r} + ζ₀/ρ for a constant floor ζ₀.
pub fn black_scholes_form_excluded(ctx: &DualityContext) -> bool {
    let PenaltyParams { rho, c } = ctx.penalty;
    let (zeta0, _) = ctx.zeta.coefficients();
    ctx.kappa() * ctx.state.z * ctx.v.exp() / ctx.theta
        >= c - ctx.state.x * ctx.growth + zeta0 / rho
}

fn finish(
    ctx: &DualityContext,
    h: f64,
    w: f64,
    regime: Regime,
    path: SolverPath,
) -> Result<EmbeddingDualitySolution> {
    let residuals = ctx.residuals(h, w)?;
    if !(residuals.0 <= RESIDUAL_TOL && residuals.1 <= RESIDUAL_TOL) {
        return Err(Error::NonConvergence(format!(
            "embedding-duality residuals ({:e}, {:e}) exceed {RESIDUAL_TOL:e} at h={h}, w={w}",
            residuals.0, residuals.1
        )));
    }
    Ok(EmbeddingDualitySolution {
        h,
        w,
        residuals,
        regime,
        path,
    })
}

/// Solves the embedding-duality system by nested bracketed bisection, or in
/// closed form when the linear-regime condition holds.
pub fn solve_embedding_duality(ctx: &DualityContext) -> Result<EmbeddingDualitySolution> {
    let z = ctx.state.z;
    if z == 0.0 {
        // Z ≡ 0 leaves only the second equation; h is not identified
        return Ok(EmbeddingDualitySolution {
            h: ctx.h_of(0.0),
            w: w_lower_bound(ctx),
            residuals: (0.0, 0.0),
            regime: Regime::Boundary,
            path: SolverPath::ClosedForm,
        });
    }
    if linear_regime_holds(ctx) {
        let w = w_natural(ctx);
        let (_, s) = ctx.affine(0.0, w);
        let i = ctx.kappa() * z / ctx.g - s;
        return finish(ctx, ctx.h_of(i), w, Regime::Linear, SolverPath::ClosedForm);
    }
    let lo = w_lower_bound(ctx);
    let f = |w: f64| ctx.outer(w);
    let lo = if f(lo)? <= 0.0 {
        lo
    } else {
        expand(f, lo, -(lo.abs() + 1.0), false)?
    };
    let hi = expand(f, lo, lo.abs().max(w_natural(ctx).abs()) + 1.0, true)?;
    let w = bisect(f, lo, hi, 0.0)?.x;
    let h = ctx.h_hat(w)?;
    finish(ctx, h, w, Regime::Kinked, SolverPath::NestedBisection)
}

/// Black-Scholes form of the system for a constant floor ζ₀ > 0,
/// solved by damped Newton with the nested solver as fallback.
///
/// The expectations are call prices x·N(d₊) − K·N(d₋) with strike
/// K = c + ζ₀/g − h/κ. The minus sign in front of K·N(d₋) is the one that
/// matches lognormal quadrature; a plus sign fails that check.
pub fn solve_constant_zeta_bs(ctx: &DualityContext) -> Result<EmbeddingDualitySolution> {
    let zeta0 = match ctx.zeta {
        ZetaModel::Constant { zeta0 } if zeta0 > 0.0 && zeta0 < 1.0 => zeta0,
        other => {
            return invalid(format!(
                "Black-Scholes system needs a constant floor in (0, 1), got {other:?}"
            ))
        }
    };
    if !(ctx.state.z > 0.0) || !(ctx.v > 0.0) {
        return invalid("Black-Scholes system needs z > 0 and a non-degenerate market");
    }
    if black_scholes_form_excluded(ctx) {
        return invalid("penalty (rho, c) satisfies the closed-form condition; the strike would not be positive");
    }
    match bs_newton(ctx, zeta0) {
        Some((h, w)) => {
            let regime = if linear_regime_holds(ctx) {
                Regime::Linear
            } else {
                Regime::Kinked
            };
            finish(ctx, h, w, regime, SolverPath::BlackScholesNewton)
        }
        None => solve_embedding_duality(ctx),
    }
}

/// Strike c + ζ₀/g − h/κ.
fn strike(ctx: &DualityContext, zeta0: f64, h: f64) -> f64 {
    ctx.penalty.c + zeta0 / ctx.g - h / ctx.kappa()
}

fn bs_system(
    ctx: &DualityContext,
    zeta0: f64,
    h: f64,
    w: f64,
) -> Option<([f64; 2], [[f64; 2]; 2])> {
    let k = strike(ctx, zeta0, h);
    if !(k > 0.0) || !(w > 0.0) {
        return None;
    }
    let PenaltyParams { rho, c } = ctx.penalty;
    let (v, ev, g, kap) = (ctx.v, ctx.v.exp(), ctx.g, ctx.kappa());
    let share = ctx.theta / (ctx.theta + rho);
    let wt = w * ev;
    let e1 = g * black_scholes_call(w, k, v) - kap * ctx.state.z;
    let e2 =
        wt - (c - ctx.state.x * ctx.growth + zeta0 / rho) - share * black_scholes_call(wt, k, v);
    let jac = [
        [
            g * normal_cdf(d_minus(w, k, v)) / kap,
            g * normal_cdf(d_plus(w, k, v)),
        ],
        [
            -share * normal_cdf(d_minus(wt, k, v)) / kap,
            ev - share * ev * normal_cdf(d_plus(wt, k, v)),
        ],
    ];
    Some(([e1, e2], jac))
}

fn bs_newton(ctx: &DualityContext, zeta0: f64) -> Option<(f64, f64)> {
    let kz = ctx.kappa() * ctx.state.z;
    let w0 = w_natural(ctx).max(w_lower_bound(ctx)).max(kz / ctx.g) * 1.01 + 1e-12;
    let (_, s0) = ctx.affine(0.0, w0);
    let i0 = (kz / ctx.g - s0).min(-1e-3 * w0);
    let (mut h, mut w) = (ctx.h_of(i0), w0);
    let scale = [kz, w0 * ctx.v.exp()];
    let norm = |e: &[f64; 2]| (e[0] / scale[0]).hypot(e[1] / scale[1]);
    let (mut e, mut jac) = bs_system(ctx, zeta0, h, w)?;
    for _ in 0..NEWTON_MAX_ITER {
        if norm(&e) <= 1e-14 {
            return Some((h, w));
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if !(det.abs() > 0.0) || !det.is_finite() {
            return None;
        }
        let dh = (e[0] * jac[1][1] - e[1] * jac[0][1]) / det;
        let dw = (jac[0][0] * e[1] - jac[1][0] * e[0]) / det;
        let mut step = 1.0;
        let current = norm(&e);
        loop {
            let (hn, wn) = (h - step * dh, w - step * dw);
            if let Some((en, jn)) = bs_system(ctx, zeta0, hn, wn) {
                if norm(&en) < current || (norm(&en) <= 1e-14) {
                    h = hn;
                    w = wn;
                    e = en;
                    jac = jn;
                    break;
                }
            }
            step *= 0.5;
            if step < 1e-12 {
                return if current <= 1e-12 { Some((h, w)) } else { None };
            }
        }
    }
    (norm(&e) <= 1e-12).then_some((h, w))
}

/// Terminal adversary density as a function of L = Λ_T/Λ_t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalZ {
    pub intercept: f64,
    pub slope: f64,
    pub g: f64,
    pub kappa: f64,
}

impl TerminalZ {
    pub fn eval(&self, l: f64) -> f64 {
        self.g * (self.intercept + self.slope * l).max(0.0) / self.kappa
    }

    /// The kink −i/s when it lies in (0, ∞).
    pub fn kink(&self) -> Option<f64> {
        let k = -self.intercept / self.slope;
        (k > 0.0 && k.is_finite()).then_some(k)
    }

    /// E[Z_T | F_t] with L lognormal of log-variance `v`.
    pub fn mean(&self, quad: &LognormalQuadrature, v: f64) -> Result<f64> {
        quad.expect_kinked(v, self.kink().unwrap_or(f64::NAN), |l| self.eval(l))
    }
}

/// Investment and adversary feedback recovered from a solved system.
#[derive(Debug, Clone)]
pub struct EmbeddingStrategy {
    ctx: DualityContext,
    z_t: TerminalZ,
}

impl EmbeddingStrategy {
    pub fn terminal(&self) -> TerminalZ {
        self.z_t
    }

    /// (φ(m), φ'(m)) with φ(m) = E^P̃[κZ_T | F_s] at Λ_s = mΛ_t.
    fn phi(&self, s: f64, m: f64) -> Result<(f64, f64, f64)> {
        let v = self.ctx.market.int_theta2(s);
        let TerminalZ {
            intercept: i,
            slope,
            g,
            ..
        } = self.z_t;
        let sm = slope * m;
        let kink = if sm != 0.0 { -i / sm } else { f64::NAN };
        let q = &self.ctx.quad;
        let phi = g * q.expect_kinked(v, kink, |u| u * (i + sm * u).max(0.0))?;
        let on = |u: f64| if i + sm * u > 0.0 { 1.0 } else { 0.0 };
        let dphi = g * slope * q.expect_kinked(v, kink, |u| u * u * on(u))?;
        let dpsi = g * slope * q.expect_kinked(v, kink, |u| u * on(u))? / self.z_t.kappa;
        Ok((phi, dphi, dpsi))
    }

    pub fn try_pi(&self, st: &GameState) -> Result<f64> {
        let DualityContext {
            market,
            zeta,
            penalty,
            ..
        } = &self.ctx;
        market.check(st.t)?;
        let m = st.lambda / self.ctx.state.lambda;
        let (phi, dphi, _) = self.phi(st.t, m)?;
        let er = market.int_r(st.t).exp();
        let th = market.theta_at(st.t);
        let bracket = penalty.rho * penalty.c - penalty.rho * st.x * er
            + zeta.tilde_cond_mean(market, st.t, st.lambda)
            + phi;
        let num = bracket * th + zeta.eta_tilde(market, st.t, st.lambda) - th * m * dphi;
        Ok(num / (penalty.rho * market.sigma_at(st.t) * er))
    }

    pub fn try_gamma(&self, st: &GameState) -> Result<f64> {
        self.ctx.market.check(st.t)?;
        let m = st.lambda / self.ctx.state.lambda;
        let (_, _, dpsi) = self.phi(st.t, m)?;
        Ok(-self.ctx.market.theta_at(st.t) * m * dpsi)
    }
}

impl Strategy for EmbeddingStrategy {
    fn pi(&self, s: &GameState) -> f64 {
        self.try_pi(s).unwrap_or(f64::NAN)
    }

    fn gamma(&self, s: &GameState) -> f64 {
        self.try_gamma(s).unwrap_or(f64::NAN)
    }
}

pub fn terminal_z_and_strategy(
    ctx: &DualityContext,
    solution: &EmbeddingDualitySolution,
) -> (TerminalZ, EmbeddingStrategy) {
    let (i, s) = match solution.regime {
        Regime::Boundary => (0.0, 0.0),
        _ => ctx.affine(solution.h, solution.w),
    };
    let z_t = TerminalZ {
        intercept: i,
        slope: s,
        g: ctx.g,
        kappa: ctx.kappa(),
    };
    (
        z_t,
        EmbeddingStrategy {
            ctx: ctx.clone(),
            z_t,
        },
    )
}

/// Relative residuals of the system at (h, w).
pub fn system_residuals(ctx: &DualityContext, h: f64, w: f64) -> Result<(f64, f64)> {
    ctx.residuals(h, w)
}
