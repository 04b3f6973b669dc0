//! Mean-variance (MV) and strictly monotone mean-variance (SMMV) preferences.
//!
//! For θ > 0 and a floor ζ ≥ 0 with E[ζ] < 1,
//!
//! ```text
//! U_θ(f)   = E[f] − (θ/2) Var[f]
//! V_θ,ζ(f) = inf { E[Yf] + Var[Y]/(2θ) : Y ≥ ζ, E[Y] = 1 }
//! ```
//!
//! The infimum is attained at Y = ζ + θ(λ − f − ζ/θ)_+ where λ solves
//! λ − E[(f + ζ/θ) ∧ λ] = κ/θ with κ = 1 − E[ζ].

use crate::error::{invalid, Error, Result};
use crate::probspace::{ess_bounds, expect, variance, RandomVariable};
use crate::qp::{BoundedQp, QpOutcome};
use crate::roots::newton_bisect;

/// Absolute tolerance on the λ-equation residual.
pub const LAMBDA_TOL: f64 = 1e-12;
/// Tolerance for statewise inequalities.
pub const STATEWISE_TOL: f64 = 1e-12;

/// Risk aversion θ and monotonicity floor ζ.
#[derive(Debug, Clone)]
pub struct PreferenceParams {
    theta: f64,
    zeta: RandomVariable,
    kappa: f64,
}

impl PreferenceParams {
    pub fn new(theta: f64, zeta: RandomVariable) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return invalid(format!("theta must be positive and finite, got {theta}"));
        }
        if let Some(v) = zeta.values().iter().find(|&&v| v < 0.0) {
            return invalid(format!("zeta must be nonnegative statewise, found {v}"));
        }
        let kappa = 1.0 - expect(&zeta);
        if !(kappa > 0.0) {
            return invalid(format!(
                "E[zeta] must be < 1, got {} (kappa = {kappa})",
                1.0 - kappa
            ));
        }
        Ok(Self { theta, zeta, kappa })
    }

    /// ζ ≡ 0 on the space of `like`.
    pub fn mmv(theta: f64, like: &RandomVariable) -> Result<Self> {
        Self::new(theta, RandomVariable::constant(like.space(), 0.0))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn zeta(&self) -> &RandomVariable {
        &self.zeta
    }

    /// κ = 1 − E[ζ].
    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// f + ζ/θ.
    fn shifted(&self, f: &RandomVariable) -> Result<RandomVariable> {
        let th = self.theta;
        f.zip_map(&self.zeta, |f, z| f + z / th)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSolution {
    pub lambda: f64,
    /// λ − E[(f + ζ/θ) ∧ λ] − κ/θ.
    pub residual: f64,
}

/// E[f] − (θ/2) Var[f].
pub fn mv_utility(f: &RandomVariable, theta: f64) -> f64 {
    expect(f) - 0.5 * theta * variance(f)
}

/// Residual of the λ-equation at a trial level.
pub fn lambda_residual(f: &RandomVariable, params: &PreferenceParams, lambda: f64) -> Result<f64> {
    let u = params.shifted(f)?;
    Ok(lambda - expect(&u.min(lambda)) - params.kappa / params.theta)
}

/// Unique root of λ ↦ λ − E[(f + ζ/θ) ∧ λ] − κ/θ on
/// (essinf(f + ζ/θ), E[f] + 1/θ].
pub fn solve_lambda(f: &RandomVariable, params: &PreferenceParams) -> Result<LambdaSolution> {
    let u = params.shifted(f)?;
    let target = params.kappa / params.theta;
    let (lo, hi_u) = ess_bounds(&u);
    if lo == hi_u {
        let lambda = lo + target;
        return Ok(LambdaSolution {
            lambda,
            residual: lambda - lo - target,
        });
    }
    let hi = expect(f) + 1.0 / params.theta;
    let p = u.probabilities();
    let vals = u.values();
    let g = |l: f64| -> (f64, f64) {
        let (mut trunc, mut slope) = (0.0, 0.0);
        for (&x, &w) in vals.iter().zip(p) {
            if x < l {
                trunc += w * x;
                slope += w;
            } else {
                trunc += w * l;
            }
        }
        (l - trunc - target, slope)
    };
    let root = newton_bisect(g, lo, hi, 0.25 * LAMBDA_TOL, 400)?;
    let residual = g(root.x).0;
    if residual.abs() > LAMBDA_TOL {
        return Err(Error::NonConvergence(format!(
            "lambda equation residual {residual:e} exceeds {LAMBDA_TOL:e}"
        )));
    }
    Ok(LambdaSolution {
        lambda: root.x,
        residual,
    })
}

/// f ∧ (λ − ζ/θ).
fn truncate(f: &RandomVariable, params: &PreferenceParams, lambda: f64) -> Result<RandomVariable> {
    let th = params.theta;
    f.zip_map(&params.zeta, |f, z| f.min(lambda - z / th))
}

/// U_θ(f ∧ (λ − ζ/θ)) + E[(f − f ∧ (λ − ζ/θ)) ζ] at a given λ.
pub fn smmv_value_at(f: &RandomVariable, params: &PreferenceParams, lambda: f64) -> Result<f64> {
    let t = truncate(f, params, lambda)?;
    let excess: f64 = f
        .values()
        .iter()
        .zip(t.values())
        .zip(params.zeta.values())
        .zip(f.probabilities())
        .map(|(((f, t), z), p)| p * (f - t) * z)
        .sum();
    Ok(mv_utility(&t, params.theta) + excess)
}

/// θ ∫_{−∞}^{λ} s·P(f + ζ/θ ≤ s) ds + E[fζ] + E[ζ²]/(2θ) − 1/(2θ).
pub fn smmv_value_direct(
    f: &RandomVariable,
    params: &PreferenceParams,
    lambda: f64,
) -> Result<f64> {
    let u = params.shifted(f)?;
    let th = params.theta;
    let integral: f64 = u
        .values()
        .iter()
        .zip(u.probabilities())
        .filter(|(&x, _)| x < lambda)
        .map(|(&x, &p)| p * 0.5 * (lambda * lambda - x * x))
        .sum();
    let fz = expect(&(f * &params.zeta));
    let z2 = expect(&(&params.zeta * &params.zeta));
    Ok(th * integral + fz + z2 / (2.0 * th) - 1.0 / (2.0 * th))
}

/// Agreement required between the two value expressions.
pub const VALUE_FORM_TOL: f64 = 1e-10;

/// V_θ,ζ(f) via the truncated-MV form, cross-checked against the direct
/// integral form.
pub fn smmv_value(f: &RandomVariable, params: &PreferenceParams) -> Result<f64> {
    let lambda = solve_lambda(f, params)?.lambda;
    let v = smmv_value_at(f, params, lambda)?;
    let direct = smmv_value_direct(f, params, lambda)?;
    let scale = 1.0 + v.abs() + lambda.abs() * lambda.abs() * params.theta;
    if (v - direct).abs() > VALUE_FORM_TOL * scale {
        return Err(Error::NonConvergence(format!(
            "value forms disagree: truncated {v}, direct {direct}"
        )));
    }
    Ok(v)
}

/// Y = ζ + θ(λ − f − ζ/θ)_+.
pub fn smmv_gateaux(f: &RandomVariable, params: &PreferenceParams) -> Result<RandomVariable> {
    let lambda = solve_lambda(f, params)?.lambda;
    gateaux_at(f, params, lambda)
}

pub fn gateaux_at(
    f: &RandomVariable,
    params: &PreferenceParams,
    lambda: f64,
) -> Result<RandomVariable> {
    let th = params.theta;
    f.zip_map(&params.zeta, |f, z| z + th * (lambda - f - z / th).max(0.0))
}

/// f − E[f] ≤ (1 − ζ)/θ statewise.
pub fn in_domain_g(f: &RandomVariable, params: &PreferenceParams) -> bool {
    let m = expect(f);
    let th = params.theta;
    f.values()
        .iter()
        .zip(params.zeta.values())
        .all(|(&f, &z)| f - m <= (1.0 - z) / th + STATEWISE_TOL)
}

/// E[Yf] + Var[Y]/(2θ).
pub fn dual_objective(f: &RandomVariable, params: &PreferenceParams, y: &RandomVariable) -> f64 {
    expect(&(y * f)) + variance(y) / (2.0 * params.theta)
}

/// Minimises E[Yf] + Var[Y]/(2θ) over Y ≥ ζ, E[Y] = 1 with the active-set
/// QP solver, independently of the λ-equation. Returns (Y*, value).
pub fn dual_minimizer_qp(
    f: &RandomVariable,
    params: &PreferenceParams,
) -> Result<(RandomVariable, f64)> {
    f.check_same_space(&params.zeta)?;
    let th = params.theta;
    let ef = expect(f);
    let zeta = params.zeta.values();
    // unconstrained minimiser, floored at ζ and pulled back onto E[Y] = 1
    let floored: Vec<f64> = f
        .values()
        .iter()
        .zip(zeta)
        .map(|(&f, &z)| (1.0 - th * (f - ef)).max(z))
        .collect();
    let excess: f64 = floored
        .iter()
        .zip(zeta)
        .zip(f.probabilities())
        .map(|((y, z), p)| p * (y - z))
        .sum();
    let s = params.kappa / excess;
    let start: Vec<f64> = floored
        .iter()
        .zip(zeta)
        .map(|(&y, &z)| if y == z { z } else { z + s * (y - z) })
        .collect();
    let qp = BoundedQp {
        p: f.probabilities(),
        q: f.values().iter().map(|v| th * v).collect(),
        lower: zeta.to_vec(),
        rows: vec![vec![1.0; f.len()]],
        rhs: vec![1.0],
    };
    match qp.solve(Some(&start))? {
        QpOutcome::Optimal(sol) => {
            let y = RandomVariable::new(f.space(), sol.y)?;
            let value = dual_objective(f, params, &y);
            Ok((y, value))
        }
        QpOutcome::Infeasible { .. } => invalid("dual QP infeasible although E[zeta] < 1"),
    }
}
