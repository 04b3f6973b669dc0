//! Single-period SMMV portfolio selection.
//!
//! Wealth per unit of initial capital is X_α = r + ⟨α, R − r1⟩. The
//! solver works on the dual side: it projects onto
//! {Y ≥ ζ, E[Y] = 1, E[(R − r1)Y] = 0} in L², sets κZ* = Y* − ζ and then
//! recovers α* from conditional moments on {Z* > 0} and λ from the
//! λ-equation for X_α*.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::preference::{in_domain_g, solve_lambda, PreferenceParams};
use crate::probspace::{covariance, expect, probability, variance, RandomVariable, SpaceDocument};
use crate::qp::{BoundedQp, QpOutcome};

/// Largest accepted condition number of Var[R].
pub const MAX_CONDITION: f64 = 1e12;
/// Threshold separating {Z* > 0} from {Z* = 0}.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Risk-free yield plus n risky yields on a shared finite space.
#[derive(Debug, Clone)]
pub struct SinglePeriodMarket {
    r: f64,
    returns: Vec<RandomVariable>,
    names: Vec<String>,
    cov_inv: DMatrix<f64>,
    condition: f64,
}

impl SinglePeriodMarket {
    pub fn new(r: f64, returns: Vec<RandomVariable>) -> Result<Self> {
        let names = (0..returns.len()).map(|i| format!("asset{i}")).collect();
        Self::with_names(r, returns, names)
    }

    pub fn with_names(r: f64, returns: Vec<RandomVariable>, names: Vec<String>) -> Result<Self> {
        if !r.is_finite() {
            return invalid("risk-free rate must be finite");
        }
        if returns.is_empty() {
            return invalid("market needs at least one risky asset");
        }
        for ret in &returns[1..] {
            returns[0].check_same_space(ret)?;
        }
        let n = returns.len();
        let cov = DMatrix::from_fn(n, n, |i, j| {
            covariance(&returns[i], &returns[j]).expect("same space checked")
        });
        let eig = SymmetricEigen::new(cov.clone());
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        if !(lmin > 0.0) {
            return invalid(format!("Var[R] is singular (smallest eigenvalue {lmin:e})"));
        }
        let condition = lmax / lmin;
        if condition > MAX_CONDITION {
            return invalid(format!(
                "Var[R] condition number {condition:e} exceeds {MAX_CONDITION:e}"
            ));
        }
        let cov_inv = cov
            .try_inverse()
            .ok_or_else(|| Error::Validation("Var[R] is not invertible".into()))?;
        Ok(Self {
            r,
            returns,
            names,
            cov_inv,
            condition,
        })
    }

    /// Reads `r`, `assets` and the named variables from a space document.
    pub fn from_document(doc: &SpaceDocument) -> Result<Self> {
        let (_, vars) = doc.build()?;
        let r = doc
            .extra
            .get("r")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::Validation("market document needs a numeric 'r'".into()))?;
        let names: Vec<String> = match doc.extra.get("assets") {
            Some(v) => serde_json::from_value(v.clone())?,
            None => return invalid("market document needs an 'assets' list"),
        };
        let returns = names
            .iter()
            .map(|n| {
                vars.get(n)
                    .cloned()
                    .ok_or_else(|| Error::Validation(format!("asset '{n}' missing from variables")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_names(r, returns, names)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn returns(&self) -> &[RandomVariable] {
        &self.returns
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_assets(&self) -> usize {
        self.returns.len()
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Var[R]⁻¹.
    pub fn cov_inverse(&self) -> &DMatrix<f64> {
        &self.cov_inv
    }

    /// E[R − r1].
    pub fn mean_excess(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n_assets(),
            self.returns.iter().map(|x| expect(x) - self.r),
        )
    }

    /// X_α = r + ⟨α, R − r1⟩.
    pub fn wealth(&self, alpha: &[f64]) -> RandomVariable {
        let mut x = RandomVariable::constant(self.returns[0].space(), self.r);
        for (a, ret) in alpha.iter().zip(&self.returns) {
            let r = self.r;
            x = x.zip_map(ret, |x, v| x + a * (v - r)).expect("same space");
        }
        x
    }

    /// Cov[R, g] as a vector.
    pub fn cov_with(&self, g: &RandomVariable) -> Result<DVector<f64>> {
        let v = self
            .returns
            .iter()
            .map(|x| covariance(x, g))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(v))
    }

    /// 1 − ⟨R − E[R], Var[R]⁻¹E[R − r1]⟩, the density of the MV problem.
    pub fn mv_density(&self) -> RandomVariable {
        let m = &self.cov_inv * self.mean_excess();
        let mut y = RandomVariable::constant(self.returns[0].space(), 1.0);
        for (k, ret) in self.returns.iter().enumerate() {
            let mean = expect(ret);
            let mk = m[k];
            y = y
                .zip_map(ret, |y, v| y - mk * (v - mean))
                .expect("same space");
        }
        y
    }
}

/// (1/(xθ)) Var[R]⁻¹ E[R − r1].
pub fn mv_weights(market: &SinglePeriodMarket, theta: f64, x: f64) -> Result<Vec<f64>> {
    if !(theta > 0.0 && x > 0.0) {
        return invalid("mv_weights needs theta > 0 and x > 0");
    }
    let a = market.cov_inverse() * market.mean_excess() / (x * theta);
    Ok(a.iter().copied().collect())
}

/// Outcome of the L² projection onto the floored risk-neutral densities.
#[derive(Debug, Clone)]
pub enum Projection {
    Feasible {
        y: RandomVariable,
        /// Multipliers of (E[Y] = 1, E[(R_k − r)Y] = 0).
        nu: Vec<f64>,
        iterations: usize,
    },
    Infeasible {
        phase_one_objective: f64,
    },
}

/// min E[Y²] subject to Y ≥ ζ, E[Y] = 1, E[(R − r1)Y] = 0.
pub fn risk_neutral_projection(
    market: &SinglePeriodMarket,
    zeta: &RandomVariable,
) -> Result<Projection> {
    let space = market.returns[0].space();
    zeta.check_same_space(&market.returns[0])?;
    let n = space.len();
    let mut rows = vec![vec![1.0; n]];
    for ret in &market.returns {
        rows.push(ret.values().iter().map(|v| v - market.r).collect());
    }
    let mut rhs = vec![0.0; rows.len()];
    rhs[0] = 1.0;
    let qp = BoundedQp {
        p: space.probabilities(),
        q: vec![0.0; n],
        lower: zeta.values().to_vec(),
        rows,
        rhs,
    };
    let ymv = market.mv_density();
    let start = if ymv.values().iter().zip(zeta.values()).all(|(y, z)| y >= z) {
        ymv.values().to_vec()
    } else {
        match qp.phase_one()? {
            Err(obj) => {
                return Ok(Projection::Infeasible {
                    phase_one_objective: obj,
                })
            }
            Ok(yf) => blend_towards(&yf, ymv.values(), zeta.values()),
        }
    };
    match qp.solve(Some(&start))? {
        QpOutcome::Optimal(sol) => Ok(Projection::Feasible {
            y: RandomVariable::new(space, sol.y)?,
            nu: sol.nu,
            iterations: sol.iterations,
        }),
        QpOutcome::Infeasible {
            phase_one_objective,
        } => Ok(Projection::Infeasible {
            phase_one_objective,
        }),
    }
}

/// Largest step from the feasible `from` towards `to` that keeps `≥ lower`.
fn blend_towards(from: &[f64], to: &[f64], lower: &[f64]) -> Vec<f64> {
    let mut s = 1.0f64;
    for ((&f, &t), &l) in from.iter().zip(to).zip(lower) {
        if t < f {
            s = s.min(((f - l) / (f - t)).max(0.0));
        }
    }
    from.iter()
        .zip(to)
        .zip(lower)
        .map(|((&f, &t), &l)| (f + s * (t - f)).max(l))
        .collect()
}

/// Where α* came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaSource {
    /// Conditional covariance formula on {Z* > 0}.
    ConditionalMoments,
    /// Var[R | Z* > 0] singular; equality multipliers of the projection.
    Multipliers,
}

#[derive(Debug, Clone)]
pub struct StaticSolution {
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub zstar: RandomVariable,
    pub beta: RandomVariable,
    /// Multiplier of E[Z] = 1 in the projection problem, equal to θλ.
    pub mu: f64,
    /// max_k |E[(R_k − r)(κZ* + ζ)]|.
    pub gradient_residual: f64,
    pub alpha_source: AlphaSource,
}

#[derive(Debug, Clone)]
pub enum StaticOutcome {
    Solved(StaticSolution),
    /// The floored risk-neutral set is empty, so no maximiser exists.
    NoSolution {
        phase_one_objective: f64,
    },
}

/// Conditional-moment formula for α* given the support mask of Z*:
/// (1/θ) Var[R|S]⁻¹ ((E[(R−r1)ζ] + κE[R−r1|S]) / P(S) − Cov[R, ζ|S]).
pub fn conditional_alpha(
    market: &SinglePeriodMarket,
    params: &PreferenceParams,
    support: &[bool],
) -> Option<Vec<f64>> {
    let space = market.returns[0].space();
    let ps = probability(space, support);
    if ps <= 0.0 {
        return None;
    }
    let n = market.n_assets();
    let zeta = params.zeta();
    let p = space.probabilities();
    let cond_mean = |f: &[f64]| -> f64 {
        f.iter()
            .zip(p)
            .zip(support)
            .filter(|(_, &s)| s)
            .map(|((v, w), _)| v * w)
            .sum::<f64>()
            / ps
    };
    let means: Vec<f64> = market
        .returns
        .iter()
        .map(|x| cond_mean(x.values()))
        .collect();
    let zmean = cond_mean(zeta.values());
    let var = DMatrix::from_fn(n, n, |i, j| {
        let (xi, xj) = (market.returns[i].values(), market.returns[j].values());
        (0..p.len())
            .filter(|&s| support[s])
            .map(|s| p[s] * (xi[s] - means[i]) * (xj[s] - means[j]))
            .sum::<f64>()
            / ps
    });
    let eig = SymmetricEigen::new(var.clone());
    let (lmin, lmax) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(lmin > 0.0) || lmax / lmin > MAX_CONDITION {
        return None;
    }
    let kappa = params.kappa();
    let rhs = DVector::from_fn(n, |k, _| {
        let x = market.returns[k].values();
        let e_rz: f64 = (0..p.len())
            .map(|s| p[s] * (x[s] - market.r) * zeta.values()[s])
            .sum();
        let cov_rz: f64 = (0..p.len())
            .filter(|&s| support[s])
            .map(|s| p[s] * (x[s] - means[k]) * (zeta.values()[s] - zmean))
            .sum::<f64>()
            / ps;
        (e_rz + kappa * (means[k] - market.r)) / ps - cov_rz
    });
    let alpha = var.lu().solve(&rhs)? / params.theta();
    Some(alpha.iter().copied().collect())
}

/// max_k |E[(R_k − r) Y]|.
fn gradient_residual(market: &SinglePeriodMarket, y: &RandomVariable) -> f64 {
    market
        .returns
        .iter()
        .map(|x| expect(&(&(x - market.r) * y)).abs())
        .fold(0.0, f64::max)
}

/// Solves the single-period SMMV problem through the dual projection.
pub fn smmv_solve(market: &SinglePeriodMarket, params: &PreferenceParams) -> Result<StaticOutcome> {
    let (y, nu) = match risk_neutral_projection(market, params.zeta())? {
        Projection::Infeasible {
            phase_one_objective,
        } => {
            return Ok(StaticOutcome::NoSolution {
                phase_one_objective,
            })
        }
        Projection::Feasible { y, nu, .. } => (y, nu),
    };
    let kappa = params.kappa();
    let theta = params.theta();
    let kz = y.zip_map(params.zeta(), |y, z| (y - z).max(0.0))?;
    let support: Vec<bool> = kz.values().iter().map(|&v| v > SUPPORT_TOL).collect();
    let (alpha, alpha_source) = match conditional_alpha(market, params, &support) {
        Some(a) => (a, AlphaSource::ConditionalMoments),
        None => (
            nu[1..].iter().map(|v| -v / theta).collect(),
            AlphaSource::Multipliers,
        ),
    };
    let x = market.wealth(&alpha);
    let lambda = solve_lambda(&x, params)?.lambda;
    let zstar = kz.map(|v| v / kappa);
    let beta = kkt_beta(&x, params, &zstar, lambda)?;
    let gradient_residual = gradient_residual(market, &y);
    Ok(StaticOutcome::Solved(StaticSolution {
        alpha,
        lambda,
        zstar,
        beta,
        mu: theta * lambda,
        gradient_residual,
        alpha_source,
    }))
}

/// β = κZ* + ζ + θX − θλ, the stationarity row solved for β.
fn kkt_beta(
    x: &RandomVariable,
    params: &PreferenceParams,
    zstar: &RandomVariable,
    lambda: f64,
) -> Result<RandomVariable> {
    let (k, th) = (params.kappa(), params.theta());
    let s = zstar.zip_map(params.zeta(), |z, zeta| k * z + zeta)?;
    s.zip_map(x, |s, x| s + th * x - th * lambda)
}

/// Residuals of the optimality conditions at a solution.
#[derive(Debug, Clone)]
pub struct KktReport {
    pub beta: RandomVariable,
    /// θλ.
    pub mu: f64,
    /// Multiplier in the stationarity row 0 = κZ* + ζ + ⟨θα, R⟩ − β + μ,
    /// which equals θr(1 − ⟨α, 1⟩) − θλ.
    pub mu_stationarity: f64,
    /// max |κZ* + ζ + ⟨θα, R⟩ − β + μ_stationarity|.
    pub stationarity: f64,
    /// |E[Z*] − 1|.
    pub normalisation: f64,
    /// max(0, −min β, −min Z*).
    pub sign: f64,
    /// max |β Z*|.
    pub complementarity: f64,
    /// max |κZ* − (θλ − θX − ζ)_+|.
    pub truncation: f64,
    /// max_k |α* − α_mv(1) − (1/θ)Var[R]⁻¹Cov[R, β]|.
    pub alpha_identity: f64,
    /// |⟨θα*, Cov[R, β]⟩ − Var[β] − E[β(1 − ζ)]|.
    pub beta_identity: f64,
    /// max_k |E[(R_k − r)(κZ* + ζ)]|.
    pub gradient: f64,
    /// Max residual of the (n+1)-equation optimality system.
    pub optimality_system: f64,
    pub var_beta: f64,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.stationarity,
            self.normalisation,
            self.sign,
            self.complementarity,
            self.truncation,
            self.alpha_identity,
            self.beta_identity,
            self.gradient,
            self.optimality_system,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// β, μ and every KKT residual for a solution.
pub fn kkt_quantities(
    market: &SinglePeriodMarket,
    params: &PreferenceParams,
    sol: &StaticSolution,
) -> Result<KktReport> {
    let (k, th) = (params.kappa(), params.theta());
    let zeta = params.zeta();
    let x = market.wealth(&sol.alpha);
    let beta = kkt_beta(&x, params, &sol.zstar, sol.lambda)?;
    let sum_alpha: f64 = sol.alpha.iter().sum();
    let mu_stationarity = th * market.r * (1.0 - sum_alpha) - th * sol.lambda;

    let n = zeta.len();
    let (mut stationarity, mut complementarity, mut truncation) = (0.0f64, 0.0f64, 0.0f64);
    let mut sign = 0.0f64;
    for s in 0..n {
        let z = sol.zstar.values()[s];
        let b = beta.values()[s];
        let zt = zeta.values()[s];
        let ar: f64 = sol
            .alpha
            .iter()
            .zip(&market.returns)
            .map(|(a, ret)| th * a * ret.values()[s])
            .sum();
        stationarity = stationarity.max((k * z + zt + ar - b + mu_stationarity).abs());
        complementarity = complementarity.max((b * z).abs());
        let trunc = (th * sol.lambda - th * x.values()[s] - zt).max(0.0);
        truncation = truncation.max((k * z - trunc).abs());
        sign = sign.max(-b).max(-z);
    }
    let normalisation = (expect(&sol.zstar) - 1.0).abs();

    let cov_rb = market.cov_with(&beta)?;
    let amv = mv_weights(market, th, 1.0)?;
    let corr = market.cov_inverse() * &cov_rb / th;
    let alpha_identity = (0..market.n_assets())
        .map(|i| (sol.alpha[i] - amv[i] - corr[i]).abs())
        .fold(0.0, f64::max);
    let var_beta = variance(&beta);
    let e_b1z = expect(&beta.zip_map(zeta, |b, z| b * (1.0 - z))?);
    let lhs: f64 = sol
        .alpha
        .iter()
        .zip(cov_rb.iter())
        .map(|(a, c)| th * a * c)
        .sum();
    let beta_identity = (lhs - var_beta - e_b1z).abs();

    let y = sol.zstar.zip_map(zeta, |z, zt| k * z + zt)?;
    let gradient = gradient_residual(market, &y);
    let optimality_system = optimality_system_residual(market, params, &sol.alpha, sol.lambda)?;
    Ok(KktReport {
        beta,
        mu: th * sol.lambda,
        mu_stationarity,
        stationarity,
        normalisation,
        sign,
        complementarity,
        truncation,
        alpha_identity,
        beta_identity,
        gradient,
        optimality_system,
        var_beta,
    })
}

/// Max residual of the system
/// E[(R−r1)ζ] + κE[R−r1|S] − P(S)Cov[R,ζ|S] = P(S)Var[R|S]θα,
/// κ/θ = E[(λ − X − ζ/θ)_+], with S = {X + ζ/θ < λ}.
pub fn optimality_system_residual(
    market: &SinglePeriodMarket,
    params: &PreferenceParams,
    alpha: &[f64],
    lambda: f64,
) -> Result<f64> {
    let th = params.theta();
    let zeta = params.zeta();
    let x = market.wealth(alpha);
    let u = x.zip_map(zeta, |x, z| x + z / th)?;
    let support: Vec<bool> = u
        .values()
        .iter()
        .map(|&v| v < lambda - SUPPORT_TOL)
        .collect();
    let space = u.space();
    let p = space.probabilities();
    let ps = probability(space, &support);
    let second = (params.kappa() / th - expect(&u.map(|v| (lambda - v).max(0.0)))).abs();
    if ps <= 0.0 {
        return Ok(second);
    }
    let cm = |f: &[f64]| -> f64 {
        (0..p.len())
            .filter(|&s| support[s])
            .map(|s| p[s] * f[s])
            .sum::<f64>()
            / ps
    };
    let zmean = cm(zeta.values());
    let n = market.n_assets();
    let means: Vec<f64> = market.returns.iter().map(|r| cm(r.values())).collect();
    let mut worst = second;
    for k in 0..n {
        let rk = market.returns[k].values();
        let e_rz: f64 = (0..p.len())
            .map(|s| p[s] * (rk[s] - market.r) * zeta.values()[s])
            .sum();
        let cov_rz = cm(&(0..p.len())
            .map(|s| (rk[s] - means[k]) * (zeta.values()[s] - zmean))
            .collect::<Vec<_>>());
        let lhs = e_rz + params.kappa() * (means[k] - market.r) - ps * cov_rz;
        let mut rhs = 0.0;
        for j in 0..n {
            let rj = market.returns[j].values();
            let v = cm(&(0..p.len())
                .map(|s| (rk[s] - means[k]) * (rj[s] - means[j]))
                .collect::<Vec<_>>());
            rhs += ps * v * th * alpha[j];
        }
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// ⟨θα, E[(R − r1)(κZ + ζ)]⟩ + ½E[(κZ + ζ)²] − ½, the max-min objective.
pub fn saddle_objective(
    market: &SinglePeriodMarket,
    params: &PreferenceParams,
    alpha: &[f64],
    z: &RandomVariable,
) -> Result<f64> {
    let k = params.kappa();
    let y = z.zip_map(params.zeta(), |z, zt| k * z + zt)?;
    let lin: f64 = alpha
        .iter()
        .zip(&market.returns)
        .map(|(a, ret)| params.theta() * a * expect(&(&(ret - market.r) * &y)))
        .sum();
    Ok(lin + 0.5 * expect(&(&y * &y)) - 0.5)
}

/// Implication table for a single risky asset.
#[derive(Debug, Clone)]
pub struct SignReport {
    pub alpha: f64,
    pub alpha_mv: f64,
    pub excess_mean: f64,
    pub cov_r_beta: f64,
    pub in_domain: bool,
    /// The table presumes ζ ≤ 1 statewise.
    pub zeta_at_most_one: bool,
    pub violations: Vec<String>,
}

/// Tolerance for the non-strict relations of the sign table.
pub const SIGN_TOL: f64 = 1e-9;

pub fn sign_compare(
    market: &SinglePeriodMarket,
    params: &PreferenceParams,
    sol: &StaticSolution,
) -> Result<SignReport> {
    if market.n_assets() != 1 {
        return invalid(format!(
            "sign comparison needs exactly one risky asset, got {}",
            market.n_assets()
        ));
    }
    let th = params.theta();
    let alpha = sol.alpha[0];
    let alpha_mv = mv_weights(market, th, 1.0)?[0];
    let excess_mean = expect(&market.returns[0]) - market.r;
    let x = market.wealth(&sol.alpha);
    let beta = kkt_beta(&x, params, &sol.zstar, sol.lambda)?;
    let cov_r_beta = covariance(&market.returns[0], &beta)?;
    let in_domain = in_domain_g(&x, params);
    let zeta_at_most_one = params.zeta().values().iter().all(|&z| z <= 1.0);
    // robustly outside the domain: some state clears λ by a visible margin
    let outside = x
        .values()
        .iter()
        .zip(params.zeta().values())
        .any(|(&x, &z)| x + z / th > sol.lambda + 1e-9);
    let tol = SIGN_TOL * (1.0 + alpha.abs() + alpha_mv.abs());
    let mut v = Vec::new();
    let mut need = |ok: bool, what: &str| {
        if !ok {
            v.push(what.to_string());
        }
    };
    if alpha > tol {
        need(excess_mean >= -tol, "alpha > 0 but E[R] < r");
        need(cov_r_beta >= -tol, "alpha > 0 but Cov[R, beta] < 0");
        need(alpha >= alpha_mv - tol, "alpha > 0 but alpha < alpha_mv");
        need(alpha_mv >= -tol, "alpha > 0 but alpha_mv < 0");
        if outside {
            need(
                cov_r_beta > 0.0,
                "alpha > 0 outside G but Cov[R, beta] <= 0",
            );
            need(
                alpha > alpha_mv,
                "alpha > 0 outside G but alpha <= alpha_mv",
            );
        }
    } else if alpha < -tol {
        need(excess_mean <= tol, "alpha < 0 but E[R] > r");
        need(cov_r_beta <= tol, "alpha < 0 but Cov[R, beta] > 0");
        need(alpha <= alpha_mv + tol, "alpha < 0 but alpha > alpha_mv");
        need(alpha_mv <= tol, "alpha < 0 but alpha_mv > 0");
        if outside {
            need(
                cov_r_beta < 0.0,
                "alpha < 0 outside G but Cov[R, beta] >= 0",
            );
            need(
                alpha < alpha_mv,
                "alpha < 0 outside G but alpha >= alpha_mv",
            );
        }
    } else {
        need(in_domain, "alpha = 0 but X outside G");
        need(variance(&beta) <= tol, "alpha = 0 but Var[beta] > 0");
        need(alpha_mv.abs() <= tol, "alpha = 0 but alpha_mv != 0");
    }
    Ok(SignReport {
        alpha,
        alpha_mv,
        excess_mean,
        cov_r_beta,
        in_domain,
        zeta_at_most_one,
        violations: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probspace::FiniteSpace;

    #[test]
    fn mv_weights_two_state() {
        let s = FiniteSpace::new(vec![0.5, 0.5]).unwrap();
        let r = RandomVariable::new(&s, vec![0.2, -0.1]).unwrap();
        let m = SinglePeriodMarket::new(0.02, vec![r]).unwrap();
        let a = mv_weights(&m, 2.0, 1.0).unwrap();
        assert!((a[0] - 2.0 / 3.0).abs() < 1e-12);
        let a2 = mv_weights(&m, 2.0, 2.0).unwrap();
        assert!((2.0 * a2[0] - a[0]).abs() < 1e-15);
    }

    #[test]
    fn no_premium_gives_zero() {
        let s = FiniteSpace::uniform(3).unwrap();
        let r = RandomVariable::new(&s, vec![0.1, 0.0, -0.1]).unwrap();
        let m = SinglePeriodMarket::new(0.0, vec![r]).unwrap();
        let p = PreferenceParams::new(2.0, RandomVariable::constant(&s, 0.3)).unwrap();
        let StaticOutcome::Solved(sol) = smmv_solve(&m, &p).unwrap() else {
            panic!()
        };
        assert!(sol.alpha[0].abs() < 1e-12);
        for z in sol.zstar.values() {
            assert!((z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_covariance_rejected() {
        let s = FiniteSpace::uniform(3).unwrap();
        let r = RandomVariable::constant(&s, 0.05);
        assert!(SinglePeriodMarket::new(0.0, vec![r]).is_err());
    }

    #[test]
    fn complete_market_infeasible_floor() {
        // q = (4/3, 2/3) is the unique density; ζ = 0.7 exceeds it in state 2
        let s = FiniteSpace::new(vec![0.5, 0.5]).unwrap();
        let r = RandomVariable::new(&s, vec![0.1, 0.4]).unwrap();
        let m = SinglePeriodMarket::new(0.2, vec![r]).unwrap();
        let z = RandomVariable::constant(&s, 0.7);
        assert!(matches!(
            risk_neutral_projection(&m, &z).unwrap(),
            Projection::Infeasible { .. }
        ));
        let z = RandomVariable::constant(&s, 0.5);
        let Projection::Feasible { y, .. } = risk_neutral_projection(&m, &z).unwrap() else {
            panic!()
        };
        assert!((y.values()[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((y.values()[1] - 2.0 / 3.0).abs() < 1e-12);
    }
}
