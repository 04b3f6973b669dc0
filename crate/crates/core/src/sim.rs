//! Euler Monte-Carlo for the controlled wealth and adversary states.
//!
//! Wealth is stepped as Euler on the discounted process and then compounded
//! over the step, so the riskless part is exact; Λ uses its exponential form.
//!
//! Each path draws its Brownian increments from a ChaCha20 generator seeded
//! with the run seed and positioned on stream `path_index`, so results do not
//! depend on thread scheduling. With antithetic sampling, paths 2k and 2k+1
//! share a stream and use opposite increments.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::ct_game::{GameState, PenaltyParams, Strategy, Unconstrained};
use crate::ct_market::{CtMarket, ZetaModel};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return invalid("simulation needs at least one path and one step");
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            return invalid(format!(
                "antithetic sampling needs an even path count, got {}",
                self.n_paths
            ));
        }
        Ok(())
    }

    /// Number of independent sampling units (pairs when antithetic).
    fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

/// Terminal values of every path.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub x_t: Vec<f64>,
    pub z_t: Vec<f64>,
    pub lambda_t: Vec<f64>,
    /// Whether Z reached zero at some grid time.
    pub hit_zero: Vec<bool>,
    pub config: SimConfig,
}

/// A fully recorded path.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Brownian increments; `dw[k]` drives the step from `times[k]`.
    pub dw: Vec<f64>,
}

/// A Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub statistic: String,
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normals(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = rng_for(seed, stream);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

struct Stepper<'a> {
    market: &'a CtMarket,
    strategy: &'a dyn Strategy,
    start: GameState,
    dt: f64,
}

impl Stepper<'_> {
    /// Runs one path; `record` receives every state and increment.
    fn run(
        &self,
        xi: &[f64],
        sign: f64,
        mut record: impl FnMut(&GameState, f64),
    ) -> Result<(GameState, bool)> {
        let m = self.market;
        let sq = self.dt.sqrt();
        let mut s = self.start;
        let mut hit = s.z <= 0.0;
        for (k, &e) in xi.iter().enumerate() {
            let dw = sign * sq * e;
            record(&s, dw);
            let (sigma, th) = (m.sigma_at(s.t), m.theta_at(s.t));
            let pi = self.strategy.pi(&s);
            let gamma = self.strategy.gamma(&s);
            if !pi.is_finite() || !gamma.is_finite() {
                return Err(Error::NonFinite(format!(
                    "strategy at t = {}, x = {}, z = {}",
                    s.t, s.x, s.z
                )));
            }
            let next = self.start.t + (k + 1) as f64 * self.dt;
            let growth = m.r_curve().integrate(s.t, next).exp();
            s.x = growth * (s.x + pi * sigma * (th * self.dt + dw));
            s.z += gamma * dw;
            s.lambda *= (-th * dw - 0.5 * th * th * self.dt).exp();
            s.t = next;
            hit |= s.z <= 0.0;
        }
        Ok((s, hit))
    }
}

fn stepper<'a>(
    market: &'a CtMarket,
    strategy: &'a dyn Strategy,
    start: GameState,
    cfg: &SimConfig,
) -> Result<Stepper<'a>> {
    cfg.validate()?;
    start.validate(market)?;
    Ok(Stepper {
        market,
        strategy,
        start,
        dt: (market.horizon() - start.t) / cfg.n_steps as f64,
    })
}

/// Simulates `cfg.n_paths` paths from `start` to the horizon.
pub fn simulate(
    market: &CtMarket,
    strategy: &dyn Strategy,
    start: GameState,
    cfg: SimConfig,
) -> Result<PathEnsemble> {
    let st = stepper(market, strategy, start, &cfg)?;
    let signs: &[f64] = if cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let units: Vec<Vec<(GameState, bool)>> = (0..cfg.units() as u64)
        .into_par_iter()
        .map(|u| {
            let xi = normals(cfg.seed, u, cfg.n_steps);
            signs.iter().map(|&sg| st.run(&xi, sg, |_, _| {})).collect()
        })
        .collect::<Result<_>>()?;
    let n = cfg.n_paths;
    let mut out = PathEnsemble {
        x_t: Vec::with_capacity(n),
        z_t: Vec::with_capacity(n),
        lambda_t: Vec::with_capacity(n),
        hit_zero: Vec::with_capacity(n),
        config: cfg,
    };
    for (s, hit) in units.into_iter().flatten() {
        out.x_t.push(s.x);
        out.z_t.push(s.z);
        out.lambda_t.push(s.lambda);
        out.hit_zero.push(hit);
    }
    Ok(out)
}

/// Records full trajectories; meant for small path counts.
pub fn simulate_paths(
    market: &CtMarket,
    strategy: &dyn Strategy,
    start: GameState,
    cfg: SimConfig,
) -> Result<Vec<Trajectory>> {
    let st = stepper(market, strategy, start, &cfg)?;
    let signs: &[f64] = if cfg.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let units: Vec<Vec<Trajectory>> = (0..cfg.units() as u64)
        .into_par_iter()
        .map(|u| {
            let xi = normals(cfg.seed, u, cfg.n_steps);
            signs
                .iter()
                .map(|&sg| {
                    let mut tr = Trajectory {
                        times: vec![],
                        x: vec![],
                        z: vec![],
                        lambda: vec![],
                        dw: vec![],
                    };
                    let (end, _) = st.run(&xi, sg, |s, dw| {
                        tr.times.push(s.t);
                        tr.x.push(s.x);
                        tr.z.push(s.z);
                        tr.lambda.push(s.lambda);
                        tr.dw.push(dw);
                    })?;
                    tr.times.push(end.t);
                    tr.x.push(end.x);
                    tr.z.push(end.z);
                    tr.lambda.push(end.lambda);
                    Ok(tr)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(units.into_iter().flatten().collect())
}

/// Mean and standard error, treating consecutive pairs as one unit when
/// `paired` is set.
pub fn mean_and_se(samples: &[f64], paired: bool) -> (f64, f64) {
    let units: Vec<f64> = if paired {
        samples
            .chunks(2)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    } else {
        samples.to_vec()
    };
    let n = units.len() as f64;
    let mean = units.iter().sum::<f64>() / n;
    if units.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = units.iter().map(|u| (u - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn estimate(name: &str, samples: &[f64], cfg: &SimConfig) -> Estimate {
    let (estimate, std_error) = mean_and_se(samples, cfg.antithetic);
    Estimate {
        statistic: name.to_string(),
        estimate,
        std_error,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
    }
}

/// Per-path game payoff
/// X_T(ζ + κZ_T) + ((ζ + κZ_T)² − ζ²)/(2θ) − (ρ/2)(X_T − c)².
pub fn game_payoff(
    ens: &PathEnsemble,
    theta: f64,
    zeta: &ZetaModel,
    penalty: Option<PenaltyParams>,
) -> Vec<f64> {
    let k = zeta.kappa();
    (0..ens.x_t.len())
        .map(|j| {
            let zt = zeta.at_terminal(ens.lambda_t[j]);
            let mass = zt + k * ens.z_t[j];
            let x = ens.x_t[j];
            let pen = penalty.map_or(0.0, |p| 0.5 * p.rho * (x - p.c).powi(2));
            x * mass + (mass * mass - zt * zt) / (2.0 * theta) - pen
        })
        .collect()
}

pub fn estimate_objective(
    ens: &PathEnsemble,
    theta: f64,
    zeta: &ZetaModel,
    penalty: Option<PenaltyParams>,
) -> Estimate {
    estimate(
        "objective",
        &game_payoff(ens, theta, zeta, penalty),
        &ens.config,
    )
}

/// P(Z reaches zero before the horizon) on the simulation grid.
pub fn estimate_hitting_probability(ens: &PathEnsemble) -> Estimate {
    let s: Vec<f64> = ens
        .hit_zero
        .iter()
        .map(|&h| if h { 1.0 } else { 0.0 })
        .collect();
    estimate("hitting_probability", &s, &ens.config)
}

/// Hitting probability of Z under the unconstrained saddle feedback.
pub fn hitting_probability(
    market: &CtMarket,
    theta: f64,
    zeta: ZetaModel,
    start: GameState,
    cfg: SimConfig,
) -> Result<Estimate> {
    if !(start.z > 0.0) {
        return invalid(format!("hitting probability needs z > 0, got {}", start.z));
    }
    let u = Unconstrained::new(market, theta, zeta)?;
    Ok(estimate_hitting_probability(&simulate(
        market, &u, start, cfg,
    )?))
}

/// Sample mean of an arbitrary terminal statistic.
pub fn estimate_terminal(
    ens: &PathEnsemble,
    name: &str,
    f: impl Fn(f64, f64, f64) -> f64,
) -> Estimate {
    let s: Vec<f64> = (0..ens.x_t.len())
        .map(|j| f(ens.x_t[j], ens.z_t[j], ens.lambda_t[j]))
        .collect();
    estimate(name, &s, &ens.config)
}

/// Draws of L = exp(−y√v − v/2) with y standard normal.
pub fn sample_lognormal_ratio(v: f64, n: usize, seed: u64, antithetic: bool) -> Result<Vec<f64>> {
    if !(v >= 0.0) || !v.is_finite() {
        return invalid(format!(
            "lognormal variance must be finite and ≥ 0, got {v}"
        ));
    }
    if antithetic && n % 2 == 1 {
        return invalid("antithetic sampling needs an even sample count");
    }
    let sv = v.sqrt();
    let units = if antithetic { n / 2 } else { n };
    let ys = normals(seed, 0, units);
    let l = |y: f64| (-y * sv - 0.5 * v).exp();
    Ok(if antithetic {
        ys.iter().flat_map(|&y| [l(y), l(-y)]).collect()
    } else {
        ys.iter().map(|&y| l(y)).collect()
    })
}
