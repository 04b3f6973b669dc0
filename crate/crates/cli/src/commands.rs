use smmv::ct_game::GameState;
use smmv::ct_game::{
    self as game, DualityContext, EmbeddingStrategy, MeanVariance, Regime, Strategy,
};
use smmv::ct_market::{consistency_condition, mv_feedback, CtMarket, ZetaModel};
use smmv::preference::*;
use smmv::probspace::{black_scholes_call, expect, LognormalQuadrature};
use smmv::sim::{self, SimConfig};
use smmv::static_portfolio::*;
use smmv::{Error, Result};

use crate::config::{self, GameConfig, StrategyKind};
use crate::table::{num, Report, Table};
use crate::{Cli, Command};

/// Runs a command; the flag is false when an oracle check failed.
pub fn run(cli: &Cli) -> Result<(Table, bool)> {
    if !(cli.tol > 0.0) || !cli.tol.is_finite() {
        return Err(Error::Validation(format!(
            "--tol must be positive, got {}",
            cli.tol
        )));
    }
    let quad = LognormalQuadrature::new(cli.quad_nodes)?;
    let text = match (&cli.config, cli.command) {
        (Some(p), _) => Some(config::read(p)?),
        (None, Command::OracleCheck) => None,
        (None, _) => {
            return Err(Error::Validation(
                "--config is required for this command".into(),
            ))
        }
    };
    let text = text.as_deref();
    match cli.command {
        Command::EvalPref => eval_pref(text.unwrap_or_default()).map(|t| (t, true)),
        Command::SolveStatic => solve_static(text.unwrap_or_default()).map(|t| (t, true)),
        Command::SolveCt => solve_ct(cli, quad, text.unwrap_or_default()).map(|t| (t, true)),
        Command::Simulate => simulate(cli, quad, text.unwrap_or_default()).map(|t| (t, true)),
        Command::OracleCheck => oracle_check(cli, quad, text),
    }
}

fn eval_pref(text: &str) -> Result<Table> {
    let cfg = config::preference_config(text)?;
    let p = &cfg.params;
    let mut out = Report::new();
    for (name, f) in &cfg.payoffs {
        let lam = solve_lambda(f, p)?;
        out.num(name, "lambda", lam.lambda, "λ − E[(f + ζ/θ) ∧ λ] = κ/θ");
        out.num(
            name,
            "lambda_residual",
            lam.residual,
            "λ − E[(f + ζ/θ) ∧ λ] − κ/θ",
        );
        out.num(
            name,
            "smmv_value",
            smmv_value(f, p)?,
            "U_θ(f ∧ (λ − ζ/θ)) + E[(f − f ∧ (λ − ζ/θ))ζ]",
        );
        out.num(
            name,
            "mv_utility",
            mv_utility(f, p.theta()),
            "E[f] − (θ/2)Var[f]",
        );
        out.flag(
            name,
            "in_domain",
            in_domain_g(f, p),
            "f − E[f] ≤ (1 − ζ)/θ statewise",
        );
        out.series(
            name,
            "dual_minimizer",
            smmv_gateaux(f, p)?.values(),
            "max(ζ, θ(λ − f))",
        );
    }
    Ok(out.into_table())
}

fn solve_static(text: &str) -> Result<Table> {
    let cfg = config::preference_config(text)?;
    let market = SinglePeriodMarket::from_document(&cfg.doc)?;
    let p = &cfg.params;
    let mut out = Report::new();
    let sol = match smmv_solve(&market, p)? {
        StaticOutcome::Solved(s) => s,
        StaticOutcome::NoSolution {
            phase_one_objective,
        } => {
            out.text(
                "portfolio",
                "status",
                "",
                "no_solution",
                "no Z ≥ 0 with E[Z] = 1 and E[(R − r)(κZ + ζ)] = 0",
            );
            out.num(
                "portfolio",
                "phase_one_objective",
                phase_one_objective,
                "min total infeasibility",
            );
            return Ok(out.into_table());
        }
    };
    out.text("portfolio", "status", "", "solved", "");
    let mv = mv_weights(&market, p.theta(), 1.0)?;
    for (k, name) in market.names().iter().enumerate() {
        out.text(
            name,
            "alpha",
            &k.to_string(),
            num(sol.alpha[k]),
            "optimal risky amount",
        );
        out.text(
            name,
            "alpha_mv",
            &k.to_string(),
            num(mv[k]),
            "(1/θ)Var[R]⁻¹(E[R] − r)",
        );
    }
    out.num("portfolio", "lambda", sol.lambda, "λ of the optimal wealth");
    out.num("portfolio", "mu", sol.mu, "θλ");
    out.text(
        "portfolio",
        "alpha_source",
        "",
        format!("{:?}", sol.alpha_source),
        "",
    );
    out.series(
        "portfolio",
        "z_star",
        sol.zstar.values(),
        "optimal adversarial density",
    );
    let k = kkt_quantities(&market, p, &sol)?;
    out.num("beta", "mean", expect(&k.beta), "E[β]");
    out.num("beta", "variance", k.var_beta, "Var[β]");
    out.num(
        "beta",
        "min",
        k.beta
            .values()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
        "min β",
    );
    let residuals = [
        (
            "stationarity",
            k.stationarity,
            "κZ* + ζ + ⟨θα, R⟩ − β + μ = 0",
        ),
        ("normalisation", k.normalisation, "E[Z*] = 1"),
        ("sign", k.sign, "β ≥ 0, Z* ≥ 0"),
        ("complementarity", k.complementarity, "βZ* = 0"),
        ("truncation", k.truncation, "κZ* = (θλ − θX − ζ)_+"),
        (
            "alpha_identity",
            k.alpha_identity,
            "α* = α_mv + (1/θ)Var[R]⁻¹Cov[R, β]",
        ),
        (
            "beta_identity",
            k.beta_identity,
            "⟨θα*, Cov[R, β]⟩ = Var[β] + E[β(1 − ζ)]",
        ),
        ("gradient", k.gradient, "E[(R − r)(κZ* + ζ)] = 0"),
        (
            "optimality_system",
            k.optimality_system,
            "first-order system in (α, λ)",
        ),
    ];
    for (name, v, def) in residuals {
        out.num("kkt", name, v, def);
    }
    if market.n_assets() == 1 {
        let s = sign_compare(&market, p, &sol)?;
        out.num("sign", "excess_mean", s.excess_mean, "E[R] − r");
        out.num("sign", "cov_r_beta", s.cov_r_beta, "Cov[R, β]");
        out.flag(
            "sign",
            "in_domain",
            s.in_domain,
            "optimal wealth in the monotone domain",
        );
        out.flag(
            "sign",
            "zeta_at_most_one",
            s.zeta_at_most_one,
            "ζ ≤ 1 statewise",
        );
        out.text("sign", "violations", "", s.violations.len().to_string(), "");
        for (i, v) in s.violations.iter().enumerate() {
            out.text("sign", "violation", &i.to_string(), v.clone(), "");
        }
    }
    Ok(out.into_table())
}

fn solve_ct(cli: &Cli, quad: LognormalQuadrature, text: &str) -> Result<Table> {
    let cfg = GameConfig::parse(text)?;
    let (m, th, zeta, st, pen) = (
        &cfg.market,
        cfg.risk_aversion,
        cfg.zeta,
        cfg.state(),
        cfg.penalty()?,
    );
    let mut out = Report::new();
    let cstar = cstar_from(m, th, &st);
    out.num("market", "c_star", cstar, "xe^{∫ₜᵀr} + (e^{∫ₜᵀϑ²} − 1)/θ");
    out.flag(
        "market",
        "consistency",
        consistency_condition(m, &zeta),
        "ζ ≤ Λ_T almost surely",
    );
    out.num(
        "mean_variance",
        "pi",
        mv_feedback(m, th, cstar, st.t, st.x)?,
        "−(ϑ/σ)(xe^{∫r} − c* − 1/θ)e^{−∫r}",
    );

    let u = game::unconstrained_saddle(m, th, zeta, &st)?;
    out.num(
        "unconstrained",
        "pi",
        u.pi,
        "(ϑ/(θσ))(E[ζ|F] + κz)e^{∫ϑ² − ∫r}",
    );
    out.num("unconstrained", "gamma", u.gamma, "adversary volatility");
    out.num(
        "unconstrained",
        "value",
        u.value,
        "game value without Z ≥ 0",
    );
    let a = game::approx_saddle(m, th, zeta, &st, pen)?;
    out.num("approximate", "pi", a.pi, "penalised saddle without Z ≥ 0");
    out.num("approximate", "gamma", a.gamma, "adversary volatility");
    out.num(
        "approximate",
        "value",
        a.value,
        "penalised game value without Z ≥ 0",
    );

    let ctx = DualityContext::new(m, th, zeta, st, pen)?.with_quadrature(quad);
    let sol = game::solve_embedding_duality(&ctx)?;
    check_residuals(cli, sol.residuals, "embedding-duality")?;
    out.text("embedding", "regime", "", format!("{:?}", sol.regime), "");
    out.text("embedding", "solver", "", format!("{:?}", sol.path), "");
    out.flag(
        "embedding",
        "linear_condition",
        game::linear_regime_holds(&ctx),
        "κz + bΛ ≥ θB/(θ + ρe^V) ≥ bΛ",
    );
    out.num("embedding", "h", sol.h, "dual variable");
    out.num("embedding", "w", sol.w, "embedding variable");
    out.num(
        "embedding",
        "w_lower_bound",
        game::w_lower_bound(&ctx),
        "e^{−V}(ρ(c − xe^{∫r}) + Ẽ[ζ|F])/ρ",
    );
    out.num(
        "embedding",
        "residual_first",
        sol.residuals.0,
        "gE[(i + sL)_+] − κz, relative",
    );
    out.num(
        "embedding",
        "residual_second",
        sol.residuals.1,
        "ρwe^V − ρ(c − xe^{∫r}) − Ẽζ − gE[L(i + sL)_+], relative",
    );
    let (zt, strat) = game::terminal_z_and_strategy(&ctx, &sol);
    out.num(
        "embedding",
        "mean_terminal_z",
        zt.mean(ctx.quadrature(), ctx.variance())?,
        "E[Z_T]",
    );
    out.num(
        "embedding",
        "pi",
        strat.try_pi(&st)?,
        "investor feedback at the state",
    );
    out.num(
        "embedding",
        "gamma",
        strat.try_gamma(&st)?,
        "adversary feedback at the state",
    );
    if let ZetaModel::Constant { zeta0 } = zeta {
        if zeta0 > 0.0
            && st.z > 0.0
            && !game::black_scholes_form_excluded(&ctx)
            && sol.regime != Regime::Linear
        {
            let bs = game::solve_constant_zeta_bs(&ctx)?;
            check_residuals(cli, bs.residuals, "Black-Scholes form")?;
            out.text("black_scholes", "solver", "", format!("{:?}", bs.path), "");
            out.num("black_scholes", "h", bs.h, "dual variable");
            out.num("black_scholes", "w", bs.w, "embedding variable");
            out.num(
                "black_scholes",
                "strike",
                pen.c + zeta0 / ctx.g() - bs.h / zeta.kappa(),
                "c + ζ₀/g − h/κ",
            );
        }
    }
    Ok(out.into_table())
}

/// Mean-variance target for the problem started at the given state.
fn cstar_from(m: &CtMarket, theta: f64, st: &GameState) -> f64 {
    st.x * m.int_r(st.t).exp() + (m.int_theta2(st.t).exp() - 1.0) / theta
}

fn check_residuals(cli: &Cli, r: (f64, f64), what: &str) -> Result<()> {
    if r.0 > cli.tol || r.1 > cli.tol {
        return Err(Error::NonConvergence(format!(
            "{what} residuals ({:e}, {:e}) exceed --tol {:e}",
            r.0, r.1, cli.tol
        )));
    }
    Ok(())
}

fn simulate(cli: &Cli, quad: LognormalQuadrature, text: &str) -> Result<Table> {
    let cfg = GameConfig::parse(text)?;
    let (m, th, zeta, st, pen) = (
        &cfg.market,
        cfg.risk_aversion,
        cfg.zeta,
        cfg.state(),
        cfg.penalty()?,
    );
    let sc = SimConfig {
        n_paths: cli.paths,
        n_steps: cli.steps,
        seed: cli.seed,
        antithetic: cfg.antithetic,
    };
    let embedding: EmbeddingStrategy;
    let (strategy, penalised): (Box<dyn Strategy>, bool) = match cfg.strategy {
        StrategyKind::Unconstrained => (Box::new(game::Unconstrained::new(m, th, zeta)?), false),
        StrategyKind::Approximate => (Box::new(game::Approximate::new(m, th, zeta, pen)?), true),
        StrategyKind::Boundary => (Box::new(game::Boundary::new(m, zeta, pen)?), true),
        StrategyKind::MeanVariance => {
            let cstar = cstar_from(m, th, &st);
            (Box::new(MeanVariance::new(m, th, cstar)?), false)
        }
        StrategyKind::Embedding => {
            let ctx = DualityContext::new(m, th, zeta, st, pen)?.with_quadrature(quad);
            let sol = game::solve_embedding_duality(&ctx)?;
            embedding = game::terminal_z_and_strategy(&ctx, &sol).1;
            (Box::new(embedding), true)
        }
    };
    let ens = sim::simulate(m, strategy.as_ref(), st, sc)?;
    let mut est = vec![
        (
            sim::estimate_objective(&ens, th, &zeta, penalised.then_some(pen)),
            "sample mean of the game payoff",
        ),
        (sim::estimate_terminal(&ens, "x_T", |x, _, _| x), "E[X_T]"),
        (sim::estimate_terminal(&ens, "z_T", |_, z, _| z), "E[Z_T]"),
        (
            sim::estimate_terminal(&ens, "lambda_T", |_, _, l| l),
            "E[Λ_T]",
        ),
    ];
    if st.z > 0.0 {
        est.push((
            sim::estimate_hitting_probability(&ens),
            "P(Z reaches 0 before T) on the grid",
        ));
    }
    let mut t = Table::new(&[
        "statistic",
        "estimate",
        "std_error",
        "n_paths",
        "seed",
        "definition",
    ]);
    for (e, def) in est {
        t.push(vec![
            e.statistic,
            num(e.estimate),
            num(e.std_error),
            e.n_paths.to_string(),
            e.seed.to_string(),
            def.into(),
        ]);
    }
    Ok(t)
}

/// Named test function of L.
type Payoff = (&'static str, fn(f64) -> f64);

struct Checks {
    table: Table,
    passed: bool,
}

impl Checks {
    fn new() -> Self {
        Self {
            table: Table::new(&["suite", "case", "error", "tolerance", "margin", "pass"]),
            passed: true,
        }
    }

    fn record(&mut self, suite: &str, case: String, error: f64, tol: f64) {
        let pass = error <= tol;
        self.passed &= pass;
        self.table.push(vec![
            suite.into(),
            case,
            num(error),
            num(tol),
            num(tol - error),
            pass.to_string(),
        ]);
    }
}

fn oracle_check(cli: &Cli, quad: LognormalQuadrature, text: Option<&str>) -> Result<(Table, bool)> {
    let mut c = Checks::new();
    for x in [0.5, 1.0, 2.0] {
        for k in [0.5, 1.0, 1.5] {
            for v in [0.01, 0.0625, 0.5, 1.0] {
                let q = quad.expect_kinked(v, k / x, |l| (x * l - k).max(0.0))?;
                c.record(
                    "black_scholes_vs_quadrature",
                    format!("x={x} K={k} v={v}"),
                    (q - black_scholes_call(x, k, v)).abs(),
                    cli.tol,
                );
            }
        }
    }
    for v in [0.0625, 0.5] {
        c.record(
            "density_moments",
            format!("E[L] v={v}"),
            (quad.expect(v, |l| l)? - 1.0).abs(),
            cli.tol,
        );
        c.record(
            "density_moments",
            format!("E[L²] v={v}"),
            (quad.expect(v, |l| l * l)? / v.exp() - 1.0).abs(),
            cli.tol,
        );
        let l = sim::sample_lognormal_ratio(v, cli.paths, cli.seed, false)?;
        let payoffs: [Payoff; 3] = [
            ("L", |l| l),
            ("L²", |l| l * l),
            ("(L − 1)_+", |l| (l - 1.0).max(0.0)),
        ];
        for (name, f) in payoffs {
            mc_case(&mut c, &quad, &l, v, name, f, 1.0)?;
        }
    }
    if let Some(text) = text {
        let cfg = GameConfig::parse(text)?;
        let ctx = DualityContext::new(
            &cfg.market,
            cfg.risk_aversion,
            cfg.zeta,
            cfg.state(),
            cfg.penalty()?,
        )?
        .with_quadrature(quad.clone());
        let sol = game::solve_embedding_duality(&ctx)?;
        c.record(
            "embedding_residuals",
            "first".into(),
            sol.residuals.0,
            cli.tol,
        );
        c.record(
            "embedding_residuals",
            "second".into(),
            sol.residuals.1,
            cli.tol,
        );
        let (i, s) = ctx.affine(sol.h, sol.w);
        let l = sim::sample_lognormal_ratio(ctx.variance(), cli.paths, cli.seed, false)?;
        let kink = if s != 0.0 { -i / s } else { f64::NAN };
        for (name, weight) in [("E[(i + sL)_+]", 0.0), ("E[L(i + sL)_+]", 1.0)] {
            let f = move |l: f64| l.powf(weight) * (i + s * l).max(0.0);
            let q = quad.expect_kinked(ctx.variance(), kink, f)?;
            let samples: Vec<f64> = l.iter().map(|&x| f(x)).collect();
            let (mean, se) = sim::mean_and_se(&samples, false);
            record_mc(&mut c, name, mean, se, q);
        }
    }
    Ok((c.table, c.passed))
}

fn mc_case(
    c: &mut Checks,
    quad: &LognormalQuadrature,
    l: &[f64],
    v: f64,
    name: &str,
    f: fn(f64) -> f64,
    kink: f64,
) -> Result<()> {
    let q = quad.expect_kinked(v, kink, f)?;
    let samples: Vec<f64> = l.iter().map(|&x| f(x)).collect();
    let (mean, se) = sim::mean_and_se(&samples, false);
    record_mc(c, &format!("E[{name}] v={v}"), mean, se, q);
    Ok(())
}

/// Monte Carlo passes when within three standard errors of quadrature.
fn record_mc(c: &mut Checks, case: &str, mean: f64, se: f64, exact: f64) {
    c.record(
        "monte_carlo_vs_quadrature",
        case.into(),
        (mean - exact).abs(),
        3.0 * se,
    );
}
