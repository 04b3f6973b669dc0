//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smmv::preference::PreferenceParams;
use smmv::probspace::{FiniteSpace, RandomVariable};

/// Root of Σ p (λ − u)_+ = c, solved exactly on the piecewise-linear branches.
pub fn lambda_exact(u: &[f64], p: &[f64], c: f64) -> f64 {
    let mut idx: Vec<usize> = (0..u.len()).collect();
    idx.sort_by(|&a, &b| u[a].total_cmp(&u[b]));
    let (mut mass, mut first) = (0.0, 0.0);
    for (k, &i) in idx.iter().enumerate() {
        mass += p[i];
        first += p[i] * u[i];
        let next = idx.get(k + 1).map(|&j| u[j]).unwrap_or(f64::INFINITY);
        if next * mass - first >= c {
            return (c + first) / mass;
        }
    }
    unreachable!("total mass reaches one")
}

/// λ for (f, ζ, θ) via [`lambda_exact`].
pub fn lambda_oracle(f: &[f64], zeta: &[f64], p: &[f64], theta: f64) -> f64 {
    let u: Vec<f64> = f.iter().zip(zeta).map(|(f, z)| f + z / theta).collect();
    let kappa = 1.0 - zeta.iter().zip(p).map(|(z, p)| z * p).sum::<f64>();
    lambda_exact(&u, p, kappa / theta)
}

pub fn mean(x: &[f64], p: &[f64]) -> f64 {
    x.iter().zip(p).map(|(x, p)| x * p).sum()
}

pub fn var(x: &[f64], p: &[f64]) -> f64 {
    let m = mean(x, p);
    x.iter().zip(p).map(|(x, p)| p * (x - m) * (x - m)).sum()
}

/// Minimiser of E[Yf] + Var[Y]/(2θ) over Y ≥ ζ, E[Y] = 1, from the
/// stationarity form Y = max(ζ, θ(ν − f)) with ν found by bisection.
pub fn dual_oracle(f: &[f64], zeta: &[f64], p: &[f64], theta: f64) -> (Vec<f64>, f64) {
    let y_of = |nu: f64| -> Vec<f64> {
        f.iter()
            .zip(zeta)
            .map(|(f, z)| z.max(theta * (nu - f)))
            .collect()
    };
    let fmin = f.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (fmin, fmax + 1.0 / theta);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean(&y_of(mid), p) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = y_of(0.5 * (lo + hi));
    let yf: Vec<f64> = y.iter().zip(f).map(|(y, f)| y * f).collect();
    let value = mean(&yf, p) + var(&y, p) / (2.0 * theta);
    (y, value)
}

/// SMMV value U_θ(f∧t) + E[(f − f∧t)ζ] with t = λ − ζ/θ and the exact λ.
pub fn smmv_oracle(f: &[f64], zeta: &[f64], p: &[f64], theta: f64) -> f64 {
    let lam = lambda_oracle(f, zeta, p, theta);
    let t: Vec<f64> = f
        .iter()
        .zip(zeta)
        .map(|(f, z)| f.min(lam - z / theta))
        .collect();
    let excess: Vec<f64> = f
        .iter()
        .zip(&t)
        .zip(zeta)
        .map(|((f, t), z)| (f - t) * z)
        .collect();
    mean(&t, p) - 0.5 * theta * var(&t, p) + mean(&excess, p)
}

/// Maximiser of a unimodal function on [a, b] by golden-section search.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Grid scan followed by golden-section refinement around the best node.
pub fn grid_golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64, nodes: usize, tol: f64) -> f64 {
    let h = (b - a) / nodes as f64;
    let best = (0..=nodes)
        .map(|k| a + k as f64 * h)
        .map(|x| (x, f(x)))
        .fold(
            (a, f64::NEG_INFINITY),
            |acc, v| if v.1 > acc.1 { v } else { acc },
        );
    golden_max(f, (best.0 - h).max(a), (best.0 + h).min(b), tol)
}

pub fn space(p: Vec<f64>) -> Arc<FiniteSpace> {
    FiniteSpace::new(p).expect("valid probabilities")
}

pub fn rv(s: &Arc<FiniteSpace>, v: &[f64]) -> RandomVariable {
    RandomVariable::new(s, v.to_vec()).expect("matching length")
}

pub fn params(theta: f64, zeta: &RandomVariable) -> PreferenceParams {
    PreferenceParams::new(theta, zeta.clone()).expect("valid parameters")
}

/// Probability vector with strictly positive entries.
pub fn probs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    })
}

/// A finite instance (p, f, ζ) with E[ζ] < 1.
#[derive(Debug, Clone)]
pub struct Instance {
    pub p: Vec<f64>,
    pub f: Vec<f64>,
    pub zeta: Vec<f64>,
    pub theta: f64,
}

pub fn instance(max_states: usize) -> impl Strategy<Value = Instance> {
    (2..=max_states)
        .prop_flat_map(|n| {
            (
                probs(n),
                prop::collection::vec(-3.0f64..3.0, n),
                prop::collection::vec(0.0f64..0.9, n),
                0.2f64..5.0,
            )
        })
        .prop_map(|(p, f, zeta, theta)| Instance { p, f, zeta, theta })
}

/// Seeded generator for loops outside proptest.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_probs(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Random arbitrage-free market with `n_assets` assets on `n_states`
/// states, plus a floor ζ; returns (p, returns, r, ζ).
pub fn random_market(
    rng: &mut impl Rng,
    n_states: usize,
    n_assets: usize,
    zeta_max: f64,
) -> (Vec<f64>, Vec<Vec<f64>>, f64, Vec<f64>) {
    let p = random_probs(rng, n_states);
    let r = 0.02;
    let returns = (0..n_assets)
        .map(|_| {
            let mut x: Vec<f64> = (0..n_states).map(|_| rng.random_range(-0.3..0.5)).collect();
            // straddle r so that no asset is a pure arbitrage on its own
            x[0] = rng.random_range(-0.3..0.0);
            x[1] = rng.random_range(0.1..0.5);
            x
        })
        .collect();
    let zeta = (0..n_states)
        .map(|_| rng.random_range(0.0..zeta_max))
        .collect();
    (p, returns, r, zeta)
}

/// V_{θ,ζ}(r + ⟨α, R − r⟩) from the exact-branch oracle.
pub fn static_value(
    alpha: &[f64],
    p: &[f64],
    returns: &[Vec<f64>],
    r: f64,
    zeta: &[f64],
    theta: f64,
) -> f64 {
    let x: Vec<f64> = (0..p.len())
        .map(|s| {
            r + alpha
                .iter()
                .zip(returns)
                .map(|(a, ret)| a * (ret[s] - r))
                .sum::<f64>()
        })
        .collect();
    smmv_oracle(&x, zeta, p, theta)
}

/// Maximiser of a concave function on the line by an expanding grid and
/// golden-section refinement.
pub fn line_argmax(f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let mut half = 4.0;
    loop {
        let a = grid_golden_max(&f, -half, half, 200, tol);
        if a.abs() < 0.9 * half || half > 1e6 {
            return a;
        }
        half *= 4.0;
    }
}

/// Grid/golden-section oracle for α* with one or two assets.
pub fn static_argmax(
    p: &[f64],
    returns: &[Vec<f64>],
    r: f64,
    zeta: &[f64],
    theta: f64,
) -> Vec<f64> {
    let v = |a: &[f64]| static_value(a, p, returns, r, zeta, theta);
    match returns.len() {
        1 => vec![line_argmax(|a| v(&[a]), 1e-9)],
        2 => {
            let inner = |a1: f64| line_argmax(|a2| v(&[a1, a2]), 1e-9);
            let a1 = line_argmax(|a1| v(&[a1, inner(a1)]), 1e-9);
            vec![a1, inner(a1)]
        }
        n => panic!("grid oracle supports one or two assets, got {n}"),
    }
}

/// Slacks of the four perturbation inequalities on λ for shifts ε·1_A of f
/// and of ζ; each entry is nonnegative when the inequality holds.
pub fn perturbation_slacks(i: &Instance, mask: &[bool], eps: f64) -> [f64; 4] {
    use smmv::preference::solve_lambda;
    let s = space(i.p.clone());
    let bump = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(mask)
            .map(|(v, &a)| if a { v + eps } else { *v })
            .collect()
    };
    let lam = |f: &[f64], z: &[f64]| {
        solve_lambda(&rv(&s, f), &params(i.theta, &rv(&s, z)))
            .unwrap()
            .lambda
    };
    let base = lam(&i.f, &i.zeta);
    let lf = lam(&bump(&i.f), &i.zeta);
    let zb = bump(&i.zeta);
    let lz = lam(&i.f, &zb);
    let pa: f64 =
        i.p.iter()
            .zip(mask)
            .filter(|(_, &a)| a)
            .map(|(p, _)| p)
            .sum();
    let below: f64 = (0..i.p.len())
        .filter(|&k| i.f[k] + zb[k] / i.theta <= lz)
        .map(|k| i.p[k])
        .sum();
    [
        lf - base,
        base + eps - lf,
        lz - base + (eps / i.theta) * pa / below,
        (eps / i.theta) * (1.0 - pa) - (lz - base),
    ]
}

/// Instance with a nonempty event A and a shift ε keeping E[ζ + ε1_A] < 1.
pub fn perturbation_case(max_states: usize) -> impl Strategy<Value = (Instance, Vec<bool>, f64)> {
    instance(max_states)
        .prop_flat_map(|i| {
            let n = i.p.len();
            (
                Just(i),
                prop::collection::vec(any::<bool>(), n),
                0.0f64..1.0,
            )
        })
        .prop_map(|(mut i, mut mask, u)| {
            if !mask.iter().any(|&a| a) {
                mask[0] = true;
            }
            let ez = mean(&i.zeta, &i.p);
            if ez >= 0.95 {
                i.zeta.iter_mut().for_each(|z| *z *= 0.5);
            }
            let pa: f64 =
                i.p.iter()
                    .zip(&mask)
                    .filter(|(_, &a)| a)
                    .map(|(p, _)| p)
                    .sum();
            let room = (1.0 - mean(&i.zeta, &i.p)) / pa;
            (i, mask, 0.9 * u * room.min(2.0))
        })
}
