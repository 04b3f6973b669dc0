use libm::erfc;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF via the complementary error function, which keeps
/// full relative accuracy in the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// (ln(x/K) + v/2)/√v for total variance `v > 0`.
pub fn d_plus(x: f64, k: f64, v: f64) -> f64 {
    ((x / k).ln() + 0.5 * v) / v.sqrt()
}

/// (ln(x/K) − v/2)/√v for total variance `v > 0`.
pub fn d_minus(x: f64, k: f64, v: f64) -> f64 {
    ((x / k).ln() - 0.5 * v) / v.sqrt()
}

/// E[(x·M − K)_+] for M = exp(−y√v − v/2), y standard normal:
/// x·N(d₊) − K·N(d₋).
///
/// Degenerate inputs are handled directly: `v = 0` gives the intrinsic
/// value, `K ≤ 0` the linear payoff x − K.
pub fn black_scholes_call(x: f64, k: f64, v: f64) -> f64 {
    if k <= 0.0 {
        return x - k;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if v <= 0.0 {
        return (x - k).max(0.0);
    }
    x * normal_cdf(d_plus(x, k, v)) - k * normal_cdf(d_minus(x, k, v))
}
