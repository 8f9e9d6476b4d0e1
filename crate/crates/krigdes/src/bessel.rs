//! Modified Bessel function of the second kind `K_nu` for real order.
//!
//! Two standard regimes: a Temme power series for small argument and a
//! Steed-type continued fraction for large argument, both producing the
//! scaled pair `e^x (K_mu, K_{mu+1})` for `|mu| <= 1/2`, followed by stable
//! upward recurrence in the order. Only the logarithm is exposed so callers
//! never hit overflow for large orders or underflow for large arguments.

// Chebyshev data for the auxiliary Temme gamma functions on nu in [-1/2, 1/2].
const G1_COEFFS: [f64; 14] = [
    -1.14516408366268311786898152867,
    0.00636085311347084238122955495,
    0.00186245193007206848934643657,
    0.000152833085873453507081227824,
    0.000017017464011802038795324732,
    -6.4597502923347254354668326451e-07,
    -5.1819848432519380894104312968e-08,
    4.5189092894858183051123180797e-10,
    3.2433227371020873043666259180e-11,
    6.8309434024947522875432400828e-13,
    2.8353502755172101513119628130e-14,
    -7.9883905769323592875638087541e-16,
    -3.3726677300771949833341213457e-17,
    -3.6586334809210520744054437104e-20,
];

const G2_COEFFS: [f64; 15] = [
    1.882645524949671835019616975350,
    -0.077490658396167518329547945212,
    -0.018256714847324929419579340950,
    0.0006338030209074895795923971731,
    0.0000762290543508729021194461175,
    -9.5501647561720443519853993526e-07,
    -8.8927268107886351912431512955e-08,
    -1.9521334772319613740511880132e-09,
    -9.4003052735885162111769579771e-11,
    4.6875133849532393179290879101e-12,
    2.2658535746925759582447545145e-13,
    -1.1725509698488015111878735251e-15,
    -7.0441338200245222530843155877e-17,
    -2.4377878310107693650659740228e-18,
    -7.5225243218253901727164675011e-20,
];

fn cheb_eval(coeffs: &[f64], x: f64) -> f64 {
    let y2 = 2.0 * x;
    let mut d = 0.0;
    let mut dd = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let tmp = d;
        d = y2 * d - dd + c;
        dd = tmp;
    }
    x * d - dd + 0.5 * coeffs[0]
}

/// Gamma(1+nu), Gamma(1-nu) and the Temme auxiliaries g1, g2 for |nu| <= 1/2.
fn temme_gamma(nu: f64) -> (f64, f64, f64, f64) {
    let anu = nu.abs();
    let x = 4.0 * anu - 1.0;
    let g1 = cheb_eval(&G1_COEFFS, x);
    let g2 = cheb_eval(&G2_COEFFS, x);
    let gamma_1mnu = 1.0 / (g2 + nu * g1);
    let gamma_1pnu = 1.0 / (g2 - nu * g1);
    (gamma_1pnu, gamma_1mnu, g1, g2)
}

/// Scaled pair `e^x (K_mu(x), K_{mu+1}(x))` by the Temme series; requires
/// `x <= 2` and `|mu| <= 1/2`.
fn k_scaled_temme(mu: f64, x: f64) -> (f64, f64) {
    let max_iter = 15000;
    let half_x = 0.5 * x;
    let ln_half_x = half_x.ln();
    let half_x_mu = (mu * ln_half_x).exp();
    let pi_mu = std::f64::consts::PI * mu;
    let sigma = -mu * ln_half_x;
    let sinrat = if pi_mu.abs() < f64::EPSILON {
        1.0
    } else {
        pi_mu / pi_mu.sin()
    };
    let sinhrat = if sigma.abs() < f64::EPSILON {
        1.0
    } else {
        sigma.sinh() / sigma
    };
    let ex = x.exp();

    let (gamma_1pmu, gamma_1mmu, g1, g2) = temme_gamma(mu);

    let mut fk = sinrat * (sigma.cosh() * g1 - sinhrat * ln_half_x * g2);
    let mut pk = 0.5 / half_x_mu * gamma_1pmu;
    let mut qk = 0.5 * half_x_mu * gamma_1mmu;
    let mut ck = 1.0;
    let mut sum0 = fk;
    let mut sum1 = pk;
    for k in 1..=max_iter {
        let kf = k as f64;
        fk = (kf * fk + pk + qk) / (kf * kf - mu * mu);
        ck *= half_x * half_x / kf;
        pk /= kf - mu;
        qk /= kf + mu;
        let hk = -kf * fk + pk;
        let del0 = ck * fk;
        sum0 += del0;
        sum1 += ck * hk;
        if del0.abs() < 0.5 * sum0.abs() * f64::EPSILON {
            break;
        }
    }
    (sum0 * ex, sum1 * 2.0 / x * ex)
}

/// Scaled pair `e^x (K_mu(x), K_{mu+1}(x))` by the Steed continued fraction;
/// requires `x > 2` and `|mu| <= 1/2`.
fn k_scaled_cf2(mu: f64, x: f64) -> (f64, f64) {
    let max_iter = 10000;

    let mut bi = 2.0 * (1.0 + x);
    let mut di = 1.0 / bi;
    let mut delhi = di;
    let mut hi = di;

    let mut qi = 0.0;
    let mut qip1 = 1.0;

    let mut ai = -(0.25 - mu * mu);
    let a1 = ai;
    let mut ci = -ai;
    let mut bqi = -ai;

    let mut s = 1.0 + bqi * delhi;

    for i in 2..=max_iter {
        ai -= 2.0 * (i - 1) as f64;
        ci = -ai * ci / i as f64;
        let tmp = (qi - bi * qip1) / ai;
        qi = qip1;
        qip1 = tmp;
        bqi += ci * qip1;
        bi += 2.0;
        di = 1.0 / (bi + ai * di);
        delhi = (bi * di - 1.0) * delhi;
        hi += delhi;
        let dels = bqi * delhi;
        s += dels;
        if (dels / s).abs() < f64::EPSILON {
            break;
        }
    }

    hi *= -a1;

    let k_mu = (std::f64::consts::PI / (2.0 * x)).sqrt() / s;
    let k_mup1 = k_mu * (mu + x + 0.5 - hi) / x;
    (k_mu, k_mup1)
}

/// Natural logarithm of `K_nu(x)` for `nu >= 0`, `x > 0`.
///
/// Relative accuracy is a few ulps times the number of recurrence steps;
/// validated against an independent quadrature oracle to better than 1e-12
/// over the parameter ranges this crate uses.
pub fn ln_bessel_k(nu: f64, x: f64) -> f64 {
    assert!(nu >= 0.0 && nu.is_finite(), "order must be finite and >= 0");
    assert!(x.is_finite(), "argument must be finite");
    if x <= 0.0 {
        return f64::INFINITY; // K_nu diverges at 0
    }

    let n_steps = (nu + 0.5).floor() as usize;
    let mu = nu - n_steps as f64; // in [-1/2, 1/2]

    let (mut k_mu, mut k_mup1) = if x <= 2.0 {
        k_scaled_temme(mu, x)
    } else {
        k_scaled_cf2(mu, x)
    };

    // Upward recurrence K_{v+1} = (2v/x) K_v + K_{v-1}, rescaling to avoid
    // overflow for large orders at small arguments.
    const RESCALE: f64 = 1e250;
    let mut log_offset = 0.0;
    for n in 0..n_steps {
        let mut k_lo = k_mu; // K_{mu+n}
        let mut k_hi = k_mup1; // K_{mu+n+1}
        if k_hi.abs() > RESCALE {
            k_lo /= RESCALE;
            k_hi /= RESCALE;
            log_offset += RESCALE.ln();
        }
        k_mu = k_hi;
        k_mup1 = 2.0 * (mu + n as f64 + 1.0) / x * k_hi + k_lo;
    }

    k_mu.ln() + log_offset - x
}

/// `K_nu(x)` itself; overflows/underflows to inf/0 where f64 cannot hold it.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    ln_bessel_k(nu, x).exp()
}

/// The series and the continued fraction must agree at the split point.
#[allow(dead_code)]
fn branch_consistency(mu: f64) -> f64 {
    let a = k_scaled_temme(mu, 2.0).0;
    let b = k_scaled_cf2(mu, 2.0).0;
    (a - b).abs() / a.abs()
}
