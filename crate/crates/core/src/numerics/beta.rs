use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Shape parameters of a Be(alpha, beta) distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    alpha: f64,
    beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "beta parameters must be positive and finite, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Be(1, 1).
    pub fn uniform() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }

    /// Conjugate update with `y` events out of `n` trials.
    pub fn posterior(&self, n: u32, y: u32) -> Self {
        debug_assert!(y <= n);
        Self {
            alpha: self.alpha + f64::from(y),
            beta: self.beta + f64::from(n - y),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    fn reflected(&self) -> Self {
        Self {
            alpha: self.beta,
            beta: self.alpha,
        }
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for positive arguments (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Beta density.
pub fn beta_pdf(p: BetaParams, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    let (a, b) = (p.alpha, p.beta);
    if x == 0.0 {
        return match a.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => b,
            _ => 0.0,
        };
    }
    if x == 1.0 {
        return match b.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => a,
            _ => 0.0,
        };
    }
    ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b)).exp()
}

const CF_MAX_ITER: usize = 500;
const CF_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Regularized incomplete beta function I_x(alpha, beta).
pub fn reg_inc_beta(p: BetaParams, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || x.is_nan() {
        return Err(Error::Domain(format!("x = {x} is outside [0, 1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let (a, b) = (p.alpha, p.beta);
    let v = if x < (a + 1.0) / (a + b + 2.0) {
        lower_tail(a, b, x)
    } else {
        1.0 - lower_tail(b, a, 1.0 - x)
    };
    Ok(v.clamp(0.0, 1.0))
}

/// I_x(a, b) evaluated on the side where the continued fraction converges fast.
fn lower_tail(a: f64, b: f64, x: f64) -> f64 {
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    match continued_fraction(a, b, x) {
        Some(cf) => ln_front.exp() * cf / a,
        None => power_series(a, b, x),
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn continued_fraction(a: f64, b: f64, x: f64) -> Option<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            return Some(h);
        }
    }
    None
}

/// I_x(a, b) = x^a / (a B(a,b)) * sum_k (1-b)_k x^k a / (k! (a+k)).
fn power_series(a: f64, b: f64, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0 / a;
    for k in 1..10_000 {
        let k = k as f64;
        term *= (k - b) * x / k;
        let next = term / (a + k);
        sum += next;
        if next.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (a * x.ln() - ln_beta(a, b)).exp() * sum
}

/// Probability mass of Be(p) on [lo, hi].
///
/// Uses the upper tail for intervals in the right half of the distribution
/// so that masses close to zero do not vanish through cancellation.
pub fn beta_interval_mass(p: BetaParams, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi {
        return Err(Error::Domain(format!("empty interval [{lo}, {hi}]")));
    }
    if lo >= p.mean() {
        let r = p.reflected();
        let upper = reg_inc_beta(r, 1.0 - lo)? - reg_inc_beta(r, 1.0 - hi)?;
        Ok(upper.max(0.0))
    } else {
        Ok((reg_inc_beta(p, hi)? - reg_inc_beta(p, lo)?).max(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn be(a: f64, b: f64) -> BetaParams {
        BetaParams::new(a, b).unwrap()
    }

    #[test]
    fn uniform_cdf_is_identity() {
        assert!((reg_inc_beta(be(1.0, 1.0), 0.4).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn be23_matches_polynomial() {
        // 6x^2 - 8x^3 + 3x^4
        let poly = |x: f64| 6.0 * x * x - 8.0 * x.powi(3) + 3.0 * x.powi(4);
        assert!((reg_inc_beta(be(2.0, 3.0), 0.25).unwrap() - 0.26171875).abs() < 1e-14);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((reg_inc_beta(be(2.0, 3.0), x).unwrap() - poly(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn endpoints() {
        let p = be(3.5, 0.7);
        assert_eq!(reg_inc_beta(p, 0.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(p, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(reg_inc_beta(be(1.0, 1.0), 1.5).is_err());
        assert!(reg_inc_beta(be(1.0, 1.0), -0.1).is_err());
        assert!(BetaParams::new(0.0, 1.0).is_err());
        assert!(BetaParams::new(1.0, -2.0).is_err());
    }

    #[test]
    fn ln_gamma_integers() {
        let mut fact = 1.0f64;
        for n in 1..25 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-12, "n={n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn tail_mass_does_not_cancel() {
        // Be(1, 31) mass on [0.95, 1] is 0.05^31.
        let m = beta_interval_mass(be(1.0, 31.0), 0.95, 1.0).unwrap();
        let expected = 0.05f64.powi(31);
        assert!((m / expected - 1.0).abs() < 1e-10);
    }
}
