use crate::{Error, Result};

pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

/// Bisection root finder on a sign-changing bracket.
///
/// Stops when the bracket is narrower than `tol` (or cannot shrink further in
/// floating point) and returns its midpoint.
pub fn bisect<G>(g: G, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "invalid bisection bracket [{lo}, {hi}] with tol {tol}"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let mut ga = g(a);
    let gb = g(b);
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if !(ga.signum() * gb.signum() < 0.0) {
        return Err(Error::Bracket {
            lo,
            hi,
            g_lo: ga,
            g_hi: gb,
        });
    }
    while b - a >= tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return Ok(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear() {
        let r = bisect(|x| x - 0.5, 0.0, 1.0, 1e-12).unwrap();
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_unbracketed() {
        assert!(matches!(
            bisect(|x| x + 1.0, 0.0, 1.0, 1e-10),
            Err(Error::Bracket { .. })
        ));
    }

    #[test]
    fn refined_bracket_agrees() {
        let g = |x: f64| x.powi(3) - 2.0;
        let wide = bisect(g, 0.0, 4.0, 1e-10).unwrap();
        let narrow = bisect(g, 1.2, 1.3, 1e-10).unwrap();
        assert!((wide - narrow).abs() < 1e-10);
        assert!((wide - 2f64.cbrt()).abs() < 1e-10);
    }
}
