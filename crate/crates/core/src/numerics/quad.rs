use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Settings for adaptive Simpson integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_subdivisions: 1024,
        }
    }
}

impl Quadrature {
    pub fn new(abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::Domain(format!(
                "abs_tol must be positive, got {abs_tol}"
            )));
        }
        if max_subdivisions < INITIAL_PANELS {
            return Err(Error::Domain(format!(
                "max_subdivisions must be at least {INITIAL_PANELS}, got {max_subdivisions}"
            )));
        }
        Ok(Self {
            abs_tol,
            max_subdivisions,
        })
    }
}

/// The range is pre-split into this many panels so that a bump narrower than
/// the range cannot hide between the first five samples.
const INITIAL_PANELS: usize = 8;
const MAX_DEPTH: u32 = 50;

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

/// Adaptive Simpson estimate of the integral of `f` over `[lo, hi]`.
///
/// Each subdivision halves one panel; the call fails once more than
/// `q.max_subdivisions` halvings would be needed to meet `q.abs_tol`.
pub fn integrate<F>(f: F, lo: f64, hi: f64, q: Quadrature) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(lo <= hi) {
        return Err(Error::Domain(format!(
            "integration bounds out of order: [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        return Ok(0.0);
    }
    let width = (hi - lo) / INITIAL_PANELS as f64;
    let panel_tol = q.abs_tol / INITIAL_PANELS as f64;
    let mut stack = Vec::with_capacity(64);
    let mut fa = f(lo);
    for i in 0..INITIAL_PANELS {
        let a = lo + width * i as f64;
        let b = if i + 1 == INITIAL_PANELS {
            hi
        } else {
            lo + width * (i + 1) as f64
        };
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        stack.push(Panel {
            a,
            b,
            fa,
            fm,
            fb,
            whole: simpson(a, b, fa, fm, fb),
            tol: panel_tol,
            depth: 0,
        });
        fa = fb;
    }
    // reverse so panels are processed left to right; keeps the summation order fixed
    stack.reverse();

    let mut total = 0.0;
    let mut subdivisions = INITIAL_PANELS;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let delta = left + right - p.whole;
        if delta.abs() <= 15.0 * p.tol || p.depth >= MAX_DEPTH {
            if !delta.is_finite() {
                return Err(Error::Domain(format!(
                    "integrand is not finite on [{}, {}]",
                    p.a, p.b
                )));
            }
            total += left + right + delta / 15.0;
            continue;
        }
        subdivisions += 1;
        if subdivisions > q.max_subdivisions {
            return Err(Error::NonConvergence {
                lo,
                hi,
                max_subdivisions: q.max_subdivisions,
            });
        }
        let tol = 0.5 * p.tol;
        stack.push(Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
            tol,
            depth: p.depth + 1,
        });
        stack.push(Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
            tol,
            depth: p.depth + 1,
        });
    }
    Ok(total)
}

#[inline]
fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}
