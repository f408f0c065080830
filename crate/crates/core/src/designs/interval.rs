use crate::designs::{DesignConfig, LocalRule};
use crate::framework::{Action, DoseState, Interval, Move, PartitionSpec};
use crate::numerics::{beta_interval_mass, bisect, BetaParams};
use crate::{Error, Result};

/// Empirical rates within this distance of a threshold count as on it.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Unit probability mass: posterior Be(y+1, n-y+1) mass of `interval` over its length.
pub fn upm(interval: &Interval, state: DoseState) -> Result<f64> {
    Ok(log_upm(interval, state)?.exp())
}

fn log_upm(interval: &Interval, state: DoseState) -> Result<f64> {
    let len = interval.length();
    if !(len > 0.0) {
        return Err(Error::Domain(format!(
            "interval {interval} has zero length"
        )));
    }
    let post = BetaParams::uniform().posterior(state.n, state.y);
    Ok(beta_interval_mass(post, interval.lo, interval.hi)?.ln() - len.ln())
}

/// mTPI: the largest UPM among the three intervals E, S, D.
#[derive(Debug, Clone)]
pub struct Mtpi {
    partition: PartitionSpec,
}

impl Mtpi {
    pub fn new(cfg: &DesignConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            partition: PartitionSpec::three_interval(cfg.target, cfg.eps1, cfg.eps2)?,
        })
    }

    pub fn partition(&self) -> &PartitionSpec {
        &self.partition
    }

    /// UPM of each interval in E, S, D order.
    pub fn upms(&self, state: DoseState) -> Result<Vec<f64>> {
        self.partition
            .intervals()
            .iter()
            .map(|iv| upm(iv, state))
            .collect()
    }
}

impl LocalRule for Mtpi {
    fn decide(&self, state: DoseState) -> Result<Move> {
        let scores = self
            .partition
            .intervals()
            .iter()
            .map(|iv| log_upm(iv, state))
            .collect::<Result<Vec<_>>>()?;
        let k = self.partition.argmax(&scores)?;
        Ok(self.partition.labels()[k]
            .as_move()
            .expect("three-interval partition carries moves"))
    }
}

/// The mTPI-2 partition: the equivalence interval plus subintervals of the
/// same width tiling both sides. The outermost subinterval on each side takes
/// whatever remainder is shorter than that width.
pub fn mtpi2_partition(cfg: &DesignConfig) -> Result<PartitionSpec> {
    Ok(Mtpi2::build(cfg)?.0)
}

/// mTPI-2: largest UPM over the fine partition, then E, S or D by where the
/// winning interval sits relative to the equivalence interval.
#[derive(Debug, Clone)]
pub struct Mtpi2 {
    partition: PartitionSpec,
    positions: Vec<Move>,
}

const REMAINDER_EPS: f64 = 1e-12;

impl Mtpi2 {
    pub fn new(cfg: &DesignConfig) -> Result<Self> {
        let (partition, positions) = Self::build(cfg)?;
        Ok(Self {
            partition,
            positions,
        })
    }

    fn build(cfg: &DesignConfig) -> Result<(PartitionSpec, Vec<Move>)> {
        cfg.validate()?;
        let lo = cfg.ei_lower();
        let hi = cfg.ei_upper();
        let width = hi - lo;

        // boundaries below the EI, walking down from lo
        let full = (lo / width + 1e-9).floor() as usize;
        let mut below: Vec<f64> = (0..=full).map(|j| lo - j as f64 * width).collect();
        if *below.last().unwrap() > REMAINDER_EPS {
            below.push(0.0);
        } else {
            *below.last_mut().unwrap() = 0.0;
        }
        below.reverse();

        let full = ((1.0 - hi) / width + 1e-9).floor() as usize;
        let mut above: Vec<f64> = (0..=full).map(|j| hi + j as f64 * width).collect();
        if 1.0 - *above.last().unwrap() > REMAINDER_EPS {
            above.push(1.0);
        } else {
            *above.last_mut().unwrap() = 1.0;
        }

        let mut intervals = Vec::new();
        let mut positions = Vec::new();
        for (i, w) in below.windows(2).enumerate() {
            intervals.push(Interval::new(w[0], w[1], i == 0, true)?);
            positions.push(Move::Escalate);
        }
        intervals.push(Interval::open(lo, hi)?);
        positions.push(Move::Stay);
        let last = above.len() - 2;
        for (i, w) in above.windows(2).enumerate() {
            intervals.push(Interval::new(w[0], w[1], true, i == last)?);
            positions.push(Move::DeEscalate);
        }
        let labels = (0..intervals.len()).map(Action::Model).collect();
        Ok((PartitionSpec::new(intervals, labels)?, positions))
    }

    pub fn partition(&self) -> &PartitionSpec {
        &self.partition
    }

    /// E, S or D for fine interval `k`.
    pub fn position(&self, k: usize) -> Move {
        self.positions[k]
    }

    /// Index of the fine interval with the largest UPM.
    pub fn winning_interval(&self, state: DoseState) -> Result<usize> {
        let scores = self
            .partition
            .intervals()
            .iter()
            .map(|iv| log_upm(iv, state))
            .collect::<Result<Vec<_>>>()?;
        self.partition.argmax(&scores)
    }
}

impl LocalRule for Mtpi2 {
    fn decide(&self, state: DoseState) -> Result<Move> {
        Ok(self.positions[self.winning_interval(state)?])
    }
}

/// BOIN boundary `xi(phi_i; phi_j)`.
pub fn boin_xi(phi_i: f64, phi_j: f64) -> Result<f64> {
    let unit = |x: f64| x > 0.0 && x < 1.0;
    if !unit(phi_i) || !unit(phi_j) {
        return Err(Error::Domain(format!(
            "xi needs probabilities in (0, 1), got ({phi_i}, {phi_j})"
        )));
    }
    if phi_i == phi_j {
        return Err(Error::Domain(format!(
            "xi is 0/0 at phi_i = phi_j = {phi_i}"
        )));
    }
    let num = (-phi_i).ln_1p() - (-phi_j).ln_1p();
    let den = (phi_j / phi_i).ln() + num;
    Ok(num / den)
}

/// The atom `phi` with `xi(phi; phi_j) = lambda`, on the same side of `phi_j` as `lambda`.
pub fn boin_xi_inverse(lambda: f64, phi_j: f64) -> Result<f64> {
    const EDGE: f64 = 1e-12;
    let (lo, hi) = if lambda > 0.0 && lambda < phi_j {
        (EDGE, phi_j - EDGE)
    } else if lambda > phi_j && lambda < 1.0 {
        (phi_j + EDGE, 1.0 - EDGE)
    } else {
        return Err(Error::Domain(format!(
            "no atom maps to boundary {lambda} around {phi_j}"
        )));
    };
    bisect(
        |phi| boin_xi(phi, phi_j).unwrap_or(f64::NAN) - lambda,
        lo,
        hi,
        1e-16,
    )
}

fn threshold_move(rate: f64, lower: f64, upper: f64) -> Move {
    if rate <= lower + BOUNDARY_TOL {
        Move::Escalate
    } else if rate >= upper - BOUNDARY_TOL {
        Move::DeEscalate
    } else {
        Move::Stay
    }
}

/// BOIN: compare the empirical rate with `lambda1 = xi(phi_E; pT)` and
/// `lambda2 = xi(phi_D; pT)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boin {
    pub phi_e: f64,
    pub phi_s: f64,
    pub phi_d: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Boin {
    pub fn new(cfg: &DesignConfig) -> Result<Self> {
        cfg.validate()?;
        let phi_e = match cfg.boin_phi_e {
            Some(v) => v,
            None => boin_xi_inverse(cfg.ei_lower(), cfg.target)?,
        };
        let phi_d = match cfg.boin_phi_d {
            Some(v) => v,
            None => boin_xi_inverse(cfg.ei_upper(), cfg.target)?,
        };
        Self::from_atoms(phi_e, cfg.target, phi_d)
    }

    pub fn from_atoms(phi_e: f64, phi_s: f64, phi_d: f64) -> Result<Self> {
        if !(0.0 < phi_e && phi_e < phi_s && phi_s < phi_d && phi_d < 1.0) {
            return Err(Error::Domain(format!(
                "BOIN atoms must satisfy 0 < phi_E < phi_S < phi_D < 1, got ({phi_e}, {phi_s}, {phi_d})"
            )));
        }
        Ok(Self {
            phi_e,
            phi_s,
            phi_d,
            lambda1: boin_xi(phi_e, phi_s)?,
            lambda2: boin_xi(phi_d, phi_s)?,
        })
    }

    pub fn atoms(&self) -> [f64; 3] {
        [self.phi_e, self.phi_s, self.phi_d]
    }
}

impl LocalRule for Boin {
    fn decide(&self, state: DoseState) -> Result<Move> {
        let rate = state.rate().ok_or(Error::NoData)?;
        Ok(threshold_move(rate, self.lambda1, self.lambda2))
    }
}

/// CCD: compare the empirical rate with the equivalence-interval endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ccd {
    pub lower: f64,
    pub upper: f64,
    pub target: f64,
}

impl Ccd {
    pub fn new(cfg: &DesignConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            lower: cfg.ei_lower(),
            upper: cfg.ei_upper(),
            target: cfg.target,
        })
    }

    /// Point-mass atoms under which the Bayes rule reproduces CCD.
    pub fn equivalent_atoms(&self) -> Result<[f64; 3]> {
        Ok([
            boin_xi_inverse(self.lower, self.target)?,
            self.target,
            boin_xi_inverse(self.upper, self.target)?,
        ])
    }
}

impl LocalRule for Ccd {
    fn decide(&self, state: DoseState) -> Result<Move> {
        let rate = state.rate().ok_or(Error::NoData)?;
        Ok(threshold_move(rate, self.lower, self.upper))
    }
}

/// i3+3 with the closed equivalence interval `[pT - eps1, pT + eps2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct I3p3 {
    pub lower: f64,
    pub upper: f64,
}

impl I3p3 {
    pub fn new(cfg: &DesignConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            lower: cfg.ei_lower(),
            upper: cfg.ei_upper(),
        })
    }
}

impl LocalRule for I3p3 {
    fn decide(&self, state: DoseState) -> Result<Move> {
        let rate = state.rate().ok_or(Error::NoData)?;
        if rate < self.lower - BOUNDARY_TOL {
            return Ok(Move::Escalate);
        }
        if rate <= self.upper + BOUNDARY_TOL {
            return Ok(Move::Stay);
        }
        // above the EI: stay if one fewer DLT would put the rate below it
        let one_fewer = f64::from(state.y - 1) / f64::from(state.n);
        if one_fewer < self.lower - BOUNDARY_TOL {
            Ok(Move::Stay)
        } else {
            Ok(Move::DeEscalate)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::DesignKind;

    fn cfg(kind: DesignKind) -> DesignConfig {
        DesignConfig::new(kind)
    }

    fn st(n: u32, y: u32) -> DoseState {
        DoseState::new(n, y).unwrap()
    }

    #[test]
    fn upm_examples() {
        let s = Interval::open(0.25, 0.35).unwrap();
        assert!((upm(&s, st(3, 1)).unwrap() - 1.7530).abs() < 1e-12);
        let e = Interval::closed(0.0, 0.25).unwrap();
        // (1 - 0.75^4) / 0.25
        assert!((upm(&e, st(3, 0)).unwrap() - (1.0 - 0.75f64.powi(4)) / 0.25).abs() < 1e-12);
        let whole = Interval::closed(0.0, 1.0).unwrap();
        for (n, y) in [(0, 0), (5, 2), (30, 30)] {
            assert!((upm(&whole, st(n, y)).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(upm(&Interval::closed(0.2, 0.2).unwrap(), st(3, 1)).is_err());
    }

    #[test]
    fn mtpi_examples() {
        let m = Mtpi::new(&cfg(DesignKind::Mtpi)).unwrap();
        let u = m.upms(st(3, 1)).unwrap();
        for (a, b) in u.iter().zip([1.047, 1.753, 0.866]) {
            assert!((a - b).abs() < 5e-4, "{u:?}");
        }
        assert_eq!(m.decide(st(3, 1)).unwrap(), Move::Stay);
        assert_eq!(m.decide(st(3, 0)).unwrap(), Move::Escalate);
        assert_eq!(m.decide(st(3, 3)).unwrap(), Move::DeEscalate);
        let u = m.upms(st(3, 3)).unwrap();
        for (a, b) in u.iter().zip([0.0156, 0.111, 1.515]) {
            assert!((a - b).abs() < 5e-4, "{u:?}");
        }
    }

    #[test]
    fn mtpi2_partition_tiles() {
        let p = mtpi2_partition(&cfg(DesignKind::Mtpi2)).unwrap();
        assert_eq!(p.len(), 11);
        let widths: Vec<f64> = p.intervals().iter().map(|i| i.length()).collect();
        let expected = [0.05, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.05];
        for (w, e) in widths.iter().zip(expected) {
            assert!((w - e).abs() < 1e-12, "{widths:?}");
        }
        assert_eq!(p.intervals()[3], Interval::open(0.25, 0.35).unwrap());
        assert_eq!(p.lower(), 0.0);
        assert_eq!(p.upper(), 1.0);

        let wide = mtpi2_partition(&cfg(DesignKind::Mtpi2).with_target(0.5, 0.25, 0.25)).unwrap();
        assert_eq!(wide.len(), 3);
        assert_eq!(wide.intervals()[0], Interval::closed(0.0, 0.25).unwrap());
        assert_eq!(wide.intervals()[2], Interval::closed(0.75, 1.0).unwrap());
    }

    #[test]
    fn mtpi2_examples() {
        let m = Mtpi2::new(&cfg(DesignKind::Mtpi2)).unwrap();
        assert_eq!(m.decide(st(6, 6)).unwrap(), Move::DeEscalate);
        // 1/3 sits inside the EI but the wider (0.35, 0.45] neighbour is not favoured
        assert_eq!(m.decide(st(3, 1)).unwrap(), Move::Stay);
        // no data: every UPM is 1, the tie goes to the most toxic subinterval
        assert_eq!(m.winning_interval(st(0, 0)).unwrap(), 10);
        assert_eq!(m.decide(st(0, 0)).unwrap(), Move::DeEscalate);
    }

    #[test]
    fn xi_values() {
        assert!((boin_xi(0.2, 0.3).unwrap() - 0.24774).abs() < 5e-6);
        let v = boin_xi(0.4, 0.3).unwrap();
        assert!(v > 0.3 && v < 0.4);
        assert!(boin_xi(0.3, 0.3).is_err());
        assert!(boin_xi(0.0, 0.3).is_err());
    }

    #[test]
    fn xi_inverse_round_trips() {
        for lambda in [0.1, 0.25, 0.29, 0.31, 0.35, 0.6] {
            let phi = boin_xi_inverse(lambda, 0.3).unwrap();
            assert!((boin_xi(phi, 0.3).unwrap() - lambda).abs() < 1e-12);
        }
        assert!(boin_xi_inverse(0.3, 0.3).is_err());
    }

    #[test]
    fn boin_examples() {
        let b = Boin::new(&cfg(DesignKind::Boin)).unwrap();
        assert!((b.lambda1 - 0.25).abs() < 1e-12);
        assert!((b.lambda2 - 0.35).abs() < 1e-12);
        assert_eq!(b.decide(st(3, 1)).unwrap(), Move::Stay);
        assert_eq!(b.decide(st(4, 1)).unwrap(), Move::Escalate);
        assert_eq!(b.decide(st(3, 2)).unwrap(), Move::DeEscalate);
        assert!(matches!(b.decide(st(0, 0)), Err(Error::NoData)));
    }

    #[test]
    fn ccd_examples() {
        let c = Ccd::new(&cfg(DesignKind::Ccd)).unwrap();
        assert_eq!(c.decide(st(3, 1)).unwrap(), Move::Stay);
        assert_eq!(c.decide(st(4, 1)).unwrap(), Move::Escalate);
        assert_eq!(c.decide(st(20, 7)).unwrap(), Move::DeEscalate);
    }

    #[test]
    fn i3p3_examples() {
        let r = I3p3::new(&cfg(DesignKind::I3p3)).unwrap();
        assert_eq!(r.decide(st(3, 1)).unwrap(), Move::Stay);
        assert_eq!(r.decide(st(6, 3)).unwrap(), Move::DeEscalate);
        assert_eq!(r.decide(st(3, 0)).unwrap(), Move::Escalate);
        // 2/3 is above the EI and 1/3 is inside it
        assert_eq!(r.decide(st(3, 2)).unwrap(), Move::DeEscalate);
        // 2/4 above, 1/4 on the closed lower edge
        assert_eq!(r.decide(st(4, 2)).unwrap(), Move::DeEscalate);
        // 1/2 above, 0/2 below
        assert_eq!(r.decide(st(2, 1)).unwrap(), Move::Stay);
        assert_eq!(r.decide(st(4, 1)).unwrap(), Move::Stay);
    }
}
