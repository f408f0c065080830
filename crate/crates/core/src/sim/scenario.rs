use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Target and equivalence interval used to locate a scenario's true MTD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtdRule {
    pub target: f64,
    pub lower: f64,
    pub upper: f64,
}

impl MtdRule {
    pub fn new(target: f64, eps1: f64, eps2: f64) -> Result<Self> {
        let (lower, upper) = (target - eps1, target + eps2);
        if !(0.0 < lower && lower < target && target < upper && upper < 1.0) {
            return Err(Error::Domain(format!(
                "need 0 < target - eps1 < target < target + eps2 < 1, got ({lower}, {target}, {upper})"
            )));
        }
        Ok(Self {
            target,
            lower,
            upper,
        })
    }

    fn in_ei(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    /// The MTD of `probs`: the dose in the EI closest to the target, else the
    /// dose closest to the target, or `None` when dose 1 is already above the EI.
    /// A run of equal probabilities resolves to its highest dose when below the
    /// target and its lowest dose otherwise.
    pub fn mtd(&self, probs: &[f64]) -> Option<usize> {
        if probs.first().is_none_or(|&p| p > self.upper) {
            return None;
        }
        let closest = |it: &mut dyn Iterator<Item = usize>| {
            let mut best: Option<usize> = None;
            for d in it {
                // equal probabilities below the target resolve to the higher dose
                let better = best.is_none_or(|b| {
                    let (gd, gb) = (
                        (probs[d] - self.target).abs(),
                        (probs[b] - self.target).abs(),
                    );
                    gd < gb || (gd == gb && probs[d] < self.target)
                });
                if better {
                    best = Some(d);
                }
            }
            best
        };
        closest(&mut (0..probs.len()).filter(|&d| self.in_ei(probs[d])))
            .or_else(|| closest(&mut (0..probs.len())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub probs: Vec<f64>,
    /// 0-based.
    pub mtd: Option<usize>,
}

impl Scenario {
    pub fn new(label: impl Into<String>, probs: Vec<f64>, rule: &MtdRule) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::Domain("a scenario needs at least two doses".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain(format!(
                "probabilities {probs:?} must lie in [0, 1]"
            )));
        }
        if probs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Domain(format!(
                "probabilities {probs:?} must be nondecreasing"
            )));
        }
        let mtd = rule.mtd(&probs);
        Ok(Self {
            label: label.into(),
            probs,
            mtd,
        })
    }

    pub fn doses(&self) -> usize {
        self.probs.len()
    }
}

/// Parses `label,T,p1,...,pT` records; blank lines and `#` comments are skipped.
pub fn parse_scenarios(text: &str, rule: &MtdRule) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(bad("expected label,T,p1,...,pT".into()));
        }
        let t: usize = fields[1]
            .parse()
            .map_err(|_| bad(format!("dose count '{}' is not an integer", fields[1])))?;
        if fields.len() != t + 2 {
            return Err(bad(format!(
                "expected {t} probabilities, found {}",
                fields.len() - 2
            )));
        }
        let probs = fields[2..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| bad(format!("'{f}' is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Scenario::new(fields[0], probs, rule).map_err(|e| bad(e.to_string()))?);
    }
    Ok(out)
}

/// Emits scenarios in the format read by [`parse_scenarios`].
pub fn format_scenarios(scenarios: &[Scenario]) -> String {
    let mut out = String::from("# label,T,p1,...,pT\n");
    for s in scenarios {
        out.push_str(&format!("{},{}", s.label, s.doses()));
        for p in &s.probs {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    out
}

const FIXED: &str = include_str!("../../data/fixed_scenarios.csv");

/// The bundled 15 fixed scenarios (five each for 4, 5 and 6 doses).
pub fn fixed_scenarios(rule: &MtdRule) -> Result<Vec<Scenario>> {
    parse_scenarios(FIXED, rule)
}

/// Where the generator places the MTD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MtdSupport {
    /// Uniform over the doses only.
    #[default]
    Doses,
    /// Uniform over the doses plus "every dose above the EI" and "every dose below the EI".
    DosesAndNone,
    /// MTD position uniform over the doses; all probabilities uniform below a
    /// random ceiling, redrawn until the chosen dose is closest to the target.
    PseudoUniform,
}

/// Category drawn by the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MtdPosition {
    Dose(usize),
    NoneAbove,
    NoneBelow,
}

impl MtdSupport {
    pub fn categories(self, doses: usize) -> Vec<MtdPosition> {
        let mut v: Vec<MtdPosition> = (0..doses).map(MtdPosition::Dose).collect();
        if matches!(self, MtdSupport::DosesAndNone) {
            v.push(MtdPosition::NoneAbove);
            v.push(MtdPosition::NoneBelow);
        }
        v
    }
}

fn sorted_uniform<R: Rng + ?Sized>(rng: &mut R, count: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..count).map(|_| rng.random_range(lo..hi)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Draws the MTD position and the scenario around it.
pub fn random_scenario_with_position<R: Rng + ?Sized>(
    label: impl Into<String>,
    doses: usize,
    rule: &MtdRule,
    support: MtdSupport,
    rng: &mut R,
) -> Result<(Scenario, MtdPosition)> {
    if doses < 2 {
        return Err(Error::Domain("a scenario needs at least two doses".into()));
    }
    let cats = support.categories(doses);
    let pos = cats[rng.random_range(0..cats.len())];
    if let (MtdSupport::PseudoUniform, MtdPosition::Dose(k)) = (support, pos) {
        let probs = pseudo_uniform(doses, k, rule.target, rng);
        return Ok((Scenario::new(label, probs, rule)?, pos));
    }
    let probs = match pos {
        MtdPosition::Dose(k) => {
            let mut p = sorted_uniform(rng, k, 0.0, rule.lower);
            p.push(rng.random_range(rule.lower..=rule.upper));
            p.extend(sorted_uniform(rng, doses - k - 1, rule.upper, 1.0));
            p
        }
        MtdPosition::NoneAbove => sorted_uniform(rng, doses, rule.upper, 1.0),
        MtdPosition::NoneBelow => sorted_uniform(rng, doses, 0.0, rule.lower),
    };
    Ok((Scenario::new(label, probs, rule)?, pos))
}

/// Sorted uniforms on `[0, B]` whose closest value to `target` sits at `mtd`,
/// with ceiling `B = target + (1 - target) M`, `M ~ Be(max(T - mtd, 0.5), 1)`
/// (`mtd` 1-based in that formula).
fn pseudo_uniform<R: Rng + ?Sized>(doses: usize, mtd: usize, target: f64, rng: &mut R) -> Vec<f64> {
    let shape = ((doses - mtd - 1) as f64).max(0.5);
    loop {
        // inverse CDF of Be(a, 1) is u^(1/a)
        let m = rng.random::<f64>().powf(1.0 / shape);
        let ceiling = target + (1.0 - target) * m;
        let p = sorted_uniform(rng, doses, 0.0, ceiling);
        let gap = |d: usize| (p[d] - target).abs();
        if (0..doses).all(|d| d == mtd || gap(mtd) < gap(d)) {
            return p;
        }
    }
}

/// Random monotone scenario: the MTD position is uniform over `support`, the
/// MTD's probability is uniform in the EI, lower doses uniform below the EI
/// and higher doses uniform above it, each group sorted.
pub fn random_scenario<R: Rng + ?Sized>(
    label: impl Into<String>,
    doses: usize,
    rule: &MtdRule,
    support: MtdSupport,
    rng: &mut R,
) -> Result<Scenario> {
    Ok(random_scenario_with_position(label, doses, rule, support, rng)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rule() -> MtdRule {
        MtdRule::new(0.3, 0.05, 0.05).unwrap()
    }

    #[test]
    fn mtd_rule_cases() {
        let r = rule();
        assert_eq!(r.mtd(&[0.1, 0.26, 0.33, 0.5]), Some(2));
        assert_eq!(r.mtd(&[0.4, 0.5]), None);
        assert_eq!(r.mtd(&[0.1, 0.2]), Some(1));
        assert_eq!(r.mtd(&[0.0; 4]), Some(3));
        assert_eq!(r.mtd(&[0.1, 0.45]), Some(1));
    }

    #[test]
    fn fixed_set_shape() {
        let s = fixed_scenarios(&rule()).unwrap();
        assert_eq!(s.len(), 15);
        for t in 4..=6 {
            assert_eq!(s.iter().filter(|x| x.doses() == t).count(), 5);
        }
        assert!(s.iter().all(|x| x.mtd.is_some()));
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = parse_scenarios("# c\nA,3,0.1,0.2\n", &rule()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_scenarios("A,2,0.5,0.2\n", &rule()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn format_round_trip() {
        let s = fixed_scenarios(&rule()).unwrap();
        assert_eq!(parse_scenarios(&format_scenarios(&s), &rule()).unwrap(), s);
    }

    #[test]
    fn generator_matches_drawn_position() {
        let r = rule();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let (s, pos) =
                random_scenario_with_position("x", 5, &r, MtdSupport::DosesAndNone, &mut rng)
                    .unwrap();
            let want = match pos {
                MtdPosition::Dose(k) => Some(k),
                MtdPosition::NoneAbove => None,
                MtdPosition::NoneBelow => Some(4),
            };
            assert_eq!(s.mtd, want);
        }
    }
}
