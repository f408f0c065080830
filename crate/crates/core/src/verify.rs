//! Executable checks of the equivalence results: every local design is the
//! Bayes rule of a particular interval prior, and Int-CRM's decision agrees
//! with a brute-force posterior.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::designs::{
    indifference_skeleton, mtpi2_partition, power_model, solve_theta_intervals, tally_history,
    Boin, Ccd, DesignConfig, DesignKind, I3p3, IntCrm, LocalRule, Mtpi, Mtpi2, PatientOutcome,
    THETA_EXTREME,
};
use crate::framework::{Action, DecisionModel, DoseState, IntervalPrior, PartitionSpec};
use crate::numerics::{normal_pdf, BetaParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Target, equivalence interval, BOIN atoms, skeleton half-width and prior variance.
    pub design: DesignConfig,
    /// Largest n in the exhaustive (n, y) scans.
    pub max_n: u32,
    /// Largest n for the explicit loss enumeration.
    pub loss_max_n: u32,
    /// Midpoint cells per interval in the loss enumeration.
    pub loss_cells: usize,
    /// Added to BOIN's lambda1 before comparing with the Bayes rule; nonzero
    /// values exist to demonstrate that the check can fail.
    pub lambda1_shift: f64,
    /// Dose count for the Int-CRM checks.
    pub doses: usize,
    pub histories: usize,
    pub riemann_points: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            design: DesignConfig::new(DesignKind::Boin),
            max_n: 30,
            loss_max_n: 12,
            loss_cells: 10_000,
            lambda1_shift: 0.0,
            doses: 5,
            histories: 50,
            riemann_points: 100_000,
            seed: 20_190_101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    /// First failing case, if any.
    pub counterexample: Option<String>,
    pub seconds: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.counterexample {
            None => write!(f, "PASS {} ({} cases)", self.name, self.cases),
            Some(c) => write!(f, "FAIL {} ({} cases): {c}", self.name, self.cases),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub checks: Vec<CheckResult>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    /// One line per check; timings are left out so the text is reproducible.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out.push_str(if self.passed() {
            "ALL PASS\n"
        } else {
            "FAILED\n"
        });
        out
    }
}

fn states(max_n: u32, from: u32) -> impl Iterator<Item = DoseState> {
    (from..=max_n).flat_map(|n| (0..=n).map(move |y| DoseState { n, y }))
}

fn timed(name: &str, f: impl FnOnce() -> Result<(usize, Option<String>)>) -> Result<CheckResult> {
    let start = Instant::now();
    let (cases, counterexample) = f()?;
    Ok(CheckResult {
        name: name.to_string(),
        cases,
        counterexample,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Compares two decision functions over every (n, y) with `from <= n <= max_n`.
fn compare_states<A: PartialEq + fmt::Display>(
    max_n: u32,
    from: u32,
    mut left: impl FnMut(DoseState) -> Result<A>,
    mut right: impl FnMut(DoseState) -> Result<A>,
) -> Result<(usize, Option<String>)> {
    let mut cases = 0;
    for s in states(max_n, from) {
        cases += 1;
        let (a, b) = (left(s)?, right(s)?);
        if a != b {
            return Ok((
                cases,
                Some(format!(
                    "(n={}, y={}): design {a}, Bayes rule {b}",
                    s.n, s.y
                )),
            ));
        }
    }
    Ok((cases, None))
}

/// Runs every check. Configuration errors (for example BOIN atoms outside
/// their intervals) are returned before any check runs.
pub fn run_all(cfg: &VerifyConfig) -> Result<Certificate> {
    let d = &cfg.design;
    d.validate_at("design")?;
    if cfg.max_n == 0 || cfg.loss_cells == 0 || cfg.riemann_points < 2 || cfg.doses < 2 {
        return Err(Error::config(
            "verify",
            "max_n, loss_cells, riemann_points and doses must be positive",
        ));
    }
    let three = PartitionSpec::three_interval(d.target, d.eps1, d.eps2)?;
    let uniform = IntervalPrior::truncated_beta(BetaParams::uniform());
    let boin = Boin::new(d)?;
    let boin_prior = IntervalPrior::point_mass(boin.atoms().to_vec());
    boin_prior
        .validate(&three)
        .map_err(|e| Error::config("design.boin_phi_e", e.to_string()))?;
    let ccd = Ccd::new(d)?;
    let ccd_prior = IntervalPrior::point_mass(ccd.equivalent_atoms()?.to_vec());
    ccd_prior.validate(&three)?;

    let mtpi = Mtpi::new(d)?;
    let mtpi2 = Mtpi2::new(d)?;
    let mtpi_model = DecisionModel::new(three.clone(), uniform.clone())?;
    let fine_model = DecisionModel::new(mtpi2_partition(d)?, uniform.clone())?;
    let boin_model = DecisionModel::new(three.clone(), boin_prior)?;
    let ccd_model = DecisionModel::new(three.clone(), ccd_prior)?;
    let mut shifted = boin;
    shifted.lambda1 += cfg.lambda1_shift;
    let as_move = |a: Action| {
        a.as_move()
            .ok_or_else(|| Error::Domain(format!("{a} is not a move")))
    };

    let mut checks = Vec::new();
    checks.push(timed(
        "Proposition 1: argmin expected loss = argmax posterior",
        || proposition_one(cfg, &[&mtpi_model, &fine_model, &boin_model]),
    )?);
    checks.push(timed("Corollary 1: mTPI = Bayes rule", || {
        compare_states(
            cfg.max_n,
            1,
            |s| mtpi.decide(s),
            |s| as_move(mtpi_model.decide(&s)?),
        )
    })?);
    checks.push(timed("Corollary 2: mTPI-2 interval = Bayes rule", || {
        compare_states(
            cfg.max_n,
            1,
            |s| mtpi2.winning_interval(s),
            |s| fine_model.decide_index(&s),
        )
    })?);
    checks.push(timed(
        "Corollary 3: mTPI-2 decision = position of Bayes interval",
        || {
            compare_states(
                cfg.max_n,
                1,
                |s| mtpi2.decide(s),
                |s| Ok(mtpi2.position(fine_model.decide_index(&s)?)),
            )
        },
    )?);
    checks.push(timed("Theorem 1: BOIN = point-mass Bayes rule", || {
        compare_states(
            cfg.max_n,
            1,
            |s| shifted.decide(s),
            |s| as_move(boin_model.decide(&s)?),
        )
    })?);
    checks.push(timed(
        "Corollary 4: CCD = Bayes rule with inverse-xi atoms",
        || {
            compare_states(
                cfg.max_n,
                1,
                |s| ccd.decide(s),
                |s| as_move(ccd_model.decide(&s)?),
            )
        },
    )?);
    checks.push(timed("BOIN with matched thresholds = CCD", || {
        let mut matched = d.clone();
        matched.boin_phi_e = None;
        matched.boin_phi_d = None;
        let b = Boin::new(&matched)?;
        compare_states(cfg.max_n, 1, |s| b.decide(s), |s| ccd.decide(s))
    })?);
    checks.push(timed("Monotonicity: E -> S -> D as y grows", || {
        monotonicity(cfg)
    })?);
    checks.push(timed(
        "Interval boundaries: residuals and closest dose",
        || interval_boundaries(cfg),
    )?);
    checks.push(timed("Theorem 2: Int-CRM = Riemann-sum posterior", || {
        theorem_two(cfg)
    })?);
    Ok(Certificate { checks })
}

/// Argmin over explicitly accumulated expected losses, with near-ties
/// resolved by the partition's tie rank.
fn argmin_loss(losses: &[f64], partition: &PartitionSpec) -> Result<usize> {
    // the partition's argmax applies the tie rank; negated losses keep the order
    let scores: Vec<f64> = losses.iter().map(|l| -l).collect();
    partition.argmax(&scores)
}

fn proposition_one(
    cfg: &VerifyConfig,
    models: &[&DecisionModel],
) -> Result<(usize, Option<String>)> {
    let mut cases = 0;
    for model in models {
        let part = model.partition();
        let labels = part.labels();
        for s in states(cfg.loss_max_n, 0) {
            cases += 1;
            let mut losses = vec![0.0; part.len()];
            let mut total = 0.0;
            // posterior mass on a grid of p (or on the atoms), then expected 0-1 loss per action
            let mut add = |p: f64, w: f64| {
                total += w;
                for (l, &a) in losses.iter_mut().zip(labels) {
                    *l += w * f64::from(crate::framework::zero_one_loss(a, p, part));
                }
            };
            let lik = |p: f64| p.powi(s.y as i32) * (1.0 - p).powi((s.n - s.y) as i32);
            match &model.prior().kind {
                crate::framework::PriorKind::PointMass(atoms) => {
                    for &p in atoms {
                        add(p, lik(p));
                    }
                }
                crate::framework::PriorKind::TruncatedBeta(b) => {
                    for iv in part.intervals() {
                        let h = iv.length() / cfg.loss_cells as f64;
                        // prior density within the interval is uniform-beta / mass, times 1/K
                        let mass = crate::numerics::beta_interval_mass(*b, iv.lo, iv.hi)?;
                        for c in 0..cfg.loss_cells {
                            let p = iv.lo + (c as f64 + 0.5) * h;
                            add(p, lik(p) * crate::numerics::beta_pdf(*b, p) / mass * h);
                        }
                    }
                }
                crate::framework::PriorKind::TruncatedNormal { .. } => {
                    return Err(Error::Domain(
                        "loss enumeration is for probability partitions".into(),
                    ))
                }
            }
            for l in &mut losses {
                *l /= total;
            }
            let by_loss = argmin_loss(&losses, part)?;
            let by_post = model.decide_index(&s)?;
            if by_loss != by_post {
                return Ok((
                    cases,
                    Some(format!(
                        "(n={}, y={}) on {}-interval partition: min loss {}, max posterior {}",
                        s.n,
                        s.y,
                        part.len(),
                        labels[by_loss],
                        labels[by_post]
                    )),
                ));
            }
        }
    }
    Ok((cases, None))
}

fn monotonicity(cfg: &VerifyConfig) -> Result<(usize, Option<String>)> {
    let d = &cfg.design;
    let rules: Vec<(&str, Box<dyn LocalRule>)> = vec![
        ("mTPI", Box::new(Mtpi::new(d)?)),
        ("mTPI-2", Box::new(Mtpi2::new(d)?)),
        ("BOIN", Box::new(Boin::new(d)?)),
        ("CCD", Box::new(Ccd::new(d)?)),
        ("i3+3", Box::new(I3p3::new(d)?)),
    ];
    let mut cases = 0;
    for (name, rule) in &rules {
        for n in 1..=cfg.max_n {
            let mut prev = rule.decide(DoseState { n, y: 0 })?;
            for y in 1..=n {
                cases += 1;
                let cur = rule.decide(DoseState { n, y })?;
                if cur.severity() < prev.severity() {
                    return Ok((
                        cases,
                        Some(format!(
                            "{name} (n={n}): y={} gives {prev}, y={y} gives {cur}",
                            y - 1
                        )),
                    ));
                }
                prev = cur;
            }
        }
    }
    Ok((cases, None))
}

fn skeleton_for(cfg: &VerifyConfig, doses: usize) -> Result<Vec<f64>> {
    let d = &cfg.design;
    match &d.skeleton {
        Some(q) if q.len() == doses => Ok(q.clone()),
        _ => indifference_skeleton(d.target, d.delta, doses.div_ceil(2) - 1, doses),
    }
}

fn interval_boundaries(cfg: &VerifyConfig) -> Result<(usize, Option<String>)> {
    let target = cfg.design.target;
    let mut cases = 0;
    for doses in [4, 5, 6] {
        let q = skeleton_for(cfg, doses)?;
        let iv = solve_theta_intervals(&q, target)?;
        for k in 1..doses {
            cases += 1;
            let r = power_model(q[k - 1], iv.psi[k]) + power_model(q[k], iv.psi[k]) - 2.0 * target;
            if !(r.abs() < 1e-8) {
                return Ok((
                    cases,
                    Some(format!("T={doses}, boundary {}: residual {r:e}", k + 1)),
                ));
            }
        }
        let (lo, hi) = (iv.psi[0], iv.psi[doses]);
        let points = 10_000;
        for i in 0..points {
            let theta = lo + (hi - lo) * (i as f64 + 0.5) / points as f64;
            let k = iv.psi[1..doses].iter().take_while(|&&p| p <= theta).count();
            if iv.psi.iter().any(|p| (p - theta).abs() < 1e-8) {
                continue;
            }
            cases += 1;
            let gap = |d: usize| (power_model(q[d], theta) - target).abs();
            if let Some(d) = (0..doses).find(|&d| d != k && gap(d) <= gap(k)) {
                return Ok((
                    cases,
                    Some(format!(
                        "T={doses}, theta={theta}: dose {} is not closer than dose {}",
                        k + 1,
                        d + 1
                    )),
                ));
            }
        }
    }
    Ok((cases, None))
}

/// A random history: `n` patients spread over the doses with outcomes drawn
/// from a random power-model curve.
pub fn random_history<R: Rng + ?Sized>(skeleton: &[f64], rng: &mut R) -> Vec<PatientOutcome> {
    let n = rng.random_range(1..=30);
    let theta: f64 = rng.random_range(-1.5..1.5);
    (0..n)
        .map(|_| {
            let dose = rng.random_range(0..skeleton.len());
            let dlt = rng.random::<f64>() < power_model(skeleton[dose], theta);
            PatientOutcome { dose, dlt }
        })
        .collect()
}

/// Int-CRM decision by a midpoint Riemann sum over the whole parameter range,
/// assigning each grid point to the dose closest to the target there.
pub fn riemann_intcrm(
    skeleton: &[f64],
    target: f64,
    sigma: f64,
    history: &[PatientOutcome],
    points: usize,
) -> usize {
    let t = skeleton.len();
    let lo = ((-THETA_EXTREME).ln_1p() / skeleton[0].ln()).ln();
    let hi = (THETA_EXTREME.ln() / skeleton[t - 1].ln()).ln();
    let h = (hi - lo) / points as f64;
    let grid = |i: usize| lo + (i as f64 + 0.5) * h;
    let loglik = |theta: f64| -> f64 {
        history
            .iter()
            .map(|p| {
                let f = skeleton[p.dose].powf(theta.exp());
                if p.dlt {
                    f.ln()
                } else {
                    (1.0 - f).ln()
                }
            })
            .sum()
    };
    let lls: Vec<f64> = (0..points).map(|i| loglik(grid(i))).collect();
    let top = lls
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let mut num = vec![0.0; t];
    let mut den = vec![0.0; t];
    for (i, ll) in lls.iter().enumerate() {
        let theta = grid(i);
        let mut k = 0;
        for d in 1..t {
            if (skeleton[d].powf(theta.exp()) - target).abs()
                < (skeleton[k].powf(theta.exp()) - target).abs()
            {
                k = d;
            }
        }
        let w = normal_pdf(theta, sigma);
        num[k] += (ll - top).exp() * w;
        den[k] += w;
    }
    let score: Vec<f64> = (0..t)
        .map(|k| if den[k] > 0.0 { num[k] / den[k] } else { 0.0 })
        .collect();
    let best = score.iter().copied().fold(0.0, f64::max);
    (0..t)
        .find(|&k| score[k] >= best * (1.0 - 1e-9))
        .unwrap_or(0)
}

fn theorem_two(cfg: &VerifyConfig) -> Result<(usize, Option<String>)> {
    let mut d = cfg.design.clone();
    d.design = DesignKind::IntCrm;
    let q = skeleton_for(cfg, cfg.doses)?;
    d.skeleton = Some(q.clone());
    let model = IntCrm::new(&d, cfg.doses)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.histories {
        let h = random_history(&q, &mut rng);
        let fast = model.recommend(&tally_history(&h, cfg.doses)?)?;
        let slow = riemann_intcrm(&q, d.target, d.sigma2.sqrt(), &h, cfg.riemann_points);
        if fast != slow {
            let tallies: Vec<String> = tally_history(&h, cfg.doses)?
                .iter()
                .map(|t| format!("{}/{}", t.y, t.n))
                .collect();
            return Ok((
                i + 1,
                Some(format!(
                    "history {} (DLT/n per dose {}): design dose {}, oracle dose {}",
                    i + 1,
                    tallies.join(" "),
                    fast + 1,
                    slow + 1
                )),
            ));
        }
    }
    Ok((cfg.histories, None))
}
