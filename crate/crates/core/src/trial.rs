//! Sequential cohort trial with the four safety rules and end-of-trial MTD selection.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::designs::{Design, DesignConfig, DesignKind};
use crate::framework::{DoseState, Move};
use crate::numerics::{beta_interval_mass, pava_isotonic, BetaParams};
use crate::{Error, Result};

/// `Pr(p > target | n, y)` under a uniform prior.
pub fn excess_toxicity_prob(state: DoseState, target: f64) -> f64 {
    let post = BetaParams::uniform().posterior(state.n, state.y);
    // the posterior is always proper, so the only failure mode is a bad target
    beta_interval_mass(post, target, 1.0).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub design: DesignConfig,
    pub doses: usize,
    pub max_n: u32,
    pub cohort_size: u32,
    /// 0-based.
    pub start_dose: usize,
}

impl TrialSpec {
    pub fn new(design: DesignConfig, doses: usize) -> Self {
        Self {
            design,
            doses,
            max_n: 30,
            cohort_size: 3,
            start_dose: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        if self.doses < 2 {
            return Err(Error::config("trial.doses", "need at least two doses"));
        }
        if self.cohort_size == 0 || self.max_n < self.cohort_size {
            return Err(Error::config(
                "trial.cohort_size",
                format!(
                    "need 1 <= cohort_size <= max_n, got {} and {}",
                    self.cohort_size, self.max_n
                ),
            ));
        }
        if self.start_dose >= self.doses {
            return Err(Error::config(
                "trial.start_dose",
                format!(
                    "dose {} does not exist among {} doses",
                    self.start_dose + 1,
                    self.doses
                ),
            ));
        }
        Ok(())
    }
}

/// What a design proposes before the safety rules are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawAction {
    Move(Move),
    /// Model-based recommendation, 0-based.
    Dose(usize),
}

/// The action actually taken after a cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decision {
    Escalate,
    Stay,
    DeEscalate,
    /// De-escalate and exclude the current and all higher doses.
    DeEscalateExclude,
    Stop,
}

impl Decision {
    pub fn tag(self) -> &'static str {
        match self {
            Decision::Escalate => "E",
            Decision::Stay => "S",
            Decision::DeEscalate => "D",
            Decision::DeEscalateExclude => "DU",
            Decision::Stop => "STOP",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "E" => Decision::Escalate,
            "S" => Decision::Stay,
            "D" => Decision::DeEscalate,
            "DU" => Decision::DeEscalateExclude,
            "STOP" => Decision::Stop,
            _ => return None,
        })
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxN,
    SafetyStop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub dose: usize,
    pub size: u32,
    pub dlts: u32,
    pub decision: Decision,
    /// Dose for the next cohort; `None` once the trial has stopped.
    pub next: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialState {
    pub doses: Vec<DoseState>,
    pub current: usize,
    pub excluded: Vec<bool>,
    pub stopped: Option<StopReason>,
    pub cohort_log: Vec<CohortRecord>,
}

impl TrialState {
    pub fn new(spec: &TrialSpec) -> Self {
        Self {
            doses: vec![DoseState::default(); spec.doses],
            current: spec.start_dose,
            excluded: vec![false; spec.doses],
            stopped: None,
            cohort_log: Vec::new(),
        }
    }

    pub fn total_n(&self) -> u32 {
        self.doses.iter().map(|d| d.n).sum()
    }

    pub fn total_dlts(&self) -> u32 {
        self.doses.iter().map(|d| d.y).sum()
    }

    /// Highest dose still open, if any.
    pub fn highest_open(&self) -> Option<usize> {
        self.excluded
            .iter()
            .position(|&e| e)
            .unwrap_or(self.excluded.len())
            .checked_sub(1)
    }

    fn exclude_from(&mut self, dose: usize) {
        for e in &mut self.excluded[dose..] {
            *e = true;
        }
    }

    /// Enrol a cohort at the current dose.
    pub fn record_cohort(&mut self, size: u32, dlts: u32) {
        self.doses[self.current].add(size, dlts);
    }

    /// One line per cohort: `cohort,dose,size,dlts,decision,next` with 1-based indices.
    pub fn audit_lines(&self) -> String {
        let mut out = String::from("cohort,dose,size,dlts,decision,next\n");
        for (i, c) in self.cohort_log.iter().enumerate() {
            let next = c.next.map_or(String::new(), |d| (d + 1).to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                i + 1,
                c.dose + 1,
                c.size,
                c.dlts,
                c.decision,
                next
            ));
        }
        out
    }
}

/// Applies the safety rules to a raw decision taken after a cohort of `size`
/// with `dlts` events at the current dose, and moves the trial.
pub fn apply_safety(
    raw: RawAction,
    trial: &mut TrialState,
    spec: &TrialSpec,
    size: u32,
    dlts: u32,
) -> Decision {
    let cur = trial.current;
    let target = spec.design.target;

    // Rule 1 and 2: exclude overly toxic doses; stop when the lowest one goes
    if excess_toxicity_prob(trial.doses[cur], target) > spec.design.safety_threshold {
        trial.exclude_from(cur);
        if cur == 0 {
            trial.stopped = Some(StopReason::SafetyStop);
            return Decision::Stop;
        }
        trial.current = cur - 1;
        return Decision::DeEscalateExclude;
    }

    let mut next = match raw {
        RawAction::Move(Move::Escalate) => cur + 1,
        RawAction::Move(Move::Stay) => cur,
        RawAction::Move(Move::DeEscalate) => cur.saturating_sub(1),
        RawAction::Dose(d) => d,
    };
    // Rule 3: at most one level up
    next = next.min(cur + 1);
    // Rule 4: coherence
    if next > cur && f64::from(dlts) > target * f64::from(size) {
        next = cur;
    }
    // boundaries and exclusions
    next = next.min(spec.doses - 1);
    if let Some(top) = trial.highest_open() {
        next = next.min(top);
    }
    trial.current = next;
    match next.cmp(&cur) {
        std::cmp::Ordering::Greater => Decision::Escalate,
        std::cmp::Ordering::Equal => Decision::Stay,
        std::cmp::Ordering::Less => Decision::DeEscalate,
    }
}

/// The design's proposal given the tallies so far.
pub fn raw_decision(design: &Design, trial: &TrialState) -> Result<RawAction> {
    match design.local_rule() {
        Some(rule) => Ok(RawAction::Move(rule.decide(trial.doses[trial.current])?)),
        None => Ok(RawAction::Dose(design.recommend(&trial.doses)?)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub state: TrialState,
    /// 0-based; `None` when no dose is selected.
    pub mtd: Option<usize>,
}

/// Runs one trial, drawing patient outcomes as `u < truth[dose]` from `rng`.
pub fn run_trial<R: Rng + ?Sized>(
    spec: &TrialSpec,
    design: &Design,
    truth: &[f64],
    rng: &mut R,
) -> Result<TrialOutcome> {
    let uniforms: Vec<f64> = (0..spec.max_n).map(|_| rng.random::<f64>()).collect();
    run_trial_with_uniforms(spec, design, truth, &uniforms)
}

/// Runs one trial where patient `i` has a DLT iff `uniforms[i] < truth[dose]`.
///
/// Sharing the uniforms across designs pairs their trials.
pub fn run_trial_with_uniforms(
    spec: &TrialSpec,
    design: &Design,
    truth: &[f64],
    uniforms: &[f64],
) -> Result<TrialOutcome> {
    if truth.len() != spec.doses {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: spec.doses,
        });
    }
    if uniforms.len() < spec.max_n as usize {
        return Err(Error::LengthMismatch {
            left: uniforms.len(),
            right: spec.max_n as usize,
        });
    }
    let mut trial = TrialState::new(spec);
    let mut patient = 0usize;
    loop {
        if trial.total_n() + spec.cohort_size > spec.max_n {
            trial.stopped = Some(StopReason::MaxN);
            break;
        }
        let dose = trial.current;
        let p = truth[dose];
        let dlts = uniforms[patient..patient + spec.cohort_size as usize]
            .iter()
            .filter(|&&u| u < p)
            .count() as u32;
        patient += spec.cohort_size as usize;
        trial.record_cohort(spec.cohort_size, dlts);
        let raw = raw_decision(design, &trial)?;
        let decision = apply_safety(raw, &mut trial, spec, spec.cohort_size, dlts);
        let next = trial.stopped.is_none().then_some(trial.current);
        trial.cohort_log.push(CohortRecord {
            dose,
            size: spec.cohort_size,
            dlts,
            decision,
            next,
        });
        if trial.stopped.is_some() {
            break;
        }
    }
    let mtd = select_mtd(&trial, spec, design)?;
    Ok(TrialOutcome { state: trial, mtd })
}

/// End-of-trial MTD, 0-based, or `None`.
pub fn select_mtd(trial: &TrialState, spec: &TrialSpec, design: &Design) -> Result<Option<usize>> {
    if trial.stopped == Some(StopReason::SafetyStop) {
        return Ok(None);
    }
    let Some(top) = trial.highest_open() else {
        return Ok(None);
    };
    match design.kind() {
        DesignKind::IntCrm | DesignKind::Crm => Ok(Some(design.recommend(&trial.doses)?.min(top))),
        _ => Ok(isotonic_mtd(
            &trial.doses,
            &trial.excluded,
            spec.design.target,
        )),
    }
}

/// Prior pseudo-count used for end-of-trial toxicity estimates; small enough
/// that the estimate is essentially y/n while staying defined for n = y.
pub const SELECTION_PRIOR: f64 = 0.005;

/// Dose whose isotonic posterior-mean estimate is closest to `target`,
/// among treated, non-excluded doses.
pub fn isotonic_mtd(doses: &[DoseState], excluded: &[bool], target: f64) -> Option<usize> {
    let treated: Vec<usize> = (0..doses.len()).filter(|&d| doses[d].n > 0).collect();
    if treated.is_empty() {
        return None;
    }
    let prior = BetaParams::new(SELECTION_PRIOR, SELECTION_PRIOR).ok()?;
    let (means, weights): (Vec<f64>, Vec<f64>) = treated
        .iter()
        .map(|&d| {
            let post = prior.posterior(doses[d].n, doses[d].y);
            (post.mean(), 1.0 / post.variance())
        })
        .unzip();
    let fitted = pava_isotonic(&means, &weights).ok()?;
    // pooled doses share one estimate; a tiny increasing offset sends the
    // choice up when the pool sits below the target and down when above
    closest_to_target(
        treated
            .iter()
            .zip(&fitted)
            .enumerate()
            .filter(|(_, (&d, _))| !excluded[d])
            .map(|(i, (&d, &f))| (d, f + i as f64 * POOL_OFFSET)),
        target,
    )
}

const POOL_OFFSET: f64 = 1e-10;

pub(crate) fn closest_to_target(
    candidates: impl Iterator<Item = (usize, f64)>,
    target: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (d, est) in candidates {
        let gap = (est - target).abs();
        match best {
            Some((_, g)) if gap >= g - 1e-12 => {}
            _ => best = Some((d, gap)),
        }
    }
    best.map(|(d, _)| d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(kind: DesignKind, doses: usize) -> TrialSpec {
        TrialSpec::new(DesignConfig::new(kind), doses)
    }

    #[test]
    fn excess_probabilities() {
        let p = |n, y| excess_toxicity_prob(DoseState::new(n, y).unwrap(), 0.3);
        assert!((p(0, 0) - 0.7).abs() < 1e-12);
        assert!((p(3, 3) - (1.0 - 0.3f64.powi(4))).abs() < 1e-12);
        let cdf = 4.0 * 0.3f64.powi(3) - 3.0 * 0.3f64.powi(4);
        assert!((p(3, 2) - (1.0 - cdf)).abs() < 1e-12);
    }

    #[test]
    fn safety_stop_at_lowest_dose() {
        let s = spec(DesignKind::Mtpi, 4);
        let mut t = TrialState::new(&s);
        t.record_cohort(3, 3);
        let d = apply_safety(RawAction::Move(Move::DeEscalate), &mut t, &s, 3, 3);
        assert_eq!(d, Decision::Stop);
        assert_eq!(t.stopped, Some(StopReason::SafetyStop));
        assert!(t.excluded.iter().all(|&e| e));
    }

    #[test]
    fn exclusion_forces_de_escalation() {
        let s = spec(DesignKind::Mtpi, 4);
        let mut t = TrialState::new(&s);
        t.current = 2;
        t.record_cohort(3, 3);
        let d = apply_safety(RawAction::Move(Move::Stay), &mut t, &s, 3, 3);
        assert_eq!(d, Decision::DeEscalateExclude);
        assert_eq!(t.current, 1);
        assert_eq!(t.excluded, vec![false, false, true, true]);
        // later escalation cannot reach the excluded dose
        t.record_cohort(3, 0);
        assert_eq!(
            apply_safety(RawAction::Move(Move::Escalate), &mut t, &s, 3, 0),
            Decision::Stay
        );
        assert_eq!(t.current, 1);
    }

    #[test]
    fn dose_jumps_are_clamped() {
        let s = spec(DesignKind::IntCrm, 5);
        let mut t = TrialState::new(&s);
        t.current = 1;
        t.record_cohort(3, 0);
        assert_eq!(
            apply_safety(RawAction::Dose(4), &mut t, &s, 3, 0),
            Decision::Escalate
        );
        assert_eq!(t.current, 2);
    }

    #[test]
    fn coherence_blocks_escalation() {
        let s = spec(DesignKind::Mtpi, 4);
        let mut t = TrialState::new(&s);
        t.doses[0] = DoseState::new(9, 2).unwrap();
        t.record_cohort(3, 2);
        assert_eq!(
            apply_safety(RawAction::Move(Move::Escalate), &mut t, &s, 3, 2),
            Decision::Stay
        );
    }

    #[test]
    fn boundaries_turn_into_stay() {
        let s = spec(DesignKind::Mtpi, 3);
        let mut t = TrialState::new(&s);
        t.record_cohort(3, 1);
        assert_eq!(
            apply_safety(RawAction::Move(Move::DeEscalate), &mut t, &s, 3, 1),
            Decision::Stay
        );
        t.current = 2;
        t.record_cohort(3, 0);
        assert_eq!(
            apply_safety(RawAction::Move(Move::Escalate), &mut t, &s, 3, 0),
            Decision::Stay
        );
    }

    #[test]
    fn zero_toxicity_reaches_top_dose() {
        for kind in DesignKind::ALL {
            let s = spec(kind, 5);
            let design = Design::build(&s.design, 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let out = run_trial(&s, &design, &[0.0; 5], &mut rng).unwrap();
            assert_eq!(out.mtd, Some(4), "{kind}");
            assert_eq!(out.state.total_n(), 30);
            let doses: Vec<usize> = out.state.cohort_log.iter().map(|c| c.dose).collect();
            assert_eq!(doses, vec![0, 1, 2, 3, 4, 4, 4, 4, 4, 4], "{kind}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = spec(DesignKind::Boin, 4);
        let design = Design::build(&s.design, 4).unwrap();
        let truth = [0.1, 0.25, 0.4, 0.55];
        let a = run_trial(&s, &design, &truth, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = run_trial(&s, &design, &truth, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn select_mtd_examples() {
        let st = |n, y| DoseState::new(n, y).unwrap();
        let doses = [st(6, 2), st(0, 0), st(0, 0)];
        assert_eq!(isotonic_mtd(&doses, &[false; 3], 0.3), Some(0));
        // estimates near 0, 0.25, 0.625
        let doses = [st(8, 0), st(8, 2), st(8, 5)];
        assert_eq!(isotonic_mtd(&doses, &[false; 3], 0.3), Some(1));
        assert_eq!(isotonic_mtd(&doses, &[false, true, true], 0.3), Some(0));
    }

    #[test]
    fn audit_format() {
        let s = spec(DesignKind::Mtpi, 4);
        let design = Design::build(&s.design, 4).unwrap();
        let out = run_trial(&s, &design, &[0.99; 4], &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let text = out.state.audit_lines();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("cohort,dose,size,dlts,decision,next"));
        assert!(text.trim_end().ends_with(",STOP,"));
        assert_eq!(out.mtd, None);
    }
}
