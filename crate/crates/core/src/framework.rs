//! Partitions, interval priors, and the Bayes rule under the 0-1 loss.
//!
//! A design is a [`PartitionSpec`] (intervals of the parameter space, each
//! tagged with an action) plus an [`IntervalPrior`] (a conditional prior
//! per interval and prior model weights). Under the 0-1 loss the posterior
//! expected loss of action `a` is `1 - Pr(param in I_a | data)`, so the
//! Bayes rule is the interval with the largest posterior model probability.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::numerics::{
    beta_interval_mass, beta_pdf, integrate, ln_beta, normal_pdf, BetaParams, Quadrature,
};
use crate::{Error, Result};

/// Log-posterior differences below this are treated as ties.
pub const TIE_TOL: f64 = 1e-9;

/// Up-and-down dosing move relative to the current dose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Move {
    Escalate,
    Stay,
    DeEscalate,
}

impl Move {
    pub fn tag(self) -> &'static str {
        match self {
            Move::Escalate => "E",
            Move::Stay => "S",
            Move::DeEscalate => "D",
        }
    }

    /// Position along E -> S -> D.
    pub fn severity(self) -> u8 {
        match self {
            Move::Escalate => 0,
            Move::Stay => 1,
            Move::DeEscalate => 2,
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Label attached to an interval of a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Move(Move),
    /// Model index, 0-based.
    Model(usize),
}

impl Action {
    pub fn as_move(self) -> Option<Move> {
        match self {
            Action::Move(m) => Some(m),
            Action::Model(_) => None,
        }
    }

    /// Default preference among tied intervals; larger wins.
    ///
    /// D beats E beats S so that a tie on a boundary of the stay interval
    /// goes to the interval that owns the boundary point. Model indices prefer
    /// the higher (more toxic) interval.
    fn default_tie_rank(self) -> i64 {
        match self {
            Action::Move(Move::DeEscalate) => 2,
            Action::Move(Move::Escalate) => 1,
            Action::Move(Move::Stay) => 0,
            Action::Model(k) => k as i64,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move(m) => m.fmt(f),
            Action::Model(k) => write!(f, "{}", k + 1),
        }
    }
}

/// Interval with explicit endpoint membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Result<Self> {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Partition(format!(
                "bad interval bounds [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }

    /// `[lo, hi]`
    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    /// `(lo, hi)`
    pub fn open(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, false, false)
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, p: f64) -> bool {
        let above = if self.lo_closed {
            p >= self.lo
        } else {
            p > self.lo
        };
        let below = if self.hi_closed {
            p <= self.hi
        } else {
            p < self.hi
        };
        above && below
    }

    pub fn contains_interior(&self, p: f64) -> bool {
        p > self.lo && p < self.hi
    }

    /// True when this interval lies entirely within `other` (closure ignored).
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.lo >= lo && self.hi <= hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// Ordered intervals that tile a closed parameter range, one action each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    intervals: Vec<Interval>,
    labels: Vec<Action>,
    tie_rank: Vec<i64>,
}

impl PartitionSpec {
    pub fn new(intervals: Vec<Interval>, labels: Vec<Action>) -> Result<Self> {
        if intervals.len() != labels.len() {
            return Err(Error::Partition(format!(
                "{} intervals but {} labels",
                intervals.len(),
                labels.len()
            )));
        }
        if intervals.len() < 2 {
            return Err(Error::Partition(
                "a partition needs at least two intervals".into(),
            ));
        }
        let first = intervals[0];
        let last = intervals[intervals.len() - 1];
        if !first.lo_closed || !last.hi_closed {
            return Err(Error::Partition(
                "the outer endpoints of the parameter space must be included".into(),
            ));
        }
        for (i, pair) in intervals.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            if a.hi != b.lo {
                return Err(Error::Partition(format!(
                    "gap or overlap between interval {i} {a} and interval {} {b}",
                    i + 1
                )));
            }
            if a.hi_closed == b.lo_closed {
                return Err(Error::Partition(format!(
                    "boundary {} must belong to exactly one of {a} and {b}",
                    a.hi
                )));
            }
        }
        let tie_rank = labels.iter().map(|l| l.default_tie_rank()).collect();
        Ok(Self {
            intervals,
            labels,
            tie_rank,
        })
    }

    /// Overrides the tie preference; among tied intervals the largest rank wins.
    pub fn with_tie_rank(mut self, rank: Vec<i64>) -> Result<Self> {
        if rank.len() != self.intervals.len() {
            return Err(Error::LengthMismatch {
                left: rank.len(),
                right: self.intervals.len(),
            });
        }
        self.tie_rank = rank;
        Ok(self)
    }

    /// `[0, pT - e1]`, `(pT - e1, pT + e2)`, `[pT + e2, 1]` tagged E, S, D.
    pub fn three_interval(target: f64, eps1: f64, eps2: f64) -> Result<Self> {
        let lo = target - eps1;
        let hi = target + eps2;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return Err(Error::Partition(format!(
                "need 0 < pT - eps1 < pT + eps2 < 1, got ({lo}, {hi})"
            )));
        }
        Self::new(
            vec![
                Interval::closed(0.0, lo)?,
                Interval::open(lo, hi)?,
                Interval::closed(hi, 1.0)?,
            ],
            vec![
                Action::Move(Move::Escalate),
                Action::Move(Move::Stay),
                Action::Move(Move::DeEscalate),
            ],
        )
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn labels(&self) -> &[Action] {
        &self.labels
    }

    pub fn lower(&self) -> f64 {
        self.intervals[0].lo
    }

    pub fn upper(&self) -> f64 {
        self.intervals[self.intervals.len() - 1].hi
    }

    /// Index of the interval containing `p`.
    pub fn locate(&self, p: f64) -> Option<usize> {
        self.intervals.iter().position(|i| i.contains(p))
    }

    pub fn index_of(&self, a: Action) -> Option<usize> {
        self.labels.iter().position(|l| *l == a)
    }

    /// Argmax of `scores`, resolving near-ties with the partition's tie rank.
    pub fn argmax(&self, scores: &[f64]) -> Result<usize> {
        if scores.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: self.len(),
            });
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::Domain("posterior score is NaN".into()));
        }
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let floor = best - TIE_TOL;
        let winner = (0..scores.len())
            .filter(|&k| scores[k] >= floor)
            .max_by_key(|&k| (self.tie_rank[k], k))
            .expect("at least one interval reaches the maximum");
        Ok(winner)
    }
}

/// Binomial tally at one dose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DoseState {
    pub n: u32,
    pub y: u32,
}

impl DoseState {
    pub fn new(n: u32, y: u32) -> Result<Self> {
        if y > n {
            return Err(Error::Domain(format!("y = {y} exceeds n = {n}")));
        }
        Ok(Self { n, y })
    }

    /// Empirical rate y/n; `None` without data.
    pub fn rate(&self) -> Option<f64> {
        (self.n > 0).then(|| f64::from(self.y) / f64::from(self.n))
    }

    pub fn add(&mut self, size: u32, events: u32) {
        self.n += size;
        self.y += events;
    }
}

/// A likelihood over a scalar parameter.
pub trait Likelihood {
    fn log_likelihood(&self, x: f64) -> f64;

    /// Binomial sufficient statistics, when the likelihood is `x^y (1-x)^(n-y)`.
    fn binomial(&self) -> Option<DoseState> {
        None
    }
}

impl Likelihood for DoseState {
    fn log_likelihood(&self, p: f64) -> f64 {
        let y = f64::from(self.y);
        let f = f64::from(self.n - self.y);
        let a = if self.y == 0 { 0.0 } else { y * p.ln() };
        let b = if self.n == self.y {
            0.0
        } else {
            f * (-p).ln_1p()
        };
        a + b
    }

    fn binomial(&self) -> Option<DoseState> {
        Some(*self)
    }
}

/// Conditional prior shape inside each interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PriorKind {
    /// Be(alpha, beta) truncated to each interval.
    TruncatedBeta(BetaParams),
    /// A point mass per interval; atoms must be interior to their interval.
    PointMass(Vec<f64>),
    /// N(0, sigma^2) truncated to each interval.
    TruncatedNormal { sigma: f64 },
}

/// Hierarchical prior: `pi(m = k)` and `pi(param | m = k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPrior {
    pub kind: PriorKind,
    /// `None` means uniform `1/K`.
    pub model_weights: Option<Vec<f64>>,
}

impl IntervalPrior {
    pub fn truncated_beta(params: BetaParams) -> Self {
        Self {
            kind: PriorKind::TruncatedBeta(params),
            model_weights: None,
        }
    }

    pub fn point_mass(atoms: Vec<f64>) -> Self {
        Self {
            kind: PriorKind::PointMass(atoms),
            model_weights: None,
        }
    }

    pub fn truncated_normal(sigma: f64) -> Self {
        Self {
            kind: PriorKind::TruncatedNormal { sigma },
            model_weights: None,
        }
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Self {
        self.model_weights = Some(weights);
        self
    }

    pub fn validate(&self, partition: &PartitionSpec) -> Result<()> {
        let k = partition.len();
        if let Some(w) = &self.model_weights {
            if w.len() != k {
                return Err(Error::Prior(format!(
                    "{} model weights for {k} intervals",
                    w.len()
                )));
            }
            if w.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::Prior("model weights must be nonnegative".into()));
            }
            let total: f64 = w.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Prior(format!("model weights sum to {total}, not 1")));
            }
        }
        match &self.kind {
            PriorKind::TruncatedBeta(_) => {}
            PriorKind::PointMass(atoms) => {
                if atoms.len() != k {
                    return Err(Error::Prior(format!(
                        "{} atoms for {k} intervals",
                        atoms.len()
                    )));
                }
                for (i, (atom, iv)) in atoms.iter().zip(partition.intervals()).enumerate() {
                    if !iv.contains_interior(*atom) {
                        return Err(Error::Prior(format!(
                            "atom {i} = {atom} is not interior to interval {iv}"
                        )));
                    }
                }
            }
            PriorKind::TruncatedNormal { sigma } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::Prior(format!("sigma must be positive, got {sigma}")));
                }
            }
        }
        Ok(())
    }
}

const SHIFT_GRID: usize = 257;

/// A partition and prior validated together, with per-interval prior
/// normalizing constants computed once.
#[derive(Debug, Clone)]
pub struct DecisionModel {
    partition: PartitionSpec,
    prior: IntervalPrior,
    /// ln of the prior mass of each interval (continuous kinds only).
    log_norm: Vec<f64>,
    log_weights: Vec<f64>,
    quad: Quadrature,
}

impl DecisionModel {
    pub fn new(partition: PartitionSpec, prior: IntervalPrior) -> Result<Self> {
        Self::with_quadrature(partition, prior, Quadrature::default())
    }

    pub fn with_quadrature(
        partition: PartitionSpec,
        prior: IntervalPrior,
        quad: Quadrature,
    ) -> Result<Self> {
        prior.validate(&partition)?;
        let k = partition.len();
        let log_norm = match &prior.kind {
            PriorKind::PointMass(_) => vec![0.0; k],
            PriorKind::TruncatedBeta(params) => partition
                .intervals()
                .iter()
                .map(|iv| {
                    if iv.length() <= 0.0 {
                        return Err(Error::Prior(format!(
                            "interval {iv} has zero length under a continuous prior"
                        )));
                    }
                    Ok(beta_interval_mass(*params, iv.lo, iv.hi)?.ln())
                })
                .collect::<Result<Vec<_>>>()?,
            PriorKind::TruncatedNormal { sigma } => {
                let sigma = *sigma;
                partition
                    .intervals()
                    .iter()
                    .map(|iv| {
                        if iv.length() <= 0.0 {
                            return Err(Error::Prior(format!(
                                "interval {iv} has zero length under a continuous prior"
                            )));
                        }
                        Ok(integrate(|x| normal_pdf(x, sigma), iv.lo, iv.hi, quad)?.ln())
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let log_weights = match &prior.model_weights {
            None => vec![-(k as f64).ln(); k],
            Some(w) => w.iter().map(|x| x.ln()).collect(),
        };
        Ok(Self {
            partition,
            prior,
            log_norm,
            log_weights,
            quad,
        })
    }

    pub fn partition(&self) -> &PartitionSpec {
        &self.partition
    }

    pub fn prior(&self) -> &IntervalPrior {
        &self.prior
    }

    /// ln of the marginal likelihood of interval `k`.
    pub fn log_evidence<L: Likelihood + ?Sized>(&self, k: usize, lik: &L) -> Result<f64> {
        let iv = *self
            .partition
            .intervals()
            .get(k)
            .ok_or_else(|| Error::Domain(format!("interval index {k} out of range")))?;
        let shift = self.shift(lik, iv.lo, iv.hi);
        self.log_evidence_shifted(k, lik, shift)
    }

    fn log_evidence_shifted<L: Likelihood + ?Sized>(
        &self,
        k: usize,
        lik: &L,
        shift: f64,
    ) -> Result<f64> {
        let iv = self.partition.intervals()[k];
        match &self.prior.kind {
            PriorKind::PointMass(atoms) => Ok(lik.log_likelihood(atoms[k])),
            PriorKind::TruncatedBeta(params) => match lik.binomial() {
                Some(s) => {
                    let post = params.posterior(s.n, s.y);
                    let mass = beta_interval_mass(post, iv.lo, iv.hi)?;
                    Ok(
                        ln_beta(post.alpha(), post.beta()) - ln_beta(params.alpha(), params.beta())
                            + mass.ln()
                            - self.log_norm[k],
                    )
                }
                None => {
                    let p = *params;
                    let v = integrate(
                        |x| (lik.log_likelihood(x) - shift).exp() * beta_pdf(p, x),
                        iv.lo,
                        iv.hi,
                        self.quad,
                    )?;
                    Ok(v.ln() + shift - self.log_norm[k])
                }
            },
            PriorKind::TruncatedNormal { sigma } => {
                let s = *sigma;
                let v = integrate(
                    |x| (lik.log_likelihood(x) - shift).exp() * normal_pdf(x, s),
                    iv.lo,
                    iv.hi,
                    self.quad,
                )?;
                Ok(v.ln() + shift - self.log_norm[k])
            }
        }
    }

    /// Max of the log-likelihood over a grid, used to rescale integrands.
    fn shift<L: Likelihood + ?Sized>(&self, lik: &L, lo: f64, hi: f64) -> f64 {
        let needs_quadrature = match &self.prior.kind {
            PriorKind::PointMass(_) => false,
            PriorKind::TruncatedBeta(_) => lik.binomial().is_none(),
            PriorKind::TruncatedNormal { .. } => true,
        };
        if !needs_quadrature {
            return 0.0;
        }
        let step = (hi - lo) / (SHIFT_GRID - 1) as f64;
        let m = (0..SHIFT_GRID)
            .map(|i| lik.log_likelihood(lo + step * i as f64))
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if m.is_finite() {
            m
        } else {
            0.0
        }
    }

    /// Unnormalized log posterior model probabilities, `ln pi(m=k) + ln evidence_k`.
    pub fn log_posterior_scores<L: Likelihood + ?Sized>(&self, lik: &L) -> Result<Vec<f64>> {
        let shift = self.shift(lik, self.partition.lower(), self.partition.upper());
        (0..self.partition.len())
            .map(|k| Ok(self.log_weights[k] + self.log_evidence_shifted(k, lik, shift)?))
            .collect()
    }

    /// Normalized posterior model probabilities `Pr(m = k | data)`.
    pub fn posterior_probs<L: Likelihood + ?Sized>(&self, lik: &L) -> Result<Vec<f64>> {
        let scores = self.log_posterior_scores(lik)?;
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / total).collect())
    }

    /// Index of the Bayes-rule interval.
    pub fn decide_index<L: Likelihood + ?Sized>(&self, lik: &L) -> Result<usize> {
        let scores = self.log_posterior_scores(lik)?;
        self.partition.argmax(&scores)
    }

    /// The Bayes rule: label of the interval with the largest posterior probability.
    pub fn decide<L: Likelihood + ?Sized>(&self, lik: &L) -> Result<Action> {
        Ok(self.partition.labels()[self.decide_index(lik)?])
    }
}

/// Marginal likelihood `∫ p^y (1-p)^(n-y) pi(p | m = k) dp` of interval `k`.
pub fn model_evidence(
    k: usize,
    prior: &IntervalPrior,
    partition: &PartitionSpec,
    state: DoseState,
) -> Result<f64> {
    let model = DecisionModel::new(partition.clone(), prior.clone())?;
    Ok(model.log_evidence(k, &state)?.exp())
}

/// Bayes rule for one dose's tally.
pub fn bayes_decide(
    prior: &IntervalPrior,
    partition: &PartitionSpec,
    state: DoseState,
) -> Result<Action> {
    DecisionModel::new(partition.clone(), prior.clone())?.decide(&state)
}

/// 0-1 loss: zero iff `p` lies in the interval labelled `a`.
pub fn zero_one_loss(a: Action, p: f64, partition: &PartitionSpec) -> u8 {
    match partition.index_of(a) {
        Some(k) if partition.intervals()[k].contains(p) => 0,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mtpi() -> PartitionSpec {
        PartitionSpec::three_interval(0.3, 0.05, 0.05).unwrap()
    }

    const E: Action = Action::Move(Move::Escalate);
    const S: Action = Action::Move(Move::Stay);
    const D: Action = Action::Move(Move::DeEscalate);

    #[test]
    fn point_mass_evidence() {
        let prior = IntervalPrior::point_mass(vec![0.1, 0.3, 0.6]);
        let v = model_evidence(1, &prior, &mtpi(), DoseState::new(3, 1).unwrap()).unwrap();
        assert!((v - 0.147).abs() < 1e-14);
    }

    #[test]
    fn truncated_uniform_evidence_is_upm_times_beta_constant() {
        let prior = IntervalPrior::truncated_beta(BetaParams::uniform());
        let v = model_evidence(1, &prior, &mtpi(), DoseState::new(3, 1).unwrap()).unwrap();
        // B(2, 3) = 1/12
        assert!((v * 12.0 - 1.7530).abs() < 1e-12, "{}", v * 12.0);
    }

    #[test]
    fn no_data_on_whole_space_is_one() {
        let overlap = PartitionSpec::new(
            vec![
                Interval::closed(0.0, 0.5).unwrap(),
                Interval::closed(0.5, 1.0).unwrap(),
            ],
            vec![E, D],
        );
        assert!(overlap.is_err());
        let whole = PartitionSpec::new(
            vec![
                Interval::new(0.0, 0.5, true, false).unwrap(),
                Interval::closed(0.5, 1.0).unwrap(),
            ],
            vec![E, D],
        )
        .unwrap();
        let prior = IntervalPrior::truncated_beta(BetaParams::uniform());
        for k in 0..2 {
            let v = model_evidence(k, &prior, &whole, DoseState::default()).unwrap();
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_length_interval_rejected_for_continuous_prior() {
        let p = PartitionSpec::new(
            vec![
                Interval::new(0.0, 0.5, true, false).unwrap(),
                Interval::closed(0.5, 0.5).unwrap(),
                Interval::new(0.5, 1.0, false, true).unwrap(),
            ],
            vec![E, S, D],
        )
        .unwrap();
        let prior = IntervalPrior::truncated_beta(BetaParams::uniform());
        assert!(DecisionModel::new(p, prior).is_err());
    }

    #[test]
    fn mtpi_examples() {
        let prior = IntervalPrior::truncated_beta(BetaParams::uniform());
        assert_eq!(
            bayes_decide(&prior, &mtpi(), DoseState::new(3, 0).unwrap()).unwrap(),
            E
        );
        assert_eq!(
            bayes_decide(&prior, &mtpi(), DoseState::new(3, 1).unwrap()).unwrap(),
            S
        );
        assert_eq!(
            bayes_decide(&prior, &mtpi(), DoseState::new(3, 3).unwrap()).unwrap(),
            D
        );
    }

    #[test]
    fn loss_table() {
        let p = mtpi();
        assert_eq!(zero_one_loss(D, 0.5, &p), 0);
        assert_eq!(zero_one_loss(S, 0.5, &p), 1);
        assert_eq!(zero_one_loss(E, 0.0, &p), 0);
        assert_eq!(zero_one_loss(E, 0.25, &p), 0);
        assert_eq!(zero_one_loss(S, 0.25, &p), 1);
        assert_eq!(zero_one_loss(D, 0.35, &p), 0);
    }

    #[test]
    fn atoms_must_be_interior() {
        let prior = IntervalPrior::point_mass(vec![0.25, 0.3, 0.6]);
        assert!(matches!(
            DecisionModel::new(mtpi(), prior),
            Err(Error::Prior(_))
        ));
    }

    #[test]
    fn weights_validated() {
        let prior =
            IntervalPrior::truncated_beta(BetaParams::uniform()).with_weights(vec![0.5, 0.5, 0.5]);
        assert!(DecisionModel::new(mtpi(), prior).is_err());
    }

    #[test]
    fn ties_prefer_outer_actions() {
        let p = mtpi();
        assert_eq!(p.argmax(&[1.0, 1.0, 0.0]).unwrap(), 0);
        assert_eq!(p.argmax(&[0.0, 1.0, 1.0]).unwrap(), 2);
        assert_eq!(p.argmax(&[1.0, 1.0, 1.0]).unwrap(), 2);
        assert_eq!(p.argmax(&[0.0, 1.0, 0.5]).unwrap(), 1);
    }

    #[test]
    fn uneven_weights_shift_the_rule() {
        let s = DoseState::new(3, 1).unwrap();
        let flat = IntervalPrior::truncated_beta(BetaParams::uniform());
        assert_eq!(bayes_decide(&flat, &mtpi(), s).unwrap(), S);
        let skewed = flat.with_weights(vec![0.8, 0.1, 0.1]);
        assert_eq!(bayes_decide(&skewed, &mtpi(), s).unwrap(), E);
    }

    #[test]
    fn quadrature_route_matches_closed_form() {
        // Wrap the tally so the closed form is unavailable.
        struct Opaque(DoseState);
        impl Likelihood for Opaque {
            fn log_likelihood(&self, x: f64) -> f64 {
                self.0.log_likelihood(x)
            }
        }
        let prior = IntervalPrior::truncated_beta(BetaParams::new(2.0, 5.0).unwrap());
        let model = DecisionModel::new(mtpi(), prior).unwrap();
        for (n, y) in [(3, 0), (3, 1), (6, 4), (12, 2)] {
            let s = DoseState::new(n, y).unwrap();
            for k in 0..3 {
                let a = model.log_evidence(k, &s).unwrap();
                let b = model.log_evidence(k, &Opaque(s)).unwrap();
                assert!((a - b).abs() < 1e-7, "n={n} y={y} k={k}: {a} vs {b}");
            }
        }
    }
}
