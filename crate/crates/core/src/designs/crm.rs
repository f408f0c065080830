use crate::designs::{DesignConfig, PatientOutcome};
use crate::framework::{
    Action, DecisionModel, DoseState, Interval, IntervalPrior, Likelihood, PartitionSpec,
};
use crate::numerics::{bisect, composite_gauss_legendre, normal_pdf, DEFAULT_ROOT_TOL};
use crate::{Error, Result};

/// Curves with every dose below this, or the lowest dose above `1 - THETA_EXTREME`,
/// bound the range of the power-model parameter.
pub const THETA_EXTREME: f64 = 1e-5;

/// Power dose-response model `F(d, theta) = q_d ^ exp(theta)`.
pub fn power_model(q: f64, theta: f64) -> f64 {
    (theta.exp() * q.ln()).exp()
}

/// Indifference-interval skeleton with half-width `delta` around `target`,
/// anchored so that dose `prior_mtd` (0-based) has prior probability `target`.
pub fn indifference_skeleton(
    target: f64,
    delta: f64,
    prior_mtd: usize,
    doses: usize,
) -> Result<Vec<f64>> {
    if doses == 0 || prior_mtd >= doses {
        return Err(Error::Domain(format!(
            "prior MTD index {prior_mtd} is outside 0..{doses}"
        )));
    }
    if !(delta > 0.0 && target - delta > 0.0 && target + delta < 1.0) {
        return Err(Error::Domain(format!(
            "bad half-width {delta} around {target}"
        )));
    }
    let (low, high) = ((target - delta).ln(), (target + delta).ln());
    let mut q = vec![0.0; doses];
    q[prior_mtd] = target;
    for k in (1..=prior_mtd).rev() {
        // q_k^exp(b) = target + delta, then q_{k-1}^exp(b) = target - delta
        let scale = high / q[k].ln();
        q[k - 1] = (low / scale).exp();
    }
    for k in prior_mtd..doses - 1 {
        let scale = low / q[k].ln();
        q[k + 1] = (high / scale).exp();
    }
    if q.windows(2).any(|w| !(w[0] < w[1])) || q.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
        return Err(Error::Domain(format!("degenerate skeleton {q:?}")));
    }
    Ok(q)
}

/// Boundaries `psi_1 = A_1 < psi_2 < ... < psi_{T+1} = A_{T+1}` of the
/// parameter intervals on which each dose is the one closest to the target.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaIntervals {
    pub psi: Vec<f64>,
}

impl ThetaIntervals {
    pub fn doses(&self) -> usize {
        self.psi.len() - 1
    }

    /// `[psi_1, psi_2)`, ..., `[psi_T, psi_{T+1}]` labelled with 0-based doses.
    ///
    /// Ties prefer the lower dose.
    pub fn partition(&self) -> Result<PartitionSpec> {
        let t = self.doses();
        let intervals = (0..t)
            .map(|k| Interval::new(self.psi[k], self.psi[k + 1], true, k + 1 == t))
            .collect::<Result<Vec<_>>>()?;
        let labels = (0..t).map(Action::Model).collect();
        PartitionSpec::new(intervals, labels)?.with_tie_rank((0..t).map(|k| -(k as i64)).collect())
    }
}

/// Root of `q_prev^exp(theta) + q_next^exp(theta) = 2 target` in `[lo, hi]`.
pub fn theta_boundary(q_prev: f64, q_next: f64, target: f64, lo: f64, hi: f64) -> Result<f64> {
    bisect(
        |theta| power_model(q_prev, theta) + power_model(q_next, theta) - 2.0 * target,
        lo,
        hi,
        DEFAULT_ROOT_TOL,
    )
}

pub fn solve_theta_intervals(skeleton: &[f64], target: f64) -> Result<ThetaIntervals> {
    let t = skeleton.len();
    if t < 2 {
        return Err(Error::Domain("need at least two doses".into()));
    }
    if skeleton.windows(2).any(|w| !(w[0] < w[1]))
        || skeleton.iter().any(|q| !(*q > 0.0 && *q < 1.0))
    {
        return Err(Error::Domain(format!(
            "skeleton {skeleton:?} must increase inside (0, 1)"
        )));
    }
    // q_1^exp(A_1) = 1 - 1e-5 and q_T^exp(A_{T+1}) = 1e-5
    let a_lo = ((-THETA_EXTREME).ln_1p() / skeleton[0].ln()).ln();
    let a_hi = (THETA_EXTREME.ln() / skeleton[t - 1].ln()).ln();
    let mut psi = Vec::with_capacity(t + 1);
    psi.push(a_lo);
    for k in 1..t {
        psi.push(theta_boundary(
            skeleton[k - 1],
            skeleton[k],
            target,
            a_lo,
            a_hi,
        )?);
    }
    psi.push(a_hi);
    if psi.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain(format!(
            "interval boundaries are not increasing: {psi:?}"
        )));
    }
    Ok(ThetaIntervals { psi })
}

/// Per-dose tallies from a patient history.
pub fn tally_history(history: &[PatientOutcome], doses: usize) -> Result<Vec<DoseState>> {
    let mut tallies = vec![DoseState::default(); doses];
    for p in history {
        let t = tallies
            .get_mut(p.dose)
            .ok_or_else(|| Error::Domain(format!("dose {} outside 1..={doses}", p.dose + 1)))?;
        t.add(1, u32::from(p.dlt));
    }
    Ok(tallies)
}

/// Binary-outcome likelihood of the power model over all doses.
#[derive(Debug, Clone, Copy)]
pub struct PowerLikelihood<'a> {
    pub log_skeleton: &'a [f64],
    pub tallies: &'a [DoseState],
}

impl Likelihood for PowerLikelihood<'_> {
    fn log_likelihood(&self, theta: f64) -> f64 {
        let s = theta.exp();
        let mut ll = 0.0;
        for (lq, t) in self.log_skeleton.iter().zip(self.tallies) {
            if t.n == 0 {
                continue;
            }
            let a = s * lq;
            if t.y > 0 {
                ll += f64::from(t.y) * a;
            }
            if t.n > t.y {
                ll += f64::from(t.n - t.y) * (-a.exp_m1()).ln();
            }
        }
        ll
    }
}

fn resolve_skeleton(cfg: &DesignConfig, doses: usize) -> Result<Vec<f64>> {
    match &cfg.skeleton {
        Some(q) => {
            if q.len() != doses {
                return Err(Error::config(
                    "design.skeleton",
                    format!("has {} entries for {doses} doses", q.len()),
                ));
            }
            Ok(q.clone())
        }
        None => {
            let nu = match cfg.prior_mtd {
                Some(nu) if nu > doses => {
                    return Err(Error::config(
                        "design.prior_mtd",
                        format!("exceeds {doses} doses"),
                    ))
                }
                Some(nu) => nu - 1,
                None => default_prior_mtd(doses),
            };
            indifference_skeleton(cfg.target, cfg.delta, nu, doses)
        }
    }
}

/// Middle dose, rounding up: 0-based index `ceil(T/2) - 1`.
pub(crate) fn default_prior_mtd(doses: usize) -> usize {
    doses.div_ceil(2).saturating_sub(1)
}

/// Prior mass beyond this many sds is ignored by the node rules.
const PRIOR_RANGE_SD: f64 = 10.0;
/// Composite Gauss–Legendre rule used for every posterior integral over the
/// parameter: panels of at most this width, each with `GL_ORDER` nodes.
const PANEL_WIDTH: f64 = 0.2;
const GL_ORDER: usize = 8;

/// Quadrature nodes over the parameter with the power model cached per dose,
/// so that a posterior integral is a weighted sum.
#[derive(Debug, Clone)]
struct NodeTable {
    /// Quadrature weight times prior density.
    weights: Vec<f64>,
    /// `ln F(d, theta_j)` and `ln(1 - F(d, theta_j))`, indexed `[dose][node]`.
    log_f: Vec<Vec<f64>>,
    log_not_f: Vec<Vec<f64>>,
    /// `F(d, theta_j)`, indexed `[dose][node]`.
    f: Vec<Vec<f64>>,
}

impl NodeTable {
    fn new(
        skeleton: &[f64],
        sigma: f64,
        ranges: &[(f64, f64)],
    ) -> Result<(Self, Vec<std::ops::Range<usize>>)> {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut spans = Vec::with_capacity(ranges.len());
        for &(lo, hi) in ranges {
            let start = nodes.len();
            if lo < hi {
                let (x, w) = composite_gauss_legendre(lo, hi, PANEL_WIDTH, GL_ORDER)?;
                weights.extend(x.iter().zip(&w).map(|(&t, &w)| w * normal_pdf(t, sigma)));
                nodes.extend(x);
            }
            spans.push(start..nodes.len());
        }
        let log_f: Vec<Vec<f64>> = skeleton
            .iter()
            .map(|q| nodes.iter().map(|t| t.exp() * q.ln()).collect())
            .collect();
        let log_not_f = log_f
            .iter()
            .map(|row| row.iter().map(|a| (-a.exp_m1()).ln()).collect())
            .collect();
        let f = log_f
            .iter()
            .map(|row| row.iter().map(|a| a.exp()).collect())
            .collect();
        Ok((
            Self {
                weights,
                log_f,
                log_not_f,
                f,
            },
            spans,
        ))
    }

    /// Likelihood at every node, rescaled so that its maximum is 1.
    fn scaled_likelihood(&self, tallies: &[DoseState]) -> Vec<f64> {
        let mut ll = vec![0.0; self.weights.len()];
        for (d, t) in tallies.iter().enumerate() {
            if t.n == 0 {
                continue;
            }
            let (y, m) = (f64::from(t.y), f64::from(t.n - t.y));
            for ((v, a), b) in ll.iter_mut().zip(&self.log_f[d]).zip(&self.log_not_f[d]) {
                if t.y > 0 {
                    *v += y * a;
                }
                if t.n > t.y {
                    *v += m * b;
                }
            }
        }
        let shift = ll
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let shift = if shift.is_finite() { shift } else { 0.0 };
        ll.iter().map(|v| (v - shift).exp()).collect()
    }
}

/// Int-CRM: Bayes rule over the parameter intervals under a truncated normal prior.
#[derive(Debug, Clone)]
pub struct IntCrm {
    skeleton: Vec<f64>,
    log_skeleton: Vec<f64>,
    theta: ThetaIntervals,
    model: DecisionModel,
    table: NodeTable,
    spans: Vec<std::ops::Range<usize>>,
    /// `ln Z_k`, the prior mass of each interval under the node rule.
    log_norms: Vec<f64>,
}

impl IntCrm {
    pub fn new(cfg: &DesignConfig, doses: usize) -> Result<Self> {
        cfg.validate()?;
        let skeleton = resolve_skeleton(cfg, doses)?;
        let theta = solve_theta_intervals(&skeleton, cfg.target)?;
        let sigma = cfg.sigma2.sqrt();
        let model = DecisionModel::new(theta.partition()?, IntervalPrior::truncated_normal(sigma))?;
        let r = PRIOR_RANGE_SD * sigma;
        let ranges: Vec<(f64, f64)> = theta
            .psi
            .windows(2)
            .map(|w| (w[0].max(-r), w[1].min(r)))
            .collect();
        let (table, spans) = NodeTable::new(&skeleton, sigma, &ranges)?;
        let log_norms = spans
            .iter()
            .map(|s| table.weights[s.clone()].iter().sum::<f64>().ln())
            .collect();
        Ok(Self {
            log_skeleton: skeleton.iter().map(|q| q.ln()).collect(),
            skeleton,
            theta,
            model,
            table,
            spans,
            log_norms,
        })
    }

    pub fn skeleton(&self) -> &[f64] {
        &self.skeleton
    }

    pub fn theta_intervals(&self) -> &ThetaIntervals {
        &self.theta
    }

    /// The same decision problem evaluated by adaptive quadrature; slower,
    /// kept for cross-checking the node rule.
    pub fn model(&self) -> &DecisionModel {
        &self.model
    }

    pub fn log_skeleton(&self) -> &[f64] {
        &self.log_skeleton
    }

    /// `ln` of each interval's evidence, up to a common additive constant.
    pub fn log_scores(&self, tallies: &[DoseState]) -> Result<Vec<f64>> {
        self.likelihood(tallies)?;
        let lik = self.table.scaled_likelihood(tallies);
        Ok(self
            .spans
            .iter()
            .zip(&self.log_norms)
            .map(|(s, ln_z)| {
                let num: f64 = self.table.weights[s.clone()]
                    .iter()
                    .zip(&lik[s.clone()])
                    .map(|(w, l)| w * l)
                    .sum();
                num.ln() - ln_z
            })
            .collect())
    }

    /// Posterior model probabilities `Pr(m = k | data)` for each dose.
    pub fn posterior_probs(&self, tallies: &[DoseState]) -> Result<Vec<f64>> {
        let scores = self.log_scores(tallies)?;
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        let total: f64 = w.iter().sum();
        Ok(w.iter().map(|v| v / total).collect())
    }

    fn likelihood<'a>(&'a self, tallies: &'a [DoseState]) -> Result<PowerLikelihood<'a>> {
        if tallies.len() != self.skeleton.len() {
            return Err(Error::LengthMismatch {
                left: tallies.len(),
                right: self.skeleton.len(),
            });
        }
        Ok(PowerLikelihood {
            log_skeleton: &self.log_skeleton,
            tallies,
        })
    }

    /// Recommended dose, 0-based. With no data this is the lowest dose.
    pub fn recommend(&self, tallies: &[DoseState]) -> Result<usize> {
        self.likelihood(tallies)?;
        if tallies.iter().all(|t| t.n == 0) {
            return Ok(0);
        }
        self.model.partition().argmax(&self.log_scores(tallies)?)
    }
}

/// CRM benchmark: dose whose posterior mean toxicity is closest to the target.
#[derive(Debug, Clone)]
pub struct Crm {
    skeleton: Vec<f64>,
    target: f64,
    table: NodeTable,
}

impl Crm {
    pub fn new(cfg: &DesignConfig, doses: usize) -> Result<Self> {
        cfg.validate()?;
        let skeleton = resolve_skeleton(cfg, doses)?;
        let r = PRIOR_RANGE_SD * cfg.sigma2.sqrt();
        let (table, _) = NodeTable::new(&skeleton, cfg.sigma2.sqrt(), &[(-r, r)])?;
        Ok(Self {
            skeleton,
            target: cfg.target,
            table,
        })
    }

    pub fn skeleton(&self) -> &[f64] {
        &self.skeleton
    }

    /// Posterior mean of `F(d, theta)` for every dose.
    pub fn posterior_means(&self, tallies: &[DoseState]) -> Result<Vec<f64>> {
        if tallies.len() != self.skeleton.len() {
            return Err(Error::LengthMismatch {
                left: tallies.len(),
                right: self.skeleton.len(),
            });
        }
        let post: Vec<f64> = self
            .table
            .scaled_likelihood(tallies)
            .iter()
            .zip(&self.table.weights)
            .map(|(l, w)| l * w)
            .collect();
        let z: f64 = post.iter().sum();
        if !(z > 0.0) {
            return Err(Error::Domain(
                "posterior normalizing constant vanished".into(),
            ));
        }
        Ok(self
            .table
            .f
            .iter()
            .map(|row| row.iter().zip(&post).map(|(f, p)| f * p).sum::<f64>() / z)
            .collect())
    }

    /// Recommended dose, 0-based; ties go to the lower dose.
    pub fn recommend(&self, tallies: &[DoseState]) -> Result<usize> {
        let means = self.posterior_means(tallies)?;
        let mut best = 0;
        for (d, m) in means.iter().enumerate() {
            if (m - self.target).abs() < (means[best] - self.target).abs() - 1e-12 {
                best = d;
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::DesignKind;

    fn cfg(kind: DesignKind) -> DesignConfig {
        DesignConfig::new(kind)
    }

    #[test]
    fn skeleton_indifference_ranges_abut() {
        let q = indifference_skeleton(0.3, 0.05, 2, 5).unwrap();
        assert_eq!(q[2], 0.3);
        // adjacent doses: the parameter at which dose k hits pT + delta
        // is the one at which dose k+1 hits pT - delta... reversed for ascent
        for k in 0..4 {
            let b = (0.25f64.ln() / q[k].ln()).ln();
            assert!((power_model(q[k + 1], b) - 0.35).abs() < 1e-12, "{q:?}");
        }
    }

    #[test]
    fn degenerate_boundary_is_zero() {
        let psi = theta_boundary(0.3, 0.3, 0.3, -5.0, 5.0).unwrap();
        assert!(psi.abs() < 1e-9);
    }

    #[test]
    fn theta_boundaries_solve_their_equation() {
        for t in 4..=6 {
            let q = indifference_skeleton(0.3, 0.05, default_prior_mtd(t), t).unwrap();
            let iv = solve_theta_intervals(&q, 0.3).unwrap();
            assert_eq!(iv.psi.len(), t + 1);
            for k in 1..t {
                let r = power_model(q[k - 1], iv.psi[k]) + power_model(q[k], iv.psi[k]) - 0.6;
                assert!(r.abs() < 1e-8);
            }
            assert!((power_model(q[0], iv.psi[0]) - (1.0 - 1e-5)).abs() < 1e-12);
            assert!((power_model(q[t - 1], iv.psi[t]) - 1e-5).abs() < 1e-15);
        }
    }

    #[test]
    fn int_crm_direction() {
        let d = IntCrm::new(&cfg(DesignKind::IntCrm), 5).unwrap();
        let mut tallies = vec![DoseState::default(); 5];
        assert_eq!(d.recommend(&tallies).unwrap(), 0);
        tallies[0] = DoseState::new(3, 0).unwrap();
        assert!(d.recommend(&tallies).unwrap() > 0);
        tallies[0] = DoseState::new(3, 3).unwrap();
        assert_eq!(d.recommend(&tallies).unwrap(), 0);
    }

    #[test]
    fn crm_direction() {
        let d = Crm::new(&cfg(DesignKind::Crm), 5).unwrap();
        let mut tallies = vec![DoseState::default(); 5];
        // prior means against a plain midpoint sum over the normal prior
        let means = d.posterior_means(&tallies).unwrap();
        let sigma = 1.34f64.sqrt();
        let (m, lo, hi) = (200_000, -10.0 * sigma, 10.0 * sigma);
        let h = (hi - lo) / m as f64;
        for (q, got) in d.skeleton().iter().zip(&means) {
            let mut acc = 0.0;
            for i in 0..m {
                let t = lo + (i as f64 + 0.5) * h;
                acc += q.powf(t.exp()) * (-t * t / (2.0 * sigma * sigma)).exp();
            }
            let want = acc * h / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        tallies[0] = DoseState::new(3, 3).unwrap();
        assert_eq!(d.recommend(&tallies).unwrap(), 0);
    }

    #[test]
    fn node_rule_matches_adaptive_quadrature() {
        let d = IntCrm::new(&cfg(DesignKind::IntCrm), 5).unwrap();
        let histories: [[(u32, u32); 5]; 5] = [
            [(3, 0), (0, 0), (0, 0), (0, 0), (0, 0)],
            [(3, 0), (3, 1), (0, 0), (0, 0), (0, 0)],
            [(3, 0), (6, 1), (9, 3), (3, 2), (0, 0)],
            [(3, 0), (3, 0), (3, 0), (3, 0), (18, 2)],
            [(30, 29), (0, 0), (0, 0), (0, 0), (0, 0)],
        ];
        for h in histories {
            let tallies: Vec<DoseState> = h
                .iter()
                .map(|&(n, y)| DoseState::new(n, y).unwrap())
                .collect();
            let lik = PowerLikelihood {
                log_skeleton: d.log_skeleton(),
                tallies: &tallies,
            };
            let slow = d.model().posterior_probs(&lik).unwrap();
            let fast = d.posterior_probs(&tallies).unwrap();
            for (a, b) in slow.iter().zip(&fast) {
                assert!((a - b).abs() < 1e-8, "{slow:?} vs {fast:?}");
            }
            assert_eq!(
                d.model().decide_index(&lik).unwrap(),
                d.recommend(&tallies).unwrap()
            );
        }
    }

    #[test]
    fn skeleton_length_checked() {
        let mut c = cfg(DesignKind::Crm);
        c.skeleton = Some(vec![0.1, 0.2, 0.3]);
        assert!(Crm::new(&c, 5).is_err());
        assert!(Crm::new(&c, 3).is_ok());
    }
}
