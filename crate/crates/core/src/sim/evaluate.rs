use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{random_scenario, MtdRule, MtdSupport, Scenario};
use crate::designs::{Design, DesignConfig};
use crate::trial::{run_trial_with_uniforms, TrialOutcome, TrialSpec};
use crate::{Error, Result};

/// Metric names in output order.
pub const METRIC_NAMES: [&str; 6] = [
    "correct_sel",
    "sel_over",
    "pat_at_mtd",
    "pat_over",
    "tox",
    "none_sel",
];

/// Keeps scenario draws independent of trial draws under the same master seed.
const SCENARIO_SEED_SALT: u64 = 0x5CE7_A210_D05E_F1D0;

/// Operating characteristics of one design on one scenario, or their summaries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Selection of the true MTD (no selection when there is none).
    pub correct_sel: f64,
    /// Selection of a dose above the true MTD.
    pub sel_over: f64,
    /// Share of patients treated at the true MTD.
    pub pat_at_mtd: f64,
    /// Share of patients treated above the true MTD.
    pub pat_over: f64,
    /// Share of patients with a DLT.
    pub tox: f64,
    /// No dose selected.
    pub none_sel: f64,
}

impl Metrics {
    pub fn to_array(self) -> [f64; 6] {
        [
            self.correct_sel,
            self.sel_over,
            self.pat_at_mtd,
            self.pat_over,
            self.tox,
            self.none_sel,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            correct_sel: a[0],
            sel_over: a[1],
            pat_at_mtd: a[2],
            pat_over: a[3],
            tox: a[4],
            none_sel: a[5],
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    trials: u64,
    correct: u64,
    over: u64,
    none: u64,
    patients: u64,
    at_mtd: u64,
    above_mtd: u64,
    dlts: u64,
}

impl Tally {
    fn add(&mut self, out: &TrialOutcome, mtd: Option<usize>) {
        self.trials += 1;
        self.correct += u64::from(out.mtd == mtd);
        self.over += u64::from(match (out.mtd, mtd) {
            (Some(s), Some(m)) => s > m,
            (Some(_), None) => true,
            (None, _) => false,
        });
        self.none += u64::from(out.mtd.is_none());
        for (d, st) in out.state.doses.iter().enumerate() {
            let n = u64::from(st.n);
            self.patients += n;
            self.dlts += u64::from(st.y);
            match mtd {
                Some(m) if d == m => self.at_mtd += n,
                Some(m) if d > m => self.above_mtd += n,
                Some(_) => {}
                None => self.above_mtd += n,
            }
        }
    }

    fn metrics(&self) -> Metrics {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Metrics {
            correct_sel: ratio(self.correct, self.trials),
            sel_over: ratio(self.over, self.trials),
            pat_at_mtd: ratio(self.at_mtd, self.patients),
            pat_over: ratio(self.above_mtd, self.patients),
            tox: ratio(self.dlts, self.patients),
            none_sel: ratio(self.none, self.trials),
        }
    }
}

/// Trial settings shared by all designs in a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    pub max_n: u32,
    pub cohort_size: u32,
    /// 0-based.
    pub start_dose: usize,
    pub replicates: u32,
    pub seed: u64,
}

impl SimSettings {
    pub fn new(replicates: u32, seed: u64) -> Self {
        Self {
            max_n: 30,
            cohort_size: 3,
            start_dose: 0,
            replicates,
            seed,
        }
    }

    pub fn spec(&self, design: &DesignConfig, doses: usize) -> TrialSpec {
        TrialSpec {
            design: design.clone(),
            doses,
            max_n: self.max_n,
            cohort_size: self.cohort_size,
            start_dose: self.start_dose,
        }
    }
}

/// Random stream for one (scenario, replicate) pair. Every design sees the
/// same stream, so their trials are paired patient by patient.
pub fn trial_rng(seed: u64, scenario: usize, replicate: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((scenario as u64) << 32) | u64::from(replicate));
    rng
}

/// Random stream for the `index`-th generated scenario.
pub fn scenario_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SCENARIO_SEED_SALT);
    rng.set_stream(index as u64);
    rng
}

/// `count` random scenarios; scenario `i` has `dose_counts[i % len]` doses.
pub fn generate_scenarios(
    count: usize,
    dose_counts: &[usize],
    rule: &MtdRule,
    support: MtdSupport,
    seed: u64,
) -> Result<Vec<Scenario>> {
    if dose_counts.is_empty() {
        return Err(Error::Domain("no dose counts given".into()));
    }
    (0..count)
        .map(|i| {
            let t = dose_counts[i % dose_counts.len()];
            random_scenario(
                format!("R{}", i + 1),
                t,
                rule,
                support,
                &mut scenario_rng(seed, i),
            )
        })
        .collect()
}

/// Designs prepared for every dose count that appears in a scenario set.
pub struct DesignBank {
    configs: Vec<DesignConfig>,
    built: BTreeMap<usize, Vec<(TrialSpec, Design)>>,
}

impl DesignBank {
    pub fn new(
        configs: &[DesignConfig],
        scenarios: &[Scenario],
        settings: &SimSettings,
    ) -> Result<Self> {
        let mut built = BTreeMap::new();
        for s in scenarios {
            if built.contains_key(&s.doses()) {
                continue;
            }
            let row = configs
                .iter()
                .map(|c| {
                    let spec = settings.spec(c, s.doses());
                    spec.validate()?;
                    Ok((spec, Design::build(c, s.doses())?))
                })
                .collect::<Result<Vec<_>>>()?;
            built.insert(s.doses(), row);
        }
        Ok(Self {
            configs: configs.to_vec(),
            built,
        })
    }

    pub fn configs(&self) -> &[DesignConfig] {
        &self.configs
    }

    /// Runs one replicate of `scenario` under every design with shared patient draws.
    pub fn run_replicate(
        &self,
        scenario: &Scenario,
        scenario_index: usize,
        replicate: u32,
        settings: &SimSettings,
    ) -> Result<Vec<TrialOutcome>> {
        let row = self.built.get(&scenario.doses()).ok_or_else(|| {
            Error::Domain(format!(
                "no designs prepared for {} doses",
                scenario.doses()
            ))
        })?;
        let mut rng = trial_rng(settings.seed, scenario_index, replicate);
        let uniforms: Vec<f64> = (0..settings.max_n).map(|_| rng.random::<f64>()).collect();
        row.iter()
            .map(|(spec, design)| run_trial_with_uniforms(spec, design, &scenario.probs, &uniforms))
            .collect()
    }
}

/// How often two designs produced identical trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub first: usize,
    pub second: usize,
    pub identical: u64,
    pub total: u64,
}

impl PairAgreement {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.identical as f64 / self.total as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResults {
    pub config: DesignConfig,
    pub per_scenario: Vec<Metrics>,
    pub mean: Metrics,
    /// Sample standard deviation across scenarios (0 for a single scenario).
    pub sd: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub scenarios: Vec<Scenario>,
    pub designs: Vec<DesignResults>,
    /// Trajectory agreement for every design pair `first < second`.
    pub agreement: Vec<PairAgreement>,
}

fn mean_sd(values: &[[f64; 6]]) -> (Metrics, Metrics) {
    let n = values.len() as f64;
    let mut mean = [0.0; 6];
    let mut sd = [0.0; 6];
    if values.is_empty() {
        return (Metrics::default(), Metrics::default());
    }
    for j in 0..6 {
        mean[j] = values.iter().map(|v| v[j]).sum::<f64>() / n;
        if values.len() > 1 {
            let ss: f64 = values.iter().map(|v| (v[j] - mean[j]).powi(2)).sum();
            sd[j] = (ss / (n - 1.0)).sqrt();
        }
    }
    (Metrics::from_array(mean), Metrics::from_array(sd))
}

/// Runs `settings.replicates` paired trials of every design on every scenario.
///
/// Scenarios are processed in parallel on the current rayon pool; the result
/// does not depend on the number of workers.
pub fn evaluate(
    configs: &[DesignConfig],
    scenarios: &[Scenario],
    settings: &SimSettings,
) -> Result<Evaluation> {
    if configs.is_empty() {
        return Err(Error::Domain("no designs to evaluate".into()));
    }
    if settings.replicates == 0 {
        return Err(Error::Domain("replicates must be at least 1".into()));
    }
    let bank = DesignBank::new(configs, scenarios, settings)?;
    let k = configs.len();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
        .collect();

    let per_scenario = scenarios
        .par_iter()
        .enumerate()
        .map(|(si, scenario)| {
            let mut tallies = vec![Tally::default(); k];
            let mut same = vec![0u64; pairs.len()];
            for r in 0..settings.replicates {
                let outs = bank.run_replicate(scenario, si, r, settings)?;
                for (t, o) in tallies.iter_mut().zip(&outs) {
                    t.add(o, scenario.mtd);
                }
                for (c, &(a, b)) in same.iter_mut().zip(&pairs) {
                    let identical = outs[a].mtd == outs[b].mtd
                        && outs[a].state.cohort_log == outs[b].state.cohort_log;
                    *c += u64::from(identical);
                }
            }
            Ok((tallies.iter().map(Tally::metrics).collect::<Vec<_>>(), same))
        })
        .collect::<Result<Vec<_>>>()?;

    let designs = (0..k)
        .map(|d| {
            let rows: Vec<Metrics> = per_scenario.iter().map(|(m, _)| m[d]).collect();
            let arrays: Vec<[f64; 6]> = rows.iter().map(|m| m.to_array()).collect();
            let (mean, sd) = mean_sd(&arrays);
            DesignResults {
                config: configs[d].clone(),
                per_scenario: rows,
                mean,
                sd,
            }
        })
        .collect();
    let total = scenarios.len() as u64 * u64::from(settings.replicates);
    let agreement = pairs
        .iter()
        .enumerate()
        .map(|(i, &(first, second))| PairAgreement {
            first,
            second,
            identical: per_scenario.iter().map(|(_, s)| s[i]).sum(),
            total,
        })
        .collect();
    Ok(Evaluation {
        scenarios: scenarios.to_vec(),
        designs,
        agreement,
    })
}
