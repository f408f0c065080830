use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dosefind::designs::DesignConfig;
use dosefind::sim::{MtdRule, MtdSupport};
use dosefind::verify::VerifyConfig;
use serde::Deserialize;

/// Seed used when neither the flag, the environment nor the config sets one.
pub const DEFAULT_SEED: u64 = 20_190_815;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub design: Vec<DesignConfig>,
    #[serde(default)]
    pub trial: TrialSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
    /// Directory of the config file; relative paths inside it resolve here.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialSection {
    pub max_n: u32,
    pub cohort_size: u32,
    /// 1-based.
    pub start_dose: usize,
}

impl Default for TrialSection {
    fn default() -> Self {
        Self {
            max_n: 30,
            cohort_size: 3,
            start_dose: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    /// `random`, `fixed`, or a path to a scenario file.
    pub scenarios: String,
    pub random_count: usize,
    pub dose_counts: Vec<usize>,
    pub support: MtdSupport,
    pub replicates: u32,
    pub seed: Option<u64>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            scenarios: "random".into(),
            random_count: 1000,
            dose_counts: vec![4, 5, 6],
            support: MtdSupport::default(),
            replicates: 1000,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec!["csv".into()],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub max_n: u32,
    pub loss_max_n: u32,
    pub loss_cells: usize,
    pub lambda1_shift: f64,
    pub doses: usize,
    pub histories: usize,
    pub riemann_points: usize,
    pub seed: Option<u64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        let v = VerifyConfig::default();
        Self {
            max_n: v.max_n,
            loss_max_n: v.loss_max_n,
            loss_cells: v.loss_cells,
            lambda1_shift: v.lambda1_shift,
            doses: v.doses,
            histories: v.histories,
            riemann_points: v.riemann_points,
            seed: None,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            design: Vec::new(),
            trial: TrialSection::default(),
            sim: SimSection::default(),
            output: OutputSection::default(),
            verify: VerifySection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut cfg: RunConfig =
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

impl RunConfig {
    /// Checks everything that does not depend on the subcommand.
    pub fn validate(&self) -> Result<()> {
        if self.design.is_empty() {
            bail!("design: at least one [[design]] entry is required");
        }
        for (i, d) in self.design.iter().enumerate() {
            d.validate_at(&format!("design[{i}]"))?;
            if let Some(j) = self.design[..i].iter().position(|e| e.design == d.design) {
                bail!(
                    "design[{i}].design: {} is already configured as design[{j}]",
                    d.design
                );
            }
        }
        let t = &self.trial;
        if t.cohort_size == 0 {
            bail!("trial.cohort_size: must be at least 1");
        }
        if t.max_n < t.cohort_size {
            bail!(
                "trial.max_n: must be at least cohort_size ({})",
                t.cohort_size
            );
        }
        if t.start_dose == 0 {
            bail!("trial.start_dose: doses are numbered from 1");
        }
        for f in &self.output.formats {
            if f != "csv" && f != "txt" {
                bail!("output.formats: unsupported format '{f}' (expected csv or txt)");
            }
        }
        Ok(())
    }

    /// Target and EI shared by every design, which define the scenarios' true MTD.
    pub fn mtd_rule(&self) -> Result<MtdRule> {
        let first = &self.design[0];
        for (i, d) in self.design.iter().enumerate().skip(1) {
            if (d.target, d.eps1, d.eps2) != (first.target, first.eps1, first.eps2) {
                bail!("design[{i}].target: target, eps1 and eps2 must match design[0] in a simulation");
            }
        }
        Ok(MtdRule::new(first.target, first.eps1, first.eps2)?)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
