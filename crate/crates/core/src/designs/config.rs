use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Mtpi,
    Mtpi2,
    Boin,
    Ccd,
    #[serde(rename = "intcrm")]
    IntCrm,
    Crm,
    #[serde(rename = "i3p3")]
    I3p3,
}

impl DesignKind {
    pub const ALL: [DesignKind; 7] = [
        DesignKind::Mtpi,
        DesignKind::Mtpi2,
        DesignKind::Boin,
        DesignKind::Ccd,
        DesignKind::IntCrm,
        DesignKind::Crm,
        DesignKind::I3p3,
    ];

    /// Short machine name, as used in config files.
    pub fn key(self) -> &'static str {
        match self {
            DesignKind::Mtpi => "mtpi",
            DesignKind::Mtpi2 => "mtpi2",
            DesignKind::Boin => "boin",
            DesignKind::Ccd => "ccd",
            DesignKind::IntCrm => "intcrm",
            DesignKind::Crm => "crm",
            DesignKind::I3p3 => "i3p3",
        }
    }

    pub fn is_history_dependent(self) -> bool {
        matches!(self, DesignKind::IntCrm | DesignKind::Crm)
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DesignKind::Mtpi => "mTPI",
            DesignKind::Mtpi2 => "mTPI-2",
            DesignKind::Boin => "BOIN",
            DesignKind::Ccd => "CCD",
            DesignKind::IntCrm => "Int-CRM",
            DesignKind::Crm => "CRM",
            DesignKind::I3p3 => "i3+3",
        })
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '+')
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "mtpi" => DesignKind::Mtpi,
            "mtpi2" | "keyboard" => DesignKind::Mtpi2,
            "boin" => DesignKind::Boin,
            "ccd" => DesignKind::Ccd,
            "intcrm" => DesignKind::IntCrm,
            "crm" => DesignKind::Crm,
            "i3p3" | "i3+3" => DesignKind::I3p3,
            _ => return Err(Error::config("design", format!("unknown design `{s}`"))),
        })
    }
}

/// Design identity and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub design: DesignKind,
    /// Target toxicity probability p_T.
    #[serde(default = "defaults::target")]
    pub target: f64,
    #[serde(default = "defaults::eps")]
    pub eps1: f64,
    #[serde(default = "defaults::eps")]
    pub eps2: f64,
    /// BOIN prior atom below the target; defaults to the atom whose boundary is pT - eps1.
    #[serde(default)]
    pub boin_phi_e: Option<f64>,
    /// BOIN prior atom above the target; defaults to the atom whose boundary is pT + eps2.
    #[serde(default)]
    pub boin_phi_d: Option<f64>,
    /// Explicit CRM skeleton; generated from `delta` and `prior_mtd` when absent.
    #[serde(default)]
    pub skeleton: Option<Vec<f64>>,
    /// 1-based prior MTD used for skeleton generation; defaults to the middle dose.
    #[serde(default)]
    pub prior_mtd: Option<usize>,
    /// Indifference-interval half-width for skeleton generation.
    #[serde(default = "defaults::eps")]
    pub delta: f64,
    /// Variance of the normal prior on the power-model parameter.
    #[serde(default = "defaults::sigma2")]
    pub sigma2: f64,
    /// Posterior probability of excess toxicity that triggers dose exclusion.
    #[serde(default = "defaults::safety_threshold")]
    pub safety_threshold: f64,
}

mod defaults {
    pub fn target() -> f64 {
        0.3
    }
    pub fn eps() -> f64 {
        0.05
    }
    pub fn sigma2() -> f64 {
        1.34
    }
    pub fn safety_threshold() -> f64 {
        0.95
    }
}

impl DesignConfig {
    /// Defaults used throughout: pT = 0.3, eps1 = eps2 = delta = 0.05,
    /// sigma^2 = 1.34, safety threshold 0.95.
    pub fn new(design: DesignKind) -> Self {
        Self {
            design,
            target: defaults::target(),
            eps1: defaults::eps(),
            eps2: defaults::eps(),
            boin_phi_e: None,
            boin_phi_d: None,
            skeleton: None,
            prior_mtd: None,
            delta: defaults::eps(),
            sigma2: defaults::sigma2(),
            safety_threshold: defaults::safety_threshold(),
        }
    }

    pub fn with_target(mut self, target: f64, eps1: f64, eps2: f64) -> Self {
        self.target = target;
        self.eps1 = eps1;
        self.eps2 = eps2;
        self
    }

    pub fn ei_lower(&self) -> f64 {
        self.target - self.eps1
    }

    pub fn ei_upper(&self) -> f64 {
        self.target + self.eps2
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at("design")
    }

    /// Validates, reporting offending fields under `path` (e.g. `design[1]`).
    pub fn validate_at(&self, path: &str) -> Result<()> {
        let field = |name: &str| format!("{path}.{name}");
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::config(field("target"), "must lie in (0, 1)"));
        }
        if !(self.eps1 > 0.0) {
            return Err(Error::config(field("eps1"), "must be positive"));
        }
        if !(self.eps2 > 0.0) {
            return Err(Error::config(field("eps2"), "must be positive"));
        }
        if !(self.ei_lower() > 0.0) {
            return Err(Error::config(
                field("eps1"),
                "target - eps1 must be positive",
            ));
        }
        if !(self.ei_upper() < 1.0) {
            return Err(Error::config(
                field("eps2"),
                "target + eps2 must be below 1",
            ));
        }
        if let Some(phi) = self.boin_phi_e {
            if !(phi > 0.0 && phi < self.target) {
                return Err(Error::config(
                    field("boin_phi_e"),
                    "must lie in (0, target)",
                ));
            }
        }
        if let Some(phi) = self.boin_phi_d {
            if !(phi > self.target && phi < 1.0) {
                return Err(Error::config(
                    field("boin_phi_d"),
                    "must lie in (target, 1)",
                ));
            }
        }
        if let Some(q) = &self.skeleton {
            if q.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
                return Err(Error::config(
                    field("skeleton"),
                    "entries must lie in (0, 1)",
                ));
            }
            if q.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::config(
                    field("skeleton"),
                    "must be strictly increasing",
                ));
            }
        }
        if let Some(nu) = self.prior_mtd {
            if nu == 0 {
                return Err(Error::config(field("prior_mtd"), "dose levels are 1-based"));
            }
        }
        if !(self.delta > 0.0 && self.target - self.delta > 0.0 && self.target + self.delta < 1.0) {
            return Err(Error::config(
                field("delta"),
                "must be positive with target +/- delta inside (0, 1)",
            ));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::config(field("sigma2"), "must be positive"));
        }
        if !(self.safety_threshold > 0.0 && self.safety_threshold < 1.0) {
            return Err(Error::config(
                field("safety_threshold"),
                "must lie in (0, 1)",
            ));
        }
        Ok(())
    }
}
