//! Concrete dose-finding rules.
//!
//! mTPI, mTPI-2, BOIN and CCD are local rules: the decision at the current
//! dose depends only on that dose's tally. Int-CRM and CRM pool all doses
//! through a one-parameter power model and recommend a dose directly. i3+3
//! is a rule-based benchmark that sits outside the Bayes-rule framework.

mod config;
mod crm;
mod interval;

use serde::{Deserialize, Serialize};

pub use config::{DesignConfig, DesignKind};
pub use crm::{
    indifference_skeleton, power_model, solve_theta_intervals, tally_history, theta_boundary, Crm,
    IntCrm, PowerLikelihood, ThetaIntervals, THETA_EXTREME,
};
pub use interval::{
    boin_xi, boin_xi_inverse, mtpi2_partition, upm, Boin, Ccd, I3p3, Mtpi, Mtpi2, BOUNDARY_TOL,
};

use crate::framework::{DoseState, Move};
use crate::{Error, Result};

/// A rule whose decision depends only on the current dose's tally.
pub trait LocalRule {
    fn decide(&self, state: DoseState) -> Result<Move>;
}

/// One DLT outcome in enrollment order; `dose` is 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientOutcome {
    pub dose: usize,
    pub dlt: bool,
}

/// A design prepared for a trial with a fixed number of doses.
#[derive(Debug, Clone)]
pub enum Design {
    Mtpi(Mtpi),
    Mtpi2(Mtpi2),
    Boin(Boin),
    Ccd(Ccd),
    I3p3(I3p3),
    IntCrm(IntCrm),
    Crm(Crm),
}

impl Design {
    /// Validates `cfg` and precomputes everything the rule needs for `doses` levels.
    pub fn build(cfg: &DesignConfig, doses: usize) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.design {
            DesignKind::Mtpi => Design::Mtpi(Mtpi::new(cfg)?),
            DesignKind::Mtpi2 => Design::Mtpi2(Mtpi2::new(cfg)?),
            DesignKind::Boin => Design::Boin(Boin::new(cfg)?),
            DesignKind::Ccd => Design::Ccd(Ccd::new(cfg)?),
            DesignKind::I3p3 => Design::I3p3(I3p3::new(cfg)?),
            DesignKind::IntCrm => Design::IntCrm(IntCrm::new(cfg, doses)?),
            DesignKind::Crm => Design::Crm(Crm::new(cfg, doses)?),
        })
    }

    pub fn kind(&self) -> DesignKind {
        match self {
            Design::Mtpi(_) => DesignKind::Mtpi,
            Design::Mtpi2(_) => DesignKind::Mtpi2,
            Design::Boin(_) => DesignKind::Boin,
            Design::Ccd(_) => DesignKind::Ccd,
            Design::I3p3(_) => DesignKind::I3p3,
            Design::IntCrm(_) => DesignKind::IntCrm,
            Design::Crm(_) => DesignKind::Crm,
        }
    }

    pub fn local_rule(&self) -> Option<&dyn LocalRule> {
        match self {
            Design::Mtpi(d) => Some(d),
            Design::Mtpi2(d) => Some(d),
            Design::Boin(d) => Some(d),
            Design::Ccd(d) => Some(d),
            Design::I3p3(d) => Some(d),
            Design::IntCrm(_) | Design::Crm(_) => None,
        }
    }

    /// Up-and-down decision from the current dose's tally (local rules only).
    pub fn decide_local(&self, state: DoseState) -> Result<Move> {
        self.local_rule()
            .ok_or_else(|| Error::HistoryDependent(self.kind().to_string()))?
            .decide(state)
    }

    /// Recommended dose (0-based) from all tallies (model-based designs only).
    pub fn recommend(&self, tallies: &[DoseState]) -> Result<usize> {
        match self {
            Design::IntCrm(d) => d.recommend(tallies),
            Design::Crm(d) => d.recommend(tallies),
            _ => Err(Error::Domain(format!(
                "{} is a local rule and does not recommend a dose",
                self.kind()
            ))),
        }
    }
}

pub fn mtpi_decide(cfg: &DesignConfig, state: DoseState) -> Result<Move> {
    Mtpi::new(cfg)?.decide(state)
}

pub fn mtpi2_decide(cfg: &DesignConfig, state: DoseState) -> Result<Move> {
    Mtpi2::new(cfg)?.decide(state)
}

pub fn boin_decide(cfg: &DesignConfig, state: DoseState) -> Result<Move> {
    Boin::new(cfg)?.decide(state)
}

pub fn ccd_decide(cfg: &DesignConfig, state: DoseState) -> Result<Move> {
    Ccd::new(cfg)?.decide(state)
}

pub fn i3p3_decide(cfg: &DesignConfig, state: DoseState) -> Result<Move> {
    I3p3::new(cfg)?.decide(state)
}

/// Int-CRM recommendation (0-based dose) for a patient history over `doses` levels.
pub fn intcrm_decide(
    cfg: &DesignConfig,
    doses: usize,
    history: &[PatientOutcome],
) -> Result<usize> {
    IntCrm::new(cfg, doses)?.recommend(&tally_history(history, doses)?)
}

/// CRM recommendation (0-based dose) for a patient history over `doses` levels.
pub fn crm_decide(cfg: &DesignConfig, doses: usize, history: &[PatientOutcome]) -> Result<usize> {
    Crm::new(cfg, doses)?.recommend(&tally_history(history, doses)?)
}
