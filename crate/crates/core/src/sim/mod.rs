//! Scenario generation and Monte Carlo operating characteristics.

mod evaluate;
mod scenario;

pub use evaluate::{
    evaluate, generate_scenarios, scenario_rng, trial_rng, DesignBank, DesignResults, Evaluation,
    Metrics, PairAgreement, SimSettings, METRIC_NAMES,
};
pub use scenario::{
    fixed_scenarios, format_scenarios, parse_scenarios, random_scenario,
    random_scenario_with_position, MtdPosition, MtdRule, MtdSupport, Scenario,
};
