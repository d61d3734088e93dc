//! The three-step stress test: supply-chain propagation, firm defaults and
//! loan losses, interbank contagion. Both regimes (with and without
//! supply-chain contagion) run from the same shock.

use serde::{Deserialize, Serialize};

use crate::credit::{default_flags, profit_shock, BankLossLedger, DefaultFlags, LoanExposures, ProfitShock};
use crate::debtrank::{DebtRankConfig, InterbankLeverage};
use crate::error::{Error, Result};
use crate::model::{validate_economy, Economy};
use crate::propagation::{ProductionNetwork, ProductionProfile, PropagationConfig, ShockVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regimes {
    /// With supply-chain contagion only.
    W,
    /// Without supply-chain contagion only.
    Wo,
    #[default]
    Both,
}

impl Regimes {
    pub fn with_contagion(self) -> bool {
        matches!(self, Regimes::W | Regimes::Both)
    }

    pub fn without_contagion(self) -> bool {
        matches!(self, Regimes::Wo | Regimes::Both)
    }
}

impl std::str::FromStr for Regimes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w" => Ok(Regimes::W),
            "wo" => Ok(Regimes::Wo),
            "both" => Ok(Regimes::Both),
            other => Err(Error::InvalidParameter(format!(
                "regime must be w, wo or both, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub propagation: PropagationConfig,
    pub debtrank: DebtRankConfig,
    pub regimes: Regimes,
    /// Keep per-firm default flags and profit shocks in the outcome.
    pub keep_defaults: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultRecord {
    pub chi_wo: DefaultFlags,
    pub chi_w: DefaultFlags,
    pub dp_w: ProfitShock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub ledger: BankLossLedger,
    pub propagation_iterations: usize,
    pub propagation_converged: bool,
    pub debtrank_converged_wo: bool,
    pub debtrank_converged_w: bool,
    pub defaults: Option<DefaultRecord>,
    pub profile: Option<ProductionProfile>,
}

impl ScenarioOutcome {
    pub fn converged(&self) -> bool {
        self.propagation_converged && self.debtrank_converged_wo && self.debtrank_converged_w
    }
}

/// A validated economy with every derived structure the pipeline needs.
/// Immutable and shareable across scenario workers.
#[derive(Debug, Clone)]
pub struct Engine {
    economy: Economy,
    production: ProductionNetwork,
    exposures: LoanExposures,
    leverage: InterbankLeverage,
}

impl Engine {
    pub fn new(economy: Economy) -> Result<Self> {
        let report = validate_economy(&economy);
        if !report.is_empty() {
            return Err(Error::Invalid(report));
        }
        Ok(Engine {
            production: ProductionNetwork::new(&economy),
            exposures: LoanExposures::new(&economy),
            leverage: InterbankLeverage::new(&economy),
            economy,
        })
    }

    pub fn economy(&self) -> &Economy {
        &self.economy
    }

    pub fn production(&self) -> &ProductionNetwork {
        &self.production
    }

    pub fn exposures(&self) -> &LoanExposures {
        &self.exposures
    }

    pub fn leverage(&self) -> &InterbankLeverage {
        &self.leverage
    }

    pub fn n_firms(&self) -> usize {
        self.economy.n_firms()
    }

    pub fn n_banks(&self) -> usize {
        self.economy.n_banks()
    }

    /// Bank equity shares `e_k / Σ e`.
    pub fn equity_weights(&self) -> Vec<f64> {
        let total: f64 = self.leverage.equities().iter().sum();
        self.leverage.equities().iter().map(|e| e / total).collect()
    }

    pub fn propagate(&self, psi: &ShockVector, cfg: &PropagationConfig) -> Result<ProductionProfile> {
        self.production.propagate(psi, cfg)
    }

    fn defaults_for(&self, h: &[f64]) -> (ProfitShock, DefaultFlags) {
        let dp = profit_shock(&self.economy, h);
        let chi = default_flags(&self.economy, &dp);
        (dp, chi)
    }

    /// Runs one shock through both regimes.
    ///
    /// The with-contagion interbank run is held to at least as many rounds as
    /// the without-contagion run, so that its interbank losses are never cut
    /// off earlier than the smaller shock's.
    pub fn run_scenario(&self, psi: &ShockVector, cfg: &PipelineConfig) -> Result<ScenarioOutcome> {
        let (_, chi_wo) = self.defaults_for(psi.as_slice());

        let (profile, dp_w, chi_w) = if cfg.regimes.with_contagion() {
            let profile = self.production.propagate(psi, &cfg.propagation)?;
            let (dp, chi) = self.defaults_for(&profile.h);
            (Some(profile), dp, chi)
        } else {
            let (dp, chi) = self.defaults_for(psi.as_slice());
            (None, dp, chi)
        };

        let mut ledger = self
            .exposures
            .bank_losses(&chi_w, &chi_wo)?;

        let mut rounds_wo = 0;
        let mut converged_wo = true;
        if cfg.regimes.without_contagion() {
            let res = self.leverage.run(&ledger.di, &cfg.debtrank)?;
            rounds_wo = res.iterations;
            converged_wo = res.converged;
            ledger.ib_wo = res.ib_marginal();
        }

        let mut converged_w = true;
        if cfg.regimes.with_contagion() {
            let seed: Vec<f64> = (0..ledger.n_banks()).map(|k| ledger.initial_w(k)).collect();
            let dr = DebtRankConfig {
                min_rounds: cfg.debtrank.min_rounds.max(rounds_wo),
                ..cfg.debtrank
            };
            let res = self.leverage.run(&seed, &dr)?;
            converged_w = res.converged;
            ledger.ib_w = res.ib_marginal();
        }

        let (iterations, converged) = profile
            .as_ref()
            .map(|p| (p.iterations, p.converged))
            .unwrap_or((0, true));

        Ok(ScenarioOutcome {
            ledger,
            propagation_iterations: iterations,
            propagation_converged: converged,
            debtrank_converged_wo: converged_wo,
            debtrank_converged_w: converged_w,
            defaults: cfg.keep_defaults.then(|| DefaultRecord {
                chi_wo,
                chi_w,
                dp_w,
            }),
            profile: profile.filter(|p| p.trajectory.is_some()),
        })
    }
}
