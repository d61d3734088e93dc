//! Per-bank and system loss distributions split by channel and regime.

use serde::{Deserialize, Serialize};

use crate::credit::BankLossLedger;
use crate::error::Result;
use crate::exec::Runner;
use crate::metrics::stats::{risk_measures, RiskSummary};
use crate::pipeline::{Engine, PipelineConfig, Regimes, ScenarioOutcome};
use crate::scenario::ShockBatch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    W,
    Wo,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::W => "w",
            Regime::Wo => "wo",
        }
    }

    pub fn selected(regimes: Regimes) -> Vec<Regime> {
        let mut out = Vec::new();
        if regimes.with_contagion() {
            out.push(Regime::W);
        }
        if regimes.without_contagion() {
            out.push(Regime::Wo);
        }
        out
    }
}

/// Cumulative loss channels. Without supply-chain contagion the SC term is
/// zero, so `DiSc` coincides with `Di` and `DiScIb` with `DiIb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Di,
    DiSc,
    DiIb,
    DiScIb,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Di, Channel::DiSc, Channel::DiIb, Channel::DiScIb];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Di => "di",
            Channel::DiSc => "di_sc",
            Channel::DiIb => "di_ib",
            Channel::DiScIb => "di_sc_ib",
        }
    }

    /// Loss of bank `k` as a fraction of its equity, clamped at one.
    pub fn loss(self, ledger: &BankLossLedger, k: usize, regime: Regime) -> f64 {
        let (sc, ib) = match regime {
            Regime::W => (ledger.sc[k], ledger.ib_w[k]),
            Regime::Wo => (0.0, ledger.ib_wo[k]),
        };
        let v = match self {
            Channel::Di => ledger.di[k],
            Channel::DiSc => ledger.di[k] + sc,
            Channel::DiIb => ledger.di[k] + ib,
            Channel::DiScIb => ledger.di[k] + sc + ib,
        };
        v.min(1.0)
    }

    /// Equity-weighted system loss.
    pub fn system_loss(self, ledger: &BankLossLedger, weights: &[f64], regime: Regime) -> f64 {
        weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * self.loss(ledger, k, regime))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    /// `None` is the equity-weighted system.
    pub bank: Option<usize>,
    pub regime: Regime,
    pub channel: Channel,
    pub summary: RiskSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDecomposition {
    pub regimes: Regimes,
    /// One per scenario, in batch order.
    pub outcomes: Vec<ScenarioOutcome>,
    pub summaries: Vec<ChannelSummary>,
}

impl ChannelDecomposition {
    pub fn all_converged(&self) -> bool {
        self.outcomes.iter().all(ScenarioOutcome::converged)
    }

    pub fn ledgers(&self) -> Vec<&BankLossLedger> {
        self.outcomes.iter().map(|o| &o.ledger).collect()
    }

    pub fn system(&self, regime: Regime, channel: Channel) -> Option<&RiskSummary> {
        self.summaries
            .iter()
            .find(|s| s.bank.is_none() && s.regime == regime && s.channel == channel)
            .map(|s| &s.summary)
    }
}

/// Runs every scenario of the batch through the pipeline.
pub fn run_batch(
    engine: &Engine,
    batch: &ShockBatch,
    cfg: &PipelineConfig,
    runner: &Runner,
) -> Result<Vec<ScenarioOutcome>> {
    runner
        .map(batch.len(), |s| engine.run_scenario(&batch.scenarios[s], cfg))
        .into_iter()
        .collect()
}

/// Risk measures per bank, regime and channel, plus system rows, from a set
/// of ledgers. `weights` are bank equity shares.
pub fn summarize(ledgers: &[&BankLossLedger], weights: &[f64], regimes: Regimes) -> Result<Vec<ChannelSummary>> {
    let mut out = Vec::new();
    if ledgers.is_empty() {
        return Ok(out);
    }
    let m = weights.len();
    for regime in Regime::selected(regimes) {
        for channel in Channel::ALL {
            for k in 0..m {
                let samples: Vec<f64> = ledgers.iter().map(|l| channel.loss(l, k, regime)).collect();
                out.push(ChannelSummary {
                    bank: Some(k),
                    regime,
                    channel,
                    summary: risk_measures(&samples)?,
                });
            }
            let samples: Vec<f64> = ledgers
                .iter()
                .map(|l| channel.system_loss(l, weights, regime))
                .collect();
            out.push(ChannelSummary {
                bank: None,
                regime,
                channel,
                summary: risk_measures(&samples)?,
            });
        }
    }
    Ok(out)
}

pub fn channel_decomposition(
    engine: &Engine,
    batch: &ShockBatch,
    cfg: &PipelineConfig,
    runner: &Runner,
) -> Result<ChannelDecomposition> {
    let outcomes = run_batch(engine, batch, cfg, runner)?;
    let ledgers: Vec<&BankLossLedger> = outcomes.iter().map(|o| &o.ledger).collect();
    let summaries = summarize(&ledgers, &engine.equity_weights(), cfg.regimes)?;
    Ok(ChannelDecomposition {
        regimes: cfg.regimes,
        outcomes,
        summaries,
    })
}
