//! Financial systemic risk of individual firms.

use serde::{Deserialize, Serialize};

use crate::credit::{default_flags, profit_shock};
use crate::error::Result;
use crate::exec::Runner;
use crate::metrics::stats::ccdf;
use crate::pipeline::{Engine, PipelineConfig};
use crate::propagation::single_firm_shock;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmRiskRecord {
    pub firm: String,
    pub fsri: f64,
    pub fsri_plus: f64,
    /// `fsri_plus / fsri`; `None` when `fsri` is zero.
    pub amplification: Option<f64>,
    pub converged: bool,
}

fn equity_weighted(weights: &[f64], losses: &[f64]) -> f64 {
    weights.iter().zip(losses).map(|(w, l)| w * l.min(1.0)).sum()
}

/// FSRI and FSRI+ of firm `i` from one supply-chain run: the firm is
/// removed, the shortage propagates, and the resulting defaults are charged
/// to the banks. FSRI+ additionally runs the interbank step on those losses.
pub fn firm_risk(engine: &Engine, i: usize, cfg: &PipelineConfig) -> Result<FirmRiskRecord> {
    let g = engine.economy();
    let psi = single_firm_shock(engine.n_firms(), i)?;
    let profile = engine.propagate(&psi, &cfg.propagation)?;
    let chi = default_flags(g, &profit_shock(g, &profile.h));
    let seed = engine.exposures().losses(&chi);
    let weights = engine.equity_weights();
    let fsri = equity_weighted(&weights, &seed);
    let contagion = engine.leverage().run(&seed, &cfg.debtrank)?;
    let fsri_plus = equity_weighted(&weights, &contagion.final_loss);
    Ok(FirmRiskRecord {
        firm: g.firms[i].id.clone(),
        fsri,
        fsri_plus,
        amplification: (fsri > 0.0).then(|| fsri_plus / fsri),
        converged: profile.converged && contagion.converged,
    })
}

pub fn fsri(engine: &Engine, i: usize, cfg: &PipelineConfig) -> Result<f64> {
    firm_risk(engine, i, cfg).map(|r| r.fsri)
}

pub fn fsri_plus(engine: &Engine, i: usize, cfg: &PipelineConfig) -> Result<f64> {
    firm_risk(engine, i, cfg).map(|r| r.fsri_plus)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsriProfile {
    /// Sorted by decreasing FSRI; ties keep input order.
    pub records: Vec<FirmRiskRecord>,
    pub ccdf_fsri: Vec<(f64, f64)>,
    pub ccdf_fsri_plus: Vec<(f64, f64)>,
}

impl FsriProfile {
    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }
}

pub fn fsri_profile(engine: &Engine, cfg: &PipelineConfig, runner: &Runner) -> Result<FsriProfile> {
    let mut records = runner
        .map(engine.n_firms(), |i| firm_risk(engine, i, cfg))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let fsri: Vec<f64> = records.iter().map(|r| r.fsri).collect();
    let plus: Vec<f64> = records.iter().map(|r| r.fsri_plus).collect();
    records.sort_by(|a, b| b.fsri.total_cmp(&a.fsri));
    Ok(FsriProfile {
        records,
        ccdf_fsri: ccdf(&fsri)?,
        ccdf_fsri_plus: ccdf(&plus)?,
    })
}
