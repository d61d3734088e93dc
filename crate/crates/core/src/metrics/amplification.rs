//! How much supply-chain contagion amplifies interbank losses.

use serde::{Deserialize, Serialize};

use crate::credit::BankLossLedger;
use crate::error::{Error, Result};
use crate::metrics::stats::{box_stats, ccdf, ols_fit, quantile_sorted, BoxStats, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplificationRecord {
    pub bank: usize,
    pub scenario: usize,
    pub ib_wo: f64,
    pub ib_w: f64,
    /// `ib_w / ib_wo`; `None` for banks without interbank losses.
    pub ratio: Option<f64>,
}

pub fn amplification_records(ledgers: &[&BankLossLedger]) -> Vec<AmplificationRecord> {
    ledgers
        .iter()
        .enumerate()
        .flat_map(|(s, l)| {
            (0..l.n_banks()).map(move |k| AmplificationRecord {
                bank: k,
                scenario: s,
                ib_wo: l.ib_wo[k],
                ib_w: l.ib_w[k],
                ratio: (l.ib_wo[k] > 0.0).then(|| l.ib_w[k] / l.ib_wo[k]),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpread {
    pub scenario: usize,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationStats {
    /// Box statistics per bank; `None` when the bank never had a defined ratio.
    pub per_bank: Vec<(usize, Option<BoxStats>)>,
    pub per_scenario: Vec<ScenarioSpread>,
    pub pooled_ccdf: Vec<(f64, f64)>,
    pub defined: usize,
    pub undefined: usize,
}

impl AmplificationStats {
    /// Fraction of pooled ratios strictly above `x`.
    pub fn share_above(&self, x: f64) -> f64 {
        self.pooled_ccdf
            .iter()
            .find(|&&(v, _)| v > x)
            .map_or(0.0, |&(_, p)| p)
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

/// Box plots per bank, median and IQR per scenario and the pooled survival
/// function of all defined ratios. Fails when no ratio is defined.
pub fn ib_amplification(records: &[AmplificationRecord]) -> Result<AmplificationStats> {
    let defined: Vec<&AmplificationRecord> = records.iter().filter(|r| r.ratio.is_some()).collect();
    if defined.is_empty() {
        return Err(Error::Degenerate(
            "no bank has interbank losses without supply-chain contagion; amplification undefined".into(),
        ));
    }
    let banks = records.iter().map(|r| r.bank + 1).max().unwrap_or(0);
    let scenarios = records.iter().map(|r| r.scenario + 1).max().unwrap_or(0);
    let mut by_bank = vec![Vec::new(); banks];
    let mut by_scenario = vec![Vec::new(); scenarios];
    for r in &defined {
        let v = r.ratio.unwrap();
        by_bank[r.bank].push(v);
        by_scenario[r.scenario].push(v);
    }
    let per_bank = by_bank
        .iter()
        .enumerate()
        .map(|(k, v)| Ok((k, if v.is_empty() { None } else { Some(box_stats(v)?) })))
        .collect::<Result<Vec<_>>>()?;
    let per_scenario = by_scenario
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(s, v)| {
            let v = sorted(v);
            ScenarioSpread {
                scenario: s,
                n: v.len(),
                median: quantile_sorted(&v, 0.5),
                q1: quantile_sorted(&v, 0.25),
                q3: quantile_sorted(&v, 0.75),
            }
        })
        .collect();
    let pooled: Vec<f64> = defined.iter().map(|r| r.ratio.unwrap()).collect();
    Ok(AmplificationStats {
        per_bank,
        per_scenario,
        pooled_ccdf: ccdf(&pooled)?,
        defined: defined.len(),
        undefined: records.len() - defined.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationFits {
    /// `ib_w` on `ib_wo` over every (bank, scenario) pair.
    pub pooled: Option<FitResult>,
    /// Log-log fit over pairs with both losses positive.
    pub pooled_log: Option<FitResult>,
    pub per_bank: Vec<(usize, FitResult)>,
}

/// Pooled and per-bank regressions of `ib_w` on `ib_wo`. Banks outside the
/// interbank network (`connected[k] == false`) are skipped, as are fits
/// whose data are degenerate.
pub fn amplification_fits(records: &[AmplificationRecord], connected: &[bool]) -> AmplificationFits {
    let fit = |rs: &[&AmplificationRecord], log_log: bool| {
        let (x, y): (Vec<f64>, Vec<f64>) = rs.iter().map(|r| (r.ib_wo, r.ib_w)).unzip();
        match ols_fit(&x, &y, log_log) {
            Ok(f) => Some(f),
            Err(e) => {
                log::debug!("regression skipped: {e}");
                None
            }
        }
    };
    let all: Vec<&AmplificationRecord> = records.iter().filter(|r| connected[r.bank]).collect();
    let positive: Vec<&AmplificationRecord> = all
        .iter()
        .copied()
        .filter(|r| r.ib_wo > 0.0 && r.ib_w > 0.0)
        .collect();
    let per_bank = (0..connected.len())
        .filter(|&k| connected[k])
        .filter_map(|k| {
            let rs: Vec<&AmplificationRecord> = all.iter().copied().filter(|r| r.bank == k).collect();
            fit(&rs, false).map(|f| (k, f))
        })
        .collect();
    AmplificationFits {
        pooled: fit(&all, false),
        pooled_log: fit(&positive, true),
        per_bank,
    }
}
