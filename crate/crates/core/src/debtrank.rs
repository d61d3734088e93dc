//! Linearized DebtRank over the interbank layer.
//!
//! A bank that loses a fraction `x` of its equity devalues its interbank
//! liabilities by the same fraction, so each creditor `k` of debtor `l`
//! loses `Λ[l][k] · x` with `Λ[l][k] = L[l][k] / e[k]`. Each round a bank
//! passes on only the growth of its clamped loss `min(L, 1)` since the
//! previous round: losses are never counted twice, and a bank that has
//! already lost all of its equity stops transmitting. Summed over rounds the
//! increments telescope, which is how the loop computes them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Economy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebtRankConfig {
    /// Stop once the equity-weighted loss increase of a round is at most this.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Rounds to run before the stopping rule is consulted.
    pub min_rounds: usize,
    pub record_trace: bool,
}

impl Default for DebtRankConfig {
    fn default() -> Self {
        DebtRankConfig {
            epsilon: 0.01,
            max_iter: 1000,
            min_rounds: 0,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContagionResult {
    pub initial: Vec<f64>,
    /// Unclamped final losses.
    pub final_loss: Vec<f64>,
    /// Interbank part of the final losses.
    pub ib: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Losses after each round, starting with the seed.
    pub trace: Option<Vec<Vec<f64>>>,
}

impl ContagionResult {
    /// Interbank contribution `L(T) - L(t1)`.
    pub fn ib_marginal(&self) -> Vec<f64> {
        self.ib.clone()
    }

    pub fn clamped(&self) -> Vec<f64> {
        self.final_loss.iter().map(|v| v.min(1.0)).collect()
    }
}

/// Interbank leverage matrix in compressed form, derived from the current
/// bank equities.
#[derive(Debug, Clone)]
pub struct InterbankLeverage {
    // Creditors of debtor l with their leverage entries.
    start: Vec<usize>,
    creditors: Vec<(usize, f64)>,
    equities: Vec<f64>,
    total_equity: f64,
}

impl InterbankLeverage {
    pub fn new(g: &Economy) -> Self {
        let equities = g.equities();
        let m = equities.len();
        let mut by_debtor: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (borrower, lender, lambda) in g.interbank.leverage(&equities) {
            if lambda > 0.0 {
                by_debtor[borrower].push((lender, lambda));
            }
        }
        let mut start = Vec::with_capacity(m + 1);
        let mut creditors = Vec::new();
        start.push(0);
        for mut list in by_debtor {
            list.sort_by_key(|&(k, _)| k);
            creditors.extend(list);
            start.push(creditors.len());
        }
        let total_equity = equities.iter().sum();
        InterbankLeverage {
            start,
            creditors,
            equities,
            total_equity,
        }
    }

    pub fn n_banks(&self) -> usize {
        self.equities.len()
    }

    pub fn equities(&self) -> &[f64] {
        &self.equities
    }

    pub fn creditors_of(&self, debtor: usize) -> &[(usize, f64)] {
        &self.creditors[self.start[debtor]..self.start[debtor + 1]]
    }

    /// Equity-weighted share of system equity lost, with per-bank losses
    /// clamped at one.
    pub fn system_loss(&self, losses: &[f64]) -> f64 {
        losses
            .iter()
            .zip(&self.equities)
            .map(|(l, e)| e * l.min(1.0))
            .sum::<f64>()
            / self.total_equity
    }

    pub fn run(&self, seed: &[f64], cfg: &DebtRankConfig) -> Result<ContagionResult> {
        let m = self.n_banks();
        if seed.len() != m {
            return Err(Error::InvalidParameter(format!(
                "seed has {} entries, system has {m} banks",
                seed.len()
            )));
        }
        if let Some(k) = seed.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "seed loss of bank #{k} must be finite and non-negative"
            )));
        }
        if !(cfg.epsilon >= 0.0) || cfg.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "debtrank needs epsilon >= 0 and max_iter >= 1".into(),
            ));
        }

        // L(t) = s + sum_d lambda[d][k] * min(L_d(t - 1), 1): the telescoped
        // form of passing on loss increments. Keeping the interbank part as
        // its own sum makes it monotone in the seed under rounding too.
        let mut loss = seed.to_vec();
        let mut ib = vec![0.0; m];
        let mut next_ib = vec![0.0; m];
        let mut trace = cfg.record_trace.then(|| vec![loss.clone()]);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < cfg.max_iter {
            iterations += 1;
            next_ib.iter_mut().for_each(|v| *v = 0.0);
            for debtor in 0..m {
                let clamped = loss[debtor].min(1.0);
                if clamped <= 0.0 {
                    continue;
                }
                for &(creditor, lambda) in self.creditors_of(debtor) {
                    next_ib[creditor] += lambda * clamped;
                }
            }
            let mut change = 0.0;
            for k in 0..m {
                let next = seed[k] + next_ib[k];
                change += self.equities[k] * (next - loss[k]);
                loss[k] = next;
            }
            change /= self.total_equity;
            std::mem::swap(&mut ib, &mut next_ib);
            if let Some(t) = trace.as_mut() {
                t.push(loss.clone());
            }
            if change <= cfg.epsilon && iterations >= cfg.min_rounds {
                converged = true;
                break;
            }
        }
        Ok(ContagionResult {
            initial: seed.to_vec(),
            final_loss: loss,
            ib,
            iterations,
            converged,
            trace,
        })
    }

    /// Runs the regimes without and with supply-chain contagion from their
    /// own initial losses. The second run lasts at least as many rounds as
    /// the first.
    pub fn run_pair(
        &self,
        seed_wo: &[f64],
        seed_w: &[f64],
        cfg: &DebtRankConfig,
    ) -> Result<(ContagionResult, ContagionResult)> {
        let wo = self.run(seed_wo, cfg)?;
        let cfg_w = DebtRankConfig {
            min_rounds: cfg.min_rounds.max(wo.iterations),
            ..*cfg
        };
        let w = self.run(seed_w, &cfg_w)?;
        Ok((wo, w))
    }

    /// System-wide impact of the complete failure of each bank in turn.
    pub fn profile(&self, cfg: &DebtRankConfig) -> Result<Vec<BankImpact>> {
        let m = self.n_banks();
        (0..m)
            .map(|k| {
                let mut seed = vec![0.0; m];
                seed[k] = 1.0;
                let res = self.run(&seed, cfg)?;
                let total = self.system_loss(&res.final_loss);
                Ok(BankImpact {
                    bank: k,
                    total,
                    contagion_only: total - self.equities[k] / self.total_equity,
                    converged: res.converged,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankImpact {
    pub bank: usize,
    /// Share of system equity lost, own equity included.
    pub total: f64,
    /// Share lost by other banks only.
    pub contagion_only: f64,
    pub converged: bool,
}

pub fn debtrank(g: &Economy, seed: &[f64], cfg: &DebtRankConfig) -> Result<ContagionResult> {
    InterbankLeverage::new(g).run(seed, cfg)
}

pub fn debtrank_profile(g: &Economy, cfg: &DebtRankConfig) -> Result<Vec<BankImpact>> {
    InterbankLeverage::new(g).profile(cfg)
}

/// Long-format trace rows `(iteration, bank index, loss)`.
pub fn trace_rows(result: &ContagionResult) -> Vec<(usize, usize, f64)> {
    let Some(trace) = &result.trace else {
        return Vec::new();
    };
    trace
        .iter()
        .enumerate()
        .flat_map(|(t, l)| l.iter().enumerate().map(move |(k, v)| (t + 1, k, *v)))
        .collect()
}
