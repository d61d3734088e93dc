//! From production levels to firm defaults to bank loan losses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Economy;

/// Per-firm change in profit. `None` marks firms without financial statements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitShock {
    pub dp: Vec<Option<f64>>,
}

impl ProfitShock {
    /// Profit change with firms lacking statements counted as zero.
    pub fn value(&self, i: usize) -> f64 {
        self.dp[i].unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefaultFlags {
    pub chi: Vec<bool>,
}

impl DefaultFlags {
    pub fn count(&self) -> usize {
        self.chi.iter().filter(|&&c| c).count()
    }

    pub fn defaulted(&self) -> impl Iterator<Item = usize> + '_ {
        self.chi
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
    }
}

/// Bank losses per channel, as fractions of each bank's Tier 1 equity.
/// Values are unclamped; `total_*` clamp at one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankLossLedger {
    pub di: Vec<f64>,
    pub sc: Vec<f64>,
    pub ib_wo: Vec<f64>,
    pub ib_w: Vec<f64>,
}

impl BankLossLedger {
    pub fn zeros(m: usize) -> Self {
        BankLossLedger {
            di: vec![0.0; m],
            sc: vec![0.0; m],
            ib_wo: vec![0.0; m],
            ib_w: vec![0.0; m],
        }
    }

    pub fn n_banks(&self) -> usize {
        self.di.len()
    }

    /// Initial loss of bank `k` with supply-chain contagion (seed of the
    /// interbank step).
    pub fn initial_w(&self, k: usize) -> f64 {
        self.di[k] + self.sc[k]
    }

    pub fn total_wo(&self, k: usize) -> f64 {
        (self.di[k] + self.ib_wo[k]).min(1.0)
    }

    pub fn total_w(&self, k: usize) -> f64 {
        (self.di[k] + self.sc[k] + self.ib_w[k]).min(1.0)
    }
}

/// Loan exposures grouped by borrowing firm.
#[derive(Debug, Clone)]
pub struct LoanExposures {
    start: Vec<usize>,
    entries: Vec<(usize, f64)>,
    equities: Vec<f64>,
    firm_ids: Vec<String>,
    lgd: f64,
}

impl LoanExposures {
    pub fn new(g: &Economy) -> Self {
        let n = g.n_firms();
        let mut by_firm: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for l in &g.loans.entries {
            by_firm[l.firm].push((l.bank, l.principal));
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut entries = Vec::with_capacity(g.loans.entries.len());
        start.push(0);
        for list in by_firm {
            entries.extend(list);
            start.push(entries.len());
        }
        LoanExposures {
            start,
            entries,
            equities: g.equities(),
            firm_ids: g.firms.iter().map(|f| f.id.clone()).collect(),
            lgd: g.loans.lgd,
        }
    }

    pub fn n_banks(&self) -> usize {
        self.equities.len()
    }

    pub fn lgd(&self) -> f64 {
        self.lgd
    }

    pub fn loans_of(&self, firm: usize) -> &[(usize, f64)] {
        &self.entries[self.start[firm]..self.start[firm + 1]]
    }

    /// Adds `lgd * B[i][k] / e[k]` to `acc[k]` for every loan of firm `i`.
    fn charge(&self, firm: usize, acc: &mut [f64]) {
        for &(bank, principal) in self.loans_of(firm) {
            acc[bank] += self.lgd * principal / self.equities[bank];
        }
    }

    /// Loss fractions per bank caused by the defaults in `chi`.
    pub fn losses(&self, chi: &DefaultFlags) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_banks()];
        for i in chi.defaulted() {
            self.charge(i, &mut acc);
        }
        acc
    }

    /// Direct losses from `chi_wo` and the additional supply-chain losses
    /// from defaults present only in `chi_w`.
    pub fn bank_losses(&self, chi_w: &DefaultFlags, chi_wo: &DefaultFlags) -> Result<BankLossLedger> {
        if chi_w.chi.len() != chi_wo.chi.len() {
            return Err(Error::Contract("default flag vectors differ in length".into()));
        }
        let m = self.n_banks();
        let mut ledger = BankLossLedger::zeros(m);
        for (i, (&w, &wo)) in chi_w.chi.iter().zip(&chi_wo.chi).enumerate() {
            match (wo, w) {
                (true, true) => self.charge(i, &mut ledger.di),
                (false, true) => self.charge(i, &mut ledger.sc),
                (false, false) => {}
                (true, false) => {
                    return Err(Error::Contract(format!(
                        "firm `{}` defaults without supply-chain contagion but not with it",
                        self.firm_ids[i]
                    )))
                }
            }
        }
        Ok(ledger)
    }
}

/// `Δp_i = (1 - h_i) (r_i - c_i)` for firms with statements.
pub fn profit_shock(g: &Economy, h: &[f64]) -> ProfitShock {
    ProfitShock {
        dp: g
            .firms
            .iter()
            .zip(h)
            .map(|(f, &h)| f.financials.map(|fin| (1.0 - h) * fin.profit()))
            .collect(),
    }
}

/// A firm defaults when the profit loss exhausts either its equity or its
/// short-term liquidity; exhausting a buffer exactly counts as default.
pub fn default_flags(g: &Economy, dp: &ProfitShock) -> DefaultFlags {
    DefaultFlags {
        chi: g
            .firms
            .iter()
            .zip(&dp.dp)
            .map(|(f, d)| match (&f.financials, d) {
                (Some(fin), Some(d)) if f.eligible_for_default => {
                    fin.equity - d <= 0.0 || fin.liquidity() - d <= 0.0
                }
                _ => false,
            })
            .collect(),
    }
}

pub fn bank_losses(g: &Economy, chi_w: &DefaultFlags, chi_wo: &DefaultFlags) -> Result<BankLossLedger> {
    LoanExposures::new(g).bank_losses(chi_w, chi_wo)
}
