use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Income-statement and balance-sheet items of a firm, in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Financials {
    pub revenue: f64,
    pub op_cost: f64,
    pub equity: f64,
    pub short_assets: f64,
    pub short_liabs: f64,
}

impl Financials {
    pub fn profit(&self) -> f64 {
        self.revenue - self.op_cost
    }

    pub fn liquidity(&self) -> f64 {
        self.short_assets - self.short_liabs
    }

    /// Firms with non-positive equity, liquidity or net income cannot be
    /// pushed into default by a production shock and are excluded from it.
    pub fn is_default_eligible(&self) -> bool {
        self.equity > 0.0 && self.liquidity() > 0.0 && self.profit() > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Firm {
    pub id: String,
    /// NACE code, typically 4 digits; the first two digits name the
    /// aggregate sector.
    pub sector: String,
    pub financials: Option<Financials>,
    pub eligible_for_default: bool,
}

impl Firm {
    /// Firm with financial statements; default eligibility is derived.
    pub fn with_financials(id: impl Into<String>, sector: impl Into<String>, fin: Financials) -> Self {
        Firm {
            id: id.into(),
            sector: sector.into(),
            eligible_for_default: fin.is_default_eligible(),
            financials: Some(fin),
        }
    }

    /// Firm known only from the supply network.
    pub fn without_financials(id: impl Into<String>, sector: impl Into<String>) -> Self {
        Firm {
            id: id.into(),
            sector: sector.into(),
            financials: None,
            eligible_for_default: false,
        }
    }

    pub fn financials_present(&self) -> bool {
        self.financials.is_some()
    }

    /// Two-digit NACE prefix.
    pub fn sector2(&self) -> &str {
        sector_prefix(&self.sector)
    }
}

pub(crate) fn sector_prefix(code: &str) -> &str {
    match code.char_indices().nth(2) {
        Some((idx, _)) => &code[..idx],
        None => code,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplyEdge {
    pub supplier: usize,
    pub buyer: usize,
    /// Yearly value of goods delivered from supplier to buyer.
    pub weight: f64,
}

/// Which supplier-sector inputs a buyer sector cannot produce without.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Essentiality {
    pub default_essential: bool,
    pairs: HashMap<(String, String), bool>,
}

impl Default for Essentiality {
    fn default() -> Self {
        Essentiality {
            default_essential: true,
            pairs: HashMap::new(),
        }
    }
}

impl Essentiality {
    pub fn all_essential() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, supplier_sector: impl Into<String>, buyer_sector: impl Into<String>, essential: bool) {
        self.pairs
            .insert((supplier_sector.into(), buyer_sector.into()), essential);
    }

    /// Exact code pair first, then the two-digit prefixes, then the default.
    pub fn is_essential(&self, supplier_sector: &str, buyer_sector: &str) -> bool {
        let exact = (supplier_sector.to_string(), buyer_sector.to_string());
        if let Some(&flag) = self.pairs.get(&exact) {
            return flag;
        }
        let coarse = (
            sector_prefix(supplier_sector).to_string(),
            sector_prefix(buyer_sector).to_string(),
        );
        self.pairs.get(&coarse).copied().unwrap_or(self.default_essential)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Entries sorted by key, for deterministic output.
    pub fn entries(&self) -> Vec<(&str, &str, bool)> {
        let mut out: Vec<_> = self
            .pairs
            .iter()
            .map(|((s, b), &e)| (s.as_str(), b.as_str(), e))
            .collect();
        out.sort();
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SupplyNetwork {
    pub edges: Vec<SupplyEdge>,
    pub essentiality: Essentiality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bank {
    pub id: String,
    pub tier1_equity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterbankEdge {
    pub borrower: usize,
    pub lender: usize,
    pub amount: f64,
}

/// `L[borrower][lender]`: what the borrower owes the lender.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterbankNetwork {
    pub edges: Vec<InterbankEdge>,
}

impl InterbankNetwork {
    pub fn total(&self) -> f64 {
        self.edges.iter().map(|e| e.amount).sum()
    }

    /// Interbank liabilities per bank (row sums of L).
    pub fn liabilities(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for e in &self.edges {
            out[e.borrower] += e.amount;
        }
        out
    }

    /// Interbank assets per bank (column sums of L).
    pub fn assets(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for e in &self.edges {
            out[e.lender] += e.amount;
        }
        out
    }

    /// Leverage entries `Λ[borrower][lender] = L[borrower][lender] / e[lender]`,
    /// always derived from the current equities.
    pub fn leverage(&self, equities: &[f64]) -> Vec<(usize, usize, f64)> {
        self.edges
            .iter()
            .map(|e| (e.borrower, e.lender, e.amount / equities[e.lender]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Loan {
    pub firm: usize,
    pub bank: usize,
    pub principal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoanBook {
    pub entries: Vec<Loan>,
    /// Loss given default, a fraction in (0, 1].
    pub lgd: f64,
}

impl Default for LoanBook {
    fn default() -> Self {
        LoanBook {
            entries: Vec::new(),
            lgd: 1.0,
        }
    }
}

impl LoanBook {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|l| l.principal).sum()
    }

    /// Firm-loan assets per bank.
    pub fn per_bank(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for l in &self.entries {
            out[l.bank] += l.principal;
        }
        out
    }
}

/// The coupled firm, loan and interbank layers. Entity references in the
/// edge lists are dense indices into `firms` and `banks`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Economy {
    pub firms: Vec<Firm>,
    pub supply: SupplyNetwork,
    pub banks: Vec<Bank>,
    pub interbank: InterbankNetwork,
    pub loans: LoanBook,
    /// Per-firm final demand. When absent, revenue minus intermediate
    /// sales (floored at zero) is used.
    pub final_demand: Option<Vec<f64>>,
}

impl Economy {
    pub fn n_firms(&self) -> usize {
        self.firms.len()
    }

    pub fn n_banks(&self) -> usize {
        self.banks.len()
    }

    pub fn equities(&self) -> Vec<f64> {
        self.banks.iter().map(|b| b.tier1_equity).collect()
    }

    pub fn firm_index(&self, id: &str) -> Option<usize> {
        self.firms.iter().position(|f| f.id == id)
    }

    pub fn bank_index(&self, id: &str) -> Option<usize> {
        self.banks.iter().position(|b| b.id == id)
    }

    /// Intermediate sales per firm (row sums of W).
    pub fn intermediate_sales(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.firms.len()];
        for e in &self.supply.edges {
            out[e.supplier] += e.weight;
        }
        out
    }

    pub fn final_demand(&self) -> Vec<f64> {
        if let Some(fd) = &self.final_demand {
            return fd.clone();
        }
        let sales = self.intermediate_sales();
        self.firms
            .iter()
            .zip(&sales)
            .map(|(f, s)| match &f.financials {
                Some(fin) => (fin.revenue - s).max(0.0),
                None => 0.0,
            })
            .collect()
    }

    /// Total output per firm: intermediate sales plus final demand.
    pub fn firm_output(&self) -> Vec<f64> {
        let fd = self.final_demand();
        self.intermediate_sales()
            .into_iter()
            .zip(fd)
            .map(|(s, d)| s + d)
            .collect()
    }
}
