use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::Economy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    EmptySector,
    DuplicateId,
    NonFinite,
    NegativeFlow,
    EligibleWithoutFinancials,
    NonPositiveEquity,
    NonPositiveLiquidity,
    NonPositiveProfit,
    NonPositiveWeight,
    NegativeAmount,
    SelfLoop,
    DanglingReference,
    DuplicateEdge,
    BankEquity,
    LossGivenDefault,
    FinalDemandShape,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::EmptySector => "empty-sector",
            Rule::DuplicateId => "duplicate-id",
            Rule::NonFinite => "non-finite",
            Rule::NegativeFlow => "negative-revenue-or-cost",
            Rule::EligibleWithoutFinancials => "eligible-without-financials",
            Rule::NonPositiveEquity => "eligible-with-non-positive-equity",
            Rule::NonPositiveLiquidity => "eligible-with-non-positive-liquidity",
            Rule::NonPositiveProfit => "eligible-with-non-positive-profit",
            Rule::NonPositiveWeight => "non-positive-weight",
            Rule::NegativeAmount => "negative-amount",
            Rule::SelfLoop => "self-loop",
            Rule::DanglingReference => "dangling-reference",
            Rule::DuplicateEdge => "duplicate-edge",
            Rule::BankEquity => "non-positive-tier1-equity",
            Rule::LossGivenDefault => "lgd-out-of-range",
            Rule::FinalDemandShape => "final-demand-shape",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Human-readable entity label, e.g. `firm f` or `supply d->c`.
    pub entity: String,
    pub rule: Rule,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    fn push(&mut self, entity: String, rule: Rule) {
        self.violations.push(Violation { entity, rule });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.entity, v.rule)?;
        }
        Ok(())
    }
}

/// Lists every invariant violation. An empty report means the economy is
/// ready for simulation.
pub fn validate_economy(g: &Economy) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = g.firms.len();
    let m = g.banks.len();

    let firm_label = |i: usize| match g.firms.get(i) {
        Some(f) => f.id.clone(),
        None => format!("#{i}"),
    };
    let bank_label = |k: usize| match g.banks.get(k) {
        Some(b) => b.id.clone(),
        None => format!("#{k}"),
    };

    let mut seen = HashSet::new();
    for firm in &g.firms {
        let entity = format!("firm {}", firm.id);
        if !seen.insert(firm.id.as_str()) {
            report.push(entity.clone(), Rule::DuplicateId);
        }
        if firm.sector.trim().is_empty() {
            report.push(entity.clone(), Rule::EmptySector);
        }
        match &firm.financials {
            Some(fin) => {
                let values = [
                    fin.revenue,
                    fin.op_cost,
                    fin.equity,
                    fin.short_assets,
                    fin.short_liabs,
                ];
                if values.iter().any(|v| !v.is_finite()) {
                    report.push(entity.clone(), Rule::NonFinite);
                    continue;
                }
                if fin.revenue < 0.0 || fin.op_cost < 0.0 {
                    report.push(entity.clone(), Rule::NegativeFlow);
                }
                if firm.eligible_for_default {
                    if fin.equity <= 0.0 {
                        report.push(entity.clone(), Rule::NonPositiveEquity);
                    }
                    if fin.liquidity() <= 0.0 {
                        report.push(entity.clone(), Rule::NonPositiveLiquidity);
                    }
                    if fin.profit() <= 0.0 {
                        report.push(entity, Rule::NonPositiveProfit);
                    }
                }
            }
            None if firm.eligible_for_default => {
                report.push(entity, Rule::EligibleWithoutFinancials);
            }
            None => {}
        }
    }

    let mut seen = HashSet::new();
    for bank in &g.banks {
        let entity = format!("bank {}", bank.id);
        if !seen.insert(bank.id.as_str()) {
            report.push(entity.clone(), Rule::DuplicateId);
        }
        if !(bank.tier1_equity.is_finite() && bank.tier1_equity > 0.0) {
            report.push(entity, Rule::BankEquity);
        }
    }

    let mut seen = HashSet::new();
    for e in &g.supply.edges {
        let entity = format!("supply {}->{}", firm_label(e.supplier), firm_label(e.buyer));
        if e.supplier >= n || e.buyer >= n {
            report.push(entity, Rule::DanglingReference);
            continue;
        }
        if e.supplier == e.buyer {
            report.push(entity.clone(), Rule::SelfLoop);
        }
        if !e.weight.is_finite() {
            report.push(entity.clone(), Rule::NonFinite);
        } else if e.weight <= 0.0 {
            report.push(entity.clone(), Rule::NonPositiveWeight);
        }
        if !seen.insert((e.supplier, e.buyer)) {
            report.push(entity, Rule::DuplicateEdge);
        }
    }

    let mut seen = HashSet::new();
    for e in &g.interbank.edges {
        let entity = format!("interbank {}->{}", bank_label(e.borrower), bank_label(e.lender));
        if e.borrower >= m || e.lender >= m {
            report.push(entity, Rule::DanglingReference);
            continue;
        }
        if e.borrower == e.lender {
            report.push(entity.clone(), Rule::SelfLoop);
        }
        if !e.amount.is_finite() {
            report.push(entity.clone(), Rule::NonFinite);
        } else if e.amount < 0.0 {
            report.push(entity.clone(), Rule::NegativeAmount);
        }
        if !seen.insert((e.borrower, e.lender)) {
            report.push(entity, Rule::DuplicateEdge);
        }
    }

    let mut seen = HashSet::new();
    for l in &g.loans.entries {
        let entity = format!("loan {}->{}", firm_label(l.firm), bank_label(l.bank));
        if l.firm >= n || l.bank >= m {
            report.push(entity, Rule::DanglingReference);
            continue;
        }
        if !l.principal.is_finite() {
            report.push(entity.clone(), Rule::NonFinite);
        } else if l.principal < 0.0 {
            report.push(entity.clone(), Rule::NegativeAmount);
        }
        if !seen.insert((l.firm, l.bank)) {
            report.push(entity, Rule::DuplicateEdge);
        }
    }

    if !(g.loans.lgd > 0.0 && g.loans.lgd <= 1.0) {
        report.push("loan book".to_string(), Rule::LossGivenDefault);
    }

    if let Some(fd) = &g.final_demand {
        if fd.len() != n || fd.iter().any(|v| !v.is_finite() || *v < 0.0) {
            report.push("final demand".to_string(), Rule::FinalDemandShape);
        }
    }

    report
}
