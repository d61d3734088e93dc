//! Multilayer economy: firms linked by supply relations, banks linked by
//! interbank loans, and the loan book coupling the two layers.

mod economy;
mod io;
mod synth;
mod validate;

pub use economy::{
    Bank, Economy, Essentiality, Financials, Firm, InterbankEdge, InterbankNetwork, Loan,
    LoanBook, SupplyEdge, SupplyNetwork,
};
pub(crate) use economy::sector_prefix;
pub use io::{
    load_economy, read_economy, read_essentiality, write_economy, EconomyFiles, UNKNOWN_SECTOR,
};
pub(crate) use io::read_rows;
pub use synth::{generate_synthetic_economy, SyntheticConfig, WeightFamily};
pub use validate::{validate_economy, Rule, ValidationReport, Violation};

use crate::error::{Error, Result};

/// Firm-loan exposure relative to interbank exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureRatio {
    /// `Σ B / Σ L` over the whole system.
    pub system: f64,
    /// Firm-loan assets over interbank assets per bank; `None` for banks
    /// holding no interbank assets.
    pub per_bank: Vec<Option<f64>>,
}

pub fn exposure_ratio(g: &Economy) -> Result<ExposureRatio> {
    let total_interbank = g.interbank.total();
    if total_interbank <= 0.0 {
        return Err(Error::Degenerate(
            "interbank network carries no exposure".into(),
        ));
    }
    let m = g.n_banks();
    let loans = g.loans.per_bank(m);
    let assets = g.interbank.assets(m);
    let per_bank = loans
        .iter()
        .zip(&assets)
        .map(|(b, a)| (*a > 0.0).then(|| b / a))
        .collect();
    Ok(ExposureRatio {
        system: g.loans.total() / total_interbank,
        per_bank,
    })
}
