use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, LogNormal, Pareto, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    Bank, Economy, Essentiality, Financials, Firm, InterbankEdge, InterbankNetwork, Loan,
    LoanBook, SupplyEdge, SupplyNetwork,
};
use crate::error::{Error, Result};

/// Distribution family of supply-link weights (before size scaling).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum WeightFamily {
    LogNormal { sigma: f64 },
    Pareto { alpha: f64 },
    Exponential,
}

impl Default for WeightFamily {
    fn default() -> Self {
        WeightFamily::LogNormal { sigma: 1.0 }
    }
}

/// Parameters of the synthetic economy generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub firms: usize,
    pub banks: usize,
    /// Mean number of suppliers per firm.
    pub mean_degree: f64,
    /// Number of two-digit sectors; each has `subsectors` four-digit codes.
    pub sectors: usize,
    pub subsectors: usize,
    /// Target `Σ B / Σ L`.
    pub exposure_ratio: f64,
    pub weights: WeightFamily,
    /// Share of firms with financial statements.
    pub financials_coverage: f64,
    /// Share of firms with statements that show negative equity.
    pub ineligible_share: f64,
    /// Share of firms with statements that hold bank loans.
    pub borrower_share: f64,
    /// Total firm loans over total bank equity.
    pub loans_to_equity: f64,
    /// Probability of an interbank link between an ordered bank pair.
    pub interbank_density: f64,
    /// Share of sector pairs whose inputs are essential.
    pub essential_share: f64,
    /// Median ratio of a firm's buffers (equity, liquidity) to its profit.
    pub buffer_median: f64,
    pub lgd: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            firms: 1000,
            banks: 19,
            mean_degree: 6.0,
            sectors: 20,
            subsectors: 3,
            exposure_ratio: 12.5,
            weights: WeightFamily::default(),
            financials_coverage: 0.75,
            ineligible_share: 0.15,
            borrower_share: 0.4,
            loans_to_equity: 2.0,
            interbank_density: 0.35,
            essential_share: 0.1,
            buffer_median: 0.8,
            lgd: 1.0,
        }
    }
}

impl SyntheticConfig {
    fn check(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.firms == 0 || self.banks == 0 {
            return bad("need at least one firm and one bank");
        }
        if self.sectors == 0 || self.subsectors == 0 || self.sectors > 99 || self.subsectors > 99 {
            return bad("sector and subsector counts must lie in 1..=99");
        }
        if !(self.mean_degree >= 0.0 && self.mean_degree.is_finite()) {
            return bad("mean_degree must be finite and non-negative");
        }
        if !(self.exposure_ratio.is_finite() && self.exposure_ratio > 0.0) {
            return bad("exposure_ratio must be positive and finite");
        }
        if !(self.loans_to_equity.is_finite() && self.loans_to_equity > 0.0) {
            return bad("loans_to_equity must be positive and finite");
        }
        if !(self.buffer_median.is_finite() && self.buffer_median > 0.0) {
            return bad("buffer_median must be positive and finite");
        }
        if !(self.lgd > 0.0 && self.lgd <= 1.0) {
            return bad("lgd must lie in (0, 1]");
        }
        for (name, v) in [
            ("financials_coverage", self.financials_coverage),
            ("ineligible_share", self.ineligible_share),
            ("borrower_share", self.borrower_share),
            ("interbank_density", self.interbank_density),
            ("essential_share", self.essential_share),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} must lie in [0, 1]")));
            }
        }
        match self.weights {
            WeightFamily::LogNormal { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                bad("log-normal sigma must be finite and non-negative")
            }
            WeightFamily::Pareto { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                bad("pareto alpha must be positive")
            }
            _ => Ok(()),
        }
    }
}

fn weight_draw(family: WeightFamily, rng: &mut ChaCha8Rng) -> f64 {
    match family {
        WeightFamily::LogNormal { sigma } => {
            // Unit mean.
            LogNormal::new(-0.5 * sigma * sigma, sigma).unwrap().sample(rng)
        }
        WeightFamily::Pareto { alpha } => Pareto::new(1.0, alpha).unwrap().sample(rng),
        WeightFamily::Exponential => Exp::new(1.0).unwrap().sample(rng),
    }
}

/// Builds a random economy that passes validation. Identical seeds give
/// bit-identical economies.
pub fn generate_synthetic_economy(cfg: &SyntheticConfig, seed: u64) -> Result<Economy> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.firms;
    let m = cfg.banks;

    // Heavy-tailed firm sizes drive both supplier choice and flow volumes.
    let size_dist = Pareto::new(1.0, 1.6).unwrap();
    let sizes: Vec<f64> = (0..n).map(|_| size_dist.sample(&mut rng)).collect();
    let sectors: Vec<String> = (0..n)
        .map(|_| {
            let s = rng.random_range(0..cfg.sectors) + 1;
            let sub = rng.random_range(0..cfg.subsectors) + 1;
            format!("{s:02}{sub:02}")
        })
        .collect();

    let mut edges = Vec::new();
    if n > 1 && cfg.mean_degree > 0.0 {
        let chooser = WeightedIndex::new(&sizes).expect("positive sizes");
        let extra = Poisson::new(cfg.mean_degree.max(1e-9)).unwrap();
        for buyer in 0..n {
            let want = (extra.sample(&mut rng) as usize).min(n - 1);
            let mut chosen = HashSet::with_capacity(want);
            let mut attempts = 0;
            while chosen.len() < want && attempts < 20 * want {
                attempts += 1;
                let supplier = chooser.sample(&mut rng);
                if supplier != buyer {
                    chosen.insert(supplier);
                }
            }
            let mut chosen: Vec<usize> = chosen.into_iter().collect();
            chosen.sort_unstable();
            for supplier in chosen {
                let weight = (sizes[supplier] * sizes[buyer]).sqrt() * weight_draw(cfg.weights, &mut rng);
                edges.push(SupplyEdge {
                    supplier,
                    buyer,
                    weight: weight.max(f64::MIN_POSITIVE),
                });
            }
        }
    }

    let mut sales = vec![0.0; n];
    for e in &edges {
        sales[e.supplier] += e.weight;
    }

    let buffer = LogNormal::new(cfg.buffer_median.ln(), 0.8).unwrap();
    let mut firms = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("F{i}");
        if rng.random::<f64>() >= cfg.financials_coverage {
            firms.push(Firm::without_financials(id, sectors[i].clone()));
            continue;
        }
        let revenue = sales[i] + (sales[i] + sizes[i]) * rng.random_range(0.3..1.0);
        let margin = rng.random_range(0.03..0.2);
        let profit = revenue * margin;
        let mut equity = profit * buffer.sample(&mut rng);
        let liquidity = profit * buffer.sample(&mut rng);
        if rng.random::<f64>() < cfg.ineligible_share {
            equity = -equity;
        }
        let short_liabs = revenue * rng.random_range(0.05..0.3);
        firms.push(Firm::with_financials(
            id,
            sectors[i].clone(),
            Financials {
                revenue,
                op_cost: revenue - profit,
                equity,
                short_assets: short_liabs + liquidity,
                short_liabs,
            },
        ));
    }

    // A few dominant banks, as in a concentrated national system.
    let bank_weights: Vec<f64> = (0..m).map(|k| 1.0 / (k as f64 + 1.0).powf(1.3)).collect();
    let mut loans = Vec::new();
    let bank_chooser = WeightedIndex::new(&bank_weights).expect("positive weights");
    for (i, firm) in firms.iter().enumerate() {
        let Some(fin) = &firm.financials else { continue };
        if rng.random::<f64>() >= cfg.borrower_share {
            continue;
        }
        let lenders = rng.random_range(1..=3usize.min(m));
        let mut chosen = HashSet::new();
        while chosen.len() < lenders {
            chosen.insert(bank_chooser.sample(&mut rng));
        }
        let mut chosen: Vec<usize> = chosen.into_iter().collect();
        chosen.sort_unstable();
        let principal = fin.revenue * rng.random_range(0.05..0.5);
        for bank in &chosen {
            loans.push(Loan {
                firm: i,
                bank: *bank,
                principal: principal / chosen.len() as f64,
            });
        }
    }
    let total_loans: f64 = loans.iter().map(|l| l.principal).sum();

    let weight_sum: f64 = bank_weights.iter().sum();
    let equity_total = if total_loans > 0.0 {
        total_loans / cfg.loans_to_equity
    } else {
        1000.0 * m as f64
    };
    let banks: Vec<Bank> = bank_weights
        .iter()
        .enumerate()
        .map(|(k, w)| Bank {
            id: format!("{}", k + 1),
            tier1_equity: equity_total * w / weight_sum,
        })
        .collect();

    let mut interbank = InterbankNetwork::default();
    if m > 1 {
        let amount = LogNormal::new(0.0, 1.0).unwrap();
        for borrower in 0..m {
            for lender in 0..m {
                if borrower != lender && rng.random::<f64>() < cfg.interbank_density {
                    let scale = (banks[borrower].tier1_equity * banks[lender].tier1_equity).sqrt();
                    interbank.edges.push(InterbankEdge {
                        borrower,
                        lender,
                        amount: scale * amount.sample(&mut rng),
                    });
                }
            }
        }
        if interbank.edges.is_empty() {
            interbank.edges.push(InterbankEdge {
                borrower: 1,
                lender: 0,
                amount: 1.0,
            });
        }
        if total_loans > 0.0 {
            let scale = total_loans / cfg.exposure_ratio / interbank.total();
            for e in &mut interbank.edges {
                e.amount *= scale;
            }
        }
    }

    let mut essentiality = Essentiality::default();
    essentiality.default_essential = false;
    for s in 1..=cfg.sectors {
        for b in 1..=cfg.sectors {
            if rng.random::<f64>() < cfg.essential_share {
                essentiality.insert(format!("{s:02}"), format!("{b:02}"), true);
            }
        }
    }

    Ok(Economy {
        firms,
        supply: SupplyNetwork {
            edges,
            essentiality,
        },
        banks,
        interbank,
        loans: LoanBook {
            entries: loans,
            lgd: cfg.lgd,
        },
        final_demand: None,
    })
}
