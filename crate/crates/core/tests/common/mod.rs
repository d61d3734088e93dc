//! Shared fixtures and an independent dense re-implementation of the
//! pipeline used as an oracle.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use chainstress::model::{
    load_economy, Bank, Economy, EconomyFiles, Essentiality, Financials, Firm, InterbankEdge,
    InterbankNetwork, Loan, LoanBook, SupplyEdge, SupplyNetwork,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// The six-firm, four-bank toy economy (firms a..f, banks 1..4).
pub fn fig1() -> Economy {
    load_economy(&EconomyFiles::in_dir(fixture_dir("fig1"))).expect("fig1 fixture loads")
}

const SECTORS: [&str; 5] = ["0111", "0112", "0211", "0311", "0312"];

/// Random economy with `n` firms and `m` banks, every invariant satisfied.
pub fn random_economy(seed: u64, n: usize, m: usize) -> Economy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let firms = (0..n)
        .map(|i| {
            let sector = SECTORS[rng.random_range(0..SECTORS.len())];
            if rng.random::<f64>() < 0.15 {
                return Firm::without_financials(format!("f{i}"), sector);
            }
            let revenue = rng.random_range(50.0..150.0);
            let liabs = rng.random_range(0.0..20.0);
            Firm::with_financials(
                format!("f{i}"),
                sector,
                Financials {
                    revenue,
                    op_cost: revenue * rng.random_range(0.5..0.95),
                    equity: rng.random_range(1.0..30.0),
                    short_assets: liabs + rng.random_range(1.0..30.0),
                    short_liabs: liabs,
                },
            )
        })
        .collect();
    let mut supply = Vec::new();
    for s in 0..n {
        for b in 0..n {
            if s != b && rng.random::<f64>() < 0.3 {
                supply.push(SupplyEdge {
                    supplier: s,
                    buyer: b,
                    weight: rng.random_range(1.0..10.0),
                });
            }
        }
    }
    let mut essentiality = Essentiality::all_essential();
    essentiality.default_essential = rng.random::<bool>();
    for s in ["01", "02", "03"] {
        for b in ["01", "02", "03"] {
            if rng.random::<f64>() < 0.4 {
                essentiality.insert(s, b, rng.random::<bool>());
            }
        }
    }
    let banks = (0..m)
        .map(|k| Bank {
            id: format!("b{k}"),
            tier1_equity: rng.random_range(50.0..200.0),
        })
        .collect();
    let mut interbank = Vec::new();
    for borrower in 0..m {
        for lender in 0..m {
            if borrower != lender && rng.random::<f64>() < 0.6 {
                interbank.push(InterbankEdge {
                    borrower,
                    lender,
                    amount: rng.random_range(1.0..60.0),
                });
            }
        }
    }
    let mut loans = Vec::new();
    for firm in 0..n {
        for bank in 0..m {
            if rng.random::<f64>() < 0.4 {
                loans.push(Loan {
                    firm,
                    bank,
                    principal: rng.random_range(1.0..40.0),
                });
            }
        }
    }
    Economy {
        firms,
        supply: SupplyNetwork {
            edges: supply,
            essentiality,
        },
        banks,
        interbank: InterbankNetwork { edges: interbank },
        loans: LoanBook {
            entries: loans,
            lgd: rng.random_range(0.3..=1.0),
        },
        final_demand: None,
    }
}

/// Random shock: a few firms hit hard, the rest untouched.
pub fn random_shock(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..n)
        .map(|_| match rng.random_range(0..4) {
            0 => 0.0,
            1 => rng.random_range(0.0..1.0),
            _ => 1.0,
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dense oracle. Written from the model definition with plain matrices and no
// shared code beyond the economy types.

pub struct OracleLedger {
    pub h_w: Vec<f64>,
    pub di: Vec<f64>,
    pub sc: Vec<f64>,
    pub ib_wo: Vec<f64>,
    pub ib_w: Vec<f64>,
}

pub fn oracle_propagate(g: &Economy, psi: &[f64], eps: f64, max_iter: usize) -> (Vec<f64>, usize) {
    let n = g.firms.len();
    let mut w = vec![vec![0.0; n]; n];
    for e in &g.supply.edges {
        w[e.supplier][e.buyer] += e.weight;
    }
    let mut h = psi.to_vec();
    let mut t = 0;
    while t < max_iter {
        t += 1;
        let mut next = vec![0.0; n];
        for j in 0..n {
            // supplier sector -> (delivered, total, essential)
            let mut groups: BTreeMap<&str, (f64, f64, bool)> = BTreeMap::new();
            for i in 0..n {
                if w[i][j] > 0.0 {
                    let sec = g.firms[i].sector.as_str();
                    let ess = g
                        .supply
                        .essentiality
                        .is_essential(sec, &g.firms[j].sector);
                    let entry = groups.entry(sec).or_insert((0.0, 0.0, ess));
                    entry.0 += w[i][j] * h[i];
                    entry.1 += w[i][j];
                }
            }
            // Non-essential inputs do not bind: oracle runs use zero
            // substitutability.
            let mut down = 1.0f64;
            for g in groups.values().filter(|g| g.2) {
                down = down.min(g.0 / g.1);
            }
            let out: f64 = (0..n).map(|k| w[j][k]).sum();
            let up = if out > 0.0 {
                (0..n).map(|k| w[j][k] * h[k]).sum::<f64>() / out
            } else {
                1.0
            };
            next[j] = psi[j].min(down).min(up).min(h[j]);
        }
        let dec = (0..n).map(|i| h[i] - next[i]).fold(0.0, f64::max);
        h = next;
        if dec <= eps {
            break;
        }
    }
    (h, t)
}

pub fn oracle_defaults(g: &Economy, h: &[f64]) -> Vec<bool> {
    g.firms
        .iter()
        .zip(h)
        .map(|(f, &h)| match &f.financials {
            Some(fin) if f.eligible_for_default => {
                let dp = (1.0 - h) * (fin.revenue - fin.op_cost);
                fin.equity - dp <= 0.0 || fin.short_assets - fin.short_liabs - dp <= 0.0
            }
            _ => false,
        })
        .collect()
}

/// Linearized DebtRank with dense leverage matrix `lam[debtor][creditor]`.
pub fn oracle_debtrank(g: &Economy, seed: &[f64], eps: f64, max_iter: usize, min_rounds: usize) -> (Vec<f64>, usize) {
    let m = g.banks.len();
    let e: Vec<f64> = g.banks.iter().map(|b| b.tier1_equity).collect();
    let total: f64 = e.iter().sum();
    let mut lam = vec![vec![0.0; m]; m];
    for edge in &g.interbank.edges {
        lam[edge.borrower][edge.lender] += edge.amount / e[edge.lender];
    }
    let mut l = seed.to_vec();
    let mut prev_clamped = vec![0.0; m];
    let mut t = 0;
    while t < max_iter {
        t += 1;
        let clamped: Vec<f64> = l.iter().map(|v| v.min(1.0)).collect();
        let mut next = l.clone();
        for k in 0..m {
            for d in 0..m {
                next[k] += lam[d][k] * (clamped[d] - prev_clamped[d]).max(0.0);
            }
        }
        prev_clamped = clamped;
        let change: f64 = (0..m).map(|k| e[k] * (next[k] - l[k])).sum::<f64>() / total;
        l = next;
        if change <= eps && t >= min_rounds {
            break;
        }
    }
    (l, t)
}

/// Full pipeline in both regimes with default tolerances.
pub fn oracle_pipeline(g: &Economy, psi: &[f64]) -> OracleLedger {
    let m = g.banks.len();
    let e: Vec<f64> = g.banks.iter().map(|b| b.tier1_equity).collect();
    let lgd = g.loans.lgd;
    let chi_wo = oracle_defaults(g, psi);
    let (h_w, _) = oracle_propagate(g, psi, 0.01, 1000);
    let chi_w = oracle_defaults(g, &h_w);
    let mut di = vec![0.0; m];
    let mut sc = vec![0.0; m];
    for loan in &g.loans.entries {
        let frac = lgd * loan.principal / e[loan.bank];
        if chi_wo[loan.firm] {
            di[loan.bank] += frac;
        } else if chi_w[loan.firm] {
            sc[loan.bank] += frac;
        }
    }
    let (l_wo, t_wo) = oracle_debtrank(g, &di, 0.01, 1000, 0);
    let seed_w: Vec<f64> = (0..m).map(|k| di[k] + sc[k]).collect();
    let (l_w, _) = oracle_debtrank(g, &seed_w, 0.01, 1000, t_wo);
    OracleLedger {
        h_w,
        ib_wo: (0..m).map(|k| l_wo[k] - di[k]).collect(),
        ib_w: (0..m).map(|k| l_w[k] - seed_w[k]).collect(),
        di,
        sc,
    }
}
