use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    validate_economy, Bank, Economy, Essentiality, Financials, Firm, InterbankEdge,
    InterbankNetwork, Loan, LoanBook, SupplyEdge, SupplyNetwork,
};
use crate::error::{Error, Result};

/// Sector assigned to firms that only appear in the supply file.
pub const UNKNOWN_SECTOR: &str = "0000";

/// File locations for one economy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EconomyFiles {
    pub firms: PathBuf,
    pub supply: PathBuf,
    pub interbank: PathBuf,
    pub loans: PathBuf,
    pub banks: PathBuf,
    #[serde(default)]
    pub essentiality: Option<PathBuf>,
    #[serde(default = "default_lgd")]
    pub lgd: f64,
}

fn default_lgd() -> f64 {
    1.0
}

impl EconomyFiles {
    /// Conventional file names inside one directory. `essentiality.csv` is
    /// picked up only if it exists.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let ess = dir.join("essentiality.csv");
        EconomyFiles {
            firms: dir.join("firms.csv"),
            supply: dir.join("supply.csv"),
            interbank: dir.join("interbank.csv"),
            loans: dir.join("loans.csv"),
            banks: dir.join("banks.csv"),
            essentiality: ess.exists().then_some(ess),
            lgd: 1.0,
        }
    }
}

#[derive(Debug, Deserialize)]
struct FirmRow {
    id: String,
    sector: String,
    revenue: Option<f64>,
    op_cost: Option<f64>,
    equity: Option<f64>,
    short_assets: Option<f64>,
    short_liabs: Option<f64>,
    #[serde(default)]
    final_demand: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct SupplyRow {
    supplier_id: String,
    buyer_id: String,
    weight: f64,
}

#[derive(Debug, Deserialize)]
struct InterbankRow {
    borrower_id: String,
    lender_id: String,
    amount: f64,
}

#[derive(Debug, Deserialize)]
struct LoanRow {
    firm_id: String,
    bank_id: String,
    principal: f64,
}

#[derive(Debug, Deserialize)]
struct BankRow {
    id: String,
    tier1_equity: f64,
}

#[derive(Debug, Deserialize)]
struct EssentialityRow {
    supplier_sector: String,
    buyer_sector: String,
    essential: u8,
}

/// Reads every row of a headered CSV file, tagging each with its line number.
pub(crate) fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(u64, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    let mut rows = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: e.to_string(),
                });
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row: T = record.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        rows.push((line, row));
    }
    Ok(rows)
}

fn lookup(
    index: &HashMap<String, usize>,
    id: &str,
    kind: &'static str,
    path: &Path,
    line: u64,
) -> Result<usize> {
    index.get(id).copied().ok_or_else(|| Error::UnknownId {
        path: path.to_path_buf(),
        line,
        kind,
        id: id.to_string(),
    })
}

/// Parses the economy files without running validation.
pub fn read_economy(files: &EconomyFiles) -> Result<Economy> {
    let mut firms = Vec::new();
    let mut firm_index: HashMap<String, usize> = HashMap::new();
    let mut final_demand: Vec<Option<f64>> = Vec::new();

    for (line, row) in read_rows::<FirmRow>(&files.firms)? {
        let parts = [
            row.revenue,
            row.op_cost,
            row.equity,
            row.short_assets,
            row.short_liabs,
        ];
        let firm = match parts {
            [Some(revenue), Some(op_cost), Some(equity), Some(short_assets), Some(short_liabs)] => {
                Firm::with_financials(
                    row.id.clone(),
                    row.sector,
                    Financials {
                        revenue,
                        op_cost,
                        equity,
                        short_assets,
                        short_liabs,
                    },
                )
            }
            [None, None, None, None, None] => Firm::without_financials(row.id.clone(), row.sector),
            _ => {
                return Err(Error::Parse {
                    path: files.firms.clone(),
                    line,
                    message: format!("firm `{}` has partially missing financials", row.id),
                })
            }
        };
        if firm_index.insert(row.id.clone(), firms.len()).is_some() {
            return Err(Error::Parse {
                path: files.firms.clone(),
                line,
                message: format!("duplicate firm id `{}`", row.id),
            });
        }
        firms.push(firm);
        final_demand.push(row.final_demand);
    }

    let mut edges = Vec::new();
    for (_, row) in read_rows::<SupplyRow>(&files.supply)? {
        let mut resolve = |id: String| -> usize {
            *firm_index.entry(id.clone()).or_insert_with(|| {
                firms.push(Firm::without_financials(id, UNKNOWN_SECTOR));
                final_demand.push(None);
                firms.len() - 1
            })
        };
        let supplier = resolve(row.supplier_id);
        let buyer = resolve(row.buyer_id);
        edges.push(SupplyEdge {
            supplier,
            buyer,
            weight: row.weight,
        });
    }

    let mut banks = Vec::new();
    let mut bank_index = HashMap::new();
    for (line, row) in read_rows::<BankRow>(&files.banks)? {
        if bank_index.insert(row.id.clone(), banks.len()).is_some() {
            return Err(Error::Parse {
                path: files.banks.clone(),
                line,
                message: format!("duplicate bank id `{}`", row.id),
            });
        }
        banks.push(Bank {
            id: row.id,
            tier1_equity: row.tier1_equity,
        });
    }

    let mut interbank = InterbankNetwork::default();
    for (line, row) in read_rows::<InterbankRow>(&files.interbank)? {
        let borrower = lookup(&bank_index, &row.borrower_id, "bank", &files.interbank, line)?;
        let lender = lookup(&bank_index, &row.lender_id, "bank", &files.interbank, line)?;
        interbank.edges.push(InterbankEdge {
            borrower,
            lender,
            amount: row.amount,
        });
    }

    let mut loans = LoanBook {
        entries: Vec::new(),
        lgd: files.lgd,
    };
    for (line, row) in read_rows::<LoanRow>(&files.loans)? {
        let firm = lookup(&firm_index, &row.firm_id, "firm", &files.loans, line)?;
        let bank = lookup(&bank_index, &row.bank_id, "bank", &files.loans, line)?;
        loans.entries.push(Loan {
            firm,
            bank,
            principal: row.principal,
        });
    }

    let essentiality = match &files.essentiality {
        Some(path) => read_essentiality(path)?,
        None => Essentiality::all_essential(),
    };

    // An explicit final-demand column overrides the revenue-based proxy only
    // if every firm carries a value.
    let final_demand = if !final_demand.is_empty() && final_demand.iter().all(Option::is_some) {
        Some(final_demand.into_iter().flatten().collect())
    } else {
        None
    };

    Ok(Economy {
        firms,
        supply: SupplyNetwork {
            edges,
            essentiality,
        },
        banks,
        interbank,
        loans,
        final_demand,
    })
}

/// Reads `supplier_sector,buyer_sector,essential` rows. Pairs not listed are
/// essential unless a `*,*` row sets another default.
pub fn read_essentiality(path: &Path) -> Result<Essentiality> {
    let mut table = Essentiality::all_essential();
    for (line, row) in read_rows::<EssentialityRow>(path)? {
        let essential = match row.essential {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("essential must be 0 or 1, got {other}"),
                })
            }
        };
        if row.supplier_sector == "*" && row.buyer_sector == "*" {
            table.default_essential = essential;
        } else {
            table.insert(row.supplier_sector, row.buyer_sector, essential);
        }
    }
    Ok(table)
}

/// Parses and validates an economy. Any invariant violation is an error
/// carrying the full report.
pub fn load_economy(files: &EconomyFiles) -> Result<Economy> {
    let economy = read_economy(files)?;
    let report = validate_economy(&economy);
    if report.is_empty() {
        Ok(economy)
    } else {
        Err(Error::Invalid(report))
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Writes the economy in the same layout `EconomyFiles::in_dir` reads.
/// Floats use the shortest representation that parses back exactly.
pub fn write_economy(g: &Economy, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_err = |p: &Path| {
        let p = p.to_path_buf();
        move |e: csv::Error| Error::csv(p.clone(), e)
    };

    let path = dir.join("firms.csv");
    let mut w = create(&path)?;
    let mut header = vec![
        "id",
        "sector",
        "revenue",
        "op_cost",
        "equity",
        "short_assets",
        "short_liabs",
    ];
    if g.final_demand.is_some() {
        header.push("final_demand");
    }
    w.write_record(&header).map_err(csv_err(&path))?;
    for (i, f) in g.firms.iter().enumerate() {
        let mut rec = vec![f.id.clone(), f.sector.clone()];
        match &f.financials {
            Some(fin) => rec.extend(
                [
                    fin.revenue,
                    fin.op_cost,
                    fin.equity,
                    fin.short_assets,
                    fin.short_liabs,
                ]
                .map(num),
            ),
            None => rec.extend(std::iter::repeat_n(String::new(), 5)),
        }
        if let Some(fd) = &g.final_demand {
            rec.push(num(fd[i]));
        }
        w.write_record(&rec).map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("supply.csv");
    let mut w = create(&path)?;
    w.write_record(["supplier_id", "buyer_id", "weight"])
        .map_err(csv_err(&path))?;
    for e in &g.supply.edges {
        w.write_record([
            g.firms[e.supplier].id.as_str(),
            g.firms[e.buyer].id.as_str(),
            &num(e.weight),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("banks.csv");
    let mut w = create(&path)?;
    w.write_record(["id", "tier1_equity"]).map_err(csv_err(&path))?;
    for b in &g.banks {
        w.write_record([b.id.as_str(), &num(b.tier1_equity)])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("interbank.csv");
    let mut w = create(&path)?;
    w.write_record(["borrower_id", "lender_id", "amount"])
        .map_err(csv_err(&path))?;
    for e in &g.interbank.edges {
        w.write_record([
            g.banks[e.borrower].id.as_str(),
            g.banks[e.lender].id.as_str(),
            &num(e.amount),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("loans.csv");
    let mut w = create(&path)?;
    w.write_record(["firm_id", "bank_id", "principal"])
        .map_err(csv_err(&path))?;
    for l in &g.loans.entries {
        w.write_record([
            g.firms[l.firm].id.as_str(),
            g.banks[l.bank].id.as_str(),
            &num(l.principal),
        ])
        .map_err(csv_err(&path))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let ess = &g.supply.essentiality;
    if !ess.is_empty() || !ess.default_essential {
        let path = dir.join("essentiality.csv");
        let mut file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut body = String::from("supplier_sector,buyer_sector,essential\n");
        if !ess.default_essential {
            body.push_str("*,*,0\n");
        }
        for (s, b, e) in ess.entries() {
            body.push_str(&format!("{s},{b},{}\n", u8::from(e)));
        }
        file.write_all(body.as_bytes())
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
