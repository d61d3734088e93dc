//! Plot-ready report files.
//!
//! | file | columns |
//! |---|---|
//! | `fsri_profile.csv` | rank, firm_id, fsri, fsri_plus, amplification, converged |
//! | `risk_summary.csv` | bank, channel, el, var, es, regime |
//! | `amplification.csv` | bank, scenario_id, ib_wo, ib_w, ratio |
//! | `ccdf.csv` | series, x, survival |
//! | `ledgers.csv` | scenario_id, bank_id, equity, di, sc, ib_wo, ib_w |
//! | `defaults.csv` | scenario_id, firm_id, chi_wo, chi_w, dp |
//! | `debtrank_profile.csv` | bank_id, total, contagion_only, converged |
//! | `residuals.csv` | scenario_id, sector, residual |
//! | `fits.json` | regressions and Welch tests |
//!
//! Empty cells mark undefined values. The `bank` column of the risk summary
//! reads `system` for equity-weighted system rows.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::credit::BankLossLedger;
use crate::error::{Error, Result};
use crate::model::read_rows;
use crate::metrics::{
    amplification_fits, amplification_records, ib_amplification, summarize, welch_test, AmplificationFits,
    AmplificationRecord, AmplificationStats, Channel, ChannelSummary, FitResult, FsriProfile, Regime, WelchTest,
};
use crate::model::{Bank, Economy};
use crate::debtrank::BankImpact;
use crate::pipeline::{Regimes, ScenarioOutcome};
use crate::scenario::ResidualRecord;

pub const FSRI_PROFILE: &str = "fsri_profile.csv";
pub const RISK_SUMMARY: &str = "risk_summary.csv";
pub const AMPLIFICATION: &str = "amplification.csv";
pub const FITS: &str = "fits.json";
pub const CCDF: &str = "ccdf.csv";
pub const LEDGERS: &str = "ledgers.csv";
pub const DEFAULTS: &str = "defaults.csv";
pub const DEBTRANK_PROFILE: &str = "debtrank_profile.csv";
pub const RESIDUALS: &str = "residuals.csv";

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_fsri_profile(path: &Path, profile: &FsriProfile) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        rank: usize,
        firm_id: &'a str,
        fsri: f64,
        fsri_plus: f64,
        amplification: Option<f64>,
        converged: bool,
    }
    write_rows(
        path,
        profile.records.iter().enumerate().map(|(i, r)| Row {
            rank: i + 1,
            firm_id: &r.firm,
            fsri: r.fsri,
            fsri_plus: r.fsri_plus,
            amplification: r.amplification,
            converged: r.converged,
        }),
    )
}

pub fn write_risk_summary(path: &Path, banks: &[Bank], summaries: &[ChannelSummary]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        bank: &'a str,
        channel: &'a str,
        el: f64,
        var: f64,
        es: f64,
        regime: &'a str,
    }
    write_rows(
        path,
        summaries.iter().map(|s| Row {
            bank: s.bank.map_or("system", |k| banks[k].id.as_str()),
            channel: s.channel.as_str(),
            el: s.summary.el,
            var: s.summary.var95,
            es: s.summary.es95,
            regime: s.regime.as_str(),
        }),
    )
}

pub fn write_amplification(path: &Path, banks: &[Bank], records: &[AmplificationRecord]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        bank: &'a str,
        scenario_id: usize,
        ib_wo: f64,
        ib_w: f64,
        ratio: Option<f64>,
    }
    write_rows(
        path,
        records.iter().map(|r| Row {
            bank: &banks[r.bank].id,
            scenario_id: r.scenario,
            ib_wo: r.ib_wo,
            ib_w: r.ib_w,
            ratio: r.ratio,
        }),
    )
}

/// Named survival curves in long format.
pub fn write_ccdf(path: &Path, series: &[(&str, &[(f64, f64)])]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        series: &'a str,
        x: f64,
        survival: f64,
    }
    write_rows(
        path,
        series.iter().flat_map(|(name, pts)| {
            pts.iter().map(move |&(x, survival)| Row {
                series: name,
                x,
                survival,
            })
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankFit {
    pub bank: String,
    #[serde(flatten)]
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedWelch {
    pub a: String,
    pub b: String,
    #[serde(flatten)]
    pub test: WelchTest,
}

/// Contents of `fits.json`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitsReport {
    pub pooled: Option<FitResult>,
    pub pooled_log: Option<FitResult>,
    pub per_bank: Vec<BankFit>,
    pub welch: Vec<NamedWelch>,
    /// Amplification ratios left out because `ib_wo` was zero.
    pub undefined_ratios: usize,
}

impl FitsReport {
    pub fn new(banks: &[Bank], fits: AmplificationFits, welch: Vec<NamedWelch>, undefined_ratios: usize) -> Self {
        FitsReport {
            pooled: fits.pooled,
            pooled_log: fits.pooled_log,
            per_bank: fits
                .per_bank
                .into_iter()
                .map(|(k, fit)| BankFit {
                    bank: banks[k].id.clone(),
                    fit,
                })
                .collect(),
            welch,
            undefined_ratios,
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, e.into()))?;
    body.push('\n');
    File::create(path)
        .and_then(|mut f| f.write_all(body.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct LedgerRow {
    scenario_id: usize,
    bank_id: String,
    equity: f64,
    di: f64,
    sc: f64,
    ib_wo: f64,
    ib_w: f64,
}

pub fn write_ledgers(path: &Path, banks: &[Bank], ledgers: &[&BankLossLedger]) -> Result<()> {
    write_rows(
        path,
        ledgers.iter().enumerate().flat_map(|(s, l)| {
            banks.iter().enumerate().map(move |(k, b)| LedgerRow {
                scenario_id: s,
                bank_id: b.id.clone(),
                equity: b.tier1_equity,
                di: l.di[k],
                sc: l.sc[k],
                ib_wo: l.ib_wo[k],
                ib_w: l.ib_w[k],
            })
        }),
    )
}

/// Ledgers read back from `ledgers.csv`, with banks in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerDump {
    pub bank_ids: Vec<String>,
    pub equities: Vec<f64>,
    pub ledgers: Vec<BankLossLedger>,
}

impl LedgerDump {
    pub fn banks(&self) -> Vec<Bank> {
        self.bank_ids
            .iter()
            .zip(&self.equities)
            .map(|(id, &e)| Bank {
                id: id.clone(),
                tier1_equity: e,
            })
            .collect()
    }

    pub fn equity_weights(&self) -> Vec<f64> {
        let total: f64 = self.equities.iter().sum();
        self.equities.iter().map(|e| e / total).collect()
    }
}

pub fn read_ledgers(path: &Path) -> Result<LedgerDump> {
    let rows = read_rows::<LedgerRow>(path)?;
    let mut bank_ids: Vec<String> = Vec::new();
    let mut equities = Vec::new();
    for (_, r) in &rows {
        if !bank_ids.contains(&r.bank_id) {
            bank_ids.push(r.bank_id.clone());
            equities.push(r.equity);
        }
    }
    let m = bank_ids.len();
    let scenarios = rows.iter().map(|(_, r)| r.scenario_id + 1).max().unwrap_or(0);
    let mut ledgers = vec![BankLossLedger::zeros(m); scenarios];
    let mut seen = vec![false; scenarios * m];
    for (line, r) in rows {
        let k = bank_ids.iter().position(|b| *b == r.bank_id).unwrap();
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if equities[k] != r.equity {
            return Err(parse_err(format!("bank `{}` has inconsistent equity", r.bank_id)));
        }
        if std::mem::replace(&mut seen[r.scenario_id * m + k], true) {
            return Err(parse_err(format!(
                "duplicate row for scenario {} bank `{}`",
                r.scenario_id, r.bank_id
            )));
        }
        let l = &mut ledgers[r.scenario_id];
        l.di[k] = r.di;
        l.sc[k] = r.sc;
        l.ib_wo[k] = r.ib_wo;
        l.ib_w[k] = r.ib_w;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!(
                "no row for scenario {} bank `{}`",
                missing / m,
                bank_ids[missing % m]
            ),
        });
    }
    Ok(LedgerDump {
        bank_ids,
        equities,
        ledgers,
    })
}

/// Per-firm default flags of every scenario; firms that default in neither
/// regime are omitted.
pub fn write_defaults(path: &Path, g: &Economy, outcomes: &[ScenarioOutcome]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        scenario_id: usize,
        firm_id: &'a str,
        chi_wo: u8,
        chi_w: u8,
        dp: Option<f64>,
    }
    write_rows(
        path,
        outcomes.iter().enumerate().flat_map(|(s, o)| {
            o.defaults.iter().flat_map(move |d| {
                (0..g.n_firms())
                    .filter(|&i| d.chi_w.chi[i] || d.chi_wo.chi[i])
                    .map(move |i| Row {
                        scenario_id: s,
                        firm_id: &g.firms[i].id,
                        chi_wo: d.chi_wo.chi[i] as u8,
                        chi_w: d.chi_w.chi[i] as u8,
                        dp: d.dp_w.dp[i],
                    })
            })
        }),
    )
}

/// `(iteration, firm_id, h)` rows of one propagation, optionally prefixed by
/// a scenario id.
pub fn write_trajectory(path: &Path, g: &Economy, runs: &[(Option<usize>, &[(usize, usize, f64)])]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        iteration: usize,
        firm_id: &'a str,
        h: f64,
    }
    #[derive(Serialize)]
    struct ScenarioRow<'a> {
        scenario_id: usize,
        iteration: usize,
        firm_id: &'a str,
        h: f64,
    }
    if runs.iter().all(|(s, _)| s.is_none()) {
        write_rows(
            path,
            runs.iter().flat_map(|(_, rows)| {
                rows.iter().map(|&(t, i, h)| Row {
                    iteration: t,
                    firm_id: &g.firms[i].id,
                    h,
                })
            }),
        )
    } else {
        write_rows(
            path,
            runs.iter().flat_map(|(s, rows)| {
                rows.iter().map(move |&(t, i, h)| ScenarioRow {
                    scenario_id: s.unwrap_or(0),
                    iteration: t,
                    firm_id: &g.firms[i].id,
                    h,
                })
            }),
        )
    }
}

/// `(iteration, bank_id, loss)` rows of one interbank run.
pub fn write_debtrank_trace(path: &Path, g: &Economy, rows: &[(usize, usize, f64)]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        iteration: usize,
        bank_id: &'a str,
        loss: f64,
    }
    write_rows(
        path,
        rows.iter().map(|&(t, k, loss)| Row {
            iteration: t,
            bank_id: &g.banks[k].id,
            loss,
        }),
    )
}

pub fn write_debtrank_profile(path: &Path, banks: &[Bank], impacts: &[BankImpact]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        bank_id: &'a str,
        total: f64,
        contagion_only: f64,
        converged: bool,
    }
    write_rows(
        path,
        impacts.iter().map(|b| Row {
            bank_id: &banks[b.bank].id,
            total: b.total,
            contagion_only: b.contagion_only,
            converged: b.converged,
        }),
    )
}

/// Sectors whose scenario aggregate missed its target after clipping.
pub fn write_residuals(path: &Path, residuals: &[ResidualRecord]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        scenario_id: usize,
        sector: &'a str,
        residual: f64,
    }
    write_rows(
        path,
        residuals.iter().map(|r| Row {
            scenario_id: r.scenario,
            sector: &r.sector,
            residual: r.residual,
        }),
    )
}

/// Everything the batch reports contain, computed from the ledgers alone.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchAnalysis {
    pub summaries: Vec<ChannelSummary>,
    pub records: Vec<AmplificationRecord>,
    /// `None` when no amplification ratio is defined.
    pub amplification: Option<AmplificationStats>,
    pub fits: FitsReport,
}

/// Risk measures, amplification statistics, regressions and Welch tests of
/// a batch. `connected[k]` tells whether bank `k` takes part in the
/// interbank network; amplification needs both regimes.
pub fn analyse_batch(
    banks: &[Bank],
    ledgers: &[&BankLossLedger],
    connected: &[bool],
    regimes: Regimes,
) -> Result<BatchAnalysis> {
    let total: f64 = banks.iter().map(|b| b.tier1_equity).sum();
    let weights: Vec<f64> = banks.iter().map(|b| b.tier1_equity / total).collect();
    let summaries = summarize(ledgers, &weights, regimes)?;
    if regimes != Regimes::Both {
        return Ok(BatchAnalysis {
            summaries,
            records: Vec::new(),
            amplification: None,
            fits: FitsReport::default(),
        });
    }

    let records = amplification_records(ledgers);
    let amplification = match ib_amplification(&records) {
        Ok(stats) => Some(stats),
        Err(e) => {
            log::warn!("{e}");
            None
        }
    };
    let system = |regime: Regime, channel: Channel| -> Vec<f64> {
        ledgers
            .iter()
            .map(|l| channel.system_loss(l, &weights, regime))
            .collect()
    };
    let pairs = [
        ((Regime::W, Channel::Di), (Regime::W, Channel::DiSc)),
        ((Regime::W, Channel::DiSc), (Regime::W, Channel::DiScIb)),
        ((Regime::Wo, Channel::DiIb), (Regime::W, Channel::DiScIb)),
    ];
    let mut welch = Vec::new();
    for ((ra, ca), (rb, cb)) in pairs {
        let name = |r: Regime, c: Channel| format!("system/{}/{}", r.as_str(), c.as_str());
        match welch_test(&system(ra, ca), &system(rb, cb)) {
            Ok(test) => welch.push(NamedWelch {
                a: name(ra, ca),
                b: name(rb, cb),
                test,
            }),
            Err(e) => log::debug!("welch test skipped: {e}"),
        }
    }
    let undefined = records.iter().filter(|r| r.ratio.is_none()).count();
    let fits = FitsReport::new(banks, amplification_fits(&records, connected), welch, undefined);
    Ok(BatchAnalysis {
        summaries,
        records,
        amplification,
        fits,
    })
}

/// Writes `risk_summary.csv`, `ledgers.csv` and, with both regimes,
/// `amplification.csv`, `fits.json` and `ccdf.csv` into `dir`. Returns the
/// names of the files written.
pub fn write_batch_reports(
    dir: &Path,
    banks: &[Bank],
    ledgers: &[&BankLossLedger],
    analysis: &BatchAnalysis,
) -> Result<Vec<&'static str>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = vec![RISK_SUMMARY, LEDGERS];
    write_risk_summary(&dir.join(RISK_SUMMARY), banks, &analysis.summaries)?;
    write_ledgers(&dir.join(LEDGERS), banks, ledgers)?;
    if !analysis.records.is_empty() {
        write_amplification(&dir.join(AMPLIFICATION), banks, &analysis.records)?;
        write_json(&dir.join(FITS), &analysis.fits)?;
        let pooled = analysis
            .amplification
            .as_ref()
            .map(|a| a.pooled_ccdf.as_slice())
            .unwrap_or(&[]);
        write_ccdf(&dir.join(CCDF), &[("amplification", pooled)])?;
        written.extend([AMPLIFICATION, FITS, CCDF]);
    }
    Ok(written)
}
