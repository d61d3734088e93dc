use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chainstress::credit::BankLossLedger;
use chainstress::debtrank::{trace_rows, DebtRankConfig};
use chainstress::metrics::{amplification_fits, amplification_records, fsri_profile, ib_amplification, run_batch};
use chainstress::model::{
    exposure_ratio, generate_synthetic_economy, read_economy, read_essentiality, validate_economy, write_economy,
    Economy, EconomyFiles,
};
use chainstress::propagation::trajectory_rows;
use chainstress::report::{self, analyse_batch, read_ledgers, write_batch_reports, FitsReport};
use chainstress::scenario::{covid_style_batch, random_interbank_network, synthetic_shock_table, EmpiricalShockTable, ShockBatch};
use chainstress::{Engine, Runner};

use crate::config::{RunConfig, ScenarioSpec, Seeds};
use crate::manifest::{Convergence, InputFile};

const ECONOMY_FILES: [&str; 6] = [
    "firms.csv",
    "supply.csv",
    "interbank.csv",
    "loans.csv",
    "banks.csv",
    "essentiality.csv",
];
const EMPIRICAL_SHOCKS: &str = "empirical_shocks.csv";
const SCENARIOS: &str = "scenarios.csv";
const TRAJECTORY: &str = "trajectory.csv";

/// State of one invocation; `main` turns it into the manifest.
pub struct Run {
    pub cfg: RunConfig,
    pub seeds: Seeds,
    pub runner: Runner,
    pub out: PathBuf,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<String>,
    pub convergence: Option<Convergence>,
    /// Validation found problems but the command itself completed.
    pub invalid: bool,
}

impl Run {
    pub fn new(cfg: RunConfig) -> Self {
        let runner = match cfg.workers {
            Some(1) => Runner::sequential(),
            w => Runner::parallel(w),
        };
        Run {
            seeds: cfg.seeds(),
            out: cfg.out_dir(),
            runner,
            cfg,
            inputs: Vec::new(),
            outputs: Vec::new(),
            convergence: None,
            invalid: false,
        }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputFile::digest(path)?);
        Ok(())
    }

    fn out_path(&mut self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        self.outputs.push(name.to_string());
        Ok(self.out.join(name))
    }

    fn economy(&mut self) -> Result<Economy> {
        let section = self.cfg.economy.clone();
        let mut g = match (&section.dir, &section.synthetic) {
            (Some(dir), None) => {
                let mut files = EconomyFiles::in_dir(dir);
                if let Some(p) = &self.cfg.propagation.essentiality {
                    files.essentiality = Some(p.clone());
                }
                for p in [&files.firms, &files.supply, &files.interbank, &files.loans, &files.banks] {
                    self.input(p)?;
                }
                if let Some(p) = &files.essentiality {
                    self.input(p)?;
                }
                read_economy(&files)?
            }
            (None, Some(syn)) => {
                let mut g = generate_synthetic_economy(syn, self.seeds.economy)?;
                if let Some(p) = self.cfg.propagation.essentiality.clone() {
                    self.input(&p)?;
                    g.supply.essentiality = read_essentiality(&p)?;
                }
                g
            }
            _ => bail!("no economy configured: set `[economy] dir` or `[economy.synthetic]`"),
        };
        if let Some(lgd) = section.lgd {
            g.loans.lgd = lgd;
        }
        if section.random_interbank {
            g.interbank = random_interbank_network(&g.equities(), self.seeds.economy);
        }
        Ok(g)
    }

    fn shock_table(&mut self, g: &Economy, shocks: &Option<PathBuf>, coverage: f64) -> Result<EmpiricalShockTable> {
        let path = shocks.clone().or_else(|| {
            let p = self.cfg.economy.dir.as_ref()?.join(EMPIRICAL_SHOCKS);
            p.exists().then_some(p)
        });
        match path {
            Some(p) => {
                self.input(&p)?;
                Ok(EmpiricalShockTable::read_csv(g, &p)?)
            }
            None if self.cfg.economy.synthetic.is_some() => {
                Ok(synthetic_shock_table(g, coverage, self.seeds.scenarios)?)
            }
            None => bail!("covid-style scenarios need an empirical shock table (`[scenarios] shocks`)"),
        }
    }

    fn batch(&mut self, g: &Economy) -> Result<ShockBatch> {
        match self.cfg.scenarios.clone() {
            ScenarioSpec::SingleFirm => Ok(ShockBatch::single_firm_sweep(g.n_firms())),
            ScenarioSpec::File { path } => {
                self.input(&path)?;
                Ok(ShockBatch::read_csv(g, &path)?)
            }
            ScenarioSpec::Covid {
                count,
                shocks,
                coverage,
                ..
            } => {
                let table = self.shock_table(g, &shocks, coverage)?;
                let covid = covid_style_batch(g, &table, &g.firm_output(), count, self.seeds.scenarios)?;
                if !covid.residuals.is_empty() {
                    report::write_residuals(&self.out_path(report::RESIDUALS)?, &covid.residuals)?;
                }
                Ok(covid.batch)
            }
        }
    }
}

/// Checks an economy and prints what it holds.
pub fn validate(run: &mut Run) -> Result<()> {
    let g = run.economy()?;
    println!(
        "{} firms, {} supply links, {} banks, {} interbank links, {} loans",
        g.n_firms(),
        g.supply.edges.len(),
        g.n_banks(),
        g.interbank.edges.len(),
        g.loans.entries.len()
    );
    match exposure_ratio(&g) {
        Ok(r) => println!("exposure ratio {:.4}", r.system),
        Err(e) => println!("exposure ratio undefined: {e}"),
    }
    let report = validate_economy(&g);
    if report.is_empty() {
        println!("no violations");
    } else {
        println!("{} violations:", report.len());
        print!("{report}");
        run.invalid = true;
    }
    Ok(())
}

/// Writes a synthetic economy, an empirical shock table for it and, for
/// covid-style scenario specs, the scenario batch.
pub fn generate(run: &mut Run) -> Result<()> {
    if run.cfg.economy.dir.is_some() {
        bail!("generate builds a synthetic economy; remove `[economy] dir`");
    }
    if run.cfg.economy.synthetic.is_none() {
        run.cfg.economy.synthetic = Some(Default::default());
    }
    let g = run.economy()?;
    let report = validate_economy(&g);
    if !report.is_empty() {
        eprint!("generated economy violates invariants:\n{report}");
        run.invalid = true;
    }
    std::fs::create_dir_all(&run.out).with_context(|| format!("creating {}", run.out.display()))?;
    write_economy(&g, &run.out)?;
    for name in ECONOMY_FILES {
        if run.out.join(name).exists() {
            run.outputs.push(name.to_string());
        }
    }
    let (coverage, count) = match run.cfg.scenarios {
        ScenarioSpec::Covid { coverage, count, .. } => (coverage, Some(count)),
        _ => (0.6, None),
    };
    let table = synthetic_shock_table(&g, coverage, run.seeds.scenarios)?;
    table.write_csv(&g, &run.out_path(EMPIRICAL_SHOCKS)?)?;
    if let Some(count) = count {
        let covid = covid_style_batch(&g, &table, &g.firm_output(), count, run.seeds.scenarios)?;
        covid.batch.write_csv(&g, &run.out_path(SCENARIOS)?)?;
        if !covid.residuals.is_empty() {
            report::write_residuals(&run.out_path(report::RESIDUALS)?, &covid.residuals)?;
        }
    }
    Ok(())
}

/// FSRI and FSRI+ of every firm.
pub fn fsri(run: &mut Run) -> Result<()> {
    let engine = Engine::new(run.economy()?)?;
    let cfg = run.cfg.pipeline();
    let profile = fsri_profile(&engine, &cfg, &run.runner)?;
    report::write_fsri_profile(&run.out_path(report::FSRI_PROFILE)?, &profile)?;
    report::write_ccdf(
        &run.out_path(report::CCDF)?,
        &[("fsri", &profile.ccdf_fsri), ("fsri_plus", &profile.ccdf_fsri_plus)],
    )?;
    let mut flags = vec![true; engine.n_firms()];
    for r in &profile.records {
        if let Some(i) = engine.economy().firm_index(&r.firm) {
            flags[i] = r.converged;
        }
    }
    run.convergence = Some(Convergence::from_flags(flags));

    if run.cfg.trace {
        let mut cfg = cfg;
        cfg.propagation.record_trajectory = true;
        let batch = ShockBatch::single_firm_sweep(engine.n_firms());
        let outcomes = run_batch(&engine, &batch, &cfg, &run.runner)?;
        write_trajectories(run, engine.economy(), &outcomes)?;
    }
    Ok(())
}

fn write_trajectories(run: &mut Run, g: &Economy, outcomes: &[chainstress::ScenarioOutcome]) -> Result<()> {
    let rows: Vec<(Option<usize>, Vec<(usize, usize, f64)>)> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(s, o)| o.profile.as_ref().map(|p| (Some(s), trajectory_rows(p))))
        .collect();
    let runs: Vec<(Option<usize>, &[(usize, usize, f64)])> = rows.iter().map(|(s, r)| (*s, r.as_slice())).collect();
    report::write_trajectory(&run.out_path(TRAJECTORY)?, g, &runs)?;
    Ok(())
}

/// Every scenario through the full pipeline, then the batch statistics.
pub fn stress(run: &mut Run) -> Result<()> {
    let engine = Engine::new(run.economy()?)?;
    let g = engine.economy();
    let batch = run.batch(g)?;
    let mut cfg = run.cfg.pipeline();
    cfg.keep_defaults = run.cfg.trace;
    cfg.propagation.record_trajectory = run.cfg.trace;
    log::info!("running {} scenarios", batch.len());
    let outcomes = run_batch(&engine, &batch, &cfg, &run.runner)?;
    run.convergence = Some(Convergence::from_flags(outcomes.iter().map(|o| o.converged())));

    let ledgers: Vec<&BankLossLedger> = outcomes.iter().map(|o| &o.ledger).collect();
    let connected: Vec<bool> = (0..g.n_banks())
        .map(|k| g.interbank.edges.iter().any(|e| e.borrower == k || e.lender == k))
        .collect();
    let analysis = analyse_batch(&g.banks, &ledgers, &connected, cfg.regimes)?;
    std::fs::create_dir_all(&run.out).with_context(|| format!("creating {}", run.out.display()))?;
    let written = write_batch_reports(&run.out, &g.banks, &ledgers, &analysis)?;
    run.outputs.extend(written.iter().map(|s| s.to_string()));

    if run.cfg.trace {
        report::write_defaults(&run.out_path(report::DEFAULTS)?, g, &outcomes)?;
        write_trajectories(run, g, &outcomes)?;
    }
    Ok(())
}

/// Bank-failure profile of the interbank network and, if configured, the
/// Gaussian bank-shock amplification study.
pub fn debtrank(run: &mut Run) -> Result<()> {
    let engine = Engine::new(run.economy()?)?;
    let g = engine.economy();
    let lev = engine.leverage();
    let dr = run.cfg.debtrank_config();
    let impacts = lev.profile(&dr)?;
    report::write_debtrank_profile(&run.out_path(report::DEBTRANK_PROFILE)?, &g.banks, &impacts)?;
    let mut flags: Vec<bool> = impacts.iter().map(|b| b.converged).collect();

    if run.cfg.trace {
        let traced = DebtRankConfig {
            record_trace: true,
            ..dr
        };
        for (k, bank) in g.banks.iter().enumerate() {
            let mut seed = vec![0.0; g.n_banks()];
            seed[k] = 1.0;
            let res = lev.run(&seed, &traced)?;
            let name = format!("debtrank_trace_{}.csv", bank.id);
            report::write_debtrank_trace(&run.out_path(&name)?, g, &trace_rows(&res))?;
        }
    }

    if let Some(gs) = run.cfg.debtrank.gaussian.clone() {
        run.input(&gs.reference)?;
        let dump = read_ledgers(&gs.reference)?;
        let ids: Vec<&str> = g.banks.iter().map(|b| b.id.as_str()).collect();
        if dump.bank_ids.iter().map(String::as_str).ne(ids.iter().copied()) {
            bail!(
                "{}: banks differ from the economy's banks",
                gs.reference.display()
            );
        }
        let di: Vec<Vec<f64>> = dump.ledgers.iter().map(|l| l.di.clone()).collect();
        let initial_w: Vec<Vec<f64>> = dump
            .ledgers
            .iter()
            .map(|l| (0..l.n_banks()).map(|k| l.initial_w(k)).collect())
            .collect();
        let seed = run.seeds.gaussian;
        let seeds_wo = chainstress::scenario::gaussian_bank_seed_batch(&di, gs.count, seed)?;
        let seeds_w = chainstress::scenario::gaussian_bank_seed_batch(&initial_w, gs.count, seed.wrapping_add(1))?;
        let pairs = run
            .runner
            .map(gs.count, |s| lev.run_pair(&seeds_wo[s], &seeds_w[s], &dr))
            .into_iter()
            .collect::<chainstress::Result<Vec<_>>>()?;
        flags.extend(pairs.iter().map(|(wo, w)| wo.converged && w.converged));
        let ledgers: Vec<BankLossLedger> = pairs
            .into_iter()
            .enumerate()
            .map(|(s, (wo, w))| BankLossLedger {
                di: seeds_wo[s].clone(),
                sc: seeds_w[s].iter().zip(&seeds_wo[s]).map(|(a, b)| a - b).collect(),
                ib_wo: wo.ib,
                ib_w: w.ib,
            })
            .collect();
        let refs: Vec<&BankLossLedger> = ledgers.iter().collect();
        let records = amplification_records(&refs);
        report::write_amplification(&run.out_path(report::AMPLIFICATION)?, &g.banks, &records)?;
        let pooled = match ib_amplification(&records) {
            Ok(stats) => stats.pooled_ccdf,
            Err(e) => {
                log::warn!("{e}");
                Vec::new()
            }
        };
        report::write_ccdf(&run.out_path(report::CCDF)?, &[("amplification", &pooled)])?;
        let connected: Vec<bool> = (0..g.n_banks())
            .map(|k| g.interbank.edges.iter().any(|e| e.borrower == k || e.lender == k))
            .collect();
        let undefined = records.iter().filter(|r| r.ratio.is_none()).count();
        let fits = FitsReport::new(&g.banks, amplification_fits(&records, &connected), Vec::new(), undefined);
        report::write_json(&run.out_path(report::FITS)?, &fits)?;
    }
    run.convergence = Some(Convergence::from_flags(flags));
    Ok(())
}

/// Recomputes the batch statistics from a dumped `ledgers.csv`.
pub fn report(run: &mut Run, ledgers: Option<PathBuf>) -> Result<()> {
    let path = ledgers
        .or_else(|| run.cfg.report.ledgers.clone())
        .context("report needs a ledgers file: pass it as an argument or set `[report] ledgers`")?;
    run.input(&path)?;
    let dump = read_ledgers(&path)?;
    let banks = dump.banks();
    let refs: Vec<&BankLossLedger> = dump.ledgers.iter().collect();
    // Without the network at hand, a bank counts as connected if it ever
    // takes an interbank loss.
    let connected: Vec<bool> = (0..banks.len())
        .map(|k| refs.iter().any(|l| l.ib_wo[k] != 0.0 || l.ib_w[k] != 0.0))
        .collect();
    let analysis = analyse_batch(&banks, &refs, &connected, run.cfg.regime)?;
    std::fs::create_dir_all(&run.out).with_context(|| format!("creating {}", run.out.display()))?;
    let written = write_batch_reports(&run.out, &banks, &refs, &analysis)?;
    run.outputs.extend(written.iter().map(|s| s.to_string()));
    Ok(())
}
