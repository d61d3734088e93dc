//! Run configuration. One TOML file; command-line flags override it.
//!
//! Relative paths inside the file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chainstress::debtrank::DebtRankConfig;
use chainstress::model::SyntheticConfig;
use chainstress::{PipelineConfig, PropagationConfig, Regimes};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Sections without a seed of their own use it.
    pub seed: u64,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub regime: Regimes,
    pub trace: bool,
    pub economy: EconomySection,
    pub scenarios: ScenarioSpec,
    pub propagation: PropagationSection,
    pub debtrank: DebtRankSection,
    pub report: ReportSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomySection {
    /// Directory holding firms.csv, supply.csv, interbank.csv, loans.csv and
    /// banks.csv.
    pub dir: Option<PathBuf>,
    pub synthetic: Option<SyntheticConfig>,
    pub seed: Option<u64>,
    /// Overrides the loss given default of the loan book.
    pub lgd: Option<f64>,
    /// Replace the interbank network by one with uniform random leverage.
    pub random_interbank: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScenarioSpec {
    /// Every firm fails alone, one scenario per firm.
    #[default]
    SingleFirm,
    /// Resampled firm shocks matching empirical sector aggregates.
    Covid {
        count: usize,
        #[serde(default)]
        seed: Option<u64>,
        /// `empirical_shocks.csv`; defaults to the one next to the economy,
        /// or a synthetic table for synthetic economies.
        #[serde(default)]
        shocks: Option<PathBuf>,
        /// Share of firms observed in a synthetic shock table.
        #[serde(default = "default_coverage")]
        coverage: f64,
    },
    /// Long-format `scenario_id,firm_id,psi` file.
    File { path: PathBuf },
}

fn default_coverage() -> f64 {
    0.6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationSection {
    pub epsilon: f64,
    pub max_iter: usize,
    pub substitutability: f64,
    /// Overrides the economy's essentiality table.
    pub essentiality: Option<PathBuf>,
}

impl Default for PropagationSection {
    fn default() -> Self {
        let p = PropagationConfig::default();
        PropagationSection {
            epsilon: p.epsilon,
            max_iter: p.max_iter,
            substitutability: p.substitutability,
            essentiality: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DebtRankSection {
    pub epsilon: f64,
    pub max_iter: usize,
    pub min_rounds: usize,
    /// Gaussian bank-shock study for the `debtrank` command.
    pub gaussian: Option<GaussianSection>,
}

impl Default for DebtRankSection {
    fn default() -> Self {
        let d = DebtRankConfig::default();
        DebtRankSection {
            epsilon: d.epsilon,
            max_iter: d.max_iter,
            min_rounds: d.min_rounds,
            gaussian: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSection {
    /// `ledgers.csv` of an earlier stress run supplying means and variances.
    pub reference: PathBuf,
    pub count: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// `ledgers.csv` to recompute statistics from.
    pub ledgers: Option<PathBuf>,
}

/// Seeds actually used, after defaults were filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Seeds {
    pub master: u64,
    pub economy: u64,
    pub scenarios: u64,
    pub gaussian: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.out.as_mut().map(fix);
        self.economy.dir.as_mut().map(fix);
        self.propagation.essentiality.as_mut().map(fix);
        self.report.ledgers.as_mut().map(fix);
        if let Some(g) = &mut self.debtrank.gaussian {
            fix(&mut g.reference);
        }
        match &mut self.scenarios {
            ScenarioSpec::Covid { shocks: Some(p), .. } | ScenarioSpec::File { path: p } => fix(p),
            _ => {}
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.economy.dir.is_some() && self.economy.synthetic.is_some() {
            bail!("economy: give either `dir` or `synthetic`, not both");
        }
        if self.workers == Some(0) {
            bail!("workers must be at least 1");
        }
        if let ScenarioSpec::Covid { count: 0, .. } = self.scenarios {
            bail!("scenarios: count must be at least 1");
        }
        if let Some(lgd) = self.economy.lgd {
            if !(lgd > 0.0 && lgd <= 1.0) {
                bail!("economy: lgd must lie in (0, 1]");
            }
        }
        self.pipeline().propagation.check()?;
        Ok(())
    }

    pub fn seeds(&self) -> Seeds {
        let scenarios = match self.scenarios {
            ScenarioSpec::Covid { seed: Some(s), .. } => s,
            _ => self.seed,
        };
        Seeds {
            master: self.seed,
            economy: self.economy.seed.unwrap_or(self.seed),
            scenarios,
            gaussian: self
                .debtrank
                .gaussian
                .as_ref()
                .and_then(|g| g.seed)
                .unwrap_or(self.seed),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn debtrank_config(&self) -> DebtRankConfig {
        DebtRankConfig {
            epsilon: self.debtrank.epsilon,
            max_iter: self.debtrank.max_iter,
            min_rounds: self.debtrank.min_rounds,
            record_trace: false,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            propagation: PropagationConfig {
                epsilon: self.propagation.epsilon,
                max_iter: self.propagation.max_iter,
                enabled: true,
                substitutability: self.propagation.substitutability,
                record_trajectory: false,
            },
            debtrank: self.debtrank_config(),
            regimes: self.regime,
            keep_defaults: false,
        }
    }
}
