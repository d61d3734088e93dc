//! Shock inputs: single-firm failures, sector-consistent resampled firm
//! shocks, Gaussian bank-loss seeds and random interbank networks.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{read_rows, sector_prefix, Economy, InterbankEdge, InterbankNetwork};
use crate::propagation::ShockVector;

pub use crate::propagation::single_firm_shock;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SingleFirm,
    CovidStyle,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockBatch {
    pub scenarios: Vec<ShockVector>,
    pub seed: u64,
    pub provenance: Provenance,
}

impl ShockBatch {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// One single-firm failure per firm, in firm order.
    pub fn single_firm_sweep(n: usize) -> Self {
        ShockBatch {
            scenarios: (0..n)
                .map(|j| single_firm_shock(n, j).expect("index in range"))
                .collect(),
            seed: 0,
            provenance: Provenance::SingleFirm,
        }
    }

    /// Long format `(scenario_id, firm_id, psi)`.
    pub fn write_csv(&self, g: &Economy, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut body = String::from("scenario_id,firm_id,psi\n");
        for (s, psi) in self.scenarios.iter().enumerate() {
            for (firm, v) in g.firms.iter().zip(psi.as_slice()) {
                body.push_str(&format!("{s},{},{v}\n", firm.id));
            }
        }
        out.write_all(body.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads a long-format batch. Firms absent from a scenario are unshocked.
    pub fn read_csv(g: &Economy, path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            scenario_id: usize,
            firm_id: String,
            psi: f64,
        }
        let index: HashMap<&str, usize> = g
            .firms
            .iter()
            .enumerate()
            .map(|(i, f)| (f.id.as_str(), i))
            .collect();
        let mut scenarios: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (line, row) in read_rows::<Row>(path)? {
            let i = *index.get(row.firm_id.as_str()).ok_or_else(|| Error::UnknownId {
                path: path.to_path_buf(),
                line,
                kind: "firm",
                id: row.firm_id.clone(),
            })?;
            if !(0.0..=1.0).contains(&row.psi) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("psi {} outside [0, 1]", row.psi),
                });
            }
            scenarios
                .entry(row.scenario_id)
                .or_insert_with(|| vec![1.0; g.n_firms()])[i] = row.psi;
        }
        Ok(ShockBatch {
            scenarios: scenarios
                .into_values()
                .map(ShockVector::new)
                .collect::<Result<_>>()?,
            seed: 0,
            provenance: Provenance::Custom,
        })
    }
}

/// Observed relative production reduction per firm, `None` where no
/// observation exists. Aligned with the economy's firm order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalShockTable {
    pub reductions: Vec<Option<f64>>,
}

impl EmpiricalShockTable {
    pub fn new(reductions: Vec<Option<f64>>) -> Result<Self> {
        if let Some(v) = reductions
            .iter()
            .flatten()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidParameter(format!(
                "reduction {v} outside [0, 1]"
            )));
        }
        Ok(EmpiricalShockTable { reductions })
    }

    pub fn read_csv(g: &Economy, path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            firm_id: String,
            reduction: f64,
        }
        let mut reductions = vec![None; g.n_firms()];
        for (line, row) in read_rows::<Row>(path)? {
            let i = g.firm_index(&row.firm_id).ok_or_else(|| Error::UnknownId {
                path: path.to_path_buf(),
                line,
                kind: "firm",
                id: row.firm_id.clone(),
            })?;
            if !(0.0..=1.0).contains(&row.reduction) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("reduction {} outside [0, 1]", row.reduction),
                });
            }
            reductions[i] = Some(row.reduction);
        }
        Ok(EmpiricalShockTable { reductions })
    }

    pub fn write_csv(&self, g: &Economy, path: &Path) -> Result<()> {
        let mut body = String::from("firm_id,reduction\n");
        for (firm, r) in g.firms.iter().zip(&self.reductions) {
            if let Some(r) = r {
                body.push_str(&format!("{},{r}\n", firm.id));
            }
        }
        std::fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

/// A stand-in for observed employment reductions: per two-digit sector a
/// typical reduction, per firm an exponential draw around it with some
/// unaffected firms and some full closures. Every sector gets at least one
/// observed firm.
pub fn synthetic_shock_table(g: &Economy, coverage: f64, seed: u64) -> Result<EmpiricalShockTable> {
    if !(0.0..=1.0).contains(&coverage) {
        return Err(Error::InvalidParameter("coverage must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sector_mean: BTreeMap<&str, f64> = BTreeMap::new();
    for f in &g.firms {
        sector_mean.entry(f.sector2()).or_insert(0.0);
    }
    for v in sector_mean.values_mut() {
        *v = rng.random_range(0.03..0.25);
    }
    let mut covered: BTreeMap<&str, bool> = sector_mean.keys().map(|s| (*s, false)).collect();
    let mut reductions = Vec::with_capacity(g.n_firms());
    for f in &g.firms {
        let s = f.sector2();
        let first = !covered[s];
        if !first && rng.random::<f64>() >= coverage {
            reductions.push(None);
            continue;
        }
        covered.insert(s, true);
        let u: f64 = rng.random();
        let r = if u < 0.3 {
            0.0
        } else if u < 0.33 {
            1.0
        } else {
            let mean = sector_mean[s];
            Exp::new(1.0 / mean).unwrap().sample(&mut rng).min(1.0)
        };
        reductions.push(Some(r));
    }
    EmpiricalShockTable::new(reductions)
}

/// A sector whose aggregate could not be matched after clipping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRecord {
    pub scenario: usize,
    pub sector: String,
    /// Target minus realized output-weighted aggregate reduction.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovidBatch {
    pub batch: ShockBatch,
    /// Empirical output-weighted reduction per two-digit sector.
    pub targets: BTreeMap<String, f64>,
    pub residuals: Vec<ResidualRecord>,
}

impl CovidBatch {
    /// Share of (scenario, sector) pairs that hit the clipping residual path.
    pub fn residual_share(&self) -> f64 {
        let cells = self.batch.len() * self.targets.len();
        if cells == 0 {
            0.0
        } else {
            self.residuals.len() as f64 / cells as f64
        }
    }
}

const MAX_REDISTRIBUTIONS: usize = 10;

struct SectorPlan {
    code: String,
    firms: Vec<usize>,
    weights: Vec<f64>,
    target: f64,
}

/// Output-weighted mean of `x` over the members of one sector, with equal
/// weights if the sector has no output at all.
pub fn weighted_aggregate(x: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        x.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total
    } else if x.is_empty() {
        0.0
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

/// Rescales reductions so their weighted mean equals `target`, clipping at 1
/// and pushing the clipped-off mass onto the unclipped members. Returns the
/// remaining residual (target minus achieved).
fn rescale(x: &mut [f64], weights: &[f64], target: f64) -> f64 {
    let equal;
    let weights = if weights.iter().sum::<f64>() > 0.0 {
        weights
    } else {
        equal = vec![1.0; x.len()];
        &equal
    };
    let total: f64 = weights.iter().sum();
    let wanted = target * total;
    let mass = |x: &[f64]| x.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>();

    let current = mass(x);
    if current > 0.0 {
        let factor = wanted / current;
        x.iter_mut().for_each(|v| *v *= factor);
    } else {
        x.iter_mut().for_each(|v| *v = target);
    }

    for _ in 0..MAX_REDISTRIBUTIONS {
        x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        let shortfall = wanted - mass(x);
        if shortfall.abs() <= 1e-13 * total {
            break;
        }
        let open: f64 = x
            .iter()
            .zip(weights)
            .filter(|(v, _)| **v < 1.0)
            .map(|(v, w)| v * w)
            .sum();
        if open > 0.0 {
            let factor = 1.0 + shortfall / open;
            x.iter_mut().filter(|v| **v < 1.0).for_each(|v| *v *= factor);
        } else {
            let room: f64 = x
                .iter()
                .zip(weights)
                .filter(|(v, _)| **v < 1.0)
                .map(|(_, w)| w)
                .sum();
            if room <= 0.0 {
                break;
            }
            let step = shortfall / room;
            x.iter_mut().filter(|v| **v < 1.0).for_each(|v| *v += step);
        }
    }
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    (wanted - mass(x)) / total
}

/// Resampled firm-level shocks whose output-weighted reduction per
/// two-digit sector equals the empirical one.
///
/// Each firm with an observation draws from its sector's observations; firms
/// without one draw from their four-digit peers, falling back to the
/// two-digit sector. The draws are then rescaled per sector. Scenario `s`
/// uses its own random stream, so results do not depend on generation order.
pub fn covid_style_batch(
    g: &Economy,
    table: &EmpiricalShockTable,
    weights: &[f64],
    count: usize,
    seed: u64,
) -> Result<CovidBatch> {
    let n = g.n_firms();
    if count == 0 {
        return Err(Error::InvalidParameter("batch needs at least one scenario".into()));
    }
    if table.reductions.len() != n || weights.len() != n {
        return Err(Error::InvalidParameter(
            "shock table and weights must cover every firm".into(),
        ));
    }

    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut pool2: HashMap<&str, Vec<f64>> = HashMap::new();
    let mut pool4: HashMap<&str, Vec<f64>> = HashMap::new();
    for (i, f) in g.firms.iter().enumerate() {
        members.entry(f.sector2()).or_default().push(i);
        if let Some(r) = table.reductions[i] {
            pool2.entry(f.sector2()).or_default().push(r);
            pool4.entry(f.sector.as_str()).or_default().push(r);
        }
    }

    let mut plans = Vec::with_capacity(members.len());
    for (code, firms) in members {
        let observed: Vec<usize> = firms
            .iter()
            .copied()
            .filter(|&i| table.reductions[i].is_some())
            .collect();
        if observed.is_empty() {
            return Err(Error::EmptySector(code.to_string()));
        }
        let x: Vec<f64> = observed.iter().map(|&i| table.reductions[i].unwrap()).collect();
        let w: Vec<f64> = observed.iter().map(|&i| weights[i]).collect();
        plans.push(SectorPlan {
            code: code.to_string(),
            weights: firms.iter().map(|&i| weights[i]).collect(),
            firms,
            target: weighted_aggregate(&x, &w),
        });
    }

    let mut scenarios = Vec::with_capacity(count);
    let mut residuals = Vec::new();
    for s in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        let mut psi = vec![1.0; n];
        for plan in &plans {
            let mut x: Vec<f64> = plan
                .firms
                .iter()
                .map(|&i| {
                    let firm = &g.firms[i];
                    let pool = match table.reductions[i] {
                        Some(_) => &pool2[firm.sector2()],
                        None => pool4
                            .get(firm.sector.as_str())
                            .unwrap_or(&pool2[firm.sector2()]),
                    };
                    pool[rng.random_range(0..pool.len())]
                })
                .collect();
            let residual = rescale(&mut x, &plan.weights, plan.target);
            if residual.abs() > 1e-9 {
                log::warn!(
                    "scenario {s}: sector {} misses its aggregate by {residual:e} after clipping",
                    plan.code
                );
                residuals.push(ResidualRecord {
                    scenario: s,
                    sector: plan.code.clone(),
                    residual,
                });
            }
            for (&i, r) in plan.firms.iter().zip(&x) {
                psi[i] = 1.0 - r;
            }
        }
        scenarios.push(ShockVector::new(psi)?);
    }

    Ok(CovidBatch {
        batch: ShockBatch {
            scenarios,
            seed,
            provenance: Provenance::CovidStyle,
        },
        targets: plans.into_iter().map(|p| (p.code, p.target)).collect(),
        residuals,
    })
}

/// Realized output-weighted reduction per two-digit sector of one scenario.
pub fn sector_aggregates(g: &Economy, psi: &ShockVector, weights: &[f64]) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, f) in g.firms.iter().enumerate() {
        let entry = groups.entry(sector_prefix(&f.sector)).or_default();
        entry.0.push(1.0 - psi[i]);
        entry.1.push(weights[i]);
    }
    groups
        .into_iter()
        .map(|(s, (x, w))| (s.to_string(), weighted_aggregate(&x, &w)))
        .collect()
}

/// Independent per-bank normal draws matching each bank's mean and sample
/// standard deviation in `reference` (rows are samples, columns banks),
/// floored at zero.
pub fn gaussian_bank_seed_batch(reference: &[Vec<f64>], count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if reference.len() < 2 {
        return Err(Error::Degenerate(
            "need at least two reference samples per bank".into(),
        ));
    }
    let m = reference[0].len();
    if reference.iter().any(|row| row.len() != m) {
        return Err(Error::InvalidParameter("ragged reference samples".into()));
    }
    let count_f = reference.len() as f64;
    let mut dists = Vec::with_capacity(m);
    for k in 0..m {
        let mean = reference.iter().map(|r| r[k]).sum::<f64>() / count_f;
        let var = reference.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (count_f - 1.0);
        if !(mean.is_finite() && var.is_finite()) {
            return Err(Error::Degenerate(format!("bank #{k} has non-finite moments")));
        }
        dists.push(Normal::new(mean, var.sqrt()).map_err(|e| Error::Degenerate(e.to_string()))?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| dists.iter().map(|d| d.sample(&mut rng).max(0.0)).collect())
        .collect())
}

/// Complete random interbank network with leverage entries drawn uniformly
/// from `(0, 0.05)`; amounts follow from the given equities.
pub fn random_interbank_network(equities: &[f64], seed: u64) -> InterbankNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = equities.len();
    let mut edges = Vec::with_capacity(m * m.saturating_sub(1));
    for borrower in 0..m {
        for lender in 0..m {
            if borrower == lender {
                continue;
            }
            let mut lambda = 0.0;
            while lambda <= 0.0 {
                lambda = rng.random_range(0.0..0.05);
            }
            edges.push(InterbankEdge {
                borrower,
                lender,
                amount: lambda * equities[lender],
            });
        }
    }
    InterbankNetwork { edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Firm;

    fn sector_economy(sectors: &[&str]) -> Economy {
        Economy {
            firms: sectors
                .iter()
                .enumerate()
                .map(|(i, s)| Firm::without_financials(format!("f{i}"), *s))
                .collect(),
            supply: Default::default(),
            banks: Vec::new(),
            interbank: Default::default(),
            loans: Default::default(),
            final_demand: None,
        }
    }

    #[test]
    fn single_firm_shock_zeroes_one_entry() {
        let psi = single_firm_shock(6, 5).unwrap();
        assert_eq!(psi.as_slice(), &[1.0, 1.0, 1.0, 1.0, 1.0, 0.0]);
        assert_eq!(single_firm_shock(1, 0).unwrap().as_slice(), &[0.0]);
        assert_eq!(single_firm_shock(6, 2).unwrap(), single_firm_shock(6, 2).unwrap());
    }

    #[test]
    fn three_firm_sector_matches_hand_aggregate() {
        // Observations 0.1 (weight 1), 0.4 (weight 2): aggregate 0.9 / 3 = 0.3.
        let g = sector_economy(&["0101", "0101", "0102"]);
        let table = EmpiricalShockTable::new(vec![Some(0.1), Some(0.4), None]).unwrap();
        let weights = [1.0, 2.0, 3.0];
        for seed in 0..100 {
            let out = covid_style_batch(&g, &table, &weights, 1, seed).unwrap();
            assert!((out.targets["01"] - 0.3).abs() < 1e-15);
            let agg = sector_aggregates(&g, &out.batch.scenarios[0], &weights);
            assert!((agg["01"] - 0.3).abs() < 1e-12, "seed {seed}: {}", agg["01"]);
        }
    }

    #[test]
    fn zero_reductions_give_unshocked_scenarios() {
        let g = sector_economy(&["0101", "0201", "0202"]);
        let table = EmpiricalShockTable::new(vec![Some(0.0), Some(0.0), None]).unwrap();
        let out = covid_style_batch(&g, &table, &[1.0, 1.0, 1.0], 5, 3).unwrap();
        for psi in &out.batch.scenarios {
            assert_eq!(psi.as_slice(), &[1.0, 1.0, 1.0]);
        }
    }

    #[test]
    fn sector_without_observations_is_an_error() {
        let g = sector_economy(&["0101", "0201"]);
        let table = EmpiricalShockTable::new(vec![Some(0.2), None]).unwrap();
        match covid_style_batch(&g, &table, &[1.0, 1.0], 1, 0) {
            Err(Error::EmptySector(s)) => assert_eq!(s, "02"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rescale_redistributes_clipped_mass() {
        let mut x = vec![0.9, 0.1, 0.1];
        let residual = rescale(&mut x, &[1.0, 1.0, 1.0], 0.6);
        assert!(residual.abs() < 1e-12);
        assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!((x.iter().sum::<f64>() / 3.0 - 0.6).abs() < 1e-12);
        assert_eq!(x[0], 1.0);
    }

    #[test]
    fn rescale_handles_saturated_and_weightless_members() {
        let mut x = vec![1.0, 0.0];
        let residual = rescale(&mut x, &[1.0, 0.0], 1.0);
        assert!(residual.abs() < 1e-12);
        let mut x = vec![0.5];
        assert!(rescale(&mut x, &[1.0], 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_constant_reference_reproduces_constant() {
        let reference = vec![vec![0.2, 0.0]; 5];
        let draws = gaussian_bank_seed_batch(&reference, 10, 1).unwrap();
        assert!(draws.iter().all(|d| d == &vec![0.2, 0.0]));
        assert!(gaussian_bank_seed_batch(&reference[..1], 10, 1).is_err());
    }

    #[test]
    fn random_interbank_network_shape() {
        assert!(random_interbank_network(&[10.0], 1).edges.is_empty());
        let eq: Vec<f64> = (1..=19).map(|k| k as f64 * 10.0).collect();
        let net = random_interbank_network(&eq, 4);
        assert_eq!(net.edges.len(), 19 * 18);
        for (b, l, lambda) in net.leverage(&eq) {
            assert_ne!(b, l);
            assert!(lambda > 0.0 && lambda < 0.05);
        }
        assert_eq!(net, random_interbank_network(&eq, 4));
    }
}
