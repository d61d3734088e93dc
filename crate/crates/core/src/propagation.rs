//! Supply-chain shock propagation.
//!
//! Each round, a firm's production is capped by
//!
//! * the worst availability among its essential input sectors, where the
//!   availability of sector `s` to buyer `j` is the delivered-weight average
//!   of the suppliers' current production levels,
//! * optionally, the mean availability of its non-essential input sectors,
//!   blended in through the substitutability parameter,
//! * the delivered-weight average of its customers' production levels
//!   (firms without customers sell to final demand only and are not
//!   demand-constrained),
//! * its exogenous capacity and its own previous level.
//!
//! The last cap makes the trajectory non-increasing, so the stopping rule
//! `max_j (h_j(t-1) - h_j(t)) <= epsilon` is always reached eventually.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Economy;

/// Remaining production capacity per firm, each entry in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShockVector(Vec<f64>);

impl ShockVector {
    pub fn new(psi: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = psi
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidParameter(format!(
                "shock entry {i} = {v} outside [0, 1]"
            )));
        }
        Ok(ShockVector(psi))
    }

    pub fn unshocked(n: usize) -> Self {
        ShockVector(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for ShockVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagationConfig {
    pub epsilon: f64,
    pub max_iter: usize,
    /// `false` reproduces the regime without supply-chain contagion.
    pub enabled: bool,
    /// Weight of non-essential inputs in the downstream constraint, in `[0, 1]`.
    pub substitutability: f64,
    pub record_trajectory: bool,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            epsilon: 0.01,
            max_iter: 1000,
            enabled: true,
            substitutability: 0.0,
            record_trajectory: false,
        }
    }
}

impl PropagationConfig {
    pub fn disabled() -> Self {
        PropagationConfig {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.substitutability) {
            return Err(Error::InvalidParameter(
                "substitutability must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionProfile {
    pub h: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `h(t)` for `t = 1..=iterations`, starting with the shock itself.
    pub trajectory: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy)]
struct InputGroup {
    end: usize,
    total: f64,
    essential: bool,
}

/// Compressed adjacency of the supply network, grouped for the update rule.
#[derive(Debug, Clone)]
pub struct ProductionNetwork {
    n: usize,
    // Inputs of buyer j: groups[group_start[j]..group_start[j + 1]], each
    // covering a contiguous run of `in_edges` from one supplier sector.
    group_start: Vec<usize>,
    groups: Vec<InputGroup>,
    in_edges: Vec<(usize, f64)>,
    out_start: Vec<usize>,
    out_edges: Vec<(usize, f64)>,
    out_total: Vec<f64>,
    output: Vec<f64>,
}

impl ProductionNetwork {
    pub fn new(g: &Economy) -> Self {
        let n = g.n_firms();
        let ess = &g.supply.essentiality;

        let mut inputs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut outputs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for e in &g.supply.edges {
            inputs[e.buyer].push((e.supplier, e.weight));
            outputs[e.supplier].push((e.buyer, e.weight));
        }

        let mut group_start = Vec::with_capacity(n + 1);
        let mut groups = Vec::new();
        let mut in_edges = Vec::with_capacity(g.supply.edges.len());
        group_start.push(0);
        for (buyer, mut list) in inputs.into_iter().enumerate() {
            let sector = |i: usize| g.firms[i].sector.as_str();
            list.sort_by(|a, b| sector(a.0).cmp(sector(b.0)).then(a.0.cmp(&b.0)));
            let mut idx = 0;
            while idx < list.len() {
                let s = sector(list[idx].0);
                let mut total = 0.0;
                while idx < list.len() && sector(list[idx].0) == s {
                    total += list[idx].1;
                    in_edges.push(list[idx]);
                    idx += 1;
                }
                groups.push(InputGroup {
                    end: in_edges.len(),
                    total,
                    essential: ess.is_essential(s, &g.firms[buyer].sector),
                });
            }
            group_start.push(groups.len());
        }

        let mut out_start = Vec::with_capacity(n + 1);
        let mut out_edges = Vec::with_capacity(g.supply.edges.len());
        let mut out_total = Vec::with_capacity(n);
        out_start.push(0);
        for list in outputs {
            out_total.push(list.iter().map(|(_, w)| w).sum());
            out_edges.extend(list);
            out_start.push(out_edges.len());
        }

        ProductionNetwork {
            n,
            group_start,
            groups,
            in_edges,
            out_start,
            out_edges,
            out_total,
            output: g.firm_output(),
        }
    }

    pub fn n_firms(&self) -> usize {
        self.n
    }

    /// Total output per firm (intermediate sales plus final demand).
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    fn step(&self, h: &[f64], psi: &[f64], sigma: f64, next: &mut [f64]) {
        for j in 0..self.n {
            let mut essential = 1.0f64;
            let mut soft_sum = 0.0;
            let mut soft_count = 0usize;
            let mut begin = self.groups_begin(j);
            for group in &self.groups[self.group_start[j]..self.group_start[j + 1]] {
                let delivered: f64 = self.in_edges[begin..group.end]
                    .iter()
                    .map(|&(i, w)| w * h[i])
                    .sum();
                let availability = (delivered / group.total).clamp(0.0, 1.0);
                if group.essential {
                    essential = essential.min(availability);
                } else {
                    soft_sum += availability;
                    soft_count += 1;
                }
                begin = group.end;
            }
            let mut downstream = essential;
            if soft_count > 0 {
                downstream *= (1.0 - sigma) + sigma * soft_sum / soft_count as f64;
            }

            let upstream = if self.out_total[j] > 0.0 {
                let demanded: f64 = self.out_edges[self.out_start[j]..self.out_start[j + 1]]
                    .iter()
                    .map(|&(k, w)| w * h[k])
                    .sum();
                (demanded / self.out_total[j]).clamp(0.0, 1.0)
            } else {
                1.0
            };

            next[j] = psi[j].min(downstream).min(upstream).min(h[j]);
        }
    }

    fn groups_begin(&self, j: usize) -> usize {
        let first = self.group_start[j];
        if first == 0 {
            0
        } else {
            self.groups[first - 1].end
        }
    }

    /// Runs the shock through the network until the largest per-firm
    /// decrement falls to `epsilon` or below.
    pub fn propagate(&self, psi: &ShockVector, cfg: &PropagationConfig) -> Result<ProductionProfile> {
        cfg.check()?;
        if psi.len() != self.n {
            return Err(Error::InvalidParameter(format!(
                "shock has {} entries, economy has {} firms",
                psi.len(),
                self.n
            )));
        }
        let psi = psi.as_slice();
        if !cfg.enabled {
            return Ok(ProductionProfile {
                h: psi.to_vec(),
                iterations: 0,
                converged: true,
                trajectory: cfg.record_trajectory.then(|| vec![psi.to_vec()]),
            });
        }

        let mut h = psi.to_vec();
        let mut next = vec![0.0; self.n];
        let mut trajectory = cfg.record_trajectory.then(|| vec![h.clone()]);
        let mut converged = false;
        let mut iterations = 0;
        while iterations < cfg.max_iter {
            iterations += 1;
            self.step(&h, psi, cfg.substitutability, &mut next);
            let decrement = h
                .iter()
                .zip(&next)
                .map(|(old, new)| old - new)
                .fold(0.0f64, f64::max);
            std::mem::swap(&mut h, &mut next);
            if let Some(t) = trajectory.as_mut() {
                t.push(h.clone());
            }
            if decrement <= cfg.epsilon {
                converged = true;
                break;
            }
        }
        Ok(ProductionProfile {
            h,
            iterations,
            converged,
            trajectory,
        })
    }

    /// Share of total output lost when firm `i` stops producing.
    pub fn esri(&self, i: usize, cfg: &PropagationConfig) -> Result<f64> {
        let psi = single_firm_shock(self.n, i)?;
        let profile = self.propagate(&psi, cfg)?;
        let total: f64 = self.output.iter().sum();
        if total <= 0.0 {
            return Ok(0.0);
        }
        let lost: f64 = self
            .output
            .iter()
            .zip(&profile.h)
            .map(|(out, h)| out * (1.0 - h))
            .sum();
        Ok((lost / total).clamp(0.0, 1.0))
    }
}

/// Shock that stops firm `j` and leaves every other firm untouched.
pub fn single_firm_shock(n: usize, j: usize) -> Result<ShockVector> {
    if j >= n {
        return Err(Error::UnknownEntity {
            kind: "firm",
            id: j.to_string(),
        });
    }
    let mut psi = vec![1.0; n];
    psi[j] = 0.0;
    Ok(ShockVector(psi))
}

/// Long-format trajectory rows `(iteration, firm index, h)`.
pub fn trajectory_rows(profile: &ProductionProfile) -> Vec<(usize, usize, f64)> {
    let Some(traj) = &profile.trajectory else {
        return Vec::new();
    };
    traj.iter()
        .enumerate()
        .flat_map(|(t, h)| h.iter().enumerate().map(move |(i, v)| (t + 1, i, *v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Essentiality, Firm, SupplyEdge, SupplyNetwork};

    fn chain(weights: &[(usize, usize, f64)], n: usize) -> Economy {
        Economy {
            firms: (0..n)
                .map(|i| Firm::without_financials(format!("f{i}"), format!("{:02}01", i + 1)))
                .collect(),
            supply: SupplyNetwork {
                edges: weights
                    .iter()
                    .map(|&(supplier, buyer, weight)| SupplyEdge { supplier, buyer, weight })
                    .collect(),
                essentiality: Essentiality::all_essential(),
            },
            banks: Vec::new(),
            interbank: Default::default(),
            loans: Default::default(),
            final_demand: None,
        }
    }

    #[test]
    fn three_firm_chain_collapses() {
        // a -> b -> c, all inputs essential; stopping a starves b, then c.
        let g = chain(&[(0, 1, 5.0), (1, 2, 5.0)], 3);
        let net = ProductionNetwork::new(&g);
        let psi = single_firm_shock(3, 0).unwrap();
        let profile = net.propagate(&psi, &PropagationConfig::default()).unwrap();
        assert_eq!(profile.h, vec![0.0, 0.0, 0.0]);
        assert!(profile.converged);
        // t=1: b starved; t=2: c starved; t=3: no change.
        assert_eq!(profile.iterations, 3);
    }

    #[test]
    fn unshocked_economy_is_a_fixed_point() {
        let g = chain(&[(0, 1, 5.0), (1, 2, 5.0)], 3);
        let net = ProductionNetwork::new(&g);
        let p = net
            .propagate(&ShockVector::unshocked(3), &PropagationConfig::default())
            .unwrap();
        assert_eq!(p.h, vec![1.0; 3]);
        assert_eq!(p.iterations, 1);
    }

    #[test]
    fn disabled_propagation_returns_shock() {
        let g = chain(&[(0, 1, 5.0), (1, 2, 5.0)], 3);
        let net = ProductionNetwork::new(&g);
        let psi = ShockVector::new(vec![0.2, 1.0, 0.7]).unwrap();
        let p = net.propagate(&psi, &PropagationConfig::disabled()).unwrap();
        assert_eq!(p.h, psi.as_slice());
    }

    #[test]
    fn demand_loss_is_weighted_by_sales() {
        // Supplier 0 sells 3 to firm 1 and 1 to firm 2; firm 1 stops.
        let mut g = chain(&[(0, 1, 3.0), (0, 2, 1.0)], 3);
        g.supply.essentiality.default_essential = false;
        let net = ProductionNetwork::new(&g);
        let psi = single_firm_shock(3, 1).unwrap();
        let cfg = PropagationConfig {
            epsilon: 1e-12,
            ..Default::default()
        };
        let p = net.propagate(&psi, &cfg).unwrap();
        assert!((p.h[0] - 0.25).abs() < 1e-15);
        assert_eq!(p.h[2], 1.0);
    }

    #[test]
    fn substitutability_blends_non_essential_inputs() {
        // Buyer 2 draws non-essential inputs from two sectors; sector of firm 0 is stopped.
        let mut g = chain(&[(0, 2, 1.0), (1, 2, 1.0)], 3);
        g.supply.essentiality.default_essential = false;
        let net = ProductionNetwork::new(&g);
        let psi = ShockVector::new(vec![0.0, 1.0, 1.0]).unwrap();
        let strict = PropagationConfig {
            epsilon: 1e-12,
            substitutability: 0.5,
            record_trajectory: true,
            ..Default::default()
        };
        let p = net.propagate(&psi, &strict).unwrap();
        // First step: mean availability 0.5, blended 0.5 + 0.5 * 0.5. Later
        // steps also cut firm 1 through the lower demand of firm 2.
        let first = &p.trajectory.as_ref().unwrap()[1];
        assert!((first[2] - 0.75).abs() < 1e-15);
        assert!(p.h[2] < 0.75 && p.h[1] < 1.0);
        let loose = PropagationConfig { substitutability: 0.0, ..strict };
        assert_eq!(net.propagate(&psi, &loose).unwrap().h[2], 1.0);
    }

    #[test]
    fn inputs_are_pooled_within_sector() {
        // Two suppliers from the same sector feed firm 2 equally; one stops.
        let mut g = chain(&[(0, 2, 1.0), (1, 2, 1.0)], 3);
        g.firms[1].sector = g.firms[0].sector.clone();
        let net = ProductionNetwork::new(&g);
        let psi = ShockVector::new(vec![0.0, 1.0, 1.0]).unwrap();
        let cfg = PropagationConfig { epsilon: 0.6, ..Default::default() };
        let p = net.propagate(&psi, &cfg).unwrap();
        assert_eq!(p.h[2], 0.5);
    }

    #[test]
    fn esri_of_isolated_firm_is_its_output_share() {
        let mut g = chain(&[], 4);
        g.final_demand = Some(vec![10.0, 30.0, 60.0, 0.0]);
        let net = ProductionNetwork::new(&g);
        let cfg = PropagationConfig::default();
        assert!((net.esri(0, &cfg).unwrap() - 0.10).abs() < 1e-15);
        assert_eq!(net.esri(3, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(ShockVector::new(vec![0.5, 1.5]).is_err());
        assert!(single_firm_shock(3, 3).is_err());
        let g = chain(&[], 2);
        let net = ProductionNetwork::new(&g);
        let bad = PropagationConfig { epsilon: 0.0, ..Default::default() };
        assert!(net.propagate(&ShockVector::unshocked(2), &bad).is_err());
        assert!(net
            .propagate(&ShockVector::unshocked(3), &PropagationConfig::default())
            .is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let g = chain(&[(0, 1, 5.0), (1, 2, 5.0)], 3);
        let net = ProductionNetwork::new(&g);
        let cfg = PropagationConfig { max_iter: 1, ..Default::default() };
        let p = net.propagate(&single_firm_shock(3, 0).unwrap(), &cfg).unwrap();
        assert!(!p.converged);
        assert_eq!(p.iterations, 1);
    }

    #[test]
    fn trajectory_is_recorded_on_request() {
        let g = chain(&[(0, 1, 5.0)], 2);
        let net = ProductionNetwork::new(&g);
        let cfg = PropagationConfig { record_trajectory: true, ..Default::default() };
        let p = net.propagate(&single_firm_shock(2, 0).unwrap(), &cfg).unwrap();
        let rows = trajectory_rows(&p);
        assert_eq!(rows.len(), 2 * (p.iterations + 1));
        assert_eq!(rows[0], (1, 0, 0.0));
    }
}
