//! Model primitives: parameters, influence network, incentives, and rates.
//!
//! Each agent `i` carries a binary behavior bit (1 = responsible) and revises
//! it under conformity-driven imitation: the rate of copying a behavior is
//! the neighborhood average of (indicator of that behavior) times the
//! incentive its holders perceive. Incentives combine social influence,
//! a linear response `mu * eps` to the impact level, the cost of responsible
//! behavior `kappa` net of subsidies `sigma`, and awareness campaigns
//! `alpha`. The impact itself grows at rate `gamma * xbar0 - tau`, where
//! `xbar0` is the irresponsible fraction.

use crate::error::CoreError;
use crate::scalar::{s, Scalar};

/// The six model constants.
///
/// Construction enforces the parameter ranges (`gamma, tau, mu, kappa > 0`,
/// `alpha >= 0`, `0 <= sigma <= kappa`). The stability assumptions
/// (`tau < gamma`, `kappa > sigma + alpha + 1`) are *not* enforced here:
/// raw simulation is allowed outside them, analysis checks them via
/// [`validate_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<S: Scalar> {
    gamma: S,
    tau: S,
    mu: S,
    alpha: S,
    kappa: S,
    sigma: S,
}

impl<S: Scalar> ModelParams<S> {
    pub fn new(gamma: S, tau: S, mu: S, alpha: S, kappa: S, sigma: S) -> Result<Self, CoreError> {
        let check_pos = |name: &'static str, v: S| -> Result<(), CoreError> {
            if !(v > S::zero()) || !v.is_finite() {
                return Err(CoreError::InvalidParameter {
                    name,
                    value: v.to_f64().unwrap_or(f64::NAN),
                    constraint: "must be finite and > 0",
                });
            }
            Ok(())
        };
        check_pos("gamma", gamma)?;
        check_pos("tau", tau)?;
        check_pos("mu", mu)?;
        check_pos("kappa", kappa)?;
        if !(alpha >= S::zero()) || !alpha.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "alpha",
                value: alpha.to_f64().unwrap_or(f64::NAN),
                constraint: "must be finite and >= 0",
            });
        }
        if !(sigma >= S::zero() && sigma <= kappa) {
            return Err(CoreError::InvalidParameter {
                name: "sigma",
                value: sigma.to_f64().unwrap_or(f64::NAN),
                constraint: "must satisfy 0 <= sigma <= kappa",
            });
        }
        Ok(Self {
            gamma,
            tau,
            mu,
            alpha,
            kappa,
            sigma,
        })
    }

    /// Impact growth coefficient (per unit time).
    pub fn gamma(&self) -> S {
        self.gamma
    }
    /// Impact reduction rate (per unit time).
    pub fn tau(&self) -> S {
        self.tau
    }
    /// Response gain of the population to the impact level.
    pub fn mu(&self) -> S {
        self.mu
    }
    /// Awareness-campaign level.
    pub fn alpha(&self) -> S {
        self.alpha
    }
    /// Cost of responsible behavior.
    pub fn kappa(&self) -> S {
        self.kappa
    }
    /// Subsidy level (capped by `kappa` at construction).
    pub fn sigma(&self) -> S {
        self.sigma
    }

    /// Same parameters with a replaced campaign level.
    pub fn with_alpha(&self, alpha: S) -> Result<Self, CoreError> {
        Self::new(self.gamma, self.tau, self.mu, alpha, self.kappa, self.sigma)
    }

    /// Same parameters with a replaced subsidy level.
    pub fn with_sigma(&self, sigma: S) -> Result<Self, CoreError> {
        Self::new(self.gamma, self.tau, self.mu, self.alpha, self.kappa, sigma)
    }
}

/// Outcome of checking the two stability assumptions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssumptionReport {
    /// `tau < gamma`: impact grows when the whole population is irresponsible.
    pub growth_exceeds_reduction: bool,
    /// `kappa > sigma + alpha + 1`: at zero impact the irresponsible
    /// incentive dominates for every behavior mix.
    pub cost_dominates_at_zero_impact: bool,
    /// Human-readable diagnostics, one entry per failed condition.
    pub messages: Vec<String>,
}

impl AssumptionReport {
    /// True iff both conditions hold.
    pub fn both_hold(&self) -> bool {
        self.growth_exceeds_reduction && self.cost_dominates_at_zero_impact
    }
}

/// Check the stability assumptions `tau < gamma` and `kappa > sigma + alpha + 1`.
pub fn validate_assumptions<S: Scalar>(params: &ModelParams<S>) -> AssumptionReport {
    let growth = params.tau() < params.gamma();
    let cost = params.kappa() > params.sigma() + params.alpha() + S::one();
    let mut messages = Vec::new();
    if !growth {
        messages.push(format!(
            "tau = {} is not below gamma = {}",
            params.tau(),
            params.gamma()
        ));
    }
    if !cost {
        messages.push(format!(
            "kappa = {} is not above sigma + alpha + 1 = {}",
            params.kappa(),
            params.sigma() + params.alpha() + S::one()
        ));
    }
    AssumptionReport {
        growth_exceeds_reduction: growth,
        cost_dominates_at_zero_impact: cost,
        messages,
    }
}

/// Directed influence network.
///
/// `neighbors[i]` lists the nodes that influence `i` (the in-neighborhood).
/// Every node must have degree at least one because rates divide by it;
/// zero-degree nodes are rejected at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// All-to-all influence including self: every node is influenced by the
    /// entire population.
    pub fn complete(n: usize) -> Result<Self, CoreError> {
        if n == 0 {
            return Err(CoreError::InvalidGraph("empty population".into()));
        }
        let row: Vec<usize> = (0..n).collect();
        Ok(Self {
            n,
            neighbors: vec![row; n],
        })
    }

    /// Build from directed edges `(i, j)` meaning `j` influences `i`.
    /// Self-inclusion is the caller's choice via the edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, CoreError> {
        if n == 0 {
            return Err(CoreError::InvalidGraph("empty population".into()));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(CoreError::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for n = {n}"
                )));
            }
            neighbors[i].push(j);
        }
        for (i, nb) in neighbors.iter().enumerate() {
            if nb.is_empty() {
                return Err(CoreError::InvalidGraph(format!(
                    "node {i} has no influencers (degree zero)"
                )));
            }
        }
        Ok(Self { n, neighbors })
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-neighborhood of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// In-degree of node `i`.
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// True iff every node is influenced by the entire population
    /// (self included), which is what [`Graph::complete`] builds.
    pub fn is_complete_with_self(&self) -> bool {
        self.neighbors.iter().all(|nb| {
            nb.len() == self.n && {
                let mut sorted = nb.clone();
                sorted.sort_unstable();
                sorted.iter().enumerate().all(|(k, &v)| k == v)
            }
        })
    }
}

/// Binary behavior assignment for the population; entry 1 = responsible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorVector {
    bits: Vec<u8>,
}

impl BehaviorVector {
    pub fn new(bits: Vec<u8>) -> Result<Self, CoreError> {
        if bits.iter().any(|&b| b > 1) {
            return Err(CoreError::OutOfDomain(
                "behavior entries must be exactly 0 or 1".into(),
            ));
        }
        Ok(Self { bits })
    }

    pub fn all_zeros(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    pub fn all_ones(n: usize) -> Self {
        Self { bits: vec![1; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: u8) {
        debug_assert!(value <= 1);
        self.bits[i] = value;
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of responsible agents.
    pub fn ones_count(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Responsible fraction `xbar1`.
    pub fn fraction_responsible<S: Scalar>(&self) -> S {
        s::<S>(self.ones_count() as f64) / s::<S>(self.bits.len() as f64)
    }
}

/// Neighborhood average of the responsible bits around node `i`.
fn neighborhood_share<S: Scalar>(i: usize, x: &BehaviorVector, g: &Graph) -> S {
    let sum: S = g
        .neighbors(i)
        .iter()
        .map(|&j| s::<S>(x.bit(j) as f64))
        .sum();
    sum / s::<S>(g.degree(i) as f64)
}

/// Incentive pair `(iota1, iota0)` perceived by node `i`: for responsible
/// behavior, the responsible neighborhood share plus `mu * eps + alpha`;
/// for irresponsible behavior, the irresponsible share plus `kappa - sigma`.
pub fn node_incentives<S: Scalar>(
    i: usize,
    x: &BehaviorVector,
    eps: S,
    g: &Graph,
    params: &ModelParams<S>,
) -> (S, S) {
    let share = neighborhood_share::<S>(i, x, g);
    let iota1 = share + params.mu() * eps + params.alpha();
    let iota0 = (S::one() - share) + params.kappa() - params.sigma();
    (iota1, iota0)
}

/// Poisson-clock rate pair `(rho01, rho10)` for node `i`: imitation of each
/// behavior weighted by the incentive its neighborhood holders perceive.
pub fn node_rates<S: Scalar>(
    i: usize,
    x: &BehaviorVector,
    eps: S,
    g: &Graph,
    params: &ModelParams<S>,
) -> (S, S) {
    let mut to_responsible = S::zero();
    let mut to_irresponsible = S::zero();
    for &j in g.neighbors(i) {
        let (iota1, iota0) = node_incentives(j, x, eps, g, params);
        if x.bit(j) == 1 {
            to_responsible = to_responsible + iota1;
        } else {
            to_irresponsible = to_irresponsible + iota0;
        }
    }
    let d = s::<S>(g.degree(i) as f64);
    (to_responsible / d, to_irresponsible / d)
}

/// Impact growth/decay rate `gamma * xbar0 - tau` for an irresponsible
/// fraction `xbar0 in [0, 1]`.
pub fn growth_rate<S: Scalar>(xbar0: S, params: &ModelParams<S>) -> Result<S, CoreError> {
    if !(xbar0 >= S::zero() && xbar0 <= S::one()) {
        return Err(CoreError::OutOfDomain(format!(
            "irresponsible fraction {xbar0} not in [0, 1]"
        )));
    }
    Ok(params.gamma() * xbar0 - params.tau())
}

/// Macroscopic incentive pair under all-to-all influence: the neighborhood
/// shares collapse to the population fraction `x`.
pub fn mf_incentives<S: Scalar>(x: S, eps: S, params: &ModelParams<S>) -> (S, S) {
    let iota1 = x + params.mu() * eps + params.alpha();
    let iota0 = (S::one() - x) + params.kappa() - params.sigma();
    (iota1, iota0)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fig1() -> ModelParams<f64> {
        ModelParams::new(10.0, 0.1, 0.6, 0.3, 3.0, 0.6).unwrap()
    }

    #[test]
    fn construction_rejects_bad_ranges() {
        assert!(ModelParams::new(0.0, 0.1, 0.6, 0.3, 3.0, 0.6).is_err());
        assert!(ModelParams::new(10.0, -0.1, 0.6, 0.3, 3.0, 0.6).is_err());
        assert!(ModelParams::new(10.0, 0.1, 0.6, -0.3, 3.0, 0.6).is_err());
        // sigma above kappa
        assert!(ModelParams::new(10.0, 0.1, 0.6, 0.3, 3.0, 3.5).is_err());
        // sigma == kappa is allowed
        assert!(ModelParams::new(10.0, 0.1, 0.6, 0.3, 3.0, 3.0).is_ok());
    }

    #[test]
    fn assumptions_hold_at_fig1() {
        let report = validate_assumptions(&fig1());
        assert!(report.both_hold());
        assert!(report.messages.is_empty());
    }

    #[test]
    fn assumption_cost_fails_at_boundary_kappa() {
        // kappa = sigma + alpha + 1 exactly: strict inequality fails.
        let p = ModelParams::new(10.0, 0.1, 0.6, 0.3, 1.9, 0.6).unwrap();
        let report = validate_assumptions(&p);
        assert!(report.growth_exceeds_reduction);
        assert!(!report.cost_dominates_at_zero_impact);
        assert_eq!(report.messages.len(), 1);
    }

    #[test]
    fn assumption_growth_fails_at_boundary_tau() {
        let p = ModelParams::new(10.0, 10.0, 0.6, 0.3, 3.0, 0.6).unwrap();
        let report = validate_assumptions(&p);
        assert!(!report.growth_exceeds_reduction);
        assert!(report.cost_dominates_at_zero_impact);
    }

    #[test]
    fn complete_graph_includes_self() {
        let g = Graph::complete(3).unwrap();
        for i in 0..3 {
            assert_eq!(g.neighbors(i), &[0, 1, 2]);
            assert_eq!(g.degree(i), 3);
        }
        assert!(g.is_complete_with_self());
    }

    #[test]
    fn graph_rejects_zero_degree_and_bad_indices() {
        assert!(Graph::from_edges(2, &[(0, 1)]).is_err()); // node 1 isolated
        assert!(Graph::from_edges(2, &[(0, 1), (1, 2)]).is_err()); // index 2
        let g = Graph::from_edges(2, &[(0, 1), (1, 0)]).unwrap();
        assert!(!g.is_complete_with_self());
    }

    #[test]
    fn behavior_vector_rejects_non_binary() {
        assert!(BehaviorVector::new(vec![0, 1, 2]).is_err());
        let x = BehaviorVector::new(vec![1, 0, 1]).unwrap();
        assert_eq!(x.ones_count(), 2);
    }

    #[test]
    fn incentives_two_node_mixed_state() {
        // Complete n = 2, X = (1, 0), eps = 1: share = 1/2 for both nodes,
        // iota1 = 0.5 + 0.6 + 0.3 = 1.4, iota0 = 0.5 + 3 - 0.6 = 2.9.
        let g = Graph::complete(2).unwrap();
        let x = BehaviorVector::new(vec![1, 0]).unwrap();
        for i in 0..2 {
            let (i1, i0) = node_incentives(i, &x, 1.0, &g, &fig1());
            assert!((i1 - 1.4).abs() < 1e-15);
            assert!((i0 - 2.9).abs() < 1e-15);
        }
    }

    #[test]
    fn incentives_zero_and_saturated_states() {
        let g = Graph::complete(4).unwrap();
        let p = fig1();
        let zeros = BehaviorVector::all_zeros(4);
        let (i1, i0) = node_incentives(0, &zeros, 0.0, &g, &p);
        assert_eq!(i1, p.alpha());
        assert_eq!(i0, 1.0 + p.kappa() - p.sigma());

        let ones = BehaviorVector::all_ones(4);
        let (i1, i0) = node_incentives(2, &ones, 7.5, &g, &p);
        assert!((i1 - (1.0 + p.mu() * 7.5 + p.alpha())).abs() < 1e-15);
        assert!((i0 - (p.kappa() - p.sigma())).abs() < 1e-15);
    }

    #[test]
    fn rates_two_node_mixed_state() {
        // rho01 for the irresponsible node = (1/2)(1 * 1.4) = 0.7;
        // rho10 for the responsible node = (1/2)(1 * 2.9) = 1.45.
        let g = Graph::complete(2).unwrap();
        let x = BehaviorVector::new(vec![1, 0]).unwrap();
        let (rho01, _) = node_rates(1, &x, 1.0, &g, &fig1());
        let (_, rho10) = node_rates(0, &x, 1.0, &g, &fig1());
        assert!((rho01 - 0.7).abs() < 1e-15);
        assert!((rho10 - 1.45).abs() < 1e-15);
    }

    #[test]
    fn rates_vanish_at_absorbing_states() {
        let g = Graph::complete(5).unwrap();
        let p = fig1();
        let zeros = BehaviorVector::all_zeros(5);
        let ones = BehaviorVector::all_ones(5);
        for i in 0..5 {
            let (rho01, _) = node_rates(i, &zeros, 2.0, &g, &p);
            assert_eq!(rho01, 0.0);
            let (_, rho10) = node_rates(i, &ones, 2.0, &g, &p);
            assert_eq!(rho10, 0.0);
        }
    }

    #[test]
    fn rates_nonnegative_on_random_states() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 0)]).unwrap();
        let p = fig1();
        for mask in 0u8..16 {
            let bits: Vec<u8> = (0..4).map(|k| (mask >> k) & 1).collect();
            let x = BehaviorVector::new(bits).unwrap();
            for eps in [0.0, 0.3, 12.0] {
                for i in 0..4 {
                    let (r01, r10) = node_rates(i, &x, eps, &g, &p);
                    assert!(r01 >= 0.0 && r10 >= 0.0);
                }
            }
        }
    }

    #[test]
    fn growth_rate_examples() {
        let p = fig1();
        assert!((growth_rate(1.0, &p).unwrap() - 9.9).abs() < 1e-15);
        assert!((growth_rate(0.01, &p).unwrap()).abs() < 1e-15);
        assert!((growth_rate(0.0, &p).unwrap() + 0.1).abs() < 1e-15);
        assert!(growth_rate(1.5, &p).is_err());
        assert!(growth_rate(-0.1, &p).is_err());
    }

    #[test]
    fn growth_rate_is_affine() {
        let p = fig1();
        let r0 = growth_rate(0.0, &p).unwrap();
        let r1 = growth_rate(1.0, &p).unwrap();
        assert!((r1 - r0 - p.gamma()).abs() < 1e-15);
        assert!((r0 + p.tau()).abs() < 1e-15);
        let mid = growth_rate(0.37, &p).unwrap();
        assert!((mid - (r0 + 0.37 * p.gamma())).abs() < 1e-12);
    }

    #[test]
    fn mf_incentive_examples() {
        let p = fig1();
        let (i1, i0) = mf_incentives(0.0, 0.0, &p);
        assert!((i1 - 0.3).abs() < 1e-15 && (i0 - 3.4).abs() < 1e-15);
        let (i1, i0) = mf_incentives(0.5, 2.0, &p);
        assert!((i1 - 2.0).abs() < 1e-15 && (i0 - 2.9).abs() < 1e-15);
        let (i1, i0) = mf_incentives(1.0, 0.0, &p);
        assert!((i1 - 1.3).abs() < 1e-15 && (i0 - 2.4).abs() < 1e-15);
    }

    #[test]
    fn complete_graph_incentives_match_macroscopic() {
        // Under all-to-all influence the node incentive equals the
        // macroscopic one evaluated at the responsible fraction.
        let p = fig1();
        for n in [2usize, 3, 7] {
            let g = Graph::complete(n).unwrap();
            for mask in 0u32..(1 << n) {
                let bits: Vec<u8> = (0..n).map(|k| ((mask >> k) & 1) as u8).collect();
                let x = BehaviorVector::new(bits).unwrap();
                let frac: f64 = x.fraction_responsible();
                let (m1, m0) = mf_incentives(frac, 1.3, &p);
                for i in 0..n {
                    let (i1, i0) = node_incentives(i, &x, 1.3, &g, &p);
                    assert!((i1 - m1).abs() < 1e-12);
                    assert!((i0 - m0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let p = ModelParams::<f32>::new(10.0, 0.1, 0.6, 0.3, 3.0, 0.6).unwrap();
        let (i1, i0) = mf_incentives(0.5f32, 2.0, &p);
        assert!((i1 - 2.0).abs() < 1e-6 && (i0 - 2.9).abs() < 1e-6);
        assert!((growth_rate(1.0f32, &p).unwrap() - 9.9).abs() < 1e-6);
    }
}
