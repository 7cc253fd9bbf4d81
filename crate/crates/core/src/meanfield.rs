//! Mean-field ODE layers: the n-node marginal system on arbitrary graphs and
//! the reduced planar macroscopic system under all-to-all influence.
//!
//! Both systems share one adaptive integrator (Dormand-Prince 5(4) with
//! dense output). States live in closed boxes (probabilities in `[0, 1]`,
//! impact in `[0, inf)`) which the exact flow preserves; numerically the
//! integrator clamps overshoots up to [`CLAMP_THRESHOLD`] back onto the
//! boundary and treats anything larger as a failure.

use crate::error::CoreError;
use crate::model::{Graph, ModelParams};
use crate::ode::{self, StepSegment};
use crate::scalar::{s, Scalar};

/// Floor of the boundary-overshoot clamp; larger violations abort.
///
/// The working threshold scales with the error control: an accepted step may
/// legally land `~ sqrt(dim) * (abs + rel * |y|)` past a boundary, so the
/// projection clamps overshoots up to `max(1e-12, 16 (abs + rel))` and
/// treats anything beyond that as an integrator failure.
pub const CLAMP_THRESHOLD: f64 = 1e-12;

fn clamp_tolerance<S: Scalar>(tol: Tolerances<S>) -> S {
    s::<S>(CLAMP_THRESHOLD).max(s::<S>(16.0) * (tol.rel + tol.abs))
}

/// Macroscopic mean-field state: responsible fraction and impact level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarState<S: Scalar> {
    x: S,
    eps: S,
}

impl<S: Scalar> PlanarState<S> {
    pub fn new(x: S, eps: S) -> Result<Self, CoreError> {
        if !(x >= S::zero() && x <= S::one()) || !x.is_finite() {
            return Err(CoreError::OutOfDomain(format!("x = {x} not in [0, 1]")));
        }
        if !(eps >= S::zero()) || !eps.is_finite() {
            return Err(CoreError::OutOfDomain(format!("eps = {eps} negative")));
        }
        Ok(Self { x, eps })
    }

    /// Readout constructor: pulls dense-output interpolation noise back onto
    /// the domain. Anything further out than 1e-6 indicates corruption.
    pub(crate) fn from_clamped(x: S, eps: S) -> Result<Self, CoreError> {
        let c = s::<S>(1e-6);
        let xc = x.max(S::zero()).min(S::one());
        let ec = eps.max(S::zero());
        if (x - xc).abs() > c || (eps - ec).abs() > c {
            return Err(CoreError::OutOfDomain(format!(
                "state ({x}, {eps}) far outside the domain"
            )));
        }
        Self::new(xc, ec)
    }

    /// Responsible fraction.
    pub fn x(&self) -> S {
        self.x
    }

    /// Impact level.
    pub fn eps(&self) -> S {
        self.eps
    }

    /// True if strictly inside `(0, 1) x (0, inf)`.
    pub fn is_interior(&self) -> bool {
        self.x > S::zero() && self.x < S::one() && self.eps > S::zero()
    }
}

/// Per-node marginal probabilities of responsible behavior. The
/// irresponsible marginals are implicit as `1 - p1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeProbabilities<S: Scalar> {
    p1: Vec<S>,
}

impl<S: Scalar> NodeProbabilities<S> {
    pub fn new(p1: Vec<S>) -> Result<Self, CoreError> {
        if p1.is_empty() {
            return Err(CoreError::OutOfDomain("empty probability vector".into()));
        }
        for (i, &p) in p1.iter().enumerate() {
            if !(p >= S::zero() && p <= S::one()) || !p.is_finite() {
                return Err(CoreError::OutOfDomain(format!(
                    "p1[{i}] = {p} not in [0, 1]"
                )));
            }
        }
        Ok(Self { p1 })
    }

    pub fn uniform(n: usize, p: S) -> Result<Self, CoreError> {
        Self::new(vec![p; n])
    }

    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.p1
    }

    /// Population-average probability of responsible behavior.
    pub fn mean(&self) -> S {
        let sum: S = self.p1.iter().copied().sum();
        sum / s::<S>(self.p1.len() as f64)
    }
}

/// Average the marginals into the macroscopic state; impact passes through.
pub fn reduce_to_planar<S: Scalar>(
    p1: &NodeProbabilities<S>,
    eps: S,
) -> Result<PlanarState<S>, CoreError> {
    PlanarState::from_clamped(p1.mean(), eps)
}

/// Planar vector field:
/// `dx = x(1-x)(2x + mu*eps + alpha + sigma - kappa - 1)`,
/// `deps = (gamma(1-x) - tau) * eps`.
pub fn planar_rhs<S: Scalar>(state: &PlanarState<S>, params: &ModelParams<S>) -> (S, S) {
    planar_rhs_parts(state.x, state.eps, params)
}

#[inline]
pub(crate) fn planar_rhs_parts<S: Scalar>(x: S, eps: S, params: &ModelParams<S>) -> (S, S) {
    let two = s::<S>(2.0);
    let drive =
        two * x + params.mu() * eps + params.alpha() + params.sigma() - params.kappa() - S::one();
    let dx = x * (S::one() - x) * drive;
    let deps = (params.gamma() * (S::one() - x) - params.tau()) * eps;
    (dx, deps)
}

/// Node-level mean-field field: per-node marginals driven by the transition
/// rates evaluated at the probability vector in place of the behavior bits,
/// coupled to the impact through the mean marginal.
pub fn node_mf_rhs<S: Scalar>(
    p1: &NodeProbabilities<S>,
    eps: S,
    g: &Graph,
    params: &ModelParams<S>,
) -> (Vec<S>, S) {
    let n = g.len();
    assert_eq!(p1.len(), n, "probability vector length must match graph");
    let mut dp = vec![S::zero(); n];
    let mut shares = vec![S::zero(); n];
    node_mf_rhs_into(p1.as_slice(), eps, g, params, &mut dp, &mut shares)
}

/// Workhorse shared with the integrator; `shares` is scratch space.
fn node_mf_rhs_into<S: Scalar>(
    p1: &[S],
    eps: S,
    g: &Graph,
    params: &ModelParams<S>,
    dp: &mut [S],
    shares: &mut [S],
) -> (Vec<S>, S) {
    let n = g.len();
    for j in 0..n {
        let sum: S = g.neighbors(j).iter().map(|&k| p1[k]).sum();
        shares[j] = sum / s::<S>(g.degree(j) as f64);
    }
    for i in 0..n {
        let mut to_responsible = S::zero();
        let mut to_irresponsible = S::zero();
        for &j in g.neighbors(i) {
            let iota1 = shares[j] + params.mu() * eps + params.alpha();
            let iota0 = (S::one() - shares[j]) + params.kappa() - params.sigma();
            to_responsible = to_responsible + p1[j] * iota1;
            to_irresponsible = to_irresponsible + (S::one() - p1[j]) * iota0;
        }
        let d = s::<S>(g.degree(i) as f64);
        let rho01 = to_responsible / d;
        let rho10 = to_irresponsible / d;
        dp[i] = rho01 * (S::one() - p1[i]) - rho10 * p1[i];
    }
    let mean: S = p1.iter().copied().sum::<S>() / s::<S>(n as f64);
    let deps = (params.gamma() * (S::one() - mean) - params.tau()) * eps;
    (dp.to_vec(), deps)
}

/// Relative/absolute local error tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances<S: Scalar> {
    pub rel: S,
    pub abs: S,
}

impl<S: Scalar> Default for Tolerances<S> {
    fn default() -> Self {
        Self {
            rel: s(1e-9),
            abs: s(1e-12),
        }
    }
}

impl<S: Scalar> Tolerances<S> {
    pub fn new(rel: S, abs: S) -> Result<Self, CoreError> {
        if !(rel > S::zero() && abs > S::zero()) {
            return Err(CoreError::precondition("tolerances must be positive"));
        }
        Ok(Self { rel, abs })
    }
}

/// Counts of accepted and rejected steps over one integration.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntegratorStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

/// Dense-output trajectory: ordered accepted steps plus interpolation.
///
/// Component layout is `[x, eps]` for the planar system and
/// `[p1_0, .., p1_{n-1}, eps]` for the node system.
#[derive(Debug, Clone)]
pub struct Trajectory<S: Scalar> {
    pub(crate) dim: usize,
    pub(crate) segments: Vec<StepSegment<S>>,
    stats: IntegratorStats,
    pub(crate) stopped_early: bool,
}

impl<S: Scalar> Trajectory<S> {
    pub(crate) fn from_run(dim: usize, run: ode::Integration<S>) -> Self {
        Self {
            dim,
            segments: run.segments,
            stats: IntegratorStats {
                steps_accepted: run.stats.accepted,
                steps_rejected: run.stats.rejected,
            },
            stopped_early: run.stopped_early,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> S {
        self.segments.first().map(|s| s.t0).unwrap_or(S::zero())
    }

    pub fn t_end(&self) -> S {
        self.segments.last().map(|s| s.t1()).unwrap_or(S::zero())
    }

    /// True if the run stopped before the requested horizon (observer stop).
    pub fn stopped_early(&self) -> bool {
        self.stopped_early
    }

    pub fn stats(&self) -> IntegratorStats {
        self.stats
    }

    /// Final accepted state.
    pub fn end_state(&self) -> Vec<S> {
        self.segments
            .last()
            .map(|s| s.y1.clone())
            .unwrap_or_default()
    }

    /// Interpolate the raw state vector at `t` (must lie inside the span).
    pub fn sample(&self, t: S) -> Result<Vec<S>, CoreError> {
        let seg = self.locate(t)?;
        let mut out = vec![S::zero(); self.dim];
        seg.eval_into(t, &mut out);
        Ok(out)
    }

    /// Interpolated planar state at `t` (dim-2 trajectories only).
    pub fn planar_at(&self, t: S) -> Result<PlanarState<S>, CoreError> {
        if self.dim != 2 {
            return Err(CoreError::precondition(
                "planar_at requires a planar (dim-2) trajectory",
            ));
        }
        let y = self.sample(t)?;
        PlanarState::from_clamped(y[0], y[1])
    }

    fn locate(&self, t: S) -> Result<&StepSegment<S>, CoreError> {
        if self.segments.is_empty() {
            return Err(CoreError::precondition("empty trajectory"));
        }
        if t < self.t_start() || t > self.t_end() {
            return Err(CoreError::OutOfDomain(format!(
                "t = {t} outside trajectory span [{}, {}]",
                self.t_start(),
                self.t_end()
            )));
        }
        // Binary search over step start times.
        let mut lo = 0usize;
        let mut hi = self.segments.len() - 1;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.segments[mid].t0 <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        Ok(&self.segments[lo])
    }
}

/// Domain handling for planar integrations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum PlanarGuard<S: Scalar> {
    /// Closed box `[0,1] x [0,inf)` with standard clamping.
    ClosedBox,
    /// Closed box plus an interior floor keeping `x` at least `floor` away
    /// from both 0 and 1. Regularizes orbits that hug the boundary closer
    /// than floating point can represent.
    InteriorFloor(S),
}

fn clamp_component<S: Scalar>(v: &mut S, lo: S, hi: S, c: S, label: &str) -> Result<(), String> {
    if *v < lo {
        if lo - *v > c {
            return Err(format!("{label} = {v} undershoots {lo} beyond clamp"));
        }
        *v = lo;
    } else if *v > hi {
        if *v - hi > c {
            return Err(format!("{label} = {v} overshoots {hi} beyond clamp"));
        }
        *v = hi;
    }
    Ok(())
}

/// Integrate the planar system over `[0, horizon]`.
pub fn integrate_planar<S: Scalar>(
    params: &ModelParams<S>,
    init: &PlanarState<S>,
    horizon: S,
    tol: Tolerances<S>,
) -> Result<Trajectory<S>, CoreError> {
    let p = *params;
    integrate_planar_raw(
        move |x, eps| planar_rhs_parts(x, eps, &p),
        init,
        horizon,
        tol,
        PlanarGuard::ClosedBox,
        |_| false,
    )
}

/// Planar integration with a custom field, guard, and step observer.
/// Shared by cycle detection and the controlled system.
pub(crate) fn integrate_planar_raw<S, F, O>(
    rhs: F,
    init: &PlanarState<S>,
    horizon: S,
    tol: Tolerances<S>,
    guard: PlanarGuard<S>,
    observer: O,
) -> Result<Trajectory<S>, CoreError>
where
    S: Scalar,
    F: Fn(S, S) -> (S, S),
    O: FnMut(&StepSegment<S>) -> bool,
{
    let clamp = clamp_tolerance(tol);
    let project = move |_t: S, y: &mut [S]| -> Result<(), String> {
        clamp_component(&mut y[0], S::zero(), S::one(), clamp, "x")?;
        let big = S::max_value();
        clamp_component(&mut y[1], S::zero(), big, clamp, "eps")?;
        if let PlanarGuard::InteriorFloor(floor) = guard {
            y[0] = y[0].max(floor).min(S::one() - floor);
        }
        Ok(())
    };
    let run = ode::integrate(
        |_t, y: &[S], dy: &mut [S]| {
            let (dx, de) = rhs(y[0], y[1]);
            dy[0] = dx;
            dy[1] = de;
        },
        project,
        observer,
        S::zero(),
        &[init.x(), init.eps()],
        horizon,
        tol.rel,
        tol.abs,
    )?;
    Ok(Trajectory::from_run(2, run))
}

/// Integrate the n-node mean-field system over `[0, horizon]`.
/// State layout: `[p1_0, .., p1_{n-1}, eps]`.
pub fn integrate_node<S: Scalar>(
    g: &Graph,
    params: &ModelParams<S>,
    init: &NodeProbabilities<S>,
    eps0: S,
    horizon: S,
    tol: Tolerances<S>,
) -> Result<Trajectory<S>, CoreError> {
    let n = g.len();
    if init.len() != n {
        return Err(CoreError::precondition(
            "probability vector length must match graph",
        ));
    }
    if !(eps0 >= S::zero()) || !eps0.is_finite() {
        return Err(CoreError::OutOfDomain(format!("eps0 = {eps0} negative")));
    }

    let mut y0 = init.as_slice().to_vec();
    y0.push(eps0);

    let mut shares = vec![S::zero(); n];
    let g2 = g.clone();
    let p = *params;
    let rhs = move |_t: S, y: &[S], dy: &mut [S]| {
        let (p1, eps) = y.split_at(n);
        let eps = eps[0];
        for j in 0..n {
            let sum: S = g2.neighbors(j).iter().map(|&k| p1[k]).sum();
            shares[j] = sum / s::<S>(g2.degree(j) as f64);
        }
        let mut mean = S::zero();
        for i in 0..n {
            let mut to_responsible = S::zero();
            let mut to_irresponsible = S::zero();
            for &j in g2.neighbors(i) {
                let iota1 = shares[j] + p.mu() * eps + p.alpha();
                let iota0 = (S::one() - shares[j]) + p.kappa() - p.sigma();
                to_responsible = to_responsible + p1[j] * iota1;
                to_irresponsible = to_irresponsible + (S::one() - p1[j]) * iota0;
            }
            let d = s::<S>(g2.degree(i) as f64);
            dy[i] = (to_responsible / d) * (S::one() - p1[i]) - (to_irresponsible / d) * p1[i];
            mean = mean + p1[i];
        }
        mean = mean / s::<S>(n as f64);
        dy[n] = (p.gamma() * (S::one() - mean) - p.tau()) * eps;
    };

    let clamp = clamp_tolerance(tol);
    let project = move |_t: S, y: &mut [S]| -> Result<(), String> {
        for (i, v) in y.iter_mut().take(n).enumerate() {
            clamp_component(v, S::zero(), S::one(), clamp, &format!("p1[{i}]"))?;
        }
        clamp_component(&mut y[n], S::zero(), S::max_value(), clamp, "eps")?;
        Ok(())
    };

    let run = ode::integrate(
        rhs,
        project,
        |_| false,
        S::zero(),
        &y0,
        horizon,
        tol.rel,
        tol.abs,
    )?;
    Ok(Trajectory::from_run(n + 1, run))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> ModelParams<f64> {
        ModelParams::new(10.0, 0.1, 0.6, 0.3, 3.0, 0.6).unwrap()
    }

    #[test]
    fn planar_rhs_vanishes_at_interior_equilibrium() {
        let p = fig1();
        let x = 1.0 - p.tau() / p.gamma();
        let eps = (2.0 * p.tau() / p.gamma() + p.kappa() - p.sigma() - p.alpha() - 1.0) / p.mu();
        assert!((x - 0.99).abs() < 1e-15);
        assert!((eps - 28.0 / 15.0).abs() < 1e-15);
        let (dx, de) = planar_rhs(&PlanarState::new(x, eps).unwrap(), &p);
        assert!(dx.abs() < 1e-14, "dx = {dx}");
        assert!(de.abs() < 1e-13, "deps = {de}");
    }

    #[test]
    fn planar_rhs_direct_evaluation() {
        let (dx, de) = planar_rhs(&PlanarState::new(0.5, 2.0).unwrap(), &fig1());
        assert!((dx + 0.225).abs() < 1e-15);
        assert!((de - 9.8).abs() < 1e-15);
    }

    #[test]
    fn planar_rhs_boundary_dynamics() {
        let p = fig1();
        for eps in [0.0, 0.7, 42.0] {
            let (dx, de) = planar_rhs(&PlanarState::new(0.0, eps).unwrap(), &p);
            assert_eq!(dx, 0.0);
            assert!((de - (p.gamma() - p.tau()) * eps).abs() < 1e-12);
            let (dx, de) = planar_rhs(&PlanarState::new(1.0, eps).unwrap(), &p);
            assert_eq!(dx, 0.0);
            assert!((de + p.tau() * eps).abs() < 1e-12);
        }
    }

    #[test]
    fn node_rhs_uniform_complete_matches_planar() {
        let p = fig1();
        let g = Graph::complete(6).unwrap();
        let probs = NodeProbabilities::uniform(6, 0.5).unwrap();
        let (dp, deps) = node_mf_rhs(&probs, 2.0, &g, &p);
        for d in &dp {
            assert!((d + 0.225).abs() < 1e-14, "dp = {d}");
        }
        assert!((deps - 9.8).abs() < 1e-14);
    }

    #[test]
    fn node_rhs_absorbing_corners() {
        let p = fig1();
        let g = Graph::complete(4).unwrap();
        let ones = NodeProbabilities::uniform(4, 1.0).unwrap();
        let (dp, deps) = node_mf_rhs(&ones, 3.0, &g, &p);
        assert!(dp.iter().all(|&d| d == 0.0));
        assert!((deps + p.tau() * 3.0).abs() < 1e-14);

        let zeros = NodeProbabilities::uniform(4, 0.0).unwrap();
        let (dp, deps) = node_mf_rhs(&zeros, 3.0, &g, &p);
        assert!(dp.iter().all(|&d| d == 0.0));
        assert!((deps - (p.gamma() - p.tau()) * 3.0).abs() < 1e-13);
    }

    #[test]
    fn reduce_examples() {
        let probs = NodeProbabilities::uniform(7, 0.3f64).unwrap();
        let st = reduce_to_planar(&probs, 1.5).unwrap();
        assert!((st.x() - 0.3).abs() < 1e-15);
        assert_eq!(st.eps(), 1.5);

        let probs = NodeProbabilities::new(vec![0.2f64, 0.8]).unwrap();
        let st = reduce_to_planar(&probs, 0.0).unwrap();
        assert!((st.x() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn integrate_boundary_closed_forms() {
        let p = fig1();
        // x = 1: impact decays at rate tau.
        let traj = integrate_planar(
            &p,
            &PlanarState::new(1.0, 2.0).unwrap(),
            10.0,
            Tolerances::default(),
        )
        .unwrap();
        let end = traj.end_state();
        assert_eq!(end[0], 1.0);
        let expected = 2.0 * (-1.0f64).exp();
        assert!(
            (end[1] - expected).abs() / expected < 1e-9,
            "eps(10) = {} vs {expected}",
            end[1]
        );

        // x = 0: impact grows at rate gamma - tau.
        let traj = integrate_planar(
            &p,
            &PlanarState::new(0.0, 0.001).unwrap(),
            1.0,
            Tolerances::default(),
        )
        .unwrap();
        let end = traj.end_state();
        assert_eq!(end[0], 0.0);
        // Local error is controlled to 1e-9; the e^{9.9} growth amplifies
        // the accumulated global error a few times beyond that.
        let expected = 0.001 * (9.9f64).exp();
        assert!(
            (end[1] - expected).abs() / expected < 1e-7,
            "eps(1) = {} vs {expected}",
            end[1]
        );
    }

    #[test]
    fn dense_output_matches_closed_form_mid_span() {
        let p = fig1();
        let traj = integrate_planar(
            &p,
            &PlanarState::new(1.0, 5.0).unwrap(),
            20.0,
            Tolerances::default(),
        )
        .unwrap();
        for k in 1..20 {
            let t = k as f64;
            let st = traj.planar_at(t).unwrap();
            let expected = 5.0 * (-0.1 * t).exp();
            assert!(
                (st.eps() - expected).abs() / expected < 1e-9,
                "t = {t}: {} vs {expected}",
                st.eps()
            );
        }
    }

    #[test]
    fn uniform_init_stays_uniform_on_complete_graph() {
        // Identical per-node arithmetic keeps the marginals bitwise equal.
        let p = fig1();
        let g = Graph::complete(5).unwrap();
        let init = NodeProbabilities::uniform(5, 0.37).unwrap();
        let traj = integrate_node(&g, &p, &init, 1.1, 4.0, Tolerances::default()).unwrap();
        for t in [0.5, 1.7, 3.9] {
            let y = traj.sample(t).unwrap();
            for i in 1..5 {
                assert_eq!(y[i], y[0], "p1 diverged across nodes at t = {t}");
            }
        }
    }

    #[test]
    fn sample_outside_span_errors() {
        let p = fig1();
        let traj = integrate_planar(
            &p,
            &PlanarState::new(0.5, 0.5).unwrap(),
            1.0,
            Tolerances::default(),
        )
        .unwrap();
        assert!(traj.sample(1.5).is_err());
        assert!(traj.sample(-0.1).is_err());
        assert!(traj.sample(0.9).is_ok());
    }

    #[test]
    fn integrates_in_single_precision() {
        let p = ModelParams::<f32>::new(10.0, 0.1, 0.6, 0.3, 3.0, 0.6).unwrap();
        let tol = Tolerances::new(1e-5f32, 1e-6).unwrap();
        let traj = integrate_planar(&p, &PlanarState::new(1.0f32, 2.0).unwrap(), 1.0, tol).unwrap();
        let end = traj.end_state();
        assert_eq!(end[0], 1.0);
        let expected = 2.0 * (-0.1f32).exp();
        assert!(
            (end[1] - expected).abs() / expected < 1e-4,
            "eps = {}",
            end[1]
        );
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(PlanarState::new(-0.1, 0.0).is_err());
        assert!(PlanarState::new(1.1, 0.0).is_err());
        assert!(PlanarState::new(0.5, -1.0).is_err());
        assert!(NodeProbabilities::new(vec![0.5, 1.2]).is_err());
        assert!(Tolerances::new(0.0, 1e-12).is_err());
        let p = fig1();
        let g = Graph::complete(3).unwrap();
        let init = NodeProbabilities::uniform(2, 0.5).unwrap();
        assert!(integrate_node(&g, &p, &init, 1.0, 1.0, Tolerances::default()).is_err());
    }
}
