//! Exact event-driven simulation of the n-agent behavior process coupled to
//! the impact ODE, plus a dense generator-matrix oracle for small n.
//!
//! Between behavioral events the bit vector is frozen, so the impact follows
//! the closed form `eps(t) = eps_k * exp(r (t - t_k))` with
//! `r = gamma * xbar0 - tau`, and every flip rate is affine in `eps`. The
//! total event rate over a gap is therefore `Lambda(s) = A + B exp(r s)`,
//! whose integrated hazard inverts exactly, with no time stepping and no
//! thinning.
//! Trajectories are deterministic given `(graph, params, init, horizon,
//! seed)`.

use rand::distributions::OpenClosed01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;
use crate::model::{growth_rate, BehaviorVector, Graph, ModelParams};
use crate::scalar::{s, Scalar};

/// Impact values above this abort the run: the model is exponential and
/// runaway trajectories on the x = 0 boundary are expected.
pub const IMPACT_OVERFLOW_GUARD: f64 = 1e12;

/// Largest population for the dense `2^n` generator matrix.
pub const MAX_GENERATOR_NODES: usize = 12;

const HAZARD_TOL: f64 = 1e-12;
const MAX_EVENTS: usize = 50_000_000;

/// Stochastic-layer state: clock, behavior bits, impact level.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState<S: Scalar> {
    pub t: S,
    pub behavior: BehaviorVector,
    pub eps: S,
}

impl<S: Scalar> PopulationState<S> {
    pub fn new(t: S, behavior: BehaviorVector, eps: S) -> Result<Self, CoreError> {
        if !(t >= S::zero()) || !t.is_finite() {
            return Err(CoreError::OutOfDomain(format!("t = {t} negative")));
        }
        if !(eps >= S::zero()) || !eps.is_finite() {
            return Err(CoreError::OutOfDomain(format!("eps = {eps} negative")));
        }
        Ok(Self { t, behavior, eps })
    }
}

/// One behavioral flip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event<S: Scalar> {
    pub t: S,
    pub node: usize,
    /// New bit: `true` means the node adopted responsible behavior.
    pub responsible: bool,
    /// Impact level at the event instant.
    pub eps: S,
}

/// Exact sample path: events plus per-gap closed-form impact records, so any
/// time in `[t0, horizon]` can be sampled without replay.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTrajectory<S: Scalar> {
    n: usize,
    t0: S,
    horizon: S,
    init: BehaviorVector,
    events: Vec<Event<S>>,
    /// Gap k covers `[gap_t[k], gap_t[k+1])` (last gap ends at horizon).
    gap_t: Vec<S>,
    gap_eps: Vec<S>,
    gap_ones: Vec<usize>,
    gap_rate: Vec<S>,
    final_eps: S,
}

impl<S: Scalar> EventTrajectory<S> {
    pub fn population(&self) -> usize {
        self.n
    }

    pub fn t_start(&self) -> S {
        self.t0
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn events(&self) -> &[Event<S>] {
        &self.events
    }

    pub fn initial_behavior(&self) -> &BehaviorVector {
        &self.init
    }

    pub fn final_eps(&self) -> S {
        self.final_eps
    }

    fn gap_index(&self, t: S) -> Result<usize, CoreError> {
        if t < self.t0 || t > self.horizon {
            return Err(CoreError::OutOfDomain(format!(
                "t = {t} outside trajectory span [{}, {}]",
                self.t0, self.horizon
            )));
        }
        // Last gap whose start is <= t.
        let mut lo = 0usize;
        let mut hi = self.gap_t.len() - 1;
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if self.gap_t[mid] <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        Ok(lo)
    }

    /// Responsible fraction at `t` (piecewise constant between events).
    pub fn fraction_responsible_at(&self, t: S) -> Result<S, CoreError> {
        let k = self.gap_index(t)?;
        Ok(s::<S>(self.gap_ones[k] as f64) / s::<S>(self.n as f64))
    }

    /// Impact at `t` via the per-gap closed form.
    pub fn impact_at(&self, t: S) -> Result<S, CoreError> {
        let k = self.gap_index(t)?;
        Ok(self.gap_eps[k] * (self.gap_rate[k] * (t - self.gap_t[k])).exp())
    }
}

/// Piecewise-constant behavior fractions on a grid: `(t, xbar0, xbar1)` with
/// `xbar0 + xbar1 = 1` exactly.
pub fn empirical_fractions<S: Scalar>(
    traj: &EventTrajectory<S>,
    grid: &[S],
) -> Result<Vec<(S, S, S)>, CoreError> {
    grid.iter()
        .map(|&t| {
            let xbar1 = traj.fraction_responsible_at(t)?;
            Ok((t, S::one() - xbar1, xbar1))
        })
        .collect()
}

/// Waiting time for an inhomogeneous clock with rate `Lambda(s) = A + B e^{r s}`.
///
/// Solves the integrated hazard `H(d) = A d + (B/r)(e^{r d} - 1) = -ln u`
/// (with the `r = 0` limit `H(d) = (A + B) d`) by closed form where one term
/// vanishes, otherwise by bracketed, safeguarded Newton to `|H + ln u| <= 1e-12`.
/// Returns infinity when the hazard saturates below `-ln u` (possible for
/// `r < 0`) or when `A + B = 0`.
pub fn next_event_time<S: Scalar>(a: S, b: S, r: S, u: S) -> S {
    assert!(
        u > S::zero() && u <= S::one(),
        "u must be a uniform (0, 1] draw"
    );
    assert!(
        a >= S::zero() && b >= S::zero(),
        "rate coefficients negative"
    );
    let target = -u.ln();
    if target == S::zero() {
        return S::zero();
    }
    if a + b == S::zero() {
        return S::infinity();
    }
    if b == S::zero() {
        return target / a;
    }
    if r == S::zero() {
        return target / (a + b);
    }
    if a == S::zero() {
        // (B/r)(e^{rd} - 1) = target  =>  d = ln(1 + r target / B) / r.
        let arg = r * target / b;
        if arg <= -S::one() {
            return S::infinity(); // hazard saturates below the target
        }
        return arg.ln_1p() / r;
    }

    let hazard = |d: S| a * d + (b / r) * (r * d).exp_m1();

    // Bracket the root. The constant-rate solution underestimates H for
    // r > 0 and overestimates for r < 0.
    let d0 = target / (a + b);
    let (mut lo, mut hi);
    if r > S::zero() {
        lo = S::zero();
        hi = d0;
        // d0 solves it only when B contributes nothing; pad upward if short.
        while hazard(hi) < target {
            hi = hi * s::<S>(2.0);
        }
    } else {
        lo = d0;
        hi = d0;
        let mut step = d0.max(S::one() / -r);
        loop {
            if hazard(hi) >= target {
                break;
            }
            lo = hi;
            hi = hi + step;
            step = step * s::<S>(2.0);
            if hi > s::<S>(1e18) {
                // Rate decays toward A; remaining hazard is essentially A*d.
                let rest = target - (b / r) * (-S::one());
                if a > S::zero() {
                    return rest / a;
                }
                return S::infinity();
            }
        }
    }

    // Safeguarded Newton on the bracket.
    let tol = s::<S>(HAZARD_TOL);
    let mut d = (lo + hi) * s::<S>(0.5);
    for _ in 0..200 {
        let f = hazard(d) - target;
        if f.abs() <= tol {
            return d;
        }
        if f > S::zero() {
            hi = d;
        } else {
            lo = d;
        }
        let slope = a + b * (r * d).exp();
        let newton = d - f / slope;
        d = if newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * s::<S>(0.5)
        };
        if hi - lo <= S::epsilon() * d.abs().max(S::one()) {
            return d;
        }
    }
    d
}

/// How the impact variable evolves during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ImpactMode {
    Coupled,
    Frozen,
}

/// Exact simulation of the coupled process up to `horizon`.
pub fn simulate<S: Scalar>(
    g: &Graph,
    params: &ModelParams<S>,
    init: &PopulationState<S>,
    horizon: S,
    seed: u64,
) -> Result<EventTrajectory<S>, CoreError> {
    run(g, params, init, horizon, seed, ImpactMode::Coupled)
}

/// Exact simulation with the impact held at its initial value. This is the
/// finite-state reference mode used against the generator-matrix oracle,
/// where rates must not drift between events.
pub fn simulate_frozen_impact<S: Scalar>(
    g: &Graph,
    params: &ModelParams<S>,
    init: &PopulationState<S>,
    horizon: S,
    seed: u64,
) -> Result<EventTrajectory<S>, CoreError> {
    run(g, params, init, horizon, seed, ImpactMode::Frozen)
}

/// Per-state rate decomposition: `rho01(i) = a[i] + b[i] * eps` for
/// irresponsible nodes, `rho10(i) = a[i]` (b = 0) for responsible ones.
struct RateTable<S: Scalar> {
    a: Vec<S>,
    b: Vec<S>,
    a_total: S,
    b_total: S,
}

fn rate_table<S: Scalar>(
    g: &Graph,
    params: &ModelParams<S>,
    x: &BehaviorVector,
    complete: bool,
) -> RateTable<S> {
    let n = g.len();
    let mut a = vec![S::zero(); n];
    let mut b = vec![S::zero(); n];

    if complete {
        // Aggregate-count shortcut: every node sees the same shares.
        let ones = x.ones_count();
        let xbar1 = s::<S>(ones as f64) / s::<S>(n as f64);
        let xbar0 = S::one() - xbar1;
        let a01 = xbar1 * (xbar1 + params.alpha());
        let b01 = params.mu() * xbar1;
        let a10 = xbar0 * (xbar0 + params.kappa() - params.sigma());
        for i in 0..n {
            if x.bit(i) == 0 {
                a[i] = a01;
                b[i] = b01;
            } else {
                a[i] = a10;
            }
        }
    } else {
        let mut shares = vec![S::zero(); n];
        for j in 0..n {
            let sum: S = g
                .neighbors(j)
                .iter()
                .map(|&k| s::<S>(x.bit(k) as f64))
                .sum();
            shares[j] = sum / s::<S>(g.degree(j) as f64);
        }
        for i in 0..n {
            let d = s::<S>(g.degree(i) as f64);
            if x.bit(i) == 0 {
                let mut acc_a = S::zero();
                let mut acc_b = S::zero();
                for &j in g.neighbors(i) {
                    if x.bit(j) == 1 {
                        acc_a = acc_a + (shares[j] + params.alpha());
                        acc_b = acc_b + params.mu();
                    }
                }
                a[i] = acc_a / d;
                b[i] = acc_b / d;
            } else {
                let mut acc = S::zero();
                for &j in g.neighbors(i) {
                    if x.bit(j) == 0 {
                        acc = acc + ((S::one() - shares[j]) + params.kappa() - params.sigma());
                    }
                }
                a[i] = acc / d;
            }
        }
    }

    let a_total = a.iter().copied().sum();
    let b_total = b.iter().copied().sum();
    RateTable {
        a,
        b,
        a_total,
        b_total,
    }
}

fn run<S: Scalar>(
    g: &Graph,
    params: &ModelParams<S>,
    init: &PopulationState<S>,
    horizon: S,
    seed: u64,
    mode: ImpactMode,
) -> Result<EventTrajectory<S>, CoreError> {
    let n = g.len();
    if init.behavior.len() != n {
        return Err(CoreError::precondition(
            "behavior vector length must match graph",
        ));
    }
    if !(horizon > init.t) {
        return Err(CoreError::precondition("horizon must exceed start time"));
    }
    let guard = s::<S>(IMPACT_OVERFLOW_GUARD);
    let check_eps = |t: S, eps: S| -> Result<(), CoreError> {
        if !eps.is_finite() || eps > guard {
            return Err(CoreError::ImpactOverflow {
                t: t.to_f64().unwrap_or(f64::NAN),
                eps: eps.to_f64().unwrap_or(f64::NAN),
                guard: IMPACT_OVERFLOW_GUARD,
            });
        }
        Ok(())
    };
    check_eps(init.t, init.eps)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = init.behavior.clone();
    let mut t = init.t;
    let mut eps = init.eps;
    // One-time structure check; the per-event rate path depends on it.
    let complete = g.is_complete_with_self();

    let mut events = Vec::new();
    let mut gap_t = vec![t];
    let mut gap_eps = vec![eps];
    let mut gap_ones = vec![x.ones_count()];
    let mut gap_rate = Vec::new();

    loop {
        if events.len() >= MAX_EVENTS {
            return Err(CoreError::Integration {
                t: t.to_f64().unwrap_or(f64::NAN),
                reason: format!("event budget exhausted ({MAX_EVENTS})"),
            });
        }
        let ones = x.ones_count();
        let xbar0 = S::one() - s::<S>(ones as f64) / s::<S>(n as f64);
        let r = match mode {
            ImpactMode::Coupled => growth_rate(xbar0, params)?,
            ImpactMode::Frozen => S::zero(),
        };
        gap_rate.push(r);

        let table = rate_table(g, params, &x, complete);
        let (hazard_a, hazard_b, hazard_r) = match mode {
            ImpactMode::Coupled => (table.a_total, table.b_total * eps, r),
            // Frozen impact: every rate is constant in the gap.
            ImpactMode::Frozen => (table.a_total + table.b_total * eps, S::zero(), S::zero()),
        };

        let delta = if hazard_a + hazard_b == S::zero() {
            S::infinity()
        } else {
            let u: S = s::<S>(rng.sample::<f64, _>(OpenClosed01));
            next_event_time(hazard_a, hazard_b, hazard_r, u)
        };

        let t_next = t + delta;
        if !(t_next < horizon) {
            // No event before the horizon: close the final gap.
            let eps_end = eps * (r * (horizon - t)).exp();
            check_eps(horizon, eps_end)?;
            return Ok(EventTrajectory {
                n,
                t0: init.t,
                horizon,
                init: init.behavior.clone(),
                events,
                gap_t,
                gap_eps,
                gap_ones,
                gap_rate,
                final_eps: eps_end,
            });
        }

        let eps_next = eps * (r * delta).exp();
        check_eps(t_next, eps_next)?;

        // Mark distribution: instantaneous per-node rates at the event time.
        let lambda = table.a_total + table.b_total * eps_next;
        let v: S = s::<S>(rng.sample::<f64, _>(OpenClosed01)) * lambda;
        let mut acc = S::zero();
        let mut flipped = None;
        for i in 0..n {
            let rate = table.a[i] + table.b[i] * eps_next;
            acc = acc + rate;
            if v <= acc && rate > S::zero() {
                flipped = Some(i);
                break;
            }
        }
        // Rounding can leave v a hair above the accumulated total.
        let flipped = flipped.unwrap_or_else(|| {
            (0..n)
                .rev()
                .find(|&i| table.a[i] + table.b[i] * eps_next > S::zero())
                .expect("positive total rate must have a positive entry")
        });

        let new_bit = 1 - x.bit(flipped);
        x.set(flipped, new_bit);
        t = t_next;
        eps = match mode {
            ImpactMode::Coupled => eps_next,
            ImpactMode::Frozen => eps,
        };
        events.push(Event {
            t,
            node: flipped,
            responsible: new_bit == 1,
            eps: match mode {
                ImpactMode::Coupled => eps_next,
                ImpactMode::Frozen => eps,
            },
        });
        gap_t.push(t);
        gap_eps.push(eps);
        gap_ones.push(x.ones_count());
    }
}

/// Dense transition-rate matrix over the `2^n` behavior configurations at a
/// frozen impact value. Configuration index bit `i` is node `i`'s behavior.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix<S: Scalar> {
    n_nodes: usize,
    dim: usize,
    q: Vec<S>,
}

impl<S: Scalar> GeneratorMatrix<S> {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of configurations (`2^n`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rate(&self, from: usize, to: usize) -> S {
        self.q[from * self.dim + to]
    }

    pub fn row(&self, from: usize) -> &[S] {
        &self.q[from * self.dim..(from + 1) * self.dim]
    }

    /// Transient distribution `p0 * exp(Q t)` by uniformization.
    pub fn transient_distribution(&self, p0: &[S], t: S) -> Result<Vec<S>, CoreError> {
        if p0.len() != self.dim {
            return Err(CoreError::precondition(
                "initial distribution length must equal 2^n",
            ));
        }
        if !(t >= S::zero()) {
            return Err(CoreError::precondition("time must be nonnegative"));
        }
        let mut lambda = S::zero();
        for i in 0..self.dim {
            lambda = lambda.max(-self.rate(i, i));
        }
        if lambda == S::zero() || t == S::zero() {
            return Ok(p0.to_vec());
        }

        // P = I + Q / lambda is stochastic; sum Poisson(lambda t) terms.
        let lt = lambda * t;
        let mut weight = (-lt).exp();
        let mut v = p0.to_vec();
        let mut result: Vec<S> = v.iter().map(|&x| x * weight).collect();
        let mut cumulative = weight;
        let tail = s::<S>(1e-14);
        let cap = (lt.to_f64().unwrap_or(0.0) + 50.0 * lt.to_f64().unwrap_or(0.0).sqrt() + 100.0)
            .ceil() as usize;
        for k in 1..=cap {
            // v <- v * P
            let mut next = vec![S::zero(); self.dim];
            for y in 0..self.dim {
                let vy = v[y];
                if vy == S::zero() {
                    continue;
                }
                let row = self.row(y);
                for z in 0..self.dim {
                    let p = if y == z {
                        S::one() + row[z] / lambda
                    } else {
                        row[z] / lambda
                    };
                    if p != S::zero() {
                        next[z] = next[z] + vy * p;
                    }
                }
            }
            v = next;
            weight = weight * lt / s::<S>(k as f64);
            for (r, &x) in result.iter_mut().zip(v.iter()) {
                *r = *r + weight * x;
            }
            cumulative = cumulative + weight;
            if S::one() - cumulative <= tail {
                break;
            }
        }
        Ok(result)
    }
}

/// Build the joint-configuration generator at a frozen impact value.
/// Only single-bit flips carry rate; diagonals make rows sum to zero.
pub fn generator_matrix<S: Scalar>(
    g: &Graph,
    params: &ModelParams<S>,
    eps: S,
) -> Result<GeneratorMatrix<S>, CoreError> {
    let n = g.len();
    if n > MAX_GENERATOR_NODES {
        return Err(CoreError::PopulationTooLarge {
            n,
            max: MAX_GENERATOR_NODES,
        });
    }
    if !(eps >= S::zero()) || !eps.is_finite() {
        return Err(CoreError::OutOfDomain(format!("eps = {eps} negative")));
    }
    let dim = 1usize << n;
    let mut q = vec![S::zero(); dim * dim];
    for config in 0..dim {
        let bits: Vec<u8> = (0..n).map(|i| ((config >> i) & 1) as u8).collect();
        let x = BehaviorVector::new(bits).expect("bits are binary");
        let mut diag = S::zero();
        for i in 0..n {
            let (rho01, rho10) = crate::model::node_rates(i, &x, eps, g, params);
            let rate = if x.bit(i) == 0 { rho01 } else { rho10 };
            let to = config ^ (1 << i);
            q[config * dim + to] = rate;
            diag = diag - rate;
        }
        q[config * dim + config] = diag;
    }
    Ok(GeneratorMatrix { n_nodes: n, dim, q })
}
