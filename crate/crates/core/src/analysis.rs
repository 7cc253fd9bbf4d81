//! Phase-plane analysis of the planar system: closed-form equilibria with
//! eigenvalue classification, limit-cycle detection on a Poincare section,
//! boundary-behavior tagging, and transient-peak statistics.
//!
//! Cycle detection integrates with an interior floor (default `1e-10`) that
//! keeps `x` a representable distance away from 0 and 1. The exact flow
//! never reaches those boundaries from the interior, but its boundary
//! approaches outrun double precision: without the floor the state rounds
//! onto the absorbing edge `x = 1`. The floor pins the orbit's closest
//! approach instead, which is what any fixed-precision integration of this
//! system implicitly does; the reported cycle depends on that resolution
//! limit and is labeled accordingly.

use num_complex::Complex;

use crate::error::CoreError;
use crate::meanfield::{
    integrate_planar_raw, planar_rhs_parts, PlanarGuard, PlanarState, Tolerances, Trajectory,
};
use crate::model::{validate_assumptions, ModelParams};
use crate::ode::StepSegment;
use crate::scalar::{s, Scalar};

/// Impact level above which a boundary run is tagged as diverging.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Default interior floor for cycle detection (distance of `x` from 0 and 1).
pub const DEFAULT_INTERIOR_FLOOR: f64 = 1e-10;

/// Planar equilibrium classes by Jacobian eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumClass {
    /// Real eigenvalues of opposite sign.
    Saddle,
    /// Complex pair with positive real part.
    UnstableSpiral,
    /// Complex pair with negative real part.
    StableSpiral,
    /// Real eigenvalues, both positive.
    UnstableNode,
    /// Real eigenvalues, both negative.
    StableNode,
    /// Zero real part or a zero eigenvalue: linearization inconclusive.
    CenterMarginal,
}

impl std::fmt::Display for EquilibriumClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            EquilibriumClass::Saddle => "saddle",
            EquilibriumClass::UnstableSpiral => "unstable-spiral",
            EquilibriumClass::StableSpiral => "stable-spiral",
            EquilibriumClass::UnstableNode => "unstable-node",
            EquilibriumClass::StableNode => "stable-node",
            EquilibriumClass::CenterMarginal => "center-marginal",
        };
        write!(f, "{name}")
    }
}

/// Equilibrium location with its eigenvalues and classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumReport<S: Scalar> {
    pub location: PlanarState<S>,
    /// Ordered by descending real part (imaginary part breaks ties).
    pub eigenvalues: (Complex<S>, Complex<S>),
    pub class: EquilibriumClass,
}

/// Analytic Jacobian of the planar field at an arbitrary state.
pub fn jacobian_planar<S: Scalar>(state: &PlanarState<S>, params: &ModelParams<S>) -> [[S; 2]; 2] {
    let x = state.x();
    let eps = state.eps();
    let two = s::<S>(2.0);
    let drive =
        two * x + params.mu() * eps + params.alpha() + params.sigma() - params.kappa() - S::one();
    let j11 = (S::one() - two * x) * drive + two * x * (S::one() - x);
    let j12 = params.mu() * x * (S::one() - x);
    let j21 = -params.gamma() * eps;
    let j22 = params.gamma() * (S::one() - x) - params.tau();
    [[j11, j12], [j21, j22]]
}

/// Eigenvalues of a real 2x2 matrix from its characteristic polynomial,
/// ordered by descending real part (then descending imaginary part).
pub fn eigenvalues_2x2<S: Scalar>(m: &[[S; 2]; 2]) -> (Complex<S>, Complex<S>) {
    let half_trace = (m[0][0] + m[1][1]) / s::<S>(2.0);
    // ((a - d)/2)^2 + b c equals (tr/2)^2 - det with less cancellation.
    let half_diff = (m[0][0] - m[1][1]) / s::<S>(2.0);
    let disc = half_diff * half_diff + m[0][1] * m[1][0];
    if disc >= S::zero() {
        let root = disc.sqrt();
        (
            Complex::new(half_trace + root, S::zero()),
            Complex::new(half_trace - root, S::zero()),
        )
    } else {
        let omega = (-disc).sqrt();
        (
            Complex::new(half_trace, omega),
            Complex::new(half_trace, -omega),
        )
    }
}

/// Classify a planar equilibrium from its eigenvalue pair.
pub fn classify<S: Scalar>(eigs: (Complex<S>, Complex<S>)) -> EquilibriumClass {
    let (l1, l2) = eigs;
    if l1.im != S::zero() {
        return if l1.re > S::zero() {
            EquilibriumClass::UnstableSpiral
        } else if l1.re < S::zero() {
            EquilibriumClass::StableSpiral
        } else {
            EquilibriumClass::CenterMarginal
        };
    }
    if l1.re == S::zero() || l2.re == S::zero() {
        return EquilibriumClass::CenterMarginal;
    }
    if (l1.re > S::zero()) != (l2.re > S::zero()) {
        EquilibriumClass::Saddle
    } else if l1.re > S::zero() {
        EquilibriumClass::UnstableNode
    } else {
        EquilibriumClass::StableNode
    }
}

fn require_assumptions<S: Scalar>(params: &ModelParams<S>) -> Result<(), CoreError> {
    let report = validate_assumptions(params);
    if !report.both_hold() {
        return Err(CoreError::AssumptionsViolated(report.messages.join("; ")));
    }
    Ok(())
}

/// Location of the interior equilibrium
/// `(1 - tau/gamma, [2 tau/gamma + kappa - sigma - alpha - 1] / mu)`.
pub fn interior_equilibrium<S: Scalar>(
    params: &ModelParams<S>,
) -> Result<PlanarState<S>, CoreError> {
    require_assumptions(params)?;
    let ratio = params.tau() / params.gamma();
    let x = S::one() - ratio;
    let eps = (s::<S>(2.0) * ratio + params.kappa() - params.sigma() - params.alpha() - S::one())
        / params.mu();
    PlanarState::new(x, eps)
}

/// The three equilibria `(0,0)`, `(1,0)`, and the interior point, each with
/// eigenvalues of the analytic Jacobian and its classification.
pub fn equilibria<S: Scalar>(
    params: &ModelParams<S>,
) -> Result<Vec<EquilibriumReport<S>>, CoreError> {
    require_assumptions(params)?;
    let locations = [
        PlanarState::new(S::zero(), S::zero())?,
        PlanarState::new(S::one(), S::zero())?,
        interior_equilibrium(params)?,
    ];
    Ok(locations
        .into_iter()
        .map(|location| {
            let eigenvalues = eigenvalues_2x2(&jacobian_planar(&location, params));
            EquilibriumReport {
                location,
                eigenvalues,
                class: classify(eigenvalues),
            }
        })
        .collect())
}

/// Interior-equilibrium eigenvalues from the closed form
/// `lambda = p q +- sqrt(p^2 q^2 - p q (2 tau + gamma [kappa - sigma - alpha - 1]))`
/// with `p = tau / gamma`, `q = 1 - p`. Under the stability assumptions the
/// radicand is negative, so the real part is exactly `p q`.
pub fn eigenvalues_interior<S: Scalar>(
    params: &ModelParams<S>,
) -> Result<(Complex<S>, Complex<S>), CoreError> {
    require_assumptions(params)?;
    let p = params.tau() / params.gamma();
    let q = S::one() - p;
    let base = p * q;
    let radicand = base * base
        - base
            * (s::<S>(2.0) * params.tau()
                + params.gamma() * (params.kappa() - params.sigma() - params.alpha() - S::one()));
    if radicand < S::zero() {
        let omega = (-radicand).sqrt();
        Ok((Complex::new(base, omega), Complex::new(base, -omega)))
    } else {
        let root = radicand.sqrt();
        Ok((
            Complex::new(base + root, S::zero()),
            Complex::new(base - root, S::zero()),
        ))
    }
}

/// Options for Poincare-section cycle detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOptions<S: Scalar> {
    /// Section position; `None` uses the interior-equilibrium `x`.
    pub section_x: Option<S>,
    /// Relative tolerance on successive section impacts.
    pub crossing_tol: S,
    /// Stop after this many upward crossings.
    pub max_crossings: usize,
    /// Integration horizon.
    pub horizon: S,
    /// Interior floor on `x`; `None` disables the regularization.
    pub interior_floor: Option<S>,
    pub tol: Tolerances<S>,
}

impl<S: Scalar> Default for CycleOptions<S> {
    fn default() -> Self {
        Self {
            section_x: None,
            crossing_tol: s(1e-4),
            max_crossings: 100,
            horizon: s(2000.0),
            interior_floor: Some(s(DEFAULT_INTERIOR_FLOOR)),
            tol: Tolerances::default(),
        }
    }
}

/// Extremes of the last recorded cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleAmplitude<S: Scalar> {
    pub x_min: S,
    pub x_max: S,
    pub eps_min: S,
    pub eps_max: S,
}

/// Result of limit-cycle detection.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport<S: Scalar> {
    /// Three consecutive section returns agreed within the tolerance.
    pub converged: bool,
    /// Upward section crossings as `(time, eps)`.
    pub crossings: Vec<(S, S)>,
    /// Time between the last two crossings.
    pub period: Option<S>,
    /// Extremes over the last inter-crossing window.
    pub amplitude: Option<CycleAmplitude<S>>,
    /// Global transient peak of the impact as `(time, value)`.
    pub peak_eps_transient: (S, S),
}

/// Detect convergence to a periodic orbit of the planar system.
///
/// Integrates from `init`, records upward crossings of
/// `{x = section, dx > 0}` located by bisection on the dense output, and
/// declares convergence once three consecutive returns change the section
/// impact by less than `crossing_tol` relatively. Exhausting the horizon
/// yields `converged = false` with partial data.
pub fn detect_limit_cycle<S: Scalar>(
    params: &ModelParams<S>,
    init: &PlanarState<S>,
    opts: &CycleOptions<S>,
) -> Result<CycleReport<S>, CoreError> {
    require_assumptions(params)?;
    let equilibrium = interior_equilibrium(params)?;
    if init.x() == equilibrium.x() && init.eps() == equilibrium.eps() {
        return Err(CoreError::precondition(
            "init coincides with the interior equilibrium (a fixed point has no crossings)",
        ));
    }
    if !init.is_interior() {
        return Err(CoreError::precondition(
            "cycle detection requires an interior initial condition",
        ));
    }
    let p = *params;
    detect_cycle_with(
        move |x, eps| planar_rhs_parts(x, eps, &p),
        equilibrium.x(),
        init,
        opts,
    )
}

/// Cycle detection over an arbitrary planar field sharing the impact
/// equation's structure (`deps` sign flips at `x = turn_x`).
pub(crate) fn detect_cycle_with<S, F>(
    rhs: F,
    turn_x: S,
    init: &PlanarState<S>,
    opts: &CycleOptions<S>,
) -> Result<CycleReport<S>, CoreError>
where
    S: Scalar,
    F: Fn(S, S) -> (S, S),
{
    let section = opts.section_x.unwrap_or(turn_x);
    if !(section > S::zero() && section < S::one()) {
        return Err(CoreError::precondition("section x must lie in (0, 1)"));
    }
    if !(opts.crossing_tol > S::zero()) {
        return Err(CoreError::precondition(
            "crossing tolerance must be positive",
        ));
    }
    if opts.max_crossings < 4 {
        return Err(CoreError::precondition(
            "convergence needs at least four crossings",
        ));
    }
    let guard = match opts.interior_floor {
        Some(floor) => {
            if !(floor >= S::zero() && floor < s::<S>(0.1)) {
                return Err(CoreError::precondition(
                    "interior floor must be in [0, 0.1)",
                ));
            }
            PlanarGuard::InteriorFloor(floor)
        }
        None => PlanarGuard::ClosedBox,
    };

    let mut crossings: Vec<(S, S)> = Vec::new();
    let mut consecutive = 0usize;
    let mut converged = false;
    let mut peak_t = S::zero();
    let mut peak_eps = init.eps();

    let traj = {
        let crossings = &mut crossings;
        let consecutive = &mut consecutive;
        let converged = &mut converged;
        let peak_t = &mut peak_t;
        let peak_eps = &mut peak_eps;
        let crossing_tol = opts.crossing_tol;
        let max_crossings = opts.max_crossings;
        let rhs_ref = &rhs;

        let observer = move |seg: &StepSegment<S>| -> bool {
            // Track the impact peak: candidates are the step end and the
            // impact turning point (upward crossing of x through turn_x).
            if seg.y1[1] > *peak_eps {
                *peak_eps = seg.y1[1];
                *peak_t = seg.t1();
            }
            if seg.y0[0] < turn_x && seg.y1[0] >= turn_x {
                let (tc, state) = bisect_x_crossing(seg, turn_x);
                if state[1] > *peak_eps {
                    *peak_eps = state[1];
                    *peak_t = tc;
                }
            }
            // Upward section crossing.
            if seg.y0[0] < section && seg.y1[0] >= section {
                let (tc, state) = bisect_x_crossing(seg, section);
                let (dx, _) = rhs_ref(state[0], state[1]);
                if dx > S::zero() {
                    if let Some(&(_, prev_eps)) = crossings.last() {
                        let rel = (state[1] - prev_eps).abs() / prev_eps;
                        if rel < crossing_tol {
                            *consecutive += 1;
                        } else {
                            *consecutive = 0;
                        }
                    }
                    crossings.push((tc, state[1]));
                    if *consecutive >= 3 {
                        *converged = true;
                    }
                }
            }
            *converged || crossings.len() >= max_crossings
        };

        integrate_planar_raw(rhs_ref, init, opts.horizon, opts.tol, guard, observer)?
    };

    let amplitude = amplitude_over_window(&traj, &crossings);
    let period = match crossings.len() {
        0 | 1 => None,
        k => Some(crossings[k - 1].0 - crossings[k - 2].0),
    };
    Ok(CycleReport {
        converged,
        crossings,
        period,
        amplitude,
        peak_eps_transient: (peak_t, peak_eps),
    })
}

/// Extremes of `x` and `eps` over the last inter-crossing window, from
/// dense samples of every overlapping step.
fn amplitude_over_window<S: Scalar>(
    traj: &Trajectory<S>,
    crossings: &[(S, S)],
) -> Option<CycleAmplitude<S>> {
    let k = crossings.len();
    if k < 2 {
        return None;
    }
    let (t_a, _) = crossings[k - 2];
    let (t_b, _) = crossings[k - 1];
    let mut amp = CycleAmplitude {
        x_min: S::infinity(),
        x_max: S::neg_infinity(),
        eps_min: S::infinity(),
        eps_max: S::neg_infinity(),
    };
    let mut out = [S::zero(), S::zero()];
    let samples_per_seg = 16;
    for seg in &traj.segments {
        if seg.t1() < t_a || seg.t0 > t_b {
            continue;
        }
        let lo = seg.t0.max(t_a);
        let hi = seg.t1().min(t_b);
        for j in 0..=samples_per_seg {
            let t = lo + (hi - lo) * s::<S>(j as f64 / samples_per_seg as f64);
            seg.eval_into(t, &mut out[..]);
            amp.x_min = amp.x_min.min(out[0]);
            amp.x_max = amp.x_max.max(out[0]);
            amp.eps_min = amp.eps_min.min(out[1]);
            amp.eps_max = amp.eps_max.max(out[1]);
        }
    }
    Some(amp)
}

/// Bisect the dense output for the time where `x` reaches `target` inside a
/// step; interval shrunk below 1e-10.
fn bisect_x_crossing<S: Scalar>(seg: &StepSegment<S>, target: S) -> (S, [S; 2]) {
    let mut lo = seg.t0;
    let mut hi = seg.t1();
    let mut out = [S::zero(), S::zero()];
    let time_tol = s::<S>(1e-10);
    while hi - lo > time_tol {
        let mid = (lo + hi) * s::<S>(0.5);
        seg.eval_into(mid, &mut out[..]);
        if out[0] < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tc = (lo + hi) * s::<S>(0.5);
    seg.eval_into(tc, &mut out[..]);
    (tc, out)
}

/// Outcome tags for boundary initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryOutcome {
    /// Converges to `(1, 0)`: the whole population responsible, impact
    /// decaying to zero.
    ToResponsibleEquilibrium,
    /// Converges to `(0, 0)`.
    ToOriginEquilibrium,
    /// Impact exceeds [`DIVERGENCE_THRESHOLD`].
    Diverging,
}

/// Boundary run: outcome tag plus the integrated trajectory.
#[derive(Debug, Clone)]
pub struct BoundaryReport<S: Scalar> {
    pub outcome: BoundaryOutcome,
    pub trajectory: Trajectory<S>,
}

/// Integrate a boundary initial condition and tag where it goes.
///
/// `x = 1` decays onto `(1, 0)`; `eps = 0` slides to `(0, 0)`; `x = 0` with
/// positive impact grows without bound and is tagged diverging once the
/// impact passes the threshold. Interior inits are rejected (use
/// [`detect_limit_cycle`]).
pub fn boundary_behavior<S: Scalar>(
    init: &PlanarState<S>,
    params: &ModelParams<S>,
    horizon: S,
) -> Result<BoundaryReport<S>, CoreError> {
    let on_boundary = init.x() == S::zero() || init.x() == S::one() || init.eps() == S::zero();
    if !on_boundary {
        return Err(CoreError::precondition(
            "boundary_behavior requires an initial condition on the domain boundary",
        ));
    }
    let threshold = s::<S>(DIVERGENCE_THRESHOLD);
    let p = *params;
    let mut diverged = false;
    let traj = {
        let diverged = &mut diverged;
        integrate_planar_raw(
            move |x, eps| planar_rhs_parts(x, eps, &p),
            init,
            horizon,
            Tolerances::default(),
            PlanarGuard::ClosedBox,
            |seg: &StepSegment<S>| {
                if seg.y1[1] > threshold {
                    *diverged = true;
                    true
                } else {
                    false
                }
            },
        )?
    };

    let outcome = if diverged {
        BoundaryOutcome::Diverging
    } else if init.x() == S::one() {
        BoundaryOutcome::ToResponsibleEquilibrium
    } else if init.eps() == S::zero() {
        BoundaryOutcome::ToOriginEquilibrium
    } else {
        // x = 0 with eps > 0: impact is monotone at rate gamma - tau.
        let end = traj.end_state();
        if end[1] < init.eps() {
            BoundaryOutcome::ToOriginEquilibrium
        } else {
            return Err(CoreError::precondition(
                "impact still growing but below the divergence threshold; extend the horizon",
            ));
        }
    };
    Ok(BoundaryReport {
        outcome,
        trajectory: traj,
    })
}
