//! Impact-feedback policies: the campaign level `alpha` (or the subsidy
//! `sigma`) becomes a function of the impact `eps`, and the planar system is
//! integrated under the resulting state-dependent parameters. Policy
//! comparison reports transient impact peaks and cycle data side by side.

use std::cell::Cell;

use crate::analysis::{detect_cycle_with, CycleOptions, CycleReport};
use crate::error::CoreError;
use crate::meanfield::{planar_rhs_parts, PlanarState};
use crate::model::{validate_assumptions, ModelParams};
use crate::scalar::Scalar;

/// Which parameter the policy modulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyTarget {
    Alpha,
    Sigma,
}

/// Functional form of the feedback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind<S: Scalar> {
    /// Fixed at `base`, ignoring the impact.
    Constant,
    /// `base + gain * eps`.
    Linear,
    /// `base + gain * eps^exponent` with `exponent >= 1`.
    Power { exponent: S },
}

/// A state-feedback policy for one control parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPolicy<S: Scalar> {
    target: PolicyTarget,
    kind: PolicyKind<S>,
    base: S,
    gain: S,
}

impl<S: Scalar> ControlPolicy<S> {
    pub fn new(
        target: PolicyTarget,
        kind: PolicyKind<S>,
        base: S,
        gain: S,
    ) -> Result<Self, CoreError> {
        if !(base >= S::zero()) || !base.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "policy base",
                value: base.to_f64().unwrap_or(f64::NAN),
                constraint: "must be finite and >= 0",
            });
        }
        if !(gain >= S::zero()) || !gain.is_finite() {
            return Err(CoreError::InvalidParameter {
                name: "policy gain",
                value: gain.to_f64().unwrap_or(f64::NAN),
                constraint: "must be finite and >= 0",
            });
        }
        if let PolicyKind::Power { exponent } = kind {
            if !(exponent >= S::one()) || !exponent.is_finite() {
                return Err(CoreError::InvalidParameter {
                    name: "policy exponent",
                    value: exponent.to_f64().unwrap_or(f64::NAN),
                    constraint: "must be finite and >= 1",
                });
            }
        }
        Ok(Self {
            target,
            kind,
            base,
            gain,
        })
    }

    pub fn constant(target: PolicyTarget, base: S) -> Result<Self, CoreError> {
        Self::new(target, PolicyKind::Constant, base, S::zero())
    }

    pub fn linear(target: PolicyTarget, base: S, gain: S) -> Result<Self, CoreError> {
        Self::new(target, PolicyKind::Linear, base, gain)
    }

    pub fn power(target: PolicyTarget, base: S, gain: S, exponent: S) -> Result<Self, CoreError> {
        Self::new(target, PolicyKind::Power { exponent }, base, gain)
    }

    pub fn target(&self) -> PolicyTarget {
        self.target
    }

    pub fn kind(&self) -> PolicyKind<S> {
        self.kind
    }

    pub fn base(&self) -> S {
        self.base
    }

    pub fn gain(&self) -> S {
        self.gain
    }

    /// Effective value of the modulated parameter at impact level `eps`.
    /// For a sigma target the value is capped at `kappa` downstream.
    pub fn effective_value(&self, eps: S) -> S {
        match self.kind {
            PolicyKind::Constant => self.base,
            PolicyKind::Linear => self.base + self.gain * eps,
            PolicyKind::Power { exponent } => self.base + self.gain * eps.powf(exponent),
        }
    }
}

/// Parameters with the policy applied at impact level `eps`. All
/// non-targeted parameters pass through unchanged; a sigma policy is capped
/// at `kappa` so the subsidy never exceeds the cost.
pub fn effective_params<S: Scalar>(
    policy: &ControlPolicy<S>,
    eps: S,
    base_params: &ModelParams<S>,
) -> Result<ModelParams<S>, CoreError> {
    if !(eps >= S::zero()) {
        return Err(CoreError::OutOfDomain(format!("eps = {eps} negative")));
    }
    let value = policy.effective_value(eps);
    match policy.target() {
        PolicyTarget::Alpha => base_params.with_alpha(value),
        PolicyTarget::Sigma => base_params.with_sigma(value.min(base_params.kappa())),
    }
}

/// Planar field evaluated with the policy-adjusted parameters.
pub fn controlled_planar_rhs<S: Scalar>(
    state: &PlanarState<S>,
    base_params: &ModelParams<S>,
    policy: &ControlPolicy<S>,
) -> Result<(S, S), CoreError> {
    let params = effective_params(policy, state.eps(), base_params)?;
    Ok(planar_rhs_parts(state.x(), state.eps(), &params))
}

/// Per-policy outcome: the cycle report of the controlled system plus a flag
/// recording whether the effective parameters transiently left the stability
/// assumptions (the stability guarantees no longer apply to that run).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome<S: Scalar> {
    pub policy: ControlPolicy<S>,
    pub report: CycleReport<S>,
    pub a2_violated_transiently: bool,
}

/// Side-by-side policy results, one entry per input policy in order.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyComparison<S: Scalar> {
    pub outcomes: Vec<PolicyOutcome<S>>,
}

impl<S: Scalar> PolicyComparison<S> {
    /// Transient peak `(time, value)` of the k-th policy.
    pub fn peak(&self, k: usize) -> (S, S) {
        self.outcomes[k].report.peak_eps_transient
    }
}

/// Integrate every controlled system from `init` and collect transient
/// peaks and cycle data. The stability assumptions are checked against the
/// base parameters only; transient violations by the effective parameters
/// are recorded per policy, not rejected.
pub fn compare_policies<S: Scalar>(
    base_params: &ModelParams<S>,
    init: &PlanarState<S>,
    policies: &[ControlPolicy<S>],
    opts: &CycleOptions<S>,
) -> Result<PolicyComparison<S>, CoreError> {
    let report = validate_assumptions(base_params);
    if !report.both_hold() {
        return Err(CoreError::AssumptionsViolated(report.messages.join("; ")));
    }
    if !init.is_interior() {
        return Err(CoreError::precondition(
            "policy comparison requires an interior initial condition",
        ));
    }
    let turn_x = S::one() - base_params.tau() / base_params.gamma();

    let mut outcomes = Vec::with_capacity(policies.len());
    for policy in policies {
        let violated = Cell::new(false);
        let base = *base_params;
        let pol = *policy;
        let report = {
            let violated = &violated;
            detect_cycle_with(
                move |x, eps| {
                    // A non-finite effective value (power-policy overflow)
                    // poisons the step with NaN so the integrator aborts
                    // with a step-size error instead of panicking.
                    match effective_params(&pol, eps.max(S::zero()), &base) {
                        Ok(params) => {
                            if !(params.kappa() > params.sigma() + params.alpha() + S::one()) {
                                violated.set(true);
                            }
                            planar_rhs_parts(x, eps, &params)
                        }
                        Err(_) => (S::nan(), S::nan()),
                    }
                },
                turn_x,
                init,
                opts,
            )?
        };
        outcomes.push(PolicyOutcome {
            policy: *policy,
            report,
            a2_violated_transiently: violated.get(),
        });
    }
    Ok(PolicyComparison { outcomes })
}
