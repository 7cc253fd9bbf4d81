//! Adaptive Dormand-Prince 5(4) stepper with 4th-order dense output.
//!
//! Plain explicit pair, error per step controlled against
//! `atol + rtol * |y|` in WRMS norm. Every accepted step stores its stage
//! derivatives so the trajectory can be interpolated anywhere without
//! re-integration. No FSAL reuse: the post-step projection may move the
//! accepted state, so stage one is always evaluated fresh.

use crate::error::CoreError;
use crate::scalar::{s, Scalar};

// Butcher tableau (Dormand & Prince 1980).
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
// Dense-output weights for the fifth interpolation coefficient.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 10.0;
const MAX_STEPS: usize = 100_000_000;

/// One accepted step: start state, stage derivatives, end state.
#[derive(Debug, Clone)]
pub(crate) struct StepSegment<S: Scalar> {
    pub t0: S,
    pub h: S,
    pub y0: Vec<S>,
    /// Seven stage derivatives k1..k7 (k7 at the step end point).
    pub k: [Vec<S>; 7],
    /// Accepted (projected) end state.
    pub y1: Vec<S>,
}

impl<S: Scalar> StepSegment<S> {
    pub fn t1(&self) -> S {
        self.t0 + self.h
    }

    /// Dense interpolation at `t` within `[t0, t1]`.
    pub fn eval_into(&self, t: S, out: &mut [S]) {
        let theta = (t - self.t0) / self.h;
        let one_m = S::one() - theta;
        for i in 0..out.len() {
            let ydiff = self.y1[i] - self.y0[i];
            let c3 = self.h * self.k[0][i] - ydiff;
            let c4 = ydiff - self.h * self.k[6][i] - c3;
            let mut c5 = S::zero();
            for (j, d) in D.iter().enumerate() {
                c5 = c5 + s::<S>(*d) * self.k[j][i];
            }
            c5 = c5 * self.h;
            out[i] = self.y0[i] + theta * (ydiff + one_m * (c3 + theta * (c4 + one_m * c5)));
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

pub(crate) struct Integration<S: Scalar> {
    pub segments: Vec<StepSegment<S>>,
    pub stats: StepStats,
    /// True if the observer requested an early stop.
    pub stopped_early: bool,
}

/// Integrate `dy/dt = rhs(t, y)` from `t0` to `t_end`.
///
/// `project` is applied to every accepted end state and may clamp it onto
/// the admissible domain or reject it (aborting the run). `observer` sees
/// each accepted segment and returns `true` to stop early.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate<S, F, P, O>(
    mut rhs: F,
    mut project: P,
    mut observer: O,
    t0: S,
    y0: &[S],
    t_end: S,
    rtol: S,
    atol: S,
) -> Result<Integration<S>, CoreError>
where
    S: Scalar,
    F: FnMut(S, &[S], &mut [S]),
    P: FnMut(S, &mut [S]) -> Result<(), String>,
    O: FnMut(&StepSegment<S>) -> bool,
{
    let dim = y0.len();
    if !(rtol > S::zero() && atol > S::zero()) {
        return Err(CoreError::precondition("tolerances must be positive"));
    }
    if !(t_end > t0) {
        return Err(CoreError::precondition("horizon must exceed start time"));
    }

    let mut t = t0;
    let mut y = y0.to_vec();
    project(t, &mut y).map_err(|reason| CoreError::Integration {
        t: t.to_f64().unwrap_or(f64::NAN),
        reason,
    })?;

    let mut k: [Vec<S>; 7] = std::array::from_fn(|_| vec![S::zero(); dim]);
    let mut y_stage = vec![S::zero(); dim];
    let mut y5 = vec![S::zero(); dim];

    let mut segments = Vec::new();
    let mut stats = StepStats::default();
    let mut stopped_early = false;

    let (k0, mut h) = initial_step(&mut rhs, t, &y, t_end, rtol, atol);
    k[0] = k0;

    let mut just_rejected;
    loop {
        if t >= t_end {
            break;
        }
        if stats.accepted + stats.rejected > MAX_STEPS {
            return Err(CoreError::Integration {
                t: t.to_f64().unwrap_or(f64::NAN),
                reason: format!("step budget exhausted ({MAX_STEPS})"),
            });
        }
        let h_floor = S::epsilon() * s::<S>(16.0) * t.abs().max(S::one());
        if h < h_floor {
            return Err(CoreError::Integration {
                t: t.to_f64().unwrap_or(f64::NAN),
                reason: format!("step size underflow (h = {h})"),
            });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        // Stages 2..7 (stage 1 derivative already in k[0]).
        let a_rows: [&[f64]; 6] = [&A2, &A3, &A4, &A5, &A6, &A7];
        for (row, a) in a_rows.iter().enumerate() {
            let stage = row + 1;
            for i in 0..dim {
                let mut acc = S::zero();
                for (j, aij) in a.iter().enumerate() {
                    acc = acc + s::<S>(*aij) * k[j][i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            let tc = t + s::<S>(C[stage]) * h;
            let (head, tail) = k.split_at_mut(stage);
            let _ = head;
            rhs(tc, &y_stage, &mut tail[0]);
        }

        // Fifth-order solution and embedded error estimate.
        let mut err_norm_sq = S::zero();
        for i in 0..dim {
            let mut acc5 = S::zero();
            let mut acc4 = S::zero();
            for j in 0..7 {
                acc5 = acc5 + s::<S>(B5[j]) * k[j][i];
                acc4 = acc4 + s::<S>(B4[j]) * k[j][i];
            }
            y5[i] = y[i] + h * acc5;
            let err = h * (acc5 - acc4);
            let scale = atol + rtol * y[i].abs().max(y5[i].abs());
            let q = err / scale;
            err_norm_sq = err_norm_sq + q * q;
        }
        let err_norm = (err_norm_sq / s::<S>(dim as f64)).sqrt();

        if err_norm <= S::one() {
            // Accept: k7 must be the derivative at the unprojected end point
            // for the interpolant, so evaluate before projecting.
            rhs(t + h, &y5, &mut k[6]);
            let mut y1 = y5.clone();
            project(t + h, &mut y1).map_err(|reason| CoreError::Integration {
                t: (t + h).to_f64().unwrap_or(f64::NAN),
                reason,
            })?;

            let segment = StepSegment {
                t0: t,
                h,
                y0: y.clone(),
                k: k.clone(),
                y1: y1.clone(),
            };
            stats.accepted += 1;
            let stop = observer(&segment);
            segments.push(segment);

            t = t + h;
            y = y1;
            rhs(t, &y, &mut k[0]);
            just_rejected = false;

            if stop {
                stopped_early = true;
                break;
            }
        } else {
            stats.rejected += 1;
            just_rejected = true;
        }

        let mut scale = s::<S>(SAFETY) * err_norm.powf(-s::<S>(0.2));
        scale = scale.max(s::<S>(MIN_SCALE)).min(s::<S>(MAX_SCALE));
        if just_rejected {
            scale = scale.min(S::one());
        }
        h = h * scale;
    }

    Ok(Integration {
        segments,
        stats,
        stopped_early,
    })
}

/// Starting step size (Hairer, Norsett & Wanner II.4 heuristic).
fn initial_step<S, F>(rhs: &mut F, t0: S, y0: &[S], t_end: S, rtol: S, atol: S) -> (Vec<S>, S)
where
    S: Scalar,
    F: FnMut(S, &[S], &mut [S]),
{
    let dim = y0.len();
    let mut f0 = vec![S::zero(); dim];
    rhs(t0, y0, &mut f0);

    let wrms = |v: &[S], yref: &[S]| -> S {
        let mut acc = S::zero();
        for i in 0..dim {
            let scale = atol + rtol * yref[i].abs();
            let q = v[i] / scale;
            acc = acc + q * q;
        }
        (acc / s::<S>(dim as f64)).sqrt()
    };

    let d0 = wrms(y0, y0);
    let d1 = wrms(&f0, y0);
    let tiny = s::<S>(1e-5);
    let mut h0 = if d0 < tiny || d1 < tiny {
        s::<S>(1e-6)
    } else {
        s::<S>(0.01) * d0 / d1
    };
    h0 = h0.min(t_end - t0);

    let mut y1 = vec![S::zero(); dim];
    for i in 0..dim {
        y1[i] = y0[i] + h0 * f0[i];
    }
    let mut f1 = vec![S::zero(); dim];
    rhs(t0 + h0, &y1, &mut f1);
    let mut df = vec![S::zero(); dim];
    for i in 0..dim {
        df[i] = f1[i] - f0[i];
    }
    let d2 = wrms(&df, y0) / h0;

    let dmax = d1.max(d2);
    let h1 = if dmax <= s::<S>(1e-15) {
        (h0 * s::<S>(1e-3)).max(s::<S>(1e-6))
    } else {
        (s::<S>(0.01) / dmax).powf(s::<S>(0.2))
    };
    let h = (s::<S>(100.0) * h0).min(h1).min(t_end - t0);
    (f0, h)
}
