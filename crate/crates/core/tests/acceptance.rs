//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities. Tolerances are pinned in the asserts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coevo_core::abm::{
    empirical_fractions, generator_matrix, simulate, simulate_frozen_impact, PopulationState,
};
use coevo_core::analysis::{
    boundary_behavior, detect_limit_cycle, eigenvalues_2x2, eigenvalues_interior, equilibria,
    interior_equilibrium, jacobian_planar, BoundaryOutcome, CycleOptions, EquilibriumClass,
};
use coevo_core::control::{compare_policies, ControlPolicy, PolicyTarget};
use coevo_core::meanfield::{
    integrate_node, integrate_planar, NodeProbabilities, PlanarState, Tolerances,
};
use coevo_core::model::{BehaviorVector, Graph, ModelParams};

/// Frozen reference values from a one-time run at tolerance 1e-11
/// (see tests/oracle_freeze.rs). Interior floor 1e-10, section x = 0.99.
const ORACLE_CYCLE_PERIOD: f64 = 48.256693;
const ORACLE_SECTION_EPS: f64 = 10.482875;
const ORACLE_TRANSIENT_PEAK: f64 = 25.270451277785;

fn fig1() -> ModelParams<f64> {
    ModelParams::new(10.0, 0.1, 0.6, 0.3, 3.0, 0.6).unwrap()
}

/// Deterministic sample of parameters satisfying both stability assumptions.
fn random_valid_params(rng: &mut ChaCha8Rng) -> ModelParams<f64> {
    let gamma = rng.gen_range(0.3..10.0);
    let tau = gamma * rng.gen_range(0.02..0.9);
    let mu = rng.gen_range(0.05..4.0);
    let alpha = rng.gen_range(0.0..2.0);
    let sigma = rng.gen_range(0.0..3.0);
    let kappa = sigma + alpha + 1.0 + rng.gen_range(0.05..6.0);
    ModelParams::new(gamma, tau, mu, alpha, kappa, sigma).unwrap()
}

#[test]
fn c1_equilibrium_formulas_and_classes() {
    let params = fig1();
    let _ = equilibria(&params).unwrap(); // warm up

    let start = Instant::now();
    let reports = equilibria(&params).unwrap();
    let elapsed = start.elapsed();

    assert_eq!(reports.len(), 3);
    assert_eq!(reports[0].location.x(), 0.0);
    assert_eq!(reports[0].location.eps(), 0.0);
    assert_eq!(reports[1].location.x(), 1.0);
    assert_eq!(reports[1].location.eps(), 0.0);

    let interior = &reports[2];
    assert_eq!(interior.location.x(), 0.99);
    let expected_eps = (2.0 * params.tau() / params.gamma() + params.kappa()
        - params.sigma()
        - params.alpha()
        - 1.0)
        / params.mu();
    assert!((interior.location.eps() - 28.0 / 15.0).abs() <= 1e-12);
    assert!((interior.location.eps() - expected_eps).abs() <= 1e-12);

    assert_eq!(reports[0].class, EquilibriumClass::Saddle);
    assert_eq!(reports[1].class, EquilibriumClass::Saddle);
    assert_eq!(interior.class, EquilibriumClass::UnstableSpiral);

    assert!(
        elapsed.as_micros() < 1000,
        "equilibria took {elapsed:?}, budget 1 ms"
    );
    println!(
        "acceptance 1: PASS - equilibria (0,0)/(1,0)/(0.99,{:.12}) saddle/saddle/unstable-spiral in {elapsed:?}",
        interior.location.eps()
    );
}

#[test]
fn c2_eigenvalue_formula_against_general_solver() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let params = random_valid_params(&mut rng);
        let closed = eigenvalues_interior(&params).unwrap();

        // Radicand negative on every draw: the pair must be complex.
        assert!(closed.0.im != 0.0, "radicand not negative for {params:?}");

        // Real part is structurally (tau/gamma)(1 - tau/gamma).
        let ratio = params.tau() / params.gamma();
        assert_eq!(closed.0.re, ratio * (1.0 - ratio));

        let eq = interior_equilibrium(&params).unwrap();
        let general = eigenvalues_2x2(&jacobian_planar(&eq, &params));
        let d_re = (closed.0.re - general.0.re).abs();
        let d_im = (closed.0.im - general.0.im).abs();
        worst = worst.max(d_re).max(d_im);
        assert!(
            d_re <= 1e-10 && d_im <= 1e-10,
            "eigenvalue mismatch {d_re:.2e}/{d_im:.2e} for {params:?}"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "budget 1 s, took {elapsed:?}");
    println!(
        "acceptance 2: PASS - 100 draws, closed-form vs general eigensolver within {worst:.2e} in {elapsed:?}"
    );
}

#[test]
fn c3_limit_cycle_convergence_and_frozen_period() {
    let start = Instant::now();
    let params = fig1();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let opts = CycleOptions::default(); // horizon 2000, tol 1e-4, floor 1e-10

    let mut periods = Vec::new();
    for k in 0..10 {
        let x0 = rng.gen_range(0.05..0.95);
        let e0 = rng.gen_range(0.05..3.0);
        let init = PlanarState::new(x0, e0).unwrap();
        let report = detect_limit_cycle(&params, &init, &opts).unwrap();
        assert!(
            report.converged,
            "init {k} ({x0:.4}, {e0:.4}) did not converge within horizon 2000"
        );
        periods.push(report.period.unwrap());
    }

    let pmin = periods.iter().cloned().fold(f64::INFINITY, f64::min);
    let pmax = periods.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = (pmax - pmin) / pmin;
    assert!(
        spread < 1e-3,
        "periods spread {spread:.2e} exceeds 1e-3: {periods:?}"
    );
    for p in &periods {
        let rel = (p - ORACLE_CYCLE_PERIOD).abs() / ORACLE_CYCLE_PERIOD;
        assert!(rel < 1e-3, "period {p} off frozen oracle by {rel:.2e}");
    }

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "budget 30 s, took {elapsed:?}"
    );
    println!(
        "acceptance 3: PASS - 10 inits converged, period {pmin:.6}..{pmax:.6} (oracle {ORACLE_CYCLE_PERIOD}) in {elapsed:?}"
    );
}

#[test]
fn c4_invariance_fuzzing() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let tol = Tolerances::default();
    // Accepted states are clamped onto the box up to the integrator's
    // error scale (16 (abs + rel) at the defaults); any larger excursion
    // aborts the integration itself. Dense readout carries the same noise.
    let clamp = 2e-8;

    for case in 0..1000 {
        let params = random_valid_params(&mut rng);

        // Planar layer.
        let init =
            PlanarState::new(rng.gen_range(0.001..0.999), rng.gen_range(0.001..3.0)).unwrap();
        let traj = integrate_planar(&params, &init, 50.0, tol)
            .unwrap_or_else(|e| panic!("case {case}: planar integration failed: {e}"));
        for k in 0..=50 {
            let y = traj.sample(k as f64).unwrap();
            assert!(
                y[0] >= -clamp && y[0] <= 1.0 + clamp,
                "case {case}: x = {} left the box",
                y[0]
            );
            assert!(y[1] >= -clamp, "case {case}: eps = {} negative", y[1]);
        }

        // Node layer on a random strongly-supported digraph.
        let n = rng.gen_range(2..=6);
        let mut edges = Vec::new();
        for i in 0..n {
            // guarantee degree >= 1, then sprinkle extras
            edges.push((i, rng.gen_range(0..n)));
        }
        for _ in 0..(2 * n) {
            edges.push((rng.gen_range(0..n), rng.gen_range(0..n)));
        }
        let g = Graph::from_edges(n, &edges).unwrap();
        let p1: Vec<f64> = (0..n).map(|_| rng.gen_range(0.001..0.999)).collect();
        let init = NodeProbabilities::new(p1).unwrap();
        let eps0 = rng.gen_range(0.001..3.0);
        let traj = integrate_node(&g, &params, &init, eps0, 50.0, tol)
            .unwrap_or_else(|e| panic!("case {case}: node integration failed: {e}"));
        for k in 0..=25 {
            let y = traj.sample(2.0 * k as f64).unwrap();
            for (i, v) in y.iter().take(n).enumerate() {
                assert!(
                    *v >= -clamp && *v <= 1.0 + clamp,
                    "case {case}: p1[{i}] = {v} left the box"
                );
            }
            assert!(y[n] >= -clamp, "case {case}: eps = {} negative", y[n]);
        }
    }

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 300.0,
        "budget 5 min, took {elapsed:?}"
    );
    println!(
        "acceptance 4: PASS - 1000 random systems stayed in their boxes over horizon 50 in {elapsed:?}"
    );
}

#[test]
fn c5_boundary_outcomes() {
    let params = fig1();

    // Case i: x = 1 edge converges to (1, 0) with eps = eps0 exp(-tau t).
    let eps0 = 5.0;
    let report = boundary_behavior(&PlanarState::new(1.0, eps0).unwrap(), &params, 20.0).unwrap();
    assert_eq!(report.outcome, BoundaryOutcome::ToResponsibleEquilibrium);
    for k in 0..20 {
        let t = 20.0 * k as f64 / 19.0;
        let st = report.trajectory.planar_at(t).unwrap();
        let expected = eps0 * (-params.tau() * t).exp();
        assert!(
            (st.eps() - expected).abs() <= 1e-9 * eps0,
            "t = {t}: |{} - {expected}| > 1e-9 * eps0",
            st.eps()
        );
    }

    // Case ii: eps = 0 edge slides to (0, 0).
    let report = boundary_behavior(&PlanarState::new(0.7, 0.0).unwrap(), &params, 20.0).unwrap();
    assert_eq!(report.outcome, BoundaryOutcome::ToOriginEquilibrium);

    // Case iii: x = 0 edge diverges.
    let report = boundary_behavior(&PlanarState::new(0.0, 0.01).unwrap(), &params, 20.0).unwrap();
    assert_eq!(report.outcome, BoundaryOutcome::Diverging);

    println!(
        "acceptance 5: PASS - boundary cases tag to-(1,0)/to-(0,0)/diverging; decay closed form within 1e-9"
    );
}

#[test]
fn c6_meanfield_reduction_consistency() {
    let start = Instant::now();
    let params = fig1();
    let n = 200;
    let g = Graph::complete(n).unwrap();
    let (x0, eps0) = (0.985, 1.8);
    let init = NodeProbabilities::uniform(n, x0).unwrap();
    // Each side must be integrated well below the 1e-8 comparison bound;
    // at rel 1e-9 the accumulated global error alone reaches ~3e-8.
    let tol = Tolerances::new(1e-11, 1e-13).unwrap();

    let node_traj = integrate_node(&g, &params, &init, eps0, 20.0, tol).unwrap();
    let planar_traj =
        integrate_planar(&params, &PlanarState::new(x0, eps0).unwrap(), 20.0, tol).unwrap();

    let mut sup = 0.0f64;
    for k in 0..=400 {
        let t = 20.0 * k as f64 / 400.0;
        let y = node_traj.sample(t).unwrap();
        let mean = y[..n].iter().sum::<f64>() / n as f64;
        let eps = y[n];
        let planar = planar_traj.planar_at(t).unwrap();
        sup = sup
            .max((mean - planar.x()).abs())
            .max((eps - planar.eps()).abs());
    }
    assert!(sup <= 1e-8, "sup-norm {sup:.2e} exceeds 1e-8");

    let elapsed = start.elapsed();
    println!(
        "acceptance 6: PASS - n=200 node system reduces onto the planar one, sup-norm {sup:.2e} in {elapsed:?}"
    );
}

#[test]
fn c7_abm_tracks_meanfield() {
    let start = Instant::now();
    let params = fig1();
    let n = 1000;
    let g = Graph::complete(n).unwrap();
    let horizon = 5.0;
    let runs = 20;

    let mut bits = vec![0u8; n];
    bits.iter_mut().take(n / 2).for_each(|b| *b = 1);
    let behavior = BehaviorVector::new(bits).unwrap();
    let eps0 = 0.5;

    let grid: Vec<f64> = (0..50).map(|k| horizon * k as f64 / 49.0).collect();
    let mut mean_x = vec![0.0f64; grid.len()];
    let mut mean_eps = vec![0.0f64; grid.len()];
    for run in 0..runs {
        let init = PopulationState::new(0.0, behavior.clone(), eps0).unwrap();
        let traj = simulate(&g, &params, &init, horizon, 9000 + run as u64).unwrap();
        let rows = empirical_fractions(&traj, &grid).unwrap();
        for (k, (t, _, xbar1)) in rows.into_iter().enumerate() {
            mean_x[k] += xbar1 / runs as f64;
            mean_eps[k] += traj.impact_at(t).unwrap() / runs as f64;
        }
    }

    let planar = integrate_planar(
        &params,
        &PlanarState::new(0.5, eps0).unwrap(),
        horizon,
        Tolerances::default(),
    )
    .unwrap();

    let mut sup_x = 0.0f64;
    let mut sup_eps_rel = 0.0f64;
    for (k, &t) in grid.iter().enumerate() {
        let reference = planar.planar_at(t).unwrap();
        sup_x = sup_x.max((mean_x[k] - reference.x()).abs());
        sup_eps_rel = sup_eps_rel.max((mean_eps[k] - reference.eps()).abs() / reference.eps());
    }
    assert!(sup_x <= 0.05, "behavior sup-norm {sup_x:.4} exceeds 0.05");
    assert!(
        sup_eps_rel <= 0.10,
        "impact relative deviation {sup_eps_rel:.4} exceeds 10%"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "budget 2 min, took {elapsed:?}"
    );
    println!(
        "acceptance 7: PASS - n=1000 mean of 20 runs within {sup_x:.4} (behavior) / {:.2}% (impact) of the planar solution in {elapsed:?}",
        100.0 * sup_eps_rel
    );
}

#[test]
fn c8_ctmc_exactness_oracle() {
    let start = Instant::now();
    let params = fig1();
    let n = 3;
    let g = Graph::complete(n).unwrap();
    let eps = 1.0;
    let t_end = 1.0;
    let runs = 100_000;

    // Initial configuration (1, 0, 0) -> index 0b001.
    let init_bits = BehaviorVector::new(vec![1, 0, 0]).unwrap();
    let init_index = 0b001usize;

    let mut counts = vec![0usize; 1 << n];
    for run in 0..runs {
        let init = PopulationState::new(0.0, init_bits.clone(), eps).unwrap();
        let traj = simulate_frozen_impact(&g, &params, &init, t_end, 77_000 + run as u64).unwrap();
        let mut bits = init_bits.clone();
        for e in traj.events() {
            bits.set(e.node, e.responsible as u8);
        }
        let config = bits
            .bits()
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| acc | ((b as usize) << i));
        counts[config] += 1;
    }

    let q = generator_matrix(&g, &params, eps).unwrap();
    let mut p0 = vec![0.0f64; 1 << n];
    p0[init_index] = 1.0;
    let reference = q.transient_distribution(&p0, t_end).unwrap();

    let tv: f64 = counts
        .iter()
        .zip(reference.iter())
        .map(|(&c, &p)| (c as f64 / runs as f64 - p).abs())
        .sum::<f64>()
        / 2.0;
    assert!(tv < 0.01, "total variation {tv:.5} exceeds 0.01");

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "budget 1 min, took {elapsed:?}"
    );
    println!(
        "acceptance 8: PASS - 1e5 frozen-impact runs vs matrix exponential, TV = {tv:.5} in {elapsed:?}"
    );
}

#[test]
fn c9_feedback_control_reduces_peaks() {
    let params = fig1();
    let init = PlanarState::new(0.5, 0.5).unwrap();
    let opts = CycleOptions::default();

    let policies = [
        ControlPolicy::constant(PolicyTarget::Alpha, 0.3).unwrap(),
        ControlPolicy::linear(PolicyTarget::Alpha, 0.3, 0.5).unwrap(),
        ControlPolicy::linear(PolicyTarget::Alpha, 0.3, 0.0).unwrap(),
    ];
    let cmp = compare_policies(&params, &init, &policies, &opts).unwrap();
    let (_, peak_const) = cmp.peak(0);
    let (_, peak_linear) = cmp.peak(1);
    assert!(
        peak_linear < peak_const,
        "linear gain 0.5 peak {peak_linear} not strictly below constant {peak_const}"
    );

    // The uncontrolled transient peak matches the frozen oracle value.
    assert!(
        (peak_const - ORACLE_TRANSIENT_PEAK).abs() / ORACLE_TRANSIENT_PEAK < 1e-6,
        "uncontrolled peak {peak_const} drifted from {ORACLE_TRANSIENT_PEAK}"
    );
    let uncontrolled = detect_limit_cycle(&params, &init, &opts).unwrap();
    assert_eq!(cmp.outcomes[0].report, uncontrolled);

    // Gain 0 reproduces the uncontrolled run exactly.
    assert_eq!(cmp.outcomes[2].report, uncontrolled);
    assert!(
        (ORACLE_SECTION_EPS - uncontrolled.crossings.last().unwrap().1).abs() / ORACLE_SECTION_EPS
            < 1e-3
    );

    println!(
        "acceptance 9: PASS - peaks {peak_const:.4} (constant) vs {peak_linear:.4} (linear gain 0.5); gain-0 run identical to uncontrolled"
    );
}
