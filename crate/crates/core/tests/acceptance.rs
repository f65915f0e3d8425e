//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture --test-threads=1`.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::Vector5;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ring_orbit::bifurcate::{bifurcation_point, numerical_xi, xi_second_derivative};
use ring_orbit::continuation::{
    classify_endpoint, continue_branch, seed, Direction, EndpointLabel, StepConfig, StopConfig,
};
use ring_orbit::integrate::{eval_at, flow, IntegratorConfig};
use ring_orbit::model::{
    cartesian_lift, lambda_n, reduced_energy, ReducedState, ReducedSystem, SystemParams,
};
use ring_orbit::orbits::{closure_order, find_resonance, reconstruct, ResonanceTarget, THETA_TOL};
use ring_orbit::shoot::{Constraint, SeedPoint, Shooter, SymmetryKind, DEFAULT_TOL};

fn report(n: u32, pass: bool, detail: &str) {
    println!(
        "criterion {n}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {n} failed: {detail}");
}

fn small() -> SystemParams {
    SystemParams::new(3, 3.0, 7.0, 11.0).unwrap()
}

fn large() -> SystemParams {
    SystemParams::new(3, 92.0, 242.0, 11.0).unwrap()
}

fn shooter(p: SystemParams) -> Shooter {
    Shooter::new(p, IntegratorConfig::default())
}

fn max_norm(p: &SeedPoint, q: [f64; 3]) -> f64 {
    (p.a - q[0])
        .abs()
        .max((p.b - q[1]).abs())
        .max((p.t - q[2]).abs())
}

#[test]
fn criterion_01_lambda() {
    let l2 = lambda_n(2).unwrap();
    let l3 = lambda_n(3).unwrap();
    let l4 = lambda_n(4).unwrap();
    let e3 = (l3 - 3f64.powf(-0.5)).abs();
    let e4 = (l4 - (1.0 + 2.0 * 2f64.sqrt()) / 4.0).abs();
    report(
        1,
        l2 == 0.25 && e3 < 1e-12 && e4 < 1e-12,
        &format!(
            "lambda_2 = {l2}, |lambda_3 - 3^-1/2| = {e3:.1e}, |lambda_4 - (1+2sqrt2)/4| = {e4:.1e}"
        ),
    );
}

#[test]
fn criterion_02_small_bifurcation() {
    let p = small();
    let r = bifurcation_point(&p, SymmetryKind::Odd);
    let closed = PI * (7.0 + 3f64.sqrt()).sqrt() / 4.0;
    let e = eval_at(
        r.point.a,
        0.0,
        r.point.t,
        &p,
        &IntegratorConfig::default(),
        false,
    )
    .unwrap();
    let da = (r.point.a - 0.890967).abs();
    let dt = (r.point.t - 28.6536).abs();
    let dth = (closed - 2.32086).abs();
    let dint = (e.theta - closed).abs();
    report(
        2,
        da < 1e-4 && dt < 1e-4 && dth < 1e-4 && (r.theta0 - closed).abs() < 1e-12 && dint < 1e-9,
        &format!(
            "a0 = {:.8}, T0 = {:.6}, closed theta = {closed:.8}, |integrated - closed| = {dint:.1e}",
            r.point.a, r.point.t
        ),
    );
}

#[test]
fn criterion_03_large_bifurcation() {
    let r = bifurcation_point(&large(), SymmetryKind::Odd);
    let closed = 11.0 * (11.0f64 / 518.0).sqrt() * PI;
    let ok = (r.point.t - closed).abs() < 1e-12
        && (r.point.t - 5.03586).abs() < 1e-4
        && (r.point.a - 5.17965).abs() < 1e-4;
    report(
        3,
        ok,
        &format!(
            "T0 = {:.8} ({}), a0 = {:.8}",
            r.point.t, r.exact.t, r.point.a
        ),
    );
}

#[test]
fn criterion_04_newton_fixed_b() {
    let s = shooter(small());
    let start = Instant::now();
    let guess = SeedPoint::new(s.params.a0(), 0.05, s.params.t0(), SymmetryKind::Odd);
    let c = s
        .newton_correct(&guess, Constraint::FixedB(0.05), DEFAULT_TOL, 10)
        .unwrap();
    let elapsed = start.elapsed();
    let raw = s.residual(&c.point).unwrap();
    let ok = c.iterations <= 10
        && (c.point.a - 0.8892815).abs() < 1e-3
        && (c.point.t - 28.708).abs() < 1e-3
        && raw.amax() < 1e-6
        && elapsed < Duration::from_secs(5);
    report(
        4,
        ok,
        &format!(
            "{} iterations, (a, T) = ({:.7}, {:.5}), |F|, |R_t| <= {:.1e}, {:?}",
            c.iterations,
            c.point.a,
            c.point.t,
            raw.amax(),
            elapsed
        ),
    );
}

#[test]
fn criterion_05_resonances_on_branch() {
    let s = shooter(small());
    let start = Instant::now();
    let p1 = seed(
        &s,
        &SeedPoint::new(s.params.a0(), 0.05, s.params.t0(), SymmetryKind::Odd),
        DEFAULT_TOL,
    )
    .unwrap();
    let stop = StopConfig {
        theta_max: Some(PI + 0.05),
        ..StopConfig::default()
    };
    let branch = continue_branch(&s, &p1, Direction::Plus, &StepConfig::default(), &stop).unwrap();
    let targets = [
        ((3, 4), [0.866953, 0.187583, 29.4405]),
        ((4, 5), [0.775642, 0.400635, 32.6636]),
        ((1, 1), [0.547954, 0.634946, 41.1787]),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for ((n1, n2), expected) in targets {
        let t = ResonanceTarget::new(n1, n2).unwrap();
        let p = find_resonance(&s, &branch, &t, THETA_TOL).unwrap();
        let d = max_norm(&p, expected);
        ok &= d < 1e-2 && (p.theta - t.angle()).abs() < THETA_TOL && p.residual <= 1e-9;
        detail.push(format!(
            "{t}: ({:.6}, {:.6}, {:.4}) off by {d:.1e}",
            p.a, p.b, p.t
        ));
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(300);
    detail.push(format!(
        "{} branch points, {elapsed:?}",
        branch.points.len()
    ));
    report(5, ok, &detail.join("; "));
}

#[test]
fn criterion_06_trivial_limit_from_q0() {
    let s = shooter(large());
    let q0 = seed(
        &s,
        &SeedPoint::new(1.84153, 3.79392, 7.31715, SymmetryKind::Odd),
        DEFAULT_TOL,
    )
    .unwrap();
    let branch = continue_branch(
        &s,
        &q0,
        Direction::Minus,
        &StepConfig::default(),
        &StopConfig::default(),
    )
    .unwrap();
    let end = classify_endpoint(&branch);
    let closed_t = bifurcation_point(&large(), SymmetryKind::Odd).point.t;
    let ok = end.label == EndpointLabel::TrivialLimit
        && end.point.b.abs() < 1e-3
        && (end.point.a - 5.17965).abs() < 5e-3
        && (end.point.t - 5.03224).abs() < 5e-3
        && (end.point.t - closed_t).abs() < 5e-3;
    report(
        6,
        ok,
        &format!(
            "{:?} at (a, b, T) = ({:.6}, {:.1e}, {:.6}); |T - 5.03224| = {:.1e}; |T - T0| = {:.1e}",
            end.label,
            end.point.a,
            end.point.b,
            end.point.t,
            (end.point.t - 5.03224).abs(),
            (end.point.t - closed_t).abs()
        ),
    );
}

#[test]
fn criterion_07_xi_second_derivative() {
    let p = small();
    let closed = xi_second_derivative(&p).unwrap();
    let num = numerical_xi(&p, &IntegratorConfig::default(), 1e-2, 4).unwrap();
    let rel = ((closed.xi2 - num.xi2) / num.xi2).abs();
    let ok = rel < 1e-2 && num.xi1.abs() < 1e-6;
    report(
        7,
        ok,
        &format!(
            "closed form {:.6} (A = {:.4}, B = {:.4}, R_at = {:.6}), integral-curve second difference {:.6}, relative gap {:.2e}; xi'(0) = {:.1e}",
            closed.xi2, closed.coef_a, closed.coef_b, closed.r_at, num.xi2, rel, num.xi1
        ),
    );
}

#[test]
fn criterion_08_random_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let cfg = IntegratorConfig::default();
    let mut worst_l = 0.0f64;
    let mut worst_e = 0.0f64;
    let mut worst_s = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(2..=5u32);
        let m = rng.random_range(0.1..300.0);
        let big_m = rng.random_range(0.1..300.0);
        let r0 = rng.random_range(1.0..20.0);
        let b = rng.random_range(0.0..5.0);
        let p = SystemParams::new(n, m, big_m, r0).unwrap();
        let a = p.a0() * rng.random_range(0.8..1.2);
        let t_end = p.t0();

        let sys = ReducedSystem::new(p, a);
        let y0: Vector5<f64> = ReducedState::initial(&p, b).to_vector();
        let mut local = cfg;
        local.h_max = Some(t_end / 16.0);
        let res = flow(&sys, 0.0, y0, t_end, &local, true).unwrap();
        let samples = res.sample_uniform(0.0, 41).unwrap();
        let s0 = ReducedState::from_vector(0.0, &samples[0].1);
        let e0 = reduced_energy(&s0, &p, sys.c).unwrap();
        let l_expected = p.ring_mass() * r0 * a;
        for (t, y) in &samples {
            let st = ReducedState::from_vector(*t, y);
            let lz = cartesian_lift(&st, &p, sys.c).angular_momentum().z;
            worst_l = worst_l.max(((lz - l_expected) / l_expected).abs());
            let e = reduced_energy(&st, &p, sys.c).unwrap();
            worst_e = worst_e.max(((e - e0) / e0).abs());
        }

        // Sensitivities of the desingularised end state against central differences.
        let t_eval = 0.5 * t_end;
        let e = eval_at(a, b, t_eval, &p, &cfg, true).unwrap();
        let sens = e.sens.unwrap();
        let ha = 1e-5 * a;
        let hb = 1e-5 * b.max(1.0);
        let ep = eval_at(a + ha, b, t_eval, &p, &cfg, false).unwrap();
        let em = eval_at(a - ha, b, t_eval, &p, &cfg, false).unwrap();
        let bp = eval_at(a, b + hb, t_eval, &p, &cfg, false).unwrap();
        let bm = eval_at(a, b - hb, t_eval, &p, &cfg, false).unwrap();
        let fd = |plus: f64, minus: f64, h: f64| (plus - minus) / (2.0 * h);
        let col_a = [
            (sens.u_a, fd(ep.u, em.u, ha)),
            (sens.ut_a, fd(ep.ut, em.ut, ha)),
            (sens.r_a, fd(ep.r, em.r, ha)),
            (sens.rt_a, fd(ep.rt, em.rt, ha)),
            (sens.theta_a, fd(ep.theta, em.theta, ha)),
        ];
        let col_b = [
            (sens.u_b, fd(bp.u, bm.u, hb)),
            (sens.ut_b, fd(bp.ut, bm.ut, hb)),
            (sens.r_b, fd(bp.r, bm.r, hb)),
            (sens.rt_b, fd(bp.rt, bm.rt, hb)),
            (sens.theta_b, fd(bp.theta, bm.theta, hb)),
        ];
        for col in [col_a, col_b] {
            let scale = col.iter().map(|(s, _)| s.abs()).fold(0.0, f64::max);
            for (s, f) in col {
                worst_s = worst_s.max((s - f).abs() / scale);
            }
        }
    }
    report(
        8,
        worst_l < 1e-9 && worst_e < 1e-9 && worst_s < 1e-5,
        &format!("20 trajectories: angular momentum {worst_l:.1e}, energy {worst_e:.1e}, sensitivities {worst_s:.1e}"),
    );
}

#[test]
fn criterion_09_odd_even() {
    let s = shooter(small());
    let bif = bifurcation_point(&s.params, SymmetryKind::OddEven);
    let guess = SeedPoint::new(bif.point.a, 0.02, bif.point.t, SymmetryKind::OddEven);
    let c = s
        .newton_correct(&guess, Constraint::FixedB(0.02), DEFAULT_TOL, 20)
        .unwrap();
    let p = c.point;
    let close = s.periodicity_defect(&p).unwrap();
    let at_t = s.flow_state(&p, p.t).unwrap();
    let ok = close < 1e-8 && at_t.fdot.abs() < 1e-8 && at_t.rdot.abs() < 1e-8;
    report(
        9,
        ok,
        &format!(
            "T0/2 = {:.6}; corrected (a, T) = ({:.8}, {:.6}); 4T closure {close:.1e}; |fdot(T)| = {:.1e}, |rdot(T)| = {:.1e}",
            bif.point.t,
            p.a,
            p.t,
            at_t.fdot.abs(),
            at_t.rdot.abs()
        ),
    );
}

#[test]
fn criterion_10_closed_orbit() {
    let s = shooter(small());
    let p1 = seed(
        &s,
        &SeedPoint::new(s.params.a0(), 0.05, s.params.t0(), SymmetryKind::Odd),
        DEFAULT_TOL,
    )
    .unwrap();
    let stop = StopConfig {
        theta_max: Some(PI + 0.05),
        ..StopConfig::default()
    };
    let branch = continue_branch(&s, &p1, Direction::Plus, &StepConfig::default(), &stop).unwrap();
    let target = ResonanceTarget::new(1, 1).unwrap();
    let p4 = find_resonance(&s, &branch, &target, THETA_TOL).unwrap();
    let k = closure_order(&target, 3, SymmetryKind::Odd).k_strict;
    let tr = reconstruct(&s, &p4, k, 400).unwrap();
    let d = tr.diagnostics;
    let ok = d.closure_error < 1e-6
        && d.energy_drift < 1e-9
        && d.lz_drift < 1e-9
        && d.momentum_max < 1e-9
        && d.com_max < 1e-9
        && d.force_residual < 1e-9;
    report(
        10,
        ok,
        &format!(
            "k_strict = {k}; closure {:.1e}; energy {:.1e}; Lz {:.1e}; momentum {:.1e}; centre of mass {:.1e}; force {:.1e}",
            d.closure_error, d.energy_drift, d.lz_drift, d.momentum_max, d.com_max, d.force_residual
        ),
    );
}
