//! Whole-arc behavior of the hybrid integrator on systems with known
//! solutions.

use std::sync::Arc;

use synergistic::engine::{simulate, step_flow, HybridSystemSpec, SimConfig, Termination};

fn exp_endpoint_error(dt: f64) -> f64 {
    let spec = HybridSystemSpec::flow_only(1, Arc::new(|x: &[f64]| vec![x[0]]));
    let steps = (1.0 / dt).round() as usize;
    let mut x = vec![1.0];
    for _ in 0..steps {
        x = step_flow(&spec, &x, dt).unwrap();
    }
    (x[0] - 1f64.exp()).abs()
}

#[test]
fn rk4_error_shrinks_sixteenfold_when_the_step_halves() {
    for dt in [0.1, 0.05, 0.025] {
        let ratio = exp_endpoint_error(dt) / exp_endpoint_error(dt / 2.0);
        assert!((ratio - 16.0).abs() <= 2.0, "dt {dt}: ratio {ratio}");
    }
}

fn timer() -> HybridSystemSpec<f64> {
    HybridSystemSpec::new(
        1,
        Arc::new(|_: &[f64]| vec![1.0]),
        Arc::new(|x: &[f64]| x[0] - 1.0),
    )
    .with_jumps(Arc::new(|x: &[f64]| 1.0 - x[0]), Arc::new(|_: &[f64]| vec![vec![0.0]]))
}

#[test]
fn timer_resets_at_integer_times() {
    // a step size that does not divide the period
    let cfg = SimConfig {
        dt: 0.03,
        t_max: 5.5,
        ..SimConfig::default()
    };
    let arc = simulate(&timer(), &[0.0], &cfg).unwrap();
    assert_eq!(arc.termination(), Termination::TimeHorizon);
    assert_eq!(arc.jump_count(), 5);
    for (k, jr) in arc.jumps().iter().enumerate() {
        assert!((jr.t - (k + 1) as f64).abs() <= 1e-9, "jump {k} at {}", jr.t);
        assert_eq!(jr.j, k);
        assert_eq!(jr.post, vec![0.0]);
    }
    assert!(arc.is_hybrid_time_monotone());
    assert!((arc.final_state()[0] - 0.5).abs() <= 1e-9);
}

fn bouncing_ball(restitution: f64) -> HybridSystemSpec<f64> {
    HybridSystemSpec::new(
        2,
        Arc::new(|x: &[f64]| vec![x[1], -9.81]),
        Arc::new(|x: &[f64]| -x[0]),
    )
    .with_jumps(
        Arc::new(|x: &[f64]| x[0].max(x[1])),
        Arc::new(move |x: &[f64]| vec![vec![0.0, -restitution * x[1]]]),
    )
}

#[test]
fn bouncing_ball_impacts_follow_the_geometric_series() {
    let g = 9.81;
    let h0 = 1.0;
    let e = 0.8;
    let cfg = SimConfig {
        dt: 1e-3,
        t_max: 3.0,
        ..SimConfig::default()
    };
    let arc = simulate(&bouncing_ball(e), &[h0, 0.0], &cfg).unwrap();
    let t1 = (2.0 * h0 / g).sqrt();
    let v1 = g * t1;
    let mut expect = t1;
    let mut v = v1;
    for jr in arc.jumps() {
        assert!((jr.t - expect).abs() <= 1e-6, "impact {} at {} expected {expect}", jr.j, jr.t);
        v *= e;
        expect += 2.0 * v / g;
    }
    assert!(arc.jump_count() >= 4);
}

#[test]
fn zeno_accumulation_is_cut_by_the_jump_budget() {
    let cfg = SimConfig {
        dt: 1e-3,
        t_max: 10.0,
        j_max: 40,
        ..SimConfig::default()
    };
    let arc = simulate(&bouncing_ball(0.5), &[1.0, 0.0], &cfg).unwrap();
    assert_eq!(arc.termination(), Termination::JumpBudgetExhausted);
    assert_eq!(arc.jump_count(), 40);
    // impacts accumulate at t1 (1 + 2e/(1 − e)) = 3 t1
    let zeno = 3.0 * (2.0 / 9.81f64).sqrt();
    assert!(arc.final_time().t <= zeno + 1e-3);
}

#[test]
fn single_and_double_precision_arcs_agree() {
    let spec64 = HybridSystemSpec::flow_only(2, Arc::new(|x: &[f64]| vec![x[1], -x[0]]));
    let spec32 = HybridSystemSpec::flow_only(2, Arc::new(|x: &[f32]| vec![x[1], -x[0]]));
    let a = simulate(&spec64, &[1.0, 0.0], &SimConfig { t_max: 2.0, ..SimConfig::default() }).unwrap();
    let b = simulate(&spec32, &[1.0, 0.0], &SimConfig { t_max: 2.0, ..SimConfig::default() }).unwrap();
    let (xa, xb) = (a.final_state(), b.final_state());
    assert!((xa[0] - 2f64.cos()).abs() <= 1e-10);
    assert!((xb[0] as f64 - xa[0]).abs() <= 1e-3);
    assert!((xb[1] as f64 - xa[1]).abs() <= 1e-3);
}
