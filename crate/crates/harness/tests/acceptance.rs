//! Acceptance suite. Prints one `[PASS]`/`[FAIL]` line per criterion, with
//! indented detail lines underneath, and exits nonzero if any criterion
//! fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synergistic::backstepping::{toy, BackstepState};
use synergistic::engine::{simulate, step_flow, HybridSystemSpec, SimConfig};
use synergistic::linalg::norm;
use synergistic::navigation::{self, grad_p_syn, grad_theta_syn, v_syn, NavigationWorld};
use synergistic::smoothing::{kappa_bar, SmoothedState};
use synergistic::synergy::assemble_closed_loop;
use synergistic_harness::export::csv_bytes;
use synergistic_harness::run::{RunRecord, PROPERTY_TOL, REACH_RADIUS};
use synergistic_harness::{load_config, report_consistency, run_many, run_scenario, ControllerKind, ScenarioConfig};

struct Suite {
    failed: Vec<String>,
}

impl Suite {
    fn criterion(&mut self, id: &str, title: &str, passed: bool, details: &[String]) {
        println!("[{}] {id} {title}", if passed { "PASS" } else { "FAIL" });
        for d in details {
            println!("       {d}");
        }
        if !passed {
            self.failed.push(id.to_string());
        }
    }
}

fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"));
    load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn shipped() -> Vec<ScenarioConfig> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_config(p).unwrap()).collect()
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "FAIL"
    }
}

fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    diff / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(floor)
}

fn diff5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn critical_point(s: &mut Suite) {
    let world = config("wide_barrier_hybrid").world;
    let start = Instant::now();
    let p = navigation::find_critical_point(&world);
    let elapsed = start.elapsed().as_secs_f64();
    let (ok, detail) = match p {
        Ok(p) => {
            let grad = norm(&world.grad_v_nav_unchecked(p));
            let dev = p[0] - 5.6865;
            (
                dev.abs() <= 2e-2 && p[1] == 0.0 && grad <= 1e-8 && elapsed < 1.0,
                vec![
                    format!("p* = ({:.6}, {}), |p*_x - 5.6865| = {:.4e} (tol 2e-2)", p[0], p[1], dev.abs()),
                    format!("|grad V_nav(p*)| = {grad:.3e} (tol 1e-8)"),
                    format!("runtime {elapsed:.4} s (limit 1 s)"),
                ],
            )
        }
        Err(e) => (false, vec![e.to_string()]),
    };
    s.criterion("1", "saddle point of the navigation function", ok, &detail);
}

fn parameter_consistency(s: &mut Suite) {
    let start = Instant::now();
    let cfg = config("blocked_smooth_hybrid");
    let (w, g) = (&cfg.world, &cfg.gains);
    // independent evaluation with the numbers written out
    let oracle_delta_star = (2.0 * 2.0 * 5.0 / (PI * PI) - 2.0264 / 2.0) * 0.04;
    let oracle_c_kappa = (1.0 - 0.2f64.cos()) * 25.0;
    let delta_star = navigation::delta_star(w, g);
    let c_kappa = navigation::c_kappa_nav(w, g);
    let sm = g.smoothing.unwrap();
    let report = report_consistency(&cfg);
    let elapsed = start.elapsed().as_secs_f64();

    let checks = [
        (
            (delta_star - oracle_delta_star).abs() <= 1e-6 && (oracle_delta_star - 0.040529).abs() <= 1e-6,
            format!("delta* = {delta_star:.10}, oracle {oracle_delta_star:.10}, quoted 0.040529"),
        ),
        (g.delta <= delta_star, format!("delta = {} <= delta*", g.delta)),
        (
            (c_kappa - oracle_c_kappa).abs() <= 1e-12 && (c_kappa - 0.498337).abs() <= 2e-6,
            format!(
                "c_kappa = {c_kappa:.10}, oracle {oracle_c_kappa:.10}, quoted 0.498337 (differs by {:.2e})",
                (c_kappa - 0.498337).abs()
            ),
        ),
        (sm.gamma_s < g.delta / c_kappa, format!("gamma_s = {} < delta/c_kappa = {:.10}", sm.gamma_s, g.delta / c_kappa)),
        (
            sm.delta_s <= g.delta - sm.gamma_s * c_kappa,
            format!("delta_s = {} <= delta - gamma_s c_kappa = {:.10}", sm.delta_s, g.delta - sm.gamma_s * c_kappa),
        ),
        (report.passed(), format!("consistency report on {}: {}", cfg.name, if report.passed() { "all checks pass" } else { "failures" })),
        (elapsed < 1.0, format!("runtime {elapsed:.4} s (limit 1 s)")),
    ];
    let ok = checks.iter().all(|c| c.0);
    let details: Vec<String> = checks.iter().map(|(p, d)| format!("{} {d}", mark(*p))).collect();
    s.criterion("2", "parameter consistency of the collinear scenario", ok, &details);
    if !report.passed() {
        print!("{report}");
    }
}

fn reproduction_within_ten_seconds(s: &mut Suite, long_runs: &[(ScenarioConfig, RunRecord)]) {
    let start = Instant::now();
    let names = ["blocked_hybrid", "blocked_smooth_hybrid", "blocked_non_hybrid"];
    let cfgs: Vec<ScenarioConfig> = names
        .iter()
        .map(|n| {
            let mut c = config(n);
            c.sim.t_max = 10.0;
            c
        })
        .collect();
    let records: Vec<RunRecord> = run_many(&cfgs).into_iter().map(|r| r.unwrap()).collect();
    let elapsed = start.elapsed().as_secs_f64();
    let mut ok = true;
    let mut details = Vec::new();
    for (cfg, rec) in cfgs.iter().zip(&records) {
        let sm = &rec.summary;
        if cfg.controller == ControllerKind::NonHybrid {
            let pass = sm.final_dist_to_dest > 1.0 && sm.final_grad_norm <= 1e-6;
            ok &= pass;
            details.push(format!(
                "{} {}: final |p - p_d| = {:.6} (> 1), |grad V_nav| = {:.3e} (<= 1e-6)",
                mark(pass),
                cfg.name,
                sm.final_dist_to_dest,
                sm.final_grad_norm
            ));
        } else {
            let reached = sm.reach_time.is_some();
            let jumped = sm.jump_count >= 1;
            ok &= reached && jumped;
            let longer = long_runs
                .iter()
                .find(|(c, _)| c.name == cfg.name)
                .and_then(|(_, r)| r.summary.reach_time)
                .map_or("never".to_string(), |t| format!("{t:.2} s"));
            details.push(format!(
                "{} {}: jumps {} (>= 1), |p - p_d| at t = 10 s is {:.4} (<= {REACH_RADIUS}); \
                 with t_max = 200 s it first gets within {REACH_RADIUS} at {longer}",
                mark(reached && jumped),
                cfg.name,
                sm.jump_count,
                sm.final_dist_to_dest,
            ));
        }
    }
    ok &= elapsed < 5.0;
    details.push(format!("{} runtime {elapsed:.3} s (limit 5 s)", mark(elapsed < 5.0)));
    s.criterion("3", "collinear scenario: hybrid loops arrive within 10 s, baseline stalls", ok, &details);
}

fn lyapunov_properties(s: &mut Suite, runs: &[(ScenarioConfig, RunRecord)]) {
    let mut ok = true;
    let mut details = Vec::new();
    for (cfg, rec) in runs {
        let sm = &rec.summary;
        let pass = sm.flow_monotone() && sm.jump_drops_ok() && sm.jump_count_ok();
        ok &= pass;
        details.push(format!(
            "{} {}: max flow rise {:.2e} (<= {PROPERTY_TOL:e}), min jump drop - gap {}, jumps {} <= {}",
            mark(pass),
            cfg.name,
            sm.max_flow_increase,
            sm.min_jump_drop_margin.map_or("-".into(), |m| format!("{m:.2e}")),
            sm.jump_count,
            sm.jump_bound.map_or("-".into(), |b| b.to_string()),
        ));
    }
    s.criterion("4", "Lyapunov decrease along flows and across jumps", ok, &details);
}

fn safety(s: &mut Suite, runs: &[(ScenarioConfig, RunRecord)]) {
    let mut ok = true;
    let mut details = Vec::new();
    for (cfg, rec) in runs {
        let m = rec.summary.min_safety_margin;
        ok &= m >= 0.0;
        details.push(format!(
            "{} {}: min |p - p_o| - r_o = {:.6} (epsilon {}), clamped steps {}",
            mark(m >= 0.0),
            cfg.name,
            m + cfg.world.epsilon,
            cfg.world.epsilon,
            rec.summary.projections
        ));
    }
    s.criterion("5", "arcs stay outside the epsilon shell", ok, &details);
}

fn random_free_point(rng: &mut ChaCha8Rng, w: &NavigationWorld<f64>) -> [f64; 2] {
    loop {
        let p = if rng.gen_bool(0.5) {
            let r = w.r_o + rng.gen_range(w.epsilon + 1e-3..w.r_s);
            let a = rng.gen_range(-PI..PI);
            [w.p_o[0] + r * a.cos(), w.p_o[1] + r * a.sin()]
        } else {
            [rng.gen_range(-4.0..12.0), rng.gen_range(-6.0..6.0)]
        };
        // keep stencils off the barrier's activation radius
        let d = w.d_o(p);
        if d > w.epsilon + 1e-3 && (d - w.r_s).abs() > 1e-3 {
            return p;
        }
    }
}

fn flow_derivative(spec: &HybridSystemSpec<f64>, x: &[f64], h: f64, g: impl Fn(&[f64]) -> Vec<f64>) -> Vec<f64> {
    let fwd = g(&step_flow(spec, x, h).unwrap());
    let bwd = g(&step_flow(spec, x, -h).unwrap());
    fwd.iter().zip(&bwd).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

fn gradient_suites(s: &mut Suite) {
    const STATES: usize = 100;
    let cfg = config("blocked_backstepped");
    let (world, gains) = (cfg.world, cfg.gains.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let (mut worst_p, mut worst_t, mut worst_phi) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..STATES {
        let p = random_free_point(&mut rng, &world);
        let th = rng.gen_range(-1.5..1.5);
        let h = 1e-4;
        let fd = [
            diff5(|x| v_syn(&world, &gains, [x, p[1]], th).unwrap(), p[0], h),
            diff5(|y| v_syn(&world, &gains, [p[0], y], th).unwrap(), p[1], h),
        ];
        worst_p = worst_p.max(rel_err(&grad_p_syn(&world, p, th).unwrap(), &fd, 1e-3));
        let fd_t = diff5(|t| v_syn(&world, &gains, p, t).unwrap(), th, h);
        worst_t = worst_t.max(rel_err(&[grad_theta_syn(&world, &gains, p, th).unwrap()], &[fd_t], 1e-3));
        let z = rng.gen_range(world.epsilon..world.r_s - 1e-3);
        let fd_phi = diff5(|x| world.phi(x).unwrap(), z, 1e-5 * z);
        worst_phi = worst_phi.max(rel_err(&[world.dphi(z).unwrap()], &[fd_phi], 1e-3));
    }

    // time derivatives along simulated flows
    let smooth = navigation::smooth_controller(&world, &gains).unwrap();
    let squad = smooth.smoothed_quadruple().unwrap();
    let sspec = assemble_closed_loop(&smooth.smoothed_plant(), &squad).unwrap();
    let x0 = SmoothedState {
        x: cfg.initial.p0.to_vec(),
        eta: navigation::sigma_nav(&world, 0.0).to_vec(),
        theta: vec![0.0],
    }
    .pack();
    let arc = simulate(&sspec, &x0, &SimConfig { t_max: 6.0, ..SimConfig::default() }).unwrap();
    let (mut worst_sigma, mut n_sigma) = (0.0f64, 0);
    for (k, (_, x)) in arc.samples().enumerate() {
        if k % 50 != 25 {
            continue;
        }
        let st = SmoothedState::unpack(x, 2, 2);
        let an = smooth.d_t_sigma(&st.x, &st.eta, &st.theta);
        let fd = flow_derivative(&sspec, x, 1e-4, |y| navigation::sigma_nav(&world, y[4]).to_vec());
        worst_sigma = worst_sigma.max(rel_err(&an, &fd, 1e-8));
        n_sigma += 1;
    }

    let back = navigation::backstepped_controller(&world, &gains).unwrap();
    let bquad = back.backstepped_quadruple().unwrap();
    let bspec = assemble_closed_loop(&back.backstepped_plant(), &bquad).unwrap();
    let eta0 = navigation::sigma_nav(&world, 0.0).to_vec();
    let x0 = BackstepState {
        x: cfg.initial.p0.to_vec(),
        u: back.kappa_bar(&cfg.initial.p0, &eta0),
        eta: eta0,
        theta: vec![0.0],
    }
    .pack();
    let arc = simulate(&bspec, &x0, &SimConfig { dt: cfg.sim.dt, t_max: 3.0, ..SimConfig::default() }).unwrap();
    let fb = back.smoothed.feedback.clone();
    let (mut worst_kb, mut n_kb) = (0.0f64, 0);
    for (k, (_, x)) in arc.samples().enumerate() {
        if k % 50 != 25 {
            continue;
        }
        let st = BackstepState::unpack(x, 2, 2, 2);
        let an = back.d_t_kappa_bar(&st.x, &st.eta, &st.u, &st.theta);
        let fd = flow_derivative(&bspec, x, 1e-5, |y| kappa_bar(&fb, &y[..2], &y[2..4]));
        worst_kb = worst_kb.max(rel_err(&an, &fd, 1e-6));
        n_kb += 1;
    }

    let checks = [
        (worst_p <= 1e-6, format!("grad_p V over {STATES} states: worst rel err {worst_p:.2e} (tol 1e-6)")),
        (worst_t <= 1e-6, format!("grad_theta V over {STATES} states: worst rel err {worst_t:.2e} (tol 1e-6)")),
        (worst_phi <= 1e-6, format!("phi' over {STATES} distances: worst rel err {worst_phi:.2e} (tol 1e-6)")),
        (
            worst_sigma <= 1e-4 && n_sigma >= 100,
            format!("D_t sigma along a smoothed flow, {n_sigma} states: worst rel err {worst_sigma:.2e} (tol 1e-4)"),
        ),
        (
            worst_kb <= 1e-4 && n_kb >= 100,
            format!("D_t kappa_bar along a backstepped flow, {n_kb} states: worst rel err {worst_kb:.2e} (tol 1e-4)"),
        ),
    ];
    let ok = checks.iter().all(|c| c.0);
    let details: Vec<String> = checks.iter().map(|(p, d)| format!("{} {d}", mark(*p))).collect();
    s.criterion("6", "analytic derivatives against finite differences", ok, &details);
}

fn smoothness(s: &mut Suite, runs: &[(ScenarioConfig, RunRecord)]) {
    let mut ok = true;
    let mut details = Vec::new();
    for (cfg, rec) in runs {
        let sm = &rec.summary;
        if cfg.controller == ControllerKind::SmoothHybrid {
            let d = sm.max_input_jump.unwrap_or(0.0);
            ok &= d <= 1e-9;
            details.push(format!(
                "{} {}: largest input change across {} jumps {d:.2e} (<= 1e-9)",
                mark(d <= 1e-9),
                cfg.name,
                sm.jump_count
            ));
        }
        if cfg.controller != ControllerKind::NonHybrid && sm.reach_time.is_some() {
            let th = sm.final_theta.unwrap_or(f64::NAN).abs();
            ok &= th <= 1e-3;
            details.push(format!("{} {}: terminal |theta| = {th:.2e} (<= 1e-3)", mark(th <= 1e-3), cfg.name));
        }
    }
    s.criterion("7", "continuous input across jumps and decaying theta", ok, &details);
}

fn backstepping(s: &mut Suite, runs: &[(ScenarioConfig, RunRecord)]) {
    let mut ok = true;
    let mut details = Vec::new();
    let (sp, bp) = toy::default_gains();
    let design = toy::scalar_design::<f64>(sp, bp).unwrap();
    let quad = design.backstepped_quadruple().unwrap();
    let spec = assemble_closed_loop(&design.backstepped_plant(), &quad).unwrap();
    for (x, eta, u, th) in [(2.0, 0.0, 0.0, 0.0), (-1.5, 1.0, 3.0, 0.8), (0.5, -2.0, -1.0, -1.2)] {
        let x0 = BackstepState {
            x: vec![x],
            eta: vec![eta],
            u: vec![u],
            theta: vec![th],
        }
        .pack();
        let arc = simulate(&spec, &x0, &SimConfig { t_max: 20.0, ..SimConfig::default() }).unwrap();
        let mut rise = f64::NEG_INFINITY;
        for seg in arc.segments() {
            let vs: Vec<f64> = seg.iter().map(|(_, st)| quad.v_packed(st)).collect();
            for w in vs.windows(2) {
                rise = rise.max(w[1] - w[0]);
            }
        }
        let fin = BackstepState::unpack(arc.final_state(), 1, 1, 1);
        let track = (fin.u[0] - design.kappa_bar(&fin.x, &fin.eta)[0]).abs();
        let pass = rise <= PROPERTY_TOL && track <= 1e-3;
        ok &= pass;
        details.push(format!(
            "{} scalar plant from (x, eta, u, theta) = ({x}, {eta}, {u}, {th}): max V_b rise {rise:.2e}, \
             terminal |u - kappa_bar| {track:.2e}, jumps {}",
            mark(pass),
            arc.jump_count()
        ));
    }
    for (cfg, rec) in runs.iter().filter(|(c, _)| c.controller == ControllerKind::Backstepped) {
        let sm = &rec.summary;
        let track = sm.final_input_tracking.unwrap_or(f64::NAN);
        let converged = sm.reach_time.is_some();
        let pass = sm.flow_monotone() && (!converged || track <= 1e-3);
        ok &= pass;
        details.push(format!(
            "{} {}: max V_b rise {:.2e}, terminal |u - kappa_bar| {track:.2e}, final |p - p_d| {:.2e}",
            mark(pass),
            cfg.name,
            sm.max_flow_increase,
            sm.final_dist_to_dest
        ));
    }
    s.criterion("8", "backstepping through an input integrator", ok, &details);
}

fn engine_order_and_determinism(s: &mut Suite) {
    let spec = HybridSystemSpec::flow_only(1, std::sync::Arc::new(|x: &[f64]| vec![x[0]]));
    let err = |dt: f64| {
        let mut x = vec![1.0];
        for _ in 0..(1.0 / dt).round() as usize {
            x = step_flow(&spec, &x, dt).unwrap();
        }
        (x[0] - 1f64.exp()).abs()
    };
    let ratio = err(0.1) / err(0.05);
    let order_ok = (ratio - 16.0).abs() <= 2.0;

    let cfg = config("blocked_hybrid");
    let a = csv_bytes(&run_scenario(&cfg).unwrap()).unwrap();
    let b = csv_bytes(&run_scenario(&cfg).unwrap()).unwrap();
    let same = a == b;
    s.criterion(
        "9",
        "integrator order and reproducible output",
        order_ok && same,
        &[
            format!("{} RK4 error ratio dt 0.1 -> 0.05 on x' = x: {ratio:.3} (16 +- 2)", mark(order_ok)),
            format!("{} two runs of {} give identical CSV ({} bytes)", mark(same), cfg.name, a.len()),
        ],
    );
}

fn multi_start_sweep(s: &mut Suite) {
    const STARTS: usize = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let phase = rng.gen_range(0.0..2.0 * PI / STARTS as f64);
    let mut cfgs = Vec::new();
    for name in ["blocked_hybrid", "blocked_smooth_hybrid"] {
        let base = config(name);
        for k in 0..STARTS {
            let a = phase + 2.0 * PI * k as f64 / STARTS as f64 + rng.gen_range(-0.05..0.05);
            let mut c = base.clone();
            c.name = format!("{name}#{k}");
            c.initial.p0 = [base.world.p_d[0] + 12.0 * a.cos(), base.world.p_d[1] + 12.0 * a.sin()];
            c.initial.eta0 = None;
            cfgs.push(c);
        }
    }
    let start = Instant::now();
    let results = run_many(&cfgs);
    let mut ok = true;
    let mut details = Vec::new();
    for name in ["blocked_hybrid", "blocked_smooth_hybrid"] {
        let mut converged = 0;
        let mut slowest = 0.0f64;
        let mut unsafe_runs = 0;
        for (c, r) in cfgs.iter().zip(&results) {
            if !c.name.starts_with(&format!("{name}#")) {
                continue;
            }
            let sm = &r.as_ref().unwrap().summary;
            if sm.final_dist_to_dest <= REACH_RADIUS && sm.properties_hold() {
                converged += 1;
                slowest = slowest.max(sm.reach_time.unwrap_or(f64::NAN));
            }
            if !sm.safe() {
                unsafe_runs += 1;
            }
        }
        let pass = converged == STARTS && unsafe_runs == 0;
        ok &= pass;
        details.push(format!(
            "{} {name}: {converged}/{STARTS} starts on the radius-12 ring converge with all properties, slowest arrival {slowest:.1} s",
            mark(pass)
        ));
    }
    details.push(format!("runtime {:.2} s", start.elapsed().as_secs_f64()));
    s.criterion("sweep", "multi-start convergence of the hybrid controllers", ok, &details);
}

fn main() -> ExitCode {
    let total = Instant::now();
    let mut s = Suite { failed: Vec::new() };

    let cfgs = shipped();
    let records = run_many(&cfgs);
    let runs: Vec<(ScenarioConfig, RunRecord)> = cfgs
        .into_iter()
        .zip(records)
        .map(|(c, r)| {
            let r = r.unwrap_or_else(|e| panic!("{}: {e}", c.name));
            (c, r)
        })
        .collect();

    critical_point(&mut s);
    parameter_consistency(&mut s);
    reproduction_within_ten_seconds(&mut s, &runs);
    lyapunov_properties(&mut s, &runs);
    safety(&mut s, &runs);
    gradient_suites(&mut s);
    smoothness(&mut s, &runs);
    backstepping(&mut s, &runs);
    engine_order_and_determinism(&mut s);
    multi_start_sweep(&mut s);

    println!("acceptance finished in {:.1} s", total.elapsed().as_secs_f64());
    if s.failed.is_empty() {
        println!("all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {}", s.failed.join(", "));
        ExitCode::FAILURE
    }
}
