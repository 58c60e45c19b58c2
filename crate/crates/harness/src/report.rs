//! Derived bounds, critical point and quadruple audit for a scenario.

use std::fmt;

use synergistic::linalg::norm;
use synergistic::navigation::{self, sigma_nav};
use synergistic::smoothing::check_gap;
use synergistic::synergy::{audit_quadruple, mu, AuditReport, AuditSettings, SampleBox};

use crate::config::{ReferenceValue, ScenarioConfig};
use crate::error::HarnessError;
use crate::run::{build_controller, Governing};

/// Default number of Latin-hypercube states per audit.
pub const DEFAULT_AUDIT_SAMPLES: usize = 400;

/// Slack on the sampled decrease condition; the derivative is assembled from
/// terms that cancel, so exact zeros come back as rounding noise.
pub const AUDIT_C3_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub detail: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub scenario: String,
    pub delta_star: f64,
    pub c_kappa: f64,
    pub gamma_theta_bound: f64,
    pub critical_point: Option<[f64; 2]>,
    pub mu_at_critical: Option<f64>,
    pub audit: Option<AuditReport<f64>>,
    pub items: Vec<CheckItem>,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|i| !i.passed)
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "consistency report for {}", self.scenario)?;
        for item in &self.items {
            let tag = if item.passed { "PASS" } else { "FAIL" };
            writeln!(f, "[{tag}] {}: {}", item.name, item.detail)?;
        }
        Ok(())
    }
}

fn item(items: &mut Vec<CheckItem>, name: impl Into<String>, passed: bool, detail: String) {
    items.push(CheckItem {
        name: name.into(),
        detail,
        passed,
    });
}

fn reference_item(items: &mut Vec<CheckItem>, what: &str, computed: f64, reference: Option<ReferenceValue>) {
    if let Some(r) = reference {
        let dev = computed - r.value;
        item(
            items,
            format!("{what} matches reference"),
            dev.abs() <= r.tol,
            format!("computed {computed:.10}, reference {}, deviation {dev:+.3e}, tolerance {:.1e}", r.value, r.tol),
        );
    }
}

/// Critical states of the governing quadruple: `(p*, 0)` lifted with
/// `η = σ(0)` and `u = κ̄(p*, η)` where those channels exist.
pub fn lifted_critical_states(gov: &Governing, p_star: [f64; 2]) -> Vec<Vec<f64>> {
    let state = match gov {
        Governing::NonHybrid { .. } => return Vec::new(),
        Governing::Hybrid { .. } => vec![p_star[0], p_star[1], 0.0],
        Governing::SmoothHybrid { .. } => vec![p_star[0], p_star[1], 0.0, 0.0, 0.0],
        Governing::Backstepped { design, .. } => {
            let u = design.kappa_bar(&p_star, &[0.0, 0.0]);
            vec![p_star[0], p_star[1], 0.0, 0.0, u[0], u[1], 0.0]
        }
    };
    vec![state]
}

/// Sampling box for the packed state of the governing quadruple.
fn sample_box(cfg: &ScenarioConfig, gov: &Governing, count: usize, seed: u64) -> SampleBox<f64> {
    let w = &cfg.world;
    let reach = w.r_o + 2.0 * w.r_s;
    let xs = [w.p_o[0] - reach, w.p_o[0] + reach, w.p_d[0], cfg.initial.p0[0]];
    let ys = [w.p_o[1] - reach, w.p_o[1] + reach, w.p_d[1], cfg.initial.p0[1]];
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo - 1.0, hi + 1.0)
    };
    let (x_lo, x_hi) = span(&xs);
    let (y_lo, y_hi) = span(&ys);
    let th = 2.0 * cfg.gains.theta_max();
    let eta_r = 2.0 * norm(&sigma_nav(&cfg.world, cfg.gains.theta_max())).max(0.5);
    let mut lo = vec![x_lo, y_lo];
    let mut hi = vec![x_hi, y_hi];
    match gov {
        Governing::SmoothHybrid { .. } => {
            lo.extend([-eta_r, -eta_r]);
            hi.extend([eta_r, eta_r]);
        }
        Governing::Backstepped { .. } => {
            lo.extend([-eta_r, -eta_r, -5.0, -5.0]);
            hi.extend([eta_r, eta_r, 5.0, 5.0]);
        }
        _ => {}
    }
    lo.push(-th);
    hi.push(th);
    SampleBox { lo, hi, count, seed }
}

/// Audits the governing quadruple of the scenario (the nominal one for the
/// non-hybrid baseline) on seeded Latin-hypercube states.
pub fn audit_scenario(cfg: &ScenarioConfig, samples: usize, seed: u64) -> Result<AuditReport<f64>, HarnessError> {
    let mut controller = build_controller(cfg)?;
    if let Governing::NonHybrid { .. } = controller.governing {
        let (_, quad) = navigation::nominal_controller(&cfg.world, &cfg.gains).map_err(|source| HarnessError::Engine {
            scenario: cfg.name.clone(),
            source,
        })?;
        controller.governing = Governing::Hybrid { quad };
        controller.x0.push(cfg.initial.theta0);
    }
    let gov = &controller.governing;
    let (plant, quad) = match gov {
        Governing::Hybrid { quad } => (navigation::plant(&cfg.world), quad),
        Governing::SmoothHybrid { design, quad } => (design.smoothed_plant(), quad),
        Governing::Backstepped { design, quad } => (design.backstepped_plant(), quad),
        Governing::NonHybrid { .. } => unreachable!("replaced above"),
    };
    let critical = navigation::find_critical_point(&cfg.world)
        .map(|p| lifted_critical_states(gov, p))
        .unwrap_or_default();
    let settings = AuditSettings {
        c3_tol: AUDIT_C3_TOL,
        sample_box: Some(sample_box(cfg, gov, samples, seed)),
        rays: 16,
        seed,
    };
    Ok(audit_quadruple(&plant, quad, &[controller.x0.clone()], &critical, &settings))
}

pub fn report_consistency(cfg: &ScenarioConfig) -> ConsistencyReport {
    report_with_audit(cfg, DEFAULT_AUDIT_SAMPLES)
}

pub fn report_with_audit(cfg: &ScenarioConfig, audit_samples: usize) -> ConsistencyReport {
    let w = &cfg.world;
    let g = &cfg.gains;
    let mut items = Vec::new();

    let bound = navigation::gamma_theta_bound(w);
    item(
        &mut items,
        "gamma_theta < 4 r_o |p_d - p_o| / pi^2",
        g.gamma_theta < bound,
        format!("gamma_theta = {}, bound = {bound:.10}", g.gamma_theta),
    );
    let pi = std::f64::consts::PI;
    item(
        &mut items,
        "every theta in the switching set has 0 < |theta| < pi",
        g.theta_set.iter().all(|t| t.abs() > 0.0 && t.abs() < pi),
        format!("{:?}", g.theta_set),
    );
    let delta_star = navigation::delta_star(w, g);
    item(
        &mut items,
        "delta <= delta_star",
        g.delta <= delta_star,
        format!("delta = {}, delta_star = {delta_star:.10}", g.delta),
    );
    let c_kappa = navigation::c_kappa_nav(w, g);
    item(
        &mut items,
        "c_kappa = (1 - cos theta_max) |p_d - p_o|^2",
        c_kappa.is_finite() && c_kappa >= 0.0,
        format!("c_kappa = {c_kappa:.10}"),
    );
    if let Some(s) = &g.smoothing {
        let lim = if c_kappa > 0.0 { g.delta / c_kappa } else { f64::INFINITY };
        item(
            &mut items,
            "gamma_s < delta / c_kappa",
            s.gamma_s > 0.0 && s.gamma_s < lim,
            format!("gamma_s = {}, bound = {lim:.10}", s.gamma_s),
        );
        let gap = g.delta - s.gamma_s * c_kappa;
        item(
            &mut items,
            "delta_s <= delta - gamma_s * c_kappa (smoothing gap bound)",
            s.delta_s > 0.0 && check_gap("delta_s", s.delta_s, g.delta, s.gamma_s, c_kappa).is_ok(),
            format!("delta_s = {}, bound = {gap:.10}", s.delta_s),
        );
    }
    if let Some(b) = &g.backstepping {
        let gamma_s = g.smoothing.map_or(f64::NAN, |s| s.gamma_s);
        let gap = g.delta - gamma_s * c_kappa;
        item(
            &mut items,
            "delta_b <= delta - gamma_s * c_kappa (backstepping gap bound)",
            b.delta_b > 0.0 && check_gap("delta_b", b.delta_b, g.delta, gamma_s, c_kappa).is_ok(),
            format!("delta_b = {}, bound = {gap:.10}", b.delta_b),
        );
    }

    let mut critical_point = None;
    let mut mu_at_critical = None;
    match navigation::find_critical_point(w) {
        Ok(p) => {
            let grad = norm(&w.grad_v_nav_unchecked(p));
            item(
                &mut items,
                "saddle point p* behind the obstacle",
                grad <= 1e-8,
                format!("p* = ({:.10}, {:.10}), |grad V_nav(p*)| = {grad:.3e}", p[0], p[1]),
            );
            critical_point = Some(p);
            if let Ok((_, quad)) = navigation::nominal_controller(w, g) {
                let m = mu(&quad, &p, &[0.0]);
                mu_at_critical = Some(m);
                item(
                    &mut items,
                    "mu(p*, 0) > delta",
                    m > g.delta,
                    format!("mu = {m:.10}, delta = {}", g.delta),
                );
                item(
                    &mut items,
                    "mu(p*, 0) >= delta_star - 1e-9",
                    m >= delta_star - 1e-9,
                    format!("mu = {m:.10}, delta_star = {delta_star:.10}"),
                );
            }
        }
        Err(e) => item(&mut items, "saddle point p* behind the obstacle", false, e.to_string()),
    }

    reference_item(&mut items, "delta_star", delta_star, cfg.reference.delta_star);
    reference_item(&mut items, "c_kappa", c_kappa, cfg.reference.c_kappa);
    if let Some(p) = critical_point {
        reference_item(&mut items, "p*_x", p[0], cfg.reference.critical_point_x);
    }

    let audit = match audit_scenario(cfg, audit_samples, cfg.seed) {
        Ok(a) => {
            item(&mut items, "audit: V >= 0 on samples", a.v_nonnegative, format!("min V = {:.3e}", a.min_v));
            item(
                &mut items,
                "audit: <grad V, flow> <= 0 on samples",
                a.c3_ok,
                format!("worst = {:.3e} over {} samples", a.c3_worst, a.c3_samples),
            );
            item(
                &mut items,
                "audit: mu - gap > 0 at critical states",
                a.c4_ok,
                format!("margin = {:.6e}", a.c4_margin),
            );
            item(
                &mut items,
                "audit: sublevel ray probe (heuristic)",
                a.sublevel_probe_ok,
                "V grows along random rays".into(),
            );
            Some(a)
        }
        // parameter violations already have their own failing line
        Err(HarnessError::Engine {
            source: synergistic::Error::ParamBoundViolation { .. } | synergistic::Error::GainValidation { .. },
            ..
        }) => None,
        Err(e) => {
            item(&mut items, "audit", false, e.to_string());
            None
        }
    };

    ConsistencyReport {
        scenario: cfg.name.clone(),
        delta_star,
        c_kappa,
        gamma_theta_bound: bound,
        critical_point,
        mu_at_critical,
        audit,
        items,
    }
}
