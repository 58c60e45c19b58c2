//! Building the closed loop a scenario asks for, simulating it, and
//! summarizing the arc.

use synergistic::backstepping::BackstepState;
use synergistic::engine::{simulate, HybridArc, HybridSystemSpec, Termination};
use synergistic::linalg::{norm, sub};
use synergistic::navigation::{self, NavigationWorld};
use synergistic::smoothing::SmoothedState;
use synergistic::synergy::{assemble_closed_loop, mu};
use synergistic::{BacksteppedDesignF64, QuadrupleF64, SmoothedDesignF64};

use crate::config::{ControllerKind, ScenarioConfig};
use crate::error::HarnessError;

/// Radius around the destination that counts as arrived.
pub const REACH_RADIUS: f64 = 0.05;

/// Slack on the Lyapunov and safety property checks.
pub const PROPERTY_TOL: f64 = 1e-6;

/// The function governing a closed loop and the pieces needed to read
/// plant quantities off its packed state.
#[derive(Clone)]
pub enum Governing {
    NonHybrid { world: NavigationWorld<f64>, k_p: f64 },
    Hybrid { quad: QuadrupleF64 },
    SmoothHybrid { design: SmoothedDesignF64, quad: QuadrupleF64 },
    Backstepped { design: BacksteppedDesignF64, quad: QuadrupleF64 },
}

/// Per-sample plant quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Readout {
    pub p: [f64; 2],
    pub theta: Option<f64>,
    pub eta: Option<[f64; 2]>,
    pub u: [f64; 2],
    pub v: f64,
    pub mu: Option<f64>,
}

impl Governing {
    pub fn quad(&self) -> Option<&QuadrupleF64> {
        match self {
            Self::NonHybrid { .. } => None,
            Self::Hybrid { quad } | Self::SmoothHybrid { quad, .. } | Self::Backstepped { quad, .. } => Some(quad),
        }
    }

    /// Gap of the governing quadruple.
    pub fn gap(&self) -> Option<f64> {
        self.quad().map(|q| q.delta())
    }

    pub fn v(&self, s: &[f64]) -> f64 {
        match self {
            Self::NonHybrid { world, .. } => world.v_nav_unchecked([s[0], s[1]]),
            _ => self.quad().map_or(f64::NAN, |q| q.v_packed(s)),
        }
    }

    pub fn read(&self, s: &[f64]) -> Readout {
        let p = [s[0], s[1]];
        match self {
            Self::NonHybrid { world, k_p } => {
                let g = world.grad_v_nav_unchecked(p);
                Readout {
                    p,
                    theta: None,
                    eta: None,
                    u: [-k_p * g[0], -k_p * g[1]],
                    v: world.v_nav_unchecked(p),
                    mu: None,
                }
            }
            Self::Hybrid { quad } => {
                let u = quad.kappa(&s[..2], &s[2..]);
                Readout {
                    p,
                    theta: Some(s[2]),
                    eta: None,
                    u: [u[0], u[1]],
                    v: quad.v_packed(s),
                    mu: Some(mu(quad, &s[..2], &s[2..])),
                }
            }
            Self::SmoothHybrid { design, quad } => {
                let st = SmoothedState::unpack(s, 2, 2);
                let u = design.kappa_bar(&st.x, &st.eta);
                Readout {
                    p,
                    theta: Some(st.theta[0]),
                    eta: Some([st.eta[0], st.eta[1]]),
                    u: [u[0], u[1]],
                    v: quad.v_packed(s),
                    mu: Some(mu(quad, &s[..4], &s[4..])),
                }
            }
            Self::Backstepped { quad, .. } => {
                let st = BackstepState::unpack(s, 2, 2, 2);
                Readout {
                    p,
                    theta: Some(st.theta[0]),
                    eta: Some([st.eta[0], st.eta[1]]),
                    u: [st.u[0], st.u[1]],
                    v: quad.v_packed(s),
                    mu: Some(mu(quad, &s[..6], &s[6..])),
                }
            }
        }
    }

    /// `‖u − κ̄(x, η)‖` for the backstepped loop.
    pub fn input_tracking_error(&self, s: &[f64]) -> Option<f64> {
        match self {
            Self::Backstepped { design, .. } => {
                let st = BackstepState::unpack(s, 2, 2, 2);
                Some(norm(&sub(&st.u, &design.kappa_bar(&st.x, &st.eta))))
            }
            _ => None,
        }
    }
}

/// Closed loop, initial state and governing function of a scenario.
#[derive(Clone)]
pub struct Controller {
    pub kind: ControllerKind,
    pub spec: HybridSystemSpec<f64>,
    pub x0: Vec<f64>,
    pub governing: Governing,
}

fn engine_err(cfg: &ScenarioConfig) -> impl Fn(synergistic::Error) -> HarnessError + '_ {
    move |source| HarnessError::Engine {
        scenario: cfg.name.clone(),
        source,
    }
}

pub fn build_controller(cfg: &ScenarioConfig) -> Result<Controller, HarnessError> {
    let err = engine_err(cfg);
    let world = &cfg.world;
    let gains = &cfg.gains;
    let init = &cfg.initial;
    let eta0 = init
        .eta0
        .unwrap_or_else(|| navigation::sigma_nav(world, init.theta0));
    let (spec, x0, governing) = match cfg.controller {
        ControllerKind::NonHybrid => (
            navigation::non_hybrid_spec(world, gains.k_p),
            init.p0.to_vec(),
            Governing::NonHybrid {
                world: *world,
                k_p: gains.k_p,
            },
        ),
        ControllerKind::Hybrid => {
            let (plant, quad) = navigation::nominal_controller(world, gains).map_err(&err)?;
            let spec = assemble_closed_loop(&plant, &quad).map_err(&err)?;
            (spec, vec![init.p0[0], init.p0[1], init.theta0], Governing::Hybrid { quad })
        }
        ControllerKind::SmoothHybrid => {
            let design = navigation::smooth_controller(world, gains).map_err(&err)?;
            let quad = design.smoothed_quadruple().map_err(&err)?;
            let spec = assemble_closed_loop(&design.smoothed_plant(), &quad).map_err(&err)?;
            let x0 = SmoothedState {
                x: init.p0.to_vec(),
                eta: eta0.to_vec(),
                theta: vec![init.theta0],
            }
            .pack();
            (spec, x0, Governing::SmoothHybrid { design, quad })
        }
        ControllerKind::Backstepped => {
            let design = navigation::backstepped_controller(world, gains).map_err(&err)?;
            let quad = design.backstepped_quadruple().map_err(&err)?;
            let spec = assemble_closed_loop(&design.backstepped_plant(), &quad).map_err(&err)?;
            let u0 = init
                .u0
                .map(|u| u.to_vec())
                .unwrap_or_else(|| design.kappa_bar(&init.p0, &eta0));
            let x0 = BackstepState {
                x: init.p0.to_vec(),
                eta: eta0.to_vec(),
                u: u0,
                theta: vec![init.theta0],
            }
            .pack();
            (spec, x0, Governing::Backstepped { design, quad })
        }
    };
    let spec = if cfg.clamp {
        spec.with_projection(navigation::clamp_projection(world))
    } else {
        spec
    };
    Ok(Controller {
        kind: cfg.controller,
        spec,
        x0,
        governing,
    })
}

/// One CSV row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t: f64,
    pub j: usize,
    pub px: f64,
    pub py: f64,
    pub theta: Option<f64>,
    pub eta: Option<[f64; 2]>,
    pub u: [f64; 2],
    pub v: f64,
    pub mu: Option<f64>,
    pub dobs: f64,
    pub ddest: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpLog {
    pub t: f64,
    pub j: usize,
    pub theta_pre: f64,
    pub theta_post: f64,
    pub v_pre: f64,
    pub v_post: f64,
    pub u_pre: [f64; 2],
    pub u_post: [f64; 2],
    pub candidates: usize,
}

/// Property checks over every sample of the arc.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub samples: usize,
    pub jump_count: usize,
    pub termination: Termination,
    pub projections: usize,
    pub initial_v: f64,
    /// Largest rise of the governing function between consecutive flow samples.
    pub max_flow_increase: f64,
    pub gap: Option<f64>,
    /// Smallest `(V_pre − V_post) − gap` over jumps.
    pub min_jump_drop_margin: Option<f64>,
    /// `ceil(V(initial) / gap)`
    pub jump_bound: Option<usize>,
    /// Smallest `d_o − ε` over samples.
    pub min_safety_margin: f64,
    /// Largest `‖u_post − u_pre‖` over jumps.
    pub max_input_jump: Option<f64>,
    pub final_time: f64,
    pub final_dist_to_dest: f64,
    pub final_grad_norm: f64,
    pub final_theta: Option<f64>,
    pub final_input_tracking: Option<f64>,
    /// First time with `‖p − p_d‖ <= REACH_RADIUS`.
    pub reach_time: Option<f64>,
}

impl RunSummary {
    pub fn flow_monotone(&self) -> bool {
        self.max_flow_increase <= PROPERTY_TOL
    }

    pub fn jump_drops_ok(&self) -> bool {
        self.min_jump_drop_margin.is_none_or(|m| m >= -PROPERTY_TOL)
    }

    pub fn jump_count_ok(&self) -> bool {
        self.jump_bound.is_none_or(|b| self.jump_count <= b)
    }

    pub fn safe(&self) -> bool {
        self.min_safety_margin >= 0.0
    }

    pub fn properties_hold(&self) -> bool {
        self.flow_monotone() && self.jump_drops_ok() && self.jump_count_ok() && self.safe()
    }
}

pub struct RunRecord {
    pub name: String,
    pub controller: ControllerKind,
    pub world: NavigationWorld<f64>,
    pub rows: Vec<Row>,
    pub jumps: Vec<JumpLog>,
    pub summary: RunSummary,
    pub arc: HybridArc<f64>,
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunRecord, HarnessError> {
    let controller = build_controller(cfg)?;
    let arc = simulate(&controller.spec, &controller.x0, &cfg.sim).map_err(engine_err(cfg))?;
    Ok(record_from_arc(cfg, &controller.governing, arc))
}

pub fn record_from_arc(cfg: &ScenarioConfig, gov: &Governing, arc: HybridArc<f64>) -> RunRecord {
    let world = cfg.world;
    let row_of = |t: f64, j: usize, s: &[f64]| {
        let r = gov.read(s);
        Row {
            t,
            j,
            px: r.p[0],
            py: r.p[1],
            theta: r.theta,
            eta: r.eta,
            u: r.u,
            v: r.v,
            mu: r.mu,
            dobs: world.d_o(r.p),
            ddest: norm(&sub(&r.p, &world.p_d)),
        }
    };

    let mut rows = Vec::new();
    let mut max_flow_increase = f64::NEG_INFINITY;
    let mut min_safety_margin = f64::INFINITY;
    let mut reach_time = None;
    for seg in arc.segments() {
        let mut prev_v: Option<f64> = None;
        let last = seg.len().saturating_sub(1);
        for (i, (t, s)) in seg.iter().enumerate() {
            let v = gov.v(s);
            if let Some(pv) = prev_v {
                max_flow_increase = max_flow_increase.max(v - pv);
            }
            prev_v = Some(v);
            let p = [s[0], s[1]];
            min_safety_margin = min_safety_margin.min(world.d_o(p) - world.epsilon);
            if reach_time.is_none() && norm(&sub(&p, &world.p_d)) <= REACH_RADIUS {
                reach_time = Some(t);
            }
            if i % cfg.stride == 0 || i == last {
                rows.push(row_of(t, seg.j(), s));
            }
        }
    }
    if max_flow_increase == f64::NEG_INFINITY {
        max_flow_increase = 0.0;
    }

    let jumps: Vec<JumpLog> = arc
        .jumps()
        .iter()
        .map(|jr| {
            let pre = gov.read(&jr.pre);
            let post = gov.read(&jr.post);
            JumpLog {
                t: jr.t,
                j: jr.j,
                theta_pre: pre.theta.unwrap_or(f64::NAN),
                theta_post: post.theta.unwrap_or(f64::NAN),
                v_pre: pre.v,
                v_post: post.v,
                u_pre: pre.u,
                u_post: post.u,
                candidates: jr.candidates,
            }
        })
        .collect();

    let gap = gov.gap();
    let initial_v = arc
        .segments()
        .first()
        .map_or(f64::NAN, |seg| gov.v(seg.state(0)));
    let min_jump_drop_margin = gap.and_then(|g| {
        jumps
            .iter()
            .map(|jl| jl.v_pre - jl.v_post - g)
            .reduce(f64::min)
    });
    let max_input_jump = jumps
        .iter()
        .map(|jl| norm(&sub(&jl.u_post, &jl.u_pre)))
        .reduce(f64::max);
    let fin = arc.final_state();
    let fp = [fin[0], fin[1]];
    let summary = RunSummary {
        samples: arc.sample_count(),
        jump_count: arc.jump_count(),
        termination: arc.termination(),
        projections: arc.projections(),
        initial_v,
        max_flow_increase,
        gap,
        min_jump_drop_margin,
        jump_bound: gap.map(|g| (initial_v / g).ceil() as usize),
        min_safety_margin,
        max_input_jump,
        final_time: arc.final_time().t,
        final_dist_to_dest: norm(&sub(&fp, &world.p_d)),
        final_grad_norm: norm(&world.grad_v_nav_unchecked(fp)),
        final_theta: gov.read(fin).theta,
        final_input_tracking: gov.input_tracking_error(fin),
        reach_time,
    };

    RunRecord {
        name: cfg.name.clone(),
        controller: cfg.controller,
        world,
        rows,
        jumps,
        summary,
        arc,
    }
}

/// Runs several scenarios on separate threads, preserving input order.
pub fn run_many(cfgs: &[ScenarioConfig]) -> Vec<Result<RunRecord, HarnessError>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = cfgs
            .iter()
            .map(|cfg| scope.spawn(move || run_scenario(cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scenario thread panicked"))
            .collect()
    })
}
