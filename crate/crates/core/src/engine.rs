//! Hybrid-system integration.
//!
//! A hybrid system is given by a flow map on a flow set and a jump map on a
//! jump set. Set membership is expressed through signed indicators (a state
//! is inside a set when its indicator is `<= 0`, accepted up to
//! `event_tol`). Flows are integrated with fixed-step RK4; when a step leaves
//! the flow set or enters the jump set, the crossing is located by bisection
//! on the step fraction, re-integrating the sub-step from the step start.
//!
//! States are flat vectors. Modules that build closed loops document their
//! own packing layout.

use std::cmp::Ordering;
use std::sync::Arc;

use log::{debug, warn};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy};
use crate::scalar::Scalar;

pub type FlowFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type IndicatorFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type CandidateFn<T> = Arc<dyn Fn(&[T]) -> Vec<Vec<T>> + Send + Sync>;
/// Post-step correction; returns `true` when it modified the state.
pub type ProjectionFn<T> = Arc<dyn Fn(&mut [T]) -> bool + Send + Sync>;

/// Jumps taken at a single instant before a Zeno warning is logged.
const ZENO_WARN_JUMPS: usize = 1000;

/// How a post-jump state is chosen from the jump map's candidate list.
#[derive(Clone)]
pub enum Selection<T> {
    /// Take the first candidate.
    First,
    /// Take the candidate of least cost; ties go to the lowest index.
    MinimizeCost(IndicatorFn<T>),
}

/// Which set membership indicator to work with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Flow,
    Jump,
}

/// Behavior on the overlap of the flow and jump sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Priority {
    /// Jump as soon as the jump set is reached.
    #[default]
    JumpPriority,
    /// Keep flowing while the flow set allows it.
    FlowPriority,
}

/// One hybrid system: flow map, jump map and the two set indicators.
#[derive(Clone)]
pub struct HybridSystemSpec<T> {
    dim: usize,
    flow_map: FlowFn<T>,
    flow_indicator: IndicatorFn<T>,
    jump_map: Option<CandidateFn<T>>,
    jump_indicator: Option<IndicatorFn<T>>,
    selection: Selection<T>,
    projection: Option<ProjectionFn<T>>,
}

impl<T: Scalar> HybridSystemSpec<T> {
    /// A system with the given flow and an empty jump set.
    pub fn new(dim: usize, flow_map: FlowFn<T>, flow_indicator: IndicatorFn<T>) -> Self {
        Self {
            dim,
            flow_map,
            flow_indicator,
            jump_map: None,
            jump_indicator: None,
            selection: Selection::First,
            projection: None,
        }
    }

    /// A system that flows everywhere with an empty jump set.
    pub fn flow_only(dim: usize, flow_map: FlowFn<T>) -> Self {
        Self::new(dim, flow_map, Arc::new(|_: &[T]| -T::one()))
    }

    pub fn with_jumps(mut self, jump_indicator: IndicatorFn<T>, jump_map: CandidateFn<T>) -> Self {
        self.jump_indicator = Some(jump_indicator);
        self.jump_map = Some(jump_map);
        self
    }

    pub fn with_selection(mut self, selection: Selection<T>) -> Self {
        self.selection = selection;
        self
    }

    pub fn with_projection(mut self, projection: ProjectionFn<T>) -> Self {
        self.projection = Some(projection);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flow(&self, x: &[T]) -> Vec<T> {
        (self.flow_map)(x)
    }

    pub fn flow_indicator(&self, x: &[T]) -> T {
        (self.flow_indicator)(x)
    }

    /// `+inf` when the system has no jump set.
    pub fn jump_indicator(&self, x: &[T]) -> T {
        self.jump_indicator
            .as_ref()
            .map_or_else(T::infinity, |ind| ind(x))
    }

    pub fn indicator(&self, which: Which, x: &[T]) -> T {
        match which {
            Which::Flow => self.flow_indicator(x),
            Which::Jump => self.jump_indicator(x),
        }
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_map.is_some()
    }
}

/// Integration settings for one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub dt: T,
    pub t_max: T,
    pub j_max: usize,
    pub event_tol: T,
    pub priority: Priority,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(1e-3),
            t_max: T::lit(10.0),
            j_max: 10_000,
            event_tol: T::lit(1e-10),
            priority: Priority::JumpPriority,
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: T| v.is_finite() && v > T::zero();
        if !positive(self.dt) {
            return Err(Error::InvalidSimConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if !positive(self.t_max) {
            return Err(Error::InvalidSimConfig(format!("t_max must be > 0, got {}", self.t_max)));
        }
        if !positive(self.event_tol) {
            return Err(Error::InvalidSimConfig(format!(
                "event_tol must be > 0, got {}",
                self.event_tol
            )));
        }
        Ok(())
    }
}

/// A point of a hybrid time domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridTime<T> {
    pub t: T,
    pub j: usize,
}

impl<T: Scalar> PartialOrd for HybridTime<T> {
    /// Product order: `(t, j) <= (t', j')` iff `t <= t'` and `j <= j'`.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let t_ord = self.t.partial_cmp(&other.t)?;
        match (t_ord, self.j.cmp(&other.j)) {
            (a, b) if a == b => Some(a),
            (Ordering::Equal, b) => Some(b),
            (a, Ordering::Equal) => Some(a),
            _ => None,
        }
    }
}

/// Samples of one flow interval at a fixed jump counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    j: usize,
    dim: usize,
    times: Vec<T>,
    states: Vec<T>,
}

impl<T: Scalar> Segment<T> {
    fn start(j: usize, t: T, x: &[T]) -> Self {
        Self {
            j,
            dim: x.len(),
            times: vec![t],
            states: x.to_vec(),
        }
    }

    fn push(&mut self, t: T, x: &[T]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
    }

    fn replace_last(&mut self, x: &[T]) {
        let n = self.states.len();
        self.states[n - self.dim..].copy_from_slice(x);
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn time(&self, i: usize) -> T {
        self.times[i]
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[T] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn first_time(&self) -> T {
        self.times[0]
    }

    pub fn last_time(&self) -> T {
        self.times[self.times.len() - 1]
    }

    pub fn last_state(&self) -> &[T] {
        self.state(self.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, &[T])> + '_ {
        self.times.iter().copied().zip(self.states.chunks(self.dim))
    }
}

/// A recorded jump.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord<T> {
    pub t: T,
    /// Jump counter before the jump.
    pub j: usize,
    pub pre: Vec<T>,
    pub post: Vec<T>,
    /// Number of candidates the jump map offered.
    pub candidates: usize,
}

/// Why a simulation stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    TimeHorizon,
    JumpBudgetExhausted,
    /// The flow reached the boundary of the flow set away from the jump set.
    LeftBothSets,
}

/// A solution on a hybrid time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridArc<T> {
    dim: usize,
    segments: Vec<Segment<T>>,
    jumps: Vec<JumpRecord<T>>,
    termination: Termination,
    projections: usize,
}

impl<T: Scalar> HybridArc<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn jumps(&self) -> &[JumpRecord<T>] {
        &self.jumps
    }

    pub fn jump_count(&self) -> usize {
        self.jumps.len()
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    /// Number of flow samples modified by the system's projection hook.
    pub fn projections(&self) -> usize {
        self.projections
    }

    pub fn final_state(&self) -> &[T] {
        self.segments
            .last()
            .expect("arc has at least one segment")
            .last_state()
    }

    pub fn final_time(&self) -> HybridTime<T> {
        let last = self.segments.last().expect("arc has at least one segment");
        HybridTime {
            t: last.last_time(),
            j: last.j(),
        }
    }

    pub fn sample_count(&self) -> usize {
        self.segments.iter().map(Segment::len).sum()
    }

    /// All samples in hybrid-time order.
    pub fn samples(&self) -> impl Iterator<Item = (HybridTime<T>, &[T])> + '_ {
        self.segments.iter().flat_map(|seg| {
            seg.iter().map(move |(t, x)| (HybridTime { t, j: seg.j() }, x))
        })
    }

    /// Checks that time strictly increases inside segments, that the jump
    /// counter increases by one per segment, and that each segment starts
    /// where the previous one ended.
    pub fn is_hybrid_time_monotone(&self) -> bool {
        for (k, seg) in self.segments.iter().enumerate() {
            if seg.j() != k || seg.times().windows(2).any(|w| w[1] <= w[0]) {
                return false;
            }
            if k > 0 && seg.first_time() != self.segments[k - 1].last_time() {
                return false;
            }
        }
        true
    }
}

/// One classical RK4 step of the flow map.
pub fn step_flow<T: Scalar>(spec: &HybridSystemSpec<T>, x: &[T], h: T) -> Result<Vec<T>> {
    if x.len() != spec.dim {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: spec.dim,
            actual: x.len(),
        });
    }
    rk4(spec, x, h).ok_or_else(|| Error::NonFiniteState(format!("after RK4 step of size {h}")))
}

fn rk4<T: Scalar>(spec: &HybridSystemSpec<T>, x: &[T], h: T) -> Option<Vec<T>> {
    let half = h / T::lit(2.0);
    let k1 = spec.flow(x);
    let k2 = spec.flow(&axpy(x, half, &k1));
    let k3 = spec.flow(&axpy(x, half, &k2));
    let k4 = spec.flow(&axpy(x, h, &k3));
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let next: Vec<T> = (0..x.len())
        .map(|i| x[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect();
    all_finite(&next).then_some(next)
}

/// Locates where `which`'s indicator changes sign along the RK4 sub-step
/// from `x_start` of length `h`; `x_end` is the full-step endpoint.
///
/// Returns the located state and its fraction of `h`. The search stops once
/// the indicator is within `event_tol` of zero; if the fraction interval
/// collapses first, the endpoint on the `x_end` side is returned.
pub fn locate_boundary<T: Scalar>(
    spec: &HybridSystemSpec<T>,
    x_start: &[T],
    x_end: &[T],
    h: T,
    which: Which,
    event_tol: T,
) -> Result<(Vec<T>, T)> {
    let g_start = spec.indicator(which, x_start);
    let g_end = spec.indicator(which, x_end);
    if (g_start <= T::zero()) == (g_end <= T::zero()) || !g_start.is_finite() || !g_end.is_finite() {
        return Err(Error::NoSignChange {
            start: g_start.to_f64().unwrap_or(f64::NAN),
            end: g_end.to_f64().unwrap_or(f64::NAN),
        });
    }
    let start_inside = g_start <= T::zero();
    let (mut lo, mut hi) = (T::zero(), T::one());
    let mut x_hi = x_end.to_vec();
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let x_mid = rk4(spec, x_start, mid * h)
            .ok_or_else(|| Error::NonFiniteState("during event location".into()))?;
        let g_mid = spec.indicator(which, &x_mid);
        if g_mid.abs() <= event_tol {
            return Ok((x_mid, mid));
        }
        if (g_mid <= T::zero()) == start_inside {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x_mid;
        }
    }
    Ok((x_hi, hi))
}

/// Applies the jump map at `x`; returns the selected post-state and the
/// number of candidates offered.
pub fn apply_jump<T: Scalar>(
    spec: &HybridSystemSpec<T>,
    x: &[T],
    event_tol: T,
) -> Result<(Vec<T>, usize)> {
    let indicator = spec.jump_indicator(x);
    if !(indicator <= event_tol) {
        return Err(Error::NotInJumpSet {
            indicator: indicator.to_f64().unwrap_or(f64::NAN),
        });
    }
    let jump_map = spec.jump_map.as_ref().ok_or(Error::EmptyJumpSet)?;
    let mut candidates = jump_map(x);
    if candidates.is_empty() {
        return Err(Error::EmptyJumpSet);
    }
    let count = candidates.len();
    if count > 1 {
        debug!("jump map offered {count} candidates; selecting deterministically");
    }
    let index = match &spec.selection {
        Selection::First => 0,
        Selection::MinimizeCost(cost) => {
            let mut best = 0;
            let mut best_cost = cost(&candidates[0]);
            for (i, c) in candidates.iter().enumerate().skip(1) {
                let v = cost(c);
                if v < best_cost {
                    best = i;
                    best_cost = v;
                }
            }
            best
        }
    };
    let post = candidates.swap_remove(index);
    if post.len() != spec.dim {
        return Err(Error::DimensionMismatch {
            what: "jump map output",
            expected: spec.dim,
            actual: post.len(),
        });
    }
    Ok((post, count))
}

#[derive(Clone, Copy, PartialEq)]
enum Event {
    FlowExit,
    JumpEntry,
}

/// Integrates `spec` from `x0` until the time horizon, the jump budget, or
/// the end of the flow set is reached.
pub fn simulate<T: Scalar>(
    spec: &HybridSystemSpec<T>,
    x0: &[T],
    cfg: &SimConfig<T>,
) -> Result<HybridArc<T>> {
    cfg.validate()?;
    if x0.len() != spec.dim {
        return Err(Error::DimensionMismatch {
            what: "initial state",
            expected: spec.dim,
            actual: x0.len(),
        });
    }
    if !all_finite(x0) {
        return Err(Error::NonFiniteState("in initial condition".into()));
    }
    let tol = cfg.event_tol;
    let jump_first = cfg.priority == Priority::JumpPriority;
    let coverage_error = |x: &[T], t: T, j: usize| Error::CoverageViolation {
        t: t.to_f64().unwrap_or(f64::NAN),
        j,
        flow: spec.flow_indicator(x).to_f64().unwrap_or(f64::NAN),
        jump: spec.jump_indicator(x).to_f64().unwrap_or(f64::NAN),
    };

    let mut x = x0.to_vec();
    let mut t = T::zero();
    let mut j = 0usize;
    let mut segments = vec![Segment::start(0, t, &x)];
    let mut jumps = Vec::new();
    let mut projections = 0usize;
    // set after a located flow-set exit: the flow cannot continue from here
    let mut at_flow_exit = false;
    let mut jumps_at_instant = 0usize;

    let termination = loop {
        let in_jump = spec.jump_indicator(&x) <= tol;
        let in_flow = !at_flow_exit && spec.flow_indicator(&x) <= tol;

        if in_jump && (jump_first || !in_flow) {
            if j >= cfg.j_max {
                break Termination::JumpBudgetExhausted;
            }
            let (post, candidates) = apply_jump(spec, &x, tol)?;
            if !all_finite(&post) {
                return Err(Error::NonFiniteState(format!("after jump at t = {t}, j = {j}")));
            }
            jumps.push(JumpRecord {
                t,
                j,
                pre: x.clone(),
                post: post.clone(),
                candidates,
            });
            j += 1;
            x = post;
            segments.push(Segment::start(j, t, &x));
            at_flow_exit = false;
            jumps_at_instant += 1;
            if jumps_at_instant == ZENO_WARN_JUMPS {
                warn!("{ZENO_WARN_JUMPS} jumps at t = {t} without flowing; possible Zeno behavior");
            }
            continue;
        }
        if !in_flow {
            if at_flow_exit {
                break Termination::LeftBothSets;
            }
            return Err(coverage_error(&x, t, j));
        }
        if t >= cfg.t_max {
            break Termination::TimeHorizon;
        }

        let h = cfg.dt.min(cfg.t_max - t);
        let x_end = rk4(spec, &x, h)
            .ok_or_else(|| Error::NonFiniteState(format!("flowing from t = {t}, j = {j}")))?;

        let mut event: Option<(Event, Vec<T>, T)> = None;
        if spec.flow_indicator(&x_end) > tol {
            let located = if spec.flow_indicator(&x) > T::zero() {
                (x.clone(), T::zero())
            } else {
                locate_boundary(spec, &x, &x_end, h, Which::Flow, tol)?
            };
            event = Some((Event::FlowExit, located.0, located.1));
        }
        if jump_first && spec.jump_indicator(&x_end) <= tol {
            let located = if spec.jump_indicator(&x_end) > T::zero() {
                (x_end.clone(), T::one())
            } else {
                locate_boundary(spec, &x, &x_end, h, Which::Jump, tol)?
            };
            let earlier = event.as_ref().is_none_or(|(_, _, s)| located.1 < *s);
            if earlier {
                event = Some((Event::JumpEntry, located.0, located.1));
            }
        }

        let (mut x_next, fraction) = match event {
            None => (x_end, T::one()),
            Some((kind, state, fraction)) => {
                at_flow_exit = kind == Event::FlowExit;
                (state, fraction)
            }
        };
        let t_next = if fraction == T::one() { t + h } else { t + fraction * h };
        if let Some(project) = &spec.projection {
            if project(&mut x_next) {
                projections += 1;
            }
        }
        let segment = segments.last_mut().expect("current segment");
        if t_next > t {
            segment.push(t_next, &x_next);
            t = t_next;
            jumps_at_instant = 0;
        } else {
            segment.replace_last(&x_next);
        }
        x = x_next;
    };

    Ok(HybridArc {
        dim: spec.dim,
        segments,
        jumps,
        termination,
        projections,
    })
}
