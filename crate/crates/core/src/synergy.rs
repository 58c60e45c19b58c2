//! Synergistic feedback quadruples and the nominal hybrid closed loop.
//!
//! A quadruple bundles a Lyapunov-like function `V(x, θ)`, its gradient, a
//! feedback `κ(x, θ)`, the flow `ϖ(x, θ)` of the switching variable, a finite
//! set `Θ` of jump targets and the synergy gap `δ`. The closed loop flows
//! while `μ(x, θ) = V(x, θ) − min_{θ̄∈Θ} V(x, θ̄) <= δ` and resets `θ` to a
//! minimizer over `Θ` once `μ >= δ`.
//!
//! Closed-loop states are packed as `[x | θ]`.

use std::sync::Arc;

use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::HybridSystemSpec;
use crate::error::{Error, Result};
use crate::linalg::{add, dot, Mat};
use crate::scalar::Scalar;

pub type StateFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;
pub type StateScalarFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;
pub type StateMatFn<T> = Arc<dyn Fn(&[T]) -> Mat<T> + Send + Sync>;
pub type PairScalarFn<T> = Arc<dyn Fn(&[T], &[T]) -> T + Send + Sync>;
pub type PairVecFn<T> = Arc<dyn Fn(&[T], &[T]) -> Vec<T> + Send + Sync>;
pub type PairGradFn<T> = Arc<dyn Fn(&[T], &[T]) -> (Vec<T>, Vec<T>) + Send + Sync>;
pub type PairMatFn<T> = Arc<dyn Fn(&[T], &[T]) -> Mat<T> + Send + Sync>;

/// Absolute tolerance on `V` values when collecting minimizers over `Θ`.
pub const DEFAULT_TIE_TOL: f64 = 1e-12;

/// Control-affine plant `ẋ = f(x) + g(x) u`.
#[derive(Clone)]
pub struct AffinePlant<T> {
    pub dim_x: usize,
    pub dim_u: usize,
    pub f: StateFn<T>,
    pub g: StateMatFn<T>,
    /// Signed distance to the boundary of the state space, `<= 0` inside.
    pub safety_indicator: Option<StateScalarFn<T>>,
}

impl<T: Scalar> AffinePlant<T> {
    pub fn new(dim_x: usize, dim_u: usize, f: StateFn<T>, g: StateMatFn<T>) -> Self {
        Self {
            dim_x,
            dim_u,
            f,
            g,
            safety_indicator: None,
        }
    }

    pub fn with_safety_indicator(mut self, indicator: StateScalarFn<T>) -> Self {
        self.safety_indicator = Some(indicator);
        self
    }

    /// `f(x) + g(x) u`
    pub fn dynamics(&self, x: &[T], u: &[T]) -> Vec<T> {
        add(&(self.f)(x), &(self.g)(x).mul_vec(u))
    }

    pub fn is_safe(&self, x: &[T]) -> bool {
        self.safety_indicator
            .as_ref()
            .is_none_or(|ind| ind(x) <= T::zero())
    }
}

/// `[x | θ]` view of a closed-loop state.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState<T> {
    pub x: Vec<T>,
    pub theta: Vec<T>,
}

impl<T: Scalar> ExtendedState<T> {
    pub fn new(x: Vec<T>, theta: Vec<T>) -> Self {
        Self { x, theta }
    }

    pub fn pack(&self) -> Vec<T> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.theta);
        v
    }

    pub fn unpack(packed: &[T], dim_x: usize) -> Self {
        Self {
            x: packed[..dim_x].to_vec(),
            theta: packed[dim_x..].to_vec(),
        }
    }
}

/// `(V, ∇V, κ, ϖ, Θ, δ)`.
#[derive(Clone)]
pub struct SynergisticQuadruple<T> {
    dim_x: usize,
    dim_theta: usize,
    dim_u: usize,
    v: PairScalarFn<T>,
    grad_v: PairGradFn<T>,
    kappa: PairVecFn<T>,
    varpi: PairVecFn<T>,
    theta_set: Vec<Vec<T>>,
    delta: T,
    tie_tol: T,
}

/// Builder inputs for [`SynergisticQuadruple::new`].
pub struct QuadrupleParts<T> {
    pub dim_x: usize,
    pub dim_theta: usize,
    pub dim_u: usize,
    pub v: PairScalarFn<T>,
    /// Returns `(∇_x V, ∇_θ V)`.
    pub grad_v: PairGradFn<T>,
    pub kappa: PairVecFn<T>,
    pub varpi: PairVecFn<T>,
    pub theta_set: Vec<Vec<T>>,
    pub delta: T,
}

impl<T: Scalar> SynergisticQuadruple<T> {
    pub fn new(parts: QuadrupleParts<T>) -> Result<Self> {
        if parts.theta_set.is_empty() {
            return Err(Error::InvalidQuadruple("Θ is empty".into()));
        }
        if let Some(bad) = parts.theta_set.iter().find(|th| th.len() != parts.dim_theta) {
            return Err(Error::DimensionMismatch {
                what: "element of Θ",
                expected: parts.dim_theta,
                actual: bad.len(),
            });
        }
        for (i, a) in parts.theta_set.iter().enumerate() {
            if parts.theta_set[..i].contains(a) {
                return Err(Error::InvalidQuadruple(format!("Θ contains a duplicate at index {i}")));
            }
        }
        if !(parts.delta > T::zero()) || !parts.delta.is_finite() {
            return Err(Error::InvalidQuadruple(format!("δ must be > 0, got {}", parts.delta)));
        }
        Ok(Self {
            dim_x: parts.dim_x,
            dim_theta: parts.dim_theta,
            dim_u: parts.dim_u,
            v: parts.v,
            grad_v: parts.grad_v,
            kappa: parts.kappa,
            varpi: parts.varpi,
            theta_set: parts.theta_set,
            delta: parts.delta,
            tie_tol: T::lit(DEFAULT_TIE_TOL),
        })
    }

    pub fn with_tie_tol(mut self, tie_tol: T) -> Self {
        self.tie_tol = tie_tol;
        self
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_theta(&self) -> usize {
        self.dim_theta
    }

    pub fn dim_u(&self) -> usize {
        self.dim_u
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn tie_tol(&self) -> T {
        self.tie_tol
    }

    pub fn theta_set(&self) -> &[Vec<T>] {
        &self.theta_set
    }

    pub fn v(&self, x: &[T], theta: &[T]) -> T {
        (self.v)(x, theta)
    }

    pub fn grad_v(&self, x: &[T], theta: &[T]) -> (Vec<T>, Vec<T>) {
        (self.grad_v)(x, theta)
    }

    pub fn kappa(&self, x: &[T], theta: &[T]) -> Vec<T> {
        (self.kappa)(x, theta)
    }

    pub fn varpi(&self, x: &[T], theta: &[T]) -> Vec<T> {
        (self.varpi)(x, theta)
    }

    /// `V` evaluated on the packed state `[x | θ]`.
    pub fn v_packed(&self, packed: &[T]) -> T {
        self.v(&packed[..self.dim_x], &packed[self.dim_x..])
    }

    /// Same quadruple with a different gap.
    pub fn with_delta(&self, delta: T) -> Result<Self> {
        if !(delta > T::zero()) {
            return Err(Error::InvalidQuadruple(format!("δ must be > 0, got {delta}")));
        }
        Ok(Self {
            delta,
            ..self.clone()
        })
    }

    /// Same quadruple with a different feedback.
    pub fn with_kappa(&self, kappa: PairVecFn<T>) -> Self {
        Self {
            kappa,
            ..self.clone()
        }
    }

    fn min_over_theta_set(&self, x: &[T]) -> T {
        self.theta_set
            .iter()
            .map(|th| self.v(x, th))
            .fold(T::infinity(), T::min)
    }
}

/// `μ(x, θ) = V(x, θ) − min_{θ̄∈Θ} V(x, θ̄)`, unclamped.
pub fn mu<T: Scalar>(q: &SynergisticQuadruple<T>, x: &[T], theta: &[T]) -> T {
    q.v(x, theta) - q.min_over_theta_set(x)
}

/// All `θ̄ ∈ Θ` attaining the minimum of `V(x, ·)` within the tie tolerance,
/// in `Θ` order.
pub fn jump_map_go<T: Scalar>(q: &SynergisticQuadruple<T>, x: &[T], _theta: &[T]) -> Vec<Vec<T>> {
    let values: Vec<T> = q.theta_set.iter().map(|th| q.v(x, th)).collect();
    let min = values.iter().copied().fold(T::infinity(), T::min);
    let minimizers: Vec<Vec<T>> = q
        .theta_set
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v - min <= q.tie_tol)
        .map(|(th, _)| th.clone())
        .collect();
    if minimizers.len() > 1 {
        debug!("argmin over Θ has {} elements", minimizers.len());
    }
    minimizers
}

/// `μ − δ`; the flow set is where this is `<= 0`.
pub fn in_flow_set<T: Scalar>(q: &SynergisticQuadruple<T>, x: &[T], theta: &[T]) -> T {
    mu(q, x, theta) - q.delta
}

/// `δ − μ`; the jump set is where this is `<= 0`.
pub fn in_jump_set<T: Scalar>(q: &SynergisticQuadruple<T>, x: &[T], theta: &[T]) -> T {
    q.delta - mu(q, x, theta)
}

/// `⟨∇V, (f + g κ, ϖ)⟩` at `(x, θ)`.
pub fn lyapunov_derivative<T: Scalar>(
    plant: &AffinePlant<T>,
    q: &SynergisticQuadruple<T>,
    x: &[T],
    theta: &[T],
) -> T {
    let (gx, gt) = q.grad_v(x, theta);
    let xdot = plant.dynamics(x, &q.kappa(x, theta));
    dot(&gx, &xdot) + dot(&gt, &q.varpi(x, theta))
}

/// Closed loop on `[x | θ]`: flow `(f + g κ, ϖ)`, jump `(x, G_o(x, θ))`.
pub fn assemble_closed_loop<T: Scalar>(
    plant: &AffinePlant<T>,
    q: &SynergisticQuadruple<T>,
) -> Result<HybridSystemSpec<T>> {
    if plant.dim_x != q.dim_x {
        return Err(Error::DimensionMismatch {
            what: "plant state vs quadruple state",
            expected: q.dim_x,
            actual: plant.dim_x,
        });
    }
    if plant.dim_u != q.dim_u {
        return Err(Error::DimensionMismatch {
            what: "plant input vs feedback output",
            expected: q.dim_u,
            actual: plant.dim_u,
        });
    }
    let n = q.dim_x;
    let dim = n + q.dim_theta;

    let (p, qq) = (plant.clone(), q.clone());
    let flow = Arc::new(move |s: &[T]| {
        let (x, th) = s.split_at(n);
        let mut out = p.dynamics(x, &qq.kappa(x, th));
        out.extend(qq.varpi(x, th));
        out
    });
    let qq = q.clone();
    let flow_ind = Arc::new(move |s: &[T]| {
        let (x, th) = s.split_at(n);
        in_flow_set(&qq, x, th)
    });
    let qq = q.clone();
    let jump_ind = Arc::new(move |s: &[T]| {
        let (x, th) = s.split_at(n);
        in_jump_set(&qq, x, th)
    });
    let qq = q.clone();
    let jump_map = Arc::new(move |s: &[T]| {
        let (x, th) = s.split_at(n);
        jump_map_go(&qq, x, th)
            .into_iter()
            .map(|theta_plus| {
                let mut post = x.to_vec();
                post.extend(theta_plus);
                post
            })
            .collect()
    });
    Ok(HybridSystemSpec::new(dim, flow, flow_ind).with_jumps(jump_ind, jump_map))
}

/// Axis-aligned box for Latin-hypercube sampling of packed `[x | θ]` states.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox<T> {
    pub lo: Vec<T>,
    pub hi: Vec<T>,
    pub count: usize,
    pub seed: u64,
}

/// Latin-hypercube draws inside `bx`, deterministic in the seed.
pub fn latin_hypercube<T: Scalar>(bx: &SampleBox<T>) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(bx.seed);
    let n = bx.count;
    let dims = bx.lo.len();
    let mut points = vec![vec![T::zero(); dims]; n];
    for d in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (point, stratum) in points.iter_mut().zip(strata) {
            let u: f64 = rng.gen();
            let frac = T::lit((stratum as f64 + u) / n as f64);
            point[d] = bx.lo[d] + (bx.hi[d] - bx.lo[d]) * frac;
        }
    }
    points
}

/// Numerical check of the quadruple conditions at sampled states.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport<T> {
    /// Smallest `V` seen over all evaluated states.
    pub min_v: T,
    pub v_nonnegative: bool,
    /// Ray probe for bounded sublevel sets; a heuristic, not a proof.
    pub sublevel_probe_ok: bool,
    /// Largest `⟨∇V, flow⟩` seen (C3 requires `<= 0`).
    pub c3_worst: T,
    pub c3_ok: bool,
    pub c3_samples: usize,
    /// `min μ − δ` over the critical states (C4 requires `> 0`).
    pub c4_margin: T,
    pub c4_ok: bool,
    pub notes: Vec<String>,
}

impl<T: Scalar> AuditReport<T> {
    pub fn passed(&self) -> bool {
        self.v_nonnegative && self.sublevel_probe_ok && self.c3_ok && self.c4_ok
    }
}

/// Settings for [`audit_quadruple`].
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSettings<T> {
    /// Slack on the C3 inequality.
    pub c3_tol: T,
    /// Optional Latin-hypercube draws added to the supplied samples.
    pub sample_box: Option<SampleBox<T>>,
    /// Number of random rays for the sublevel probe.
    pub rays: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for AuditSettings<T> {
    fn default() -> Self {
        Self {
            c3_tol: T::lit(1e-9),
            sample_box: None,
            rays: 16,
            seed: 0,
        }
    }
}

/// Checks C1–C4 numerically on packed `[x | θ]` states.
///
/// C3 is evaluated at `sample_states` plus the optional box draws (states
/// the plant marks unsafe are skipped). C4 uses `critical_states`, which the
/// caller supplies as an approximation of the undesired invariant set.
pub fn audit_quadruple<T: Scalar>(
    plant: &AffinePlant<T>,
    q: &SynergisticQuadruple<T>,
    sample_states: &[Vec<T>],
    critical_states: &[Vec<T>],
    settings: &AuditSettings<T>,
) -> AuditReport<T> {
    let n = q.dim_x;
    let mut states: Vec<Vec<T>> = sample_states.to_vec();
    if let Some(bx) = &settings.sample_box {
        states.extend(latin_hypercube(bx));
    }
    let mut notes = Vec::new();
    let mut min_v = T::infinity();
    let mut c3_worst = T::neg_infinity();
    let mut c3_samples = 0;
    let mut skipped = 0;
    for s in &states {
        let (x, th) = s.split_at(n);
        if !plant.is_safe(x) {
            skipped += 1;
            continue;
        }
        let v = q.v(x, th);
        let vdot = lyapunov_derivative(plant, q, x, th);
        if !v.is_finite() || !vdot.is_finite() {
            skipped += 1;
            continue;
        }
        min_v = min_v.min(v);
        c3_worst = c3_worst.max(vdot);
        c3_samples += 1;
    }
    if skipped > 0 {
        notes.push(format!("{skipped} sample states outside the operating region were skipped"));
    }

    let mut c4_margin = T::infinity();
    for s in critical_states {
        let (x, th) = s.split_at(n);
        let v = q.v(x, th);
        min_v = min_v.min(v);
        c4_margin = c4_margin.min(mu(q, x, th) - q.delta);
    }
    if critical_states.is_empty() {
        notes.push("no critical states supplied; C4 holds vacuously".into());
    }

    let sublevel_probe_ok = sublevel_probe(plant, q, &states, settings);
    notes.push("sublevel compactness is probed along random rays only".into());

    AuditReport {
        min_v,
        v_nonnegative: min_v >= T::zero(),
        sublevel_probe_ok,
        c3_worst,
        c3_ok: c3_samples > 0 && c3_worst <= settings.c3_tol,
        c3_samples,
        c4_margin,
        c4_ok: critical_states.is_empty() || c4_margin > T::zero(),
        notes,
    }
}

/// From the first safe sample, walks outward along random rays and requires
/// `V` to grow past its starting value at the largest radius that stays in
/// the operating region.
fn sublevel_probe<T: Scalar>(
    plant: &AffinePlant<T>,
    q: &SynergisticQuadruple<T>,
    states: &[Vec<T>],
    settings: &AuditSettings<T>,
) -> bool {
    let n = q.dim_x;
    let Some(base) = states.iter().find(|s| plant.is_safe(&s[..n])) else {
        return true;
    };
    let v0 = q.v_packed(base);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
    let radii = [1e1, 1e2, 1e3, 1e4];
    for _ in 0..settings.rays {
        let dir: Vec<f64> = (0..base.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
        let mut last = None;
        for r in radii {
            let probe: Vec<T> = base
                .iter()
                .zip(&dir)
                .map(|(&b, &d)| b + T::lit(r * d / len))
                .collect();
            if !plant.is_safe(&probe[..n]) {
                continue;
            }
            let v = q.v_packed(&probe);
            if v.is_finite() {
                last = Some(v);
            }
        }
        if let Some(v) = last {
            if v <= v0 {
                return false;
            }
        }
    }
    true
}
