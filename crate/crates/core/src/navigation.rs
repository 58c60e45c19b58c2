//! Planar navigation around one disk obstacle.
//!
//! The navigation function `V_nav(p) = ½‖p − p_d‖² + ϱ φ(d_o(p))` has a
//! saddle `p*` behind the obstacle. Rotating the position about the obstacle
//! center by a switching angle `θ` gives a synergistic family
//! `V(p, θ) = ½‖T(p, θ) − p_d‖² + ϱ φ(d_o(p)) + (γ_θ/2) θ²`, and jumping `θ`
//! away from zero at the saddle lowers `V` by a certified gap.
//!
//! Closed-loop states start with `p`; `θ` is scalar.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::backstepping::{BacksteppedDesign, BacksteppingParams, FeedbackJacobians};
use crate::engine::{HybridSystemSpec, ProjectionFn};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;
use crate::smoothing::{DecomposedFeedback, DecompositionParts, SmoothedDesign, SmoothedParams};
use crate::synergy::{AffinePlant, QuadrupleParts, SynergisticQuadruple};

pub type Vec2<T> = [T; 2];
pub type Mat2<T> = [[T; 2]; 2];

/// Barrier arguments at or below this are rejected.
pub const MIN_BARRIER_ARG: f64 = 1e-12;

/// Slack on the free-space test of the checked evaluations.
pub const FREE_SPACE_TOL: f64 = 1e-9;

fn v2<T: Scalar>(s: &[T]) -> Vec2<T> {
    [s[0], s[1]]
}

fn sub2<T: Scalar>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [a[0] - b[0], a[1] - b[1]]
}

fn add2<T: Scalar>(a: Vec2<T>, b: Vec2<T>) -> Vec2<T> {
    [a[0] + b[0], a[1] + b[1]]
}

fn scale2<T: Scalar>(a: Vec2<T>, k: T) -> Vec2<T> {
    [a[0] * k, a[1] * k]
}

fn dot2<T: Scalar>(a: Vec2<T>, b: Vec2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

fn norm2<T: Scalar>(a: Vec2<T>) -> T {
    a[0].hypot(a[1])
}

fn mul2<T: Scalar>(m: Mat2<T>, v: Vec2<T>) -> Vec2<T> {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

fn tr_mul2<T: Scalar>(m: Mat2<T>, v: Vec2<T>) -> Vec2<T> {
    [
        m[0][0] * v[0] + m[1][0] * v[1],
        m[0][1] * v[0] + m[1][1] * v[1],
    ]
}

fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Counter-clockwise rotation by `θ`.
pub fn rotation<T: Scalar>(theta: T) -> Mat2<T> {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

/// Quarter-turn generator `[[0, −1], [1, 0]]`.
pub fn delta_matrix<T: Scalar>() -> Mat2<T> {
    [[T::zero(), -T::one()], [T::one(), T::zero()]]
}

/// One disk obstacle, a destination and the barrier shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavigationWorld<T> {
    pub p_o: Vec2<T>,
    pub r_o: T,
    pub epsilon: T,
    pub p_d: Vec2<T>,
    pub r_s: T,
    pub varrho: T,
}

impl<T: Scalar> NavigationWorld<T> {
    pub fn new(p_o: Vec2<T>, r_o: T, epsilon: T, p_d: Vec2<T>, r_s: T, varrho: T) -> Result<Self> {
        let world = Self {
            p_o,
            r_o,
            epsilon,
            p_d,
            r_s,
            varrho,
        };
        world.validate()?;
        Ok(world)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.p_o[0], self.p_o[1], self.p_d[0], self.p_d[1], self.r_o, self.epsilon, self.r_s, self.varrho];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWorld("all fields must be finite".into()));
        }
        for (name, v) in [("r_o", self.r_o), ("epsilon", self.epsilon), ("varrho", self.varrho)] {
            if !(v > T::zero()) {
                return Err(Error::InvalidWorld(format!("{name} must be > 0, got {v}")));
            }
        }
        let dist = self.dest_distance();
        if dist < self.r_o + self.epsilon {
            return Err(Error::InvalidWorld(format!(
                "destination is not in the free space: ‖p_d − p_o‖ = {dist} < r_o + epsilon = {}",
                self.r_o + self.epsilon
            )));
        }
        let r_d = self.r_d();
        if !(self.epsilon < self.r_s && self.r_s < r_d) {
            return Err(Error::InvalidWorld(format!(
                "need epsilon < r_s < r_d, got epsilon = {}, r_s = {}, r_d = {r_d}",
                self.epsilon, self.r_s
            )));
        }
        Ok(())
    }

    /// `‖p_d − p_o‖`
    pub fn dest_distance(&self) -> T {
        norm2(sub2(self.p_d, self.p_o))
    }

    /// `d_o(p_d)`
    pub fn r_d(&self) -> T {
        self.dest_distance() - self.r_o
    }

    /// `‖p − p_o‖ − r_o`
    pub fn d_o(&self, p: Vec2<T>) -> T {
        norm2(sub2(p, self.p_o)) - self.r_o
    }

    pub fn in_free_space(&self, p: Vec2<T>) -> bool {
        self.d_o(p) >= self.epsilon
    }

    /// `r_o + ε − ‖p − p_o‖`, `<= 0` in the free space.
    pub fn safety_indicator(&self, p: Vec2<T>) -> T {
        self.r_o + self.epsilon - norm2(sub2(p, self.p_o))
    }

    fn check_free(&self, p: Vec2<T>) -> Result<()> {
        let d = self.d_o(p);
        if d.is_finite() && d >= self.epsilon - T::lit(FREE_SPACE_TOL) {
            Ok(())
        } else {
            Err(Error::OutsideFreeSpace {
                distance: to_f64(d),
                epsilon: to_f64(self.epsilon),
            })
        }
    }

    fn check_barrier_arg(z: T) -> Result<()> {
        if z > T::lit(MIN_BARRIER_ARG) {
            Ok(())
        } else {
            Err(Error::NonPositiveDistance(to_f64(z)))
        }
    }

    /// Barrier value; NaN at or below [`MIN_BARRIER_ARG`].
    pub fn phi_unchecked(&self, z: T) -> T {
        if !(z > T::lit(MIN_BARRIER_ARG)) {
            return T::nan();
        }
        if z >= self.r_s {
            return T::zero();
        }
        let a = z - self.r_s;
        a * a * (self.r_s / z).ln()
    }

    pub fn dphi_unchecked(&self, z: T) -> T {
        if !(z > T::lit(MIN_BARRIER_ARG)) {
            return T::nan();
        }
        if z >= self.r_s {
            return T::zero();
        }
        let a = z - self.r_s;
        T::lit(2.0) * a * (self.r_s / z).ln() - a * a / z
    }

    pub fn d2phi_unchecked(&self, z: T) -> T {
        if !(z > T::lit(MIN_BARRIER_ARG)) {
            return T::nan();
        }
        if z >= self.r_s {
            return T::zero();
        }
        let a = z - self.r_s;
        T::lit(2.0) * (self.r_s / z).ln() - T::lit(4.0) * a / z + a * a / (z * z)
    }

    /// `(z − r_s)² ln(r_s / z)` below `r_s`, zero beyond.
    pub fn phi(&self, z: T) -> Result<T> {
        Self::check_barrier_arg(z)?;
        Ok(self.phi_unchecked(z))
    }

    /// `2(z − r_s) ln(r_s / z) − (z − r_s)² / z` below `r_s`, zero beyond.
    pub fn dphi(&self, z: T) -> Result<T> {
        Self::check_barrier_arg(z)?;
        Ok(self.dphi_unchecked(z))
    }

    pub fn d2phi(&self, z: T) -> Result<T> {
        Self::check_barrier_arg(z)?;
        Ok(self.d2phi_unchecked(z))
    }

    pub fn v_nav_unchecked(&self, p: Vec2<T>) -> T {
        let e = sub2(p, self.p_d);
        dot2(e, e) / T::lit(2.0) + self.varrho * self.phi_unchecked(self.d_o(p))
    }

    pub fn grad_v_nav_unchecked(&self, p: Vec2<T>) -> Vec2<T> {
        let w = sub2(p, self.p_o);
        let r = norm2(w);
        let k = self.varrho * self.dphi_unchecked(r - self.r_o) / r;
        add2(sub2(p, self.p_d), scale2(w, k))
    }

    pub fn hess_v_nav_unchecked(&self, p: Vec2<T>) -> Mat2<T> {
        let w = sub2(p, self.p_o);
        let r = norm2(w);
        let z = r - self.r_o;
        let n = scale2(w, T::one() / r);
        let a = self.varrho * self.d2phi_unchecked(z);
        let b = self.varrho * self.dphi_unchecked(z) / r;
        let mut h = [[T::zero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let eye = if i == j { T::one() } else { T::zero() };
                h[i][j] = eye + a * n[i] * n[j] + b * (eye - n[i] * n[j]);
            }
        }
        h
    }

    /// `½‖p − p_d‖² + ϱ φ(d_o(p))`
    pub fn v_nav(&self, p: Vec2<T>) -> Result<T> {
        self.check_free(p)?;
        Ok(self.v_nav_unchecked(p))
    }

    /// `p − p_d + ϱ φ′(d_o(p)) (p − p_o)/‖p − p_o‖`
    pub fn grad_v_nav(&self, p: Vec2<T>) -> Result<Vec2<T>> {
        self.check_free(p)?;
        Ok(self.grad_v_nav_unchecked(p))
    }

    /// `I + ϱ [φ″ nnᵀ + φ′ (I − nnᵀ)/‖p − p_o‖]` with `n` the outward normal.
    pub fn hess_v_nav(&self, p: Vec2<T>) -> Result<Mat2<T>> {
        self.check_free(p)?;
        Ok(self.hess_v_nav_unchecked(p))
    }

    /// `p_o + R(θ)(p − p_o)`
    pub fn transform(&self, p: Vec2<T>, theta: T) -> Vec2<T> {
        add2(self.p_o, mul2(rotation(theta), sub2(p, self.p_o)))
    }
}

/// Gains of the synergistic navigation controller.
#[derive(Debug, Clone, PartialEq)]
pub struct NavGains<T> {
    pub k_p: T,
    pub k_theta: T,
    pub gamma_theta: T,
    pub theta_set: Vec<T>,
    pub delta: T,
    pub smoothing: Option<SmoothedParams<T>>,
    pub backstepping: Option<BacksteppingParams<T>>,
}

fn gain_error(param: &'static str, reason: String) -> Error {
    Error::GainValidation { param, reason }
}

impl<T: Scalar> NavGains<T> {
    /// `max |θ̄|` over `Θ`.
    pub fn theta_max(&self) -> T {
        self.theta_set.iter().fold(T::zero(), |m, t| m.max(t.abs()))
    }

    /// Checks the core gains against `world`, then any smoothing or
    /// backstepping parameters against their gap bounds.
    pub fn validate(&self, world: &NavigationWorld<T>) -> Result<()> {
        for (name, v) in [("k_p", self.k_p), ("k_theta", self.k_theta), ("gamma_theta", self.gamma_theta), ("delta", self.delta)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(gain_error(name, format!("must be finite and > 0, got {v}")));
            }
        }
        let bound = gamma_theta_bound(world);
        if !(self.gamma_theta < bound) {
            return Err(gain_error(
                "gamma_theta",
                format!("{} must be < 4 r_o ‖p_d − p_o‖ / π² = {bound}", self.gamma_theta),
            ));
        }
        if self.theta_set.is_empty() {
            return Err(gain_error("theta_set", "must be nonempty".into()));
        }
        let pi = T::PI();
        for (i, &t) in self.theta_set.iter().enumerate() {
            if !(t.abs() > T::zero() && t.abs() < pi) {
                return Err(gain_error("theta_set", format!("element {i} = {t} must satisfy 0 < |θ| < π")));
            }
            if self.theta_set[..i].contains(&t) {
                return Err(gain_error("theta_set", format!("element {i} = {t} is a duplicate")));
            }
        }
        let ds = delta_star(world, self);
        if !(self.delta <= ds) {
            return Err(gain_error(
                "delta",
                format!("{} must be <= delta_star = (2 r_o ‖p_d − p_o‖/π² − γ_θ/2) θ_max² = {ds}", self.delta),
            ));
        }
        let c = c_kappa_nav(world, self);
        if let Some(s) = &self.smoothing {
            s.validate(self.delta, c)?;
        }
        if let Some(b) = &self.backstepping {
            let gamma_s = self
                .smoothing
                .map(|s| s.gamma_s)
                .ok_or_else(|| gain_error("backstepping", "requires smoothing parameters".into()))?;
            b.validate(self.delta, gamma_s, c)?;
        }
        Ok(())
    }
}

/// `4 r_o ‖p_d − p_o‖ / π²`
pub fn gamma_theta_bound<T: Scalar>(world: &NavigationWorld<T>) -> T {
    T::lit(4.0) * world.r_o * world.dest_distance() / T::lit(PI * PI)
}

/// `(2 r_o ‖p_d − p_o‖/π² − γ_θ/2) θ_max²`
pub fn delta_star<T: Scalar>(world: &NavigationWorld<T>, gains: &NavGains<T>) -> T {
    let tm = gains.theta_max();
    (T::lit(2.0) * world.r_o * world.dest_distance() / T::lit(PI * PI) - gains.gamma_theta / T::lit(2.0)) * tm * tm
}

/// `(1 − cos θ_max) ‖p_d − p_o‖²`
pub fn c_kappa_nav<T: Scalar>(world: &NavigationWorld<T>, gains: &NavGains<T>) -> T {
    let d = world.dest_distance();
    (T::one() - gains.theta_max().cos()) * d * d
}

/// `(I − R(θ))ᵀ (p_o − p_d)`
pub fn sigma_nav<T: Scalar>(world: &NavigationWorld<T>, theta: T) -> Vec2<T> {
    let v = sub2(world.p_o, world.p_d);
    sub2(v, tr_mul2(rotation(theta), v))
}

/// `R(θ)ᵀ Δ (p_o − p_d)`, the derivative of [`sigma_nav`].
pub fn d_sigma_nav<T: Scalar>(world: &NavigationWorld<T>, theta: T) -> Vec2<T> {
    tr_mul2(rotation(theta), mul2(delta_matrix(), sub2(world.p_o, world.p_d)))
}

pub fn v_syn_unchecked<T: Scalar>(world: &NavigationWorld<T>, gains: &NavGains<T>, p: Vec2<T>, theta: T) -> T {
    let e = sub2(world.transform(p, theta), world.p_d);
    let half = T::lit(0.5);
    half * dot2(e, e) + world.varrho * world.phi_unchecked(world.d_o(p)) + half * gains.gamma_theta * theta * theta
}

pub fn grad_p_syn_unchecked<T: Scalar>(world: &NavigationWorld<T>, p: Vec2<T>, theta: T) -> Vec2<T> {
    let v = sub2(world.p_d, world.p_o);
    let extra = sub2(v, tr_mul2(rotation(theta), v));
    add2(world.grad_v_nav_unchecked(p), extra)
}

pub fn grad_theta_syn_unchecked<T: Scalar>(world: &NavigationWorld<T>, gains: &NavGains<T>, p: Vec2<T>, theta: T) -> T {
    let w = sub2(p, world.p_o);
    let rt = tr_mul2(rotation(theta), sub2(world.p_o, world.p_d));
    gains.gamma_theta * theta - dot2(w, mul2(delta_matrix(), rt))
}

/// `½‖T(p, θ) − p_d‖² + ϱ φ(d_o(p)) + (γ_θ/2) θ²`
pub fn v_syn<T: Scalar>(world: &NavigationWorld<T>, gains: &NavGains<T>, p: Vec2<T>, theta: T) -> Result<T> {
    world.check_free(p)?;
    Ok(v_syn_unchecked(world, gains, p, theta))
}

/// `∇V_nav(p) + (I − R(θ))ᵀ (p_d − p_o)`
pub fn grad_p_syn<T: Scalar>(world: &NavigationWorld<T>, p: Vec2<T>, theta: T) -> Result<Vec2<T>> {
    world.check_free(p)?;
    Ok(grad_p_syn_unchecked(world, p, theta))
}

/// `γ_θ θ − (p − p_o)ᵀ Δ R(θ)ᵀ (p_o − p_d)`
pub fn grad_theta_syn<T: Scalar>(world: &NavigationWorld<T>, gains: &NavGains<T>, p: Vec2<T>, theta: T) -> Result<T> {
    world.check_free(p)?;
    Ok(grad_theta_syn_unchecked(world, gains, p, theta))
}

/// Saddle of `V_nav` on the ray from `p_d` through `p_o`, beyond the obstacle.
///
/// Along that ray `∇V_nav` is parallel to the ray with signed magnitude
/// `h(z) = ‖p_o − p_d‖ + r_o + z + ϱ φ′(z)` at obstacle distance `z`, which
/// increases on `(0, r_s)`. The root is bisected on `[ε, r_s]` until the
/// bracket stops shrinking.
pub fn find_critical_point<T: Scalar>(world: &NavigationWorld<T>) -> Result<Vec2<T>> {
    let d = world.dest_distance();
    let h = |z: T| d + world.r_o + z + world.varrho * world.dphi_unchecked(z);
    let (mut lo, mut hi) = (world.epsilon, world.r_s);
    let h_lo = h(lo);
    if !(h_lo < T::zero()) {
        return Err(Error::NoRootBracketed(format!(
            "h(epsilon) = {h_lo} >= 0: the barrier does not balance attraction above epsilon"
        )));
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = if h(hi).abs() < h(lo).abs() { hi } else { lo };
    let dir = scale2(sub2(world.p_o, world.p_d), T::one() / d);
    Ok(add2(world.p_o, scale2(dir, world.r_o + z)))
}

/// Newton iteration on `∇V_nav = 0` from an arbitrary free-space guess.
pub fn find_critical_point_newton<T: Scalar>(world: &NavigationWorld<T>, guess: Vec2<T>, tol: T, max_iter: usize) -> Result<Vec2<T>> {
    let mut p = guess;
    for _ in 0..max_iter {
        let g = world.grad_v_nav(p)?;
        if norm2(g) <= tol {
            return Ok(p);
        }
        let h = world.hess_v_nav_unchecked(p);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det == T::zero() || !det.is_finite() {
            break;
        }
        let step = [
            (h[1][1] * g[0] - h[0][1] * g[1]) / det,
            (h[0][0] * g[1] - h[1][0] * g[0]) / det,
        ];
        let mut next = sub2(p, step);
        // halve steps that leave the free space
        let mut tries = 0;
        while !world.in_free_space(next) && tries < 60 {
            next = sub2(p, scale2(sub2(p, next), T::lit(0.5)));
            tries += 1;
        }
        p = next;
    }
    Err(Error::NoRootBracketed(format!("Newton did not converge from {guess:?}")))
}

/// `[(p*, 0)]` as packed `[p | θ]` states.
pub fn critical_states<T: Scalar>(world: &NavigationWorld<T>) -> Result<Vec<Vec<T>>> {
    let p = find_critical_point(world)?;
    Ok(vec![vec![p[0], p[1], T::zero()]])
}

/// Single integrator `ṗ = u` with the ε-shell as safety indicator.
pub fn plant<T: Scalar>(world: &NavigationWorld<T>) -> AffinePlant<T> {
    let w = *world;
    AffinePlant::new(
        2,
        2,
        Arc::new(|_: &[T]| vec![T::zero(); 2]),
        Arc::new(|_: &[T]| Mat::identity(2)),
    )
    .with_safety_indicator(Arc::new(move |x: &[T]| w.safety_indicator(v2(x))))
}

/// Plant and quadruple with `κ = −k_p ∇_p V`, `ϖ = −k_θ ∇_θ V`.
pub fn nominal_controller<T: Scalar>(
    world: &NavigationWorld<T>,
    gains: &NavGains<T>,
) -> Result<(AffinePlant<T>, SynergisticQuadruple<T>)> {
    world.validate()?;
    gains.validate(world)?;
    let (w, g) = (*world, gains.clone());
    let v = Arc::new(move |x: &[T], th: &[T]| v_syn_unchecked(&w, &g, v2(x), th[0]));
    let (w, g) = (*world, gains.clone());
    let grad_v = Arc::new(move |x: &[T], th: &[T]| {
        let p = v2(x);
        (grad_p_syn_unchecked(&w, p, th[0]).to_vec(), vec![grad_theta_syn_unchecked(&w, &g, p, th[0])])
    });
    let (w, k_p) = (*world, gains.k_p);
    let kappa = Arc::new(move |x: &[T], th: &[T]| scale2(grad_p_syn_unchecked(&w, v2(x), th[0]), -k_p).to_vec());
    let (w, g) = (*world, gains.clone());
    let varpi = Arc::new(move |x: &[T], th: &[T]| vec![-g.k_theta * grad_theta_syn_unchecked(&w, &g, v2(x), th[0])]);
    let quad = SynergisticQuadruple::new(QuadrupleParts {
        dim_x: 2,
        dim_theta: 1,
        dim_u: 2,
        v,
        grad_v,
        kappa,
        varpi,
        theta_set: gains.theta_set.iter().map(|&t| vec![t]).collect(),
        delta: gains.delta,
    })?;
    Ok((plant(world), quad))
}

/// `ς = −k_p ∇V_nav`, `Υ = k_p I`, `σ = σ_nav(θ)` with analytic Jacobians.
pub fn decomposed_feedback<T: Scalar>(world: &NavigationWorld<T>, gains: &NavGains<T>) -> Result<DecomposedFeedback<T>> {
    let (w, k_p) = (*world, gains.k_p);
    let sigma = Arc::new(move |_: &[T], th: &[T]| sigma_nav(&w, th[0]).to_vec());
    let varsigma = Arc::new(move |x: &[T]| scale2(w.grad_v_nav_unchecked(v2(x)), -k_p).to_vec());
    let upsilon = Arc::new(move |_: &[T]| Mat::identity(2).scaled(k_p));
    let d_sigma_dx = Arc::new(|_: &[T], _: &[T]| Mat::zeros(2, 2));
    let d_sigma_dtheta = Arc::new(move |_: &[T], th: &[T]| Mat::column(&d_sigma_nav(&w, th[0])));
    DecomposedFeedback::new(DecompositionParts {
        dim_x: 2,
        dim_theta: 1,
        dim_u: 2,
        dim_s: 2,
        sigma,
        varsigma,
        upsilon,
        d_sigma_dx: Some(d_sigma_dx),
        d_sigma_dtheta: Some(d_sigma_dtheta),
        c_kappa: c_kappa_nav(world, gains),
    })
}

/// Smoothed navigation design; needs `gains.smoothing`.
pub fn smooth_controller<T: Scalar>(world: &NavigationWorld<T>, gains: &NavGains<T>) -> Result<SmoothedDesign<T>> {
    let params = gains
        .smoothing
        .ok_or_else(|| gain_error("smoothing", "smoothing parameters are required".into()))?;
    let (plant, quad) = nominal_controller(world, gains)?;
    SmoothedDesign::new(plant, quad, decomposed_feedback(world, gains)?, params)
}

/// `D_x ς = −k_p ∇²V_nav` and `D_x Υ_i = 0`.
pub fn feedback_jacobians<T: Scalar>(world: &NavigationWorld<T>, gains: &NavGains<T>) -> FeedbackJacobians<T> {
    let (w, k_p) = (*world, gains.k_p);
    FeedbackJacobians {
        d_varsigma_dx: Arc::new(move |x: &[T]| {
            let h = w.hess_v_nav_unchecked(v2(x));
            Mat::from_rows(&[&h[0], &h[1]]).scaled(-k_p)
        }),
        d_upsilon_dx: Arc::new(|_: &[T]| vec![Mat::zeros(2, 2), Mat::zeros(2, 2)]),
    }
}

/// Backstepped navigation design; needs `gains.smoothing` and `gains.backstepping`.
pub fn backstepped_controller<T: Scalar>(world: &NavigationWorld<T>, gains: &NavGains<T>) -> Result<BacksteppedDesign<T>> {
    let params = gains
        .backstepping
        .ok_or_else(|| gain_error("backstepping", "backstepping parameters are required".into()))?;
    let smoothed = smooth_controller(world, gains)?;
    BacksteppedDesign::new(smoothed, feedback_jacobians(world, gains), params)
}

/// `ṗ = −k_p ∇V_nav(p)` on `[p]`, with no jumps.
pub fn non_hybrid_spec<T: Scalar>(world: &NavigationWorld<T>, k_p: T) -> HybridSystemSpec<T> {
    let w = *world;
    HybridSystemSpec::flow_only(2, Arc::new(move |x: &[T]| scale2(w.grad_v_nav_unchecked(v2(x)), -k_p).to_vec()))
}

/// Pushes `p` (the first two state entries) back onto the ε-shell when a step
/// ends inside it; returns whether it moved the state.
pub fn clamp_projection<T: Scalar>(world: &NavigationWorld<T>) -> ProjectionFn<T> {
    let w = *world;
    Arc::new(move |x: &mut [T]| {
        let rel = sub2(v2(x), w.p_o);
        let r = norm2(rel);
        let shell = w.r_o + w.epsilon;
        if r >= shell || r == T::zero() {
            return false;
        }
        let p = add2(w.p_o, scale2(rel, shell / r));
        x[0] = p[0];
        x[1] = p[1];
        true
    })
}
