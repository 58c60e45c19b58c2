//! Removing the input discontinuity of a synergistic controller.
//!
//! The feedback is split as `κ(x, θ) = ς(x) + Υ(x) σ(x, θ)`. An auxiliary
//! state `η` tracks `σ` through smooth dynamics `η̇ = κ_s`, and the plant is
//! driven by `κ̄(x, η) = ς(x) + Υ(x) η`, which does not depend on `θ` and so
//! stays continuous when `θ` jumps.
//!
//! Smoothed states are packed as `[x | η | θ]`; the smoothed quadruple sees
//! `[x | η]` as its plant state.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{add, central_jacobian, dot, norm, sub, Mat};
use crate::scalar::Scalar;
use crate::synergy::{
    AffinePlant, PairMatFn, PairVecFn, QuadrupleParts, StateFn, StateMatFn, SynergisticQuadruple,
};

/// Relative step of the finite-difference Jacobian fallback.
pub const FD_STEP: f64 = 1e-6;

/// Safety factor applied to sampled estimates of `c_κ`.
pub const DEFAULT_C_KAPPA_INFLATION: f64 = 1.1;

/// Where the `c_κ` bound came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CKappaSource<T> {
    Analytic,
    Estimated { raw: T, inflation: T },
}

/// Inputs for [`DecomposedFeedback::new`].
pub struct DecompositionParts<T> {
    pub dim_x: usize,
    pub dim_theta: usize,
    pub dim_u: usize,
    pub dim_s: usize,
    pub sigma: PairVecFn<T>,
    pub varsigma: StateFn<T>,
    /// `m × s`
    pub upsilon: StateMatFn<T>,
    /// `s × n`; finite differences are used when absent.
    pub d_sigma_dx: Option<PairMatFn<T>>,
    /// `s × r`; finite differences are used when absent.
    pub d_sigma_dtheta: Option<PairMatFn<T>>,
    pub c_kappa: T,
}

/// `κ = ς + Υσ` together with the Jacobians of `σ` and the bound `c_κ`.
#[derive(Clone)]
pub struct DecomposedFeedback<T> {
    dim_x: usize,
    dim_theta: usize,
    dim_u: usize,
    dim_s: usize,
    sigma: PairVecFn<T>,
    varsigma: StateFn<T>,
    upsilon: StateMatFn<T>,
    d_sigma_dx: Option<PairMatFn<T>>,
    d_sigma_dtheta: Option<PairMatFn<T>>,
    c_kappa: T,
    c_kappa_source: CKappaSource<T>,
}

impl<T: Scalar> DecomposedFeedback<T> {
    pub fn new(parts: DecompositionParts<T>) -> Result<Self> {
        if !(parts.c_kappa >= T::zero()) || !parts.c_kappa.is_finite() {
            return Err(Error::ParamBoundViolation {
                param: "c_kappa",
                bound: format!("must be finite and >= 0, got {}", parts.c_kappa),
            });
        }
        Ok(Self {
            dim_x: parts.dim_x,
            dim_theta: parts.dim_theta,
            dim_u: parts.dim_u,
            dim_s: parts.dim_s,
            sigma: parts.sigma,
            varsigma: parts.varsigma,
            upsilon: parts.upsilon,
            d_sigma_dx: parts.d_sigma_dx,
            d_sigma_dtheta: parts.d_sigma_dtheta,
            c_kappa: parts.c_kappa,
            c_kappa_source: CKappaSource::Analytic,
        })
    }

    /// Replaces `c_κ` by `inflation` times its estimate on `critical_states`.
    pub fn with_estimated_c_kappa(
        mut self,
        critical_states: &[Vec<T>],
        theta_set: &[Vec<T>],
        inflation: T,
    ) -> Self {
        let raw = estimate_c_kappa(&self, critical_states, theta_set);
        self.c_kappa = raw * inflation;
        self.c_kappa_source = CKappaSource::Estimated { raw, inflation };
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

    pub fn dim_s(&self) -> usize {
        self.dim_s
    }

    pub fn c_kappa(&self) -> T {
        self.c_kappa
    }

    pub fn c_kappa_source(&self) -> CKappaSource<T> {
        self.c_kappa_source
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        self.d_sigma_dx.is_some() && self.d_sigma_dtheta.is_some()
    }

    pub fn sigma(&self, x: &[T], theta: &[T]) -> Vec<T> {
        (self.sigma)(x, theta)
    }

    pub fn varsigma(&self, x: &[T]) -> Vec<T> {
        (self.varsigma)(x)
    }

    pub fn upsilon(&self, x: &[T]) -> Mat<T> {
        (self.upsilon)(x)
    }

    /// `ς(x) + Υ(x) σ(x, θ)`
    pub fn reconstruct(&self, x: &[T], theta: &[T]) -> Vec<T> {
        add(&self.varsigma(x), &self.upsilon(x).mul_vec(&self.sigma(x, theta)))
    }

    pub fn d_sigma_dx(&self, x: &[T], theta: &[T]) -> Mat<T> {
        match &self.d_sigma_dx {
            Some(jac) => jac(x, theta),
            None => self.fd_sigma_dx(x, theta),
        }
    }

    pub fn d_sigma_dtheta(&self, x: &[T], theta: &[T]) -> Mat<T> {
        match &self.d_sigma_dtheta {
            Some(jac) => jac(x, theta),
            None => self.fd_sigma_dtheta(x, theta),
        }
    }

    pub fn fd_sigma_dx(&self, x: &[T], theta: &[T]) -> Mat<T> {
        central_jacobian(|xx: &[T]| self.sigma(xx, theta), x, T::lit(FD_STEP))
    }

    pub fn fd_sigma_dtheta(&self, x: &[T], theta: &[T]) -> Mat<T> {
        central_jacobian(|th: &[T]| self.sigma(x, th), theta, T::lit(FD_STEP))
    }
}

/// Largest `|κ − (ς + Υσ)|` over packed `[x | θ]` samples.
pub fn reconstruction_error<T: Scalar>(
    q: &SynergisticQuadruple<T>,
    d: &DecomposedFeedback<T>,
    samples: &[Vec<T>],
) -> T {
    samples
        .iter()
        .map(|s| {
            let (x, th) = s.split_at(d.dim_x);
            let diff = sub(&q.kappa(x, th), &d.reconstruct(x, th));
            diff.iter().fold(T::zero(), |m, v| m.max(v.abs()))
        })
        .fold(T::zero(), T::max)
}

/// Worst relative gap between analytic and finite-difference Jacobians of `σ`
/// over packed `[x | θ]` samples, or `None` when no analytic Jacobian exists.
pub fn jacobian_audit<T: Scalar>(d: &DecomposedFeedback<T>, samples: &[Vec<T>]) -> Option<T> {
    if d.d_sigma_dx.is_none() && d.d_sigma_dtheta.is_none() {
        return None;
    }
    let rel = |a: &Mat<T>, b: &Mat<T>| {
        let scale = a.max_abs().max(b.max_abs()).max(T::one());
        a.add(&b.scaled(-T::one())).max_abs() / scale
    };
    let mut worst = T::zero();
    for s in samples {
        let (x, th) = s.split_at(d.dim_x);
        if let Some(jac) = &d.d_sigma_dx {
            worst = worst.max(rel(&jac(x, th), &d.fd_sigma_dx(x, th)));
        }
        if let Some(jac) = &d.d_sigma_dtheta {
            worst = worst.max(rel(&jac(x, th), &d.fd_sigma_dtheta(x, th)));
        }
    }
    Some(worst)
}

/// Half of `max ‖σ(x, θ) − σ(x, θ̄)‖²` over packed `[x | θ]` states and `θ̄ ∈ Θ`.
pub fn estimate_c_kappa<T: Scalar>(
    d: &DecomposedFeedback<T>,
    critical_states: &[Vec<T>],
    theta_set: &[Vec<T>],
) -> T {
    let mut worst = T::zero();
    for s in critical_states {
        let (x, th) = s.split_at(d.dim_x);
        let here = d.sigma(x, th);
        for bar in theta_set {
            let gap = norm(&sub(&here, &d.sigma(x, bar)));
            worst = worst.max(gap * gap);
        }
    }
    worst / T::lit(2.0)
}

/// `(γ_s, k_η, δ_s)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedParams<T> {
    pub gamma_s: T,
    pub k_eta: T,
    pub delta_s: T,
}

impl<T: Scalar> SmoothedParams<T> {
    /// Checks positivity, `γ_s < δ / c_κ` and `δ_s <= δ − γ_s c_κ`.
    pub fn validate(&self, delta: T, c_kappa: T) -> Result<()> {
        positive("gamma_s", self.gamma_s)?;
        positive("k_eta", self.k_eta)?;
        positive("delta_s", self.delta_s)?;
        if c_kappa > T::zero() && !(self.gamma_s < delta / c_kappa) {
            return Err(Error::ParamBoundViolation {
                param: "gamma_s",
                bound: format!(
                    "gamma_s = {} must be < delta / c_kappa = {}",
                    self.gamma_s,
                    delta / c_kappa
                ),
            });
        }
        check_gap("delta_s", self.delta_s, delta, self.gamma_s, c_kappa)
    }
}

/// Errors unless `value` is finite and positive.
pub fn positive<T: Scalar>(param: &'static str, value: T) -> Result<()> {
    if value > T::zero() && value.is_finite() {
        Ok(())
    } else {
        Err(Error::ParamBoundViolation {
            param,
            bound: format!("must be finite and > 0, got {value}"),
        })
    }
}

/// `gap <= δ − γ_s c_κ`, allowing a few ulps so the boundary value itself passes.
pub fn check_gap<T: Scalar>(
    param: &'static str,
    gap: T,
    delta: T,
    gamma_s: T,
    c_kappa: T,
) -> Result<()> {
    let bound = delta - gamma_s * c_kappa;
    let slack = T::lit(4.0) * T::epsilon() * delta.abs();
    if gap <= bound + slack {
        Ok(())
    } else {
        Err(Error::ParamBoundViolation {
            param,
            bound: format!("{param} = {gap} must be <= delta - gamma_s * c_kappa = {bound}"),
        })
    }
}

/// `[x | η | θ]` view of a smoothed closed-loop state.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedState<T> {
    pub x: Vec<T>,
    pub eta: Vec<T>,
    pub theta: Vec<T>,
}

impl<T: Scalar> SmoothedState<T> {
    pub fn pack(&self) -> Vec<T> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.eta);
        v.extend_from_slice(&self.theta);
        v
    }

    pub fn unpack(packed: &[T], dim_x: usize, dim_s: usize) -> Self {
        Self {
            x: packed[..dim_x].to_vec(),
            eta: packed[dim_x..dim_x + dim_s].to_vec(),
            theta: packed[dim_x + dim_s..].to_vec(),
        }
    }
}

/// Plant, nominal quadruple, decomposition and smoothing gains.
#[derive(Clone)]
pub struct SmoothedDesign<T> {
    pub plant: AffinePlant<T>,
    pub quad: SynergisticQuadruple<T>,
    pub feedback: DecomposedFeedback<T>,
    pub params: SmoothedParams<T>,
}

impl<T: Scalar> SmoothedDesign<T> {
    pub fn new(
        plant: AffinePlant<T>,
        quad: SynergisticQuadruple<T>,
        feedback: DecomposedFeedback<T>,
        params: SmoothedParams<T>,
    ) -> Result<Self> {
        let dims = [
            ("plant state vs quadruple state", quad.dim_x(), plant.dim_x),
            ("decomposition state", quad.dim_x(), feedback.dim_x),
            ("decomposition switching variable", quad.dim_theta(), feedback.dim_theta),
            ("decomposition input", plant.dim_u, feedback.dim_u),
        ];
        for (what, expected, actual) in dims {
            if expected != actual {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    actual,
                });
            }
        }
        params.validate(quad.delta(), feedback.c_kappa())?;
        Ok(Self {
            plant,
            quad,
            feedback,
            params,
        })
    }

    pub fn dim_x(&self) -> usize {
        self.quad.dim_x()
    }

    pub fn dim_s(&self) -> usize {
        self.feedback.dim_s
    }

    /// `ς(x) + Υ(x) η`
    pub fn kappa_bar(&self, x: &[T], eta: &[T]) -> Vec<T> {
        kappa_bar(&self.feedback, x, eta)
    }

    /// `η − σ(x, θ)`
    pub fn eta_error(&self, x: &[T], eta: &[T], theta: &[T]) -> Vec<T> {
        sub(eta, &self.feedback.sigma(x, theta))
    }

    /// `V(x, θ) + (γ_s/2)‖η − σ(x, θ)‖²`
    pub fn v_s(&self, x: &[T], eta: &[T], theta: &[T]) -> T {
        let e = norm(&self.eta_error(x, eta, theta));
        self.quad.v(x, theta) + self.params.gamma_s / T::lit(2.0) * e * e
    }

    /// `(∇_x V_s, ∇_η V_s, ∇_θ V_s)`
    pub fn grad_v_s(&self, x: &[T], eta: &[T], theta: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let g = self.params.gamma_s;
        let e = self.eta_error(x, eta, theta);
        let (gx, gt) = self.quad.grad_v(x, theta);
        let dx = self.feedback.d_sigma_dx(x, theta).tr_mul_vec(&e);
        let dt = self.feedback.d_sigma_dtheta(x, theta).tr_mul_vec(&e);
        let gx = gx.iter().zip(&dx).map(|(&a, &b)| a - g * b).collect();
        let gt = gt.iter().zip(&dt).map(|(&a, &b)| a - g * b).collect();
        let ge = e.iter().map(|&v| g * v).collect();
        (gx, ge, gt)
    }

    /// `D_x σ (f + g κ̄) + D_θ σ ϖ`
    pub fn d_t_sigma(&self, x: &[T], eta: &[T], theta: &[T]) -> Vec<T> {
        let xdot = self.plant.dynamics(x, &self.kappa_bar(x, eta));
        add(
            &self.feedback.d_sigma_dx(x, theta).mul_vec(&xdot),
            &self
                .feedback
                .d_sigma_dtheta(x, theta)
                .mul_vec(&self.quad.varpi(x, theta)),
        )
    }

    /// `−k_η(η − σ) + D_t σ − (1/γ_s) Υᵀ gᵀ ∇_x V`
    pub fn kappa_s(&self, x: &[T], eta: &[T], theta: &[T]) -> Vec<T> {
        let e = self.eta_error(x, eta, theta);
        let dts = self.d_t_sigma(x, eta, theta);
        let (gx, _) = self.quad.grad_v(x, theta);
        let coupling = self
            .feedback
            .upsilon(x)
            .tr_mul_vec(&(self.plant.g)(x).tr_mul_vec(&gx));
        let inv = T::one() / self.params.gamma_s;
        e.iter()
            .zip(&dts)
            .zip(&coupling)
            .map(|((&e, &d), &c)| -self.params.k_eta * e + d - inv * c)
            .collect()
    }

    /// `⟨∇V_s, (f + g κ̄, κ_s, ϖ)⟩`
    pub fn v_s_derivative(&self, x: &[T], eta: &[T], theta: &[T]) -> T {
        let (gx, ge, gt) = self.grad_v_s(x, eta, theta);
        let xdot = self.plant.dynamics(x, &self.kappa_bar(x, eta));
        dot(&gx, &xdot)
            + dot(&ge, &self.kappa_s(x, eta, theta))
            + dot(&gt, &self.quad.varpi(x, theta))
    }

    /// Plant on `[x | η]` with input `η̇`: drift `(f + g κ̄, 0)`, gain `(0; I)`.
    pub fn smoothed_plant(&self) -> AffinePlant<T> {
        let (n, s) = (self.dim_x(), self.dim_s());
        let design = self.clone();
        let f = Arc::new(move |xs: &[T]| {
            let (x, eta) = xs.split_at(n);
            let mut out = design.plant.dynamics(x, &design.kappa_bar(x, eta));
            out.extend(std::iter::repeat_n(T::zero(), s));
            out
        });
        let g = Arc::new(move |_: &[T]| {
            let mut m = Mat::zeros(n + s, s);
            for i in 0..s {
                m.set(n + i, i, T::one());
            }
            m
        });
        let mut plant = AffinePlant::new(n + s, s, f, g);
        if let Some(ind) = self.plant.safety_indicator.clone() {
            plant = plant.with_safety_indicator(Arc::new(move |xs: &[T]| ind(&xs[..n])));
        }
        plant
    }

    /// `(V_s, ∇V_s, κ_s, ϖ, Θ, δ_s)` over `[x | η]`.
    pub fn smoothed_quadruple(&self) -> Result<SynergisticQuadruple<T>> {
        let n = self.dim_x();
        let d = self.clone();
        let v = Arc::new(move |xs: &[T], th: &[T]| {
            let (x, eta) = xs.split_at(n);
            d.v_s(x, eta, th)
        });
        let d = self.clone();
        let grad_v = Arc::new(move |xs: &[T], th: &[T]| {
            let (x, eta) = xs.split_at(n);
            let (mut gx, ge, gt) = d.grad_v_s(x, eta, th);
            gx.extend(ge);
            (gx, gt)
        });
        let d = self.clone();
        let kappa = Arc::new(move |xs: &[T], th: &[T]| {
            let (x, eta) = xs.split_at(n);
            d.kappa_s(x, eta, th)
        });
        let d = self.clone();
        let varpi = Arc::new(move |xs: &[T], th: &[T]| d.quad.varpi(&xs[..n], th));
        SynergisticQuadruple::new(QuadrupleParts {
            dim_x: n + self.dim_s(),
            dim_theta: self.quad.dim_theta(),
            dim_u: self.dim_s(),
            v,
            grad_v,
            kappa,
            varpi,
            theta_set: self.quad.theta_set().to_vec(),
            delta: self.params.delta_s,
        })
        .map(|q| q.with_tie_tol(self.quad.tie_tol()))
    }
}

/// `ς(x) + Υ(x) η`
pub fn kappa_bar<T: Scalar>(d: &DecomposedFeedback<T>, x: &[T], eta: &[T]) -> Vec<T> {
    add(&d.varsigma(x), &d.upsilon(x).mul_vec(eta))
}

/// Validates the gains and returns the plant on `[x | η]` with the smoothed
/// quadruple, ready for [`crate::synergy::assemble_closed_loop`].
pub fn smoothed_quadruple<T: Scalar>(
    plant: &AffinePlant<T>,
    q: &SynergisticQuadruple<T>,
    d: &DecomposedFeedback<T>,
    p: SmoothedParams<T>,
) -> Result<(AffinePlant<T>, SynergisticQuadruple<T>)> {
    let design = SmoothedDesign::new(plant.clone(), q.clone(), d.clone(), p)?;
    Ok((design.smoothed_plant(), design.smoothed_quadruple()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate, SimConfig};
    use crate::synergy::{assemble_closed_loop, lyapunov_derivative};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn integrator() -> AffinePlant<f64> {
        AffinePlant::new(
            1,
            1,
            Arc::new(|_: &[f64]| vec![0.0]),
            Arc::new(|_: &[f64]| Mat::identity(1)),
        )
    }

    /// `V = x²/2 + θ²/2`, `κ = −2x + xθ` split as `ς = −2x`, `Υ = 1`,
    /// `σ = xθ`, `ϖ = −θ`.
    fn coupled(analytic: bool, theta_set: Vec<Vec<f64>>) -> (SynergisticQuadruple<f64>, DecomposedFeedback<f64>) {
        let q = SynergisticQuadruple::new(QuadrupleParts {
            dim_x: 1,
            dim_theta: 1,
            dim_u: 1,
            v: Arc::new(|x: &[f64], th: &[f64]| 0.5 * x[0] * x[0] + 0.5 * th[0] * th[0]),
            grad_v: Arc::new(|x: &[f64], th: &[f64]| (vec![x[0]], vec![th[0]])),
            kappa: Arc::new(|x: &[f64], th: &[f64]| vec![-2.0 * x[0] + x[0] * th[0]]),
            varpi: Arc::new(|_: &[f64], th: &[f64]| vec![-th[0]]),
            theta_set,
            delta: 0.5,
        })
        .unwrap();
        let (dx, dth): (Option<PairMatFn<f64>>, Option<PairMatFn<f64>>) = if analytic {
            (
                Some(Arc::new(|_: &[f64], th: &[f64]| Mat::from_rows(&[&[th[0]]]))),
                Some(Arc::new(|x: &[f64], _: &[f64]| Mat::from_rows(&[&[x[0]]]))),
            )
        } else {
            (None, None)
        };
        let d = DecomposedFeedback::new(DecompositionParts {
            dim_x: 1,
            dim_theta: 1,
            dim_u: 1,
            dim_s: 1,
            sigma: Arc::new(|x: &[f64], th: &[f64]| vec![x[0] * th[0]]),
            varsigma: Arc::new(|x: &[f64]| vec![-2.0 * x[0]]),
            upsilon: Arc::new(|_: &[f64]| Mat::identity(1)),
            d_sigma_dx: dx,
            d_sigma_dtheta: dth,
            c_kappa: 0.1,
        })
        .unwrap();
        (q, d)
    }

    fn params() -> SmoothedParams<f64> {
        SmoothedParams {
            gamma_s: 0.5,
            k_eta: 3.0,
            delta_s: 0.2,
        }
    }

    fn random_states(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-2.0..2.0)])
            .collect()
    }

    #[test]
    fn kappa_bar_reconstructs_kappa() {
        let (q, d) = coupled(true, vec![vec![0.0]]);
        for [x, _, th] in random_states(50, 1) {
            let sigma = d.sigma(&[x], &[th]);
            let kb = kappa_bar(&d, &[x], &sigma);
            assert!((kb[0] - q.kappa(&[x], &[th])[0]).abs() <= 1e-12);
        }
        let samples: Vec<Vec<f64>> = random_states(20, 2).iter().map(|s| vec![s[0], s[2]]).collect();
        assert!(reconstruction_error(&q, &d, &samples) <= 1e-12);
    }

    #[test]
    fn kappa_bar_without_upsilon_is_varsigma() {
        let d = DecomposedFeedback::new(DecompositionParts {
            dim_x: 1,
            dim_theta: 1,
            dim_u: 1,
            dim_s: 1,
            sigma: Arc::new(|_: &[f64], th: &[f64]| vec![th[0]]),
            varsigma: Arc::new(|x: &[f64]| vec![-x[0]]),
            upsilon: Arc::new(|_: &[f64]| Mat::zeros(1, 1)),
            d_sigma_dx: None,
            d_sigma_dtheta: None,
            c_kappa: 0.0,
        })
        .unwrap();
        assert_eq!(kappa_bar(&d, &[2.0], &[17.0]), vec![-2.0]);
    }

    #[test]
    fn v_s_adds_tracking_penalty() {
        let (q, d) = coupled(true, vec![vec![0.0]]);
        let design = SmoothedDesign::new(integrator(), q.clone(), d.clone(), params()).unwrap();
        for [x, eta, th] in random_states(50, 3) {
            let e = eta - x * th;
            let expected = 0.5 * x * x + 0.5 * th * th + 0.25 * e * e;
            assert!((design.v_s(&[x], &[eta], &[th]) - expected).abs() <= 1e-12);
            let sigma = d.sigma(&[x], &[th]);
            assert_eq!(design.v_s(&[x], &sigma, &[th]), q.v(&[x], &[th]));
        }
        assert_eq!(design.v_s(&[0.0], &[0.0], &[0.0]), 0.0);
    }

    #[test]
    fn grad_v_s_matches_finite_differences() {
        let (q, d) = coupled(true, vec![vec![0.0]]);
        let design = SmoothedDesign::new(integrator(), q, d, params()).unwrap();
        for s in random_states(50, 4) {
            let fd = crate::linalg::central_gradient(
                |z: &[f64]| design.v_s(&z[..1], &z[1..2], &z[2..]),
                &s,
                1e-6,
            );
            let (gx, ge, gt) = design.grad_v_s(&s[..1], &s[1..2], &s[2..]);
            for (a, b) in [gx[0], ge[0], gt[0]].iter().zip(&fd) {
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn kappa_s_vanishes_when_all_terms_do() {
        // σ constant in x, ϖ = 0, ∇_x V = 0 at x = 0, η = σ
        let q = SynergisticQuadruple::new(QuadrupleParts {
            dim_x: 1,
            dim_theta: 1,
            dim_u: 1,
            v: Arc::new(|x: &[f64], th: &[f64]| 0.5 * x[0] * x[0] + th[0] * th[0]),
            grad_v: Arc::new(|x: &[f64], th: &[f64]| (vec![x[0]], vec![2.0 * th[0]])),
            kappa: Arc::new(|x: &[f64], th: &[f64]| vec![-x[0] + th[0]]),
            varpi: Arc::new(|_: &[f64], _: &[f64]| vec![0.0]),
            theta_set: vec![vec![0.0]],
            delta: 0.5,
        })
        .unwrap();
        let d = DecomposedFeedback::new(DecompositionParts {
            dim_x: 1,
            dim_theta: 1,
            dim_u: 1,
            dim_s: 1,
            sigma: Arc::new(|_: &[f64], th: &[f64]| vec![th[0]]),
            varsigma: Arc::new(|x: &[f64]| vec![-x[0]]),
            upsilon: Arc::new(|_: &[f64]| Mat::identity(1)),
            d_sigma_dx: None,
            d_sigma_dtheta: None,
            c_kappa: 0.0,
        })
        .unwrap();
        let design = SmoothedDesign::new(integrator(), q, d, params()).unwrap();
        assert!(design.kappa_s(&[0.0], &[0.7], &[0.7])[0].abs() < 1e-12);
    }

    #[test]
    fn derivative_identity_holds() {
        let (q, d) = coupled(true, vec![vec![0.0]]);
        let plant = integrator();
        let design = SmoothedDesign::new(plant.clone(), q.clone(), d, params()).unwrap();
        for [x, eta, th] in random_states(100, 5) {
            let e = eta - x * th;
            let expected = lyapunov_derivative(&plant, &q, &[x], &[th]) - 0.5 * 3.0 * e * e;
            let got = design.v_s_derivative(&[x], &[eta], &[th]);
            assert!((got - expected).abs() <= 1e-8 * expected.abs().max(1.0), "{got} vs {expected}");
        }
    }

    #[test]
    fn finite_difference_fallback_matches_analytic() {
        let (_, analytic) = coupled(true, vec![vec![0.0]]);
        let (_, fd) = coupled(false, vec![vec![0.0]]);
        let samples: Vec<Vec<f64>> = random_states(100, 6).iter().map(|s| vec![s[0], s[2]]).collect();
        assert!(jacobian_audit(&analytic, &samples).unwrap() <= 1e-6);
        assert!(jacobian_audit(&fd, &samples).is_none());
        for s in &samples {
            let a = analytic.d_sigma_dx(&s[..1], &s[1..]);
            let b = fd.d_sigma_dx(&s[..1], &s[1..]);
            assert!((a.get(0, 0) - b.get(0, 0)).abs() <= 1e-6 * a.get(0, 0).abs().max(1.0));
        }
    }

    #[test]
    fn parameter_bounds() {
        let ok = SmoothedParams {
            gamma_s: 0.0659,
            k_eta: 100.0,
            delta_s: 0.0036,
        };
        let c = (1.0 - 0.2f64.cos()) * 25.0;
        assert!(ok.validate(0.0365, c).is_ok());
        let at_bound = SmoothedParams {
            gamma_s: 0.0365 / c,
            ..ok
        };
        assert!(matches!(
            at_bound.validate(0.0365, c),
            Err(Error::ParamBoundViolation { param: "gamma_s", .. })
        ));
        let over = SmoothedParams {
            delta_s: 0.0365 - 0.0659 * c + 0.001,
            ..ok
        };
        assert!(matches!(
            over.validate(0.0365, c),
            Err(Error::ParamBoundViolation { param: "delta_s", .. })
        ));
        let boundary = SmoothedParams {
            delta_s: 0.0365 - 0.0659 * c,
            ..ok
        };
        assert!(boundary.validate(0.0365, c).is_ok());
        // c_κ = 0 leaves γ_s unbounded above
        let big = SmoothedParams {
            gamma_s: 1e6,
            k_eta: 1.0,
            delta_s: 0.0365,
        };
        assert!(big.validate(0.0365, 0.0).is_ok());
    }

    #[test]
    fn c_kappa_estimates() {
        let (_, d) = coupled(true, vec![vec![0.0]]);
        // σ(x, θ) − σ(x, θ̄) = x(θ − θ̄)
        let critical = vec![vec![2.0, 0.5], vec![-1.0, 0.0]];
        let theta_set = vec![vec![0.0], vec![1.0]];
        let raw = estimate_c_kappa(&d, &critical, &theta_set);
        // max gap² = 1 at both states
        assert!((raw - 0.5).abs() < 1e-15);
        assert_eq!(estimate_c_kappa(&d, &critical[1..], &[vec![0.0]]), 0.0);
        let inflated = d.with_estimated_c_kappa(&critical, &theta_set, DEFAULT_C_KAPPA_INFLATION);
        assert!((inflated.c_kappa() - 0.55).abs() < 1e-12);
        assert_eq!(
            inflated.c_kappa_source(),
            CKappaSource::Estimated {
                raw: 0.5,
                inflation: 1.1
            }
        );
    }

    #[test]
    fn input_continuous_across_jumps() {
        let (q, d) = coupled(true, vec![vec![0.0], vec![1.5]]);
        let p = SmoothedParams {
            gamma_s: 0.1,
            k_eta: 5.0,
            delta_s: 0.2,
        };
        let (splant, sq) = smoothed_quadruple(&integrator(), &q, &d, p).unwrap();
        let spec = assemble_closed_loop(&splant, &sq).unwrap();
        let cfg = SimConfig {
            dt: 1e-3,
            t_max: 5.0,
            ..SimConfig::default()
        };
        let arc = simulate(&spec, &[1.0, 2.0, 2.0], &cfg).unwrap();
        assert!(arc.jump_count() >= 1);
        for jump in arc.jumps() {
            assert_eq!(&jump.pre[..2], &jump.post[..2]);
            let before = kappa_bar(&d, &jump.pre[..1], &jump.pre[1..2]);
            let after = kappa_bar(&d, &jump.post[..1], &jump.post[1..2]);
            assert!((before[0] - after[0]).abs() <= 1e-9);
        }
    }
}
