//! Integrator backstepping through the smoothed controller.
//!
//! The input `u` becomes a controller state driven by `u̇ = κ_b`, and the
//! Lyapunov function gains a term penalizing `u − κ̄(x, η)`.
//!
//! Backstepped states are packed as `[x | η | u | θ]`. The backstepped plant
//! has state `[x | η | u]` and input `(η̇, u̇)`, so the quadruple's feedback
//! is the stacked `(κ_s, κ_b)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{add, central_jacobian, dot, norm, sub, Mat};
use crate::scalar::Scalar;
use crate::smoothing::{check_gap, positive, DecomposedFeedback, SmoothedDesign, FD_STEP};
use crate::synergy::{AffinePlant, QuadrupleParts, StateMatFn, SynergisticQuadruple};

pub type JacobianListFn<T> = Arc<dyn Fn(&[T]) -> Vec<Mat<T>> + Send + Sync>;

/// Repo default for `k_b`.
pub const DEFAULT_K_B: f64 = 10.0;
/// Repo default for `γ_b`.
pub const DEFAULT_GAMMA_B: f64 = 0.1;

/// `(γ_b, k_b, δ_b)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BacksteppingParams<T> {
    pub gamma_b: T,
    pub k_b: T,
    pub delta_b: T,
}

impl<T: Scalar> BacksteppingParams<T> {
    /// Checks positivity and `δ_b <= δ − γ_s c_κ`.
    pub fn validate(&self, delta: T, gamma_s: T, c_kappa: T) -> Result<()> {
        positive("gamma_b", self.gamma_b)?;
        positive("k_b", self.k_b)?;
        positive("delta_b", self.delta_b)?;
        check_gap("delta_b", self.delta_b, delta, gamma_s, c_kappa)
    }
}

/// `D_x ς` (`m × n`) and `D_x Υ_i` for each column `i` of `Υ` (`m × n` each).
#[derive(Clone)]
pub struct FeedbackJacobians<T> {
    pub d_varsigma_dx: StateMatFn<T>,
    pub d_upsilon_dx: JacobianListFn<T>,
}

impl<T: Scalar> FeedbackJacobians<T> {
    /// Central differences of `ς` and of each column of `Υ`.
    pub fn finite_difference(d: &DecomposedFeedback<T>) -> Self {
        let ds = d.clone();
        let du = d.clone();
        Self {
            d_varsigma_dx: Arc::new(move |x: &[T]| {
                central_jacobian(|xx: &[T]| ds.varsigma(xx), x, T::lit(FD_STEP))
            }),
            d_upsilon_dx: Arc::new(move |x: &[T]| {
                (0..du.dim_s())
                    .map(|i| central_jacobian(|xx: &[T]| du.upsilon(xx).col(i), x, T::lit(FD_STEP)))
                    .collect()
            }),
        }
    }
}

/// `[x | η | u | θ]` view of a backstepped closed-loop state.
#[derive(Debug, Clone, PartialEq)]
pub struct BackstepState<T> {
    pub x: Vec<T>,
    pub eta: Vec<T>,
    pub u: Vec<T>,
    pub theta: Vec<T>,
}

impl<T: Scalar> BackstepState<T> {
    pub fn pack(&self) -> Vec<T> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.eta);
        v.extend_from_slice(&self.u);
        v.extend_from_slice(&self.theta);
        v
    }

    pub fn unpack(packed: &[T], dim_x: usize, dim_s: usize, dim_u: usize) -> Self {
        let (x, rest) = packed.split_at(dim_x);
        let (eta, rest) = rest.split_at(dim_s);
        let (u, theta) = rest.split_at(dim_u);
        Self {
            x: x.to_vec(),
            eta: eta.to_vec(),
            u: u.to_vec(),
            theta: theta.to_vec(),
        }
    }
}

/// Smoothed design extended with the input integrator.
#[derive(Clone)]
pub struct BacksteppedDesign<T> {
    pub smoothed: SmoothedDesign<T>,
    pub jacobians: FeedbackJacobians<T>,
    pub params: BacksteppingParams<T>,
}

impl<T: Scalar> BacksteppedDesign<T> {
    pub fn new(
        smoothed: SmoothedDesign<T>,
        jacobians: FeedbackJacobians<T>,
        params: BacksteppingParams<T>,
    ) -> Result<Self> {
        params.validate(
            smoothed.quad.delta(),
            smoothed.params.gamma_s,
            smoothed.feedback.c_kappa(),
        )?;
        Ok(Self {
            smoothed,
            jacobians,
            params,
        })
    }

    pub fn dim_x(&self) -> usize {
        self.smoothed.dim_x()
    }

    pub fn dim_s(&self) -> usize {
        self.smoothed.dim_s()
    }

    pub fn dim_u(&self) -> usize {
        self.smoothed.plant.dim_u
    }

    pub fn kappa_bar(&self, x: &[T], eta: &[T]) -> Vec<T> {
        self.smoothed.kappa_bar(x, eta)
    }

    /// `D_x ς + Σ_i η_i D_x Υ_i`
    pub fn d_x_kappa_bar(&self, x: &[T], eta: &[T]) -> Mat<T> {
        let mut jac = (self.jacobians.d_varsigma_dx)(x);
        for (d_ups, &e) in (self.jacobians.d_upsilon_dx)(x).iter().zip(eta) {
            jac = jac.add(&d_ups.scaled(e));
        }
        jac
    }

    /// `Υ κ_s + D_x κ̄ (f + g u)`, the time derivative of `κ̄` along the flow.
    pub fn d_t_kappa_bar(&self, x: &[T], eta: &[T], u: &[T], theta: &[T]) -> Vec<T> {
        let kappa_s = self.smoothed.kappa_s(x, eta, theta);
        let xdot = self.smoothed.plant.dynamics(x, u);
        add(
            &self.smoothed.feedback.upsilon(x).mul_vec(&kappa_s),
            &self.d_x_kappa_bar(x, eta).mul_vec(&xdot),
        )
    }

    /// `V_s + (γ_b/2)‖u − κ̄‖²`
    pub fn v_b(&self, x: &[T], eta: &[T], u: &[T], theta: &[T]) -> T {
        let e = norm(&sub(u, &self.kappa_bar(x, eta)));
        self.smoothed.v_s(x, eta, theta) + self.params.gamma_b / T::lit(2.0) * e * e
    }

    /// `(∇_x V_b, ∇_η V_b, ∇_u V_b, ∇_θ V_b)`
    pub fn grad_v_b(&self, x: &[T], eta: &[T], u: &[T], theta: &[T]) -> [Vec<T>; 4] {
        let g = self.params.gamma_b;
        let e = sub(u, &self.kappa_bar(x, eta));
        let (gx, ge, gt) = self.smoothed.grad_v_s(x, eta, theta);
        let dx = self.d_x_kappa_bar(x, eta).tr_mul_vec(&e);
        let de = self.smoothed.feedback.upsilon(x).tr_mul_vec(&e);
        let gx = gx.iter().zip(&dx).map(|(&a, &b)| a - g * b).collect();
        let ge = ge.iter().zip(&de).map(|(&a, &b)| a - g * b).collect();
        let gu = e.iter().map(|&v| g * v).collect();
        [gx, ge, gu, gt]
    }

    /// `−k_b(u − κ̄) + D_t κ̄ − (1/γ_b) gᵀ ∇_x V`
    pub fn kappa_b(&self, x: &[T], eta: &[T], u: &[T], theta: &[T]) -> Vec<T> {
        let e = sub(u, &self.kappa_bar(x, eta));
        let dtk = self.d_t_kappa_bar(x, eta, u, theta);
        let (gx, _) = self.smoothed.quad.grad_v(x, theta);
        let coupling = (self.smoothed.plant.g)(x).tr_mul_vec(&gx);
        let inv = T::one() / self.params.gamma_b;
        e.iter()
            .zip(&dtk)
            .zip(&coupling)
            .map(|((&e, &d), &c)| -self.params.k_b * e + d - inv * c)
            .collect()
    }

    /// `⟨∇V_b, (f + g u, κ_s, κ_b, ϖ)⟩`
    pub fn v_b_derivative(&self, x: &[T], eta: &[T], u: &[T], theta: &[T]) -> T {
        let [gx, ge, gu, gt] = self.grad_v_b(x, eta, u, theta);
        dot(&gx, &self.smoothed.plant.dynamics(x, u))
            + dot(&ge, &self.smoothed.kappa_s(x, eta, theta))
            + dot(&gu, &self.kappa_b(x, eta, u, theta))
            + dot(&gt, &self.smoothed.quad.varpi(x, theta))
    }

    /// Plant on `[x | η | u]` with input `(η̇, u̇)`: drift `(f + g u, 0, 0)`.
    pub fn backstepped_plant(&self) -> AffinePlant<T> {
        let (n, s, m) = (self.dim_x(), self.dim_s(), self.dim_u());
        let plant = self.smoothed.plant.clone();
        let f = Arc::new(move |xb: &[T]| {
            let mut out = plant.dynamics(&xb[..n], &xb[n + s..]);
            out.extend(std::iter::repeat_n(T::zero(), s + m));
            out
        });
        let g = Arc::new(move |_: &[T]| {
            let mut mat = Mat::zeros(n + s + m, s + m);
            for i in 0..s + m {
                mat.set(n + i, i, T::one());
            }
            mat
        });
        let mut out = AffinePlant::new(n + s + m, s + m, f, g);
        if let Some(ind) = self.smoothed.plant.safety_indicator.clone() {
            out = out.with_safety_indicator(Arc::new(move |xb: &[T]| ind(&xb[..n])));
        }
        out
    }

    /// `(V_b, ∇V_b, (κ_s, κ_b), ϖ, Θ, δ_b)` over `[x | η | u]`.
    pub fn backstepped_quadruple(&self) -> Result<SynergisticQuadruple<T>> {
        let (n, s, m) = (self.dim_x(), self.dim_s(), self.dim_u());
        let split = move |xb: &[T]| -> (Vec<T>, Vec<T>, Vec<T>) {
            (xb[..n].to_vec(), xb[n..n + s].to_vec(), xb[n + s..].to_vec())
        };
        let d = self.clone();
        let v = Arc::new(move |xb: &[T], th: &[T]| {
            let (x, eta, u) = split(xb);
            d.v_b(&x, &eta, &u, th)
        });
        let d = self.clone();
        let grad_v = Arc::new(move |xb: &[T], th: &[T]| {
            let (x, eta, u) = split(xb);
            let [mut gx, ge, gu, gt] = d.grad_v_b(&x, &eta, &u, th);
            gx.extend(ge);
            gx.extend(gu);
            (gx, gt)
        });
        let d = self.clone();
        let kappa = Arc::new(move |xb: &[T], th: &[T]| {
            let (x, eta, u) = split(xb);
            let mut out = d.smoothed.kappa_s(&x, &eta, th);
            out.extend(d.kappa_b(&x, &eta, &u, th));
            out
        });
        let d = self.clone();
        let varpi = Arc::new(move |xb: &[T], th: &[T]| d.smoothed.quad.varpi(&xb[..n], th));
        let q = &self.smoothed.quad;
        SynergisticQuadruple::new(QuadrupleParts {
            dim_x: n + s + m,
            dim_theta: q.dim_theta(),
            dim_u: s + m,
            v,
            grad_v,
            kappa,
            varpi,
            theta_set: q.theta_set().to_vec(),
            delta: self.params.delta_b,
        })
        .map(|bq| bq.with_tie_tol(q.tie_tol()))
    }
}

/// Validates the gains and returns the plant on `[x | η | u]` with the
/// backstepped quadruple, ready for [`crate::synergy::assemble_closed_loop`].
pub fn backstepped_quadruple<T: Scalar>(
    smoothed: &SmoothedDesign<T>,
    jacobians: &FeedbackJacobians<T>,
    params: BacksteppingParams<T>,
) -> Result<(AffinePlant<T>, SynergisticQuadruple<T>)> {
    let design = BacksteppedDesign::new(smoothed.clone(), jacobians.clone(), params)?;
    Ok((design.backstepped_plant(), design.backstepped_quadruple()?))
}

/// Packs `(x, η, u, θ)` after checking the pieces against the design.
pub fn pack_state<T: Scalar>(
    design: &BacksteppedDesign<T>,
    state: &BackstepState<T>,
) -> Result<Vec<T>> {
    let checks = [
        ("backstepped x", design.dim_x(), state.x.len()),
        ("backstepped eta", design.dim_s(), state.eta.len()),
        ("backstepped u", design.dim_u(), state.u.len()),
        ("backstepped theta", design.smoothed.quad.dim_theta(), state.theta.len()),
    ];
    for (what, expected, actual) in checks {
        if expected != actual {
            return Err(Error::DimensionMismatch {
                what,
                expected,
                actual,
            });
        }
    }
    Ok(state.pack())
}

/// Scalar demonstration plant `ẋ = u` used to exercise the construction.
pub mod toy {
    use super::*;
    use crate::smoothing::{DecompositionParts, SmoothedParams};

    /// `V = x²/2 + θ²/2`, `κ = −x(1 + θ²)` split as `ς = −x`, `Υ = −x`,
    /// `σ = θ²`, with `ϖ = −θ`, `Θ = {0}` and `δ = 1/2`.
    pub fn scalar_design<T: Scalar>(
        smoothing: SmoothedParams<T>,
        backstepping: BacksteppingParams<T>,
    ) -> Result<BacksteppedDesign<T>> {
        let half = T::lit(0.5);
        let plant = AffinePlant::new(
            1,
            1,
            Arc::new(|_: &[T]| vec![T::zero()]),
            Arc::new(|_: &[T]| Mat::identity(1)),
        );
        let quad = SynergisticQuadruple::new(QuadrupleParts {
            dim_x: 1,
            dim_theta: 1,
            dim_u: 1,
            v: Arc::new(move |x: &[T], th: &[T]| half * (x[0] * x[0] + th[0] * th[0])),
            grad_v: Arc::new(|x: &[T], th: &[T]| (vec![x[0]], vec![th[0]])),
            kappa: Arc::new(|x: &[T], th: &[T]| vec![-x[0] * (T::one() + th[0] * th[0])]),
            varpi: Arc::new(|_: &[T], th: &[T]| vec![-th[0]]),
            theta_set: vec![vec![T::zero()]],
            delta: half,
        })?;
        // the only state where V stops decreasing is the origin, so c_κ = 0
        let feedback = DecomposedFeedback::new(DecompositionParts {
            dim_x: 1,
            dim_theta: 1,
            dim_u: 1,
            dim_s: 1,
            sigma: Arc::new(|_: &[T], th: &[T]| vec![th[0] * th[0]]),
            varsigma: Arc::new(|x: &[T]| vec![-x[0]]),
            upsilon: Arc::new(|x: &[T]| Mat::from_rows(&[&[-x[0]]])),
            d_sigma_dx: Some(Arc::new(|_: &[T], _: &[T]| Mat::zeros(1, 1))),
            d_sigma_dtheta: Some(Arc::new(|_: &[T], th: &[T]| {
                Mat::from_rows(&[&[T::lit(2.0) * th[0]]])
            })),
            c_kappa: T::zero(),
        })?;
        let jacobians = FeedbackJacobians {
            d_varsigma_dx: Arc::new(|_: &[T]| Mat::from_rows(&[&[-T::one()]])),
            d_upsilon_dx: Arc::new(|_: &[T]| vec![Mat::from_rows(&[&[-T::one()]])]),
        };
        let smoothed = SmoothedDesign::new(plant, quad, feedback, smoothing)?;
        BacksteppedDesign::new(smoothed, jacobians, backstepping)
    }

    /// Repo-default gains for [`scalar_design`].
    pub fn default_gains<T: Scalar>() -> (SmoothedParams<T>, BacksteppingParams<T>) {
        (
            SmoothedParams {
                gamma_s: T::lit(0.5),
                k_eta: T::lit(2.0),
                delta_s: T::lit(0.4),
            },
            BacksteppingParams {
                gamma_b: T::lit(DEFAULT_GAMMA_B),
                k_b: T::lit(DEFAULT_K_B),
                delta_b: T::lit(0.4),
            },
        )
    }
}
