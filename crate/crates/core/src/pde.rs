//! PDE problem definitions: residual operators, initial conditions and the
//! composite training loss.
//!
//! Cahn-Hilliard is trained in split form with the network predicting both
//! `u` and the chemical potential `mu = r2 (u^3 - u) - r1 u_xx`, so only
//! second derivatives are needed.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::diffnet::{Channels, DerivativeBundle, DerivativeLabel, DerivativeRequest};
use crate::math;
use crate::{Error, Result};

/// The equation and its physical parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdeKind {
    /// `u_t = (r2 (u^3 - u) - r1 u_xx)_xx`.
    CahnHilliard { r1: f64, r2: f64 },
    /// `u_t + lambda1 u u_x + lambda2 u_xxx = 0`.
    Kdv { lambda1: f64, lambda2: f64 },
    /// `u_t + speed u_x = 0`.
    Advection { speed: f64 },
}

/// Built-in initial conditions `g(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    /// `cos(pi x) - exp(-4 (pi x)^2)`.
    CosineMinusGaussian,
    /// `cos(pi x)`.
    Cosine,
}

impl InitialCondition {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialCondition::CosineMinusGaussian => {
                let px = PI * x;
                math::cos(px) - math::exp(-4.0 * px * px)
            }
            InitialCondition::Cosine => math::cos(PI * x),
        }
    }
}

/// `lambda_ic`, `lambda_res` and the split weights used by coupled problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub ic: f64,
    pub res: f64,
    pub res1: f64,
    pub res2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            ic: 100.0,
            res: 1.0,
            res1: 100.0,
            res2: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeProblem {
    pub name: String,
    pub kind: PdeKind,
    pub x_lo: f64,
    pub x_hi: f64,
    pub horizon: f64,
    pub initial: InitialCondition,
    pub weights: LossWeights,
}

impl PdeProblem {
    /// `r1 = 0.02`, `r2 = 1` on `[-1, 1] x [0, 1]`.
    pub fn cahn_hilliard_case1() -> Self {
        Self {
            name: "cahn_hilliard".into(),
            kind: PdeKind::CahnHilliard { r1: 0.02, r2: 1.0 },
            x_lo: -1.0,
            x_hi: 1.0,
            horizon: 1.0,
            initial: InitialCondition::CosineMinusGaussian,
            weights: LossWeights::default(),
        }
    }

    /// `r1 = 0.01`, `r2 = 1` on `[-1, 1] x [0, 0.25]`.
    pub fn cahn_hilliard_case2() -> Self {
        Self {
            kind: PdeKind::CahnHilliard { r1: 0.01, r2: 1.0 },
            horizon: 0.25,
            ..Self::cahn_hilliard_case1()
        }
    }

    /// `lambda1 = 1`, `lambda2 = 0.0025`, `u0 = cos(pi x)` on `[-1, 1] x [0, 0.8]`.
    pub fn kdv() -> Self {
        Self {
            name: "kdv".into(),
            kind: PdeKind::Kdv {
                lambda1: 1.0,
                lambda2: 0.0025,
            },
            x_lo: -1.0,
            x_hi: 1.0,
            horizon: 0.8,
            initial: InitialCondition::Cosine,
            weights: LossWeights::default(),
        }
    }

    /// Unit-speed transport of `cos(pi x)` on `[-1, 1] x [0, 1]`.
    pub fn advection() -> Self {
        Self {
            name: "advection".into(),
            kind: PdeKind::Advection { speed: 1.0 },
            x_lo: -1.0,
            x_hi: 1.0,
            horizon: 1.0,
            initial: InitialCondition::Cosine,
            weights: LossWeights::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidArgument("time horizon must be positive".into()));
        }
        if !(self.x_lo.is_finite() && self.x_hi.is_finite() && self.x_lo < self.x_hi) {
            return Err(Error::InvalidArgument("spatial domain must satisfy x_lo < x_hi".into()));
        }
        let w = self.weights;
        if [w.ic, w.res, w.res1, w.res2].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("loss weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    /// 1 for scalar residuals, 2 for the split Cahn-Hilliard pair.
    pub fn residual_arity(&self) -> usize {
        match self.kind {
            PdeKind::CahnHilliard { .. } => 2,
            _ => 1,
        }
    }

    /// Network outputs: `u`, plus `mu` for Cahn-Hilliard.
    pub fn output_width(&self) -> usize {
        self.residual_arity()
    }

    pub fn required_derivatives(&self) -> DerivativeRequest {
        use DerivativeLabel::*;
        match self.kind {
            PdeKind::CahnHilliard { .. } => DerivativeRequest::new(&[U, Ut, Uxx, Mu, MuXx]),
            PdeKind::Kdv { .. } => DerivativeRequest::new(&[U, Ut, Ux, Uxxx]),
            PdeKind::Advection { .. } => DerivativeRequest::new(&[Ut, Ux]),
        }
    }

    pub(crate) fn channels(&self) -> Channels {
        self.required_derivatives().channels()
    }

    /// Exact solution when one is known in closed form (advection only).
    pub fn analytic_solution(&self, t: f64, x: f64) -> Option<f64> {
        match self.kind {
            PdeKind::Advection { speed } => {
                let l = self.period();
                let shifted = x - speed * t - self.x_lo;
                let wrapped = shifted - l * math::floor(shifted / l);
                Some(self.initial.eval(self.x_lo + wrapped))
            }
            _ => None,
        }
    }

    /// Weighted composite of `l_ic` and the (causally weighted) residual terms.
    pub fn total_loss(&self, l_ic: f64, residual: ResidualTerms, per_slice_losses: Vec<f64>) -> LossBreakdown {
        let mut b = LossBreakdown {
            l_ic,
            l_res: 0.0,
            l_res1: None,
            l_res2: None,
            total: 0.0,
            per_slice_losses,
        };
        match residual {
            ResidualTerms::Single(l) => b.l_res = l,
            ResidualTerms::Split { l_res1, l_res2 } => {
                b.l_res1 = Some(l_res1);
                b.l_res2 = Some(l_res2);
                b.l_res = self.weights.res1 * l_res1 + self.weights.res2 * l_res2;
            }
        }
        b.total = b.recompute_total(self);
        b
    }
}

/// Residual loss terms passed to [`PdeProblem::total_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualTerms {
    Single(f64),
    Split { l_res1: f64, l_res2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub l_ic: f64,
    /// For split problems this is `lambda_res1 * l_res1 + lambda_res2 * l_res2`.
    pub l_res: f64,
    pub l_res1: Option<f64>,
    pub l_res2: Option<f64>,
    pub total: f64,
    pub per_slice_losses: Vec<f64>,
}

impl LossBreakdown {
    pub fn recompute_total(&self, problem: &PdeProblem) -> f64 {
        let w = problem.weights;
        let res = match (self.l_res1, self.l_res2) {
            (Some(a), Some(b)) => w.res1 * a + w.res2 * b,
            _ => self.l_res,
        };
        w.ic * self.l_ic + w.res * res
    }
}

/// `u_t + lambda1 u u_x + lambda2 u_xxx`.
pub fn residual_kdv(bundle: &DerivativeBundle, lambda1: f64, lambda2: f64) -> Result<f64> {
    use DerivativeLabel::*;
    Ok(kdv_formula(
        bundle.require(U)?,
        bundle.require(Ut)?,
        bundle.require(Ux)?,
        bundle.require(Uxxx)?,
        lambda1,
        lambda2,
    ))
}

/// `(mu - (r2 (u^3 - u) - r1 u_xx), u_t - mu_xx)`.
pub fn residual_cahn_hilliard(bundle: &DerivativeBundle, r1: f64, r2: f64) -> Result<(f64, f64)> {
    use DerivativeLabel::*;
    Ok(cahn_hilliard_formula(
        bundle.require(U)?,
        bundle.require(Ut)?,
        bundle.require(Uxx)?,
        bundle.require(Mu)?,
        bundle.require(MuXx)?,
        r1,
        r2,
    ))
}

/// `u_t + c u_x`.
pub fn residual_advection(bundle: &DerivativeBundle, speed: f64) -> Result<f64> {
    use DerivativeLabel::*;
    Ok(advection_formula(bundle.require(Ut)?, bundle.require(Ux)?, speed))
}

/// Mean squared mismatch between predictions at `t = 0` and `g`.
pub fn initial_condition_loss(predictions: &[f64], xs: &[f64], g: impl Fn(f64) -> f64) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Empty("initial condition points"));
    }
    if predictions.len() != xs.len() {
        return Err(Error::DimensionMismatch {
            context: "initial condition points",
            expected: xs.len(),
            found: predictions.len(),
        });
    }
    let sum: f64 = predictions.iter().zip(xs).map(|(&p, &x)| (p - g(x)) * (p - g(x))).sum();
    Ok(sum / predictions.len() as f64)
}

#[inline]
fn kdv_formula(u: f64, u_t: f64, u_x: f64, u_xxx: f64, lambda1: f64, lambda2: f64) -> f64 {
    u_t + lambda1 * u * u_x + lambda2 * u_xxx
}

#[inline]
fn cahn_hilliard_formula(u: f64, u_t: f64, u_xx: f64, mu: f64, mu_xx: f64, r1: f64, r2: f64) -> (f64, f64) {
    (mu - (r2 * (u * u * u - u) - r1 * u_xx), u_t - mu_xx)
}

#[inline]
fn advection_formula(u_t: f64, u_x: f64, speed: f64) -> f64 {
    u_t + speed * u_x
}

/// Jet values at one point, laid out by what the residuals consume.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct PointJet {
    pub u: f64,
    pub u_t: f64,
    pub u_x: f64,
    pub u_xx: f64,
    pub u_xxx: f64,
    pub mu: f64,
    pub mu_xx: f64,
}

impl PdeKind {
    /// Residual values; the second entry is zero for scalar problems.
    #[inline]
    pub(crate) fn residuals(&self, j: &PointJet) -> [f64; 2] {
        match *self {
            PdeKind::CahnHilliard { r1, r2 } => {
                let (a, b) = cahn_hilliard_formula(j.u, j.u_t, j.u_xx, j.mu, j.mu_xx, r1, r2);
                [a, b]
            }
            PdeKind::Kdv { lambda1, lambda2 } => [kdv_formula(j.u, j.u_t, j.u_x, j.u_xxx, lambda1, lambda2), 0.0],
            PdeKind::Advection { speed } => [advection_formula(j.u_t, j.u_x, speed), 0.0],
        }
    }

    /// Pulls residual adjoints `seed` back to the jet entries.
    #[inline]
    pub(crate) fn residual_adjoint(&self, j: &PointJet, seed: [f64; 2]) -> PointJet {
        let mut g = PointJet::default();
        match *self {
            PdeKind::CahnHilliard { r1, r2 } => {
                g.mu = seed[0];
                g.u = -seed[0] * r2 * (3.0 * j.u * j.u - 1.0);
                g.u_xx = seed[0] * r1;
                g.u_t = seed[1];
                g.mu_xx = -seed[1];
            }
            PdeKind::Kdv { lambda1, lambda2 } => {
                g.u_t = seed[0];
                g.u = seed[0] * lambda1 * j.u_x;
                g.u_x = seed[0] * lambda1 * j.u;
                g.u_xxx = seed[0] * lambda2;
            }
            PdeKind::Advection { speed } => {
                g.u_t = seed[0];
                g.u_x = seed[0] * speed;
            }
        }
        g
    }
}
