//! Immersion-and-invariance adaptive velocity observer.
//!
//! Each estimate is an integral state plus an algebraic term:
//!
//! ```text
//! x̂₂ = x₂I + k₁·x₁
//! θ̂₁ = θ₁I − (ϑ / 2k₁)·x̂₂²
//! θ̂₂ = θ₂I − (1 / k₁)·log cosh(ϑ·x̂₂)
//! ```
//!
//! The algebraic terms are chosen so that, along solutions of the matched
//! plant, `H = ½(ϑ·x̃₂² + θ̃₁² + θ̃₂²)` is nonincreasing. Only `x₁` and `u`
//! enter the observer; ground truth is used solely by the diagnostics
//! ([`ErrorVector`], [`lyapunov_h`], [`lyapunov_u`]).

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::models::{FrictionParams, HydroParams};

/// Relative margin added to [`k1_min`] so the certified inequality is strict.
pub const K1_MIN_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    pub k1: f64,
    /// Assumed-known tanh sharpness.
    pub vartheta: f64,
}

impl ObserverGains {
    pub fn new(k1: f64, vartheta: f64) -> Result<Self> {
        require_positive("k1", k1)?;
        require_positive("vartheta", vartheta)?;
        Ok(Self { k1, vartheta })
    }
}

/// Integral states. `x3hat` is present only for the hydro-mechanical variant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObserverState {
    pub x2i: f64,
    pub theta1i: f64,
    pub theta2i: f64,
    pub x3hat: Option<f64>,
}

impl ObserverState {
    pub fn hydro() -> Self {
        Self {
            x3hat: Some(0.0),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObserverOutput {
    pub x2hat: f64,
    pub theta1hat: f64,
    pub theta2hat: f64,
    /// `k₁`, a lower bound on the velocity-error decay rate `k₁ + θ₁`.
    pub gamma1_lower: f64,
}

/// Estimation errors `x̂ − x`, `θ̂ − θ`. Diagnostics only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorVector {
    pub x2tilde: f64,
    pub theta1tilde: f64,
    pub theta2tilde: f64,
    pub x3tilde: Option<f64>,
}

impl ErrorVector {
    /// Errors of `out` against the true velocity and the nominal friction
    /// pair. For LuGre plants pass `(σ₂, F_C)` as the nominal pair.
    pub fn from_truth(out: &ObserverOutput, x2: f64, truth: &FrictionParams) -> Self {
        Self {
            x2tilde: out.x2hat - x2,
            theta1tilde: out.theta1hat - truth.theta1,
            theta2tilde: out.theta2hat - truth.theta2,
            x3tilde: None,
        }
    }

    pub fn with_x3tilde(mut self, x3tilde: f64) -> Self {
        self.x3tilde = Some(x3tilde);
        self
    }
}

/// `log(cosh(y))` without overflow: `|y| + log((1 + e^{−2|y|}) / 2)`.
#[inline]
pub fn log_cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[inline]
pub fn observer_output(os: &ObserverState, x1: f64, g: &ObserverGains) -> ObserverOutput {
    let x2hat = os.x2i + g.k1 * x1;
    ObserverOutput {
        x2hat,
        theta1hat: os.theta1i - g.vartheta / (2.0 * g.k1) * x2hat * x2hat,
        theta2hat: os.theta2i - log_cosh(g.vartheta * x2hat) / g.k1,
        gamma1_lower: g.k1,
    }
}

/// Shared tail of both observer variants: given `ẋ₂I`, the θ-integrator rates.
#[inline]
fn parameter_rates(out: &ObserverOutput, dx2i: f64, g: &ObserverGains) -> (f64, f64) {
    let drive = (g.vartheta / g.k1) * (dx2i + g.k1 * out.x2hat);
    let t = (g.vartheta * out.x2hat).tanh();
    (out.x2hat * drive, t * drive)
}

/// Time derivative of the integral states for the mechanical plant.
///
/// `x3hat` of the returned derivative is always `None`.
#[inline]
pub fn observer_rhs(os: &ObserverState, x1: f64, u: f64, g: &ObserverGains) -> ObserverState {
    let out = observer_output(os, x1, g);
    let t = (g.vartheta * out.x2hat).tanh();
    let dx2i = -(out.theta1hat + g.k1) * out.x2hat - out.theta2hat * t + u;
    let (dtheta1i, dtheta2i) = parameter_rates(&out, dx2i, g);
    ObserverState {
        x2i: dx2i,
        theta1i: dtheta1i,
        theta2i: dtheta2i,
        x3hat: None,
    }
}

/// Time derivative for the hydro-mechanical variant, which also integrates
/// a copy of the pressure channel.
#[inline]
pub fn hydro_observer_rhs(
    os: &ObserverState,
    x1: f64,
    u: f64,
    g: &ObserverGains,
    p: &HydroParams,
) -> Result<ObserverState> {
    let x3hat = os
        .x3hat
        .ok_or_else(|| Error::Config("hydro observer requires the x3hat state".into()))?;
    let out = observer_output(os, x1, g);
    let t = (g.vartheta * out.x2hat).tanh();
    let dx2i = p.a1 * x3hat - (out.theta1hat + g.k1) * out.x2hat - out.theta2hat * t;
    let (dtheta1i, dtheta2i) = parameter_rates(&out, dx2i, g);
    Ok(ObserverState {
        x2i: dx2i,
        theta1i: dtheta1i,
        theta2i: dtheta2i,
        x3hat: Some(-p.a2 * out.x2hat - p.a3 * x3hat + u),
    })
}

/// `H = ½(ϑ·x̃₂² + θ̃₁² + θ̃₂²)`.
#[inline]
pub fn lyapunov_h(e: &ErrorVector, vartheta: f64) -> f64 {
    0.5 * (vartheta * e.x2tilde * e.x2tilde
        + e.theta1tilde * e.theta1tilde
        + e.theta2tilde * e.theta2tilde)
}

/// `U = H + ½·α₁·x̃₃²` for the hydro variant.
pub fn lyapunov_u(e: &ErrorVector, vartheta: f64, alpha1_lyap: f64) -> Result<f64> {
    let x3 = e
        .x3tilde
        .ok_or_else(|| Error::Config("lyapunov_u requires x3tilde".into()))?;
    Ok(lyapunov_h(e, vartheta) + 0.5 * alpha1_lyap * x3 * x3)
}

/// Decay coefficient on `x̃₂²` in the hydro Lyapunov bound:
/// `ϑ(k₁+θ₁) + θ₂ϑ² − θ₂²ϑ²/2 − α₁²a₂²/2`.
pub fn hydro_alpha2(k1: f64, theta1: f64, theta2: f64, vartheta: f64, a2: f64, alpha1_lyap: f64) -> f64 {
    let v2 = vartheta * vartheta;
    vartheta * (k1 + theta1) + theta2 * v2 - 0.5 * theta2 * theta2 * v2
        - 0.5 * alpha1_lyap * alpha1_lyap * a2 * a2
}

fn check_alpha1(p: &HydroParams, alpha1_lyap: f64) -> Result<()> {
    if !(alpha1_lyap.is_finite() && alpha1_lyap * p.a1 > 1.0) {
        return Err(Error::CertificateInfeasible(format!(
            "alpha1_lyap = {alpha1_lyap} must exceed 1/a1 = {}",
            1.0 / p.a1
        )));
    }
    Ok(())
}

/// Smallest `k₁` (plus [`K1_MIN_MARGIN`]) making [`hydro_alpha2`] positive
/// for every `θ₁ ≥ 0` and every `θ₂ ∈ (0, theta2_upper]`.
///
/// `θ₁` is unknown so its helpful `ϑθ₁` term is dropped. The penalty
/// `ϑ²(θ₂²/2 − θ₂)` is convex in `θ₂`, so its supremum on the interval sits
/// at an endpoint: `theta2_upper` when that exceeds 2, otherwise the `θ₂ → 0`
/// limit where it vanishes.
pub fn k1_min(theta2_upper: f64, vartheta: f64, p: &HydroParams, alpha1_lyap: f64) -> Result<f64> {
    require_positive("theta2_upper", theta2_upper)?;
    require_positive("vartheta", vartheta)?;
    check_alpha1(p, alpha1_lyap)?;
    let v2 = vartheta * vartheta;
    let friction_penalty =
        (0.5 * theta2_upper * theta2_upper * v2 - theta2_upper * v2).max(0.0);
    let coupling = 0.5 * alpha1_lyap * alpha1_lyap * p.a2 * p.a2;
    Ok((friction_penalty + coupling) / vartheta * (1.0 + K1_MIN_MARGIN))
}

/// Lyapunov certificate for the hydro variant at a chosen `k₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroGainCertificate {
    /// Weight on `x̃₃²` in `U`.
    pub alpha1_lyap: f64,
    /// Worst case of [`hydro_alpha2`] over `θ₁ ≥ 0`, `θ₂ ∈ (0, θ̄₂]` at the chosen `k₁`.
    pub alpha2_lyap: f64,
    /// `α₁·a₁ − 1`.
    pub alpha3_lyap: f64,
    pub k1_min: f64,
}

impl HydroGainCertificate {
    pub fn new(
        k1: f64,
        theta2_upper: f64,
        vartheta: f64,
        p: &HydroParams,
        alpha1_lyap: f64,
    ) -> Result<Self> {
        let k1_min = k1_min(theta2_upper, vartheta, p, alpha1_lyap)?;
        // worst case sits at θ₁ = 0 and an endpoint of (0, θ̄₂]
        let at_upper = hydro_alpha2(k1, 0.0, theta2_upper, vartheta, p.a2, alpha1_lyap);
        let at_zero = hydro_alpha2(k1, 0.0, 0.0, vartheta, p.a2, alpha1_lyap);
        Ok(Self {
            alpha1_lyap,
            alpha2_lyap: at_upper.min(at_zero),
            alpha3_lyap: alpha1_lyap * p.a1 - 1.0,
            k1_min,
        })
    }

    pub fn certifies(&self) -> bool {
        self.alpha2_lyap > 0.0 && self.alpha3_lyap > 0.0
    }
}
