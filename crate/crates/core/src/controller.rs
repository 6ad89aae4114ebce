//! Certainty-equivalent tracking controller and reference generators.
//!
//! The tracking law imposes `ë₁ + α₂ė₁ + α₁e₁ = 0` on the position error
//! `e₁ = x₁ − r`, with the friction cancelled by the observer's estimates.
//! Laws that need ground truth live in [`diagnostics`].

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Result};
use crate::observer::ObserverOutput;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl ControllerGains {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        let g = Self { alpha1, alpha2 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("alpha1", self.alpha1)?;
        require_positive("alpha2", self.alpha2)
    }

    /// Roots of `s² + α₂s + α₁` as `(re, im)` pairs.
    pub fn poles(&self) -> [(f64, f64); 2] {
        let disc = self.alpha2 * self.alpha2 - 4.0 * self.alpha1;
        if disc >= 0.0 {
            // avoid cancellation in the small root
            let q = -0.5 * (self.alpha2 + disc.sqrt());
            [(q, 0.0), (self.alpha1 / q, 0.0)]
        } else {
            let im = 0.5 * (-disc).sqrt();
            [(-0.5 * self.alpha2, im), (-0.5 * self.alpha2, -im)]
        }
    }
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            alpha1: 100.0,
            alpha2: 100.0,
        }
    }
}

/// Reference position with its first two time derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReferenceSample {
    pub r: f64,
    pub dr: f64,
    pub ddr: f64,
}

/// Default length of the smoothing window at step/ramp breakpoints (s).
pub const DEFAULT_BLEND: f64 = 0.1;

fn default_chirp_rate() -> f64 {
    0.01
}

fn default_one() -> f64 {
    1.0
}

fn default_blend() -> f64 {
    DEFAULT_BLEND
}

/// Reference trajectory family, tagged by `kind` in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceGenerator {
    Constant {
        #[serde(default)]
        value: f64,
    },
    /// `offset + amplitude·sin(omega·t + phase)`.
    Sinusoid {
        #[serde(default = "default_one")]
        amplitude: f64,
        #[serde(default = "default_one")]
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude·cos(rate·t²)`: a cosine whose frequency `rate·t` grows linearly.
    Chirp {
        #[serde(default = "default_one")]
        amplitude: f64,
        #[serde(default = "default_chirp_rate")]
        rate: f64,
    },
    /// A step of `step_height` at `step_time` followed by a ramp of
    /// `ramp_slope` from `ramp_start`. Each corner is smoothed over
    /// `[breakpoint, breakpoint + blend]` by a quintic, so `r̈` exists everywhere.
    StepPlusRamp {
        #[serde(default)]
        step_time: f64,
        #[serde(default = "default_one")]
        step_height: f64,
        ramp_start: f64,
        ramp_slope: f64,
        #[serde(default = "default_blend")]
        blend: f64,
    },
}

impl Default for ReferenceGenerator {
    fn default() -> Self {
        ReferenceGenerator::Constant { value: 0.0 }
    }
}

/// Quintic smoothstep `10τ³ − 15τ⁴ + 6τ⁵` and its first two derivatives;
/// first and second derivatives vanish at both ends.
#[inline]
fn smoothstep(tau: f64) -> (f64, f64, f64) {
    if tau <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if tau >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let t2 = tau * tau;
        let s = t2 * tau * (10.0 - 15.0 * tau + 6.0 * t2);
        let ds = 30.0 * t2 * (1.0 - tau) * (1.0 - tau);
        let dds = 60.0 * tau * (1.0 - tau) * (1.0 - 2.0 * tau);
        (s, ds, dds)
    }
}

/// Antiderivative of [`smoothstep`] from 0: `2.5τ⁴ − 3τ⁵ + τ⁶`, linear past 1.
#[inline]
fn smoothstep_integral(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else if tau >= 1.0 {
        0.5 + (tau - 1.0)
    } else {
        let t4 = tau * tau * tau * tau;
        t4 * (2.5 - 3.0 * tau + tau * tau)
    }
}

impl ReferenceGenerator {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ReferenceGenerator::Chirp { rate, .. } => require_positive("rate", rate),
            ReferenceGenerator::StepPlusRamp { blend, .. } => require_positive("blend", blend),
            _ => Ok(()),
        }
    }

    pub fn sample(&self, t: f64) -> ReferenceSample {
        match *self {
            ReferenceGenerator::Constant { value } => ReferenceSample {
                r: value,
                dr: 0.0,
                ddr: 0.0,
            },
            ReferenceGenerator::Sinusoid {
                amplitude,
                omega,
                phase,
                offset,
            } => {
                let (s, c) = (omega * t + phase).sin_cos();
                ReferenceSample {
                    r: offset + amplitude * s,
                    dr: amplitude * omega * c,
                    ddr: -amplitude * omega * omega * s,
                }
            }
            ReferenceGenerator::Chirp { amplitude, rate } => {
                let (s, c) = (rate * t * t).sin_cos();
                ReferenceSample {
                    r: amplitude * c,
                    dr: -2.0 * rate * t * amplitude * s,
                    ddr: -amplitude * (2.0 * rate * s + 4.0 * rate * rate * t * t * c),
                }
            }
            ReferenceGenerator::StepPlusRamp {
                step_time,
                step_height,
                ramp_start,
                ramp_slope,
                blend,
            } => {
                let (s, ds, dds) = smoothstep((t - step_time) / blend);
                let tau = (t - ramp_start) / blend;
                // the ramp is the integral of a smoothstep in velocity
                let (v, dv, _) = smoothstep(tau);
                ReferenceSample {
                    r: step_height * s + ramp_slope * blend * smoothstep_integral(tau),
                    dr: step_height * ds / blend + ramp_slope * v,
                    ddr: step_height * dds / (blend * blend) + ramp_slope * dv / blend,
                }
            }
        }
    }
}

/// Certainty-equivalent tracking law
/// `u = θ̂₁x̂₂ + θ̂₂tanh(ϑx̂₂) + r̈ − α₁(x₁ − r) − α₂(x̂₂ − ṙ)`.
#[inline]
pub fn control(
    out: &ObserverOutput,
    x1: f64,
    reference: &ReferenceSample,
    g: &ControllerGains,
    vartheta: f64,
) -> f64 {
    out.theta1hat * out.x2hat + out.theta2hat * (vartheta * out.x2hat).tanh() + reference.ddr
        - g.alpha1 * (x1 - reference.r)
        - g.alpha2 * (out.x2hat - reference.dr)
}

/// Quantities that require ground truth. Never feed these back into a loop.
pub mod diagnostics {
    use super::{ControllerGains, ReferenceSample};
    use crate::models::{FrictionParams, MechState};
    use crate::observer::ErrorVector;

    /// The tracking law evaluated on the true velocity and friction.
    #[inline]
    pub fn ideal_control(
        x: &MechState,
        p: &FrictionParams,
        reference: &ReferenceSample,
        g: &ControllerGains,
    ) -> f64 {
        p.force(x.x2) + reference.ddr
            - g.alpha1 * (x.x1 - reference.r)
            - g.alpha2 * (x.x2 - reference.dr)
    }

    /// Deviation of the certainty-equivalent law from [`ideal_control`].
    ///
    /// The velocity-gain term enters with a negative sign: the implemented
    /// law feeds back `−α₂x̂₂`, so substituting `x̂₂ = x₂ + x̃₂` contributes
    /// `−α₂x̃₂`, which keeps `u − u* − ε_t` identically zero.
    #[inline]
    pub fn epsilon_t(x2: f64, e: &ErrorVector, p: &FrictionParams, alpha2: f64) -> f64 {
        let x2hat = x2 + e.x2tilde;
        let th = (p.vartheta * x2hat).tanh();
        p.theta1 * e.x2tilde
            + e.theta1tilde * x2hat
            + e.theta2tilde * th
            + p.theta2 * (th - (p.vartheta * x2).tanh())
            - alpha2 * e.x2tilde
    }
}
