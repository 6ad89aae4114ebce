//! Plant models and their vector fields.
//!
//! Three plants are provided:
//!
//! - [`mech_rhs`]: a mass driven by `u` against viscous plus tanh-smoothed
//!   Coulomb friction,
//! - [`hydro_rhs`]: the same mechanical stage driven through a first-order
//!   pressure channel,
//! - [`lugre_rhs`]: a mass with LuGre dynamic friction (bristle state `z`).
//!
//! Inertia is lumped into `u` and the friction coefficients, so every
//! parameter is an acceleration-scale quantity. Units are SI by convention.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Viscous plus smoothed Coulomb friction, `θ₁·x₂ + θ₂·tanh(ϑ·x₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionParams {
    /// Viscous coefficient (1/s).
    pub theta1: f64,
    /// Coulomb level (m/s²).
    pub theta2: f64,
    /// Sharpness of the tanh relay approximation (s/m).
    pub vartheta: f64,
}

impl FrictionParams {
    pub fn new(theta1: f64, theta2: f64, vartheta: f64) -> Result<Self> {
        let p = Self {
            theta1,
            theta2,
            vartheta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("theta1", self.theta1)?;
        require_positive("theta2", self.theta2)?;
        require_positive("vartheta", self.vartheta)
    }

    /// Friction acceleration opposing motion at velocity `x2`.
    #[inline]
    pub fn force(&self, x2: f64) -> f64 {
        self.theta1 * x2 + self.theta2 * (self.vartheta * x2).tanh()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MechState {
    pub x1: f64,
    pub x2: f64,
}

#[inline]
pub fn mech_rhs(s: MechState, p: &FrictionParams, u: f64) -> MechState {
    MechState {
        x1: s.x2,
        x2: -p.force(s.x2) + u,
    }
}

/// Hydro-mechanical plant: `a1` couples pressure into acceleration, `a2`
/// and `a3` shape the pressure channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub friction: FrictionParams,
}

impl HydroParams {
    pub fn new(a1: f64, a2: f64, a3: f64, friction: FrictionParams) -> Result<Self> {
        let p = Self {
            a1,
            a2,
            a3,
            friction,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("a1", self.a1)?;
        require_positive("a2", self.a2)?;
        require_positive("a3", self.a3)?;
        self.friction.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HydroState {
    pub x1: f64,
    pub x2: f64,
    /// Differential load pressure (normalized).
    pub x3: f64,
}

#[inline]
pub fn hydro_rhs(s: HydroState, p: &HydroParams, u: f64) -> HydroState {
    HydroState {
        x1: s.x2,
        x2: -p.friction.force(s.x2) + p.a1 * s.x3,
        x3: -p.a2 * s.x2 - p.a3 * s.x3 + u,
    }
}

/// LuGre friction coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LuGreParams {
    /// Bristle stiffness.
    pub sigma0: f64,
    /// Bristle damping.
    pub sigma1: f64,
    /// Viscous coefficient.
    pub sigma2: f64,
    /// Coulomb level.
    pub fc: f64,
    /// Static level.
    pub fs: f64,
    /// Stribeck velocity.
    pub vs: f64,
}

impl LuGreParams {
    pub fn new(sigma0: f64, sigma1: f64, sigma2: f64, fc: f64, fs: f64, vs: f64) -> Result<Self> {
        let p = Self {
            sigma0,
            sigma1,
            sigma2,
            fc,
            fs,
            vs,
        };
        p.validate()?;
        Ok(p)
    }

    /// Coefficients of the classic LuGre servo benchmark
    /// (σ₀=10⁵, σ₁=√10⁵, σ₂=0.4, F_C=1, F_S=1.5, v_S=10⁻³).
    pub fn benchmark() -> Self {
        Self {
            sigma0: 1e5,
            sigma1: 1e5_f64.sqrt(),
            sigma2: 0.4,
            fc: 1.0,
            fs: 1.5,
            vs: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("sigma0", self.sigma0)?;
        require_positive("sigma1", self.sigma1)?;
        require_positive("sigma2", self.sigma2)?;
        require_positive("fc", self.fc)?;
        require_positive("fs", self.fs)?;
        require_positive("vs", self.vs)?;
        if self.fs < self.fc {
            return Err(Error::param(
                "fs",
                format!("static level {} must be >= Coulomb level {}", self.fs, self.fc),
            ));
        }
        Ok(())
    }

    /// Stribeck curve `g(v) = F_C + (F_S − F_C)·exp(−(v/v_S)²)`, in `[F_C, F_S]`.
    #[inline]
    pub fn stribeck(&self, v: f64) -> f64 {
        let r = v / self.vs;
        self.fc + (self.fs - self.fc) * (-r * r).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LuGreState {
    pub x1: f64,
    pub x2: f64,
    /// Bristle deflection (m).
    pub z: f64,
}

#[inline]
pub fn lugre_rhs(s: LuGreState, p: &LuGreParams, u: f64) -> LuGreState {
    let dz = s.x2 - p.sigma0 * s.x2.abs() * s.z / p.stribeck(s.x2);
    LuGreState {
        x1: s.x2,
        x2: -p.sigma2 * s.x2 - p.sigma1 * dz - p.sigma0 * s.z + u,
        z: dz,
    }
}

/// Plant selection with its coefficients, tagged by `kind` in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantParams {
    Mech {
        theta1: f64,
        theta2: f64,
        vartheta: f64,
    },
    Hydro {
        a1: f64,
        a2: f64,
        a3: f64,
        theta1: f64,
        theta2: f64,
        vartheta: f64,
    },
    Lugre {
        sigma0: f64,
        sigma1: f64,
        sigma2: f64,
        fc: f64,
        fs: f64,
        vs: f64,
    },
}

/// Discriminant of [`PlantParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Mech,
    Hydro,
    Lugre,
}

impl PlantKind {
    /// Number of plant state components.
    pub fn dim(self) -> usize {
        match self {
            PlantKind::Mech => 2,
            PlantKind::Hydro | PlantKind::Lugre => 3,
        }
    }

    /// Default fixed step; also the documented stability ceiling.
    pub fn default_dt(self) -> f64 {
        match self {
            PlantKind::Mech | PlantKind::Hydro => 1e-4,
            PlantKind::Lugre => 1e-5,
        }
    }

    /// Name of the third plant state column, if any.
    pub fn third_state_name(self) -> Option<&'static str> {
        match self {
            PlantKind::Mech => None,
            PlantKind::Hydro => Some("x3"),
            PlantKind::Lugre => Some("z"),
        }
    }
}

impl PlantParams {
    pub fn mech(p: FrictionParams) -> Self {
        PlantParams::Mech {
            theta1: p.theta1,
            theta2: p.theta2,
            vartheta: p.vartheta,
        }
    }

    pub fn hydro(p: HydroParams) -> Self {
        PlantParams::Hydro {
            a1: p.a1,
            a2: p.a2,
            a3: p.a3,
            theta1: p.friction.theta1,
            theta2: p.friction.theta2,
            vartheta: p.friction.vartheta,
        }
    }

    pub fn lugre(p: LuGreParams) -> Self {
        PlantParams::Lugre {
            sigma0: p.sigma0,
            sigma1: p.sigma1,
            sigma2: p.sigma2,
            fc: p.fc,
            fs: p.fs,
            vs: p.vs,
        }
    }

    pub fn kind(&self) -> PlantKind {
        match self {
            PlantParams::Mech { .. } => PlantKind::Mech,
            PlantParams::Hydro { .. } => PlantKind::Hydro,
            PlantParams::Lugre { .. } => PlantKind::Lugre,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.to_model() {
            PlantModel::Mech(p) => p.validate(),
            PlantModel::Hydro(p) => p.validate(),
            PlantModel::Lugre(p) => p.validate(),
        }
    }

    pub fn to_model(&self) -> PlantModel {
        match *self {
            PlantParams::Mech {
                theta1,
                theta2,
                vartheta,
            } => PlantModel::Mech(FrictionParams {
                theta1,
                theta2,
                vartheta,
            }),
            PlantParams::Hydro {
                a1,
                a2,
                a3,
                theta1,
                theta2,
                vartheta,
            } => PlantModel::Hydro(HydroParams {
                a1,
                a2,
                a3,
                friction: FrictionParams {
                    theta1,
                    theta2,
                    vartheta,
                },
            }),
            PlantParams::Lugre {
                sigma0,
                sigma1,
                sigma2,
                fc,
                fs,
                vs,
            } => PlantModel::Lugre(LuGreParams {
                sigma0,
                sigma1,
                sigma2,
                fc,
                fs,
                vs,
            }),
        }
    }
}

/// Strongly typed plant model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantModel {
    Mech(FrictionParams),
    Hydro(HydroParams),
    Lugre(LuGreParams),
}

impl PlantModel {
    pub fn kind(&self) -> PlantKind {
        match self {
            PlantModel::Mech(_) => PlantKind::Mech,
            PlantModel::Hydro(_) => PlantKind::Hydro,
            PlantModel::Lugre(_) => PlantKind::Lugre,
        }
    }

    /// The (θ₁, θ₂) pair the observer's parameter estimates are compared
    /// against. For LuGre these are σ₂ and F_C.
    pub fn nominal_friction(&self, vartheta: f64) -> FrictionParams {
        match self {
            PlantModel::Mech(p) => *p,
            PlantModel::Hydro(p) => p.friction,
            PlantModel::Lugre(p) => FrictionParams {
                theta1: p.sigma2,
                theta2: p.fc,
                vartheta,
            },
        }
    }

    /// Writes the plant derivative of the packed state `s` into `ds`.
    #[inline]
    pub fn rhs_packed(&self, s: &[f64], u: f64, ds: &mut [f64]) {
        match self {
            PlantModel::Mech(p) => {
                let d = mech_rhs(MechState { x1: s[0], x2: s[1] }, p, u);
                ds[0] = d.x1;
                ds[1] = d.x2;
            }
            PlantModel::Hydro(p) => {
                let d = hydro_rhs(
                    HydroState {
                        x1: s[0],
                        x2: s[1],
                        x3: s[2],
                    },
                    p,
                    u,
                );
                ds[0] = d.x1;
                ds[1] = d.x2;
                ds[2] = d.x3;
            }
            PlantModel::Lugre(p) => {
                let d = lugre_rhs(
                    LuGreState {
                        x1: s[0],
                        x2: s[1],
                        z: s[2],
                    },
                    p,
                    u,
                );
                ds[0] = d.x1;
                ds[1] = d.x2;
                ds[2] = d.z;
            }
        }
    }
}
