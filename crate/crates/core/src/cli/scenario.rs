//! Scenario files: strict JSON describing one run or a sweep over `k1`.
//!
//! ```json
//! {
//!   "name": "chirp",
//!   "plant": {"kind": "lugre", "sigma0": 1e5, "sigma1": 316.2, "sigma2": 0.4,
//!             "fc": 1, "fs": 1.5, "vs": 0.001},
//!   "observer": {"k1": [1, 3, 7], "vartheta": 100},
//!   "controller": {"alpha1": 100, "alpha2": 100},
//!   "reference": {"kind": "chirp", "rate": 0.01},
//!   "init": {"x1": 0.1, "x2": 0.5},
//!   "sim": {"t_end": 100, "dt": 1e-5, "log_every": 100},
//!   "output": {"directory": "out/chirp", "emit_plots": true,
//!              "excitation": {"mode": "pe", "window": 10, "mu": 0.01}}
//! }
//! ```
//!
//! Unknown keys are rejected at every level.

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerGains, ReferenceGenerator};
use crate::engine::{ClosedLoopSystem, InitialState, InputSignal, SimConfig};
use crate::error::{Error, Result};
use crate::models::{PlantKind, PlantModel, PlantParams};
use crate::observer::{k1_min, ObserverGains, ObserverState};

fn default_vartheta() -> f64 {
    100.0
}

fn default_alpha() -> f64 {
    100.0
}

fn default_t_end() -> f64 {
    10.0
}

fn default_log_every() -> usize {
    100
}

fn default_directory() -> String {
    "out".to_string()
}

/// A single gain or a sweep list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum K1Spec {
    Single(f64),
    Sweep(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<K1Spec>,
    /// Use the hydro gain certificate's `k1_min`.
    #[serde(default)]
    pub k1_auto: bool,
    #[serde(default = "default_vartheta")]
    pub vartheta: f64,
    /// Known bound on the Coulomb level (hydro certificate).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2_upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1_lyap: Option<f64>,
    /// Integrate the pressure estimate (required for the hydro plant).
    #[serde(default)]
    pub x3hat: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default = "default_alpha")]
    pub alpha1: f64,
    #[serde(default = "default_alpha")]
    pub alpha2: f64,
    /// Replaces the tracking law with a fixed input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_loop: Option<InputSignal>,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            alpha1: default_alpha(),
            alpha2: default_alpha(),
            open_loop: None,
        }
    }
}

/// Initial conditions. `x3` is the pressure (hydro) or bristle state (LuGre).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(default)]
    pub x1: f64,
    #[serde(default)]
    pub x2: f64,
    #[serde(default)]
    pub x3: f64,
    #[serde(default, rename = "x2I")]
    pub x2i: f64,
    #[serde(default, rename = "theta1I")]
    pub theta1i: f64,
    #[serde(default, rename = "theta2I")]
    pub theta2i: f64,
    #[serde(default)]
    pub x3hat: f64,
    /// Draw every component uniformly from `[low, high]` using `sim.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_box: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// Defaults to the plant's documented step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Metrics window; defaults to the final 20 s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_window: Option<[f64; 2]>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            t_end: default_t_end(),
            dt: None,
            log_every: default_log_every(),
            seed: None,
            metrics_window: None,
        }
    }
}

/// Excitation analysis run on each log after simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExcitationSpec {
    Pe {
        window: f64,
        mu: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stride: Option<f64>,
    },
    /// Back-to-back windows of `width`, separated by `gap`, from `start`.
    Intervals {
        width: f64,
        #[serde(default)]
        start: f64,
        #[serde(default)]
        gap: f64,
    },
    /// Uniform partition with spacing `step` from `start`.
    Conservative {
        step: f64,
        #[serde(default)]
        start: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default)]
    pub emit_plots: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation: Option<ExcitationSpec>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            emit_plots: false,
            excitation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub plant: PlantParams,
    pub observer: ObserverSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub reference: ReferenceGenerator,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// One fully resolved simulation of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub index: usize,
    pub label: String,
    pub k1: f64,
    pub system: ClosedLoopSystem,
    pub config: SimConfig,
    pub init: InitialState,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Scenario {
        path: path.into(),
        message: message.into(),
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(path, format!("must be finite and > 0, got {v}")))
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &[u8]) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_slice(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        invalid(if path.is_empty() { ".".into() } else { path }, e.into_inner().to_string())
    })?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        self.plant.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => invalid(format!("plant.{name}"), reason),
            other => other,
        })?;
        let kind = self.plant.kind();
        let obs = &self.observer;
        positive("observer.vartheta", obs.vartheta)?;

        match (&obs.k1, obs.k1_auto) {
            (Some(_), true) => {
                return Err(invalid("observer.k1", "give either k1 or k1_auto, not both"))
            }
            (None, false) => return Err(invalid("observer.k1", "missing (or set k1_auto)")),
            (Some(K1Spec::Single(k)), false) => positive("observer.k1", *k)?,
            (Some(K1Spec::Sweep(ks)), false) => {
                if ks.is_empty() {
                    return Err(invalid("observer.k1", "sweep list is empty"));
                }
                for (i, k) in ks.iter().enumerate() {
                    positive(&format!("observer.k1[{i}]"), *k)?;
                }
            }
            (None, true) => {
                if kind != PlantKind::Hydro {
                    return Err(invalid("observer.k1_auto", "only available for the hydro plant"));
                }
                match obs.theta2_upper {
                    None => {
                        return Err(invalid(
                            "observer.theta2_upper",
                            "required when k1_auto is true",
                        ))
                    }
                    Some(v) => positive("observer.theta2_upper", v)?,
                }
            }
        }
        if let Some(a) = obs.alpha1_lyap {
            positive("observer.alpha1_lyap", a)?;
        }
        match (kind, obs.x3hat) {
            (PlantKind::Hydro, false) => {
                return Err(invalid("observer.x3hat", "the hydro plant requires x3hat = true"))
            }
            (PlantKind::Mech | PlantKind::Lugre, true) => {
                return Err(invalid("observer.x3hat", "only the hydro plant has a pressure state"))
            }
            _ => {}
        }
        if kind == PlantKind::Hydro && self.controller.open_loop.is_none() {
            return Err(invalid(
                "controller.open_loop",
                "the hydro plant is run open loop; give an input signal",
            ));
        }
        if self.controller.open_loop.is_none() {
            positive("controller.alpha1", self.controller.alpha1)?;
            positive("controller.alpha2", self.controller.alpha2)?;
        }
        self.reference.validate().map_err(|e| match e {
            Error::InvalidParameter { name, reason } => invalid(format!("reference.{name}"), reason),
            other => other,
        })?;

        let sim = &self.sim;
        positive("sim.t_end", sim.t_end)?;
        if let Some(dt) = sim.dt {
            positive("sim.dt", dt)?;
            if sim.t_end < dt {
                return Err(invalid("sim.t_end", "must be >= sim.dt"));
            }
        }
        if sim.log_every == 0 {
            return Err(invalid("sim.log_every", "must be >= 1"));
        }
        if let Some([a, b]) = sim.metrics_window {
            if !(a < b) {
                return Err(invalid("sim.metrics_window", "start must precede end"));
            }
        }
        if let Some([lo, hi]) = self.init.random_box {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(invalid("init.random_box", "need finite low < high"));
            }
            if sim.seed.is_none() {
                return Err(invalid("sim.seed", "required when init.random_box is set"));
            }
        }
        if self.output.directory.is_empty() {
            return Err(invalid("output.directory", "must not be empty"));
        }
        match &self.output.excitation {
            Some(ExcitationSpec::Pe { window, mu, stride }) => {
                positive("output.excitation.window", *window)?;
                positive("output.excitation.mu", *mu)?;
                if let Some(s) = stride {
                    positive("output.excitation.stride", *s)?;
                }
            }
            Some(ExcitationSpec::Intervals { width, gap, .. }) => {
                positive("output.excitation.width", *width)?;
                if !(*gap >= 0.0) {
                    return Err(invalid("output.excitation.gap", "must be >= 0"));
                }
            }
            Some(ExcitationSpec::Conservative { step, .. }) => {
                positive("output.excitation.step", *step)?;
            }
            None => {}
        }
        // hydro certificate feasibility is checked when resolving k1
        self.runs().map(|_| ())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            t_end: self.sim.t_end,
            dt: self.sim.dt.unwrap_or_else(|| self.plant.kind().default_dt()),
            log_every: self.sim.log_every,
            seed: self.sim.seed,
        }
    }

    pub fn metrics_window(&self) -> (f64, f64) {
        match self.sim.metrics_window {
            Some([a, b]) => (a, b),
            None => ((self.sim.t_end - 20.0).max(0.0), self.sim.t_end),
        }
    }

    fn hydro_alpha1(&self, model: &PlantModel) -> Option<f64> {
        match model {
            PlantModel::Hydro(p) => Some(self.observer.alpha1_lyap.unwrap_or(2.0 / p.a1)),
            _ => None,
        }
    }

    /// Gains to simulate, in sweep order.
    pub fn k1_values(&self) -> Result<Vec<f64>> {
        match (&self.observer.k1, self.observer.k1_auto) {
            (Some(K1Spec::Single(k)), _) => Ok(vec![*k]),
            (Some(K1Spec::Sweep(ks)), _) => Ok(ks.clone()),
            (None, _) => {
                let model = self.plant.to_model();
                let PlantModel::Hydro(p) = model else {
                    return Err(invalid("observer.k1_auto", "only available for the hydro plant"));
                };
                let upper = self
                    .observer
                    .theta2_upper
                    .ok_or_else(|| invalid("observer.theta2_upper", "required when k1_auto is true"))?;
                let alpha1 = self.hydro_alpha1(&model).expect("hydro");
                let k = k1_min(upper, self.observer.vartheta, &p, alpha1)
                    .map_err(|e| invalid("observer.alpha1_lyap", e.to_string()))?;
                if k > 0.0 {
                    Ok(vec![k])
                } else {
                    // every positive gain certifies; take a small one
                    Ok(vec![1e-3])
                }
            }
        }
    }

    fn initial_state(&self, index: usize) -> InitialState {
        let kind = self.plant.kind();
        match (self.init.random_box, self.sim.seed) {
            (Some([lo, hi]), Some(seed)) => {
                InitialState::random_box(kind, seed.wrapping_add(index as u64), lo, hi)
            }
            _ => InitialState {
                x1: self.init.x1,
                x2: self.init.x2,
                x3: if kind == PlantKind::Mech { 0.0 } else { self.init.x3 },
                observer: ObserverState {
                    x2i: self.init.x2i,
                    theta1i: self.init.theta1i,
                    theta2i: self.init.theta2i,
                    x3hat: (kind == PlantKind::Hydro).then_some(self.init.x3hat),
                },
            },
        }
    }

    /// One [`RunSpec`] per gain.
    pub fn runs(&self) -> Result<Vec<RunSpec>> {
        let model = self.plant.to_model();
        let ks = self.k1_values()?;
        let config = self.sim_config();
        ks.iter()
            .enumerate()
            .map(|(index, &k1)| {
                let observer = ObserverGains::new(k1, self.observer.vartheta)
                    .map_err(|e| invalid("observer.k1", e.to_string()))?;
                let system = ClosedLoopSystem {
                    plant: model,
                    observer,
                    controller: ControllerGains {
                        alpha1: self.controller.alpha1,
                        alpha2: self.controller.alpha2,
                    },
                    reference: self.reference,
                    open_loop_input: self.controller.open_loop,
                    alpha1_lyap: self.hydro_alpha1(&model),
                };
                system.validate().map_err(|e| invalid("observer", e.to_string()))?;
                Ok(RunSpec {
                    index,
                    label: format!("k1_{k1}"),
                    k1,
                    system,
                    config,
                    init: self.initial_state(index),
                })
            })
            .collect()
    }
}
