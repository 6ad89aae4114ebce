//! Fixed-step RK4 simulation of plant, observer and controller.
//!
//! The stacked state is `[plant..., x₂I, θ₁I, θ₂I, (x̂₃)]`. The observer
//! output and the control are recomputed from the stage state at every RK4
//! stage, so the coupled system keeps fourth-order accuracy.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::diagnostics::{epsilon_t, ideal_control};
use crate::controller::{control, ControllerGains, ReferenceGenerator};
use crate::error::{require_positive, Error, Result};
use crate::models::{MechState, PlantKind, PlantModel};
use crate::observer::{
    hydro_observer_rhs, lyapunov_h, lyapunov_u, observer_output, observer_rhs, ErrorVector,
    ObserverGains, ObserverState,
};

/// Per-step increase of a Lyapunov sample tolerated as integration noise,
/// relative to `max(1, value)`.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-9;

/// Reusable classical RK4 stepper over slices.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            stage: vec![0.0; dim],
        }
    }

    /// Advances `y` from `t` to `t + dt` in place.
    pub fn step<F>(&mut self, f: &mut F, t: f64, y: &mut [f64], dt: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let [k1, k2, k3, k4] = &mut self.k;
        let stage = &mut self.stage;
        f(t, y, k1);
        for i in 0..n {
            stage[i] = y[i] + 0.5 * dt * k1[i];
        }
        f(t + 0.5 * dt, stage, k2);
        for i in 0..n {
            stage[i] = y[i] + 0.5 * dt * k2[i];
        }
        f(t + 0.5 * dt, stage, k3);
        for i in 0..n {
            stage[i] = y[i] + dt * k3[i];
        }
        f(t + dt, stage, k4);
        let mut finite = true;
        for i in 0..n {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            finite &= y[i].is_finite();
        }
        if finite {
            Ok(())
        } else {
            Err(Error::Diverged { t: t + dt })
        }
    }
}

/// One classical RK4 step of `ẏ = f(t, y)`.
pub fn rk4_step<F>(mut f: F, y: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    require_positive("dt", dt)?;
    let mut out = y.to_vec();
    Rk4::new(y.len()).step(&mut f, t, &mut out, dt)?;
    Ok(out)
}

/// Input applied instead of the tracking law in observer-only studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSignal {
    Constant {
        value: f64,
    },
    /// `offset + amplitude·sin(omega·t + phase)`.
    Sine {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl InputSignal {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            InputSignal::Constant { value } => value,
            InputSignal::Sine {
                amplitude,
                omega,
                phase,
                offset,
            } => offset + amplitude * (omega * t + phase).sin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopSystem {
    pub plant: PlantModel,
    pub observer: ObserverGains,
    pub controller: ControllerGains,
    pub reference: ReferenceGenerator,
    /// Replaces the tracking law when set.
    pub open_loop_input: Option<InputSignal>,
    /// Weight on `x̃₃²` in the hydro Lyapunov function; defaults to `2/a₁`.
    pub alpha1_lyap: Option<f64>,
}

impl ClosedLoopSystem {
    pub fn closed_loop(
        plant: PlantModel,
        observer: ObserverGains,
        controller: ControllerGains,
        reference: ReferenceGenerator,
    ) -> Self {
        Self {
            plant,
            observer,
            controller,
            reference,
            open_loop_input: None,
            alpha1_lyap: None,
        }
    }

    pub fn open_loop(plant: PlantModel, observer: ObserverGains, input: InputSignal) -> Self {
        Self {
            plant,
            observer,
            controller: ControllerGains::default(),
            reference: ReferenceGenerator::default(),
            open_loop_input: Some(input),
            alpha1_lyap: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.plant {
            PlantModel::Mech(p) => p.validate()?,
            PlantModel::Hydro(p) => {
                p.validate()?;
                if self.open_loop_input.is_none() {
                    return Err(Error::Config(
                        "the tracking law assumes the mechanical plant; hydro runs need an open-loop input"
                            .into(),
                    ));
                }
                let a = self.hydro_alpha1().unwrap_or(f64::NAN);
                if !(a * p.a1 > 1.0) {
                    return Err(Error::Config(format!(
                        "alpha1_lyap = {a} must exceed 1/a1 = {}",
                        1.0 / p.a1
                    )));
                }
            }
            PlantModel::Lugre(p) => p.validate()?,
        }
        ObserverGains::new(self.observer.k1, self.observer.vartheta)?;
        self.controller.validate()?;
        self.reference.validate()
    }

    fn is_hydro(&self) -> bool {
        matches!(self.plant, PlantModel::Hydro(_))
    }

    fn hydro_alpha1(&self) -> Option<f64> {
        match &self.plant {
            PlantModel::Hydro(p) => Some(self.alpha1_lyap.unwrap_or(2.0 / p.a1)),
            _ => None,
        }
    }

    fn state_dim(&self) -> usize {
        self.plant.kind().dim() + if self.is_hydro() { 4 } else { 3 }
    }

    #[inline]
    fn unpack_observer(&self, y: &[f64]) -> ObserverState {
        let n = self.plant.kind().dim();
        ObserverState {
            x2i: y[n],
            theta1i: y[n + 1],
            theta2i: y[n + 2],
            x3hat: if self.is_hydro() { Some(y[n + 3]) } else { None },
        }
    }

    #[inline]
    fn input(&self, t: f64, x1: f64, out: &crate::observer::ObserverOutput) -> f64 {
        match &self.open_loop_input {
            Some(sig) => sig.at(t),
            None => control(
                out,
                x1,
                &self.reference.sample(t),
                &self.controller,
                self.observer.vartheta,
            ),
        }
    }

    /// Stacked vector field.
    #[inline]
    pub fn field(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.plant.kind().dim();
        let os = self.unpack_observer(y);
        let x1 = y[0];
        let out = observer_output(&os, x1, &self.observer);
        let u = self.input(t, x1, &out);
        self.plant.rhs_packed(&y[..n], u, &mut dy[..n]);
        let d = match &self.plant {
            PlantModel::Hydro(p) => hydro_observer_rhs(&os, x1, u, &self.observer, p)
                .expect("hydro state always carries x3hat"),
            _ => observer_rhs(&os, x1, u, &self.observer),
        };
        dy[n] = d.x2i;
        dy[n + 1] = d.theta1i;
        dy[n + 2] = d.theta2i;
        if let Some(dx3) = d.x3hat {
            dy[n + 3] = dx3;
        }
    }

    /// Column names of the log this system produces.
    pub fn log_columns(&self) -> Vec<String> {
        let kind = self.plant.kind();
        let mut c = vec!["t", "x1", "x2"];
        c.extend(kind.third_state_name());
        c.extend(["x2I", "theta1I", "theta2I"]);
        if self.is_hydro() {
            c.push("x3hat");
        }
        c.extend(["hat_x2", "hat_theta1", "hat_theta2", "u"]);
        if self.open_loop_input.is_none() {
            c.extend(["u_star", "epsilon_t"]);
        }
        c.extend([
            "r",
            "dr",
            "ddr",
            "e1",
            "tilde_x2",
            "tilde_theta1",
            "tilde_theta2",
            "H",
        ]);
        if self.is_hydro() {
            c.extend(["tilde_x3", "U"]);
        }
        c.into_iter().map(String::from).collect()
    }

    /// One log row for state `y` at time `t`, ordered as [`Self::log_columns`].
    pub fn log_row(&self, t: f64, y: &[f64], row: &mut Vec<f64>) {
        row.clear();
        let n = self.plant.kind().dim();
        let vartheta = self.observer.vartheta;
        let os = self.unpack_observer(y);
        let (x1, x2) = (y[0], y[1]);
        let out = observer_output(&os, x1, &self.observer);
        let reference = self.reference.sample(t);
        let u = self.input(t, x1, &out);
        let nominal = self.plant.nominal_friction(vartheta);
        let mut err = ErrorVector::from_truth(&out, x2, &nominal);

        row.push(t);
        row.extend_from_slice(&y[..n]);
        row.extend_from_slice(&[os.x2i, os.theta1i, os.theta2i]);
        if let Some(x3hat) = os.x3hat {
            row.push(x3hat);
            err = err.with_x3tilde(x3hat - y[2]);
        }
        row.extend_from_slice(&[out.x2hat, out.theta1hat, out.theta2hat, u]);
        if self.open_loop_input.is_none() {
            let u_star = ideal_control(&MechState { x1, x2 }, &nominal, &reference, &self.controller);
            row.push(u_star);
            row.push(epsilon_t(x2, &err, &nominal, self.controller.alpha2));
        }
        row.extend_from_slice(&[
            reference.r,
            reference.dr,
            reference.ddr,
            x1 - reference.r,
            err.x2tilde,
            err.theta1tilde,
            err.theta2tilde,
            lyapunov_h(&err, vartheta),
        ]);
        if let Some(alpha1) = self.hydro_alpha1() {
            row.push(err.x3tilde.unwrap_or(0.0));
            row.push(lyapunov_u(&err, vartheta, alpha1).expect("hydro errors carry x3tilde"));
        }
    }
}

fn default_log_every() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl SimConfig {
    pub fn new(t_end: f64, dt: f64, log_every: usize) -> Self {
        Self {
            t_end,
            dt,
            log_every,
            seed: None,
        }
    }

    pub fn validate(&self, kind: PlantKind) -> Result<()> {
        require_positive("dt", self.dt)?;
        require_positive("t_end", self.t_end)?;
        if self.t_end < self.dt {
            return Err(Error::param("t_end", format!("must be >= dt = {}", self.dt)));
        }
        if self.log_every == 0 {
            return Err(Error::param("log_every", "must be >= 1"));
        }
        if self.dt > kind.default_dt() {
            log::warn!(
                "dt = {} exceeds the documented ceiling {} for the {:?} plant",
                self.dt,
                kind.default_dt(),
                kind
            );
        }
        Ok(())
    }

    /// Number of RK4 steps; `t_end` is rounded down to a whole step.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }

    pub fn expected_rows(&self) -> usize {
        self.steps() / self.log_every + 1
    }
}

/// Initial plant and observer states. `x3` is the pressure for the hydro
/// plant and the bristle deflection `z` for LuGre; it is ignored otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialState {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub observer: ObserverState,
}

impl InitialState {
    /// Every state component drawn uniformly from `[low, high]`.
    pub fn random_box(kind: PlantKind, seed: u64, low: f64, high: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || rng.random_range(low..=high);
        let x1 = draw();
        let x2 = draw();
        let x3 = if kind == PlantKind::Mech { 0.0 } else { draw() };
        let observer = ObserverState {
            x2i: draw(),
            theta1i: draw(),
            theta2i: draw(),
            x3hat: (kind == PlantKind::Hydro).then(&mut draw),
        };
        Self {
            x1,
            x2,
            x3,
            observer,
        }
    }

    fn pack(&self, sys: &ClosedLoopSystem) -> Result<Vec<f64>> {
        let kind = sys.plant.kind();
        if sys.is_hydro() != self.observer.x3hat.is_some() {
            return Err(Error::Config(
                "x3hat must be initialized exactly when the plant is hydro".into(),
            ));
        }
        let mut y = vec![self.x1, self.x2];
        if kind.dim() == 3 {
            y.push(self.x3);
        }
        y.extend([self.observer.x2i, self.observer.theta1i, self.observer.theta2i]);
        y.extend(self.observer.x3hat);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("initial state must be finite".into()));
        }
        Ok(y)
    }
}

/// Decimated, column-major record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    /// Comment lines written before the header (without the `#` prefix).
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub data: Vec<Vec<f64>>,
    pub diverged_at: Option<f64>,
}

impl TrajectoryLog {
    pub fn new(columns: Vec<String>) -> Self {
        let data = vec![Vec::new(); columns.len()];
        Self {
            comments: Vec::new(),
            columns,
            data,
            diverged_at: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn push_row(&mut self, row: &[f64]) {
        for (col, &v) in self.data.iter_mut().zip(row) {
            col.push(v);
        }
    }

    /// Comment block, header, rows in shortest round-trip decimal, and a
    /// `# DIVERGED at t=...` trailer when the run blew up.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        for c in &self.comments {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "{}", self.columns.join(","))?;
        let mut line = String::new();
        for r in 0..self.rows() {
            line.clear();
            for (i, col) in self.data.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{:?}", col[r]));
            }
            writeln!(out, "{line}")?;
        }
        if let Some(t) = self.diverged_at {
            writeln!(out, "# DIVERGED at t={t:?}")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut comments = Vec::new();
        let mut diverged_at = None;
        let mut body = String::new();
        for line in input.lines() {
            let line = line?;
            if let Some(c) = line.strip_prefix('#') {
                let c = c.strip_prefix(' ').unwrap_or(c);
                if let Some(t) = c.strip_prefix("DIVERGED at t=") {
                    diverged_at = t.trim().parse().ok();
                } else if body.is_empty() {
                    comments.push(c.to_string());
                }
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut reader = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let columns: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let mut log = TrajectoryLog::new(columns);
        log.comments = comments;
        log.diverged_at = diverged_at;
        let mut row = Vec::with_capacity(log.columns.len());
        for rec in reader.records() {
            let rec = rec?;
            row.clear();
            for field in rec.iter() {
                row.push(field.trim().parse::<f64>().map_err(|e| {
                    Error::Config(format!("bad number `{field}` in log: {e}"))
                })?);
            }
            log.push_row(&row);
        }
        Ok(log)
    }
}

/// Integrates `sys` and logs every `cfg.log_every` steps. Divergence stops
/// the run and is reported through [`TrajectoryLog::diverged_at`]; the rows
/// logged so far are kept.
pub fn run(sys: &ClosedLoopSystem, cfg: &SimConfig, init: &InitialState) -> Result<TrajectoryLog> {
    sys.validate()?;
    cfg.validate(sys.plant.kind())?;
    let mut y = init.pack(sys)?;
    debug_assert_eq!(y.len(), sys.state_dim());

    let mut log = TrajectoryLog::new(sys.log_columns());
    if let Some(seed) = cfg.seed {
        log.comments.push(format!("seed: {seed}"));
    }
    let mut row = Vec::with_capacity(log.columns.len());
    sys.log_row(0.0, &y, &mut row);
    log.push_row(&row);

    let mut rk4 = Rk4::new(y.len());
    let mut field = |t: f64, y: &[f64], dy: &mut [f64]| sys.field(t, y, dy);
    for step in 0..cfg.steps() {
        let t = step as f64 * cfg.dt;
        if let Err(Error::Diverged { t }) = rk4.step(&mut field, t, &mut y, cfg.dt) {
            log.diverged_at = Some(t);
            return Ok(log);
        }
        if (step + 1) % cfg.log_every == 0 {
            let t_next = (step + 1) as f64 * cfg.dt;
            sys.log_row(t_next, &y, &mut row);
            log.push_row(&row);
        }
    }
    Ok(log)
}

/// Like [`run`], but divergence is an error.
pub fn simulate(sys: &ClosedLoopSystem, cfg: &SimConfig, init: &InitialState) -> Result<TrajectoryLog> {
    let log = run(sys, cfg, init)?;
    match log.diverged_at {
        Some(t) => Err(Error::Diverged { t }),
        None => Ok(log),
    }
}

/// Count of samples that rise by more than `MONOTONICITY_TOLERANCE·max(1, prev)`.
pub fn monotonicity_violations(series: &[f64]) -> usize {
    series
        .windows(2)
        .filter(|w| w[1] - w[0] > MONOTONICITY_TOLERANCE * w[0].abs().max(1.0))
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub rms_e1: f64,
    pub max_abs_e1: f64,
    pub rms_x2tilde: f64,
    /// `(θ̃₁, θ̃₂)` at the last sample of the window.
    pub final_theta_errors: [f64; 2],
    pub h_monotonicity_violations: usize,
    /// Hydro runs only.
    pub u_monotonicity_violations: Option<usize>,
}

fn rms(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Summary statistics over the rows with `t ∈ [t0, t1]`.
pub fn metrics(log: &TrajectoryLog, window: (f64, f64)) -> Result<Metrics> {
    let (t0, t1) = window;
    let t = log.require("t")?;
    let lo = t.partition_point(|&s| s < t0 - 1e-9);
    let hi = t.partition_point(|&s| s <= t1 + 1e-9);
    if hi <= lo {
        return Err(Error::Config(format!("no log rows in window [{t0}, {t1}]")));
    }
    let slice = |name: &str| -> Result<&[f64]> { Ok(&log.require(name)?[lo..hi]) };
    let e1 = slice("e1")?;
    let th1 = slice("tilde_theta1")?;
    let th2 = slice("tilde_theta2")?;
    Ok(Metrics {
        t_start: t[lo],
        t_end: t[hi - 1],
        samples: hi - lo,
        rms_e1: rms(e1),
        max_abs_e1: e1.iter().fold(0.0, |m, x| m.max(x.abs())),
        rms_x2tilde: rms(slice("tilde_x2")?),
        final_theta_errors: [th1[th1.len() - 1], th2[th2.len() - 1]],
        h_monotonicity_violations: monotonicity_violations(slice("H")?),
        u_monotonicity_violations: log.column("U").map(|u| monotonicity_violations(&u[lo..hi])),
    })
}
