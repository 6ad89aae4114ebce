//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero if any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fricobs::controller::{ControllerGains, ReferenceGenerator};
use fricobs::engine::{
    metrics, monotonicity_violations, simulate, ClosedLoopSystem, InitialState, InputSignal,
    SimConfig, TrajectoryLog,
};
use fricobs::excitation::{check_pe, gram_over_window, RegressorSeries};
use fricobs::models::{FrictionParams, HydroParams, LuGreParams, PlantModel};
use fricobs::observer::{hydro_alpha2, k1_min, log_cosh, ObserverGains, ObserverState};

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

fn mech() -> FrictionParams {
    FrictionParams::new(0.4, 1.0, 100.0).unwrap()
}

fn sine() -> InputSignal {
    InputSignal::Sine { amplitude: 1.0, omega: 1.0, phase: 0.0, offset: 0.0 }
}

fn last(log: &TrajectoryLog, col: &str) -> f64 {
    *log.require(col).unwrap().last().unwrap()
}

fn mech_observer_run(init: InitialState) -> TrajectoryLog {
    mech_observer_run_at(init, 1e-4, 1)
}

fn mech_observer_run_at(init: InitialState, dt: f64, log_every: usize) -> TrajectoryLog {
    let sys = ClosedLoopSystem::open_loop(
        PlantModel::Mech(mech()),
        ObserverGains::new(1.0, 100.0).unwrap(),
        sine(),
    );
    simulate(&sys, &SimConfig::new(50.0, dt, log_every), &init).unwrap()
}

fn observer_convergence() -> Outcome {
    let init = InitialState { x2: 0.5, ..Default::default() };
    let log = mech_observer_run(init);
    let x2t = last(&log, "tilde_x2").abs();
    let v = monotonicity_violations(log.require("H").unwrap());
    Outcome::new(x2t < 1e-3 && v == 0, format!("|x2~(50)|={x2t:.3e}, H violations={v}"))
}

fn randomized_lyapunov() -> Outcome {
    let mut worst = 0.0f64;
    let mut violations = 0;
    let mut offenders = Vec::new();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = || rng.random_range(-2.0..=2.0);
        let init = InitialState {
            x1: d(),
            x2: d(),
            x3: 0.0,
            observer: ObserverState { x2i: d(), theta1i: d(), theta2i: d(), x3hat: None },
        };
        let log = mech_observer_run(init);
        let v = monotonicity_violations(log.require("H").unwrap());
        if v > 0 {
            offenders.push((seed, v, init));
        }
        violations += v;
        worst = worst.max(last(&log, "tilde_x2").abs());
    }
    // Diagnostic only: the same draws sampled on the same grid but integrated at dt=1e-5.
    let fine: Vec<String> = offenders
        .iter()
        .map(|(seed, v, init)| {
            let log = mech_observer_run_at(*init, 1e-5, 10);
            let fine = monotonicity_violations(log.require("H").unwrap());
            format!("seed {seed}: {v} at dt=1e-4, {fine} at dt=1e-5")
        })
        .collect();
    Outcome::new(
        violations == 0,
        format!(
            "20 seeds, total H violations={violations}, worst |x2~(50)|={worst:.3e}{}",
            if fine.is_empty() { String::new() } else { format!("; {}", fine.join(", ")) }
        ),
    )
}

fn closed_loop_mech(k1: f64) -> ClosedLoopSystem {
    ClosedLoopSystem::closed_loop(
        PlantModel::Mech(mech()),
        ObserverGains::new(k1, 100.0).unwrap(),
        ControllerGains::default(),
        ReferenceGenerator::Chirp { amplitude: 1.0, rate: 0.01 },
    )
}

fn paper_init() -> InitialState {
    InitialState { x1: 0.1, x2: 0.5, ..Default::default() }
}

fn terminal_state(log: &TrajectoryLog) -> Vec<f64> {
    ["x1", "x2", "x2I", "theta1I", "theta2I"].iter().map(|c| last(log, c)).collect()
}

fn rk4_order() -> Outcome {
    let sys = closed_loop_mech(3.0);
    let end = |dt: f64| {
        let steps = (1.0 / dt).round() as usize;
        terminal_state(&simulate(&sys, &SimConfig::new(1.0, dt, steps), &paper_init()).unwrap())
    };
    let reference = end(1e-5);
    let err = |y: Vec<f64>| y.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let (e1, e2) = (err(end(1e-3)), err(end(5e-4)));
    let ratio = e1 / e2;
    Outcome::new(
        (13.0..=19.0).contains(&ratio),
        format!("err(1e-3)={e1:.3e}, err(5e-4)={e2:.3e}, ratio={ratio:.2}"),
    )
}

fn lugre_system(k1: f64, reference: ReferenceGenerator) -> ClosedLoopSystem {
    ClosedLoopSystem::closed_loop(
        PlantModel::Lugre(LuGreParams::benchmark()),
        ObserverGains::new(k1, 100.0).unwrap(),
        ControllerGains::new(100.0, 100.0).unwrap(),
        reference,
    )
}

fn step_plus_ramp() -> ReferenceGenerator {
    ReferenceGenerator::StepPlusRamp {
        step_time: 0.0,
        step_height: 1.0,
        ramp_start: 10.0,
        ramp_slope: 0.1,
        // a unit step over the default 0.1 s needs |x2| near 19, far past
        // the RK4 stability limit of the bristle state at dt=1e-5
        blend: 1.0,
    }
}

fn lugre_run(k1: f64, reference: ReferenceGenerator, t_end: f64) -> TrajectoryLog {
    simulate(&lugre_system(k1, reference), &SimConfig::new(t_end, 1e-5, 100), &paper_init()).unwrap()
}

fn chirp_reproduction(logs: &[(f64, TrajectoryLog)]) -> Outcome {
    let rms: Vec<f64> = logs
        .iter()
        .map(|(_, l)| metrics(l, (80.0, 100.0)).unwrap().rms_e1)
        .collect();
    let log7 = &logs[2].1;
    let th1 = last(log7, "tilde_theta1").abs();
    let th2 = last(log7, "tilde_theta2").abs();
    // Frozen after the first reference run at about twice the observed values;
    // each implies the looser published bound (0.01, 0.1, 0.15).
    let a = rms[2] < 3e-3;
    let b = rms[2] < rms[0];
    let c = th1 < 0.075 && th2 < 0.09;
    Outcome::new(
        a && b && c,
        format!(
            "rms(e1) k1=1,3,7: {:.3e}, {:.3e}, {:.3e}; k1=7 |th1^-sigma2|={th1:.3e}, |th2^-FC|={th2:.3e} [a={a} b={b} c={c}]",
            rms[0], rms[1], rms[2]
        ),
    )
}

fn step_ramp_reproduction(log: &TrajectoryLog) -> Outcome {
    let m = metrics(log, (30.0, 50.0)).unwrap();
    Outcome::new(m.rms_e1 < 0.02, format!("final-20s rms(e1)={:.3e}, k1=7", m.rms_e1))
}

fn hydro_run(k1: f64, alpha1_lyap: f64) -> TrajectoryLog {
    let p = HydroParams::new(1.0, 1.0, 1.0, mech()).unwrap();
    let mut sys = ClosedLoopSystem::open_loop(
        PlantModel::Hydro(p),
        ObserverGains::new(k1, 100.0).unwrap(),
        sine(),
    );
    sys.alpha1_lyap = Some(alpha1_lyap);
    let init = InitialState {
        x2: 0.5,
        observer: ObserverState::hydro(),
        ..Default::default()
    };
    simulate(&sys, &SimConfig::new(50.0, 1e-4, 1), &init).unwrap()
}

fn hydro_observer() -> Outcome {
    let p = HydroParams::new(1.0, 1.0, 1.0, mech()).unwrap();
    let k1 = k1_min(2.0, 100.0, &p, 2.0).unwrap();
    let log = hydro_run(k1, 2.0);
    let err = last(&log, "tilde_x2").abs() + last(&log, "tilde_x3").abs();
    let v = monotonicity_violations(log.require("U").unwrap());
    // Diagnostic only: the weight ϑ·a1/a2 cancels the x̃2·x̃3 cross term in dU/dt.
    let cancelling = monotonicity_violations(hydro_run(k1, 100.0).require("U").unwrap());
    Outcome::new(
        err < 1e-3 && v == 0,
        format!(
            "k1=k1_min={k1:.6e}, |x2~|+|x3~| at 50 = {err:.3e}, U violations={v} (with alpha1_lyap=100: {cancelling})"
        ),
    )
}

fn excitation_analytics() -> Outcome {
    let dt = 1e-3;
    let n = (2.0 * std::f64::consts::PI / dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * 2.0 * std::f64::consts::PI / n as f64).collect();
    let rot = RegressorSeries::new(times.clone(), times.iter().map(|t| [t.cos(), t.sin()]).collect()).unwrap();
    let g = gram_over_window(&rot, 0.0, *times.last().unwrap()).unwrap().gram;
    let pi = std::f64::consts::PI;
    let gram_err = (g[0][0] - pi).abs().max((g[1][1] - pi).abs()).max(g[0][1].abs());

    let flat = RegressorSeries::new(times.clone(), vec![[0.7, 0.7]; times.len()]).unwrap();
    let rank1_fails = [1e-12, 1e-6, 1e-3, 1.0]
        .iter()
        .all(|&mu| !check_pe(&flat, 1.0, mu, Some(0.25)).unwrap().satisfied);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let long: Vec<f64> = (0..=20_000).map(|k| k as f64 * 1e-3).collect();
    let phi = long.iter().map(|t| [(1.3 * t).sin() + 0.2, (3.1 * t).cos().tanh()]).collect();
    let rs = RegressorSeries::new(long, phi).unwrap();
    let mut add_err = 0.0f64;
    for _ in 0..100 {
        // split points on the sample grid; the outer endpoints are arbitrary
        let a: f64 = rng.random_range(0.0..6.0);
        let b = ((a * 1e3).ceil() as usize + rng.random_range(1..7000)) as f64 * 1e-3;
        let c = b + rng.random_range(0.01..7.0);
        let (g1, g2, g3) = (
            gram_over_window(&rs, a, b).unwrap().gram,
            gram_over_window(&rs, b, c).unwrap().gram,
            gram_over_window(&rs, a, c).unwrap().gram,
        );
        for i in 0..2 {
            for j in 0..2 {
                add_err = add_err.max((g1[i][j] + g2[i][j] - g3[i][j]).abs());
            }
        }
    }
    Outcome::new(
        gram_err < 1e-6 && rank1_fails && add_err < 1e-12,
        format!("|G-pi I|={gram_err:.2e}, rank-1 fails PE: {rank1_fails}, additivity err={add_err:.2e}"),
    )
}

/// Smallest `α₂` over a fine grid of the uncertainty box, `θ₁ ∈ [0, 5]`.
fn grid_min_alpha2(k1: f64, theta2_upper: f64, vartheta: f64, a2: f64, alpha1: f64) -> f64 {
    let n = 200;
    let mut worst = f64::INFINITY;
    for i in 0..=n {
        let th1 = 5.0 * i as f64 / n as f64;
        for j in 0..=n {
            let th2 = theta2_upper * j as f64 / n as f64;
            worst = worst.min(hydro_alpha2(k1, th1, th2, vartheta, a2, alpha1));
        }
    }
    worst
}

fn k1_min_certificate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let vartheta = rng.random_range(1.0..300.0);
        let a1 = rng.random_range(0.1..5.0);
        let a2 = rng.random_range(0.01..5.0);
        let alpha1 = rng.random_range(1.01 / a1..10.0 / a1);
        let upper: f64 = rng.random_range(0.01..5.0);
        let p = HydroParams::new(a1, a2, 1.0, FrictionParams::new(0.1, upper.min(1.0), vartheta).unwrap()).unwrap();
        let k = k1_min(upper, vartheta, &p, alpha1).unwrap();
        // a zero bound certifies every positive gain; check a tiny one
        let k = if k > 0.0 { k } else { 1e-9 };
        let m = grid_min_alpha2(k, upper, vartheta, a2, alpha1);
        worst = worst.min(m);
        if m.is_nan() || m <= 0.0 {
            failures += 1;
        }
    }
    Outcome::new(failures == 0, format!("200 draws, failures={failures}, min grid alpha2={worst:.3e}"))
}

fn rel(a: f64, scale: f64) -> f64 {
    a.abs() / (1.0 + scale)
}

/// Worst scaled residual of the observer and control identities along `log`.
fn identity_residual(log: &TrajectoryLog, k1: f64, vartheta: f64) -> f64 {
    let col = |c: &str| log.require(c).unwrap();
    let (x1, x2i, t1i, t2i) = (col("x1"), col("x2I"), col("theta1I"), col("theta2I"));
    let (x2h, t1h, t2h) = (col("hat_x2"), col("hat_theta1"), col("hat_theta2"));
    let mut worst = 0.0f64;
    for i in 0..log.rows() {
        worst = worst.max(rel(x2h[i] - x2i[i] - k1 * x1[i], x2i[i].abs() + (k1 * x1[i]).abs()));
        let q1 = vartheta / (2.0 * k1) * x2h[i] * x2h[i];
        worst = worst.max(rel(t1h[i] - t1i[i] + q1, t1i[i].abs() + q1));
        let q2 = log_cosh(vartheta * x2h[i]) / k1;
        worst = worst.max(rel(t2h[i] - t2i[i] + q2, t2i[i].abs() + q2));
    }
    if let (Some(u), Some(us), Some(eps)) = (log.column("u"), log.column("u_star"), log.column("epsilon_t")) {
        for i in 0..log.rows() {
            worst = worst.max(rel(u[i] - us[i] - eps[i], u[i].abs() + us[i].abs() + eps[i].abs()));
        }
    }
    worst
}

fn identity_suite(logs: &[(f64, &TrajectoryLog)]) -> Outcome {
    let worst = logs
        .iter()
        .map(|(k1, l)| identity_residual(l, *k1, 100.0))
        .fold(0.0, f64::max);
    let rows: usize = logs.iter().map(|(_, l)| l.rows()).sum();
    Outcome::new(worst < 1e-12, format!("{} logs, {rows} rows, worst scaled residual={worst:.2e}", logs.len()))
}

fn report(id: u32, name: &str, started: Instant, o: &Outcome) -> bool {
    println!(
        "acceptance {id} {name}: {} ({}; {:.1} s)",
        if o.passed { "PASS" } else { "FAIL" },
        o.detail,
        started.elapsed().as_secs_f64()
    );
    o.passed
}

fn main() {
    // The LuGre runs dominate; start them first and check the cheap criteria meanwhile.
    let heavy = std::thread::spawn(|| {
        let started = Instant::now();
        let chirp = ReferenceGenerator::Chirp { amplitude: 1.0, rate: 0.01 };
        let mut jobs: Vec<(f64, ReferenceGenerator, f64)> =
            [1.0, 3.0, 7.0].iter().map(|&k| (k, chirp, 100.0)).collect();
        jobs.push((7.0, step_plus_ramp(), 50.0));
        let logs: Vec<TrajectoryLog> = std::thread::scope(|s| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|&(k, r, t)| s.spawn(move || lugre_run(k, r, t)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        (started, logs)
    });

    let mut ok = true;
    let t = Instant::now();
    ok &= report(1, "observer convergence", t, &observer_convergence());
    let t = Instant::now();
    ok &= report(2, "randomized Lyapunov", t, &randomized_lyapunov());
    let t = Instant::now();
    ok &= report(3, "RK4 order", t, &rk4_order());

    let t = Instant::now();
    ok &= report(6, "hydro observer", t, &hydro_observer());
    let t = Instant::now();
    ok &= report(7, "excitation analytics", t, &excitation_analytics());
    let t = Instant::now();
    ok &= report(8, "k1_min certificate", t, &k1_min_certificate());

    let (started, mut logs) = heavy.join().unwrap();
    let ramp = logs.pop().unwrap();
    let chirp: Vec<(f64, TrajectoryLog)> = [1.0, 3.0, 7.0].into_iter().zip(logs).collect();
    ok &= report(4, "LuGre chirp", started, &chirp_reproduction(&chirp));
    ok &= report(5, "step plus ramp", started, &step_ramp_reproduction(&ramp));

    let t = Instant::now();
    let mech_closed = simulate(&closed_loop_mech(3.0), &SimConfig::new(10.0, 1e-4, 10), &paper_init()).unwrap();
    let open = mech_observer_run(InitialState { x2: 0.5, ..Default::default() });
    let mut all: Vec<(f64, &TrajectoryLog)> = chirp.iter().map(|(k, l)| (*k, l)).collect();
    all.extend([(7.0, &ramp), (3.0, &mech_closed), (1.0, &open)]);
    ok &= report(9, "identity suite", t, &identity_suite(&all));

    if !ok {
        std::process::exit(1);
    }
}
