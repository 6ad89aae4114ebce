use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use fricobs::controller::{ControllerGains, ReferenceGenerator};
use fricobs::engine::{monotonicity_violations, simulate, ClosedLoopSystem, InitialState, InputSignal, SimConfig};
use fricobs::models::{FrictionParams, PlantModel};
use fricobs::observer::{ObserverGains, ObserverState};

fn open_loop(theta1: f64, theta2: f64, k1: f64, input: InputSignal) -> ClosedLoopSystem {
    ClosedLoopSystem::open_loop(
        PlantModel::Mech(FrictionParams::new(theta1, theta2, 100.0).unwrap()),
        ObserverGains::new(k1, 100.0).unwrap(),
        input,
    )
}

/// Plant-only oracle: explicit midpoint rule on a much finer grid.
fn midpoint_plant(theta1: f64, theta2: f64, x: [f64; 2], t_end: f64, n: usize) -> Vec<[f64; 2]> {
    let f = |t: f64, x: [f64; 2]| [x[1], -theta1 * x[1] - theta2 * (100.0 * x[1]).tanh() + t.sin()];
    let h = t_end / n as f64;
    let mut out = vec![x];
    let mut y = x;
    for k in 0..n {
        let t = k as f64 * h;
        let k1 = f(t, y);
        let mid = [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]];
        let k2 = f(t + 0.5 * h, mid);
        y = [y[0] + h * k2[0], y[1] + h * k2[1]];
        out.push(y);
    }
    out
}

#[test]
fn plant_states_match_independent_integrator() {
    let sys = open_loop(0.4, 1.0, 2.0, InputSignal::Sine { amplitude: 1.0, omega: 1.0, phase: 0.0, offset: 0.0 });
    let init = InitialState { x1: 0.3, x2: 1.5, ..Default::default() };
    let log = simulate(&sys, &SimConfig::new(2.0, 1e-4, 1000), &init).unwrap();
    // second-order oracle at h = 1e-6 has global error ~1e-8
    let oracle = midpoint_plant(0.4, 1.0, [0.3, 1.5], 2.0, 2_000_000);
    let (x1, x2) = (log.require("x1").unwrap(), log.require("x2").unwrap());
    for i in 0..log.rows() {
        let o = oracle[i * 100_000];
        assert_abs_diff_eq!(x1[i], o[0], epsilon = 1e-7);
        assert_abs_diff_eq!(x2[i], o[1], epsilon = 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn row_count_formula(t_end in 0.01..0.5f64, dt_exp in 3.0..4.0f64, log_every in 1usize..40) {
        let dt = 10f64.powf(-dt_exp);
        let cfg = SimConfig::new(t_end, dt, log_every);
        let sys = open_loop(0.4, 1.0, 1.0, InputSignal::Constant { value: 0.1 });
        let log = simulate(&sys, &cfg, &InitialState::default()).unwrap();
        prop_assert_eq!(log.rows(), cfg.steps() / log_every + 1);
        prop_assert_eq!(log.rows(), cfg.expected_rows());
        let t = log.require("t").unwrap();
        prop_assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn h_nonincreasing_on_short_runs(x1 in -1.0..1.0f64, x2 in -1.0..1.0f64, x2i in -1.0..1.0f64,
                                     t1i in -1.0..1.0f64, t2i in -1.0..1.0f64, k1 in 1.0..5.0f64) {
        let sys = open_loop(0.4, 1.0, k1, InputSignal::Sine { amplitude: 1.0, omega: 1.0, phase: 0.0, offset: 0.0 });
        let init = InitialState {
            x1, x2, x3: 0.0,
            observer: ObserverState { x2i, theta1i: t1i, theta2i: t2i, x3hat: None },
        };
        let log = simulate(&sys, &SimConfig::new(1.0, 1e-4, 1), &init).unwrap();
        prop_assert_eq!(monotonicity_violations(log.require("H").unwrap()), 0);
    }

    #[test]
    fn closed_loop_identity_along_runs(k1 in 1.0..7.0f64, x1 in -0.5..0.5f64, x2 in -0.5..0.5f64) {
        let sys = ClosedLoopSystem::closed_loop(
            PlantModel::Mech(FrictionParams::new(0.4, 1.0, 100.0).unwrap()),
            ObserverGains::new(k1, 100.0).unwrap(),
            ControllerGains::default(),
            ReferenceGenerator::Sinusoid { amplitude: 0.5, omega: 2.0, phase: 0.0, offset: 0.0 },
        );
        let init = InitialState { x1, x2, ..Default::default() };
        let log = simulate(&sys, &SimConfig::new(0.5, 1e-4, 10), &init).unwrap();
        let (u, us, eps) = (log.require("u").unwrap(), log.require("u_star").unwrap(), log.require("epsilon_t").unwrap());
        for i in 0..log.rows() {
            let scale = 1.0 + u[i].abs() + us[i].abs() + eps[i].abs();
            prop_assert!((u[i] - us[i] - eps[i]).abs() <= 1e-12 * scale);
        }
    }
}
