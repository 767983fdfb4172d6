use hmm_core::geometry::{disk, unit_square};
use hmm_core::lowfields::{ExternalFieldSchedule, LowerField};
use hmm_core::macro_fem::{exchange_energy, HomogenizedFlux, MacroSolver, NodalField, Stepper, ZeroField};
use hmm_core::runner::{l2_error, run, SimConfig};
use hmm_core::{Point, Vec3};
use proptest::prelude::*;

/// Closed-form uniform precession about `h e_3`.
fn precession(theta0: f64, phi0: f64, h: f64, alpha: f64, t: f64) -> Vec3 {
    let theta = 2.0 * ((theta0 / 2.0).tan() * (-alpha * h * t).exp()).atan();
    let phi = phi0 + h * t;
    Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
}

fn precession_error(stepper: Stepper, steps: usize) -> f64 {
    let mesh = unit_square(2).unwrap();
    let (theta0, phi0, h, alpha, t_final) = (1.2, 0.3, 4.0, 0.1, 1.0);
    let m0 = precession(theta0, phi0, h, alpha, 0.0);
    let mut m = NodalField::interpolate(&mesh, |_| m0);
    let field =
        LowerField { schedule: ExternalFieldSchedule::new(vec![(0.0, Vec3::new(0.0, 0.0, h))]).unwrap(), demag: None };
    let flux = HomogenizedFlux::scalar(1.0).unwrap();
    let solver = MacroSolver::new(&mesh, alpha).unwrap();
    let dt = t_final / steps as f64;
    for k in 0..steps {
        m = solver.step(stepper, &m, k as f64 * dt, dt, &flux, &field).unwrap();
    }
    let exact = precession(theta0, phi0, h, alpha, t_final);
    m.values().iter().map(|v| (v - exact).norm()).fold(0.0, f64::max)
}

#[test]
fn uniform_precession_matches_closed_form() {
    let rk4 = precession_error(Stepper::Rk4, 400);
    let euler = precession_error(Stepper::Euler, 400);
    assert!(rk4 < 1e-8, "rk4 {rk4}");
    assert!(euler < 5e-2, "euler {euler}");
    assert!(rk4 < euler);
}

#[test]
fn solver_modes_agree_for_constant_coefficient() {
    let base = SimConfig::experiment(
        "square",
        &[
            ("mesh.nx", "4"),
            ("mesh.ny", "4"),
            ("coefficient.name", "constant"),
            ("coefficient.value", "1.3"),
            ("epsilon", "1e-3"),
            ("t_final", "0.01"),
            ("dt.value", "1e-3"),
            ("micro.points_per_eps", "4"),
            ("micro.mu", "1.5"),
            ("micro.mu_prime", "2.5"),
            ("micro.eta", "0.1"),
        ],
    )
    .unwrap();
    let runs: Vec<_> = ["hmm", "homogenized", "averaged_coefficient"]
        .iter()
        .map(|mode| run(&base.with("mode", mode).unwrap()).unwrap())
        .collect();
    for r in &runs[1..] {
        let d = l2_error(&runs[0].mesh, &runs[0].field, &r.mesh, &r.field).unwrap();
        assert!(d < 1e-6, "distance {d}");
    }
}

#[test]
fn damped_exchange_energy_decreases() {
    let mesh = disk(1).unwrap();
    let flux = HomogenizedFlux::scalar(1.0).unwrap();
    let solver = MacroSolver::new(&mesh, 0.5).unwrap();
    let mut m = NodalField::interpolate(&mesh, |x| Vec3::new(x.x, 0.5 * x.y, 1.0).normalize());
    let mut e = exchange_energy(&mesh, &m, &flux);
    for k in 0..40 {
        m = solver.step(Stepper::Rk4, &m, k as f64 * 1e-3, 1e-3, &flux, &ZeroField).unwrap();
        let next = exchange_energy(&mesh, &m, &flux);
        assert!(next <= e * (1.0 + 1e-9), "step {k}: {next} > {e}");
        e = next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn steps_keep_unit_nodal_norms(
        a in prop::array::uniform6(-1.5f64..1.5),
        alpha in 0.0f64..1.0,
        rk4 in any::<bool>(),
    ) {
        let mesh = unit_square(4).unwrap();
        let f = |x: Point| Vec3::new(a[0] + a[1] * x.x, a[2] + a[3] * x.y, 1.0 + a[4] * x.x * x.y + a[5]);
        let m = NodalField::interpolate(&mesh, f).renormalize().unwrap();
        let flux = HomogenizedFlux::scalar(1.1).unwrap();
        let solver = MacroSolver::new(&mesh, alpha).unwrap();
        let stepper = if rk4 { Stepper::Rk4 } else { Stepper::Euler };
        let next = solver.step(stepper, &m, 0.0, 1e-3, &flux, &ZeroField).unwrap();
        prop_assert!(next.max_norm_defect() < 1e-12);
    }

    #[test]
    fn uniform_states_are_stationary_without_fields(
        v in prop::array::uniform3(-1.0f64..1.0),
        alpha in 0.0f64..1.0,
    ) {
        let v = Vec3::from(v);
        prop_assume!(v.norm() > 0.1);
        let mesh = disk(1).unwrap();
        let m = NodalField::interpolate(&mesh, |_| v.normalize());
        let flux = HomogenizedFlux::scalar(2.0).unwrap();
        let solver = MacroSolver::new(&mesh, alpha).unwrap();
        let next = solver.step(Stepper::Rk4, &m, 0.0, 0.01, &flux, &ZeroField).unwrap();
        for (a, b) in next.values().iter().zip(m.values()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
