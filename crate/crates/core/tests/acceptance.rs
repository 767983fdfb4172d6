//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! `cargo test --release -p hmm-core --test acceptance -- 1 4 11` runs a subset.

use std::io::Write;
use std::time::{Duration, Instant};

use hmm_core::geometry::unit_square;
use hmm_core::homogenize::{frozen_tensor, homogenized_tensor};
use hmm_core::kernels::Kernel;
use hmm_core::lowfields::{newell_entry, DemagSetup, ExternalFieldSchedule, LowerField, COMPONENTS};
use hmm_core::macro_fem::{HomogenizedFlux, MacroSolver, NodalField, Stepper};
use hmm_core::material::{CoefficientKind, MaterialCoefficient};
use hmm_core::micro::{evolve, stable_dt_safety, MicroConfig, MicroState};
use hmm_core::runner::{convergence_study, l2_error, run, SimConfig};
use hmm_core::upscale::{compute_flux, parameter_sweep, Kernels, PatchProblem, SweepAxis};
use hmm_core::{Mat32, Point, Vec3};
use rand::{Rng, SeedableRng};

type Outcome = Result<(bool, String), String>;

fn say(line: &str) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
    let _ = err.flush();
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn tensor_check(kind: CoefficientKind, expected: [f64; 4], tol: f64) -> Outcome {
    let coeff = MaterialCoefficient::new(kind, 0.1).map_err(e)?;
    let t = frozen_tensor(&coeff, Point::zeros(), 256).map_err(e)?;
    let m = t.matrix();
    let got = [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]];
    let dev = got.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((dev <= tol, format!("A^H = {got:.4?}, max deviation {dev:.2e} (tol {tol:.0e})")))
}

fn c1() -> Outcome {
    tensor_check(CoefficientKind::PeriodicProduct, [1.057, 0.118, 0.118, 1.057], 5e-3)
}

fn c2() -> Outcome {
    tensor_check(CoefficientKind::PeriodicExp, [1.014, -0.234, -0.234, 1.04], 1e-2)
}

fn c3() -> Outcome {
    let t = homogenized_tensor(|y| 2.0 + (std::f64::consts::TAU * y.x).sin(), 256).map_err(e)?;
    let m = t.matrix();
    let dev = (m[(0, 0)] - 3f64.sqrt()).abs().max((m[(1, 1)] - 2.0).abs()).max(m[(0, 1)].abs());
    Ok((dev <= 1e-3, format!("diag ({:.5}, {:.5}) vs (sqrt 3, 2), deviation {dev:.2e}", m[(0, 0)], m[(1, 1)])))
}

fn c4() -> Outcome {
    let mut worst_mass: f64 = 0.0;
    let mut worst_moment: f64 = 0.0;
    for (p, q, one_sided) in [(0, 0, false), (1, 3, false), (3, 7, false), (3, 7, true)] {
        let k = Kernel::new(p, q, one_sided).map_err(e)?;
        let (a, b) = k.support();
        worst_mass = worst_mass.max((simpson(|x| k.eval(x), a, b, 20000) - 1.0).abs());
        for r in 1..=p {
            let mom = simpson(|x| k.eval(x) * x.powi(r as i32), a, b, 20000);
            worst_moment = worst_moment.max(mom.abs());
        }
    }
    Ok((
        worst_mass <= 1e-12 && worst_moment <= 1e-10,
        format!("max |mass - 1| = {worst_mass:.1e}, max |moment| = {worst_moment:.1e}"),
    ))
}

fn c5() -> Outcome {
    let eps = 1e-3;
    let coeff = MaterialCoefficient::new(CoefficientKind::PeriodicProduct, eps).map_err(e)?;
    let safety = stable_dt_safety(1.2, coeff.a_max(), 0.9);
    let cfg = MicroConfig::from_factors(eps, 2.8, 4.8, 0.45, 10, 1.2, safety).map_err(e)?;
    let g = Mat32::new(0.3, -0.2, 0.1, 0.4, -0.5, 0.2);
    let m0 = Vec3::new(0.6, 0.0, 0.8);
    let state = MicroState::from_fn(Point::new(0.1, 0.2), &coeff, &cfg, |xi| m0 + g * xi).map_err(e)?;
    let mut drift: f64 = 0.0;
    let out = evolve(state, &cfg, |_, _, s| drift = drift.max(s.max_norm_drift())).map_err(e)?;
    Ok((drift <= 1e-10, format!("max norm drift {drift:.1e} over {} steps", out.steps())))
}

fn c6() -> Outcome {
    let eps = 1e-3;
    let c = 1.7;
    let coeff = MaterialCoefficient::constant(c).map_err(e)?;
    let cfg = MicroConfig::from_factors(eps, 2.8, 4.8, 0.45, 8, 1.2, stable_dt_safety(1.2, c, 0.9)).map_err(e)?;
    let mesh = unit_square(1).map_err(e)?;
    let bary = mesh.element(0).barycenter;
    let mut rng = rand::rngs::StdRng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let g = Mat32::from_fn(|_, _| rng.gen_range(-1.0..1.0));
        let m0 = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 1.0).normalize();
        let vals: Vec<Vec3> = mesh.nodes().iter().map(|&x| m0 + g * (x - bary)).collect();
        let f = compute_flux(&mesh, &vals, 0, &coeff, &cfg, &Kernels::default()).map_err(e)?;
        worst = worst.max((f - g * c).norm());
    }
    Ok((worst <= 1e-8, format!("max |F - aG| = {worst:.1e}")))
}

fn upscaling_cfg() -> Result<SimConfig, String> {
    SimConfig::experiment(
        "circle",
        &[
            ("coefficient.name", "locally_periodic"),
            ("epsilon", "1e-4"),
            ("micro.mu", "3"),
            ("micro.mu_prime", "15"),
            ("micro.eta", "1"),
        ],
    )
    .map_err(e)
}

fn upscale_error(cfg: &SimConfig, axis: SweepAxis, values: &[f64], h: f64) -> Result<Vec<f64>, String> {
    let coeff = cfg.coefficient().map_err(e)?;
    let micro = cfg.micro_config(&coeff).map_err(e)?;
    let kernels = cfg.kernels().map_err(e)?;
    let problem = PatchProblem::equilateral(Point::zeros(), h, PatchProblem::default_field).map_err(e)?;
    let reference = frozen_tensor(&coeff, Point::zeros(), cfg.micro.points_per_eps).map_err(e)?;
    let reports = parameter_sweep(axis, values, &micro, &coeff, &problem, &kernels, &reference).map_err(e)?;
    Ok(reports.iter().map(|r| r.error).collect())
}

fn c7() -> Outcome {
    let cfg = upscaling_cfg()?;
    let errors = [0.4, 0.2, 0.1]
        .iter()
        .map(|&h| upscale_error(&cfg, SweepAxis::Eta, &[1.0], h).map(|v| v[0]))
        .collect::<Result<Vec<_>, _>>()?;
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|r| (1.5..=2.8).contains(r));
    Ok((ok, format!("errors {}, ratios {ratios:.2?}", sci(&errors))))
}

/// Monotone decrease until the tail, then within 20% of the last value.
fn flat_from(errors: &[f64], start: usize) -> bool {
    let last = *errors.last().unwrap();
    errors[start..].iter().all(|v| (v - last).abs() <= 0.2 * last)
}

fn c8() -> Outcome {
    let cfg = upscaling_cfg()?;
    let etas = [0.1, 0.2, 0.5, 1.0, 2.0, 4.0];
    let eta = upscale_error(&cfg, SweepAxis::Eta, &etas, 0.1)?;
    let knee =
        eta.iter().position(|&v| (v - eta[eta.len() - 1]).abs() <= 0.2 * eta[eta.len() - 1]).unwrap_or(eta.len());
    let eta_ok = eta[..=knee.min(eta.len() - 1)].windows(2).all(|w| w[1] <= w[0])
        && flat_from(&eta, knee)
        && eta[0] > 1.2 * eta[eta.len() - 1];
    let mus = [1.5, 2.0, 2.5, 3.0, 4.0, 5.0];
    let mu = upscale_error(&cfg, SweepAxis::Mu, &mus, 0.1)?;
    let mu_ok = flat_from(&mu, 2);
    let mu_primes = [4.0, 5.0, 8.0, 10.0, 15.0];
    let mp = upscale_error(&cfg, SweepAxis::MuPrime, &mu_primes, 0.1)?;
    let mp_ok = flat_from(&mp, 2);
    Ok((
        eta_ok && mu_ok && mp_ok,
        format!(
            "eta {etas:?} -> {} (flat from {}); mu {mus:?} -> {}; mu' {mu_primes:?} -> {}",
            sci(&eta),
            etas.get(knee).copied().unwrap_or(f64::NAN),
            sci(&mu),
            sci(&mp)
        ),
    ))
}

fn c9() -> Outcome {
    let common = [("t_final", "0.25"), ("alpha", "0.2"), ("epsilon", "1e-4"), ("micro.points_per_eps", "6")];
    let setup1 = SimConfig::experiment("circle", &common).map_err(e)?;
    let t1 = convergence_study(&setup1, &[0, 1, 2]).map_err(e)?;
    let setup2 = setup1
        .with("micro.mu", "2.1")
        .and_then(|c| c.with("micro.mu_prime", "3.25"))
        .and_then(|c| c.with("micro.eta", "0.15"))
        .map_err(e)?;
    let t2 = convergence_study(&setup2, &[0, 1, 2]).map_err(e)?;
    let mean1 = t1.mean_order().unwrap_or(f64::NAN);
    let last2 = t2.orders().last().copied().unwrap_or(f64::NAN);
    let errs = |t: &hmm_core::runner::ErrorTable| t.rows.iter().map(|r| r.error).collect::<Vec<_>>();
    Ok((
        mean1 >= 1.6 && last2 < 1.2,
        format!(
            "setup 1 errors {} orders {:.2?} (mean {mean1:.2}); setup 2 errors {} orders {:.2?}",
            sci(&errs(&t1)),
            t1.orders(),
            sci(&errs(&t2)),
            t2.orders()
        ),
    ))
}

fn precession_errors(stepper: Stepper, counts: &[usize]) -> Result<Vec<f64>, String> {
    let (theta0, phi0, h, alpha, t_final) = (1.2f64, 0.3f64, 4.0, 0.1, 1.0);
    let exact = |t: f64| {
        let theta = 2.0 * ((theta0 / 2.0).tan() * (-alpha * h * t).exp()).atan();
        let phi = phi0 + h * t;
        Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
    };
    let mesh = unit_square(1).map_err(e)?;
    let field = LowerField {
        schedule: ExternalFieldSchedule::new(vec![(0.0, Vec3::new(0.0, 0.0, h))]).map_err(e)?,
        demag: None,
    };
    let flux = HomogenizedFlux::scalar(1.0).map_err(e)?;
    let solver = MacroSolver::new(&mesh, alpha).map_err(e)?;
    counts
        .iter()
        .map(|&n| {
            let dt = t_final / n as f64;
            let mut m = NodalField::interpolate(&mesh, |_| exact(0.0));
            for k in 0..n {
                m = solver.step(stepper, &m, k as f64 * dt, dt, &flux, &field).map_err(e)?;
            }
            Ok((m.values()[0] - exact(t_final)).norm())
        })
        .collect()
}

fn circle_time_errors(stepper: Stepper, dts: &[f64]) -> Result<Vec<f64>, String> {
    let base = SimConfig::experiment("circle", &[("mode", "homogenized"), ("mesh.level", "1"), ("t_final", "0.2")])
        .map_err(e)?;
    let reference = run(&base.with("dt.value", &format!("{}", dts[dts.len() - 1] / 16.0)).map_err(e)?).map_err(e)?;
    let name = if stepper == Stepper::Rk4 { "rk4" } else { "euler" };
    dts.iter()
        .map(|dt| {
            let cfg = base.with("stepper", name).and_then(|c| c.with("dt.value", &format!("{dt}"))).map_err(e)?;
            let out = run(&cfg).map_err(e)?;
            l2_error(&out.mesh, &out.field, &reference.mesh, &reference.field).map_err(e)
        })
        .collect()
}

fn c10() -> Outcome {
    let counts = [100, 200, 400, 800];
    let p_rk4 = precession_errors(Stepper::Rk4, &counts)?;
    let p_euler = precession_errors(Stepper::Euler, &counts)?;
    let dts = [2e-3, 1e-3, 5e-4];
    let c_rk4 = circle_time_errors(Stepper::Rk4, &dts)?;
    let c_euler = circle_time_errors(Stepper::Euler, &dts)?;
    let mean = |v: &[f64]| orders(v).iter().sum::<f64>() / (v.len() - 1) as f64;
    let all = [mean(&p_rk4), mean(&p_euler), mean(&c_rk4), mean(&c_euler)];
    let in_band = all.iter().all(|o| (0.8..=1.3).contains(o));
    let dominated = p_rk4.iter().zip(&p_euler).chain(c_rk4.iter().zip(&c_euler)).all(|(a, b)| a <= b);
    Ok((
        in_band && dominated,
        format!(
            "orders: precession rk4 {:.2}, euler {:.2}; circle rk4 {:.2}, euler {:.2}; rk4 <= euler everywhere: {dominated}; \
             errors: precession rk4 {} euler {}, circle rk4 {} euler {}",
            all[0],
            all[1],
            all[2],
            all[3],
            sci(&p_rk4),
            sci(&p_euler),
            sci(&c_rk4),
            sci(&c_euler)
        ),
    ))
}

fn c11() -> Outcome {
    let mut rng = rand::rngs::StdRng::seed_from_u64(11);
    let mut fft_err: f64 = 0.0;
    let mut sym_err: f64 = 0.0;
    for n in [16usize, 32] {
        let setup = DemagSetup::new(n, n, 0.1, 0.1, 0.02, Point::zeros()).map_err(e)?;
        let cells: Vec<Vec3> = (0..n * n)
            .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let fast = setup.demag_field(&cells).map_err(e)?;
        let w = 2 * n - 1;
        let table: Vec<nalgebra::Matrix3<f64>> = (0..w * w)
            .map(|k| {
                let lag = ((k % w) as i64 - n as i64 + 1, (k / w) as i64 - n as i64 + 1);
                let mut t = nalgebra::Matrix3::zeros();
                for (c, &(r, s)) in COMPONENTS.iter().enumerate() {
                    t[(r, s)] = setup.tensor(lag, c);
                    t[(s, r)] = t[(r, s)];
                }
                t
            })
            .collect();
        for j in 0..n {
            for i in 0..n {
                let mut h = Vec3::zeros();
                for l in 0..n {
                    for k in 0..n {
                        h -= table[(j + n - 1 - l) * w + (i + n - 1 - k)] * cells[l * n + k];
                    }
                }
                fft_err = fft_err.max((h - fast[j * n + i]).norm());
            }
        }
        let other: Vec<Vec3> = cells.iter().map(|v| Vec3::new(v.y, -v.z, 0.5 * v.x)).collect();
        let h_other = setup.demag_field(&other).map_err(e)?;
        let a: f64 = other.iter().zip(&fast).map(|(x, y)| x.dot(y)).sum();
        let b: f64 = cells.iter().zip(&h_other).map(|(x, y)| x.dot(y)).sum();
        sym_err = sym_err.max((a - b).abs() / a.abs().max(1.0));
    }
    let h = [0.1, 0.13, 0.02];
    let trace_self = (0..3).map(|c| newell_entry([0, 0, 0], h, c)).sum::<f64>();
    let mut trace_err = (trace_self - 1.0).abs();
    for lag in [[1, 0, 0], [3, -2, 0], [7, 5, 0]] {
        trace_err = trace_err.max((0..3).map(|c| newell_entry(lag, h, c)).sum::<f64>().abs());
    }
    let cube = (0..3).map(|c| (newell_entry([0, 0, 0], [0.5; 3], c) - 1.0 / 3.0).abs()).fold(0.0, f64::max);
    Ok((
        fft_err <= 1e-10 && trace_err <= 1e-6 && cube <= 1e-6 && sym_err <= 1e-10,
        format!("fft vs direct {fft_err:.1e}, trace {trace_err:.1e}, cube {cube:.1e}, symmetry {sym_err:.1e}"),
    ))
}

fn homogenization_gap(eps: f64) -> Result<f64, String> {
    let p = 6;
    let cfg = SimConfig::experiment(
        "square",
        &[
            ("epsilon", &format!("{eps}")),
            ("t_final", "0.1"),
            ("fine.points_per_eps", &format!("{p}")),
            ("homogenize.resolution", &format!("{p}")),
        ],
    )
    .map_err(e)?;
    let fine = run(&cfg.with("mode", "fine_reference").map_err(e)?).map_err(e)?;
    let hom = run(&cfg.with("mode", "homogenized").map_err(e)?).map_err(e)?;
    l2_error(&hom.mesh, &hom.field, &fine.mesh, &fine.field).map_err(e)
}

fn c12() -> Outcome {
    let coarse = homogenization_gap(0.05)?;
    let fine = homogenization_gap(0.025)?;
    let factor = coarse / fine;
    Ok((
        (1.5..=2.6).contains(&factor),
        format!("gap {coarse:.3e} at eps 0.05, {fine:.3e} at eps 0.025, factor {factor:.2}"),
    ))
}

fn c13() -> Outcome {
    let p6 = ("micro.points_per_eps", "6");
    let ring = run(&SimConfig::experiment("ring", &[p6]).map_err(e)?).map_err(e)?;
    let ring_ok = ring.field.max_norm_defect() < 1e-10;
    let mumag =
        run(&SimConfig::experiment("mumag4", &[p6, ("mesh.nx", "8"), ("mesh.ny", "2")]).map_err(e)?).map_err(e)?;
    let crossing = mumag.zero_crossing;
    let circle = SimConfig::experiment("circle", &[p6, ("mesh.level", "1"), ("t_final", "1")]).map_err(e)?;
    let hmm = run(&circle).map_err(e)?;
    let hom = run(&circle.with("mode", "homogenized").map_err(e)?).map_err(e)?;
    let avg = run(&circle.with("mode", "averaged_coefficient").map_err(e)?).map_err(e)?;
    let d_hmm = l2_error(&hmm.mesh, &hmm.field, &hom.mesh, &hom.field).map_err(e)?;
    let d_avg = l2_error(&avg.mesh, &avg.field, &hom.mesh, &hom.field).map_err(e)?;
    Ok((
        ring_ok && crossing.is_some() && mumag.relax_converged == Some(true) && d_hmm < d_avg,
        format!(
            "ring {} steps; mumag relaxed {:?}, <M_x> crosses zero at {crossing:?}; circle T=1 distance to homogenized: hmm {d_hmm:.3e}, a_avg {d_avg:.3e}",
            ring.steps, mumag.relax_converged
        ),
    ))
}

struct Criterion {
    id: usize,
    budget: Duration,
    /// Worker count the budget was stated for.
    workers: usize,
    check: fn() -> Outcome,
}

impl Criterion {
    fn new(id: usize, budget: Duration, check: fn() -> Outcome) -> Self {
        Self { id, budget, workers: 1, check }
    }

    /// Budget stretched in proportion when fewer workers are available.
    fn effective_budget(&self, available: usize) -> Duration {
        if available >= self.workers {
            self.budget
        } else {
            self.budget * self.workers.div_ceil(available) as u32
        }
    }
}

fn main() {
    let minutes = |m: u64| Duration::from_secs(60 * m);
    let criteria = [
        Criterion::new(1, Duration::from_secs(30), c1),
        Criterion::new(2, Duration::from_secs(30), c2),
        Criterion::new(3, Duration::from_secs(10), c3),
        Criterion::new(4, Duration::from_secs(1), c4),
        Criterion::new(5, Duration::from_secs(5), c5),
        Criterion::new(6, Duration::from_secs(5), c6),
        Criterion::new(7, minutes(10), c7),
        Criterion::new(8, minutes(20), c8),
        Criterion { workers: 4, ..Criterion::new(9, minutes(60), c9) },
        Criterion::new(10, minutes(10), c10),
        Criterion::new(11, Duration::from_secs(30), c11),
        Criterion::new(12, minutes(30), c12),
        Criterion::new(13, minutes(60), c13),
    ];
    // Numeric arguments select criteria; flags forwarded by cargo are ignored.
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let available = rayon::current_num_threads();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| wanted.is_empty() || wanted.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.check)();
        let took = start.elapsed();
        let budget = c.effective_budget(available);
        let in_time = took <= budget;
        let (ok, detail) = match outcome {
            Ok((ok, detail)) => (ok && in_time, detail),
            Err(msg) => (false, format!("error: {msg}")),
        };
        if !ok {
            failed += 1;
        }
        say(&format!(
            "criterion {:>2}: {} {detail} [{:.1} s, budget {} s{}]",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        ));
    }
    if failed > 0 {
        say(&format!("{failed} criteria failed"));
        std::process::exit(1);
    }
}
