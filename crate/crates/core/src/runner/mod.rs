//! Configuration, experiment registry, the macro time loop and output.

pub mod config;
pub mod experiments;
pub mod fine;
pub mod metrics;
pub mod output;

use std::path::PathBuf;

use log::{debug, info, warn};

use crate::geometry::{disk, load_msh, rectangle, ring, TriMesh};
use crate::homogenize::{homogenized_tensor, HomTensor};
use crate::lowfields::{DemagSetup, ExternalFieldSchedule, LowerField};
use crate::macro_fem::{
    assemble_mass, spectral_dt, spectral_radius, stable_dt, FieldProvider, FluxProvider, HmmFlux, HomogenizedFlux,
    MacroSolver, NodalField, Stepper,
};
use crate::material::{CoefficientKind, MaterialCoefficient};
use crate::micro::{stable_dt_safety, MicroConfig};
use crate::upscale::Kernels;
use crate::{Error, Result, Vec3};

pub use config::{load_config, parse_config, parse_override, render_config, ConfigMap};
pub use experiments::{preset, InitialCondition, EXPERIMENTS};
pub use metrics::{convergence_study, l2_error, mean_component, relax_to_equilibrium, zero_crossing, ErrorTable};

/// Safety margin applied to the micro stability bound when `micro.dt_safety = auto`.
pub const AUTO_DT_MARGIN: f64 = 0.9;

/// Which effective flux drives the macro solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Hmm,
    Homogenized,
    AveragedCoefficient,
    FineReference,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hmm" => Ok(Mode::Hmm),
            "homogenized" => Ok(Mode::Homogenized),
            "averaged_coefficient" => Ok(Mode::AveragedCoefficient),
            "fine_reference" => Ok(Mode::FineReference),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (hmm, homogenized, averaged_coefficient, fine_reference)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Hmm => "hmm",
            Mode::Homogenized => "homogenized",
            Mode::AveragedCoefficient => "averaged_coefficient",
            Mode::FineReference => "fine_reference",
        })
    }
}

/// Macro mesh source.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Disk {
        level: usize,
    },
    Ring {
        r_in: f64,
        r_out: f64,
        sectors: usize,
        level: usize,
    },
    /// `nx x ny` cells, doubled `level` times.
    Rectangle {
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
        level: usize,
    },
    File(PathBuf),
}

impl MeshSpec {
    pub fn build(&self) -> Result<TriMesh> {
        match self {
            MeshSpec::Disk { level } => disk(*level),
            MeshSpec::Ring { r_in, r_out, sectors, level } => ring(*r_in, *r_out, *sectors, *level),
            MeshSpec::Rectangle { lx, ly, nx, ny, level } => rectangle(*lx, *ly, nx << level, ny << level),
            MeshSpec::File(path) => load_msh(path),
        }
    }

    pub fn level(&self) -> Option<usize> {
        match self {
            MeshSpec::Disk { level } | MeshSpec::Ring { level, .. } | MeshSpec::Rectangle { level, .. } => Some(*level),
            MeshSpec::File(_) => None,
        }
    }

    /// Same family at another refinement level.
    pub fn with_level(&self, new: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            MeshSpec::Disk { level } | MeshSpec::Ring { level, .. } | MeshSpec::Rectangle { level, .. } => *level = new,
            MeshSpec::File(_) => return Err(Error::Unsupported("mesh files have no refinement levels".into())),
        }
        Ok(out)
    }
}

/// Micro problem parameters in units of ε (lengths) and ε² (time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicroSettings {
    pub mu: f64,
    pub mu_prime: f64,
    pub eta: f64,
    pub points_per_eps: usize,
    pub alpha: f64,
    /// `None` selects the automatic bound.
    pub dt_safety: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemagSettings {
    /// Cell edge; defaults to half the shortest mesh edge.
    pub cell: Option<f64>,
    pub thickness: f64,
    /// Factor converting demag fields in units of Ms to solver units.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxSettings {
    pub alpha: f64,
    pub tolerance: f64,
    pub max_steps: usize,
}

/// Fully resolved simulation parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub experiment: String,
    pub mode: Mode,
    pub stepper: Stepper,
    pub mesh: MeshSpec,
    pub coefficient: CoefficientKind,
    pub epsilon: f64,
    pub alpha: f64,
    pub t_final: f64,
    /// `C` in `Δt = C H_min^2`; `None` selects the spectral estimate.
    pub dt_c: Option<f64>,
    /// Explicit `Δt`, bypassing `dt_c` when set.
    pub dt: Option<f64>,
    /// `Δt ≤ field_dt / (|H_ext| + demag scale)`.
    pub field_dt: f64,
    pub init: InitialCondition,
    pub micro: MicroSettings,
    pub kernels: [usize; 4],
    pub hom_resolution: usize,
    pub schedule: ExternalFieldSchedule,
    pub demag: Option<DemagSettings>,
    pub relax: Option<RelaxSettings>,
    pub fine_points_per_eps: usize,
    pub snapshots: usize,
    pub output: Option<PathBuf>,
    /// Track the first sign change of `<M_x>` and stop there.
    pub stop_at_zero_crossing: bool,
    pub seed: u64,
    /// Every key with its effective value; rendering it reproduces the run.
    pub resolved: ConfigMap,
}

/// Parses `x y z` or `x, y, z`.
pub fn parse_vec3(s: &str) -> Result<Vec3> {
    let parts: Vec<&str> = s.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("expected three components, got '{s}'")));
    }
    let mut v = Vec3::zeros();
    for (i, p) in parts.iter().enumerate() {
        v[i] = p
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Config(format!("bad vector component '{p}'")))?;
    }
    Ok(v)
}

/// Parses `t0: x y z; t1: x y z`.
pub fn parse_schedule(s: &str) -> Result<ExternalFieldSchedule> {
    let mut segments = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty() && *p != "none") {
        let (t, v) = part
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("schedule entry '{part}' must look like 't: x y z'")))?;
        let t: f64 = t.trim().parse().map_err(|_| Error::Config(format!("bad activation time '{t}'")))?;
        segments.push((t, parse_vec3(v)?));
    }
    ExternalFieldSchedule::new(segments).map_err(|e| Error::Config(e.to_string()))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("key '{key}' must be positive, got {v}")))
    }
}

impl SimConfig {
    /// Preset of `map["experiment"]` (default `circle`) overlaid with `map`.
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let name = map.get("experiment").map_or("circle", String::as_str);
        let mut merged = preset(name)?;
        merged.extend(map.iter().map(|(k, v)| (k.clone(), v.clone())));
        Self::from_resolved(&merged)
    }

    /// Parses a config file's text and applies `key=value` overrides.
    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self> {
        let mut map = parse_config(text)?;
        for o in overrides {
            let (k, v) = parse_override(o)?;
            map.insert(k, v);
        }
        Self::from_map(&map)
    }

    /// Named preset with overrides.
    pub fn experiment(name: &str, overrides: &[(&str, &str)]) -> Result<Self> {
        let mut map = ConfigMap::new();
        map.insert("experiment".into(), name.into());
        for (k, v) in overrides {
            map.insert((*k).into(), (*v).into());
        }
        Self::from_map(&map)
    }

    fn from_resolved(map: &ConfigMap) -> Result<Self> {
        let r = config::Reader::new(map);
        let experiment = r.string("experiment", "circle");
        let mode: Mode = r.parse("mode", Mode::Hmm)?;
        let stepper: Stepper = r.string("stepper", "rk4").parse()?;
        let mesh_kind = r.string("mesh.kind", "disk");
        let level = r.parse("mesh.level", 0usize)?;
        let mesh = match mesh_kind.as_str() {
            "disk" => MeshSpec::Disk { level },
            "ring" => MeshSpec::Ring {
                r_in: positive("mesh.r_in", r.f64("mesh.r_in", 0.4)?)?,
                r_out: positive("mesh.r_out", r.f64("mesh.r_out", 1.0)?)?,
                sectors: r.parse("mesh.sectors", 12usize)?,
                level,
            },
            "rectangle" => MeshSpec::Rectangle {
                lx: positive("mesh.lx", r.f64("mesh.lx", 1.0)?)?,
                ly: positive("mesh.ly", r.f64("mesh.ly", 1.0)?)?,
                nx: r.parse("mesh.nx", 8usize)?,
                ny: r.parse("mesh.ny", 8usize)?,
                level,
            },
            "file" => MeshSpec::File(PathBuf::from(r.string("mesh.path", "mesh.msh"))),
            other => return Err(Error::Config(format!("unknown mesh kind '{other}' (disk, ring, rectangle, file)"))),
        };
        if level > 10 {
            return Err(Error::Config(format!("mesh.level {level} is too large")));
        }
        let coef_name = r.string("coefficient.name", "periodic_product");
        let mut params = std::collections::BTreeMap::new();
        for key in ["value", "mean", "amplitude"] {
            let full = format!("coefficient.{key}");
            if let Some(v) = r.raw(&full) {
                let x: f64 = v.parse().map_err(|_| Error::Config(format!("key '{full}': cannot parse '{v}'")))?;
                r.record(&full, v);
                params.insert(key.to_string(), x);
            }
        }
        let coefficient = CoefficientKind::by_name(&coef_name, &params)?;
        let epsilon = r.f64("epsilon", 1e-4)?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let alpha = r.f64("alpha", 0.2)?;
        if alpha < 0.0 {
            return Err(Error::Config(format!("alpha must be non-negative, got {alpha}")));
        }
        let t_final = r.f64("t_final", 1.0)?;
        if t_final < 0.0 {
            return Err(Error::Config(format!("t_final must be non-negative, got {t_final}")));
        }
        let dt_c = match r.string("dt.c", "auto").as_str() {
            "auto" => None,
            v => {
                let c = v.parse::<f64>().map_err(|_| Error::Config(format!("key 'dt.c': cannot parse '{v}'")))?;
                if !(c > 0.0 && c < 1.0) {
                    return Err(Error::Config(format!("dt.c must lie in (0, 1), got {c}")));
                }
                Some(c)
            }
        };
        let dt = match r.string("dt.value", "auto").as_str() {
            "auto" => None,
            v => Some(positive(
                "dt.value",
                v.parse::<f64>().map_err(|_| Error::Config(format!("key 'dt.value': cannot parse '{v}'")))?,
            )?),
        };
        let field_dt = positive("dt.field", r.f64("dt.field", 1.0)?)?;
        let init = InitialCondition::by_name(&r.string("init", "vortex"))?;
        let micro = MicroSettings {
            mu: r.f64("micro.mu", 2.8)?,
            mu_prime: r.f64("micro.mu_prime", 4.8)?,
            eta: r.f64("micro.eta", 0.45)?,
            points_per_eps: r.parse("micro.points_per_eps", 10usize)?,
            alpha: r.f64("micro.alpha", 1.2)?,
            dt_safety: match r.string("micro.dt_safety", "auto").as_str() {
                "auto" => None,
                v => Some(
                    v.parse::<f64>()
                        .map_err(|_| Error::Config(format!("key 'micro.dt_safety': cannot parse '{v}'")))?,
                ),
            },
        };
        let kernels = [
            r.parse("kernel.p_x", 3usize)?,
            r.parse("kernel.q_x", 7usize)?,
            r.parse("kernel.p_t", 3usize)?,
            r.parse("kernel.q_t", 7usize)?,
        ];
        if kernels.iter().any(|&k| k > 20) {
            return Err(Error::Config("kernel orders above 20 are not supported".into()));
        }
        let hom_resolution = r.parse("homogenize.resolution", crate::homogenize::DEFAULT_RESOLUTION)?;
        if !(4..=2048).contains(&hom_resolution) {
            return Err(Error::Config(format!("homogenize.resolution must lie in [4, 2048], got {hom_resolution}")));
        }
        let schedule = parse_schedule(&r.string("field.schedule", "none"))?;
        let demag = if r.bool("demag.enabled", false)? {
            Some(DemagSettings {
                cell: match r.string("demag.cell", "auto").as_str() {
                    "auto" => None,
                    v => Some(positive(
                        "demag.cell",
                        v.parse::<f64>().map_err(|_| Error::Config(format!("key 'demag.cell': cannot parse '{v}'")))?,
                    )?),
                },
                thickness: positive("demag.thickness", r.f64("demag.thickness", 0.01)?)?,
                scale: r.f64("demag.scale", 1.0)?,
            })
        } else {
            None
        };
        let relax = if r.bool("relax.enabled", false)? {
            Some(RelaxSettings {
                alpha: r.f64("relax.alpha", 0.5)?,
                tolerance: r.f64("relax.tolerance", 1e-4)?,
                max_steps: r.parse("relax.max_steps", 20000usize)?,
            })
        } else {
            None
        };
        let fine_points_per_eps = r.parse("fine.points_per_eps", 6usize)?;
        let snapshots = r.parse("output.snapshots", 0usize)?;
        let output = match r.string("output.dir", "none").as_str() {
            "none" => None,
            d => Some(PathBuf::from(d)),
        };
        let stop_at_zero_crossing = r.bool("stop.zero_crossing", false)?;
        let seed = r.parse("seed", 0u64)?;
        r.finish()?;
        Ok(Self {
            experiment,
            mode,
            stepper,
            mesh,
            coefficient,
            epsilon,
            alpha,
            t_final,
            dt_c,
            dt,
            field_dt,
            init,
            micro,
            kernels,
            hom_resolution,
            schedule,
            demag,
            relax,
            fine_points_per_eps,
            snapshots,
            output,
            stop_at_zero_crossing,
            seed,
            resolved: r.resolved(),
        })
    }

    /// Copy with one key replaced, re-validated.
    pub fn with(&self, key: &str, value: &str) -> Result<Self> {
        let mut map = self.resolved.clone();
        map.insert(key.to_string(), value.to_string());
        Self::from_resolved(&map)
    }

    pub fn coefficient(&self) -> Result<MaterialCoefficient> {
        MaterialCoefficient::new(self.coefficient.clone(), self.epsilon)
    }

    pub fn micro_config(&self, coeff: &MaterialCoefficient) -> Result<MicroConfig> {
        let m = &self.micro;
        let safety = m.dt_safety.unwrap_or_else(|| stable_dt_safety(m.alpha, coeff.a_max(), AUTO_DT_MARGIN));
        MicroConfig::from_factors(self.epsilon, m.mu, m.mu_prime, m.eta, m.points_per_eps, m.alpha, safety)
    }

    pub fn kernels(&self) -> Result<Kernels> {
        let [px, qx, pt, qt] = self.kernels;
        Kernels::new(px, qx, pt, qt)
    }
}

/// Homogenized tensor for a periodic coefficient at the configured resolution.
pub fn periodic_tensor(coeff: &MaterialCoefficient, n: usize) -> Result<HomTensor> {
    if !coeff.is_periodic() {
        return Err(Error::Unsupported("the coefficient is not periodic; use frozen tensors".into()));
    }
    homogenized_tensor(|y| coeff.cell(crate::Point::zeros(), y), n)
}

/// Flux provider for `mode`.
pub fn flux_provider(cfg: &SimConfig, mesh: &TriMesh, mode: Mode) -> Result<Box<dyn FluxProvider>> {
    let coeff = cfg.coefficient()?;
    Ok(match mode {
        Mode::Hmm => Box::new(HmmFlux { cfg: cfg.micro_config(&coeff)?, kernels: cfg.kernels()?, coeff }),
        Mode::Homogenized => {
            if coeff.is_periodic() {
                Box::new(HomogenizedFlux::uniform(periodic_tensor(&coeff, cfg.hom_resolution)?))
            } else {
                Box::new(HomogenizedFlux::frozen(mesh, &coeff, cfg.hom_resolution.min(64))?)
            }
        }
        Mode::AveragedCoefficient => Box::new(HomogenizedFlux::scalar(coeff.average()?)?),
        Mode::FineReference => return Err(Error::Unsupported("the fine reference does not use a macro flux".into())),
    })
}

/// Lower-order field for `mesh`, optionally without the external field.
pub fn field_provider(cfg: &SimConfig, mesh: &TriMesh, with_external: bool) -> Result<LowerField> {
    let demag = match &cfg.demag {
        Some(d) => {
            let cell = d.cell.unwrap_or(0.5 * mesh.h_min());
            Some((DemagSetup::covering(mesh, cell, d.thickness)?, d.scale))
        }
        None => None,
    };
    Ok(LowerField {
        schedule: if with_external { cfg.schedule.clone() } else { ExternalFieldSchedule::default() },
        demag,
    })
}

/// Safety factor applied to the spectral step estimate when `dt.c = auto`.
pub const AUTO_MACRO_MARGIN: f64 = 0.8;

/// Upper bound on the eigenvalues of the effective exchange tensor of `mode`.
pub fn effective_bound(cfg: &SimConfig, mode: Mode) -> Result<f64> {
    let coeff = cfg.coefficient()?;
    match mode {
        Mode::AveragedCoefficient => coeff.average(),
        _ if coeff.is_periodic() => Ok(periodic_tensor(&coeff, 32)?.eigenvalues()[1]),
        _ => Ok(coeff.a_max()),
    }
}

/// Macro step size, fitted so that `horizon` is an integer number of steps.
///
/// With `dt.c = auto` the step keeps `Δt a λ_max(M⁻¹K) √(1+α²)` inside the RK4
/// stability region; otherwise `Δt = C H_min²`. Both are capped by the lower-order
/// field rate.
pub fn macro_dt(cfg: &SimConfig, mesh: &TriMesh, horizon: f64, mode: Mode, alpha: f64) -> Result<(f64, usize)> {
    let mut dt = match (cfg.dt, cfg.dt_c) {
        (Some(dt), _) => dt,
        (None, Some(c)) => stable_dt(mesh.h_min(), c)?,
        (None, None) => {
            let lambda = spectral_radius(mesh, &assemble_mass(mesh)?)?;
            spectral_dt(lambda, effective_bound(cfg, mode)?, alpha, AUTO_MACRO_MARGIN)?
        }
    };
    let ext = cfg.schedule.segments().iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    let rate = ext + cfg.demag.map_or(0.0, |d| d.scale.abs());
    if rate > 0.0 {
        dt = dt.min(cfg.field_dt / rate);
    }
    if horizon <= 0.0 {
        return Ok((dt, 0));
    }
    // Ignore rounding noise so that an exact divisor keeps the requested step.
    let steps = (horizon / dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    Ok((horizon / steps as f64, steps))
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub mesh: TriMesh,
    pub field: NodalField,
    pub times: Vec<f64>,
    /// Area-weighted mean magnetization after each step (index 0 is the start).
    pub means: Vec<Vec3>,
    pub zero_crossing: Option<f64>,
    pub dt: f64,
    pub steps: usize,
    pub relax_converged: Option<bool>,
    pub files: Vec<PathBuf>,
}

fn area_mean(mesh: &TriMesh, m: &NodalField) -> Vec3 {
    Vec3::new(mean_component(mesh, m, 0), mean_component(mesh, m, 1), mean_component(mesh, m, 2))
}

/// Runs the configured simulation.
pub fn run(cfg: &SimConfig) -> Result<RunSummary> {
    if cfg.mode == Mode::FineReference {
        return fine::run_fine(cfg);
    }
    let mesh = cfg.mesh.build()?;
    info!(
        "{}: mode {} on {} nodes / {} triangles, h_min = {:.4}",
        cfg.experiment,
        cfg.mode,
        mesh.num_nodes(),
        mesh.num_triangles(),
        mesh.h_min()
    );
    let mut m = NodalField::interpolate(&mesh, |x| cfg.init.eval(x)).renormalize()?;
    let mut files = Vec::new();
    let mut relax_converged = None;
    if let Some(relax) = &cfg.relax {
        // Relaxation uses the homogenized flux at zero applied field.
        let flux = flux_provider(cfg, &mesh, Mode::Homogenized)?;
        let field = field_provider(cfg, &mesh, false)?;
        let (dt, _) = macro_dt(cfg, &mesh, 0.0, Mode::Homogenized, relax.alpha)?;
        let (relaxed, converged, steps) =
            relax_to_equilibrium(&mesh, m, relax.alpha, dt, relax.tolerance, relax.max_steps, flux.as_ref(), &field)?;
        if !converged {
            warn!("relaxation did not converge in {steps} steps");
        }
        info!("relaxed in {steps} steps (converged: {converged})");
        relax_converged = Some(converged);
        m = relaxed;
    }
    let flux = flux_provider(cfg, &mesh, cfg.mode)?;
    let field = field_provider(cfg, &mesh, true)?;
    let (dt, steps) = macro_dt(cfg, &mesh, cfg.t_final, cfg.mode, cfg.alpha)?;
    let solver = MacroSolver::new(&mesh, cfg.alpha)?;
    let snapshot_every = if cfg.snapshots > 0 { steps.div_ceil(cfg.snapshots).max(1) } else { 0 };
    let mut times = vec![0.0];
    let mut means = vec![area_mean(&mesh, &m)];
    let mut crossing = None;
    if let Some(dir) = &cfg.output {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        if snapshot_every > 0 {
            files.push(output::write_snapshot(dir, 0, &mesh, &m)?);
        }
    }
    let mut taken = 0;
    for k in 0..steps {
        let t = k as f64 * dt;
        m = solver
            .step(cfg.stepper, &m, t, dt, flux.as_ref(), &field as &dyn FieldProvider)
            .map_err(|e| Error::Step { step: k + 1, source: Box::new(e) })?;
        taken = k + 1;
        times.push((k + 1) as f64 * dt);
        means.push(area_mean(&mesh, &m));
        debug!("step {}/{steps}: <M> = {:?}", k + 1, means[k + 1].as_slice());
        if let (Some(dir), true) = (&cfg.output, snapshot_every > 0 && (k + 1) % snapshot_every == 0) {
            files.push(output::write_snapshot(dir, k + 1, &mesh, &m)?);
        }
        if cfg.stop_at_zero_crossing {
            let n = means.len();
            crossing = zero_crossing(&times[n - 2..], &[means[n - 2].x, means[n - 1].x]);
            if let Some(t) = crossing {
                info!("<M_x> crossed zero at t = {t:.5}");
                break;
            }
        }
    }
    if let Some(dir) = &cfg.output {
        files.push(output::write_means(dir, &times, &means)?);
        files.push(output::write_snapshot(dir, usize::MAX, &mesh, &m)?);
        files.push(output::write_manifest(dir, cfg)?);
    }
    Ok(RunSummary { mesh, field: m, times, means, zero_crossing: crossing, dt, steps: taken, relax_converged, files })
}
