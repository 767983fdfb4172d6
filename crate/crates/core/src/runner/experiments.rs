//! Named experiment presets and initial magnetizations.

use std::f64::consts::PI;

use super::config::{parse_config, ConfigMap};
use crate::{Error, Point, Result, Vec3};

/// Registered experiment names.
pub const EXPERIMENTS: [&str; 6] = ["circle", "circle_field", "ring", "landau", "mumag4", "square"];

const CIRCLE: &str = "
experiment = circle
mode = hmm
init = vortex
t_final = 1.0
alpha = 0.2
epsilon = 1e-4
mesh.kind = disk
mesh.level = 2
coefficient.name = periodic_product
micro.mu = 2.8
micro.mu_prime = 4.8
micro.eta = 0.45
micro.alpha = 1.2
";

const RING: &str = "
experiment = ring
mode = hmm
init = ring_defect
t_final = 0.3
alpha = 0.02
epsilon = 1e-3
mesh.kind = ring
mesh.r_in = 0.4
mesh.r_out = 1.0
mesh.sectors = 12
mesh.level = 1
coefficient.name = periodic_product
micro.mu = 2.1
micro.mu_prime = 4.25
micro.eta = 0.3
micro.alpha = 1.2
";

// 250 nm x 250 nm x 2 nm permalloy (A = 1.3e-11 J/m, Ms = 8e5 A/m), lengths in
// units of L = 250 nm. Fields are in units of Ms times the exchange factor
// (L / l_ex)^2 = 1933.3, time in units of L^2 / (gamma0 Ms l_ex^2) = 10.92 ns,
// so 0.5 ns is 0.04578.
const LANDAU: &str = "
experiment = landau
mode = hmm
init = landau
t_final = 0.04578
alpha = 0.05
epsilon = 1e-3
mesh.kind = rectangle
mesh.lx = 1.0
mesh.ly = 1.0
mesh.nx = 16
mesh.ny = 16
coefficient.name = periodic_exp
micro.mu = 2.1
micro.mu_prime = 5.5
micro.eta = 0.3
micro.alpha = 1.2
demag.enabled = true
demag.thickness = 0.008
demag.scale = 1933.3
";

// 500 nm x 125 nm x 3 nm, L = 125 nm: exchange factor 483.3, time unit 2.730 ns.
// The applied field (-24.6, 4.3, 0) mT / mu0 is (-0.024470, 0.0042773, 0) Ms,
// i.e. (-11.826, 2.0672, 0) in solver units.
const MUMAG4: &str = "
experiment = mumag4
mode = hmm
init = s_state
t_final = 0.3
alpha = 0.02
epsilon = 1e-3
mesh.kind = rectangle
mesh.lx = 4.0
mesh.ly = 1.0
mesh.nx = 32
mesh.ny = 8
coefficient.name = locally_periodic
micro.mu = 2.1
micro.mu_prime = 6.5
micro.eta = 0.5
micro.alpha = 1.5
demag.enabled = true
demag.thickness = 0.024
demag.scale = 483.3
field.schedule = 0: -11.826 2.0672 0
relax.enabled = true
relax.alpha = 0.5
stop.zero_crossing = true
";

const SQUARE: &str = "
experiment = square
mode = homogenized
init = smooth
t_final = 0.1
alpha = 0.2
epsilon = 0.05
mesh.kind = rectangle
mesh.lx = 1.0
mesh.ly = 1.0
mesh.nx = 32
mesh.ny = 32
coefficient.name = periodic_product
";

/// Default keys of a named experiment.
pub fn preset(name: &str) -> Result<ConfigMap> {
    let text = match name {
        "circle" => CIRCLE.to_string(),
        "circle_field" => {
            format!("{CIRCLE}\nexperiment = circle_field\nt_final = 1.5\nfield.schedule = 0.5: 10 10 0\n")
        }
        "ring" => RING.to_string(),
        "landau" => LANDAU.to_string(),
        "mumag4" => MUMAG4.to_string(),
        "square" => SQUARE.to_string(),
        other => {
            return Err(Error::Config(format!("unknown experiment '{other}' (known: {})", EXPERIMENTS.join(", "))))
        }
    };
    parse_config(&text)
}

/// Initial magnetization families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// `(-x_2/r sin(πr/2), x_1/r sin(πr/2), cos(πr/2))`.
    Vortex,
    /// `(-x_2/r, x_1/r, 0)` with `e_1` on the sector within π/12 of the positive `x_2` axis.
    RingDefect,
    /// `e_2` for `x_1 < 0.5`, `-e_2` otherwise.
    Landau,
    /// `(cos(πx_1/8), sin(πx_1/8), 0)`.
    SState,
    /// Smooth out-of-plane-tilted field for the structured square.
    Smooth,
    Uniform(Vec3),
}

impl InitialCondition {
    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match name {
            "vortex" => Self::Vortex,
            "ring_defect" => Self::RingDefect,
            "landau" => Self::Landau,
            "s_state" => Self::SState,
            "smooth" => Self::Smooth,
            other => {
                if let Some(v) = other.strip_prefix("uniform:") {
                    let v = super::parse_vec3(v)?;
                    if v.norm() == 0.0 {
                        return Err(Error::Config("uniform initial field must be nonzero".into()));
                    }
                    Self::Uniform(v.normalize())
                } else {
                    return Err(Error::Config(format!(
                        "unknown initial condition '{other}' (vortex, ring_defect, landau, s_state, smooth, uniform:x y z)"
                    )));
                }
            }
        })
    }

    pub fn eval(&self, x: Point) -> Vec3 {
        let r = x.norm();
        match self {
            Self::Vortex => {
                // sin(πr/2)/r tends to π/2 at the center.
                let s = if r < 1e-14 { 0.5 * PI } else { (0.5 * PI * r).sin() / r };
                Vec3::new(-x.y * s, x.x * s, (0.5 * PI * r).cos())
            }
            Self::RingDefect => {
                let theta = x.y.atan2(x.x);
                if (theta - 0.5 * PI).abs() < PI / 12.0 {
                    Vec3::x()
                } else {
                    Vec3::new(-x.y / r, x.x / r, 0.0)
                }
            }
            Self::Landau => {
                if x.x < 0.5 {
                    Vec3::y()
                } else {
                    -Vec3::y()
                }
            }
            Self::SState => Vec3::new((PI * x.x / 8.0).cos(), (PI * x.x / 8.0).sin(), 0.0),
            Self::Smooth => {
                let theta = 0.25 * PI + 0.5 * PI * x.x * x.y;
                let phi = PI * (x.x - 0.5 * x.y);
                Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos())
            }
            Self::Uniform(v) => *v,
        }
    }
}
