use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hmm_core::homogenize::{frozen_tensor, homogenized_tensor, DEFAULT_RESOLUTION};
use hmm_core::material::{CoefficientKind, MaterialCoefficient};
use hmm_core::runner::{self, convergence_study, load_config, parse_override, ConfigMap, SimConfig};
use hmm_core::upscale::{parameter_sweep, PatchProblem, SweepAxis};
use hmm_core::{Error, Point, Result};

#[derive(Parser)]
#[command(name = "llhmm", version, about = "Multiscale Landau-Lifshitz solver")]
struct Cli {
    /// Worker threads for micro problems (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Configuration file.
    config: Option<PathBuf>,
    /// Start from a named experiment preset.
    #[arg(long, short)]
    experiment: Option<String>,
    /// `key=value` settings applied after the file.
    #[arg(long = "override", short = 'o', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SimConfig> {
        let mut map = match &self.config {
            Some(path) => load_config(path)?,
            None => ConfigMap::new(),
        };
        if let Some(name) = &self.experiment {
            map.insert("experiment".into(), name.clone());
        }
        for o in &self.overrides {
            let (k, v) = parse_override(o)?;
            map.insert(k, v);
        }
        SimConfig::from_map(&map)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write snapshots, mean series and a manifest.
    Simulate(ConfigArgs),
    /// Print the homogenized tensor of a coefficient as CSV.
    Homogenize {
        /// constant, laminate, periodic_product, periodic_exp or locally_periodic.
        coefficient: String,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        /// Coefficient parameters such as `mean=2`.
        #[arg(long, value_name = "KEY=VALUE")]
        param: Vec<String>,
        /// Slow variable for locally periodic coefficients.
        #[arg(long, value_name = "X,Y", default_value = "0,0")]
        at: String,
    },
    /// Upscaling error of one triangle while sweeping a micro parameter.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// eta, mu or mu_prime.
        #[arg(long)]
        axis: SweepAxis,
        /// Values in units of ε (mu, mu_prime) or ε² (eta).
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Macro triangle edge length.
        #[arg(long, default_value_t = 0.1)]
        h: f64,
        /// Reference tensor resolution (default: micro points per ε).
        #[arg(long)]
        reference_resolution: Option<usize>,
    },
    /// Mesh-refinement study against a homogenized reference; prints CSV.
    Converge {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        levels: Vec<usize>,
    },
}

fn parse_point(s: &str) -> Result<Point> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("bad point '{s}'")))?;
    match v.as_slice() {
        [x, y] => Ok(Point::new(*x, *y)),
        _ => Err(Error::Config(format!("expected 'x,y', got '{s}'"))),
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.load()?;
            let out = runner::run(&cfg)?;
            let last = out.means.last().copied().unwrap_or_default();
            println!(
                "{}: {} steps of {:.4e}, final <M> = ({:.6}, {:.6}, {:.6})",
                cfg.experiment, out.steps, out.dt, last.x, last.y, last.z
            );
            if let Some(t) = out.zero_crossing {
                println!("<M_x> zero crossing at t = {t:.6}");
            }
            if let Some(c) = out.relax_converged {
                println!("relaxation converged: {c}");
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Homogenize { coefficient, resolution, param, at } => {
            let mut params = BTreeMap::new();
            for p in &param {
                let (k, v) = parse_override(p)?;
                let x = v.parse::<f64>().map_err(|_| Error::Config(format!("parameter '{k}': cannot parse '{v}'")))?;
                params.insert(k, x);
            }
            let coeff = MaterialCoefficient::new(CoefficientKind::by_name(&coefficient, &params)?, 0.1)?;
            let x = parse_point(&at)?;
            let t = if coeff.is_periodic() {
                homogenized_tensor(|y| coeff.cell(x, y), resolution)?
            } else {
                frozen_tensor(&coeff, x, resolution)?
            };
            let m = t.matrix();
            println!("a11,a12,a21,a22");
            println!("{:.10},{:.10},{:.10},{:.10}", m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        }
        Command::Sweep { config, axis, values, h, reference_resolution } => {
            let cfg = config.load()?;
            let coeff = cfg.coefficient()?;
            let micro = cfg.micro_config(&coeff)?;
            let kernels = cfg.kernels()?;
            let problem = PatchProblem::equilateral(Point::zeros(), h, PatchProblem::default_field)?;
            let n = reference_resolution.unwrap_or(cfg.micro.points_per_eps);
            let reference = frozen_tensor(&coeff, Point::zeros(), n)?;
            let reports = parameter_sweep(axis, &values, &micro, &coeff, &problem, &kernels, &reference)?;
            println!("value,error,mu_term,eta_term,grid_term");
            for r in reports {
                println!("{},{:.6e},{:.6e},{:.6e},{:.6e}", r.value, r.error, r.mu_term, r.eta_term, r.grid_term);
            }
        }
        Command::Converge { config, levels } => {
            let cfg = config.load()?;
            let table = convergence_study(&cfg, &levels)?;
            print!("{}", table.to_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}
