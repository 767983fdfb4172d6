//! Oscillatory exchange coefficients `a^ε(x) = a(x, x/ε)`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::{Error, Point, Result};

/// Closed registry of coefficient families. `y` is the fast variable `x/ε`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientKind {
    /// `a = value`.
    Constant(f64),
    /// `a(y) = mean + amplitude * sin(2π y_1)`.
    Laminate { mean: f64, amplitude: f64 },
    /// `a(y) = (1.1 + 0.25 sin 2πy_1)(1.1 + 0.25 sin 2πy_2) + 0.7 cos 2π(y_1 - y_2)`.
    PeriodicProduct,
    /// `a(y) = exp(cos 2π(y_1 + y_2) - 0.25 sin 2πy_1)`.
    PeriodicExp,
    /// `a(x, y) = 1.1 + 0.5 (sin 2πy_1 + sin 2πy_2) cos 2π(x_1 + x_2)`.
    LocallyPeriodic,
    /// A coefficient with its slow variable fixed at `at`.
    Frozen { inner: Box<CoefficientKind>, at: Point },
}

impl CoefficientKind {
    fn value(&self, x: Point, y: Point) -> f64 {
        match self {
            CoefficientKind::Constant(c) => *c,
            CoefficientKind::Laminate { mean, amplitude } => mean + amplitude * (TAU * y.x).sin(),
            CoefficientKind::PeriodicProduct => {
                (1.1 + 0.25 * (TAU * y.x).sin()) * (1.1 + 0.25 * (TAU * y.y).sin()) + 0.7 * (TAU * (y.x - y.y)).cos()
            }
            CoefficientKind::PeriodicExp => ((TAU * (y.x + y.y)).cos() - 0.25 * (TAU * y.x).sin()).exp(),
            CoefficientKind::LocallyPeriodic => {
                1.1 + 0.5 * ((TAU * y.x).sin() + (TAU * y.y).sin()) * (TAU * (x.x + x.y)).cos()
            }
            CoefficientKind::Frozen { inner, at } => inner.value(*at, y),
        }
    }

    fn is_periodic(&self) -> bool {
        !matches!(self, CoefficientKind::LocallyPeriodic)
    }

    /// Registry name.
    pub fn name(&self) -> &'static str {
        match self {
            CoefficientKind::Constant(_) => "constant",
            CoefficientKind::Laminate { .. } => "laminate",
            CoefficientKind::PeriodicProduct => "periodic_product",
            CoefficientKind::PeriodicExp => "periodic_exp",
            CoefficientKind::LocallyPeriodic => "locally_periodic",
            CoefficientKind::Frozen { .. } => "frozen",
        }
    }

    /// Looks a family up by name. Parameters: `value` (constant), `mean` and
    /// `amplitude` (laminate).
    pub fn by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
        Ok(match name {
            "constant" => CoefficientKind::Constant(get("value", 1.0)),
            "laminate" => CoefficientKind::Laminate { mean: get("mean", 2.0), amplitude: get("amplitude", 1.0) },
            "periodic_product" => CoefficientKind::PeriodicProduct,
            "periodic_exp" => CoefficientKind::PeriodicExp,
            "locally_periodic" => CoefficientKind::LocallyPeriodic,
            other => return Err(Error::Config(format!("unknown coefficient '{other}'"))),
        })
    }
}

/// Evaluator for `a^ε` with sampled positive bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialCoefficient {
    kind: CoefficientKind,
    epsilon: f64,
    a_min: f64,
    a_max: f64,
}

const BOUND_SAMPLES: usize = 1000;

impl MaterialCoefficient {
    /// Validates `0 < ε < 1` and estimates the bounds by dense sampling; fails
    /// if the sampled minimum is not positive.
    pub fn new(kind: CoefficientKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        let (a_min, a_max) = sample_bounds(&kind);
        if !(a_min > 0.0) || !a_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coefficient '{}' is not uniformly positive (sampled range [{a_min}, {a_max}])",
                kind.name()
            )));
        }
        Ok(Self { kind, epsilon, a_min, a_max })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(CoefficientKind::Constant(value), 0.5)
    }

    pub fn kind(&self) -> &CoefficientKind {
        &self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn is_periodic(&self) -> bool {
        self.kind.is_periodic()
    }

    /// Same coefficient family at a different scale.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(Self { epsilon, ..self.clone() })
    }

    /// `a^ε(x) = a(x, x/ε)`.
    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        self.kind.value(x, x / self.epsilon)
    }

    /// The cell function `y -> a(x, y)` at a fixed slow point.
    #[inline]
    pub fn cell(&self, x: Point, y: Point) -> f64 {
        self.kind.value(x, y)
    }

    /// Freezes the slow variable at `x`, producing a periodic coefficient.
    pub fn frozen(&self, x: Point) -> Self {
        let kind = match &self.kind {
            CoefficientKind::LocallyPeriodic => CoefficientKind::Frozen { inner: Box::new(self.kind.clone()), at: x },
            other => other.clone(),
        };
        let (a_min, a_max) = sample_bounds(&kind);
        Self { kind, a_min, a_max, ..*self }
    }

    /// Mean of the cell function over one period cell.
    pub fn average(&self) -> Result<f64> {
        if !self.is_periodic() {
            return Err(Error::Unsupported(
                "a locally periodic coefficient has no single cell average; freeze it first".into(),
            ));
        }
        let origin = Point::zeros();
        let mut n = 16;
        let mut prev = cell_mean(&self.kind, origin, n);
        loop {
            n *= 2;
            let cur = cell_mean(&self.kind, origin, n);
            if (cur - prev).abs() <= 1e-12 * cur.abs().max(1.0) || n >= 4096 {
                return Ok(cur);
            }
            prev = cur;
        }
    }
}

/// Midpoint rule on an `n x n` grid; spectrally accurate for smooth periodic functions.
fn cell_mean(kind: &CoefficientKind, x: Point, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut s = 0.0;
    for j in 0..n {
        for i in 0..n {
            s += kind.value(x, Point::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h));
        }
    }
    s * h * h
}

fn sample_bounds(kind: &CoefficientKind) -> (f64, f64) {
    if let CoefficientKind::Constant(c) = kind {
        return (*c, *c);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut visit = |v: f64| {
        lo = lo.min(v);
        hi = hi.max(v);
    };
    if kind.is_periodic() {
        let h = 1.0 / BOUND_SAMPLES as f64;
        for j in 0..BOUND_SAMPLES {
            for i in 0..BOUND_SAMPLES {
                visit(kind.value(Point::zeros(), Point::new(i as f64 * h, j as f64 * h)));
            }
        }
    } else {
        // 100 slow phases times a 100 x 100 fast grid.
        let m = 100;
        let h = 1.0 / m as f64;
        for s in 0..m {
            let x = Point::new(s as f64 * h, 0.0);
            for j in 0..m {
                for i in 0..m {
                    visit(kind.value(x, Point::new(i as f64 * h, j as f64 * h)));
                }
            }
        }
    }
    (lo, hi)
}
